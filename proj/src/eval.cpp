// Copyright 2026 The l2b Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "l2b/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "l2b/parallel.hpp"
#include "l2b/rng.hpp"

namespace l2b {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_or_nan(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

EvalRow run_one(const PolicyFactory& factory, const EvalInstance& item, const EvalOptions& options) {
  EvalRow row;
  row.instance_id = item.id;
  try {
    item.instance.validate();
    std::unique_ptr<BranchingPolicy> policy = factory();
    if (!policy) throw EvalError("policy factory returned null");
    SolveOptions so;
    so.seed = derive_seed(options.seed, item.id);
    so.reference_value = item.reference_value;
    so.clock_mode = options.clock_mode;
    const SolveResult r = solve(item.instance, *policy, options.budget, so);
    row.status = to_string(r.status);
    row.opt_value = r.trace.opt_value;
    row.reward_constant = default_reward_constant(r.trace);
    row.dual_integral = r.dual_integral;
    row.reward = cumulative_reward(r.trace, row.reward_constant);
    row.dual_bound = r.dual_bound;
    row.incumbent_value = r.incumbent_value;
    row.nodes = r.nodes_processed;
    row.clock = r.clock;
    row.trace = r.trace;
  } catch (const std::exception& e) {
    row = EvalRow{};
    row.instance_id = item.id;
    row.status = "error";
    row.error = e.what();
    row.opt_value = row.reward_constant = row.dual_integral = row.reward = kNaN;
    row.dual_bound = row.incumbent_value = kNaN;
  }
  return row;
}

}  // namespace

PolicyFactory make_policy_factory(std::string_view name, std::shared_ptr<const GcnnParams> params,
                                  const HybridConfig& hybrid) {
  if (name == "most-infeasible") return [] { return std::make_unique<MostInfeasiblePolicy>(); };
  if (name == "pseudocost") return [] { return std::make_unique<PseudocostPolicy>(); };
  if (name == "strong") return [] { return std::make_unique<StrongBranchingPolicy>(); };
  if (name == "active-constraint") return [] { return std::make_unique<ActiveConstraintPolicy>(); };
  if (name == "hybrid") return [hybrid] { return std::make_unique<HybridPolicy>(hybrid); };
  if (name == "random") return [] { return std::make_unique<RandomPolicy>(); };
  if (name == "gcnn") {
    if (!params) throw EvalError("policy gcnn needs trained parameters");
    return [params] { return std::make_unique<GcnnPolicy>(params); };
  }
  throw EvalError("unknown policy '" + std::string(name) + "'");
}

std::vector<std::string> builtin_policy_names() {
  return {"most-infeasible", "pseudocost", "strong", "active-constraint", "hybrid", "random", "gcnn"};
}

EvalAggregate aggregate_rows(std::span<const EvalRow> rows) {
  EvalAggregate a;
  a.instances = rows.size();
  std::vector<double> rewards;
  double integral = 0.0, nodes = 0.0;
  for (const EvalRow& r : rows) {
    if (!r.ok()) {
      ++a.errors;
      continue;
    }
    rewards.push_back(r.reward);
    integral += r.dual_integral;
    nodes += static_cast<double>(r.nodes);
  }
  if (rewards.empty()) {
    a.mean_reward = a.median_reward = a.mean_integral = a.mean_nodes = kNaN;
    return a;
  }
  const double k = static_cast<double>(rewards.size());
  a.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) / k;
  a.mean_integral = integral / k;
  a.mean_nodes = nodes / k;
  std::sort(rewards.begin(), rewards.end());
  const std::size_t mid = rewards.size() / 2;
  a.median_reward = rewards.size() % 2 ? rewards[mid] : 0.5 * (rewards[mid - 1] + rewards[mid]);
  return a;
}

EvalReport evaluate_policy(const PolicyFactory& factory, std::span<const EvalInstance> instances,
                           const EvalOptions& options, const std::string& policy_label) {
  if (options.workers < 1) throw EvalError("workers must be at least 1");
  EvalReport rep;
  rep.seed = options.seed;
  rep.budget = options.budget;
  rep.clock_mode = options.clock_mode;
  rep.policy = policy_label;
  if (rep.policy.empty()) {
    try {
      rep.policy = factory()->name();
    } catch (const std::exception&) {
      rep.policy = "unknown";
    }
  }
  rep.rows.resize(instances.size());
  parallel_for(instances.size(), options.workers,
               [&](std::size_t i) { rep.rows[i] = run_one(factory, instances[i], options); });
  std::stable_sort(rep.rows.begin(), rep.rows.end(),
                   [](const EvalRow& a, const EvalRow& b) { return a.instance_id < b.instance_id; });
  rep.aggregate = aggregate_rows(rep.rows);
  return rep;
}

void attach_reference_values(std::vector<EvalInstance>& instances, std::int64_t max_nodes, int workers) {
  Budget b;
  b.max_nodes = max_nodes;
  b.max_clock = std::numeric_limits<std::int64_t>::max() / 4;
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    try {
      instances[i].instance.validate();
      MostInfeasiblePolicy p;
      const SolveResult r = solve(instances[i].instance, p, b);
      if (r.status == SolveStatus::optimal) instances[i].reference_value = r.incumbent_value;
    } catch (const std::exception&) {
      // evaluation reports the failure as an error row
    }
  });
}

nlohmann::json report_to_json(const EvalReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& r : rep.rows) {
    nlohmann::json ev = nlohmann::json::array();
    for (const TraceEvent& e : r.trace.events) ev.push_back({e.clock, e.bound});
    nlohmann::json j = {{"instance", r.instance_id},
                        {"status", r.status},
                        {"opt_value", finite_or_null(r.opt_value)},
                        {"reward_constant", finite_or_null(r.reward_constant)},
                        {"dual_integral", finite_or_null(r.dual_integral)},
                        {"reward", finite_or_null(r.reward)},
                        {"dual_bound", finite_or_null(r.dual_bound)},
                        {"incumbent_value", finite_or_null(r.incumbent_value)},
                        {"nodes", r.nodes},
                        {"clock", r.clock},
                        {"horizon", r.trace.horizon},
                        {"events", std::move(ev)}};
    if (!r.ok()) j["error"] = r.error;
    rows.push_back(std::move(j));
  }
  const EvalAggregate& a = rep.aggregate;
  return {{"type", "eval_report"},
          {"fingerprint",
           {{"policy", rep.policy},
            {"seed", rep.seed},
            {"max_nodes", rep.budget.max_nodes},
            {"max_clock", rep.budget.max_clock},
            {"clock_mode", to_string(rep.clock_mode)},
            {"reproducible", rep.clock_mode == ClockMode::pseudo}}},
          {"aggregate",
           {{"instances", a.instances},
            {"errors", a.errors},
            {"mean_reward", finite_or_null(a.mean_reward)},
            {"median_reward", finite_or_null(a.median_reward)},
            {"mean_integral", finite_or_null(a.mean_integral)},
            {"mean_nodes", finite_or_null(a.mean_nodes)}}},
          {"rows", std::move(rows)}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "eval_report") throw EvalError("not an evaluation report");
  EvalReport rep;
  try {
    const auto& f = j.at("fingerprint");
    rep.policy = f.at("policy").get<std::string>();
    rep.seed = f.at("seed").get<std::uint64_t>();
    rep.budget.max_nodes = f.at("max_nodes").get<std::int64_t>();
    rep.budget.max_clock = f.at("max_clock").get<std::int64_t>();
    rep.clock_mode = f.at("clock_mode").get<std::string>() == "wall" ? ClockMode::wall : ClockMode::pseudo;
    for (const auto& rj : j.at("rows")) {
      EvalRow r;
      r.instance_id = rj.at("instance").get<std::string>();
      r.status = rj.at("status").get<std::string>();
      r.error = rj.value("error", "");
      r.opt_value = number_or_nan(rj.at("opt_value"));
      r.reward_constant = number_or_nan(rj.at("reward_constant"));
      r.dual_integral = number_or_nan(rj.at("dual_integral"));
      r.reward = number_or_nan(rj.at("reward"));
      r.dual_bound = number_or_nan(rj.at("dual_bound"));
      r.incumbent_value = number_or_nan(rj.at("incumbent_value"));
      r.nodes = rj.at("nodes").get<std::int64_t>();
      r.clock = rj.at("clock").get<std::int64_t>();
      r.trace.horizon = rj.at("horizon").get<std::int64_t>();
      r.trace.opt_value = r.opt_value;
      for (const auto& e : rj.at("events")) r.trace.events.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<double>()});
      rep.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(std::string("malformed evaluation report: ") + e.what());
  }
  rep.aggregate = aggregate_rows(rep.rows);
  return rep;
}

std::string report_to_csv(const EvalReport& rep) {
  std::ostringstream out;
  out << "instance,status,opt_value,reward_constant,dual_integral,reward,dual_bound,incumbent_value,nodes,clock\n";
  for (const EvalRow& r : rep.rows) {
    out << r.instance_id << ',' << r.status << ',' << num(r.opt_value) << ',' << num(r.reward_constant) << ','
        << num(r.dual_integral) << ',' << num(r.reward) << ',' << num(r.dual_bound) << ','
        << num(r.incumbent_value) << ',' << r.nodes << ',' << r.clock << '\n';
  }
  return out.str();
}

std::string plot_data_csv(const EvalReport& rep) {
  std::ostringstream out;
  out << "instance,clock,bound\n";
  for (const EvalRow& r : rep.rows) {
    for (const TraceEvent& e : r.trace.events) out << r.instance_id << ',' << e.clock << ',' << num(e.bound) << '\n';
  }
  return out.str();
}

CheckpointCandidate load_checkpoint_candidate(const std::string& path, const std::string& id, int epoch,
                                              double valid_loss) {
  CheckpointCandidate c;
  c.id = id;
  c.epoch = epoch;
  c.valid_loss = valid_loss;
  try {
    c.params = std::make_shared<const GcnnParams>(load_checkpoint(path));
  } catch (const std::exception& e) {
    c.load_error = e.what();
  }
  return c;
}

CheckpointSelection select_best_checkpoint(std::span<const CheckpointCandidate> candidates,
                                           std::span<const EvalInstance> validation, const EvalOptions& options) {
  if (candidates.empty()) throw EvalError("no checkpoints to select from");
  CheckpointSelection sel;
  bool any = false;
  double best_reward = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const CheckpointCandidate& c = candidates[k];
    CheckpointRow row;
    row.id = c.id;
    row.epoch = c.epoch;
    row.valid_loss = c.valid_loss;
    row.loaded = c.params != nullptr;
    row.error = c.load_error;
    if (row.loaded) {
      row.report = evaluate_policy(make_policy_factory("gcnn", c.params), validation, options, "gcnn:" + c.id);
      const double m = row.report.aggregate.mean_reward;
      // later candidates win ties
      if (!std::isnan(m) && (!any || m >= best_reward)) {
        any = true;
        best_reward = m;
        sel.best = k;
      }
    }
    sel.table.push_back(std::move(row));
  }
  if (!any) {
    std::string why;
    for (const CheckpointRow& r : sel.table) why += "\n  " + r.id + ": " + (r.loaded ? "every instance failed" : r.error);
    throw EvalError("no checkpoint could be evaluated:" + why);
  }
  sel.best_id = sel.table[sel.best].id;
  return sel;
}

std::string checkpoint_table_csv(const CheckpointSelection& sel) {
  std::ostringstream out;
  out << "checkpoint,epoch,valid_loss,mean_reward,mean_integral,errors,selected\n";
  for (std::size_t k = 0; k < sel.table.size(); ++k) {
    const CheckpointRow& r = sel.table[k];
    out << r.id << ',' << r.epoch << ',' << num(r.valid_loss) << ',';
    if (r.loaded) {
      out << num(r.report.aggregate.mean_reward) << ',' << num(r.report.aggregate.mean_integral) << ','
          << r.report.aggregate.errors;
    } else {
      out << "nan,nan,load-failed";
    }
    out << ',' << (k == sel.best ? 1 : 0) << '\n';
  }
  return out.str();
}

Comparison compare_policies(std::span<const NamedPolicy> policies, std::span<const EvalInstance> instances,
                            const EvalOptions& options) {
  Comparison cmp;
  for (const NamedPolicy& p : policies) {
    cmp.reports.push_back(evaluate_policy(p.factory, instances, options, p.name));
    cmp.leaderboard.push_back({p.name, cmp.reports.back().aggregate});
  }
  std::stable_sort(cmp.leaderboard.begin(), cmp.leaderboard.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    const double x = std::isnan(a.aggregate.mean_reward) ? -kInf : a.aggregate.mean_reward;
    const double y = std::isnan(b.aggregate.mean_reward) ? -kInf : b.aggregate.mean_reward;
    return x > y;
  });
  return cmp;
}

std::string leaderboard_csv(const Comparison& cmp) {
  std::ostringstream out;
  out << "rank,policy,mean_reward,median_reward,mean_integral,mean_nodes,errors\n";
  for (std::size_t k = 0; k < cmp.leaderboard.size(); ++k) {
    const LeaderboardRow& r = cmp.leaderboard[k];
    out << k + 1 << ',' << r.policy << ',' << num(r.aggregate.mean_reward) << ',' << num(r.aggregate.median_reward)
        << ',' << num(r.aggregate.mean_integral) << ',' << num(r.aggregate.mean_nodes) << ',' << r.aggregate.errors
        << '\n';
  }
  return out.str();
}

SignTest sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw EvalError("sign test needs paired samples");
  SignTest s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      ++s.wins;
    } else if (a[i] < b[i]) {
      ++s.losses;
    } else {
      ++s.ties;
    }
  }
  const int n = s.wins + s.losses;
  if (n == 0) return s;
  // tail sum in log space: sum_{k >= wins} C(n, k) / 2^n
  double p = 0.0;
  for (int k = s.wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  s.p_value = std::min(1.0, p);
  return s;
}

}  // namespace l2b
