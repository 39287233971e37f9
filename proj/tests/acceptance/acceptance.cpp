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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "checkpoint_fixture.hpp"
#include "gcnn_fixtures.hpp"
#include "l2b/bail.hpp"
#include "l2b/pipeline.hpp"
#include "oracles.hpp"
#include "random_instances.hpp"

using namespace l2b;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and sizes.
constexpr double kMilpTol = 1e-6;
constexpr double kLpTol = 1e-7;
constexpr double kGradTol = 1e-4;
constexpr double kEquivTol = 1e-6;
constexpr double kFreqTol = 0.02;
constexpr double kAlpha = 0.05;
constexpr double kSolverSeconds = 120.0;
constexpr double kPipelineSeconds = 1800.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmtd(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("l2b_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

Outcome solver_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260101);
  const std::vector<std::string> names = {"most-infeasible", "pseudocost", "strong", "active-constraint", "hybrid",
                                          "random"};
  int mismatches = 0, checked = 0, infeasible = 0;
  double worst = 0.0;
  for (int k = 0; k < 300; ++k) {
    const MilpInstance inst = testing::random_binary_milp(rng, 12);
    const std::optional<double> ref = oracle::brute_force_milp(inst);
    for (const std::string& name : names) {
      auto policy = make_policy_factory(name)();
      SolveOptions so;
      so.seed = static_cast<std::uint64_t>(k);
      Budget b;
      b.max_clock = std::int64_t{1} << 40;
      const SolveResult r = solve(inst, *policy, b, so);
      ++checked;
      if (!ref) {
        infeasible += r.status == SolveStatus::infeasible;
        mismatches += r.status != SolveStatus::infeasible;
        continue;
      }
      const double err = r.status == SolveStatus::optimal ? std::abs(r.incumbent_value - *ref) : kInf;
      worst = std::max(worst, err);
      mismatches += !(err <= kMilpTol);
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && secs < kSolverSeconds;
  o.detail = std::to_string(checked) + " solves (300 instances x 6 policies), " + std::to_string(mismatches) +
             " mismatches, worst error " + fmtd("%.2e", worst) + ", " + std::to_string(infeasible / 6) +
             " infeasible instances agreed, " + fmtd("%.1f", secs) + " s (limit 120 s)";
  return o;
}

Outcome lp_oracle() {
  Rng rng(2024);
  int bad = 0, infeasible = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const MilpInstance inst = testing::random_lp(rng, trial);
    const auto ref = oracle::vertex_enumeration(oracle::to_dense(inst));
    const LpSolution s = solve_lp(inst);
    if (!ref) {
      ++infeasible;
      bad += s.status != LpStatus::infeasible;
      continue;
    }
    const double err = s.optimal() ? std::abs(s.objective - *ref) : kInf;
    worst = std::max(worst, err);
    bad += !(err <= kLpTol);
  }
  return {bad == 0, "200 LPs, " + std::to_string(bad) + " mismatches, worst error " + fmtd("%.2e", worst) + ", " +
                        std::to_string(infeasible) + " infeasible agreed"};
}

Outcome dual_integral_arithmetic() {
  DualTrace t;
  t.horizon = 10;
  t.opt_value = 5.0;
  t.record(0, 0.0);
  t.record(4, 5.0);
  const double step = dual_integral(t);

  // instances whose relaxation is already integral
  int root_nonzero = 0, root_count = 0;
  for (int n = 2; n <= 9; ++n) {
    std::string s = "MILP v1 unit " + std::to_string(n) + " 1 " + std::to_string(n) + "\nOBJ";
    for (int j = 0; j < n; ++j) s += " -" + std::to_string(j + 1);
    s += "\nROW 0 " + std::to_string(n / 2) + " " + std::to_string(n);
    for (int j = 0; j < n; ++j) s += " " + std::to_string(j) + " 1";
    s += "\n";
    for (int j = 0; j < n; ++j) s += "BND " + std::to_string(j) + " 0 1\n";
    const MilpInstance inst = parse_instance(s);
    for (const std::string& name : {"most-infeasible", "strong", "hybrid", "random"}) {
      auto p = make_policy_factory(name)();
      const SolveResult r = solve(inst, *p, {});
      ++root_count;
      root_nonzero += !(r.dual_integral == 0.0 && r.nodes_processed == 0);
    }
  }
  return {step == 20.0 && root_nonzero == 0, "step trace integral " + fmtd("%.17g", step) + " (expected 20), " +
                                                 std::to_string(root_count - root_nonzero) + "/" +
                                                 std::to_string(root_count) + " root-solved runs with integral 0"};
}

// Value targets sit between 1e-3 and 0.1 from the forward value, alternating
// sides so both indicator branches are covered. With violations of order 1
// and K = 1000 the loss reaches several hundred and the h = 1e-5 central
// difference loses about 1e-8 to roundoff, which hides small coordinates;
// that batch is still run and reported, but does not decide the outcome.
Outcome gradient_correctness() {
  Rng rng(404);
  GcnnParams p = GcnnParams::initialized(404);
  auto batch = testing::random_batch(rng, p, 8);
  const auto wide = batch;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double v = gcnn_forward(p, *batch[k].obs).value;
    const double off = 1e-3 + 0.099 * uniform01(rng);
    batch[k].target = k % 2 == 0 ? v + off : v - off;
  }
  LossConfig ce;
  ce.ridge = 1e-3;
  LossConfig env;
  env.kind = LossKind::value_envelope;
  env.ridge = 1e-3;
  env.penalty_k = 1000.0;
  const double e1 = testing::gradient_check(p, batch, ce, rng, 50);
  const double e2 = testing::gradient_check(p, batch, env, rng, 50);
  const double e3 = testing::gradient_check(p, wide, env, rng, 50);
  return {e1 < kGradTol && e2 < kGradTol,
          "h = 1e-5, 50 coordinates each: cross-entropy worst relative error " + fmtd("%.2e", e1) +
              ", envelope K=1000 " + fmtd("%.2e", e2) + " (limit 1e-4); informational, envelope with unit-scale "
              "violations (loss " + fmtd("%.0f", batch_loss(p, wide, env)) + ") " + fmtd("%.2e", e3)};
}

Outcome equivariance() {
  Rng rng(505);
  const GcnnParams p = GcnnParams::initialized(505);
  double worst_logit = 0.0, worst_value = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const BipartiteObservation obs =
        testing::random_observation(rng, 2 + static_cast<int>(uniform_index(rng, 20)),
                                    1 + static_cast<int>(uniform_index(rng, 8)), true);
    std::vector<int> perm(obs.num_vars);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle_in_place(perm, rng);
    const auto a = gcnn_forward(p, obs);
    const auto b = gcnn_forward(p, testing::permute_variables(obs, perm));
    for (int j = 0; j < obs.num_vars; ++j) worst_logit = std::max(worst_logit, std::abs(a.logits[j] - b.logits[perm[j]]));
    worst_value = std::max(worst_value, std::abs(a.value - b.value));
  }
  return {worst_logit <= kEquivTol && worst_value <= kEquivTol,
          "100 permutations: worst logit deviation " + fmtd("%.2e", worst_logit) + ", value " +
              fmtd("%.2e", worst_value) + " (limit 1e-6)"};
}

Outcome bail_mechanics() {
  std::vector<Episode> eps;
  for (int k = 0; k < 12; ++k) {
    InstanceFamilySpec spec;
    spec.n = 16;
    spec.m = 4;
    spec.seed = static_cast<std::uint64_t>(7000 + k);
    HybridPolicy policy;
    SolveOptions so;
    so.record_episode = true;
    so.seed = spec.seed;
    SolveResult r = solve(generate_instance(spec), policy, {}, so);
    r.episode.instance_id = "b" + std::to_string(k);
    eps.push_back(std::move(r.episode));
  }
  const ReturnLabeledSet set = compute_returns(eps, 1.0);
  std::size_t k = 0, broken = 0;
  for (const Episode& ep : eps) {
    for (std::size_t t = 0; t < ep.transitions.size(); ++t, ++k) {
      const double next = t + 1 < ep.transitions.size() ? set.entries[k + 1].sample.target : 0.0;
      broken += set.entries[k].sample.target - (ep.transitions[t].reward + next) != 0.0;
    }
  }
  const std::size_t m = set.entries.size();

  const GcnnParams init = GcnnParams::initialized(606);
  EnvelopeConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 606;
  cfg.penalty_k = 1.0;
  const EnvelopeResult soft = train_envelope(set, cfg, &init);
  cfg.penalty_k = 1000.0;
  const EnvelopeResult hard = train_envelope(set, cfg, &init);
  const Selection sel = select_top(set.returns(), hard.values, 15.0);
  const std::size_t want = (15 * m + 99) / 100;

  Outcome o;
  o.pass = broken == 0 && m > 0 && sel.indices.size() == want && hard.violation_fraction <= soft.violation_fraction;
  o.detail = std::to_string(m) + " returns with " + std::to_string(broken) + " recursion mismatches; selected " +
             std::to_string(sel.indices.size()) + " (ceil(15% of m) = " + std::to_string(want) +
             "); violation fraction K=1000 " + fmtd("%.4f", hard.violation_fraction) + " vs K=1 " +
             fmtd("%.4f", soft.violation_fraction);
  return o;
}

Outcome hybrid_frequency() {
  const MilpInstance inst = parse_instance("MILP v1 knap 2 1 2\nOBJ -5 -4\nROW 0 4 2 0 2 1 3\nBND 0 0 1\nBND 1 0 1\n");
  const RowView rows = RowView::build(inst);
  const std::vector<double> x{1.0, 2.0 / 3.0};
  const std::vector<int> cands{1};
  const PseudocostStore pc(2);
  bool ok = true;
  std::string detail;
  for (double r0 : {0.2, 0.5, 0.8}) {
    HybridConfig cfg;
    cfg.r0 = r0;
    Rng rng(static_cast<std::uint64_t>(r0 * 977) + 3);
    int count = 0;
    // db = -8 <= DB0 = -7 throughout
    for (int k = 0; k < 10000; ++k) count += hybrid_select(-8.0, -7.0, cfg, rng, inst, rows, x, cands, pc).used_pc;
    const double f = count / 10000.0;
    ok = ok && std::abs(f - r0) <= kFreqTol;
    detail += (detail.empty() ? "" : ", ") + std::string("R0=") + fmtd("%.1f", r0) + " -> " + fmtd("%.4f", f);
  }
  return {ok, "PC frequency over 10,000 draws: " + detail + " (tolerance 0.02)"};
}

Outcome learning_signal() {
  const fs::path root = scratch("c8");
  Config c;
  c.set("run.root", root.string());
  c.set("split.train", "200");
  c.set("split.test", "50");
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline p(c, log);
  p.run_all();
  const double secs = seconds_since(t0);
  const nlohmann::json cmp = nlohmann::json::parse(read_file(root / "reports" / "compare.json"));
  const auto& s = cmp.at("sign_tests").at("random");
  double mine = 0.0, rnd = 0.0;
  for (const auto& r : cmp.at("leaderboard")) {
    if (r.at("policy") == "gcnn") mine = r.at("mean_reward").get<double>();
    if (r.at("policy") == "random") rnd = r.at("mean_reward").get<double>();
  }
  const double pv = s.at("p_value").get<double>();
  Outcome o;
  o.pass = mine > rnd && pv < kAlpha && secs < kPipelineSeconds;
  o.detail = "200 train / 50 held-out " + c.get("family.name") + " (n=" + c.get("family.n") + "): gcnn beats random on " +
             std::to_string(s.at("wins").get<int>()) + ", loses " + std::to_string(s.at("losses").get<int>()) +
             ", one-sided sign test p = " + fmtd("%.3g", pv) + "; mean reward gap " + fmtd("%.1f", mine - rnd) +
             "; pipeline " + fmtd("%.0f", secs) + " s (limit 1800 s)";
  fs::remove_all(root);
  return o;
}

Outcome checkpoint_by_reward() {
  const testing::DisagreeingCheckpoints d = testing::make_disagreeing_checkpoints();
  const CheckpointSelection s = select_best_checkpoint(d.candidates, d.validation, d.options);
  const CheckpointRow& bad = s.table[0];
  const CheckpointRow& good = s.table[1];
  const std::string csv = checkpoint_table_csv(s);
  const bool table_ok = csv.find("valid_loss") != std::string::npos && csv.find("mean_reward") != std::string::npos;
  const bool disagree = bad.valid_loss < good.valid_loss &&
                        good.report.aggregate.mean_reward > bad.report.aggregate.mean_reward;
  return {table_ok && disagree && s.best_id == "good",
          "loss-best checkpoint (loss " + fmtd("%.4f", bad.valid_loss) + ", reward " +
              fmtd("%.1f", bad.report.aggregate.mean_reward) + ") vs reward-best (loss " +
              fmtd("%.4f", good.valid_loss) + ", reward " + fmtd("%.1f", good.report.aggregate.mean_reward) +
              "); selected " + s.best_id};
}

Outcome determinism() {
  const fs::path a = scratch("c10a"), b = scratch("c10b");
  auto config = [](const fs::path& root, int workers) {
    Config c;
    c.set("run.root", root.string());
    c.set("run.workers", std::to_string(workers));
    c.set("split.train", "40");
    c.set("split.valid", "8");
    c.set("split.test", "20");
    c.set("train.epochs", "6");
    return c;
  };
  std::ostringstream log;
  Pipeline(config(a, 1), log).run_all();
  Pipeline(config(b, 4), log).run_all();
  const auto best = [](const fs::path& r) {
    return nlohmann::json::parse(read_file(r / "reports" / "evaluate.json")).at("best_checkpoint").get<std::string>();
  };
  int differing = 0, compared = 0;
  for (const auto& e : fs::directory_iterator(a / "reports")) {
    const std::string name = e.path().filename().string();
    if (name.rfind("eval-", 0) != 0 && name.rfind("compare-", 0) != 0) continue;
    ++compared;
    differing += read_file(e.path()) != read_file(b / "reports" / name);
  }
  const bool same_best = best(a) == best(b);
  Outcome o;
  o.pass = same_best && differing == 0 && compared > 0;
  o.detail = "workers 1 vs 4: best checkpoint " + best(a) + " / " + best(b) + ", " + std::to_string(compared) +
             " evaluation reports compared, " + std::to_string(differing) + " differ";
  fs::remove_all(a);
  fs::remove_all(b);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"solver exactness", solver_exactness},
      {"LP oracle equivalence", lp_oracle},
      {"dual-integral arithmetic", dual_integral_arithmetic},
      {"gradient correctness", gradient_correctness},
      {"GCNN equivariance", equivariance},
      {"BAIL mechanics", bail_mechanics},
      {"hybrid sampler distribution", hybrid_frequency},
      {"learning signal", learning_signal},
      {"checkpoint selection by reward", checkpoint_by_reward},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %s: %s -- %s\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
