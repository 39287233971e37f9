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

#include "l2b/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <unordered_map>

namespace l2b {

std::string to_string(ClockMode mode) { return mode == ClockMode::pseudo ? "pseudo" : "wall"; }

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::budget_exhausted: return "budget-exhausted";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "?";
}

namespace {

struct OpenEntry {
  double bound;
  std::int64_t id;
  // priority_queue pops the largest; invert so the lowest bound, then the
  // lowest id, comes first.
  bool operator<(const OpenEntry& o) const {
    if (bound != o.bound) return bound > o.bound;
    return id > o.id;
  }
};

struct PendingDecision {
  std::shared_ptr<const BipartiteObservation> obs;
  std::vector<int> candidates;
  int action;
  std::int64_t clock;
  StateDigest digest;
};

double prune_tol(double inc) { return std::max(1e-9, 1e-9 * std::abs(inc)); }

class Engine {
 public:
  Engine(const MilpInstance& inst, BranchingPolicy& policy, const Budget& budget, const SolveOptions& options)
      : inst_(inst),
        policy_(policy),
        budget_(budget),
        options_(options),
        solver_(inst),
        rows_(RowView::build(inst)),
        pseudocosts_(inst.num_vars),
        rng_(options.seed),
        start_(std::chrono::steady_clock::now()) {}

  SolveResult run();

 private:
  std::int64_t now() const {
    if (options_.clock_mode == ClockMode::pseudo) return pseudo_clock_;
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start_).count();
  }
  void charge(const LpSolution& lp) { pseudo_clock_ += lp.iterations + 1; }
  void raise_bound(double z) {
    if (std::isfinite(z) && z > zstar_) {
      zstar_ = z;
      result_.trace.record(now(), zstar_);
    }
  }
  double open_bound() const {
    double z = has_incumbent() ? result_.incumbent_value : kInf;
    if (!open_.empty()) z = std::min(z, open_.top().bound);
    return z;
  }
  bool has_incumbent() const { return result_.incumbent.has_value(); }
  void offer_incumbent(const LpSolution& lp) {
    if (!has_incumbent() || lp.objective < result_.incumbent_value) {
      result_.incumbent = lp.x;
      result_.incumbent_value = lp.objective;
    }
  }
  void push(BnbNode node) {
    open_.push({node.lp.objective, node.id});
    nodes_.emplace(node.id, std::move(node));
  }
  void branch(BnbNode node);
  void finish_episode();

  const MilpInstance& inst_;
  BranchingPolicy& policy_;
  Budget budget_;
  SolveOptions options_;
  LpSolver solver_;
  RowView rows_;
  PseudocostStore pseudocosts_;
  Rng rng_;
  std::chrono::steady_clock::time_point start_;

  std::int64_t pseudo_clock_ = 0;
  double zstar_ = -kInf;
  std::int64_t next_id_ = 0;
  std::priority_queue<OpenEntry> open_;
  std::unordered_map<std::int64_t, BnbNode> nodes_;
  std::vector<PendingDecision> decisions_;
  SolveResult result_;
};

void Engine::branch(BnbNode node) {
  const std::int64_t decision_clock = now();
  BranchContext ctx(solver_, rows_, node.overrides, node.lp, node.candidates, node.depth, zstar_, pseudocosts_,
                    rng_);
  PendingDecision decision;
  if (options_.record_episode) {
    decision.obs = ctx.shared_observation();
    decision.digest = f_dim(*decision.obs, node.candidates);
  }
  const int a = policy_.select(ctx);
  if (std::find(node.candidates.begin(), node.candidates.end(), a) == node.candidates.end()) {
    throw BnbError("policy " + policy_.name() + " returned non-candidate index " + std::to_string(a) + " at node " +
                   std::to_string(node.id));
  }
  pseudo_clock_ += ctx.probe_cost();

  ChildProbe children;
  if (const ChildProbe* cached = ctx.cached_probe(a)) {
    children = *cached;
  } else {
    children = probe_children(solver_, node.overrides, node.lp, a);
    charge(children.down);
    charge(children.up);
    const double f = node.lp.x[a] - std::floor(node.lp.x[a]);
    pseudocosts_.update(a, BranchDir::down, node.lp.objective, children.down.status, children.down.objective, f);
    pseudocosts_.update(a, BranchDir::up, node.lp.objective, children.up.status, children.up.objective, 1.0 - f);
  }
  ++result_.nodes_processed;

  const double v = node.lp.x[a];
  const BoundOverride tighten[2] = {{a, BoundSide::upper, std::floor(v)}, {a, BoundSide::lower, std::ceil(v)}};
  LpSolution* child_lp[2] = {&children.down, &children.up};
  for (int side = 0; side < 2; ++side) {
    LpSolution& lp = *child_lp[side];
    if (lp.status == LpStatus::infeasible) continue;
    if (lp.status != LpStatus::optimal) {
      throw BnbError("child LP of node " + std::to_string(node.id) + " ended with status " + to_string(lp.status));
    }
    auto cands = fractional_candidates(inst_, lp.x);
    if (cands.empty()) {
      offer_incumbent(lp);
      continue;
    }
    if (has_incumbent() && lp.objective >= result_.incumbent_value - prune_tol(result_.incumbent_value)) continue;
    BnbNode child;
    child.id = next_id_++;
    child.parent = node.id;
    child.depth = node.depth + 1;
    child.overrides = node.overrides;
    child.overrides.push_back(tighten[side]);
    child.lp = std::move(lp);
    child.candidates = std::move(cands);
    push(std::move(child));
  }

  if (options_.record_episode) {
    decision.candidates = std::move(node.candidates);
    decision.action = a;
    decision.clock = decision_clock;
    decisions_.push_back(std::move(decision));
  }
}

SolveResult Engine::run() {
  if (budget_.max_nodes <= 0 || budget_.max_clock <= 0) throw std::invalid_argument("budget must be positive");
  result_.trace.horizon = budget_.max_clock;
  result_.episode.instance_id = inst_.name;
  result_.episode.seed = options_.seed;
  result_.episode.policy = policy_.name();

  LpSolution root = solver_.solve();
  if (root.status == LpStatus::unbounded) throw BnbError("root relaxation of " + inst_.name + " is unbounded");
  if (root.status == LpStatus::iteration_limit) throw BnbError("root LP of " + inst_.name + " hit the iteration limit");
  start_ = std::chrono::steady_clock::now();

  bool exhausted = false;
  if (root.status == LpStatus::infeasible) {
    result_.status = SolveStatus::infeasible;
  } else {
    zstar_ = root.objective;
    result_.trace.record(0, zstar_);
    auto cands = fractional_candidates(inst_, root.x);
    if (cands.empty()) {
      offer_incumbent(root);
    } else {
      policy_.reset(solver_, root);
      BnbNode node;
      node.id = next_id_++;
      node.lp = std::move(root);
      node.candidates = std::move(cands);
      push(std::move(node));
    }
    while (!open_.empty()) {
      const OpenEntry top = open_.top();
      if (has_incumbent() && top.bound >= result_.incumbent_value - prune_tol(result_.incumbent_value)) break;
      if (result_.nodes_processed >= budget_.max_nodes || now() >= budget_.max_clock) {
        exhausted = true;
        break;
      }
      open_.pop();
      auto it = nodes_.find(top.id);
      BnbNode node = std::move(it->second);
      nodes_.erase(it);
      branch(std::move(node));
      raise_bound(open_bound());
    }
    if (!exhausted) {
      if (has_incumbent()) {
        result_.status = SolveStatus::optimal;
        raise_bound(result_.incumbent_value);
      } else {
        result_.status = SolveStatus::infeasible;
      }
    } else {
      result_.status = SolveStatus::budget_exhausted;
    }
  }

  result_.clock = now();
  result_.dual_bound = zstar_;
  double opt;
  if (options_.reference_value) {
    opt = *options_.reference_value;
  } else if (has_incumbent()) {
    opt = result_.incumbent_value;
  } else {
    opt = result_.trace.events.empty() ? 0.0 : zstar_;
  }
  result_.trace.opt_value = opt;
  result_.dual_integral = dual_integral(result_.trace);
  finish_episode();
  return std::move(result_);
}

void Engine::finish_episode() {
  Episode& ep = result_.episode;
  ep.trace = result_.trace;
  ep.dual_integral = result_.dual_integral;
  if (!options_.record_episode) return;
  const std::size_t n = decisions_.size();
  ep.transitions.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    Transition& tr = ep.transitions[t];
    PendingDecision& d = decisions_[t];
    const double t0 = static_cast<double>(d.clock);
    const double t1 = t + 1 < n ? static_cast<double>(decisions_[t + 1].clock) : static_cast<double>(ep.trace.horizon);
    tr.obs = d.obs;
    tr.candidates = d.candidates;
    tr.action = d.action;
    tr.clock = d.clock;
    tr.digest = d.digest;
    tr.reward = -gap_area(ep.trace, t0, t1);
    tr.done = t + 1 == n;
    if (!tr.done) {
      tr.next_obs = decisions_[t + 1].obs;
      tr.next_candidates = decisions_[t + 1].candidates;
      tr.next_digest = decisions_[t + 1].digest;
    }
  }
}

}  // namespace

SolveResult solve(const MilpInstance& inst, BranchingPolicy& policy, const Budget& budget,
                  const SolveOptions& options) {
  Engine engine(inst, policy, budget, options);
  return engine.run();
}

nlohmann::json solve_result_to_json(const SolveResult& r) {
  nlohmann::json ev = nlohmann::json::array();
  for (const TraceEvent& e : r.trace.events) ev.push_back({e.clock, e.bound});
  nlohmann::json tr = nlohmann::json::array();
  for (const Transition& t : r.episode.transitions) {
    tr.push_back({{"digest", t.digest.hex()}, {"a", t.action}, {"r", t.reward}, {"d", t.done}, {"clock", t.clock}});
  }
  nlohmann::json j = {{"status", to_string(r.status)},
                      {"incumbent_value", r.incumbent_value},
                      {"dual_bound", r.dual_bound},
                      {"nodes", r.nodes_processed},
                      {"clock", r.clock},
                      {"horizon", r.trace.horizon},
                      {"opt_value", r.trace.opt_value},
                      {"dual_integral", r.dual_integral},
                      {"events", std::move(ev)},
                      {"transitions", std::move(tr)}};
  if (r.incumbent) j["incumbent"] = *r.incumbent;
  return j;
}

}  // namespace l2b
