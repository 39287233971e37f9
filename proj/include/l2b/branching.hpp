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

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "l2b/lp.hpp"
#include "l2b/milp.hpp"
#include "l2b/observation.hpp"
#include "l2b/pseudocost.hpp"
#include "l2b/rng.hpp"

namespace l2b {

inline constexpr double kScoreEpsilon = 1e-6;
inline constexpr double kInfeasibleGain = 1e6;

// Everything a policy may look at when choosing a branching variable at one
// node. Child probes are cached per variable and their simplex work is
// accumulated in probe_cost() so the engine can charge it to the clock.
class BranchContext {
 public:
  BranchContext(const LpSolver& solver, const RowView& rows, std::span<const BoundOverride> overrides,
                const LpSolution& lp, std::vector<int> candidates, int depth, double dual_bound,
                PseudocostStore& pseudocosts, Rng& rng);

  const MilpInstance& instance() const { return solver_->instance(); }
  const LpSolver& solver() const { return *solver_; }
  const RowView& rows() const { return *rows_; }
  std::span<const BoundOverride> overrides() const { return overrides_; }
  const LpSolution& lp() const { return *lp_; }
  const std::vector<int>& candidates() const { return candidates_; }
  int depth() const { return depth_; }
  double dual_bound() const { return dual_bound_; }
  PseudocostStore& pseudocosts() { return *pseudocosts_; }
  const PseudocostStore& pseudocosts() const { return *pseudocosts_; }
  Rng& rng() { return *rng_; }

  // Extracted on first use with the pseudocosts as they stand at that moment.
  const BipartiteObservation& observation();
  bool has_observation() const { return observation_ != nullptr; }
  std::shared_ptr<const BipartiteObservation> shared_observation();

  // Solves both children of j (once) and folds both into the pseudocosts.
  const ChildProbe& probe(int j);
  const ChildProbe* cached_probe(int j) const;
  std::int64_t probe_cost() const { return probe_cost_; }

 private:
  const LpSolver* solver_;
  const RowView* rows_;
  std::span<const BoundOverride> overrides_;
  const LpSolution* lp_;
  std::vector<int> candidates_;
  int depth_;
  double dual_bound_;
  PseudocostStore* pseudocosts_;
  Rng* rng_;
  std::shared_ptr<const BipartiteObservation> observation_;
  std::map<int, ChildProbe> probes_;
  std::int64_t probe_cost_ = 0;
};

class BranchingPolicy {
 public:
  virtual ~BranchingPolicy() = default;
  virtual std::string name() const = 0;
  // Called once per solve after the root LP, before any branching.
  virtual void reset(const LpSolver& /*solver*/, const LpSolution& /*root*/) {}
  // Returns a member of ctx.candidates().
  virtual int select(BranchContext& ctx) = 0;
};

// Index into `scores` of the largest value; values within 1e-9 relative of
// the running best count as ties and keep the earlier index.
std::size_t argmax_lowest(std::span<const double> scores);

// Integer-constrained columns whose value is fractional beyond int_tol.
std::vector<int> fractional_candidates(const MilpInstance& inst, std::span<const double> x);

int most_infeasible_select(std::span<const double> x, std::span<const int> candidates);

double pc_score(double x, double psi_down, double psi_up, double epsilon = kScoreEpsilon);
int pc_select(std::span<const double> x, std::span<const int> candidates, const PseudocostStore& store,
              double epsilon = kScoreEpsilon);

// Strong branching; probes every candidate through ctx (pseudocost side
// effect included).
int sb_select(BranchContext& ctx, double epsilon = kScoreEpsilon);
double sb_score(double parent_obj, const ChildProbe& probe, double epsilon = kScoreEpsilon);

using AcWeights = std::array<double, 4>;

// Active-constraint scores, one per candidate, each in [0, sum of weights].
std::vector<double> ac_scores(const MilpInstance& inst, const RowView& rows, std::span<const double> x,
                              std::span<const int> candidates, const AcWeights& weights);
// Falls back to most-infeasible when every score is zero.
int ac_select(const MilpInstance& inst, const RowView& rows, std::span<const double> x,
              std::span<const int> candidates, const AcWeights& weights);

struct HybridConfig {
  enum class Db0Mode { dive, fixed };
  Db0Mode db0_mode = Db0Mode::dive;
  double db0_value = 0.0;     // used when db0_mode == fixed
  double db0_gap_fraction = 0.2;
  double r0 = 0.5;
  double epsilon = kScoreEpsilon;
};

// True when the hybrid rule takes the pseudocost branch for draw r.
inline bool hybrid_uses_pc(double db, double db0, double r0, double r) {
  return (db <= db0 && r <= r0) || (db > db0 && r > r0);
}

struct HybridChoice {
  int index = -1;
  bool used_pc = false;
};

// Draws r, then either pseudocost or active-constraint selection with fresh
// uniform weights r1..r4.
HybridChoice hybrid_select(double db, double db0, const HybridConfig& config, Rng& rng, const MilpInstance& inst,
                           const RowView& rows, std::span<const double> x, std::span<const int> candidates,
                           const PseudocostStore& store);

// Objective of the first integral point reached by rounding the most
// infeasible variable toward its nearest integer (other side on
// infeasibility), or nullopt when the dive dead-ends.
std::optional<double> most_infeasible_dive(const LpSolver& solver, const LpSolution& root);

// Threshold DB0: root bound plus gap_fraction of the root-to-dive gap. When
// the dive fails the root bound itself is used.
double dive_db0(const LpSolver& solver, const LpSolution& root, double gap_fraction);

class MostInfeasiblePolicy final : public BranchingPolicy {
 public:
  std::string name() const override { return "most-infeasible"; }
  int select(BranchContext& ctx) override;
};

class PseudocostPolicy final : public BranchingPolicy {
 public:
  explicit PseudocostPolicy(double epsilon = kScoreEpsilon) : epsilon_(epsilon) {}
  std::string name() const override { return "pseudocost"; }
  int select(BranchContext& ctx) override;

 private:
  double epsilon_;
};

class StrongBranchingPolicy final : public BranchingPolicy {
 public:
  explicit StrongBranchingPolicy(double epsilon = kScoreEpsilon) : epsilon_(epsilon) {}
  std::string name() const override { return "strong"; }
  int select(BranchContext& ctx) override;

 private:
  double epsilon_;
};

// Active-constraint selection with weights drawn uniformly per call.
class ActiveConstraintPolicy final : public BranchingPolicy {
 public:
  std::string name() const override { return "active-constraint"; }
  int select(BranchContext& ctx) override;
};

class HybridPolicy final : public BranchingPolicy {
 public:
  explicit HybridPolicy(HybridConfig config = {}) : config_(config) {}
  std::string name() const override { return "hybrid"; }
  void reset(const LpSolver& solver, const LpSolution& root) override;
  int select(BranchContext& ctx) override;

  double db0() const { return db0_; }
  std::int64_t pc_decisions() const { return pc_decisions_; }
  std::int64_t ac_decisions() const { return ac_decisions_; }

 private:
  HybridConfig config_;
  double db0_ = 0.0;
  std::int64_t pc_decisions_ = 0;
  std::int64_t ac_decisions_ = 0;
};

class RandomPolicy final : public BranchingPolicy {
 public:
  std::string name() const override { return "random"; }
  int select(BranchContext& ctx) override;
};

}  // namespace l2b
