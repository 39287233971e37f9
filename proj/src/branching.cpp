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

#include "l2b/branching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace l2b {

BranchContext::BranchContext(const LpSolver& solver, const RowView& rows, std::span<const BoundOverride> overrides,
                             const LpSolution& lp, std::vector<int> candidates, int depth, double dual_bound,
                             PseudocostStore& pseudocosts, Rng& rng)
    : solver_(&solver),
      rows_(&rows),
      overrides_(overrides),
      lp_(&lp),
      candidates_(std::move(candidates)),
      depth_(depth),
      dual_bound_(dual_bound),
      pseudocosts_(&pseudocosts),
      rng_(&rng) {}

const BipartiteObservation& BranchContext::observation() { return *shared_observation(); }

std::shared_ptr<const BipartiteObservation> BranchContext::shared_observation() {
  if (!observation_) {
    observation_ = std::make_shared<const BipartiteObservation>(
        extract_observation(instance(), *rows_, depth_, *lp_, candidates_, *pseudocosts_));
  }
  return observation_;
}

const ChildProbe& BranchContext::probe(int j) {
  auto it = probes_.find(j);
  if (it != probes_.end()) return it->second;
  ChildProbe p = probe_children(*solver_, overrides_, *lp_, j);
  probe_cost_ += p.down.iterations + 1 + p.up.iterations + 1;
  const double x = lp_->x[j];
  const double f = x - std::floor(x);
  pseudocosts_->update(j, BranchDir::down, lp_->objective, p.down.status, p.down.objective, f);
  pseudocosts_->update(j, BranchDir::up, lp_->objective, p.up.status, p.up.objective, 1.0 - f);
  return probes_.emplace(j, std::move(p)).first->second;
}

const ChildProbe* BranchContext::cached_probe(int j) const {
  auto it = probes_.find(j);
  return it == probes_.end() ? nullptr : &it->second;
}

std::size_t argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax over an empty score list");
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best] + 1e-9 * std::abs(scores[best]) + 1e-300) best = k;
  }
  return best;
}

std::vector<int> fractional_candidates(const MilpInstance& inst, std::span<const double> x) {
  std::vector<int> out;
  for (int j = 0; j < inst.num_int; ++j) {
    if (is_fractional(x[j])) out.push_back(j);
  }
  return out;
}

namespace {

void require_candidates(std::span<const int> candidates) {
  if (candidates.empty()) throw std::invalid_argument("empty candidate set");
}

}  // namespace

int most_infeasible_select(std::span<const double> x, std::span<const int> candidates) {
  require_candidates(candidates);
  std::vector<double> score(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double f = x[candidates[k]] - std::floor(x[candidates[k]]);
    score[k] = std::min(f, 1.0 - f);
  }
  // Fractionalities live in [0, 0.5]; an absolute tolerance keeps 0.3 and
  // 1 - 0.7 tied.
  std::size_t best = 0;
  for (std::size_t k = 1; k < score.size(); ++k) {
    if (score[k] > score[best] + 1e-9) best = k;
  }
  return candidates[best];
}

double pc_score(double x, double psi_down, double psi_up, double epsilon) {
  const double down = (x - std::floor(x)) * psi_down;
  const double up = (std::ceil(x) - x) * psi_up;
  return std::max(down, epsilon) * std::max(up, epsilon);
}

int pc_select(std::span<const double> x, std::span<const int> candidates, const PseudocostStore& store,
              double epsilon) {
  require_candidates(candidates);
  std::vector<double> score(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const int j = candidates[k];
    score[k] = pc_score(x[j], store.psi(j, BranchDir::down), store.psi(j, BranchDir::up), epsilon);
  }
  return candidates[argmax_lowest(score)];
}

double sb_score(double parent_obj, const ChildProbe& probe, double epsilon) {
  auto gain = [parent_obj](const LpSolution& child) {
    if (child.status == LpStatus::infeasible) return kInfeasibleGain;
    if (child.status != LpStatus::optimal) return 0.0;
    return child.objective - parent_obj;
  };
  return std::max(gain(probe.down), epsilon) * std::max(gain(probe.up), epsilon);
}

int sb_select(BranchContext& ctx, double epsilon) {
  const auto& cands = ctx.candidates();
  require_candidates(cands);
  if (cands.size() == 1) return cands[0];
  std::vector<double> score(cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) {
    score[k] = sb_score(ctx.lp().objective, ctx.probe(cands[k]), epsilon);
  }
  return cands[argmax_lowest(score)];
}

std::vector<double> ac_scores(const MilpInstance& inst, const RowView& rows, std::span<const double> x,
                              std::span<const int> candidates, const AcWeights& weights) {
  require_candidates(candidates);
  const std::size_t nc = candidates.size();
  std::vector<int> slot(inst.num_vars, -1);
  for (std::size_t k = 0; k < nc; ++k) slot[candidates[k]] = static_cast<int>(k);

  std::array<std::vector<double>, 4> w;
  for (auto& v : w) v.assign(nc, 0.0);
  for (int i = 0; i < inst.num_cons; ++i) {
    const auto cols = rows.cols(i);
    const auto vals = rows.vals(i);
    double act = 0.0, sq = 0.0, cand_abs = 0.0;
    int cand_nnz = 0;
    for (std::size_t t = 0; t < cols.size(); ++t) {
      act += vals[t] * x[cols[t]];
      sq += vals[t] * vals[t];
      if (slot[cols[t]] >= 0) {
        ++cand_nnz;
        cand_abs += std::abs(vals[t]);
      }
    }
    if (inst.rhs[i] - act > kFeasTol || cand_nnz == 0) continue;
    const double norm = std::sqrt(sq);
    for (std::size_t t = 0; t < cols.size(); ++t) {
      const int k = slot[cols[t]];
      if (k < 0) continue;
      w[0][k] += 1.0;
      w[1][k] += 1.0 / cand_nnz;
      w[2][k] += std::abs(vals[t]) / norm;
      w[3][k] += std::abs(vals[t]) / cand_abs;
    }
  }
  std::vector<double> score(nc, 0.0);
  for (int s = 0; s < 4; ++s) {
    const double mx = *std::max_element(w[s].begin(), w[s].end());
    if (mx <= 0.0) continue;
    for (std::size_t k = 0; k < nc; ++k) score[k] += weights[s] * (w[s][k] / mx);
  }
  return score;
}

int ac_select(const MilpInstance& inst, const RowView& rows, std::span<const double> x,
              std::span<const int> candidates, const AcWeights& weights) {
  const auto score = ac_scores(inst, rows, x, candidates, weights);
  if (std::all_of(score.begin(), score.end(), [](double s) { return s <= 0.0; })) {
    return most_infeasible_select(x, candidates);
  }
  return candidates[argmax_lowest(score)];
}

HybridChoice hybrid_select(double db, double db0, const HybridConfig& config, Rng& rng, const MilpInstance& inst,
                           const RowView& rows, std::span<const double> x, std::span<const int> candidates,
                           const PseudocostStore& store) {
  const double r = uniform01(rng);
  if (hybrid_uses_pc(db, db0, config.r0, r)) {
    return {pc_select(x, candidates, store, config.epsilon), true};
  }
  AcWeights weights;
  for (double& v : weights) v = uniform01(rng);
  return {ac_select(inst, rows, x, candidates, weights), false};
}

std::optional<double> most_infeasible_dive(const LpSolver& solver, const LpSolution& root) {
  if (!root.optimal()) return std::nullopt;
  const MilpInstance& inst = solver.instance();
  std::vector<BoundOverride> fixed;
  LpSolution cur = root;
  const int max_depth = 4 * inst.num_vars + 16;
  for (int depth = 0; depth < max_depth; ++depth) {
    const auto cands = fractional_candidates(inst, cur.x);
    if (cands.empty()) return cur.objective;
    const int j = most_infeasible_select(cur.x, cands);
    const double v = cur.x[j];
    const bool up_first = std::round(v) > v;
    bool advanced = false;
    for (int attempt = 0; attempt < 2 && !advanced; ++attempt) {
      const bool up = (attempt == 0) == up_first;
      auto trial = fixed;
      trial.push_back(up ? BoundOverride{j, BoundSide::lower, std::ceil(v)}
                         : BoundOverride{j, BoundSide::upper, std::floor(v)});
      LpSolution next = solver.solve(trial, &cur.basis);
      if (next.optimal()) {
        fixed = std::move(trial);
        cur = std::move(next);
        advanced = true;
      }
    }
    if (!advanced) return std::nullopt;
  }
  return std::nullopt;
}

double dive_db0(const LpSolver& solver, const LpSolution& root, double gap_fraction) {
  const auto inc = most_infeasible_dive(solver, root);
  if (!inc) return root.objective;
  return root.objective + gap_fraction * std::max(0.0, *inc - root.objective);
}

int MostInfeasiblePolicy::select(BranchContext& ctx) {
  return most_infeasible_select(ctx.lp().x, ctx.candidates());
}

int PseudocostPolicy::select(BranchContext& ctx) {
  return pc_select(ctx.lp().x, ctx.candidates(), ctx.pseudocosts(), epsilon_);
}

int StrongBranchingPolicy::select(BranchContext& ctx) { return sb_select(ctx, epsilon_); }

int ActiveConstraintPolicy::select(BranchContext& ctx) {
  AcWeights weights;
  for (double& v : weights) v = uniform01(ctx.rng());
  return ac_select(ctx.instance(), ctx.rows(), ctx.lp().x, ctx.candidates(), weights);
}

void HybridPolicy::reset(const LpSolver& solver, const LpSolution& root) {
  db0_ = config_.db0_mode == HybridConfig::Db0Mode::fixed ? config_.db0_value
                                                          : dive_db0(solver, root, config_.db0_gap_fraction);
  pc_decisions_ = ac_decisions_ = 0;
}

int HybridPolicy::select(BranchContext& ctx) {
  const HybridChoice c = hybrid_select(ctx.dual_bound(), db0_, config_, ctx.rng(), ctx.instance(), ctx.rows(),
                                       ctx.lp().x, ctx.candidates(), ctx.pseudocosts());
  ++(c.used_pc ? pc_decisions_ : ac_decisions_);
  return c.index;
}

int RandomPolicy::select(BranchContext& ctx) {
  const auto& c = ctx.candidates();
  require_candidates(c);
  return c[uniform_index(ctx.rng(), c.size())];
}

}  // namespace l2b
