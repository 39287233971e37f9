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

#include "l2b/lp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace l2b {

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

std::pair<std::vector<double>, std::vector<double>> apply_overrides(const MilpInstance& inst,
                                                                    std::span<const BoundOverride> overrides) {
  std::vector<double> lo = inst.lower, up = inst.upper;
  for (const BoundOverride& o : overrides) {
    if (o.var < 0 || o.var >= inst.num_vars) {
      throw std::invalid_argument("bound override on variable " + std::to_string(o.var) + " out of range");
    }
    if (o.side == BoundSide::lower) {
      if (o.value < lo[o.var]) {
        throw std::invalid_argument("override loosens lower bound of variable " + std::to_string(o.var));
      }
      lo[o.var] = o.value;
    } else {
      if (o.value > up[o.var]) {
        throw std::invalid_argument("override loosens upper bound of variable " + std::to_string(o.var));
      }
      up[o.var] = o.value;
    }
  }
  return {std::move(lo), std::move(up)};
}

LpSolver::LpSolver(const MilpInstance& inst, LpOptions options) : inst_(&inst), options_(options) {
  const int n = inst.num_vars;
  col_start_.assign(n + 1, 0);
  for (const Triplet& t : inst.matrix) ++col_start_[t.col + 1];
  for (int j = 0; j < n; ++j) col_start_[j + 1] += col_start_[j];
  col_row_.resize(inst.matrix.size());
  col_val_.resize(inst.matrix.size());
  std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
  for (const Triplet& t : inst.matrix) {
    col_row_[fill[t.col]] = t.row;
    col_val_[fill[t.col]] = t.value;
    ++fill[t.col];
  }
}

class SimplexRun {
 public:
  SimplexRun(const LpSolver& solver, std::vector<double> lo, std::vector<double> up, std::int64_t iter_limit)
      : s_(solver),
        inst_(solver.instance()),
        opt_(solver.options()),
        n_(inst_.num_vars),
        m_(inst_.num_cons),
        lo_(std::move(lo)),
        up_(std::move(up)),
        iter_limit_(iter_limit) {
    lo_.resize(n_ + m_, 0.0);
    up_.resize(n_ + m_, kInf);
    cost_.assign(n_ + m_, 0.0);
    for (int j = 0; j < n_; ++j) cost_[j] = inst_.objective[j];
    b_ = Eigen::Map<const Eigen::VectorXd>(inst_.rhs.data(), m_);
    b_norm_ = m_ > 0 ? b_.cwiseAbs().maxCoeff() : 0.0;
  }

  LpSolution run(const Basis* warm) {
    bool warm_ok = warm != nullptr && init_warm(*warm);
    if (!warm_ok) init_cold();
    for (int attempt = 0;; ++attempt) {
      try {
        return iterate();
      } catch (const NumericalError&) {
        if (attempt >= opt_.max_restarts) throw;
        init_cold();
      }
    }
  }

 private:
  // Column access over [A I].
  void load_column(int j, Eigen::VectorXd& a) const {
    a.setZero(m_);
    if (j < n_) {
      for (int k = s_.col_start_[j]; k < s_.col_start_[j + 1]; ++k) a[s_.col_row_[k]] = s_.col_val_[k];
    } else {
      a[j - n_] = 1.0;
    }
  }

  double column_dot(const Eigen::VectorXd& y, int j) const {
    if (j >= n_) return y[j - n_];
    double v = 0.0;
    for (int k = s_.col_start_[j]; k < s_.col_start_[j + 1]; ++k) v += y[s_.col_row_[k]] * s_.col_val_[k];
    return v;
  }

  void place_nonbasic(int j, VarStatus preferred) {
    const bool has_lo = is_finite_bound(lo_[j]);
    const bool has_up = is_finite_bound(up_[j]);
    VarStatus st = preferred;
    if (st == VarStatus::at_lower && !has_lo) st = has_up ? VarStatus::at_upper : VarStatus::free_zero;
    if (st == VarStatus::at_upper && !has_up) st = has_lo ? VarStatus::at_lower : VarStatus::free_zero;
    if (st == VarStatus::free_zero && (has_lo || has_up)) st = has_lo ? VarStatus::at_lower : VarStatus::at_upper;
    if (st == VarStatus::basic) st = has_lo ? VarStatus::at_lower : (has_up ? VarStatus::at_upper : VarStatus::free_zero);
    status_[j] = st;
    x_[j] = st == VarStatus::at_lower ? lo_[j] : (st == VarStatus::at_upper ? up_[j] : 0.0);
  }

  void init_cold() {
    const int total = n_ + m_;
    status_.assign(total, VarStatus::at_lower);
    x_.assign(total, 0.0);
    head_.resize(m_);
    for (int j = 0; j < n_; ++j) place_nonbasic(j, VarStatus::at_lower);
    for (int i = 0; i < m_; ++i) {
      head_[i] = n_ + i;
      status_[n_ + i] = VarStatus::basic;
    }
    if (!refactor()) throw NumericalError("slack basis is singular");
    recompute_basics();
  }

  bool init_warm(const Basis& warm) {
    const int total = n_ + m_;
    if (static_cast<int>(warm.basic.size()) != m_ || static_cast<int>(warm.status.size()) != total) return false;
    std::vector<char> seen(total, 0);
    for (int j : warm.basic) {
      if (j < 0 || j >= total || seen[j]) return false;
      seen[j] = 1;
    }
    status_.assign(total, VarStatus::at_lower);
    x_.assign(total, 0.0);
    head_ = warm.basic;
    for (int j = 0; j < total; ++j) {
      if (seen[j]) {
        status_[j] = VarStatus::basic;
      } else {
        place_nonbasic(j, warm.status[j] == VarStatus::basic ? VarStatus::at_lower : warm.status[j]);
      }
    }
    if (!refactor()) return false;
    recompute_basics();
    return true;
  }

  bool refactor() {
    pivots_since_refactor_ = 0;
    if (m_ == 0) {
      binv_.resize(0, 0);
      return true;
    }
    Eigen::MatrixXd basis(m_, m_);
    Eigen::VectorXd a;
    for (int r = 0; r < m_; ++r) {
      load_column(head_[r], a);
      basis.col(r) = a;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
    lu.setThreshold(1e-11);
    if (!lu.isInvertible()) return false;
    binv_ = lu.inverse();
    return true;
  }

  Eigen::VectorXd nonbasic_rhs() const {
    Eigen::VectorXd r = b_;
    for (int j = 0; j < n_ + m_; ++j) {
      if (status_[j] == VarStatus::basic || x_[j] == 0.0) continue;
      if (j >= n_) {
        r[j - n_] -= x_[j];
      } else {
        for (int k = s_.col_start_[j]; k < s_.col_start_[j + 1]; ++k) r[s_.col_row_[k]] -= s_.col_val_[k] * x_[j];
      }
    }
    return r;
  }

  void recompute_basics() {
    if (m_ == 0) return;
    const Eigen::VectorXd xb = binv_ * nonbasic_rhs();
    for (int r = 0; r < m_; ++r) x_[head_[r]] = xb[r];
  }

  double residual() const {
    if (m_ == 0) return 0.0;
    Eigen::VectorXd r = -b_;
    for (int j = 0; j < n_ + m_; ++j) {
      if (x_[j] == 0.0) continue;
      if (j >= n_) {
        r[j - n_] += x_[j];
      } else {
        for (int k = s_.col_start_[j]; k < s_.col_start_[j + 1]; ++k) r[s_.col_row_[k]] += s_.col_val_[k] * x_[j];
      }
    }
    return r.cwiseAbs().maxCoeff();
  }

  enum class Infeas { none, below, above };

  Infeas classify(int j) const {
    if (x_[j] < lo_[j] - opt_.feas_tol) return Infeas::below;
    if (x_[j] > up_[j] + opt_.feas_tol) return Infeas::above;
    return Infeas::none;
  }

  LpSolution iterate() {
    const int total = n_ + m_;
    const std::int64_t stall_limit = 3LL * total;
    std::int64_t stalled = 0;
    bool bland = false;
    Eigen::VectorXd cb(m_), y(m_), alpha(m_), a(m_);

    for (;;) {
      bool phase1 = false;
      for (int r = 0; r < m_; ++r) {
        switch (classify(head_[r])) {
          case Infeas::below: cb[r] = -1.0; phase1 = true; break;
          case Infeas::above: cb[r] = 1.0; phase1 = true; break;
          case Infeas::none: cb[r] = 0.0; break;
        }
      }
      if (!phase1) {
        for (int r = 0; r < m_; ++r) cb[r] = cost_[head_[r]];
      }
      if (m_ > 0) y.noalias() = binv_.transpose() * cb;

      // Pricing.
      int enter = -1;
      double enter_dir = 0.0;
      double best = 0.0;
      for (int j = 0; j < total; ++j) {
        const VarStatus st = status_[j];
        if (st == VarStatus::basic || lo_[j] == up_[j]) continue;
        const double d = (phase1 ? 0.0 : cost_[j]) - column_dot(y, j);
        double dir = 0.0;
        if (st == VarStatus::at_lower && d < -opt_.opt_tol) dir = 1.0;
        if (st == VarStatus::at_upper && d > opt_.opt_tol) dir = -1.0;
        if (st == VarStatus::free_zero && std::abs(d) > opt_.opt_tol) dir = d < 0 ? 1.0 : -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          enter = j;
          enter_dir = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          enter_dir = dir;
        }
      }

      if (enter < 0) {
        if (phase1) return finish(LpStatus::infeasible, y);
        // Confirm optimality against a fresh factorization before reporting.
        if (pivots_since_refactor_ > 0) {
          if (!refactor()) throw NumericalError("basis became singular");
          recompute_basics();
          continue;
        }
        return finish(LpStatus::optimal, y);
      }
      if (iterations_ >= iter_limit_) return finish(LpStatus::iteration_limit, y);

      load_column(enter, a);
      if (m_ > 0) alpha.noalias() = binv_ * a;

      // Ratio test (Harris two-pass, plain min-ratio under Bland).
      auto row_limit = [&](int r, double& dist, bool& to_upper) -> bool {
        const double delta = -enter_dir * alpha[r];
        if (std::abs(alpha[r]) <= opt_.pivot_tol) return false;
        const int j = head_[r];
        switch (classify(j)) {
          case Infeas::below:
            if (delta <= 0) return false;
            dist = lo_[j] - x_[j];
            to_upper = false;
            break;
          case Infeas::above:
            if (delta >= 0) return false;
            dist = x_[j] - up_[j];
            to_upper = true;
            break;
          case Infeas::none:
            if (delta < 0) {
              if (!is_finite_bound(lo_[j])) return false;
              dist = std::max(0.0, x_[j] - lo_[j]);
              to_upper = false;
            } else {
              if (!is_finite_bound(up_[j])) return false;
              dist = std::max(0.0, up_[j] - x_[j]);
              to_upper = true;
            }
            break;
        }
        dist /= std::abs(delta);
        return true;
      };

      int leave_row = -1;
      bool leave_to_upper = false;
      double step = kInf;
      if (bland) {
        int leave_col = -1;
        for (int r = 0; r < m_; ++r) {
          double t;
          bool tu;
          if (!row_limit(r, t, tu)) continue;
          if (t < step - 1e-12 || (t <= step + 1e-12 && head_[r] < leave_col)) {
            step = t;
            leave_row = r;
            leave_col = head_[r];
            leave_to_upper = tu;
          }
        }
      } else {
        double harris = kInf;
        for (int r = 0; r < m_; ++r) {
          double t;
          bool tu;
          if (!row_limit(r, t, tu)) continue;
          harris = std::min(harris, t + opt_.feas_tol / std::abs(alpha[r]));
        }
        double best_pivot = 0.0;
        for (int r = 0; r < m_; ++r) {
          double t;
          bool tu;
          if (!row_limit(r, t, tu) || t > harris) continue;
          if (std::abs(alpha[r]) > best_pivot) {
            best_pivot = std::abs(alpha[r]);
            step = t;
            leave_row = r;
            leave_to_upper = tu;
          }
        }
      }

      const double range = (is_finite_bound(lo_[enter]) && is_finite_bound(up_[enter])) ? up_[enter] - lo_[enter] : kInf;
      const bool flip = range <= step;
      if (flip) step = range;
      if (std::isinf(step)) {
        if (!phase1) return finish(LpStatus::unbounded, y);
        if (pivots_since_refactor_ == 0) throw NumericalError("phase one ray without breakpoint");
        if (!refactor()) throw NumericalError("basis became singular");
        recompute_basics();
        continue;
      }

      ++iterations_;
      if (step <= 1e-12) {
        if (++stalled > stall_limit) bland = true;
      } else {
        stalled = 0;
        bland = false;
      }

      x_[enter] += enter_dir * step;
      for (int r = 0; r < m_; ++r) x_[head_[r]] -= enter_dir * step * alpha[r];

      if (flip) {
        status_[enter] = enter_dir > 0 ? VarStatus::at_upper : VarStatus::at_lower;
        x_[enter] = enter_dir > 0 ? up_[enter] : lo_[enter];
      } else {
        const int leave = head_[leave_row];
        status_[leave] = leave_to_upper ? VarStatus::at_upper : VarStatus::at_lower;
        x_[leave] = leave_to_upper ? up_[leave] : lo_[leave];
        head_[leave_row] = enter;
        status_[enter] = VarStatus::basic;

        const double piv = alpha[leave_row];
        const Eigen::RowVectorXd pivot_row = binv_.row(leave_row) / piv;
        alpha[leave_row] -= 1.0;
        binv_.noalias() -= alpha * pivot_row;
        binv_.row(leave_row) = pivot_row;

        if (++pivots_since_refactor_ >= opt_.refactor_interval ||
            residual() > opt_.drift_tol * (1.0 + b_norm_)) {
          if (!refactor()) throw NumericalError("basis became singular");
          recompute_basics();
        }
      }
    }
  }

  LpSolution finish(LpStatus status, const Eigen::VectorXd& y) {
    LpSolution sol;
    sol.status = status;
    sol.iterations = iterations_;
    sol.x.assign(x_.begin(), x_.begin() + n_);
    sol.objective = 0.0;
    for (int j = 0; j < n_; ++j) sol.objective += cost_[j] * x_[j];
    sol.basis.basic = head_;
    sol.basis.status = status_;
    if (status == LpStatus::optimal) {
      sol.duals.assign(y.data(), y.data() + m_);
      sol.reduced_costs.resize(n_);
      for (int j = 0; j < n_; ++j) sol.reduced_costs[j] = cost_[j] - column_dot(y, j);
    } else if (status == LpStatus::infeasible) {
      sol.objective = kInf;
    } else if (status == LpStatus::unbounded) {
      sol.objective = -kInf;
    }
    return sol;
  }

  const LpSolver& s_;
  const MilpInstance& inst_;
  const LpOptions& opt_;
  int n_;
  int m_;
  std::vector<double> lo_, up_, cost_, x_;
  std::vector<VarStatus> status_;
  std::vector<int> head_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd b_;
  double b_norm_ = 0.0;
  std::int64_t iterations_ = 0;
  std::int64_t iter_limit_;
  int pivots_since_refactor_ = 0;
};

LpSolution LpSolver::solve(std::span<const BoundOverride> overrides, const Basis* warm,
                           std::optional<std::int64_t> iter_limit) const {
  auto [lo, up] = apply_overrides(*inst_, overrides);
  for (int j = 0; j < inst_->num_vars; ++j) {
    if (lo[j] > up[j]) {
      LpSolution sol;
      sol.status = LpStatus::infeasible;
      sol.objective = kInf;
      return sol;
    }
  }
  SimplexRun run(*this, std::move(lo), std::move(up), iter_limit.value_or(options_.iter_limit));
  return run.run(warm);
}

LpSolution solve_lp(const MilpInstance& inst, std::span<const BoundOverride> overrides, const Basis* warm,
                    std::int64_t iter_limit) {
  LpSolver solver(inst);
  return solver.solve(overrides, warm, iter_limit);
}

ChildProbe probe_children(const LpSolver& solver, std::span<const BoundOverride> parent_overrides,
                          const LpSolution& parent, int j) {
  if (!parent.optimal()) throw std::invalid_argument("probe_children requires an optimal parent");
  if (j < 0 || j >= static_cast<int>(parent.x.size())) throw std::invalid_argument("probe variable out of range");
  const double v = parent.x[j];
  if (!is_fractional(v)) {
    throw std::invalid_argument("probe_children: variable " + std::to_string(j) + " is integral in the parent");
  }
  std::vector<BoundOverride> ov(parent_overrides.begin(), parent_overrides.end());
  ChildProbe out;
  ov.push_back({j, BoundSide::upper, std::floor(v)});
  out.down = solver.solve(ov, &parent.basis);
  ov.back() = {j, BoundSide::lower, std::ceil(v)};
  out.up = solver.solve(ov, &parent.basis);
  return out;
}

}  // namespace l2b
