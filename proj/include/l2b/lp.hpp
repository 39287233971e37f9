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

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "l2b/milp.hpp"

namespace l2b {

inline constexpr double kFeasTol = 1e-7;
inline constexpr double kIntTol = 1e-6;

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

std::string to_string(LpStatus status);

enum class BoundSide : std::uint8_t { lower, upper };

// A bound tightening applied on top of the instance bounds.
struct BoundOverride {
  int var = 0;
  BoundSide side = BoundSide::lower;
  double value = 0.0;
  bool operator==(const BoundOverride&) const = default;
};

enum class VarStatus : std::uint8_t { basic, at_lower, at_upper, free_zero };

// Columns are the n structurals followed by the m row slacks.
struct Basis {
  std::vector<int> basic;           // column heading each row, size m
  std::vector<VarStatus> status;    // per column, size n + m
  bool empty() const { return status.empty(); }
};

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;               // structural values, size n
  double objective = 0.0;
  Basis basis;
  std::vector<double> duals;           // row duals y (<= 0 on binding rows)
  std::vector<double> reduced_costs;   // c_j - y^T a_j for structurals
  std::int64_t iterations = 0;

  bool optimal() const { return status == LpStatus::optimal; }
};

struct LpOptions {
  double feas_tol = kFeasTol;
  double opt_tol = 1e-9;
  double pivot_tol = 1e-9;
  std::int64_t iter_limit = 1000000;
  int refactor_interval = 50;
  double drift_tol = 1e-9;
  int max_restarts = 2;
};

// Dense revised primal simplex over bounded variables.
//
// Infeasible starting points (cold slack basis or a warm basis invalidated by
// tightened bounds) are repaired by a composite phase one that minimizes the
// sum of bound violations of the basic variables. Dantzig pricing switches to
// Bland's rule after 3 (n + m) consecutive degenerate pivots.
//
// A context is single-threaded; distinct contexts share nothing.
class LpSolver {
 public:
  explicit LpSolver(const MilpInstance& inst, LpOptions options = {});

  LpSolution solve(std::span<const BoundOverride> overrides = {}, const Basis* warm = nullptr,
                   std::optional<std::int64_t> iter_limit = std::nullopt) const;

  const MilpInstance& instance() const { return *inst_; }
  const LpOptions& options() const { return options_; }

 private:
  const MilpInstance* inst_;
  LpOptions options_;
  // Column-major copy of A.
  std::vector<int> col_start_;
  std::vector<int> col_row_;
  std::vector<double> col_val_;

  friend class SimplexRun;
};

// Effective bounds after applying overrides; throws std::invalid_argument on
// an override that loosens a bound.
std::pair<std::vector<double>, std::vector<double>> apply_overrides(const MilpInstance& inst,
                                                                    std::span<const BoundOverride> overrides);

LpSolution solve_lp(const MilpInstance& inst, std::span<const BoundOverride> overrides = {},
                    const Basis* warm = nullptr, std::int64_t iter_limit = 1000000);

struct ChildProbe {
  LpSolution down;  // x_j <= floor(parent x_j)
  LpSolution up;    // x_j >= ceil(parent x_j)
};

// Solves both children of branching on j, warm-started from the parent basis.
// Throws std::invalid_argument when the parent value of x_j is integral.
ChildProbe probe_children(const LpSolver& solver, std::span<const BoundOverride> parent_overrides,
                          const LpSolution& parent, int j);

inline bool is_fractional(double v, double tol = kIntTol) { return std::abs(v - std::round(v)) > tol; }

}  // namespace l2b
