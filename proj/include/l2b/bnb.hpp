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
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2b/branching.hpp"
#include "l2b/episode.hpp"
#include "l2b/lp.hpp"
#include "l2b/milp.hpp"
#include "l2b/trace.hpp"

namespace l2b {

class BnbError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Budget {
  std::int64_t max_nodes = 1000000;
  std::int64_t max_clock = 50000;  // also the integration horizon T
};

enum class ClockMode { pseudo, wall };

std::string to_string(ClockMode mode);

struct SolveOptions {
  bool record_episode = false;
  std::uint64_t seed = 0;  // rng stream handed to the policy
  // Known optimum; when set it replaces the engine's own opt_value.
  std::optional<double> reference_value;
  // Wall mode measures microseconds since the solve started. Not
  // reproducible.
  ClockMode clock_mode = ClockMode::pseudo;
};

enum class SolveStatus { optimal, budget_exhausted, infeasible };

std::string to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::infeasible;
  std::optional<std::vector<double>> incumbent;
  double incumbent_value = kInf;
  double dual_bound = -kInf;
  std::int64_t nodes_processed = 0;  // branched nodes
  std::int64_t clock = 0;
  DualTrace trace;
  double dual_integral = 0.0;
  Episode episode;
};

struct BnbNode {
  std::int64_t id = 0;
  std::optional<std::int64_t> parent;
  int depth = 0;
  std::vector<BoundOverride> overrides;
  LpSolution lp;
  std::vector<int> candidates;
};

// Best-bound branch and bound. The clock starts at 0 once the root LP is
// solved; every later LP solve (children and strong-branching probes)
// advances it by iterations + 1. The dual bound is recorded at every
// branching step where it moves. Each branching decision becomes a
// Transition whose reward is minus the area between opt_value and z* from
// its clock to the next decision clock (the horizon for the last one), so
// the rewards of an episode sum to minus the dual integral.
SolveResult solve(const MilpInstance& inst, BranchingPolicy& policy, const Budget& budget,
                  const SolveOptions& options = {});

// Deterministic text form used for bit-for-bit comparisons.
nlohmann::json solve_result_to_json(const SolveResult& result);

}  // namespace l2b
