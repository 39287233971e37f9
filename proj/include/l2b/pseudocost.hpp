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

#include <algorithm>
#include <cstdint>
#include <vector>

#include "l2b/lp.hpp"

namespace l2b {

enum class BranchDir : std::uint8_t { down, up };

// Running averages of the per-unit objective gain observed when branching a
// variable down (psi-) or up (psi+). Unobserved directions report 1.
class PseudocostStore {
 public:
  PseudocostStore() = default;
  explicit PseudocostStore(int num_vars) : mean_(2 * num_vars, 0.0), count_(2 * num_vars, 0) {}

  int num_vars() const { return static_cast<int>(mean_.size() / 2); }

  double psi(int j, BranchDir dir) const {
    const auto k = slot(j, dir);
    return count_[k] == 0 ? 1.0 : mean_[k];
  }
  std::int64_t count(int j, BranchDir dir) const { return count_[slot(j, dir)]; }

  // Folds (child - parent) / distance into the running mean. Infeasible or
  // non-optimal children leave the store untouched.
  void update(int j, BranchDir dir, double parent_obj, LpStatus child_status, double child_obj, double distance) {
    if (child_status != LpStatus::optimal || !(distance > 0.0)) return;
    const double gain = std::max(0.0, child_obj - parent_obj) / distance;
    const auto k = slot(j, dir);
    ++count_[k];
    mean_[k] += (gain - mean_[k]) / static_cast<double>(count_[k]);
  }

  bool operator==(const PseudocostStore&) const = default;

 private:
  std::size_t slot(int j, BranchDir dir) const { return 2 * static_cast<std::size_t>(j) + (dir == BranchDir::up); }

  std::vector<double> mean_;
  std::vector<std::int64_t> count_;
};

}  // namespace l2b
