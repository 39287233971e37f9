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

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace l2b {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_finite_bound(double v) { return !std::isinf(v); }

class InstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Syntax errors carry the 1-based line number of the offending line.
class ParseError : public InstanceError {
 public:
  ParseError(int line, const std::string& what)
      : InstanceError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
  bool operator==(const Triplet&) const = default;
};

// min c^T x  s.t.  A x <= b,  l <= x <= u,  x_j integer for j < num_int.
//
// Every row is a <= row. Infinite bounds are stored as +-kInf and tested with
// is_finite_bound(); they never enter arithmetic directly.
struct MilpInstance {
  std::string name;
  int num_vars = 0;
  int num_cons = 0;
  int num_int = 0;
  std::vector<double> objective;
  std::vector<Triplet> matrix;  // sorted by (row, col)
  std::vector<double> rhs;
  std::vector<double> lower;
  std::vector<double> upper;

  bool is_integer(int j) const { return j < num_int; }

  // Throws InstanceError naming the offending field.
  void validate() const;

  bool operator==(const MilpInstance&) const = default;
};

// Compressed row view over an instance's triplets.
struct RowView {
  std::vector<int> start;  // size m + 1
  std::vector<int> col;
  std::vector<double> val;

  static RowView build(const MilpInstance& inst);
  std::span<const int> cols(int i) const {
    return {col.data() + start[i], static_cast<std::size_t>(start[i + 1] - start[i])};
  }
  std::span<const double> vals(int i) const {
    return {val.data() + start[i], static_cast<std::size_t>(start[i + 1] - start[i])};
  }
};

MilpInstance parse_instance(std::string_view text);
std::string serialize_instance(const MilpInstance& inst);

MilpInstance read_instance_file(const std::string& path);
void write_instance_file(const MilpInstance& inst, const std::string& path);

// Same instance with every integrality restriction dropped.
MilpInstance lp_relaxation(const MilpInstance& inst);

enum class InstanceFamily { multi_knapsack, set_cover, item_placement };

std::string to_string(InstanceFamily family);
InstanceFamily family_from_string(std::string_view name);

struct InstanceFamilySpec {
  InstanceFamily family = InstanceFamily::multi_knapsack;
  // multi-knapsack: n items, m knapsack rows.
  // set-cover: n sets (columns), m elements (rows).
  // item-placement: n items, m bins, two resource dimensions per bin.
  int n = 20;
  int m = 5;
  double density = 0.6;
  std::uint64_t seed = 0;
};

struct GeneratedInstance {
  MilpInstance instance;
  std::vector<double> planted;  // a feasible integer point
};

GeneratedInstance generate_instance_with_witness(const InstanceFamilySpec& spec);
MilpInstance generate_instance(const InstanceFamilySpec& spec);

// Max violation of A x <= b and of the bounds; 0 when feasible.
double max_violation(const MilpInstance& inst, std::span<const double> x);
double objective_value(const MilpInstance& inst, std::span<const double> x);

}  // namespace l2b
