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
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2b/lp.hpp"
#include "l2b/milp.hpp"
#include "l2b/pseudocost.hpp"

namespace l2b {

// Feature catalog. Bump kFeatureCatalogVersion whenever a column changes
// meaning; episode files and checkpoints record it and refuse mismatches.
inline constexpr int kFeatureCatalogVersion = 1;
inline constexpr int kVarFeatures = 12;
inline constexpr int kConsFeatures = 5;

// Variable columns.
enum VarFeature : int {
  kVarObjective = 0,    // c_j / ||c||_inf
  kVarFraction,         // fractional part of x_j (integer columns only)
  kVarCandidate,        // 1 if j is a branching candidate
  kVarHasLower,
  kVarHasUpper,
  kVarAtLower,
  kVarAtUpper,
  kVarBasic,
  kVarReducedCostSign,  // -1, 0, +1
  kVarDepth,            // depth / (depth + 1)
  kVarPsiUp,            // psi+ / max over candidates
  kVarPsiDown,          // psi- / max over candidates
};

// Constraint columns.
enum ConsFeature : int {
  kConsRhs = 0,       // (b_i / ||A_i||) / max_k |b_k / ||A_k|||
  kConsSlack,         // same normalization applied to b_i - A_i x
  kConsActive,        // slack <= feas_tol
  kConsDualSign,      // -1, 0, +1
  kConsDensity,       // nnz(A_i) / n
};

struct ObsEdge {
  int cons = 0;
  int var = 0;
  double value = 0.0;  // a_ij / ||A_i||_2
  bool operator==(const ObsEdge&) const = default;
};

struct BipartiteObservation {
  int num_vars = 0;
  int num_cons = 0;
  std::vector<double> var_features;   // num_vars x kVarFeatures, row-major
  std::vector<double> cons_features;  // num_cons x kConsFeatures, row-major
  std::vector<ObsEdge> edges;         // sorted by (cons, var)

  double var(int j, int f) const { return var_features[static_cast<std::size_t>(j) * kVarFeatures + f]; }
  double cons(int i, int f) const { return cons_features[static_cast<std::size_t>(i) * kConsFeatures + f]; }

  bool operator==(const BipartiteObservation&) const = default;
};

class ObservationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ObservationError when the LP is not optimal.
BipartiteObservation extract_observation(const MilpInstance& inst, const RowView& rows, int depth,
                                         const LpSolution& lp, std::span<const int> candidates,
                                         const PseudocostStore& pseudocosts);

nlohmann::json observation_to_json(const BipartiteObservation& obs);
BipartiteObservation observation_from_json(const nlohmann::json& j);

// 128-bit state digest: leading 16 bytes of SHA-256 over the canonical
// serialization (little-endian, features quantized to 1e-9, then edges and
// the sorted candidate list).
inline constexpr const char* kDigestAlgorithm = "sha256-128/q1e-9/v1";

struct StateDigest {
  std::array<std::uint8_t, 16> bytes{};

  std::string hex() const;
  static StateDigest from_hex(std::string_view hex);
  auto operator<=>(const StateDigest&) const = default;
};

struct StateDigestHash {
  std::size_t operator()(const StateDigest& d) const {
    std::size_t h = 0;
    for (int k = 0; k < 8; ++k) h = (h << 8) | d.bytes[k];
    return h;
  }
};

std::vector<std::uint8_t> canonical_bytes(const BipartiteObservation& obs, std::span<const int> candidates);
StateDigest f_dim(const BipartiteObservation& obs, std::span<const int> candidates);

// Hex SHA-256 of arbitrary bytes; used for artifact and config hashes.
std::string sha256_hex(std::string_view data);

}  // namespace l2b
