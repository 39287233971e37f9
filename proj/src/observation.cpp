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

#include "l2b/observation.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>

namespace l2b {

namespace {

double sign_of(double v, double tol) {
  if (v > tol) return 1.0;
  if (v < -tol) return -1.0;
  return 0.0;
}

}  // namespace

BipartiteObservation extract_observation(const MilpInstance& inst, const RowView& rows, int depth,
                                         const LpSolution& lp, std::span<const int> candidates,
                                         const PseudocostStore& pseudocosts) {
  if (!lp.optimal()) throw ObservationError("observation requires an optimal node LP");
  const int n = inst.num_vars, m = inst.num_cons;
  BipartiteObservation obs;
  obs.num_vars = n;
  obs.num_cons = m;
  obs.var_features.assign(static_cast<std::size_t>(n) * kVarFeatures, 0.0);
  obs.cons_features.assign(static_cast<std::size_t>(m) * kConsFeatures, 0.0);

  double c_norm = 0.0;
  for (double c : inst.objective) c_norm = std::max(c_norm, std::abs(c));
  if (c_norm == 0.0) c_norm = 1.0;

  std::vector<char> is_cand(n, 0);
  double psi_up_max = 0.0, psi_down_max = 0.0;
  for (int j : candidates) {
    is_cand[j] = 1;
    psi_up_max = std::max(psi_up_max, pseudocosts.psi(j, BranchDir::up));
    psi_down_max = std::max(psi_down_max, pseudocosts.psi(j, BranchDir::down));
  }
  if (psi_up_max == 0.0) psi_up_max = 1.0;
  if (psi_down_max == 0.0) psi_down_max = 1.0;

  const double depth_feature = static_cast<double>(depth) / (static_cast<double>(depth) + 1.0);
  for (int j = 0; j < n; ++j) {
    double* f = &obs.var_features[static_cast<std::size_t>(j) * kVarFeatures];
    const double x = lp.x[j];
    f[kVarObjective] = inst.objective[j] / c_norm;
    if (inst.is_integer(j)) {
      const double frac = x - std::floor(x);
      f[kVarFraction] = is_fractional(x) ? frac : 0.0;
    }
    f[kVarCandidate] = is_cand[j];
    f[kVarHasLower] = is_finite_bound(inst.lower[j]);
    f[kVarHasUpper] = is_finite_bound(inst.upper[j]);
    f[kVarAtLower] = is_finite_bound(inst.lower[j]) && std::abs(x - inst.lower[j]) <= kFeasTol;
    f[kVarAtUpper] = is_finite_bound(inst.upper[j]) && std::abs(x - inst.upper[j]) <= kFeasTol;
    f[kVarBasic] = !lp.basis.status.empty() && lp.basis.status[j] == VarStatus::basic;
    f[kVarReducedCostSign] = lp.reduced_costs.empty() ? 0.0 : sign_of(lp.reduced_costs[j], 1e-9);
    f[kVarDepth] = depth_feature;
    if (inst.is_integer(j)) {
      f[kVarPsiUp] = std::min(1.0, pseudocosts.psi(j, BranchDir::up) / psi_up_max);
      f[kVarPsiDown] = std::min(1.0, pseudocosts.psi(j, BranchDir::down) / psi_down_max);
    }
  }

  std::vector<double> norm(m), scaled_rhs(m), scaled_slack(m);
  double rhs_max = 0.0, slack_max = 0.0;
  for (int i = 0; i < m; ++i) {
    const auto cols = rows.cols(i);
    const auto vals = rows.vals(i);
    double sq = 0.0, act = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      sq += vals[k] * vals[k];
      act += vals[k] * lp.x[cols[k]];
    }
    norm[i] = sq > 0.0 ? std::sqrt(sq) : 1.0;
    const double slack = inst.rhs[i] - act;
    scaled_rhs[i] = inst.rhs[i] / norm[i];
    scaled_slack[i] = slack / norm[i];
    rhs_max = std::max(rhs_max, std::abs(scaled_rhs[i]));
    slack_max = std::max(slack_max, std::abs(scaled_slack[i]));
    double* f = &obs.cons_features[static_cast<std::size_t>(i) * kConsFeatures];
    f[kConsActive] = slack <= kFeasTol;
    f[kConsDualSign] = lp.duals.empty() ? 0.0 : sign_of(lp.duals[i], 1e-9);
    f[kConsDensity] = n > 0 ? static_cast<double>(cols.size()) / n : 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) obs.edges.push_back({i, cols[k], vals[k] / norm[i]});
  }
  if (rhs_max == 0.0) rhs_max = 1.0;
  if (slack_max == 0.0) slack_max = 1.0;
  for (int i = 0; i < m; ++i) {
    double* f = &obs.cons_features[static_cast<std::size_t>(i) * kConsFeatures];
    f[kConsRhs] = scaled_rhs[i] / rhs_max;
    f[kConsSlack] = scaled_slack[i] / slack_max;
  }
  return obs;
}

nlohmann::json observation_to_json(const BipartiteObservation& obs) {
  nlohmann::json edges = nlohmann::json::array();
  for (const ObsEdge& e : obs.edges) edges.push_back({e.cons, e.var, e.value});
  return {{"n", obs.num_vars},
          {"m", obs.num_cons},
          {"var_features", obs.var_features},
          {"cons_features", obs.cons_features},
          {"edges", std::move(edges)}};
}

BipartiteObservation observation_from_json(const nlohmann::json& j) {
  BipartiteObservation obs;
  obs.num_vars = j.at("n").get<int>();
  obs.num_cons = j.at("m").get<int>();
  obs.var_features = j.at("var_features").get<std::vector<double>>();
  obs.cons_features = j.at("cons_features").get<std::vector<double>>();
  for (const auto& e : j.at("edges")) obs.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
  if (obs.var_features.size() != static_cast<std::size_t>(obs.num_vars) * kVarFeatures ||
      obs.cons_features.size() != static_cast<std::size_t>(obs.num_cons) * kConsFeatures) {
    throw ObservationError("observation feature widths do not match catalog version " +
                           std::to_string(kFeatureCatalogVersion));
  }
  return obs;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_i64(std::vector<std::uint8_t>& out, std::int64_t v) {
  const auto u = static_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
}

std::int64_t quantize(double v) { return static_cast<std::int64_t>(std::llround(v * 1e9)); }

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len) {
  std::array<std::uint8_t, 32> md{};
  unsigned int out_len = 0;
  if (EVP_Digest(data, len, md.data(), &out_len, EVP_sha256(), nullptr) != 1 || out_len != 32) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  return md;
}

}  // namespace

std::vector<std::uint8_t> canonical_bytes(const BipartiteObservation& obs, std::span<const int> candidates) {
  std::vector<std::uint8_t> out;
  out.reserve(64 + 8 * (obs.var_features.size() + obs.cons_features.size()) + 16 * obs.edges.size());
  for (char c : std::string_view("L2BOBS1")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kFeatureCatalogVersion);
  put_u32(out, obs.num_vars);
  put_u32(out, obs.num_cons);
  put_u32(out, kVarFeatures);
  put_u32(out, kConsFeatures);
  for (double v : obs.var_features) put_i64(out, quantize(v));
  for (double v : obs.cons_features) put_i64(out, quantize(v));
  put_u32(out, static_cast<std::uint32_t>(obs.edges.size()));
  for (const ObsEdge& e : obs.edges) {
    put_u32(out, e.cons);
    put_u32(out, e.var);
    put_i64(out, quantize(e.value));
  }
  std::vector<int> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  put_u32(out, static_cast<std::uint32_t>(sorted.size()));
  for (int j : sorted) put_u32(out, j);
  return out;
}

StateDigest f_dim(const BipartiteObservation& obs, std::span<const int> candidates) {
  const auto bytes = canonical_bytes(obs, candidates);
  const auto md = sha256(bytes.data(), bytes.size());
  StateDigest d;
  std::copy_n(md.begin(), d.bytes.size(), d.bytes.begin());
  return d;
}

std::string StateDigest::hex() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(32);
  for (std::uint8_t b : bytes) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

StateDigest StateDigest::from_hex(std::string_view hex) {
  if (hex.size() != 32) throw std::invalid_argument("state digest must be 32 hex characters");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit in state digest");
  };
  StateDigest d;
  for (std::size_t k = 0; k < 16; ++k) {
    d.bytes[k] = static_cast<std::uint8_t>(nibble(hex[2 * k]) * 16 + nibble(hex[2 * k + 1]));
  }
  return d;
}

std::string sha256_hex(std::string_view data) {
  const auto md = sha256(data.data(), data.size());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : md) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

}  // namespace l2b
