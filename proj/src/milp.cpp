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

#include "l2b/milp.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "l2b/rng.hpp"

namespace l2b {

namespace {

std::string fmt_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double to_real(std::string_view tok, int line, const char* what) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || std::isnan(v)) {
    throw ParseError(line, std::string("expected real for ") + what + ", got '" + s + "'");
  }
  return v;
}

long to_int(std::string_view tok, int line, const char* what) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError(line, std::string("expected integer for ") + what + ", got '" + s + "'");
  }
  return v;
}

enum class RowSense { le, ge, eq };

struct RawRow {
  RowSense sense;
  double rhs;
  std::vector<std::pair<int, double>> entries;
  int line;
};

}  // namespace

void MilpInstance::validate() const {
  const auto n = static_cast<std::size_t>(num_vars);
  if (num_vars < 0 || num_cons < 0) throw InstanceError("dimensions must be nonnegative");
  if (num_int < 0 || num_int > num_vars) {
    throw InstanceError("num_int: " + std::to_string(num_int) + " not in [0, " +
                        std::to_string(num_vars) + "]");
  }
  if (objective.size() != n) throw InstanceError("objective: expected " + std::to_string(n) + " entries");
  if (lower.size() != n || upper.size() != n) throw InstanceError("bounds: expected " + std::to_string(n) + " entries");
  if (rhs.size() != static_cast<std::size_t>(num_cons)) {
    throw InstanceError("rhs: expected " + std::to_string(num_cons) + " entries");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(objective[j])) throw InstanceError("objective[" + std::to_string(j) + "] is not finite");
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] == kInf || upper[j] == -kInf) {
      throw InstanceError("bounds of variable " + std::to_string(j) + " are malformed");
    }
    if (lower[j] > upper[j]) {
      throw InstanceError("bounds of variable " + std::to_string(j) + ": lower " + fmt_real(lower[j]) +
                          " > upper " + fmt_real(upper[j]));
    }
  }
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (!std::isfinite(rhs[i])) throw InstanceError("rhs[" + std::to_string(i) + "] is not finite");
  }
  for (std::size_t k = 0; k < matrix.size(); ++k) {
    const Triplet& t = matrix[k];
    if (t.row < 0 || t.row >= num_cons || t.col < 0 || t.col >= num_vars) {
      throw InstanceError("matrix[" + std::to_string(k) + "]: index (" + std::to_string(t.row) + ", " +
                          std::to_string(t.col) + ") out of range");
    }
    if (!std::isfinite(t.value) || t.value == 0.0) {
      throw InstanceError("matrix[" + std::to_string(k) + "]: coefficient must be finite and nonzero");
    }
    if (k > 0) {
      const Triplet& p = matrix[k - 1];
      if (p.row == t.row && p.col == t.col) {
        throw InstanceError("matrix: duplicate entry (" + std::to_string(t.row) + ", " + std::to_string(t.col) + ")");
      }
      if (p.row > t.row || (p.row == t.row && p.col > t.col)) {
        throw InstanceError("matrix: triplets not sorted by (row, col) at entry " + std::to_string(k));
      }
    }
  }
}

RowView RowView::build(const MilpInstance& inst) {
  RowView v;
  v.start.assign(inst.num_cons + 1, 0);
  for (const Triplet& t : inst.matrix) ++v.start[t.row + 1];
  for (int i = 0; i < inst.num_cons; ++i) v.start[i + 1] += v.start[i];
  v.col.resize(inst.matrix.size());
  v.val.resize(inst.matrix.size());
  std::vector<int> fill(v.start.begin(), v.start.end() - 1);
  for (const Triplet& t : inst.matrix) {
    v.col[fill[t.row]] = t.col;
    v.val[fill[t.row]] = t.value;
    ++fill[t.row];
  }
  return v;
}

MilpInstance parse_instance(std::string_view text) {
  MilpInstance inst;
  bool have_header = false;
  bool have_obj = false;
  int declared_rows = 0;
  std::map<int, RawRow> rows;
  std::vector<bool> have_bound;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    const std::string_view kw = tok[0];
    if (!have_header) {
      if (kw != "MILP") throw ParseError(line_no, "expected 'MILP v1' header");
      if (tok.size() != 6 || tok[1] != "v1") throw ParseError(line_no, "header must be 'MILP v1 <name> <n> <m> <p>'");
      inst.name = std::string(tok[2]);
      inst.num_vars = static_cast<int>(to_int(tok[3], line_no, "n"));
      declared_rows = static_cast<int>(to_int(tok[4], line_no, "m"));
      inst.num_int = static_cast<int>(to_int(tok[5], line_no, "p"));
      if (inst.num_vars < 0 || declared_rows < 0) throw ParseError(line_no, "negative dimension");
      inst.lower.assign(inst.num_vars, 0.0);
      inst.upper.assign(inst.num_vars, kInf);
      have_bound.assign(inst.num_vars, false);
      have_header = true;
    } else if (kw == "OBJ") {
      if (have_obj) throw ParseError(line_no, "duplicate OBJ line");
      if (tok.size() != static_cast<std::size_t>(inst.num_vars) + 1) {
        throw ParseError(line_no, "OBJ expects " + std::to_string(inst.num_vars) + " coefficients");
      }
      inst.objective.resize(inst.num_vars);
      for (int j = 0; j < inst.num_vars; ++j) inst.objective[j] = to_real(tok[j + 1], line_no, "objective");
      have_obj = true;
    } else if (kw == "ROW" || kw == "GEQ" || kw == "EQ") {
      if (tok.size() < 4) throw ParseError(line_no, std::string(kw) + " expects '<i> <rhs> <nnz> (<col> <val>)*'");
      RawRow row;
      row.sense = kw == "ROW" ? RowSense::le : (kw == "GEQ" ? RowSense::ge : RowSense::eq);
      row.line = line_no;
      const int i = static_cast<int>(to_int(tok[1], line_no, "row index"));
      row.rhs = to_real(tok[2], line_no, "rhs");
      const long nnz = to_int(tok[3], line_no, "nnz");
      if (nnz < 0 || tok.size() != 4 + 2 * static_cast<std::size_t>(nnz)) {
        throw ParseError(line_no, "row " + std::to_string(i) + " declares " + std::to_string(nnz) +
                                      " entries but has " + std::to_string((tok.size() - 4) / 2));
      }
      for (long k = 0; k < nnz; ++k) {
        const int col = static_cast<int>(to_int(tok[4 + 2 * k], line_no, "column index"));
        const double val = to_real(tok[5 + 2 * k], line_no, "coefficient");
        row.entries.emplace_back(col, val);
      }
      if (i < 0 || i >= declared_rows) {
        throw InstanceError("row " + std::to_string(i) + ": index out of range [0, " +
                            std::to_string(declared_rows) + ")");
      }
      if (!rows.emplace(i, std::move(row)).second) throw ParseError(line_no, "duplicate row " + std::to_string(i));
    } else if (kw == "BND") {
      if (tok.size() != 4) throw ParseError(line_no, "BND expects '<j> <lower> <upper>'");
      const int j = static_cast<int>(to_int(tok[1], line_no, "variable index"));
      if (j < 0 || j >= inst.num_vars) {
        throw InstanceError("bounds of variable " + std::to_string(j) + ": index out of range");
      }
      if (have_bound[j]) throw ParseError(line_no, "duplicate bounds for variable " + std::to_string(j));
      inst.lower[j] = to_real(tok[2], line_no, "lower bound");
      inst.upper[j] = to_real(tok[3], line_no, "upper bound");
      have_bound[j] = true;
    } else {
      throw ParseError(line_no, "unknown record '" + std::string(kw) + "'");
    }
    if (eol == text.size()) break;
  }
  if (!have_header) throw ParseError(line_no, "missing header");
  if (!have_obj) throw ParseError(line_no, "missing OBJ line");
  if (static_cast<int>(rows.size()) != declared_rows) {
    throw InstanceError("header declares " + std::to_string(declared_rows) + " rows but " +
                        std::to_string(rows.size()) + " were given");
  }

  // Normalize to <= rows: GEQ is negated, EQ becomes a pair.
  auto emit = [&inst](const RawRow& row, double sign) {
    const int r = inst.num_cons++;
    inst.rhs.push_back(sign * row.rhs);
    std::vector<std::pair<int, double>> entries = row.entries;
    std::sort(entries.begin(), entries.end());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto [col, val] = entries[k];
      if (col < 0 || col >= inst.num_vars) {
        throw InstanceError("row " + std::to_string(r) + ": column " + std::to_string(col) + " out of range");
      }
      if (k > 0 && entries[k - 1].first == col) {
        throw InstanceError("row " + std::to_string(r) + ": duplicate column " + std::to_string(col));
      }
      if (val != 0.0) inst.matrix.push_back({r, col, sign * val});
    }
  };
  for (const auto& [i, row] : rows) {
    switch (row.sense) {
      case RowSense::le: emit(row, 1.0); break;
      case RowSense::ge: emit(row, -1.0); break;
      case RowSense::eq:
        emit(row, 1.0);
        emit(row, -1.0);
        break;
    }
  }
  inst.validate();
  return inst;
}

std::string serialize_instance(const MilpInstance& inst) {
  std::string out;
  out += "MILP v1 " + inst.name + " " + std::to_string(inst.num_vars) + " " + std::to_string(inst.num_cons) +
         " " + std::to_string(inst.num_int) + "\n";
  out += "OBJ";
  for (double c : inst.objective) out += " " + fmt_real(c);
  out += "\n";
  const RowView rv = RowView::build(inst);
  for (int i = 0; i < inst.num_cons; ++i) {
    const auto cols = rv.cols(i);
    const auto vals = rv.vals(i);
    out += "ROW " + std::to_string(i) + " " + fmt_real(inst.rhs[i]) + " " + std::to_string(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) out += " " + std::to_string(cols[k]) + " " + fmt_real(vals[k]);
    out += "\n";
  }
  for (int j = 0; j < inst.num_vars; ++j) {
    out += "BND " + std::to_string(j) + " " + fmt_real(inst.lower[j]) + " " + fmt_real(inst.upper[j]) + "\n";
  }
  return out;
}

MilpInstance read_instance_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InstanceError("cannot open instance file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

void write_instance_file(const MilpInstance& inst, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InstanceError("cannot write instance file '" + path + "'");
  out << serialize_instance(inst);
}

MilpInstance lp_relaxation(const MilpInstance& inst) {
  MilpInstance relaxed = inst;
  relaxed.num_int = 0;
  return relaxed;
}

std::string to_string(InstanceFamily family) {
  switch (family) {
    case InstanceFamily::multi_knapsack: return "multi-knapsack";
    case InstanceFamily::set_cover: return "set-cover";
    case InstanceFamily::item_placement: return "item-placement-like";
  }
  return "unknown";
}

InstanceFamily family_from_string(std::string_view name) {
  if (name == "multi-knapsack") return InstanceFamily::multi_knapsack;
  if (name == "set-cover") return InstanceFamily::set_cover;
  if (name == "item-placement-like" || name == "item-placement") return InstanceFamily::item_placement;
  throw InstanceError("unsupported instance family '" + std::string(name) + "'");
}

namespace {

std::string family_tag(const InstanceFamilySpec& spec) {
  std::string tag;
  switch (spec.family) {
    case InstanceFamily::multi_knapsack: tag = "mknap"; break;
    case InstanceFamily::set_cover: tag = "scover"; break;
    case InstanceFamily::item_placement: tag = "iplace"; break;
  }
  return tag + "_n" + std::to_string(spec.n) + "_m" + std::to_string(spec.m) + "_s" + std::to_string(spec.seed);
}

void finish(MilpInstance& inst, std::vector<Triplet>& trips) {
  std::sort(trips.begin(), trips.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  inst.matrix = std::move(trips);
  inst.validate();
}

GeneratedInstance gen_multi_knapsack(const InstanceFamilySpec& spec, Rng& rng) {
  const int n = spec.n, m = spec.m;
  GeneratedInstance g;
  MilpInstance& inst = g.instance;
  inst.name = family_tag(spec);
  inst.num_vars = n;
  inst.num_cons = m;
  inst.num_int = n;
  inst.lower.assign(n, 0.0);
  inst.upper.assign(n, 1.0);
  g.planted.resize(n);
  for (int j = 0; j < n; ++j) g.planted[j] = uniform01(rng) < 0.5 ? 1.0 : 0.0;

  std::vector<Triplet> trips;
  std::vector<double> weight_sum(n, 0.0);
  std::vector<int> weight_cnt(n, 0);
  for (int i = 0; i < m; ++i) {
    std::vector<double> w(n, 0.0);
    bool any = false;
    for (int j = 0; j < n; ++j) {
      if (uniform01(rng) < spec.density) {
        w[j] = static_cast<double>(uniform_int(rng, 1, 30));
        any = true;
      }
    }
    if (!any) w[uniform_index(rng, n)] = static_cast<double>(uniform_int(rng, 1, 30));
    double total = 0.0, planted_load = 0.0;
    for (int j = 0; j < n; ++j) {
      if (w[j] == 0.0) continue;
      trips.push_back({i, j, w[j]});
      total += w[j];
      planted_load += w[j] * g.planted[j];
      weight_sum[j] += w[j];
      ++weight_cnt[j];
    }
    inst.rhs.push_back(std::max(planted_load, std::floor(0.5 * total)));
  }
  inst.objective.resize(n);
  for (int j = 0; j < n; ++j) {
    const double mean_w = weight_cnt[j] ? weight_sum[j] / weight_cnt[j] : 15.0;
    const double profit = std::max(1.0, std::round(mean_w + static_cast<double>(uniform_int(rng, -5, 5))));
    inst.objective[j] = -profit;
  }
  finish(inst, trips);
  return g;
}

GeneratedInstance gen_set_cover(const InstanceFamilySpec& spec, Rng& rng) {
  const int n = spec.n, m = spec.m;
  GeneratedInstance g;
  MilpInstance& inst = g.instance;
  inst.name = family_tag(spec);
  inst.num_vars = n;
  inst.num_cons = m;
  inst.num_int = n;
  inst.lower.assign(n, 0.0);
  inst.upper.assign(n, 1.0);
  g.planted.assign(n, 1.0);
  std::vector<Triplet> trips;
  for (int i = 0; i < m; ++i) {
    std::vector<int> cols;
    for (int j = 0; j < n; ++j) {
      if (uniform01(rng) < spec.density) cols.push_back(j);
    }
    if (cols.empty()) cols.push_back(static_cast<int>(uniform_index(rng, n)));
    for (int j : cols) trips.push_back({i, j, -1.0});
    inst.rhs.push_back(-1.0);
  }
  inst.objective.resize(n);
  for (int j = 0; j < n; ++j) inst.objective[j] = static_cast<double>(uniform_int(rng, 1, 100));
  finish(inst, trips);
  return g;
}

// Items are assigned to at most one bin; each bin has two resource
// dimensions whose overflow is absorbed by penalized continuous variables.
GeneratedInstance gen_item_placement(const InstanceFamilySpec& spec, Rng& rng) {
  constexpr int kDims = 2;
  constexpr double kOverflowPenalty = 10.0;
  const int items = spec.n, bins = spec.m;
  const int nx = items * bins;
  const int n = nx + bins * kDims;
  GeneratedInstance g;
  MilpInstance& inst = g.instance;
  inst.name = family_tag(spec);
  inst.num_vars = n;
  inst.num_int = nx;
  inst.lower.assign(n, 0.0);
  inst.upper.assign(n, 1.0);
  for (int k = nx; k < n; ++k) inst.upper[k] = kInf;
  inst.objective.assign(n, kOverflowPenalty);

  std::vector<std::array<double, kDims>> weight(items);
  for (auto& w : weight) {
    for (double& v : w) v = static_cast<double>(uniform_int(rng, 1, 10));
  }
  for (int i = 0; i < items; ++i) {
    for (int k = 0; k < bins; ++k) inst.objective[i * bins + k] = -static_cast<double>(uniform_int(rng, 1, 20));
  }
  g.planted.assign(n, 0.0);
  std::vector<std::array<double, kDims>> load(bins, std::array<double, kDims>{});
  for (int i = 0; i < items; ++i) {
    if (uniform01(rng) < 0.7) {
      const int k = static_cast<int>(uniform_index(rng, bins));
      g.planted[i * bins + k] = 1.0;
      for (int d = 0; d < kDims; ++d) load[k][d] += weight[i][d];
    }
  }
  std::vector<Triplet> trips;
  int row = 0;
  for (int i = 0; i < items; ++i, ++row) {
    for (int k = 0; k < bins; ++k) trips.push_back({row, i * bins + k, 1.0});
    inst.rhs.push_back(1.0);
  }
  for (int k = 0; k < bins; ++k) {
    for (int d = 0; d < kDims; ++d, ++row) {
      double total = 0.0;
      for (int i = 0; i < items; ++i) {
        trips.push_back({row, i * bins + k, weight[i][d]});
        total += weight[i][d];
      }
      trips.push_back({row, nx + k * kDims + d, -1.0});
      inst.rhs.push_back(std::max(load[k][d], std::round(0.4 * total / bins)));
    }
  }
  inst.num_cons = row;
  finish(inst, trips);
  return g;
}

}  // namespace

GeneratedInstance generate_instance_with_witness(const InstanceFamilySpec& spec) {
  if (spec.n <= 0 || spec.m <= 0) throw InstanceError("instance family sizes must be positive");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) throw InstanceError("density must lie in (0, 1]");
  Rng rng(splitmix64(spec.seed ^ (static_cast<std::uint64_t>(spec.family) << 56)));
  switch (spec.family) {
    case InstanceFamily::multi_knapsack: return gen_multi_knapsack(spec, rng);
    case InstanceFamily::set_cover: return gen_set_cover(spec, rng);
    case InstanceFamily::item_placement: return gen_item_placement(spec, rng);
  }
  throw InstanceError("unsupported instance family");
}

MilpInstance generate_instance(const InstanceFamilySpec& spec) {
  return generate_instance_with_witness(spec).instance;
}

double max_violation(const MilpInstance& inst, std::span<const double> x) {
  double worst = 0.0;
  std::vector<double> act(inst.num_cons, 0.0);
  for (const Triplet& t : inst.matrix) act[t.row] += t.value * x[t.col];
  for (int i = 0; i < inst.num_cons; ++i) worst = std::max(worst, act[i] - inst.rhs[i]);
  for (int j = 0; j < inst.num_vars; ++j) {
    if (is_finite_bound(inst.lower[j])) worst = std::max(worst, inst.lower[j] - x[j]);
    if (is_finite_bound(inst.upper[j])) worst = std::max(worst, x[j] - inst.upper[j]);
  }
  return worst;
}

double objective_value(const MilpInstance& inst, std::span<const double> x) {
  double v = 0.0;
  for (int j = 0; j < inst.num_vars; ++j) v += inst.objective[j] * x[j];
  return v;
}

}  // namespace l2b
