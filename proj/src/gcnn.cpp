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

#include "l2b/gcnn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "l2b/rng.hpp"

namespace l2b {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Row = Eigen::RowVectorXd;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;
using CRowMap = Eigen::Map<const Row>;
using MRowMap = Eigen::Map<Row>;

}  // namespace

GcnnParams::GcnnParams(int hidden) : hidden_(hidden) {
  if (hidden <= 0) throw std::invalid_argument("hidden width must be positive");
  const int h = hidden;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols, bool is_bias, ParamHead head) {
    layout_.push_back({std::move(name), offset, rows, cols, is_bias, head});
    offset += static_cast<std::size_t>(rows) * cols;
  };
  const auto E = ParamHead::encoder;
  add("emb_v.w", h, kVarFeatures, false, E);
  add("emb_v.b", 1, h, true, E);
  add("emb_c.w", h, kConsFeatures, false, E);
  add("emb_c.b", 1, h, true, E);
  for (const char* g : {"gc", "gv"}) {
    const std::string p = g;
    // gc builds constraint messages in the first pass, gv variable messages
    // in the second; each sees (c_i, v_j, e_ij).
    add(p + ".wc", h, h, false, E);
    add(p + ".wv", h, h, false, E);
    add(p + ".we", 1, h, false, E);
    add(p + ".b1", 1, h, true, E);
    add(p + ".w2", h, h, false, E);
    add(p + ".b2", 1, h, true, E);
    if (p == "gc") {
      add("fc.wc", h, h, false, E);
      add("fc.wm", h, h, false, E);
      add("fc.b1", 1, h, true, E);
      add("fc.w2", h, h, false, E);
      add("fc.b2", 1, h, true, E);
    } else {
      add("fv.wv", h, h, false, E);
      add("fv.wm", h, h, false, E);
      add("fv.b1", 1, h, true, E);
      add("fv.w2", h, h, false, E);
      add("fv.b2", 1, h, true, E);
    }
  }
  add("policy.w", 1, h, false, ParamHead::policy);
  add("policy.b", 1, 1, true, ParamHead::policy);
  add("value.w", 1, h, false, ParamHead::value);
  add("value.b", 1, 1, true, ParamHead::value);
  values_.assign(offset, 0.0);
}

GcnnParams GcnnParams::initialized(std::uint64_t seed, int hidden) {
  GcnnParams p(hidden);
  Rng rng(splitmix64(seed));
  for (const TensorInfo& t : p.layout_) {
    if (t.is_bias) continue;
    // A 1 x H edge-weight row feeds H outputs from one input.
    const double fan_in = t.name.ends_with(".we") ? 1.0 : t.cols;
    const double fan_out = t.name.ends_with(".we") ? t.cols : t.rows;
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t k = 0; k < t.size(); ++k) p.values_[t.offset + k] = uniform_real(rng, -s, s);
  }
  return p;
}

const TensorInfo& GcnnParams::tensor(std::string_view name) const {
  for (const TensorInfo& t : layout_) {
    if (t.name == name) return t;
  }
  throw std::invalid_argument("unknown tensor " + std::string(name));
}

namespace {

// Read-only views of every tensor.
struct View {
  const GcnnParams& p;
  CMap m(std::string_view name) const {
    const TensorInfo& t = p.tensor(name);
    return CMap(p.values().data() + t.offset, t.rows, t.cols);
  }
  CRowMap r(std::string_view name) const {
    const TensorInfo& t = p.tensor(name);
    return CRowMap(p.values().data() + t.offset, static_cast<Eigen::Index>(t.size()));
  }
};

// Gradient accumulators, same layout as the parameters.
struct GradView {
  const GcnnParams& p;
  double* g;
  MMap m(std::string_view name) const {
    const TensorInfo& t = p.tensor(name);
    return MMap(g + t.offset, t.rows, t.cols);
  }
  MRowMap r(std::string_view name) const {
    const TensorInfo& t = p.tensor(name);
    return MRowMap(g + t.offset, static_cast<Eigen::Index>(t.size()));
  }
};

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_mask(const Mat& grad, const Mat& pre) {
  return grad.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
}

void check_finite(const Mat& x, const char* layer) {
  if (!x.allFinite()) throw GcnnError(std::string("non-finite activation in layer ") + layer);
}

struct Cache {
  int n = 0, m = 0;
  Mat xv, xc;
  Mat hv0_pre, hv0, hc0_pre, hc0;
  std::vector<int> ei, ej;
  std::vector<double> ee;
  Row deg_c, deg_v;  // stored as rows for broadcasting
  Mat pre1, z1, s1, msg1, fc_pre, fc_h, hc1;
  Mat pre2, z2, s2, msg2, fv_pre, fv_h, hv1;
  Row pool;
  GcnnOutput out;
};

// Per-edge hidden pre-activations wc c_i + wv v_j + we e_ij + b1.
Mat edge_pre(const Mat& pc, const Mat& pv, const Cache& c, const CRowMap& we, const CRowMap& b1) {
  const std::size_t ne = c.ei.size();
  Mat pre(static_cast<Eigen::Index>(ne), pc.cols());
  for (std::size_t k = 0; k < ne; ++k) {
    pre.row(static_cast<Eigen::Index>(k)) = pc.row(c.ei[k]) + pv.row(c.ej[k]) + c.ee[k] * we + b1;
  }
  return pre;
}

void forward_cached(const GcnnParams& params, const BipartiteObservation& obs, Cache& c) {
  if (obs.var_features.size() != static_cast<std::size_t>(obs.num_vars) * kVarFeatures ||
      obs.cons_features.size() != static_cast<std::size_t>(obs.num_cons) * kConsFeatures) {
    throw GcnnError("observation feature widths do not match the network (catalog version " +
                    std::to_string(kFeatureCatalogVersion) + ")");
  }
  if (obs.num_vars <= 0) throw GcnnError("observation has no variables");
  const View P{params};
  const int h = params.hidden();
  c.n = obs.num_vars;
  c.m = obs.num_cons;
  c.xv = CMap(obs.var_features.data(), c.n, kVarFeatures);
  c.xc = CMap(obs.cons_features.data(), c.m, kConsFeatures);
  c.ei.clear();
  c.ej.clear();
  c.ee.clear();
  c.deg_c = Row::Zero(c.m);
  c.deg_v = Row::Zero(c.n);
  for (const ObsEdge& e : obs.edges) {
    if (e.cons < 0 || e.cons >= c.m || e.var < 0 || e.var >= c.n) throw GcnnError("edge index out of range");
    c.ei.push_back(e.cons);
    c.ej.push_back(e.var);
    c.ee.push_back(e.value);
    c.deg_c[e.cons] += 1.0;
    c.deg_v[e.var] += 1.0;
  }

  c.hv0_pre = (c.xv * P.m("emb_v.w").transpose()).rowwise() + P.r("emb_v.b");
  c.hv0 = relu(c.hv0_pre);
  c.hc0_pre = (c.xc * P.m("emb_c.w").transpose()).rowwise() + P.r("emb_c.b");
  c.hc0 = relu(c.hc0_pre);
  check_finite(c.hv0, "emb_v");
  check_finite(c.hc0, "emb_c");

  // Variables to constraints.
  c.pre1 = edge_pre(c.hc0 * P.m("gc.wc").transpose(), c.hv0 * P.m("gc.wv").transpose(), c, P.r("gc.we"),
                    P.r("gc.b1"));
  c.z1 = relu(c.pre1);
  c.s1 = Mat::Zero(c.m, h);
  for (std::size_t k = 0; k < c.ei.size(); ++k) c.s1.row(c.ei[k]) += c.z1.row(static_cast<Eigen::Index>(k));
  c.msg1 = c.s1 * P.m("gc.w2").transpose() + c.deg_c.transpose() * P.r("gc.b2");
  check_finite(c.msg1, "g_c");
  c.fc_pre = ((c.hc0 * P.m("fc.wc").transpose() + c.msg1 * P.m("fc.wm").transpose()).rowwise() + P.r("fc.b1"));
  c.fc_h = relu(c.fc_pre);
  c.hc1 = (c.fc_h * P.m("fc.w2").transpose()).rowwise() + P.r("fc.b2");
  check_finite(c.hc1, "f_c");

  // Constraints to variables.
  c.pre2 = edge_pre(c.hc1 * P.m("gv.wc").transpose(), c.hv0 * P.m("gv.wv").transpose(), c, P.r("gv.we"),
                    P.r("gv.b1"));
  c.z2 = relu(c.pre2);
  c.s2 = Mat::Zero(c.n, h);
  for (std::size_t k = 0; k < c.ej.size(); ++k) c.s2.row(c.ej[k]) += c.z2.row(static_cast<Eigen::Index>(k));
  c.msg2 = c.s2 * P.m("gv.w2").transpose() + c.deg_v.transpose() * P.r("gv.b2");
  check_finite(c.msg2, "g_v");
  c.fv_pre = ((c.hv0 * P.m("fv.wv").transpose() + c.msg2 * P.m("fv.wm").transpose()).rowwise() + P.r("fv.b1"));
  c.fv_h = relu(c.fv_pre);
  c.hv1 = (c.fv_h * P.m("fv.w2").transpose()).rowwise() + P.r("fv.b2");
  check_finite(c.hv1, "f_v");

  const Eigen::VectorXd logits = c.hv1 * P.r("policy.w").transpose();
  const double pb = P.r("policy.b")[0];
  c.out.logits.resize(c.n);
  for (int j = 0; j < c.n; ++j) c.out.logits[j] = logits[j] + pb;
  c.pool = c.hv1.colwise().mean();
  c.out.value = c.pool.dot(P.r("value.w")) + P.r("value.b")[0];
  if (!std::isfinite(c.out.value) || !logits.allFinite()) throw GcnnError("non-finite activation in layer heads");
}

// Accumulates dL/dparams into g given dL/dlogits and dL/dvalue.
void backward(const GcnnParams& params, const Cache& c, std::span<const double> dlogits, double dvalue, double* g) {
  const View P{params};
  const GradView G{params, g};
  const int h = params.hidden();
  const Eigen::Map<const Eigen::VectorXd> dl(dlogits.data(), c.n);

  // Heads.
  Mat dhv1 = dl * P.r("policy.w");
  G.r("policy.w") += dl.transpose() * c.hv1;
  G.r("policy.b")[0] += dl.sum();
  if (dvalue != 0.0) {
    G.r("value.w") += dvalue * c.pool;
    G.r("value.b")[0] += dvalue;
    dhv1.rowwise() += (dvalue / c.n) * P.r("value.w");
  }

  // f_v.
  const Mat dfv_h = dhv1 * P.m("fv.w2");
  G.m("fv.w2") += dhv1.transpose() * c.fv_h;
  G.r("fv.b2") += dhv1.colwise().sum();
  const Mat dfv_pre = relu_mask(dfv_h, c.fv_pre);
  G.m("fv.wv") += dfv_pre.transpose() * c.hv0;
  G.m("fv.wm") += dfv_pre.transpose() * c.msg2;
  G.r("fv.b1") += dfv_pre.colwise().sum();
  Mat dhv0 = dfv_pre * P.m("fv.wv");
  const Mat dmsg2 = dfv_pre * P.m("fv.wm");

  // g_v and its sum aggregation.
  G.m("gv.w2") += dmsg2.transpose() * c.s2;
  G.r("gv.b2") += c.deg_v * dmsg2;
  const Mat ds2 = dmsg2 * P.m("gv.w2");
  Mat dqc = Mat::Zero(c.m, h), dqv = Mat::Zero(c.n, h);
  {
    auto dwe = G.r("gv.we");
    auto db1 = G.r("gv.b1");
    for (std::size_t k = 0; k < c.ej.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const Row dpre = ds2.row(c.ej[k]).cwiseProduct((c.pre2.row(kk).array() > 0.0).cast<double>().matrix());
      dqc.row(c.ei[k]) += dpre;
      dqv.row(c.ej[k]) += dpre;
      dwe += c.ee[k] * dpre;
      db1 += dpre;
    }
  }
  G.m("gv.wc") += dqc.transpose() * c.hc1;
  G.m("gv.wv") += dqv.transpose() * c.hv0;
  const Mat dhc1 = dqc * P.m("gv.wc");
  dhv0 += dqv * P.m("gv.wv");

  // f_c.
  const Mat dfc_h = dhc1 * P.m("fc.w2");
  G.m("fc.w2") += dhc1.transpose() * c.fc_h;
  G.r("fc.b2") += dhc1.colwise().sum();
  const Mat dfc_pre = relu_mask(dfc_h, c.fc_pre);
  G.m("fc.wc") += dfc_pre.transpose() * c.hc0;
  G.m("fc.wm") += dfc_pre.transpose() * c.msg1;
  G.r("fc.b1") += dfc_pre.colwise().sum();
  Mat dhc0 = dfc_pre * P.m("fc.wc");
  const Mat dmsg1 = dfc_pre * P.m("fc.wm");

  // g_c.
  G.m("gc.w2") += dmsg1.transpose() * c.s1;
  G.r("gc.b2") += c.deg_c * dmsg1;
  const Mat ds1 = dmsg1 * P.m("gc.w2");
  Mat dpc = Mat::Zero(c.m, h), dpv = Mat::Zero(c.n, h);
  {
    auto dwe = G.r("gc.we");
    auto db1 = G.r("gc.b1");
    for (std::size_t k = 0; k < c.ei.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const Row dpre = ds1.row(c.ei[k]).cwiseProduct((c.pre1.row(kk).array() > 0.0).cast<double>().matrix());
      dpc.row(c.ei[k]) += dpre;
      dpv.row(c.ej[k]) += dpre;
      dwe += c.ee[k] * dpre;
      db1 += dpre;
    }
  }
  G.m("gc.wc") += dpc.transpose() * c.hc0;
  G.m("gc.wv") += dpv.transpose() * c.hv0;
  dhc0 += dpc * P.m("gc.wc");
  dhv0 += dpv * P.m("gc.wv");

  // Embeddings.
  const Mat dhv0_pre = relu_mask(dhv0, c.hv0_pre);
  G.m("emb_v.w") += dhv0_pre.transpose() * c.xv;
  G.r("emb_v.b") += dhv0_pre.colwise().sum();
  const Mat dhc0_pre = relu_mask(dhc0, c.hc0_pre);
  G.m("emb_c.w") += dhc0_pre.transpose() * c.xc;
  G.r("emb_c.b") += dhc0_pre.colwise().sum();
}

void check_sample(const GraphSample& s, LossKind kind) {
  if (!s.obs) throw std::invalid_argument("sample without an observation");
  if (s.candidates.empty()) throw std::invalid_argument("sample with an empty candidate set");
  if (kind == LossKind::policy_cross_entropy &&
      std::find(s.candidates.begin(), s.candidates.end(), s.action) == s.candidates.end()) {
    throw std::invalid_argument("expert action is not a candidate");
  }
}

// Loss of one sample and its derivatives w.r.t. logits and value.
double sample_loss(const GcnnOutput& out, const GraphSample& s, const LossConfig& cfg, std::vector<double>* dlogits,
                   double* dvalue) {
  if (cfg.kind == LossKind::policy_cross_entropy) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j : s.candidates) mx = std::max(mx, out.logits[j]);
    double z = 0.0;
    for (int j : s.candidates) z += std::exp(out.logits[j] - mx);
    const double lse = mx + std::log(z);
    if (dlogits) {
      dlogits->assign(out.logits.size(), 0.0);
      for (int j : s.candidates) (*dlogits)[j] = std::exp(out.logits[j] - lse);
      (*dlogits)[s.action] -= 1.0;
    }
    if (dvalue) *dvalue = 0.0;
    return lse - out.logits[s.action];
  }
  const double diff = out.value - s.target;
  // Ties at the kink take the unpenalized branch.
  const double w = diff >= 0.0 ? 1.0 : cfg.penalty_k;
  if (dlogits) dlogits->assign(out.logits.size(), 0.0);
  if (dvalue) *dvalue = 2.0 * w * diff;
  return w * diff * diff;
}

bool coordinate_trains(const LossConfig& cfg, std::size_t k) { return cfg.trainable.empty() || cfg.trainable[k]; }

double ridge_term(const GcnnParams& params, const LossConfig& cfg, double* grad) {
  if (cfg.ridge == 0.0) return 0.0;
  double sum = 0.0;
  for (const TensorInfo& t : params.layout()) {
    if (t.is_bias) continue;
    for (std::size_t k = t.offset; k < t.offset + t.size(); ++k) {
      if (!coordinate_trains(cfg, k)) continue;
      const double w = params.values()[k];
      sum += w * w;
      if (grad) grad[k] += 2.0 * cfg.ridge * w;
    }
  }
  return cfg.ridge * sum;
}

}  // namespace

GcnnOutput gcnn_forward(const GcnnParams& params, const BipartiteObservation& obs) {
  Cache c;
  forward_cached(params, obs, c);
  return std::move(c.out);
}

std::vector<double> masked_softmax(std::span<const double> logits, std::span<const int> candidates) {
  if (candidates.empty()) throw std::invalid_argument("softmax over an empty candidate set");
  double mx = -std::numeric_limits<double>::infinity();
  for (int j : candidates) mx = std::max(mx, logits[j]);
  std::vector<double> p(candidates.size());
  double z = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) z += p[k] = std::exp(logits[candidates[k]] - mx);
  for (double& v : p) v /= z;
  return p;
}

double batch_loss(const GcnnParams& params, std::span<const GraphSample> batch, const LossConfig& config) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  double total = 0.0;
  for (const GraphSample& s : batch) {
    check_sample(s, config.kind);
    total += sample_loss(gcnn_forward(params, *s.obs), s, config, nullptr, nullptr);
  }
  return total / static_cast<double>(batch.size()) + ridge_term(params, config, nullptr);
}

double batch_gradient(const GcnnParams& params, std::span<const GraphSample> batch, const LossConfig& config,
                      std::vector<double>& grad) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  grad.assign(params.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  Cache c;
  std::vector<double> dlogits;
  for (const GraphSample& s : batch) {
    check_sample(s, config.kind);
    forward_cached(params, *s.obs, c);
    double dvalue = 0.0;
    total += sample_loss(c.out, s, config, &dlogits, &dvalue);
    for (double& v : dlogits) v *= scale;
    backward(params, c, dlogits, dvalue * scale, grad.data());
  }
  const double loss = total * scale + ridge_term(params, config, grad.data());
  if (!config.trainable.empty()) {
    for (std::size_t k = 0; k < grad.size(); ++k) {
      if (!config.trainable[k]) grad[k] = 0.0;
    }
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw GcnnError("non-finite gradient");
  }
  return loss;
}

std::vector<char> mask_for(const GcnnParams& params, std::span<const std::string> tensor_names) {
  std::vector<char> mask(params.size(), 0);
  for (const std::string& name : tensor_names) {
    const TensorInfo& t = params.tensor(name);
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(t.offset),
              mask.begin() + static_cast<std::ptrdiff_t>(t.offset + t.size()), 1);
  }
  return mask;
}

TrainResult train_gcnn(GcnnParams& params, std::span<const GraphSample> train, std::span<const GraphSample> valid,
                       const LossConfig& loss, const TrainConfig& config,
                       const std::function<void(const EpochStats&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (config.learning_rate <= 0.0 || config.batch_size <= 0 || config.epochs < 0) {
    throw std::invalid_argument("training config values must be positive");
  }
  TrainResult result;
  Rng rng(splitmix64(config.seed ^ 0x7472616e));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto stats = [&](int epoch) {
    EpochStats s;
    s.epoch = epoch;
    s.train_loss = batch_loss(params, train, loss);
    s.valid_loss = valid.empty() ? nan : batch_loss(params, valid, loss);
    return s;
  };
  result.curve.push_back(stats(0));
  if (on_epoch) on_epoch(result.curve.back());

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad;
  std::vector<GraphSample> batch;
  GcnnParams last_good = params;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    bool finite = true;
    for (std::size_t start = 0; start < order.size() && finite; start += config.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
        batch.push_back(train[order[k]]);
      }
      double l;
      try {
        l = batch_gradient(params, batch, loss, grad);
      } catch (const GcnnError&) {
        finite = false;
        break;
      }
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);
      const double step = config.learning_rate * (norm > config.clip_norm ? config.clip_norm / norm : 1.0);
      auto& v = params.values();
      for (std::size_t k = 0; k < v.size(); ++k) v[k] -= step * grad[k];
      finite = std::isfinite(l);
    }
    EpochStats s;
    if (finite) {
      try {
        s = stats(epoch);
        finite = std::isfinite(s.train_loss);
      } catch (const GcnnError&) {
        finite = false;
      }
    }
    if (!finite) {
      params = last_good;
      result.diverged = true;
      break;
    }
    last_good = params;
    result.curve.push_back(s);
    if (on_epoch) on_epoch(s);
    if ((config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) || epoch == config.epochs) {
      result.checkpoints.emplace_back(epoch, params);
    }
  }
  return result;
}

int predict_branch(const GcnnParams& params, const BipartiteObservation& obs, std::span<const int> candidates) {
  if (candidates.empty()) throw std::invalid_argument("empty candidate set");
  const GcnnOutput out = gcnn_forward(params, obs);
  int best = candidates[0];
  for (int j : candidates) {
    const double lj = out.logits[j], lb = out.logits[best];
    if (lj > lb || (lj == lb && j < best)) best = j;
  }
  return best;
}

namespace {

constexpr char kMagic[8] = {'L', '2', 'B', 'G', 'C', 'N', 'N', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), bytes);
  if (!in) throw GcnnError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int k = 0; k < bytes; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

}  // namespace

void save_checkpoint(const GcnnParams& params, const std::string& path, const std::string& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, kFeatureCatalogVersion);
  put_u32(out, kVarFeatures);
  put_u32(out, kConsFeatures);
  put_u32(out, static_cast<std::uint32_t>(params.hidden()));
  put_u64(out, params.size());
  for (double v : params.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  put_u64(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

GcnnParams load_checkpoint(const std::string& path, std::string* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GcnnError("cannot read checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw GcnnError(path + " is not a checkpoint");
  if (get_u(in, 4) != kCheckpointVersion) throw GcnnError(path + ": unsupported checkpoint version");
  const auto catalog = get_u(in, 4);
  if (catalog != static_cast<std::uint64_t>(kFeatureCatalogVersion)) {
    throw GcnnError(path + ": feature catalog version " + std::to_string(catalog) + " does not match " +
                    std::to_string(kFeatureCatalogVersion));
  }
  if (get_u(in, 4) != kVarFeatures || get_u(in, 4) != kConsFeatures) throw GcnnError(path + ": feature widths differ");
  const int hidden = static_cast<int>(get_u(in, 4));
  GcnnParams p(hidden);
  if (get_u(in, 8) != p.size()) throw GcnnError(path + ": parameter count mismatch");
  for (double& v : p.values()) v = std::bit_cast<double>(get_u(in, 8));
  const auto len = get_u(in, 8);
  std::string meta(len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(len));
  if (!in) throw GcnnError("truncated checkpoint");
  if (metadata) *metadata = std::move(meta);
  return p;
}

int GcnnPolicy::select(BranchContext& ctx) { return predict_branch(*params_, ctx.observation(), ctx.candidates()); }

}  // namespace l2b
