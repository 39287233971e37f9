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

#include "l2b/bail.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace l2b {

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    g[k] = acc;
  }
  return g;
}

std::vector<GraphSample> ReturnLabeledSet::samples() const {
  std::vector<GraphSample> out;
  out.reserve(entries.size());
  for (const ReturnEntry& e : entries) out.push_back(e.sample);
  return out;
}

std::vector<double> ReturnLabeledSet::returns() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const ReturnEntry& e : entries) out.push_back(e.sample.target);
  return out;
}

ReturnLabeledSet compute_returns(std::span<const Episode> episodes, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  ReturnLabeledSet set;
  set.gamma = gamma;
  for (const Episode& ep : episodes) {
    check_chain(ep);
    std::vector<double> r;
    r.reserve(ep.transitions.size());
    for (const Transition& t : ep.transitions) r.push_back(t.reward);
    const std::vector<double> g = discounted_returns(r, gamma);
    for (std::size_t t = 0; t < ep.transitions.size(); ++t) {
      const Transition& tr = ep.transitions[t];
      if (!tr.obs) {
        throw EpisodeError("episode " + ep.instance_id + " position " + std::to_string(t) + ": missing observation");
      }
      ReturnEntry e;
      e.sample.obs = tr.obs;
      e.sample.candidates = tr.candidates;
      e.sample.action = tr.action;
      e.sample.target = g[t];
      e.digest = tr.digest;
      e.instance_id = ep.instance_id;
      e.position = t;
      set.entries.push_back(std::move(e));
    }
  }
  return set;
}

double violation_fraction(std::span<const double> returns, std::span<const double> values) {
  if (returns.size() != values.size()) throw std::invalid_argument("returns and values differ in length");
  if (returns.empty()) return 0.0;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < returns.size(); ++i) bad += values[i] < returns[i];
  return static_cast<double>(bad) / static_cast<double>(returns.size());
}

EnvelopeResult train_envelope(const ReturnLabeledSet& set, const EnvelopeConfig& config, const GcnnParams* init,
                              const std::vector<char>& trainable) {
  if (set.entries.empty()) throw std::invalid_argument("train_envelope: empty return set");
  EnvelopeResult res{init ? *init : GcnnParams::initialized(config.seed), 1.0, {}, 0.0, 0.0, {}};

  double scale = 0.0;
  for (const ReturnEntry& e : set.entries) scale = std::max(scale, std::abs(e.sample.target));
  if (!(scale > 0.0)) scale = 1.0;
  res.target_scale = scale;

  std::vector<GraphSample> data = set.samples();
  for (GraphSample& s : data) s.target /= scale;

  LossConfig loss;
  loss.kind = LossKind::value_envelope;
  loss.penalty_k = config.penalty_k;
  loss.ridge = config.ridge;
  loss.trainable = trainable;
  if (loss.trainable.empty()) {
    // encoder and value head; the policy head has no effect on V
    loss.trainable.assign(res.params.size(), 0);
    for (const TensorInfo& t : res.params.layout()) {
      if (t.head == ParamHead::policy) continue;
      std::fill_n(loss.trainable.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), 1);
    }
  }

  TrainConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.batch_size = config.batch_size;
  tc.epochs = config.epochs;
  tc.seed = config.seed;
  tc.checkpoint_every = 0;
  tc.clip_norm = config.clip_norm;
  TrainResult tr = train_gcnn(res.params, data, {}, loss, tc);
  if (tr.diverged) {
    std::ostringstream msg;
    msg << "envelope training diverged at learning rate " << config.learning_rate << "; try a smaller learning rate";
    throw GcnnError(msg.str());
  }
  res.curve = std::move(tr.curve);
  res.final_loss = batch_loss(res.params, data, loss);

  res.values.reserve(data.size());
  for (const GraphSample& s : data) res.values.push_back(gcnn_forward(res.params, *s.obs).value * scale);
  const std::vector<double> g = set.returns();
  res.violation_fraction = violation_fraction(g, res.values);
  return res;
}

std::size_t selection_count(std::size_t m, double p) {
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("selection percentage must lie in (0, 100]");
  const double raw = p * static_cast<double>(m) / 100.0;
  // absorb rounding noise such as 15 * 100 / 100 landing just above 15
  const double k = std::ceil(raw - 1e-9 * std::max(1.0, raw));
  return std::min(m, static_cast<std::size_t>(std::max(0.0, k)));
}

Selection select_top(std::span<const double> returns, std::span<const double> values, double p) {
  if (returns.size() != values.size()) throw std::invalid_argument("returns and values differ in length");
  const std::size_t m = returns.size();
  if (m == 0) throw std::invalid_argument("select_top: empty return set");
  const std::size_t k = selection_count(m, p);
  Selection sel;

  double lo = 0.0;
  double big = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(returns[i]) || !std::isfinite(values[i])) {
      throw std::invalid_argument("non-finite return or value at entry " + std::to_string(i));
    }
    lo = std::min({lo, returns[i], values[i]});
    big = std::max({big, std::abs(returns[i]), std::abs(values[i])});
  }
  const double delta = big > 0.0 ? 0.01 * big : 1.0;
  sel.offset = -lo + delta;

  sel.ratios.resize(m);
  for (std::size_t i = 0; i < m; ++i) sel.ratios[i] = (returns[i] + sel.offset) / (values[i] + sel.offset);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sel.ratios[a] > sel.ratios[b]; });
  order.resize(k);
  sel.indices = std::move(order);
  sel.threshold = k > 0 ? sel.ratios[sel.indices.back()] : 0.0;
  return sel;
}

std::vector<GraphSample> Dataset::samples() const {
  std::vector<GraphSample> out;
  out.reserve(rows.size());
  for (const DatasetRow& r : rows) {
    auto it = observations.find(r.digest);
    if (it == observations.end()) throw EpisodeError("dataset row references unknown observation " + r.digest.hex());
    out.push_back({it->second, r.candidates, r.action, r.ret});
  }
  return out;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_header(const nlohmann::json& j, const std::string& type, const std::string& path) {
  if (j.value("type", "") != type) throw EpisodeError(path + ": expected a " + type + " header");
  if (j.at("catalog_version").get<int>() != kFeatureCatalogVersion) {
    throw EpisodeError(path + ": feature catalog version " + std::to_string(j.at("catalog_version").get<int>()) +
                       " does not match " + std::to_string(kFeatureCatalogVersion));
  }
  if (j.at("digest_algorithm").get<std::string>() != kDigestAlgorithm) {
    throw EpisodeError(path + ": digest algorithm mismatch");
  }
}

template <class F>
void for_each_line(const std::string& text, const std::string& path, F&& f) {
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    try {
      f(nlohmann::json::parse(line), no);
    } catch (const nlohmann::json::exception& e) {
      throw EpisodeError(path + " line " + std::to_string(no) + ": " + e.what());
    }
  }
}

}  // namespace

void write_dataset(const Dataset& data, const std::string& rows_path, const std::string& obs_path,
                   const ArtifactStamp& stamp) {
  const nlohmann::json common = {{"config_hash", stamp.config_hash},
                                 {"seed", stamp.seed},
                                 {"catalog_version", kFeatureCatalogVersion},
                                 {"digest_algorithm", kDigestAlgorithm}};
  {
    std::ofstream out(rows_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + rows_path);
    nlohmann::json h = common;
    h["type"] = "dataset";
    h["rows"] = data.rows.size();
    out << h.dump() << '\n';
    for (const DatasetRow& r : data.rows) {
      nlohmann::json j = {{"digest", r.digest.hex()}, {"set", r.candidates}, {"a", r.action},
                          {"G", r.ret},               {"V", r.value},      {"ratio", r.ratio},
                          {"instance", r.instance_id}, {"t", r.position}};
      out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + rows_path);
  }
  std::ofstream out(obs_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + obs_path);
  nlohmann::json h = common;
  h["type"] = "observations";
  h["count"] = data.observations.size();
  out << h.dump() << '\n';
  for (const auto& [d, obs] : data.observations) {
    out << nlohmann::json{{"digest", d.hex()}, {"obs", observation_to_json(*obs)}}.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + obs_path);
}

Dataset read_dataset(const std::string& rows_path, const std::string& obs_path, ArtifactStamp* stamp) {
  Dataset data;
  bool header = false;
  for_each_line(slurp(obs_path), obs_path, [&](const nlohmann::json& j, std::size_t) {
    if (!header) {
      check_header(j, "observations", obs_path);
      header = true;
      return;
    }
    data.observations.emplace(StateDigest::from_hex(j.at("digest").get<std::string>()),
                              std::make_shared<const BipartiteObservation>(observation_from_json(j.at("obs"))));
  });
  if (!header) throw EpisodeError(obs_path + ": empty file");
  header = false;
  for_each_line(slurp(rows_path), rows_path, [&](const nlohmann::json& j, std::size_t no) {
    if (!header) {
      check_header(j, "dataset", rows_path);
      if (stamp) {
        stamp->config_hash = j.at("config_hash").get<std::string>();
        stamp->seed = j.at("seed").get<std::uint64_t>();
      }
      header = true;
      return;
    }
    DatasetRow r;
    r.digest = StateDigest::from_hex(j.at("digest").get<std::string>());
    r.candidates = j.at("set").get<std::vector<int>>();
    r.action = j.at("a").get<int>();
    r.ret = j.at("G").get<double>();
    r.value = j.at("V").get<double>();
    r.ratio = j.at("ratio").get<double>();
    r.instance_id = j.at("instance").get<std::string>();
    r.position = j.at("t").get<std::size_t>();
    if (!data.observations.count(r.digest)) {
      throw EpisodeError(rows_path + " line " + std::to_string(no) + ": observation " + r.digest.hex() +
                         " is missing from " + obs_path);
    }
    data.rows.push_back(std::move(r));
  });
  if (!header) throw EpisodeError(rows_path + ": empty file");
  return data;
}

}  // namespace l2b
