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
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "l2b/episode.hpp"
#include "l2b/gcnn.hpp"

namespace l2b {

// G_t = r_t + gamma G_{t+1}, G_last = r_last, summed back to front.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

struct ReturnEntry {
  GraphSample sample;  // target holds G_i
  StateDigest digest;
  std::string instance_id;
  std::size_t position = 0;
};

struct ReturnLabeledSet {
  std::vector<ReturnEntry> entries;  // episode order, then transition order
  double gamma = 1.0;

  std::vector<GraphSample> samples() const;
  std::vector<double> returns() const;
};

// Throws EpisodeError naming the episode and position on a broken chain.
ReturnLabeledSet compute_returns(std::span<const Episode> episodes, double gamma);

struct EnvelopeConfig {
  double ridge = 1e-4;        // lambda
  double penalty_k = 1000.0;  // K
  int epochs = 40;
  double learning_rate = 0.01;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double clip_norm = 10.0;
};

struct EnvelopeResult {
  GcnnParams params;
  double target_scale = 1.0;  // network fits G / target_scale
  std::vector<double> values;  // V_phi(obs_i, set_i) in return units
  double final_loss = 0.0;
  double violation_fraction = 0.0;  // |{V_i < G_i}| / m
  std::vector<EpochStats> curve;
};

// Fits V_phi to the returns under the penalized loss. Returns are divided by
// max |G_i| before fitting so one learning rate serves every dataset. `init`
// fixes the starting parameters (otherwise seeded from config.seed). Throws
// GcnnError suggesting a smaller learning rate when the loss diverges.
EnvelopeResult train_envelope(const ReturnLabeledSet& set, const EnvelopeConfig& config,
                              const GcnnParams* init = nullptr, const std::vector<char>& trainable = {});

double violation_fraction(std::span<const double> returns, std::span<const double> values);

// ceil(p / 100 * m), computed without floating-point overshoot.
std::size_t selection_count(std::size_t m, double p);

struct Selection {
  std::vector<std::size_t> indices;  // selected entries, best ratio first
  std::vector<double> ratios;        // per entry
  double offset = 0.0;               // shift applied to both G and V
  double threshold = 0.0;            // x: the smallest selected ratio
};

// Ranks entries by (G_i + s) / (V_i + s) where the shared shift s makes every
// numerator and denominator positive, and keeps the top ceil(p% m). Ties keep
// the earlier entry.
Selection select_top(std::span<const double> returns, std::span<const double> values, double p);

// Observation blobs are stored once per digest next to the dataset rows.
struct DatasetRow {
  StateDigest digest;
  std::vector<int> candidates;
  int action = -1;
  double ret = 0.0;
  double value = 0.0;
  double ratio = 0.0;
  std::string instance_id;
  std::size_t position = 0;
};

struct Dataset {
  std::vector<DatasetRow> rows;
  std::map<StateDigest, std::shared_ptr<const BipartiteObservation>> observations;

  std::vector<GraphSample> samples() const;
};

void write_dataset(const Dataset& data, const std::string& rows_path, const std::string& obs_path,
                   const ArtifactStamp& stamp);
Dataset read_dataset(const std::string& rows_path, const std::string& obs_path, ArtifactStamp* stamp = nullptr);

}  // namespace l2b
