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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "l2b/branching.hpp"
#include "l2b/observation.hpp"

namespace l2b {

inline constexpr int kHiddenWidth = 32;
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ParamHead : std::uint8_t { encoder, policy, value };

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  bool is_bias = false;
  ParamHead head = ParamHead::encoder;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Bipartite graph convolution: embeddings, one variable-to-constraint and
// one constraint-to-variable pass, a per-variable policy logit and a
// mean-pooled scalar value. All tensors live in one flat vector.
class GcnnParams {
 public:
  explicit GcnnParams(int hidden = kHiddenWidth);

  // Uniform Glorot weights, zero biases.
  static GcnnParams initialized(std::uint64_t seed, int hidden = kHiddenWidth);

  int hidden() const { return hidden_; }
  std::span<const TensorInfo> layout() const { return layout_; }
  const TensorInfo& tensor(std::string_view name) const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool operator==(const GcnnParams& o) const { return hidden_ == o.hidden_ && values_ == o.values_; }

 private:
  int hidden_;
  std::vector<TensorInfo> layout_;
  std::vector<double> values_;
};

struct GcnnOutput {
  std::vector<double> logits;  // one per variable, unmasked
  double value = 0.0;
};

class GcnnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws GcnnError on a feature width mismatch or a non-finite activation
// (naming the layer).
GcnnOutput gcnn_forward(const GcnnParams& params, const BipartiteObservation& obs);

// Softmax of the logits restricted to `candidates` (same order).
std::vector<double> masked_softmax(std::span<const double> logits, std::span<const int> candidates);

struct GraphSample {
  std::shared_ptr<const BipartiteObservation> obs;
  std::vector<int> candidates;
  int action = -1;
  double target = 0.0;  // return G_i for the value loss
};

enum class LossKind { policy_cross_entropy, value_envelope };

struct LossConfig {
  LossKind kind = LossKind::policy_cross_entropy;
  double penalty_k = 1000.0;  // K, value loss only
  double ridge = 0.0;         // lambda on non-bias weights of trainable tensors
  // Optional per-coordinate mask; empty means every parameter trains.
  std::vector<char> trainable;
};

// Mean over the batch of -log pi(a | obs, set), or of
// (V - G)^2 (1[V >= G] + K 1[V < G]); plus ridge * ||w||^2.
double batch_loss(const GcnnParams& params, std::span<const GraphSample> batch, const LossConfig& config);

// Exact reverse-mode gradient of batch_loss; returns the loss too.
double batch_gradient(const GcnnParams& params, std::span<const GraphSample> batch, const LossConfig& config,
                      std::vector<double>& grad);

// Trainable mask that enables only the named tensors.
std::vector<char> mask_for(const GcnnParams& params, std::span<const std::string> tensor_names);

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 30;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;  // epochs; 0 disables
  double clip_norm = 10.0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;  // NaN when there is no validation set
};

struct TrainResult {
  std::vector<EpochStats> curve;  // entry 0 is the initial model
  std::vector<std::pair<int, GcnnParams>> checkpoints;  // (epoch, params)
  bool diverged = false;
};

// Mini-batch gradient descent with gradient-norm clipping. Fully
// deterministic given config.seed. On a non-finite loss training stops and
// params are restored to the last finite state.
TrainResult train_gcnn(GcnnParams& params, std::span<const GraphSample> train, std::span<const GraphSample> valid,
                       const LossConfig& loss, const TrainConfig& config,
                       const std::function<void(const EpochStats&)>& on_epoch = {});

// Argmax logit over candidates; ties go to the lowest variable index.
int predict_branch(const GcnnParams& params, const BipartiteObservation& obs, std::span<const int> candidates);

// Versioned little-endian binary; metadata is free-form JSON text.
void save_checkpoint(const GcnnParams& params, const std::string& path, const std::string& metadata = "{}");
GcnnParams load_checkpoint(const std::string& path, std::string* metadata = nullptr);

class GcnnPolicy final : public BranchingPolicy {
 public:
  explicit GcnnPolicy(std::shared_ptr<const GcnnParams> params) : params_(std::move(params)) {}
  std::string name() const override { return "gcnn"; }
  int select(BranchContext& ctx) override;

 private:
  std::shared_ptr<const GcnnParams> params_;
};

}  // namespace l2b
