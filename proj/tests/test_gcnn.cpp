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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "l2b/bnb.hpp"
#include "l2b/gcnn.hpp"
#include "gcnn_fixtures.hpp"
#include "random_instances.hpp"

using namespace l2b;
using namespace l2b::testing;

TEST_CASE("layout covers every parameter once") {
  const GcnnParams p(kHiddenWidth);
  std::size_t total = 0;
  for (const TensorInfo& t : p.layout()) {
    CHECK(t.offset == total);
    total += t.size();
  }
  CHECK(total == p.size());
  CHECK(p.tensor("value.b").head == ParamHead::value);
  CHECK(p.tensor("policy.w").head == ParamHead::policy);
  CHECK(p.tensor("gc.we").is_bias == false);
  CHECK_THROWS(p.tensor("nope"));
}

TEST_CASE("initialization is deterministic") {
  CHECK(GcnnParams::initialized(4) == GcnnParams::initialized(4));
  CHECK_FALSE(GcnnParams::initialized(4) == GcnnParams::initialized(5));
}

TEST_CASE("without edges each logit depends only on its own variable") {
  Rng rng(1);
  BipartiteObservation obs = random_observation(rng, 5, 3, /*edges=*/false);
  const GcnnParams p = GcnnParams::initialized(9);
  const auto before = gcnn_forward(p, obs);
  obs.var_features[1 * kVarFeatures + kVarObjective] += 0.5;
  obs.var_features[1 * kVarFeatures + kVarFraction] = 0.25;
  const auto after = gcnn_forward(p, obs);
  CHECK(after.logits[0] == before.logits[0]);
  CHECK(after.logits[2] == before.logits[2]);
  CHECK(after.logits[1] != before.logits[1]);
}

TEST_CASE("permutation equivariance") {
  Rng rng(2);
  const GcnnParams p = GcnnParams::initialized(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const BipartiteObservation obs = random_observation(rng, 2 + static_cast<int>(uniform_index(rng, 10)),
                                                        static_cast<int>(uniform_index(rng, 6)), true);
    std::vector<int> perm(obs.num_vars);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle_in_place(perm, rng);
    const BipartiteObservation q = permute_variables(obs, perm);
    const auto a = gcnn_forward(p, obs);
    const auto b = gcnn_forward(p, q);
    for (int j = 0; j < obs.num_vars; ++j) worst = std::max(worst, std::abs(a.logits[j] - b.logits[perm[j]]));
    worst = std::max(worst, std::abs(a.value - b.value));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("masked softmax") {
  const std::vector<double> logits{3.0, 1.0, 1.0, 7.0, 1.0, 1.0};
  const std::vector<int> set{1, 2, 4, 5};
  for (double v : masked_softmax(logits, set)) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  Rng rng(3);
  const GcnnParams p = GcnnParams::initialized(3);
  for (int k = 0; k < 200; ++k) {
    const auto obs = random_observation(rng, 6, 3, true);
    const auto out = gcnn_forward(p, obs);
    const auto set2 = random_subset(rng, obs.num_vars);
    const auto probs = masked_softmax(out.logits, set2);
    CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("cross entropy values") {
  Rng rng(4);
  const GcnnParams zero(kHiddenWidth);
  auto obs = std::make_shared<const BipartiteObservation>(random_observation(rng, 7, 3, true));
  LossConfig ce;
  for (int c : {1, 2, 4, 7}) {
    std::vector<int> set(c);
    std::iota(set.begin(), set.end(), 0);
    const GraphSample s{obs, set, c - 1, 0.0};
    CHECK(batch_loss(zero, std::span(&s, 1), ce) == doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-14));
  }

  SUBCASE("saturated logit") {
    // Route one feature column straight to the logit: logit_j = 31 * x_j,f.
    BipartiteObservation o = random_observation(rng, 5, 2, true);
    for (int j = 0; j < 5; ++j) o.var_features[j * kVarFeatures + kVarAtUpper] = j == 3 ? 1.0 : 0.0;
    GcnnParams p(kHiddenWidth);
    auto& v = p.values();
    v[p.tensor("emb_v.w").offset + kVarAtUpper] = 1.0;
    v[p.tensor("fv.wv").offset] = 1.0;
    v[p.tensor("fv.w2").offset] = 1.0;
    v[p.tensor("policy.w").offset] = 31.0;
    const auto out = gcnn_forward(p, o);
    CHECK(out.logits[3] - out.logits[0] == doctest::Approx(31.0));
    const GraphSample s{std::make_shared<const BipartiteObservation>(o), {0, 1, 2, 3, 4}, 3, 0.0};
    CHECK(batch_loss(p, std::span(&s, 1), ce) <= 1e-12);
  }

  SUBCASE("two graphs against an independent log-softmax") {
    const GcnnParams p = GcnnParams::initialized(8);
    std::vector<GraphSample> batch;
    batch.push_back({std::make_shared<const BipartiteObservation>(random_observation(rng, 4, 2, true)), {0, 2, 3}, 2, 0});
    batch.push_back({std::make_shared<const BipartiteObservation>(random_observation(rng, 6, 3, true)), {1, 5}, 1, 0});
    double expect = 0.0;
    for (const GraphSample& s : batch) {
      const auto out = gcnn_forward(p, *s.obs);
      long double z = 0.0L;
      for (int j : s.candidates) z += std::exp(static_cast<long double>(out.logits[j]));
      expect += static_cast<double>(std::log(z) - out.logits[s.action]);
    }
    expect /= 2.0;
    CHECK(std::abs(batch_loss(p, batch, ce) - expect) <= 1e-12);
  }
}

TEST_CASE("finite-difference gradient check, both losses") {
  Rng rng(5);
  GcnnParams p = GcnnParams::initialized(11);
  const auto batch = random_batch(rng, p, 3);
  for (LossKind kind : {LossKind::policy_cross_entropy, LossKind::value_envelope}) {
    LossConfig cfg;
    cfg.kind = kind;
    cfg.ridge = 1e-3;
    const double worst = gradient_check(p, batch, cfg, rng, 50);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("policy loss leaves the value head untouched") {
  Rng rng(6);
  const GcnnParams p = GcnnParams::initialized(2);
  const auto batch = random_batch(rng, p, 4);
  std::vector<double> g;
  batch_gradient(p, batch, LossConfig{}, g);
  for (const char* name : {"value.w", "value.b"}) {
    const TensorInfo& t = p.tensor(name);
    for (std::size_t k = t.offset; k < t.offset + t.size(); ++k) CHECK(g[k] == 0.0);
  }
}

TEST_CASE("stationary point of a one-parameter loss") {
  Rng rng(7);
  GcnnParams p = GcnnParams::initialized(2);
  const TensorInfo& vw = p.tensor("value.w");
  std::fill(p.values().begin() + vw.offset, p.values().begin() + vw.offset + vw.size(), 0.0);
  p.values()[p.tensor("value.b").offset] = 2.5;
  const GraphSample s{std::make_shared<const BipartiteObservation>(random_observation(rng, 4, 2, true)), {0, 1}, 0, 2.5};
  LossConfig cfg;
  cfg.kind = LossKind::value_envelope;
  const std::vector<std::string> names{"value.b"};
  cfg.trainable = mask_for(p, names);
  std::vector<double> g;
  batch_gradient(p, std::span(&s, 1), cfg, g);
  double norm = 0.0;
  for (double v : g) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-10);
}

TEST_CASE("training reduces the loss and is reproducible") {
  Rng rng(8);
  GcnnParams p0 = GcnnParams::initialized(12);
  const auto data = random_batch(rng, p0, 20);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 5;
  tc.learning_rate = 0.05;
  tc.seed = 3;
  GcnnParams a = p0, b = p0;
  const TrainResult ra = train_gcnn(a, data, {}, LossConfig{}, tc);
  const TrainResult rb = train_gcnn(b, data, {}, LossConfig{}, tc);
  REQUIRE(ra.curve.size() == 31);
  CHECK(ra.curve.back().train_loss < ra.curve.front().train_loss);
  CHECK(a == b);
  for (std::size_t k = 0; k < ra.curve.size(); ++k) CHECK(ra.curve[k].train_loss == rb.curve[k].train_loss);
  CHECK(ra.checkpoints.size() == 30);
  CHECK_FALSE(ra.diverged);
}

TEST_CASE("single sample is memorized") {
  Rng rng(9);
  GcnnParams p = GcnnParams::initialized(13);
  auto data = random_batch(rng, p, 1);
  TrainConfig tc;
  tc.epochs = 300;
  tc.batch_size = 1;
  tc.learning_rate = 0.1;
  const TrainResult r = train_gcnn(p, data, {}, LossConfig{}, tc);
  CHECK(r.curve.back().train_loss < 1e-3);
  CHECK(predict_branch(p, *data[0].obs, data[0].candidates) == data[0].action);
}

TEST_CASE("small steps never increase the full-batch loss") {
  Rng rng(10);
  GcnnParams p = GcnnParams::initialized(14);
  const auto data = random_batch(rng, p, 6);
  TrainConfig tc;
  tc.epochs = 25;
  tc.batch_size = 6;
  tc.learning_rate = 1e-4;
  const TrainResult r = train_gcnn(p, data, {}, LossConfig{}, tc);
  for (std::size_t k = 1; k < r.curve.size(); ++k) CHECK(r.curve[k].train_loss <= r.curve[k - 1].train_loss);
}

TEST_CASE("divergence restores the last finite parameters") {
  Rng rng(15);
  GcnnParams p = GcnnParams::initialized(15);
  auto data = random_batch(rng, p, 4);
  LossConfig cfg;
  cfg.kind = LossKind::value_envelope;
  for (auto& s : data) s.target = 1e300;
  TrainConfig tc;
  tc.epochs = 5;
  tc.learning_rate = 1e6;
  tc.clip_norm = 1e300;
  const TrainResult r = train_gcnn(p, data, {}, cfg, tc);
  CHECK(r.diverged);
  for (double v : p.values()) CHECK(std::isfinite(v));
}

TEST_CASE("prediction") {
  Rng rng(11);
  const GcnnParams p = GcnnParams::initialized(16);
  const auto obs = random_observation(rng, 6, 3, true);
  CHECK(predict_branch(p, obs, std::vector<int>{4}) == 4);
  for (int k = 0; k < 1000; ++k) {
    const auto o = random_observation(rng, 2 + static_cast<int>(uniform_index(rng, 8)), 3, true);
    const auto set = random_subset(rng, o.num_vars);
    const int j = predict_branch(p, o, set);
    CHECK(std::find(set.begin(), set.end(), j) != set.end());
  }
}

TEST_CASE("checkpoint round trip and version guard") {
  const GcnnParams p = GcnnParams::initialized(17);
  const auto dir = std::filesystem::temp_directory_path() / "l2b_test_gcnn";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "a.bin").string();
  save_checkpoint(p, path, R"({"epoch":3})");
  std::string meta;
  const GcnnParams q = load_checkpoint(path, &meta);
  CHECK(q == p);
  CHECK(meta == R"({"epoch":3})");
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(12);  // catalog version field
    const char bumped[4] = {2, 0, 0, 0};
    f.write(bumped, 4);
  }
  CHECK_THROWS_AS(load_checkpoint(path), GcnnError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("gcnn policy drives the engine") {
  const MilpInstance inst =
      parse_instance("MILP v1 knap 2 1 2\nOBJ -5 -4\nROW 0 4 2 0 2 1 3\nBND 0 0 1\nBND 1 0 1\n");
  GcnnPolicy policy(std::make_shared<const GcnnParams>(GcnnParams::initialized(1)));
  const SolveResult r = solve(inst, policy, Budget{});
  CHECK(r.incumbent_value == doctest::Approx(-5.0));
}
