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

#include <json.hpp>

#include "l2b/bnb.hpp"
#include "l2b/gcnn.hpp"

namespace l2b {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each call builds a fresh, independent policy object.
using PolicyFactory = std::function<std::unique_ptr<BranchingPolicy>()>;

// Names: most-infeasible, pseudocost, strong, active-constraint, hybrid,
// random, gcnn (needs params). Throws EvalError on an unknown name.
PolicyFactory make_policy_factory(std::string_view name, std::shared_ptr<const GcnnParams> params = nullptr,
                                  const HybridConfig& hybrid = {});
std::vector<std::string> builtin_policy_names();

struct EvalInstance {
  std::string id;
  MilpInstance instance;
  std::optional<double> reference_value;  // known optimum, if any
};

struct EvalOptions {
  Budget budget;
  std::uint64_t seed = 0;  // per-instance seeds derive from this and the id
  int workers = 1;
  ClockMode clock_mode = ClockMode::pseudo;
};

struct EvalRow {
  std::string instance_id;
  std::string status;  // a SolveStatus name, or "error"
  std::string error;
  double opt_value = 0.0;
  double reward_constant = 0.0;  // T * opt_value
  double dual_integral = 0.0;
  double reward = 0.0;  // reward_constant - dual_integral
  double dual_bound = 0.0;
  double incumbent_value = 0.0;
  std::int64_t nodes = 0;
  std::int64_t clock = 0;
  DualTrace trace;

  bool ok() const { return status != "error"; }
};

struct EvalAggregate {
  std::size_t instances = 0;
  std::size_t errors = 0;
  double mean_reward = 0.0;  // over non-error rows
  double median_reward = 0.0;
  double mean_integral = 0.0;
  double mean_nodes = 0.0;
};

struct EvalReport {
  std::string policy;
  std::uint64_t seed = 0;
  Budget budget;
  ClockMode clock_mode = ClockMode::pseudo;
  std::vector<EvalRow> rows;  // ordered by instance id
  EvalAggregate aggregate;
};

EvalAggregate aggregate_rows(std::span<const EvalRow> rows);

// Solves every instance with its own engine on a pool of options.workers
// threads. Failures become error rows. In pseudo-clock mode the report does
// not depend on the worker count.
EvalReport evaluate_policy(const PolicyFactory& factory, std::span<const EvalInstance> instances,
                           const EvalOptions& options, const std::string& policy_label = "");

// Optimum of each instance, solved with most-infeasible branching under a
// node budget only. Instances that do not finish keep no reference.
void attach_reference_values(std::vector<EvalInstance>& instances, std::int64_t max_nodes = 1000000,
                             int workers = 1);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const EvalReport& report);
// instance,clock,bound for every trace event, for plotting dual-bound curves.
std::string plot_data_csv(const EvalReport& report);

struct CheckpointCandidate {
  std::string id;
  int epoch = 0;
  double valid_loss = 0.0;
  std::shared_ptr<const GcnnParams> params;  // null when loading failed
  std::string load_error;
};

// Loads a checkpoint file, recording the error instead of throwing.
CheckpointCandidate load_checkpoint_candidate(const std::string& path, const std::string& id, int epoch,
                                              double valid_loss);

struct CheckpointRow {
  std::string id;
  int epoch = 0;
  double valid_loss = 0.0;
  bool loaded = false;
  std::string error;
  EvalReport report;
};

struct CheckpointSelection {
  std::size_t best = 0;
  std::string best_id;
  std::vector<CheckpointRow> table;  // candidate order
};

// Picks the checkpoint with the highest mean validation reward; ties go to
// the later candidate. Validation loss is reported but never consulted.
// Throws EvalError when no candidate loaded.
CheckpointSelection select_best_checkpoint(std::span<const CheckpointCandidate> candidates,
                                           std::span<const EvalInstance> validation, const EvalOptions& options);

std::string checkpoint_table_csv(const CheckpointSelection& selection);

struct NamedPolicy {
  std::string name;
  PolicyFactory factory;
};

struct LeaderboardRow {
  std::string policy;
  EvalAggregate aggregate;
};

struct Comparison {
  std::vector<LeaderboardRow> leaderboard;  // by mean reward, best first
  std::vector<EvalReport> reports;          // input order
};

Comparison compare_policies(std::span<const NamedPolicy> policies, std::span<const EvalInstance> instances,
                            const EvalOptions& options);
std::string leaderboard_csv(const Comparison& comparison);

struct SignTest {
  int wins = 0;  // a > b
  int losses = 0;
  int ties = 0;
  double p_value = 1.0;  // one-sided, P(X >= wins) for X ~ Bin(wins + losses, 1/2)
};

// Paired one-sided sign test of "a tends to exceed b". Ties are dropped.
SignTest sign_test(std::span<const double> a, std::span<const double> b);

}  // namespace l2b
