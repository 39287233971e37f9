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

// l2b: command-line driver for the learning-to-branch pipeline.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 too many per-instance failures.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "l2b/pipeline.hpp"

namespace {

int run_solve(const std::string& file, const std::string& policy, const std::string& checkpoint,
              std::int64_t max_clock, std::uint64_t seed) {
  std::shared_ptr<const l2b::GcnnParams> params;
  if (!checkpoint.empty()) params = std::make_shared<const l2b::GcnnParams>(l2b::load_checkpoint(checkpoint));
  auto factory = l2b::make_policy_factory(policy, params);
  const l2b::MilpInstance inst = l2b::read_instance_file(file);
  auto p = factory();
  l2b::Budget b;
  b.max_clock = max_clock;
  l2b::SolveOptions so;
  so.seed = seed;
  const l2b::SolveResult r = l2b::solve(inst, *p, b, so);
  std::cout << l2b::solve_result_to_json(r).dump(1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l2b: learning-to-branch pipeline (generate, collect, select, train, evaluate, compare, report)"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> assignments;
  std::optional<std::string> root;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  app.add_option("-c,--config", config_file, "configuration file of key = value lines")->check(CLI::ExistingFile);
  app.add_option("-s,--set", assignments, "override a key: --set train.epochs=5 (repeatable)");
  app.add_option("-r,--root", root, "run directory (run.root)");
  app.add_option("-j,--workers", workers, "worker threads (run.workers)");
  app.add_option("--seed", seed, "global seed (run.seed)");

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"generate", "write train/valid/test instances and their reference optima"},
      {"collect", "record hybrid branching episodes on the train split"},
      {"select", "label returns, fit the upper envelope and keep the top p%"},
      {"train", "imitation-train the GCNN on the selected states"},
      {"evaluate", "pick the checkpoint with the best validation reward and score it on the test split"},
      {"compare", "leaderboard of the trained policy and the baselines on the test split"},
      {"report", "write reports/summary.md from the stage manifests"},
      {"run", "all stages in order"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : stages) subs[name] = app.add_subcommand(name, help);
  bool plot = true;
  subs["evaluate"]->add_flag("--plot-data,!--no-plot-data", plot, "emit per-instance (clock, bound) CSV");
  subs["run"]->add_flag("--plot-data,!--no-plot-data", plot, "emit per-instance (clock, bound) CSV");

  CLI::App* show = app.add_subcommand("config", "print the effective configuration and its hash");

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve one instance file and print the result as JSON");
  std::string solve_file, solve_policy = "hybrid", solve_ckpt;
  std::int64_t solve_clock = 50000;
  std::uint64_t solve_seed = 0;
  solve_cmd->add_option("file", solve_file, "instance file")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("-p,--policy", solve_policy, "branching policy");
  solve_cmd->add_option("--checkpoint", solve_ckpt, "GCNN checkpoint for --policy gcnn");
  solve_cmd->add_option("--max-clock", solve_clock, "pseudo-clock budget");
  solve_cmd->add_option("--solve-seed", solve_seed, "policy seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve_cmd->parsed()) return run_solve(solve_file, solve_policy, solve_ckpt, solve_clock, solve_seed);

    l2b::Config config;
    if (!config_file.empty()) config.load_file(config_file);
    for (const std::string& a : assignments) config.assign(a);
    if (root) config.set("run.root", *root);
    if (workers) config.set("run.workers", std::to_string(*workers));
    if (seed) config.set("run.seed", std::to_string(*seed));
    if (subs["evaluate"]->parsed() || subs["run"]->parsed()) {
      if (subs["evaluate"]->count("--plot-data") + subs["evaluate"]->count("--no-plot-data") +
              subs["run"]->count("--plot-data") + subs["run"]->count("--no-plot-data") >
          0) {
        config.set("eval.plot_data", plot ? "true" : "false");
      }
    }
    if (show->parsed()) {
      std::cout << "# config hash " << config.hash() << "\n" << config.to_text();
      return 0;
    }

    l2b::Pipeline pipe(config, std::cerr);
    if (subs["generate"]->parsed()) pipe.generate();
    if (subs["collect"]->parsed()) pipe.collect();
    if (subs["select"]->parsed()) pipe.select();
    if (subs["train"]->parsed()) pipe.train();
    if (subs["evaluate"]->parsed()) pipe.evaluate();
    if (subs["compare"]->parsed()) pipe.compare();
    if (subs["report"]->parsed()) std::cout << pipe.report();
    if (subs["run"]->parsed()) {
      pipe.run_all();
      std::cout << pipe.report();
    }
    return 0;
  } catch (const l2b::ConfigError& e) {
    std::cerr << "l2b: " << e.what() << "\n";
    return 1;
  } catch (const l2b::PartialFailure& e) {
    std::cerr << "l2b: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "l2b: " << e.what() << "\n";
    return 2;
  }
}
