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
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2b/eval.hpp"

namespace l2b {

// Bad key, bad value or bad command line. Exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, corrupt or mismatched artifacts. Exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Too many per-instance failures in a stage. Exit code 3.
class PartialFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat dotted-key configuration. Text form: one `key = value` per line,
// `#` starts a comment. Every key has a default; unknown keys are errors.
class Config {
 public:
  Config();

  void set(const std::string& key, const std::string& value);
  // Applies a `key=value` assignment.
  void assign(const std::string& assignment);
  void load_text(const std::string& text, const std::string& origin = "config");
  void load_file(const std::string& path);

  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  // sha256 over the canonical text of every key that can change results;
  // run.root, run.workers and eval.plot_data are left out.
  std::string hash() const;
  std::string to_text() const;

  static std::vector<std::string> keys();

 private:
  std::map<std::string, std::string> values_;
};

// Directory layout under run.root:
//   config.txt, instances/, episodes/, selected/, checkpoints/, reports/
class Pipeline {
 public:
  Pipeline(Config config, std::ostream& log);

  void generate();
  void collect();
  void select();
  void train();
  void evaluate();
  void compare();
  std::string report();  // returns the summary text
  void run_all();

  const Config& config() const { return config_; }
  const std::string& config_hash() const { return hash_; }
  std::filesystem::path root() const { return root_; }

  // Instances of one split with their reference optima, checked against the
  // instance manifest.
  std::vector<EvalInstance> load_split(const std::string& split) const;

 private:
  nlohmann::json stamp(const std::string& stage) const;
  nlohmann::json read_manifest(const std::filesystem::path& path, const std::string& stage) const;
  void write_json(const std::filesystem::path& path, const nlohmann::json& j) const;
  void write_text(const std::filesystem::path& path, const std::string& text) const;
  void echo_config() const;
  EvalOptions eval_options() const;

  Config config_;
  std::ostream& log_;
  std::string hash_;
  std::filesystem::path root_;
};

// sha256 of a file's bytes; DataError when unreadable.
std::string file_sha256(const std::filesystem::path& path);

}  // namespace l2b
