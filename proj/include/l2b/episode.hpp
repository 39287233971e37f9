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
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2b/observation.hpp"
#include "l2b/trace.hpp"

namespace l2b {

// One branching decision. next_obs is shared with the following transition.
struct Transition {
  std::shared_ptr<const BipartiteObservation> obs;
  std::vector<int> candidates;
  int action = -1;
  double reward = 0.0;
  std::shared_ptr<const BipartiteObservation> next_obs;  // null when done
  std::vector<int> next_candidates;
  bool done = false;
  std::int64_t clock = 0;  // decision clock
  StateDigest digest;
  StateDigest next_digest;  // zero when done
};

struct Episode {
  std::string instance_id;
  std::vector<Transition> transitions;
  DualTrace trace;
  double dual_integral = 0.0;
  std::uint64_t seed = 0;
  std::string policy;
};

class EpisodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metadata stamped into the header line of every episode file.
struct ArtifactStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

// JSON-lines: a header object, then one object per transition.
std::string episode_to_jsonl(const Episode& episode, const ArtifactStamp& stamp = {});
Episode episode_from_jsonl(std::string_view text, ArtifactStamp* stamp = nullptr);
void write_episode_file(const Episode& episode, const std::string& path, const ArtifactStamp& stamp = {});
Episode read_episode_file(const std::string& path, ArtifactStamp* stamp = nullptr);

// Throws EpisodeError naming the episode and position when a transition's
// next digest does not match the following transition's digest, or when a
// done flag is misplaced.
void check_chain(const Episode& episode);

}  // namespace l2b
