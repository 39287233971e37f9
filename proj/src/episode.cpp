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

#include "l2b/episode.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace l2b {

namespace {

nlohmann::json trace_to_json(const DualTrace& trace) {
  nlohmann::json ev = nlohmann::json::array();
  for (const TraceEvent& e : trace.events) ev.push_back({e.clock, e.bound});
  return {{"horizon", trace.horizon}, {"opt_value", trace.opt_value}, {"events", std::move(ev)}};
}

DualTrace trace_from_json(const nlohmann::json& j) {
  DualTrace t;
  t.horizon = j.at("horizon").get<std::int64_t>();
  t.opt_value = j.at("opt_value").get<double>();
  for (const auto& e : j.at("events")) t.events.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<double>()});
  return t;
}

}  // namespace

std::string episode_to_jsonl(const Episode& episode, const ArtifactStamp& stamp) {
  std::string out;
  nlohmann::json header = {{"type", "episode"},
                           {"instance", episode.instance_id},
                           {"policy", episode.policy},
                           {"seed", episode.seed},
                           {"config_hash", stamp.config_hash},
                           {"catalog_version", kFeatureCatalogVersion},
                           {"digest_algorithm", kDigestAlgorithm},
                           {"transitions", episode.transitions.size()},
                           {"dual_integral", episode.dual_integral},
                           {"trace", trace_to_json(episode.trace)}};
  out += header.dump();
  out += '\n';
  for (std::size_t t = 0; t < episode.transitions.size(); ++t) {
    const Transition& tr = episode.transitions[t];
    nlohmann::json j = {{"t", t},
                        {"digest", tr.digest.hex()},
                        {"set", tr.candidates},
                        {"a", tr.action},
                        {"r", tr.reward},
                        {"d", tr.done},
                        {"clock", tr.clock},
                        {"obs", observation_to_json(*tr.obs)}};
    if (tr.done) {
      j["next_digest"] = nullptr;
      j["next_set"] = nullptr;
    } else {
      j["next_digest"] = tr.next_digest.hex();
      j["next_set"] = tr.next_candidates;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

Episode episode_from_jsonl(std::string_view text, ArtifactStamp* stamp) {
  Episode ep;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw EpisodeError("episode line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (j.value("type", "") != "episode") throw EpisodeError("episode file lacks a header line");
      if (j.at("catalog_version").get<int>() != kFeatureCatalogVersion) {
        throw EpisodeError("episode feature catalog version " + std::to_string(j.at("catalog_version").get<int>()) +
                           " does not match " + std::to_string(kFeatureCatalogVersion));
      }
      if (j.at("digest_algorithm").get<std::string>() != kDigestAlgorithm) {
        throw EpisodeError("episode digest algorithm mismatch");
      }
      ep.instance_id = j.at("instance").get<std::string>();
      ep.policy = j.at("policy").get<std::string>();
      ep.seed = j.at("seed").get<std::uint64_t>();
      ep.dual_integral = j.at("dual_integral").get<double>();
      ep.trace = trace_from_json(j.at("trace"));
      if (stamp) {
        stamp->config_hash = j.at("config_hash").get<std::string>();
        stamp->seed = ep.seed;
      }
      have_header = true;
      continue;
    }
    Transition tr;
    tr.obs = std::make_shared<const BipartiteObservation>(observation_from_json(j.at("obs")));
    tr.candidates = j.at("set").get<std::vector<int>>();
    tr.action = j.at("a").get<int>();
    tr.reward = j.at("r").get<double>();
    tr.done = j.at("d").get<bool>();
    tr.clock = j.at("clock").get<std::int64_t>();
    tr.digest = StateDigest::from_hex(j.at("digest").get<std::string>());
    if (!j.at("next_digest").is_null()) {
      tr.next_digest = StateDigest::from_hex(j.at("next_digest").get<std::string>());
      tr.next_candidates = j.at("next_set").get<std::vector<int>>();
    }
    ep.transitions.push_back(std::move(tr));
  }
  if (!have_header) throw EpisodeError("empty episode file");
  for (std::size_t t = 0; t + 1 < ep.transitions.size(); ++t) {
    ep.transitions[t].next_obs = ep.transitions[t + 1].obs;
  }
  return ep;
}

void write_episode_file(const Episode& episode, const std::string& path, const ArtifactStamp& stamp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << episode_to_jsonl(episode, stamp);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Episode read_episode_file(const std::string& path, ArtifactStamp* stamp) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return episode_from_jsonl(ss.str(), stamp);
}

void check_chain(const Episode& episode) {
  const auto& tr = episode.transitions;
  for (std::size_t t = 0; t < tr.size(); ++t) {
    const bool last = t + 1 == tr.size();
    const std::string where = "episode " + episode.instance_id + " position " + std::to_string(t);
    if (tr[t].done != last) throw EpisodeError(where + ": done flag must be set exactly on the last transition");
    if (std::find(tr[t].candidates.begin(), tr[t].candidates.end(), tr[t].action) == tr[t].candidates.end()) {
      throw EpisodeError(where + ": action is not a candidate");
    }
    if (!last) {
      if (tr[t].next_digest != tr[t + 1].digest || tr[t].next_candidates != tr[t + 1].candidates) {
        throw EpisodeError(where + ": next state does not match the following transition");
      }
    }
  }
}

}  // namespace l2b
