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

#include "l2b/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "l2b/bail.hpp"
#include "l2b/parallel.hpp"
#include "l2b/rng.hpp"

namespace l2b {

namespace fs = std::filesystem;

namespace {

enum class Kind { integer, unsigned_int, real, text, boolean, list };

struct KeySpec {
  const char* key;
  const char* value;
  Kind kind;
  bool hashed = true;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"run.root", "l2b-run", Kind::text, false},
      {"run.seed", "0", Kind::unsigned_int},
      {"run.workers", "1", Kind::integer, false},
      {"family.name", "multi-knapsack", Kind::text},
      {"family.n", "30", Kind::integer},
      {"family.m", "5", Kind::integer},
      {"family.density", "0.6", Kind::real},
      {"split.train", "200", Kind::integer},
      {"split.valid", "20", Kind::integer},
      {"split.test", "50", Kind::integer},
      {"reference.max_nodes", "1000000", Kind::integer},
      {"collect.r0", "0.5", Kind::real},
      {"collect.db0_mode", "dive", Kind::text},
      {"collect.db0_value", "0", Kind::real},
      {"collect.db0_gap_fraction", "0.2", Kind::real},
      {"collect.max_clock", "50000", Kind::integer},
      {"collect.max_nodes", "1000000", Kind::integer},
      {"collect.fail_threshold", "0.1", Kind::real},
      {"bail.gamma", "1", Kind::real},
      {"bail.k", "1000", Kind::real},
      {"bail.lambda", "0.0001", Kind::real},
      {"bail.p", "15", Kind::real},
      {"bail.epochs", "10", Kind::integer},
      {"bail.learning_rate", "0.01", Kind::real},
      {"bail.batch_size", "32", Kind::integer},
      {"train.epochs", "20", Kind::integer},
      {"train.learning_rate", "0.05", Kind::real},
      {"train.batch_size", "32", Kind::integer},
      {"train.checkpoint_every", "2", Kind::integer},
      {"train.valid_fraction", "0.1", Kind::real},
      {"train.clip_norm", "10", Kind::real},
      {"eval.max_clock", "50000", Kind::integer},
      {"eval.max_nodes", "1000000", Kind::integer},
      {"eval.clock_mode", "pseudo", Kind::text},
      {"eval.baselines", "random,most-infeasible,pseudocost,strong,hybrid", Kind::list},
      {"eval.plot_data", "true", Kind::boolean, false},
  };
  return specs;
}

const KeySpec& spec_for(const std::string& key) {
  for (const KeySpec& s : key_specs()) {
    if (key == s.key) return s;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string canonical_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Parses and normalizes a value; throws ConfigError naming the key.
std::string normalize(const KeySpec& spec, const std::string& raw) {
  const std::string v = trim(raw);
  auto bad = [&](const std::string& what) {
    return ConfigError("configuration key '" + std::string(spec.key) + "': " + what + ", got '" + v + "'");
  };
  switch (spec.kind) {
    case Kind::integer: {
      std::int64_t x = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc() || p != v.data() + v.size()) throw bad("expected an integer");
      return std::to_string(x);
    }
    case Kind::unsigned_int: {
      std::uint64_t x = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc() || p != v.data() + v.size()) throw bad("expected a non-negative integer");
      return std::to_string(x);
    }
    case Kind::real: {
      double x = 0;
      std::size_t used = 0;
      try {
        x = std::stod(v, &used);
      } catch (const std::exception&) {
        throw bad("expected a number");
      }
      if (used != v.size() || !std::isfinite(x)) throw bad("expected a finite number");
      return canonical_real(x);
    }
    case Kind::boolean:
      if (v == "true" || v == "1" || v == "yes") return "true";
      if (v == "false" || v == "0" || v == "no") return "false";
      throw bad("expected true or false");
    case Kind::list: {
      std::string out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (!out.empty()) out += ',';
        out += item;
      }
      return out;
    }
    case Kind::text:
      if (v.empty()) throw bad("expected a value");
      return v;
  }
  return v;
}

void check_ranges(const Config& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.get_int("run.workers") >= 1, "run.workers must be at least 1");
  need(c.get_int("family.n") >= 1 && c.get_int("family.m") >= 1, "family.n and family.m must be positive");
  need(c.get_int("split.train") >= 1 && c.get_int("split.valid") >= 1 && c.get_int("split.test") >= 1,
       "every split needs at least one instance");
  const double p = c.get_real("bail.p");
  need(p > 0.0 && p <= 100.0, "bail.p must lie in (0, 100]");
  need(c.get_real("bail.k") >= 1.0, "bail.k must be at least 1");
  need(c.get_real("bail.lambda") >= 0.0, "bail.lambda must be non-negative");
  const double g = c.get_real("bail.gamma");
  need(g >= 0.0 && g <= 1.0, "bail.gamma must lie in [0, 1]");
  const double r0 = c.get_real("collect.r0");
  need(r0 >= 0.0 && r0 <= 1.0, "collect.r0 must lie in [0, 1]");
  need(c.get("collect.db0_mode") == "dive" || c.get("collect.db0_mode") == "fixed",
       "collect.db0_mode must be dive or fixed");
  need(c.get("eval.clock_mode") == "pseudo" || c.get("eval.clock_mode") == "wall",
       "eval.clock_mode must be pseudo or wall");
  need(c.get_int("collect.max_clock") >= 1 && c.get_int("eval.max_clock") >= 1, "clock budgets must be positive");
  need(c.get_int("collect.max_nodes") >= 1 && c.get_int("eval.max_nodes") >= 1, "node budgets must be positive");
  need(c.get_int("train.epochs") >= 1 && c.get_int("bail.epochs") >= 1, "epochs must be positive");
  need(c.get_int("train.batch_size") >= 1 && c.get_int("bail.batch_size") >= 1, "batch sizes must be positive");
  need(c.get_int("train.checkpoint_every") >= 1, "train.checkpoint_every must be positive");
  const double ft = c.get_real("collect.fail_threshold");
  need(ft >= 0.0 && ft <= 1.0, "collect.fail_threshold must lie in [0, 1]");
  const double vf = c.get_real("train.valid_fraction");
  need(vf >= 0.0 && vf < 1.0, "train.valid_fraction must lie in [0, 1)");
  try {
    family_from_string(c.get("family.name"));
  } catch (const InstanceError& e) {
    throw ConfigError(e.what());
  }
  for (const std::string& b : c.get_list("eval.baselines")) {
    if (b == "gcnn") throw ConfigError("eval.baselines lists gcnn; the trained policy is always compared");
    try {
      make_policy_factory(b);
    } catch (const EvalError& e) {
      throw ConfigError(std::string("eval.baselines: ") + e.what());
    }
  }
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

nlohmann::json num_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

const char* const kSplits[] = {"train", "valid", "test"};

}  // namespace

// ---------------------------------------------------------------- Config

Config::Config() {
  for (const KeySpec& s : key_specs()) values_[s.key] = normalize(s, s.value);
}

void Config::set(const std::string& key, const std::string& value) {
  const KeySpec& s = spec_for(trim(key));
  values_[s.key] = normalize(s, value);
}

void Config::assign(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void Config::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      assign(line);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read configuration file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path);
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

std::int64_t Config::get_int(const std::string& key) const { return std::stoll(get(key)); }
std::uint64_t Config::get_u64(const std::string& key) const { return std::stoull(get(key)); }
double Config::get_real(const std::string& key) const { return std::stod(get(key)); }
bool Config::get_bool(const std::string& key) const { return get(key) == "true"; }

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Config::hash() const {
  std::string canon;
  for (const KeySpec& s : key_specs()) {
    if (!s.hashed) continue;
    canon += s.key;
    canon += '=';
    canon += values_.at(s.key);
    canon += '\n';
  }
  return sha256_hex(canon);
}

std::string Config::to_text() const {
  std::string out;
  for (const KeySpec& s : key_specs()) out += std::string(s.key) + " = " + values_.at(s.key) + "\n";
  return out;
}

std::vector<std::string> Config::keys() {
  std::vector<std::string> out;
  for (const KeySpec& s : key_specs()) out.emplace_back(s.key);
  return out;
}

// ---------------------------------------------------------------- helpers

std::string file_sha256(const fs::path& path) { return sha256_hex(slurp(path)); }

Pipeline::Pipeline(Config config, std::ostream& log)
    : config_(std::move(config)), log_(log), hash_(config_.hash()), root_(config_.get("run.root")) {
  check_ranges(config_);
}

nlohmann::json Pipeline::stamp(const std::string& stage) const {
  return {{"stage", stage},
          {"config_hash", hash_},
          {"seed", config_.get_u64("run.seed")},
          {"catalog_version", kFeatureCatalogVersion}};
}

nlohmann::json Pipeline::read_manifest(const fs::path& path, const std::string& stage) const {
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + "; run the '" + stage + "' stage first");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (j.value("stage", "") != stage) throw DataError(path.string() + " is not a " + stage + " manifest");
  const std::string h = j.value("config_hash", "");
  if (h != hash_) {
    throw DataError(path.string() + " was produced with config hash " + h + " but the current config hashes to " +
                    hash_ + "; refusing to mix artifacts");
  }
  if (j.value("catalog_version", -1) != kFeatureCatalogVersion) {
    throw DataError(path.string() + " uses feature catalog version " +
                    std::to_string(j.value("catalog_version", -1)) + ", expected " +
                    std::to_string(kFeatureCatalogVersion));
  }
  return j;
}

void Pipeline::write_text(const fs::path& path, const std::string& text) const {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

void Pipeline::write_json(const fs::path& path, const nlohmann::json& j) const { write_text(path, j.dump(1) + "\n"); }

void Pipeline::echo_config() const {
  write_text(root_ / "config.txt", "# config hash " + hash_ + "\n" + config_.to_text());
}

EvalOptions Pipeline::eval_options() const {
  EvalOptions o;
  o.budget.max_clock = config_.get_int("eval.max_clock");
  o.budget.max_nodes = config_.get_int("eval.max_nodes");
  o.seed = derive_seed(config_.get_u64("run.seed"), "evaluate");
  o.workers = static_cast<int>(config_.get_int("run.workers"));
  o.clock_mode = config_.get("eval.clock_mode") == "wall" ? ClockMode::wall : ClockMode::pseudo;
  return o;
}

std::vector<EvalInstance> Pipeline::load_split(const std::string& split) const {
  const nlohmann::json m = read_manifest(root_ / "instances" / "manifest.json", "generate");
  std::vector<EvalInstance> out;
  for (const auto& e : m.at("instances")) {
    if (e.at("split").get<std::string>() != split) continue;
    const fs::path file = root_ / e.at("file").get<std::string>();
    const std::string text = slurp(file);
    if (sha256_hex(text) != e.at("sha256").get<std::string>()) {
      throw DataError(file.string() + " does not match the digest in the instance manifest");
    }
    EvalInstance item;
    item.id = e.at("id").get<std::string>();
    try {
      item.instance = parse_instance(text);
    } catch (const InstanceError& err) {
      throw DataError(file.string() + ": " + err.what());
    }
    if (!e.at("reference").is_null()) item.reference_value = e.at("reference").get<double>();
    out.push_back(std::move(item));
  }
  return out;
}

// ---------------------------------------------------------------- stages

void Pipeline::generate() {
  echo_config();
  const std::uint64_t seed = config_.get_u64("run.seed");
  InstanceFamilySpec spec;
  spec.family = family_from_string(config_.get("family.name"));
  spec.n = static_cast<int>(config_.get_int("family.n"));
  spec.m = static_cast<int>(config_.get_int("family.m"));
  spec.density = config_.get_real("family.density");

  std::vector<EvalInstance> all;
  std::vector<std::string> splits;
  std::vector<std::uint64_t> seeds;
  for (const char* split : kSplits) {
    const std::int64_t count = config_.get_int(std::string("split.") + split);
    for (std::int64_t k = 0; k < count; ++k) {
      char id[64];
      std::snprintf(id, sizeof id, "%s-%04lld", split, static_cast<long long>(k));
      spec.seed = derive_seed(seed, id);
      EvalInstance item;
      item.id = id;
      try {
        item.instance = generate_instance(spec);
      } catch (const InstanceError& e) {
        throw ConfigError(std::string("family settings: ") + e.what());
      }
      item.instance.name = id;
      all.push_back(std::move(item));
      splits.push_back(split);
      seeds.push_back(spec.seed);
    }
  }
  log_ << "generate: " << all.size() << " " << config_.get("family.name") << " instances, solving for references\n";
  attach_reference_values(all, config_.get_int("reference.max_nodes"), static_cast<int>(config_.get_int("run.workers")));

  nlohmann::json m = stamp("generate");
  m["family"] = {{"name", config_.get("family.name")},
                 {"n", spec.n},
                 {"m", spec.m},
                 {"density", spec.density}};
  nlohmann::json list = nlohmann::json::array();
  std::size_t missing = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::string rel = "instances/" + splits[i] + "/" + all[i].id + ".milp";
    const std::string text = serialize_instance(all[i].instance);
    write_text(root_ / rel, text);
    missing += !all[i].reference_value;
    list.push_back({{"id", all[i].id},
                    {"split", splits[i]},
                    {"file", rel},
                    {"sha256", sha256_hex(text)},
                    {"seed", seeds[i]},
                    {"reference", all[i].reference_value ? nlohmann::json(*all[i].reference_value) : nlohmann::json()}});
  }
  m["instances"] = std::move(list);
  write_json(root_ / "instances" / "manifest.json", m);
  if (missing) log_ << "generate: " << missing << " instances have no reference optimum\n";
}

void Pipeline::collect() {
  echo_config();
  const std::vector<EvalInstance> train = load_split("train");
  HybridConfig hc;
  hc.db0_mode = config_.get("collect.db0_mode") == "fixed" ? HybridConfig::Db0Mode::fixed : HybridConfig::Db0Mode::dive;
  hc.db0_value = config_.get_real("collect.db0_value");
  hc.db0_gap_fraction = config_.get_real("collect.db0_gap_fraction");
  hc.r0 = config_.get_real("collect.r0");
  Budget budget;
  budget.max_clock = config_.get_int("collect.max_clock");
  budget.max_nodes = config_.get_int("collect.max_nodes");
  const std::uint64_t seed = config_.get_u64("run.seed");
  const ArtifactStamp art{hash_, seed};

  struct Outcome {
    bool ok = false;
    std::string error;
    std::string file;
    std::string sha;
    std::size_t transitions = 0;
    std::int64_t nodes = 0;
    std::string status;
    double integral = 0.0;
  };
  std::vector<Outcome> out(train.size());
  fs::create_directories(root_ / "episodes");
  parallel_for(train.size(), static_cast<int>(config_.get_int("run.workers")), [&](std::size_t i) {
    Outcome& o = out[i];
    try {
      HybridPolicy policy(hc);
      SolveOptions so;
      so.record_episode = true;
      so.seed = derive_seed(seed, "collect/" + train[i].id);
      so.reference_value = train[i].reference_value;
      SolveResult r = solve(train[i].instance, policy, budget, so);
      r.episode.instance_id = train[i].id;
      r.episode.policy = policy.name();
      r.episode.seed = so.seed;
      o.file = "episodes/" + train[i].id + ".jsonl";
      const std::string text = episode_to_jsonl(r.episode, art);
      write_text(root_ / o.file, text);
      o.sha = sha256_hex(text);
      o.transitions = r.episode.transitions.size();
      o.nodes = r.nodes_processed;
      o.status = to_string(r.status);
      o.integral = r.dual_integral;
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  nlohmann::json m = stamp("collect");
  nlohmann::json eps = nlohmann::json::array(), fails = nlohmann::json::array();
  std::size_t transitions = 0;
  std::int64_t nodes = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Outcome& o = out[i];
    if (!o.ok) {
      log_ << "collect: " << train[i].id << " failed: " << o.error << "\n";
      fails.push_back({{"id", train[i].id}, {"error", o.error}});
      continue;
    }
    transitions += o.transitions;
    nodes += o.nodes;
    eps.push_back({{"id", train[i].id},
                   {"file", o.file},
                   {"sha256", o.sha},
                   {"transitions", o.transitions},
                   {"nodes", o.nodes},
                   {"status", o.status},
                   {"dual_integral", o.integral}});
  }
  m["policy"] = "hybrid";
  m["episodes"] = std::move(eps);
  m["failures"] = fails;
  m["total_transitions"] = transitions;
  m["total_nodes"] = nodes;
  write_json(root_ / "episodes" / "manifest.json", m);
  log_ << "collect: " << (train.size() - fails.size()) << " episodes, " << transitions << " transitions\n";
  const double limit = config_.get_real("collect.fail_threshold");
  if (static_cast<double>(fails.size()) > limit * static_cast<double>(train.size())) {
    throw PartialFailure("collect: " + std::to_string(fails.size()) + " of " + std::to_string(train.size()) +
                         " instances failed");
  }
}

void Pipeline::select() {
  echo_config();
  const nlohmann::json em = read_manifest(root_ / "episodes" / "manifest.json", "collect");
  std::vector<Episode> episodes;
  for (const auto& e : em.at("episodes")) {
    const fs::path file = root_ / e.at("file").get<std::string>();
    const std::string text = slurp(file);
    if (sha256_hex(text) != e.at("sha256").get<std::string>()) {
      throw DataError(file.string() + " does not match the digest in the episode manifest");
    }
    ArtifactStamp st;
    try {
      episodes.push_back(episode_from_jsonl(text, &st));
    } catch (const EpisodeError& err) {
      throw DataError(file.string() + ": " + err.what());
    }
    if (st.config_hash != hash_) throw DataError(file.string() + " carries a different config hash");
  }
  ReturnLabeledSet set;
  try {
    set = compute_returns(episodes, config_.get_real("bail.gamma"));
  } catch (const EpisodeError& err) {
    throw DataError(err.what());
  }
  episodes.clear();
  if (set.entries.empty()) throw DataError("select: the collected episodes contain no transitions");

  EnvelopeConfig ec;
  ec.ridge = config_.get_real("bail.lambda");
  ec.penalty_k = config_.get_real("bail.k");
  ec.epochs = static_cast<int>(config_.get_int("bail.epochs"));
  ec.learning_rate = config_.get_real("bail.learning_rate");
  ec.batch_size = static_cast<int>(config_.get_int("bail.batch_size"));
  ec.seed = derive_seed(config_.get_u64("run.seed"), "envelope");
  log_ << "select: fitting the envelope on " << set.entries.size() << " states\n";
  const EnvelopeResult env = train_envelope(set, ec);
  const std::vector<double> g = set.returns();
  const double p = config_.get_real("bail.p");
  const Selection sel = select_top(g, env.values, p);

  std::vector<std::size_t> keep = sel.indices;
  std::sort(keep.begin(), keep.end());
  std::vector<char> chosen(g.size(), 0);
  Dataset data;
  for (std::size_t i : keep) {
    chosen[i] = 1;
    const ReturnEntry& e = set.entries[i];
    data.rows.push_back({e.digest, e.sample.candidates, e.sample.action, g[i], env.values[i], sel.ratios[i],
                         e.instance_id, e.position});
    data.observations.emplace(e.digest, e.sample.obs);
  }
  const ArtifactStamp art{hash_, config_.get_u64("run.seed")};
  fs::create_directories(root_ / "selected");
  write_dataset(data, (root_ / "selected" / "dataset.jsonl").string(),
                (root_ / "selected" / "observations.jsonl").string(), art);
  save_checkpoint(env.params, (root_ / "selected" / "envelope.bin").string(),
                  nlohmann::json{{"config_hash", hash_}, {"role", "envelope"}, {"target_scale", env.target_scale}}.dump());

  std::ostringstream csv;
  csv << "index,instance,t,G,V,ratio,selected\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    csv << i << ',' << set.entries[i].instance_id << ',' << set.entries[i].position << ',' << fmt(g[i]) << ','
        << fmt(env.values[i]) << ',' << fmt(sel.ratios[i]) << ',' << int(chosen[i]) << '\n';
  }
  write_text(root_ / "selected" / "returns.csv", csv.str());

  nlohmann::json m = stamp("select");
  nlohmann::json curve = nlohmann::json::array();
  for (const EpochStats& s : env.curve) curve.push_back({{"epoch", s.epoch}, {"loss", s.train_loss}});
  m["states"] = g.size();
  m["selected"] = data.rows.size();
  m["unique_observations"] = data.observations.size();
  m["p"] = p;
  m["gamma"] = set.gamma;
  m["k"] = ec.penalty_k;
  m["lambda"] = ec.ridge;
  m["threshold"] = sel.threshold;
  m["offset"] = sel.offset;
  m["violation_fraction"] = env.violation_fraction;
  m["final_loss"] = env.final_loss;
  m["target_scale"] = env.target_scale;
  m["envelope_curve"] = std::move(curve);
  m["dataset_sha256"] = file_sha256(root_ / "selected" / "dataset.jsonl");
  m["observations_sha256"] = file_sha256(root_ / "selected" / "observations.jsonl");
  write_json(root_ / "selected" / "manifest.json", m);
  log_ << "select: kept " << data.rows.size() << " of " << g.size() << " states (threshold " << sel.threshold
       << ", violations " << env.violation_fraction << ")\n";
}

void Pipeline::train() {
  echo_config();
  const nlohmann::json sm = read_manifest(root_ / "selected" / "manifest.json", "select");
  const fs::path rows = root_ / "selected" / "dataset.jsonl", obs = root_ / "selected" / "observations.jsonl";
  if (file_sha256(rows) != sm.at("dataset_sha256").get<std::string>() ||
      file_sha256(obs) != sm.at("observations_sha256").get<std::string>()) {
    throw DataError("selected dataset files do not match their manifest");
  }
  ArtifactStamp st;
  Dataset data;
  try {
    data = read_dataset(rows.string(), obs.string(), &st);
  } catch (const EpisodeError& e) {
    throw DataError(e.what());
  }
  if (st.config_hash != hash_) throw DataError(rows.string() + " carries a different config hash");
  std::vector<GraphSample> all = data.samples();
  if (all.empty()) throw DataError("train: the selected dataset is empty");

  const std::uint64_t seed = config_.get_u64("run.seed");
  Rng rng(derive_seed(seed, "train-split"));
  std::vector<std::size_t> order(all.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_in_place(order, rng);
  const std::size_t n_valid = all.size() < 2 ? 0
                                             : static_cast<std::size_t>(std::floor(
                                                   config_.get_real("train.valid_fraction") * all.size()));
  std::vector<GraphSample> train, valid;
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_valid ? valid : train).push_back(all[order[k]]);

  LossConfig loss;
  TrainConfig tc;
  tc.learning_rate = config_.get_real("train.learning_rate");
  tc.batch_size = static_cast<int>(config_.get_int("train.batch_size"));
  tc.epochs = static_cast<int>(config_.get_int("train.epochs"));
  tc.checkpoint_every = static_cast<int>(config_.get_int("train.checkpoint_every"));
  tc.clip_norm = config_.get_real("train.clip_norm");
  tc.seed = derive_seed(seed, "train");
  GcnnParams params = GcnnParams::initialized(derive_seed(seed, "gcnn"));
  log_ << "train: " << train.size() << " training and " << valid.size() << " validation samples\n";
  TrainResult res = train_gcnn(params, train, valid, loss, tc, [&](const EpochStats& s) {
    log_ << "train: epoch " << s.epoch << " loss " << s.train_loss << " valid " << s.valid_loss << "\n";
  });
  if (res.diverged) log_ << "train: loss diverged; kept the last finite parameters\n";
  if (res.checkpoints.empty()) res.checkpoints.emplace_back(res.curve.back().epoch, params);

  fs::create_directories(root_ / "checkpoints");
  std::ostringstream curve;
  curve << "epoch,train_loss,valid_loss\n";
  for (const EpochStats& s : res.curve) curve << s.epoch << ',' << fmt(s.train_loss) << ',' << fmt(s.valid_loss) << '\n';
  write_text(root_ / "checkpoints" / "curve.csv", curve.str());

  nlohmann::json list = nlohmann::json::array();
  for (const auto& [epoch, p] : res.checkpoints) {
    char id[32];
    std::snprintf(id, sizeof id, "epoch-%04d", epoch);
    const std::string rel = std::string("checkpoints/") + id + ".bin";
    const EpochStats& s = res.curve.at(static_cast<std::size_t>(epoch));
    save_checkpoint(p, (root_ / rel).string(),
                    nlohmann::json{{"config_hash", hash_}, {"seed", seed}, {"epoch", epoch}, {"id", id}}.dump());
    list.push_back({{"id", id},
                    {"epoch", epoch},
                    {"file", rel},
                    {"sha256", file_sha256(root_ / rel)},
                    {"train_loss", num_or_null(s.train_loss)},
                    {"valid_loss", num_or_null(s.valid_loss)}});
  }
  nlohmann::json m = stamp("train");
  m["checkpoints"] = std::move(list);
  m["diverged"] = res.diverged;
  m["train_samples"] = train.size();
  m["valid_samples"] = valid.size();
  m["curve_sha256"] = file_sha256(root_ / "checkpoints" / "curve.csv");
  write_json(root_ / "checkpoints" / "manifest.json", m);
}

void Pipeline::evaluate() {
  echo_config();
  const nlohmann::json cm = read_manifest(root_ / "checkpoints" / "manifest.json", "train");
  std::vector<CheckpointCandidate> cands;
  for (const auto& e : cm.at("checkpoints")) {
    const std::string id = e.at("id").get<std::string>();
    const fs::path file = root_ / e.at("file").get<std::string>();
    const double vl = e.at("valid_loss").is_null() ? std::nan("") : e.at("valid_loss").get<double>();
    CheckpointCandidate c = load_checkpoint_candidate(file.string(), id, e.at("epoch").get<int>(), vl);
    if (c.params && file_sha256(file) != e.at("sha256").get<std::string>()) {
      c.params.reset();
      c.load_error = "file does not match the digest in the checkpoint manifest";
    }
    if (!c.load_error.empty()) log_ << "evaluate: checkpoint " << id << " unusable: " << c.load_error << "\n";
    cands.push_back(std::move(c));
  }
  const std::vector<EvalInstance> valid = load_split("valid");
  const EvalOptions opts = eval_options();
  log_ << "evaluate: scoring " << cands.size() << " checkpoints on " << valid.size() << " validation instances\n";
  CheckpointSelection sel;
  try {
    sel = select_best_checkpoint(cands, valid, opts);
  } catch (const EvalError& e) {
    throw DataError(e.what());
  }
  write_text(root_ / "reports" / "checkpoints.csv", checkpoint_table_csv(sel));

  nlohmann::json table = nlohmann::json::array();
  for (const CheckpointRow& r : sel.table) {
    table.push_back({{"id", r.id},
                     {"epoch", r.epoch},
                     {"valid_loss", num_or_null(r.valid_loss)},
                     {"loaded", r.loaded},
                     {"error", r.error},
                     {"mean_reward", r.loaded ? num_or_null(r.report.aggregate.mean_reward) : nlohmann::json()},
                     {"mean_integral", r.loaded ? num_or_null(r.report.aggregate.mean_integral) : nlohmann::json()}});
  }
  const CheckpointRow& best = sel.table[sel.best];
  nlohmann::json m = stamp("evaluate");
  m["best_checkpoint"] = sel.best_id;
  m["best_epoch"] = best.epoch;
  m["best_file"] = cm.at("checkpoints").at(sel.best).at("file");
  m["table"] = std::move(table);
  log_ << "evaluate: best checkpoint " << sel.best_id << "\n";

  const std::vector<EvalInstance> test = load_split("test");
  EvalReport rep =
      evaluate_policy(make_policy_factory("gcnn", cands[sel.best].params), test, opts, "gcnn:" + sel.best_id);
  nlohmann::json rj = report_to_json(rep);
  rj["stamp"] = stamp("evaluate");
  write_json(root_ / "reports" / "eval-gcnn.json", rj);
  write_text(root_ / "reports" / "eval-gcnn.csv", report_to_csv(rep));
  if (config_.get_bool("eval.plot_data")) write_text(root_ / "reports" / "plot-gcnn.csv", plot_data_csv(rep));
  m["test_mean_reward"] = num_or_null(rep.aggregate.mean_reward);
  m["test_errors"] = rep.aggregate.errors;
  m["report_sha256"] = file_sha256(root_ / "reports" / "eval-gcnn.json");
  write_json(root_ / "reports" / "evaluate.json", m);
  log_ << "evaluate: test mean reward " << rep.aggregate.mean_reward << "\n";
}

void Pipeline::compare() {
  echo_config();
  const nlohmann::json em = read_manifest(root_ / "reports" / "evaluate.json", "evaluate");
  const fs::path best_file = root_ / em.at("best_file").get<std::string>();
  std::shared_ptr<const GcnnParams> best;
  try {
    best = std::make_shared<const GcnnParams>(load_checkpoint(best_file.string()));
  } catch (const std::exception& e) {
    throw DataError(best_file.string() + ": " + e.what());
  }
  std::vector<NamedPolicy> policies = {{"gcnn", make_policy_factory("gcnn", best)}};
  for (const std::string& b : config_.get_list("eval.baselines")) policies.push_back({b, make_policy_factory(b)});
  const std::vector<EvalInstance> test = load_split("test");
  log_ << "compare: " << policies.size() << " policies on " << test.size() << " test instances\n";
  const Comparison cmp = compare_policies(policies, test, eval_options());
  write_text(root_ / "reports" / "leaderboard.csv", leaderboard_csv(cmp));

  nlohmann::json m = stamp("compare");
  nlohmann::json board = nlohmann::json::array();
  for (const LeaderboardRow& r : cmp.leaderboard) {
    board.push_back({{"policy", r.policy},
                     {"mean_reward", num_or_null(r.aggregate.mean_reward)},
                     {"median_reward", num_or_null(r.aggregate.median_reward)},
                     {"mean_integral", num_or_null(r.aggregate.mean_integral)},
                     {"mean_nodes", num_or_null(r.aggregate.mean_nodes)},
                     {"errors", r.aggregate.errors}});
  }
  m["best_checkpoint"] = em.at("best_checkpoint");
  m["leaderboard"] = std::move(board);
  nlohmann::json reports = nlohmann::json::object();
  for (std::size_t k = 0; k < policies.size(); ++k) {
    const std::string name = policies[k].name;
    nlohmann::json rj = report_to_json(cmp.reports[k]);
    rj["stamp"] = stamp("compare");
    write_json(root_ / "reports" / ("compare-" + name + ".json"), rj);
    write_text(root_ / "reports" / ("compare-" + name + ".csv"), report_to_csv(cmp.reports[k]));
    reports[name] = file_sha256(root_ / "reports" / ("compare-" + name + ".json"));
  }
  m["reports"] = std::move(reports);

  // paired sign test of the trained policy against each baseline
  auto rewards = [](const EvalReport& r) {
    std::vector<double> v;
    for (const EvalRow& row : r.rows) v.push_back(row.ok() ? row.reward : -kInf);
    return v;
  };
  const std::vector<double> mine = rewards(cmp.reports[0]);
  nlohmann::json tests = nlohmann::json::object();
  for (std::size_t k = 1; k < policies.size(); ++k) {
    const SignTest s = sign_test(mine, rewards(cmp.reports[k]));
    tests[policies[k].name] = {{"wins", s.wins}, {"losses", s.losses}, {"ties", s.ties}, {"p_value", s.p_value}};
    log_ << "compare: gcnn vs " << policies[k].name << ": " << s.wins << " wins, " << s.losses << " losses, p = "
         << s.p_value << "\n";
  }
  m["sign_tests"] = std::move(tests);
  write_json(root_ / "reports" / "compare.json", m);
}

std::string Pipeline::report() {
  const nlohmann::json gm = read_manifest(root_ / "instances" / "manifest.json", "generate");
  const nlohmann::json cm = read_manifest(root_ / "episodes" / "manifest.json", "collect");
  const nlohmann::json sm = read_manifest(root_ / "selected" / "manifest.json", "select");
  const nlohmann::json tm = read_manifest(root_ / "checkpoints" / "manifest.json", "train");
  const nlohmann::json em = read_manifest(root_ / "reports" / "evaluate.json", "evaluate");
  const bool have_compare = fs::exists(root_ / "reports" / "compare.json");
  nlohmann::json pm;
  if (have_compare) pm = read_manifest(root_ / "reports" / "compare.json", "compare");

  // the evaluation report must come from the same configuration
  if (file_sha256(root_ / "reports" / "eval-gcnn.json") != em.at("report_sha256").get<std::string>()) {
    throw DataError("reports/eval-gcnn.json does not match reports/evaluate.json");
  }
  const nlohmann::json ej = nlohmann::json::parse(slurp(root_ / "reports" / "eval-gcnn.json"));
  if (ej.at("stamp").at("config_hash").get<std::string>() != hash_) {
    throw DataError("reports/eval-gcnn.json was produced with a different config; refusing to mix artifacts");
  }
  if (have_compare && pm.at("best_checkpoint") != em.at("best_checkpoint")) {
    throw DataError("reports/compare.json used a different checkpoint than reports/evaluate.json");
  }
  const std::string curve = slurp(root_ / "checkpoints" / "curve.csv");
  if (sha256_hex(curve) != tm.at("curve_sha256").get<std::string>()) {
    throw DataError("checkpoints/curve.csv does not match its manifest");
  }

  std::map<std::string, int> counts;
  for (const auto& e : gm.at("instances")) ++counts[e.at("split").get<std::string>()];

  std::ostringstream out;
  out << "# l2b run report\n\n";
  out << "- config hash: " << hash_ << "\n";
  out << "- seed: " << config_.get("run.seed") << "\n";
  out << "- feature catalog version: " << kFeatureCatalogVersion << "\n";
  out << "- family: " << config_.get("family.name") << " (n=" << config_.get("family.n")
      << ", m=" << config_.get("family.m") << ")\n";
  out << "- instances: train " << counts["train"] << ", valid " << counts["valid"] << ", test " << counts["test"]
      << "\n\n";
  out << "## Collection\n\n";
  out << "- episodes: " << cm.at("episodes").size() << ", failures: " << cm.at("failures").size() << "\n";
  out << "- transitions: " << cm.at("total_transitions").get<std::size_t>()
      << ", branched nodes: " << cm.at("total_nodes").get<std::int64_t>() << "\n\n";
  out << "## Selection\n\n";
  out << "- states: " << sm.at("states").get<std::size_t>() << ", selected: " << sm.at("selected").get<std::size_t>()
      << " (p = " << fmt_short(sm.at("p").get<double>()) << ")\n";
  out << "- ratio threshold x: " << fmt_short(sm.at("threshold").get<double>())
      << ", shift: " << fmt_short(sm.at("offset").get<double>()) << "\n";
  out << "- envelope violation fraction: " << fmt_short(sm.at("violation_fraction").get<double>())
      << ", final loss: " << fmt_short(sm.at("final_loss").get<double>()) << "\n\n";
  out << "## Training curve\n\n```\n" << curve << "```\n\n";
  out << "## Checkpoints (validation)\n\n| checkpoint | valid loss | mean reward | mean integral |\n|---|---|---|---|\n";
  for (const auto& r : em.at("table")) {
    auto cell = [](const nlohmann::json& v) { return v.is_null() ? std::string("n/a") : fmt_short(v.get<double>()); };
    out << "| " << r.at("id").get<std::string>() << " | " << cell(r.at("valid_loss")) << " | "
        << cell(r.at("mean_reward")) << " | " << cell(r.at("mean_integral")) << " |\n";
  }
  out << "\nbest checkpoint: " << em.at("best_checkpoint").get<std::string>() << "\n\n";
  if (have_compare) {
    out << "## Test leaderboard\n\n| rank | policy | mean reward | mean integral | mean nodes |\n|---|---|---|---|---|\n";
    int rank = 0;
    for (const auto& r : pm.at("leaderboard")) {
      auto cell = [](const nlohmann::json& v) { return v.is_null() ? std::string("n/a") : fmt_short(v.get<double>()); };
      out << "| " << ++rank << " | " << r.at("policy").get<std::string>() << " | " << cell(r.at("mean_reward")) << " | "
          << cell(r.at("mean_integral")) << " | " << cell(r.at("mean_nodes")) << " |\n";
    }
    out << "\n| gcnn vs | wins | losses | ties | one-sided p |\n|---|---|---|---|---|\n";
    for (const auto& [name, s] : pm.at("sign_tests").items()) {
      out << "| " << name << " | " << s.at("wins").get<int>() << " | " << s.at("losses").get<int>() << " | "
          << s.at("ties").get<int>() << " | " << fmt_short(s.at("p_value").get<double>()) << " |\n";
    }
  }
  const std::string text = out.str();
  write_text(root_ / "reports" / "summary.md", text);
  return text;
}

void Pipeline::run_all() {
  generate();
  collect();
  select();
  train();
  evaluate();
  compare();
  report();
}

}  // namespace l2b
