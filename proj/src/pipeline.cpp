// Copyright 2026 The SelfEmo Authors.
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

#include "selfemo/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "selfemo/error.hpp"
#include "selfemo/records.hpp"
#include "selfemo/rng.hpp"

namespace selfemo {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Reads typed fields out of one JSON object and rejects anything left over.
class Section {
 public:
  Section(const Json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) fail(ErrorCode::kConfig, name("") + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void integer(const char* key, T& out) {
    if (!take(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) fail(ErrorCode::kConfig, name(key) + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned()) {
        out = v.get<T>();
        return;
      }
      if (v.get<std::int64_t>() < 0) fail(ErrorCode::kConfig, name(key) + ": must be >= 0");
    }
    out = v.get<T>();
  }

  void real(const char* key, double& out) {
    if (!take(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number()) fail(ErrorCode::kConfig, name(key) + ": expected a number");
    out = v.get<double>();
  }

  const Json* child(const char* key) {
    if (!take(key)) return nullptr;
    return &j_.at(key);
  }

  std::string name(const char* key) const {
    if (prefix_.empty()) return key;
    return *key ? prefix_ + "." + key : prefix_;
  }

  void finish() const {
    for (const auto& [key, v] : j_.items()) {
      if (!seen_.count(key)) fail(ErrorCode::kConfig, name(key.c_str()) + ": unknown field");
    }
  }

 private:
  bool take(const char* key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  const Json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::string string_field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    fail(ErrorCode::kConfig, where + "." + key + ": expected a string");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

std::uint64_t RunConfig::feature_seed() const { return derive_seed(seed, 3); }

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  world.seed = derive_seed(s, 1);
  flywheel.seed = derive_seed(s, 2);
}

void RunConfig::validate() const {
  world.validate();
  flywheel.validate();
  if (policy.feature_dim == 0) fail(ErrorCode::kConfig, "policy.feature_dim must be positive");
  if (policy.max_response_len == 0) {
    fail(ErrorCode::kConfig, "policy.max_response_len must be positive");
  }
  if (policy.response_tokens < 2 * emotions.size()) {
    fail(ErrorCode::kConfig, "policy.response_tokens must be at least twice the emotion count");
  }
}

std::string RunConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["emotions"] = emotions.labels();
  Json w;
  w["archetypes"] = world.archetypes;
  w["dialogues_per_archetype"] = world.dialogues_per_archetype;
  w["train_fraction"] = world.train_fraction;
  w["noise"] = world.noise;
  if (!world.custom_archetypes.empty()) {
    Json defs = Json::array();
    for (const auto& a : world.custom_archetypes) {
      Json bias = Json::object();
      for (std::size_t e = 0; e < emotions.size(); ++e) bias[emotions.labels()[e]] = a.bias.at(e);
      defs.push_back({{"id", a.id}, {"traits", a.traits}, {"bias", bias}, {"volatility", a.volatility}});
    }
    w["archetype_defs"] = std::move(defs);
  }
  j["world"] = std::move(w);
  j["policy"] = {{"feature_dim", policy.feature_dim},
                 {"response_tokens", policy.response_tokens},
                 {"max_response_len", policy.max_response_len}};
  const FlywheelConfig& f = flywheel;
  j["flywheel"] = {{"iterations", f.iterations},
                   {"rollouts", f.rollouts},
                   {"total_steps", f.total_steps},
                   {"prompts_per_pass", f.prompts_per_pass},
                   {"max_len", f.max_len},
                   {"epsilon", f.clip.epsilon},
                   {"rl_lr", f.rl_lr},
                   {"sft_lr", f.sft_lr},
                   {"cold_start_epochs", f.cold_start_epochs},
                   {"retrain_epochs", f.retrain_epochs},
                   {"init_scale", f.init_scale},
                   {"probe_prompts", f.probe_prompts},
                   {"probe_samples", f.probe_samples}};
  return j.dump(2) + "\n";
}

RunConfig parse_config(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(root, "");
  if (!top.has("seed")) fail(ErrorCode::kConfig, "seed: missing required field");
  std::uint64_t seed = 0;
  top.integer("seed", seed);
  if (const Json* e = top.child("emotions")) {
    if (!e->is_array()) fail(ErrorCode::kConfig, "emotions: expected an array of labels");
    std::vector<std::string> labels;
    for (const auto& l : *e) {
      if (!l.is_string()) fail(ErrorCode::kConfig, "emotions: expected an array of labels");
      labels.push_back(l.get<std::string>());
    }
    try {
      c.emotions = EmotionVocab(std::move(labels));
    } catch (const Error& err) {
      fail(ErrorCode::kConfig, std::string("emotions: ") + err.what());
    }
  }
  if (const Json* w = top.child("world")) {
    Section s(*w, "world");
    s.integer("archetypes", c.world.archetypes);
    s.integer("dialogues_per_archetype", c.world.dialogues_per_archetype);
    s.real("train_fraction", c.world.train_fraction);
    s.real("noise", c.world.noise);
    if (const Json* defs = s.child("archetype_defs")) {
      if (!defs->is_array()) fail(ErrorCode::kConfig, "world.archetype_defs: expected an array");
      for (std::size_t i = 0; i < defs->size(); ++i) {
        const std::string where = "world.archetype_defs[" + std::to_string(i) + "]";
        const Json& d = defs->at(i);
        Section a(d, where);
        PersonaArchetype p;
        if (a.child("id")) p.id = string_field(d, "id", where);
        if (a.child("traits")) p.traits = string_field(d, "traits", where);
        a.real("volatility", p.volatility);
        p.bias.assign(c.emotions.size(), 0.0);
        if (const Json* bias = a.child("bias")) {
          Section b(*bias, where + ".bias");
          for (std::size_t e = 0; e < c.emotions.size(); ++e) {
            b.real(c.emotions.labels()[e].c_str(), p.bias[e]);
          }
          b.finish();
        }
        a.finish();
        c.world.custom_archetypes.push_back(std::move(p));
      }
    }
    s.finish();
  }
  if (const Json* p = top.child("policy")) {
    Section s(*p, "policy");
    s.integer("feature_dim", c.policy.feature_dim);
    s.integer("response_tokens", c.policy.response_tokens);
    s.integer("max_response_len", c.policy.max_response_len);
    s.finish();
  }
  if (const Json* f = top.child("flywheel")) {
    Section s(*f, "flywheel");
    FlywheelConfig& fc = c.flywheel;
    s.integer("iterations", fc.iterations);
    s.integer("rollouts", fc.rollouts);
    s.integer("total_steps", fc.total_steps);
    s.integer("prompts_per_pass", fc.prompts_per_pass);
    s.integer("max_len", fc.max_len);
    s.real("epsilon", fc.clip.epsilon);
    s.real("rl_lr", fc.rl_lr);
    s.real("sft_lr", fc.sft_lr);
    s.integer("cold_start_epochs", fc.cold_start_epochs);
    s.integer("retrain_epochs", fc.retrain_epochs);
    s.real("init_scale", fc.init_scale);
    s.integer("probe_prompts", fc.probe_prompts);
    s.integer("probe_samples", fc.probe_samples);
    s.finish();
  }
  top.finish();
  c.set_seed(seed);
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

RunPaths::RunPaths(fs::path out)
    : root(std::move(out)),
      world_dir(root / "world"),
      train(world_dir / "train.jsonl"),
      heldout(world_dir / "heldout.jsonl"),
      archetypes(world_dir / "archetypes.json"),
      run_dir(root / "run"),
      config(run_dir / "config.json"),
      metrics(run_dir / "metrics.csv"),
      steps(run_dir / "steps.csv"),
      reports(run_dir / "reports.jsonl"),
      base_checkpoint(run_dir / "checkpoints" / "base.ckpt") {}

fs::path RunPaths::checkpoint(int k) const {
  return k == 0 ? base_checkpoint : run_dir / "checkpoints" / ("iter_" + std::to_string(k) + ".ckpt");
}
fs::path RunPaths::buffer(int k) const {
  return run_dir / "buffer" / ("buffer_" + std::to_string(k) + ".jsonl");
}
fs::path RunPaths::archive(int k) const {
  return run_dir / "archive" / ("archive_" + std::to_string(k) + ".jsonl");
}
fs::path RunPaths::groups(int k) const {
  return run_dir / "groups" / ("groups_" + std::to_string(k) + ".jsonl");
}

void cmd_gen_world(const RunConfig& config, const fs::path& out, bool force) {
  config.validate();
  const RunPaths paths(out);
  for (const auto& p : {paths.train, paths.heldout, paths.archetypes}) {
    if (fs::exists(p) && !force) {
      fail(ErrorCode::kOutputExists, p.string() + " exists (use --force to overwrite)");
    }
  }
  const World w = generate_world(config.world, config.emotions, config.policy.response_tokens);
  write_records(paths.train, w.train, config.emotions);
  write_records(paths.heldout, w.heldout, config.emotions);
  write_archetypes(paths.archetypes, w.archetypes, config.emotions);
}

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

int leading_int(const std::string& line) { return std::stoi(line.substr(0, line.find(','))); }

std::string summary_line(const IterationReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "iteration %d: step=%lld reward=%.4f acc=%.4f w_f1=%.4f H_o=%.4f H_s=%.4f "
                "H_r=%.4f buffer=%zu",
                r.iteration, static_cast<long long>(r.step), r.heldout.mean_reward,
                r.heldout.accuracy, r.heldout.weighted_f1, r.entropies.h_o, r.entropies.h_s,
                r.entropies.h_r, r.buffer_after);
  return buf;
}

class RunWriter : public FlywheelObserver {
 public:
  RunWriter(const RunPaths& paths, const Policy& policy, std::uint64_t feature_seed,
            const TrainOptions& options)
      : paths_(paths), policy_(policy), feature_seed_(feature_seed), options_(options) {}

  std::vector<std::string> metrics, steps, reports;

  void on_iteration(const IterationReport& r, const FlywheelState& state,
                    const RlStageResult* stage) override {
    const EmotionVocab& vocab = policy_.emotions();
    if (r.iteration == 0) save(paths_.base_checkpoint, state.base);
    if (r.iteration > 0) save(paths_.checkpoint(r.iteration), state.params);
    write_records(paths_.buffer(r.iteration), state.buffer, vocab);
    if (stage) {
      std::string archive, groups;
      for (const auto& a : stage->archive) archive += rollout_to_json(a, vocab) + "\n";
      const std::size_t n = stage->steps.empty() ? 0 : stage->archive.size() / stage->steps.size();
      for (std::size_t g = 0; g < stage->steps.size(); ++g) {
        groups += group_to_json(stage->steps[g],
                                std::span<const ArchivedRollout>(stage->archive).subspan(g * n, n),
                                vocab) +
                  "\n";
        steps.push_back(steps_row(stage->steps[g]));
      }
      write_text(paths_.archive(r.iteration), archive);
      write_text(paths_.groups(r.iteration), groups);
    }
    metrics.push_back(metrics_row(r));
    reports.push_back(report_to_json(r));
    write_text(paths_.metrics, metrics_header() + "\n" + join_lines(metrics));
    write_text(paths_.steps, steps_header() + "\n" + join_lines(steps));
    write_text(paths_.reports, join_lines(reports));
    if (options_.on_report) options_.on_report(summary_line(r), options_.user);
  }

 private:
  void save(const fs::path& path, const PolicyParams& params) const {
    std::ostringstream os;
    policy_.save(os, params, feature_seed_);
    write_text(path, os.str());
  }

  const RunPaths& paths_;
  const Policy& policy_;
  std::uint64_t feature_seed_;
  const TrainOptions& options_;
};

PolicyParams load_params(const fs::path& path, const Policy& policy) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot read checkpoint " + path.string());
  Policy::Loaded loaded = Policy::load(in);
  if (loaded.params.size() != policy.zero_params().size()) {
    fail(ErrorCode::kConfig, path.string() + " does not match the configured policy");
  }
  return std::move(loaded.params);
}

}  // namespace

void cmd_train(const RunConfig& config, const fs::path& out, const TrainOptions& options) {
  config.validate();
  const RunPaths paths(out);
  for (const auto& p : {paths.train, paths.heldout, paths.archetypes}) {
    if (!fs::exists(p)) fail(ErrorCode::kMissingInput, p.string() + " not found (run gen-world)");
  }
  const EmotionVocab& vocab = config.emotions;
  auto train = read_records(paths.train, vocab);
  auto heldout = read_records(paths.heldout, vocab);
  auto archetypes = read_archetypes(paths.archetypes, vocab);

  const Policy policy(vocab, config.policy);
  const Flywheel fw(policy, config.flywheel, std::move(archetypes), std::move(heldout),
                    config.feature_seed());
  RunWriter writer(paths, policy, config.feature_seed(), options);

  if (!options.resume) {
    if (fs::exists(paths.run_dir) && !fs::is_empty(paths.run_dir)) {
      if (!options.force) {
        fail(ErrorCode::kOutputExists,
             paths.run_dir.string() + " exists (use --force to overwrite or --resume)");
      }
      fs::remove_all(paths.run_dir);
    }
    write_text(paths.config, config.to_json());
    FlywheelState state = fw.start(std::move(train), &writer);
    fw.resume(state, &writer);
    return;
  }

  const int k = *options.resume;
  if (k < 0 || k > config.flywheel.iterations) {
    fail(ErrorCode::kConfig, "--resume must be in 0.." + std::to_string(config.flywheel.iterations));
  }
  {
    std::ifstream in(paths.config);
    if (!in) fail(ErrorCode::kMissingInput, paths.config.string() + " not found");
    std::stringstream ss;
    ss << in.rdbuf();
    if (ss.str() != config.to_json()) {
      fail(ErrorCode::kConfig, "config differs from the one recorded in " + paths.config.string());
    }
  }
  auto metric_lines = read_lines(paths.metrics);
  auto step_lines = read_lines(paths.steps);
  auto report_lines = read_lines(paths.reports);
  if (metric_lines.empty() || metric_lines.front() != metrics_header()) {
    fail(ErrorCode::kIo, paths.metrics.string() + " has an unexpected header");
  }
  metric_lines.erase(metric_lines.begin());
  if (!step_lines.empty()) step_lines.erase(step_lines.begin());
  if (static_cast<int>(metric_lines.size()) <= k || static_cast<int>(report_lines.size()) <= k) {
    fail(ErrorCode::kMissingInput, "iteration " + std::to_string(k) + " has not completed");
  }
  metric_lines.resize(static_cast<std::size_t>(k) + 1);
  report_lines.resize(static_cast<std::size_t>(k) + 1);
  std::erase_if(step_lines, [&](const std::string& l) { return leading_int(l) > k; });

  FlywheelState state;
  state.base = load_params(paths.base_checkpoint, policy);
  state.params = load_params(paths.checkpoint(k), policy);
  state.buffer = read_records(paths.buffer(k), vocab);
  state.iteration = k;
  {
    const std::string& row = metric_lines.back();
    const std::size_t a = row.find(',') + 1;
    state.step = std::stoll(row.substr(a, row.find(',', a) - a));
  }
  writer.metrics = std::move(metric_lines);
  writer.steps = std::move(step_lines);
  writer.reports = std::move(report_lines);
  fw.resume(state, &writer);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (true) {
    const std::size_t j = line.find(',', i);
    out.push_back(line.substr(i, j - i));
    if (j == std::string::npos) break;
    i = j + 1;
  }
  return out;
}

}  // namespace

std::string cmd_report(const fs::path& out) {
  const RunPaths paths(out);
  if (!fs::exists(paths.metrics)) {
    fail(ErrorCode::kMissingInput, paths.metrics.string() + " not found");
  }
  auto lines = read_lines(paths.metrics);
  if (lines.empty() || lines.front() != metrics_header()) {
    fail(ErrorCode::kIo, paths.metrics.string() + " has an unexpected header");
  }
  lines.erase(lines.begin());
  if (lines.empty()) fail(ErrorCode::kMissingInput, paths.metrics.string() + " has no rows");

  struct Row {
    int iteration;
    double reward, h_o, h_s, h_r, acc, f1, lambda;
    long long step, buffer;
  };
  std::vector<Row> rows;
  for (const auto& l : lines) {
    const auto f = split_csv(l);
    if (f.size() != 10) fail(ErrorCode::kIo, "malformed metrics row: " + l);
    rows.push_back({std::stoi(f[0]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                    std::stod(f[5]), std::stod(f[6]), std::stod(f[7]), std::stod(f[9]),
                    std::stoll(f[1]), std::stoll(f[8])});
  }

  std::string s;
  char buf[256];
  s += "iteration     step  mean_reward  accuracy      w_f1       H_o       H_s       H_r  buffer  lambda\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%9d %8lld %12.4f %9.4f %9.4f %9.4f %9.4f %9.4f %7lld %7.4f\n",
                  r.iteration, r.step, r.reward, r.acc, r.f1, r.h_o, r.h_s, r.h_r, r.buffer,
                  r.lambda);
    s += buf;
  }
  const Row& first = rows.front();
  const Row& last = rows.back();
  s += "\nfirst vs last iteration\n";
  s += "metric          iter " + std::to_string(first.iteration) + "     iter " +
       std::to_string(last.iteration) + "     delta\n";
  auto compare = [&](const char* name, double a, double b) {
    std::snprintf(buf, sizeof buf, "%-12s %10.4f %10.4f %+9.4f\n", name, a, b, b - a);
    s += buf;
  };
  compare("mean_reward", first.reward, last.reward);
  compare("accuracy", first.acc, last.acc);
  compare("w_f1", first.f1, last.f1);
  compare("H_o", first.h_o, last.h_o);
  compare("H_s", first.h_s, last.h_s);
  compare("H_r", first.h_r, last.h_r);

  s += "\nreward by personality";
  if (last.iteration == 0 || !fs::exists(paths.archive(last.iteration))) {
    s += ": no rollouts (baseline only)\n";
    return s;
  }
  const RunConfig config = load_config(paths.config);
  const auto archive = read_archive(paths.archive(last.iteration), config.emotions);
  const auto archetypes = read_archetypes(paths.archetypes, config.emotions);
  s += " (iteration " + std::to_string(last.iteration) + " rollouts)\n";
  s += "archetype  mean_reward   count  traits\n";
  for (const auto& row : personality_reward_report(archive, archetypes)) {
    std::string traits;
    for (const auto& a : archetypes) {
      if (a.id == row.archetype) traits = a.traits;
    }
    std::snprintf(buf, sizeof buf, "%-9s %12.4f %7zu  %s\n", row.archetype.c_str(), row.mean_reward,
                  row.count, traits.c_str());
    s += buf;
  }
  return s;
}

}  // namespace selfemo
