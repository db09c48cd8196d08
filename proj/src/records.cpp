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

#include "selfemo/records.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "selfemo/error.hpp"

namespace selfemo {
namespace {

using Json = nlohmann::ordered_json;

Json set_to_json(const WeightedEmotionSet& set, const EmotionVocab& vocab) {
  Json j = Json::object();
  for (const auto& [label, w] : set.entries()) j[vocab.label(label)] = w;
  return j;
}

WeightedEmotionSet set_from_json(const Json& j, const EmotionVocab& vocab) {
  std::vector<LabelWeight> entries;
  for (const auto& [name, w] : j.items()) entries.emplace_back(vocab.at(name), w.get<double>());
  return WeightedEmotionSet(std::move(entries));
}

ParseFailure failure_from_name(std::string_view name) {
  for (int f = 0; f <= static_cast<int>(ParseFailure::kMalformed); ++f) {
    if (name == parse_failure_name(static_cast<ParseFailure>(f))) return static_cast<ParseFailure>(f);
  }
  fail(ErrorCode::kIo, "unknown parse failure " + std::string(name));
}

template <typename F>
auto parse_line(std::string_view line, F&& body) {
  try {
    return body(Json::parse(line));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kIo, std::string("malformed record: ") + e.what());
  }
}

}  // namespace

std::string format_real(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string record_to_json(const DialogueRecord& d, const EmotionVocab& vocab) {
  Json j;
  j["id"] = d.id;
  Json ctx = Json::array();
  for (const auto& u : d.context) ctx.push_back({{"speaker", u.speaker}, {"text", u.text}});
  j["context"] = std::move(ctx);
  j["persona"] = {{"id", d.persona.id}, {"traits", d.persona.traits}};
  j["label"] = set_to_json(d.label, vocab);
  Json prov;
  if (d.provenance.kind == Provenance::Kind::kOriginal) {
    prov["kind"] = "original";
  } else {
    prov["kind"] = "synthesized";
    prov["iteration"] = d.provenance.iteration;
    prov["source_prompt"] = d.provenance.source_prompt;
    prov["source_rollout"] = d.provenance.source_rollout;
    prov["source_reward"] = d.provenance.source_reward;
  }
  j["provenance"] = std::move(prov);
  return j.dump();
}

DialogueRecord record_from_json(std::string_view line, const EmotionVocab& vocab) {
  return parse_line(line, [&](const Json& j) {
    DialogueRecord d;
    d.id = j.at("id").get<std::string>();
    for (const auto& u : j.at("context")) {
      d.context.push_back({u.at("speaker").get<std::string>(), u.at("text").get<std::string>()});
    }
    d.persona = {j.at("persona").at("id").get<std::string>(),
                 j.at("persona").at("traits").get<std::string>()};
    d.label = set_from_json(j.at("label"), vocab);
    const Json& p = j.at("provenance");
    const auto kind = p.at("kind").get<std::string>();
    if (kind == "synthesized") {
      d.provenance.kind = Provenance::Kind::kSynthesized;
      d.provenance.iteration = p.at("iteration").get<int>();
      d.provenance.source_prompt = p.at("source_prompt").get<std::string>();
      d.provenance.source_rollout = p.at("source_rollout").get<int>();
      d.provenance.source_reward = p.at("source_reward").get<double>();
    } else if (kind != "original") {
      fail(ErrorCode::kIo, "unknown provenance kind " + kind);
    }
    return d;
  });
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
}

void write_records(const std::filesystem::path& path, std::span<const DialogueRecord> records,
                   const EmotionVocab& vocab) {
  std::string text;
  for (const auto& d : records) text += record_to_json(d, vocab) + "\n";
  write_text(path, text);
}

std::vector<DialogueRecord> read_records(const std::filesystem::path& path,
                                         const EmotionVocab& vocab) {
  std::vector<DialogueRecord> out;
  for (const auto& line : read_lines(path)) out.push_back(record_from_json(line, vocab));
  return out;
}

void write_archetypes(const std::filesystem::path& path,
                      std::span<const PersonaArchetype> archetypes, const EmotionVocab& vocab) {
  Json j = Json::array();
  for (const auto& a : archetypes) {
    Json bias = Json::object();
    for (std::size_t e = 0; e < vocab.size(); ++e) bias[vocab.labels()[e]] = a.bias.at(e);
    j.push_back({{"id", a.id}, {"traits", a.traits}, {"bias", bias}, {"volatility", a.volatility}});
  }
  write_text(path, j.dump(2) + "\n");
}

std::vector<PersonaArchetype> read_archetypes(const std::filesystem::path& path,
                                              const EmotionVocab& vocab) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_line(ss.str(), [&](const Json& j) {
    std::vector<PersonaArchetype> out;
    for (const auto& a : j) {
      PersonaArchetype p;
      p.id = a.at("id").get<std::string>();
      p.traits = a.at("traits").get<std::string>();
      p.volatility = a.at("volatility").get<double>();
      p.bias.assign(vocab.size(), 0.0);
      for (const auto& [name, b] : a.at("bias").items()) p.bias[vocab.at(name).index()] = b.get<double>();
      out.push_back(std::move(p));
    }
    return out;
  });
}

std::string rollout_to_json(const ArchivedRollout& r, const EmotionVocab& vocab) {
  Json j;
  j["iteration"] = r.iteration;
  j["step"] = r.step;
  j["index"] = r.index;
  j["prompt_id"] = r.record.prompt_id;
  j["archetype"] = r.archetype;
  j["raw_text"] = r.record.raw_text;
  if (r.record.outcome.is_valid()) {
    const auto& o = r.record.outcome.output();
    j["output"] = {{"last_emotions", set_to_json(o.last_emotions, vocab)},
                   {"my_emotions", set_to_json(o.my_emotions, vocab)},
                   {"my_output", o.my_output}};
  } else {
    j["failure"] = parse_failure_name(r.record.outcome.failure());
  }
  j["r"] = r.record.primary_reward;
  j["r2"] = r.secondary_reward;
  j["advantage"] = r.advantage;
  j["ratio"] = r.ratio;
  j["behavior_logprob"] = r.record.behavior_logprob;
  j["tokens"] = r.record.token_ids;
  return j.dump();
}

ArchivedRollout rollout_from_json(std::string_view line, const EmotionVocab& vocab) {
  return parse_line(line, [&](const Json& j) {
    ArchivedRollout r;
    r.iteration = j.at("iteration").get<int>();
    r.step = j.at("step").get<std::int64_t>();
    r.index = j.at("index").get<int>();
    r.archetype = j.at("archetype").get<std::string>();
    r.record.prompt_id = j.at("prompt_id").get<std::string>();
    r.record.raw_text = j.at("raw_text").get<std::string>();
    if (j.contains("output")) {
      const Json& o = j.at("output");
      r.record.outcome = ParseOutcome::valid({set_from_json(o.at("last_emotions"), vocab),
                                              set_from_json(o.at("my_emotions"), vocab),
                                              o.at("my_output").get<std::string>()});
    } else {
      r.record.outcome = ParseOutcome::invalid(failure_from_name(j.at("failure").get<std::string>()));
    }
    r.record.primary_reward = j.at("r").get<double>();
    r.secondary_reward = j.at("r2").get<double>();
    r.advantage = j.at("advantage").get<double>();
    r.ratio = j.at("ratio").get<double>();
    r.record.behavior_logprob = j.at("behavior_logprob").get<double>();
    r.record.token_ids = j.at("tokens").get<std::vector<std::uint16_t>>();
    return r;
  });
}

std::vector<ArchivedRollout> read_archive(const std::filesystem::path& path,
                                          const EmotionVocab& vocab) {
  std::vector<ArchivedRollout> out;
  for (const auto& line : read_lines(path)) out.push_back(rollout_from_json(line, vocab));
  return out;
}

std::string group_to_json(const StepRecord& step, std::span<const ArchivedRollout> group,
                          const EmotionVocab& vocab) {
  Json j;
  j["iteration"] = step.iteration;
  j["step"] = step.step;
  j["prompt_id"] = step.prompt_id;
  j["lambda"] = step.lambda;
  std::vector<RolloutRecord> records;
  for (const auto& g : group) records.push_back(g.record);
  const auto cons = consensus(std::span<const RolloutRecord>(records), vocab.size());
  if (cons) {
    Json top = Json::array();
    Json p_star = Json::object();
    for (LabelId l : cons->top3) {
      top.push_back(vocab.label(l));
      p_star[vocab.label(l)] = cons->p_star[l.index()];
    }
    j["top3"] = std::move(top);
    j["p_star"] = std::move(p_star);
  } else {
    j["top3"] = nullptr;
    j["p_star"] = nullptr;
  }
  Json rollouts = Json::array();
  for (const auto& g : group) {
    rollouts.push_back({{"index", g.index},
                        {"r", g.record.primary_reward},
                        {"r2", g.secondary_reward},
                        {"advantage", g.advantage},
                        {"ratio", g.ratio},
                        {"valid", g.record.outcome.is_valid()}});
  }
  j["rollouts"] = std::move(rollouts);
  j["objective"] = step.objective;
  return j.dump();
}

std::string report_to_json(const IterationReport& r) {
  Json j;
  j["iteration"] = r.iteration;
  j["step"] = r.step;
  j["lambda"] = r.lambda;
  j["prompts"] = r.prompts;
  j["rollout_mean_reward"] = r.rollout_mean_reward;
  j["rollout_max_reward"] = r.rollout_max_reward;
  j["invalid_fraction"] = r.invalid_fraction;
  j["buffer_before"] = r.buffer_before;
  j["buffer_after"] = r.buffer_after;
  j["heldout"] = {{"accuracy", r.heldout.accuracy},
                  {"w_f1", r.heldout.weighted_f1},
                  {"mean_reward", r.heldout.mean_reward}};
  j["entropy"] = {{"H_o", r.entropies.h_o}, {"H_s", r.entropies.h_s}, {"H_r", r.entropies.h_r}};
  return j.dump();
}

std::string metrics_header() {
  return "iteration,step,mean_reward,H_o,H_s,H_r,accuracy,w_f1,buffer_size,lambda";
}

std::string metrics_row(const IterationReport& r) {
  std::string s = std::to_string(r.iteration) + "," + std::to_string(r.step);
  for (double x : {r.heldout.mean_reward, r.entropies.h_o, r.entropies.h_s, r.entropies.h_r,
                   r.heldout.accuracy, r.heldout.weighted_f1}) {
    s += "," + format_real(x);
  }
  s += "," + std::to_string(r.buffer_after) + "," + format_real(r.lambda);
  return s;
}

std::string steps_header() {
  return "iteration,step,prompt_id,lambda,mean_reward,max_reward,invalid_fraction,objective";
}

std::string steps_row(const StepRecord& s) {
  return std::to_string(s.iteration) + "," + std::to_string(s.step) + "," + s.prompt_id + "," +
         format_real(s.lambda) + "," + format_real(s.mean_reward) + "," +
         format_real(s.max_reward) + "," + format_real(s.invalid_fraction) + "," +
         format_real(s.objective);
}

}  // namespace selfemo
