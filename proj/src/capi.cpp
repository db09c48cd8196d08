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

#include "selfemo/selfemo.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "selfemo/emotion.hpp"
#include "selfemo/error.hpp"
#include "selfemo/grpo.hpp"
#include "selfemo/pipeline.hpp"

struct selfemo_vocab {
  selfemo::EmotionVocab vocab;
};

struct selfemo_outcome {
  selfemo::ParseOutcome outcome;
};

struct selfemo_config {
  selfemo::RunConfig config;
};

namespace {

using namespace selfemo;

thread_local std::string g_last_error;

selfemo_status status_of(ErrorCode code) {
  return static_cast<selfemo_status>(static_cast<int>(code) + 1);
}

selfemo_status set_error(selfemo_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <typename F>
selfemo_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SELFEMO_OK;
  } catch (const Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(SELFEMO_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return set_error(SELFEMO_RUNTIME, e.what());
  }
}

#define SELFEMO_REQUIRE(cond, msg) \
  if (!(cond)) fail(ErrorCode::kInvalidArgument, msg)

WeightedEmotionSet to_set(const selfemo_set* s) {
  SELFEMO_REQUIRE(s != nullptr, "set is null");
  SELFEMO_REQUIRE(s->size == 0 || (s->labels && s->weights), "set arrays are null");
  std::vector<LabelWeight> entries;
  for (std::size_t i = 0; i < s->size; ++i) entries.emplace_back(LabelId{s->labels[i]}, s->weights[i]);
  return WeightedEmotionSet(std::move(entries));
}

const WeightedEmotionSet& set_of(const selfemo_outcome* o, int which) {
  const StructuredOutput& out = o->outcome.output();
  SELFEMO_REQUIRE(which == 0 || which == 1, "which must be 0 or 1");
  return which == 0 ? out.last_emotions : out.my_emotions;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* selfemo_last_error(void) { return g_last_error.c_str(); }

const char* selfemo_status_name(selfemo_status status) {
  if (status == SELFEMO_OK) return "OK";
  const int code = static_cast<int>(status) - 1;
  if (code < 0 || code > static_cast<int>(ErrorCode::kRuntime)) return "UNKNOWN";
  return error_code_name(static_cast<ErrorCode>(code));
}

const char* selfemo_version(void) { return "0.1.0"; }

selfemo_status selfemo_vocab_default(selfemo_vocab** out) {
  return guarded([&] {
    SELFEMO_REQUIRE(out, "out is null");
    *out = new selfemo_vocab{EmotionVocab::default_vocab()};
  });
}

selfemo_status selfemo_vocab_create(const char* const* labels, size_t count, selfemo_vocab** out) {
  return guarded([&] {
    SELFEMO_REQUIRE(out && (labels || count == 0), "null argument");
    std::vector<std::string> names;
    for (size_t i = 0; i < count; ++i) {
      SELFEMO_REQUIRE(labels[i], "label is null");
      names.emplace_back(labels[i]);
    }
    *out = new selfemo_vocab{EmotionVocab(std::move(names))};
  });
}

void selfemo_vocab_free(selfemo_vocab* vocab) { delete vocab; }

size_t selfemo_vocab_size(const selfemo_vocab* vocab) { return vocab ? vocab->vocab.size() : 0; }

const char* selfemo_vocab_label(const selfemo_vocab* vocab, size_t index) {
  if (!vocab || index >= vocab->vocab.size()) return nullptr;
  return vocab->vocab.labels()[index].c_str();
}

selfemo_status selfemo_vocab_find(const selfemo_vocab* vocab, const char* label, uint16_t* index) {
  return guarded([&] {
    SELFEMO_REQUIRE(vocab && label && index, "null argument");
    *index = vocab->vocab.at(label).value;
  });
}

selfemo_status selfemo_parse(const selfemo_vocab* vocab, const char* text, size_t length,
                             selfemo_outcome** out) {
  return guarded([&] {
    SELFEMO_REQUIRE(vocab && out && (text || length == 0), "null argument");
    *out = new selfemo_outcome{
        parse_structured_output(std::string_view(text ? text : "", length), vocab->vocab)};
  });
}

void selfemo_outcome_free(selfemo_outcome* outcome) { delete outcome; }

int selfemo_outcome_is_valid(const selfemo_outcome* outcome) {
  return outcome && outcome->outcome.is_valid() ? 1 : 0;
}

selfemo_parse_failure selfemo_outcome_failure(const selfemo_outcome* outcome) {
  if (!outcome) return SELFEMO_PARSE_NO_DICT;
  if (outcome->outcome.is_valid()) return SELFEMO_PARSE_VALID;
  return static_cast<selfemo_parse_failure>(static_cast<int>(outcome->outcome.failure()));
}

const char* selfemo_parse_failure_name(selfemo_parse_failure failure) {
  if (failure == SELFEMO_PARSE_VALID) return "VALID";
  if (failure < SELFEMO_PARSE_NO_DICT || failure > SELFEMO_PARSE_MALFORMED) return "UNKNOWN";
  return parse_failure_name(static_cast<ParseFailure>(static_cast<int>(failure)));
}

size_t selfemo_outcome_set_size(const selfemo_outcome* outcome, int which) {
  if (!outcome || !outcome->outcome.is_valid() || (which != 0 && which != 1)) return 0;
  return set_of(outcome, which).size();
}

selfemo_status selfemo_outcome_set_entry(const selfemo_outcome* outcome, int which,
                                         size_t position, uint16_t* label, double* weight) {
  return guarded([&] {
    SELFEMO_REQUIRE(outcome && label && weight, "null argument");
    SELFEMO_REQUIRE(outcome->outcome.is_valid(), "outcome is invalid");
    const auto& set = set_of(outcome, which);
    SELFEMO_REQUIRE(position < set.size(), "position out of range");
    *label = set.entries()[position].first.value;
    *weight = set.entries()[position].second;
  });
}

const char* selfemo_outcome_response(const selfemo_outcome* outcome) {
  if (!outcome || !outcome->outcome.is_valid()) return nullptr;
  return outcome->outcome.output().my_output.c_str();
}

selfemo_status selfemo_outcome_serialize(const selfemo_outcome* outcome, const selfemo_vocab* vocab,
                                         char** text) {
  return guarded([&] {
    SELFEMO_REQUIRE(outcome && vocab && text, "null argument");
    SELFEMO_REQUIRE(outcome->outcome.is_valid(), "outcome is invalid");
    *text = copy_string(serialize_structured_output(outcome->outcome.output(), vocab->vocab));
  });
}

selfemo_status selfemo_normalize(const selfemo_set* set, uint16_t* labels, double* weights,
                                 size_t* size) {
  return guarded([&] {
    SELFEMO_REQUIRE(labels && weights && size, "null argument");
    const EmotionDistribution d = normalize(to_set(set));
    *size = d.entries().size();
    for (size_t i = 0; i < d.entries().size(); ++i) {
      labels[i] = d.entries()[i].first.value;
      weights[i] = d.entries()[i].second;
    }
  });
}

selfemo_status selfemo_weighted_iou(const selfemo_set* prediction, const selfemo_set* label,
                                    double* out) {
  return guarded([&] {
    SELFEMO_REQUIRE(out, "out is null");
    *out = weighted_iou(normalize(to_set(prediction)), normalize(to_set(label)));
  });
}

selfemo_status selfemo_reward(const selfemo_outcome* outcome, const selfemo_set* label, double* out) {
  return guarded([&] {
    SELFEMO_REQUIRE(outcome && out, "null argument");
    *out = reward(outcome->outcome, to_set(label));
  });
}

selfemo_status selfemo_reward_text(const selfemo_vocab* vocab, const char* text, size_t length,
                                   const selfemo_set* label, double* out) {
  return guarded([&] {
    SELFEMO_REQUIRE(vocab && out && (text || length == 0), "null argument");
    const WeightedEmotionSet l = to_set(label);
    for (const auto& [id, w] : l.entries()) {
      SELFEMO_REQUIRE(id.index() < vocab->vocab.size(), "label index outside the vocabulary");
    }
    *out = reward(parse_structured_output(std::string_view(text ? text : "", length), vocab->vocab), l);
  });
}

selfemo_status selfemo_consensus(const selfemo_outcome* const* outcomes, size_t count,
                                 size_t vocab_size, double* p_tilde, double* p_star,
                                 uint16_t* top3, size_t* top3_size) {
  return guarded([&] {
    SELFEMO_REQUIRE(outcomes && p_tilde && p_star && top3 && top3_size, "null argument");
    std::vector<ParseOutcome> group;
    for (size_t i = 0; i < count; ++i) {
      SELFEMO_REQUIRE(outcomes[i], "outcome is null");
      group.push_back(outcomes[i]->outcome);
    }
    const auto c = consensus(group, vocab_size);
    if (!c) fail(ErrorCode::kAllInvalid, "no valid rollout in the group");
    for (size_t e = 0; e < vocab_size; ++e) {
      p_tilde[e] = c->p_tilde[e];
      p_star[e] = c->p_star[e];
    }
    *top3_size = c->top3.size();
    for (size_t i = 0; i < c->top3.size(); ++i) top3[i] = c->top3[i].value;
  });
}

selfemo_status selfemo_secondary_reward(const selfemo_outcome* outcome, const uint16_t* top3,
                                        size_t top3_size, double* out) {
  return guarded([&] {
    SELFEMO_REQUIRE(outcome && out && (top3 || top3_size == 0), "null argument");
    SELFEMO_REQUIRE(top3_size <= SELFEMO_MAX_LABELS, "top3 has more than three labels");
    std::vector<LabelId> labels;
    for (size_t i = 0; i < top3_size; ++i) labels.push_back(LabelId{top3[i]});
    *out = secondary_reward(outcome->outcome, labels);
  });
}

selfemo_status selfemo_lambda_schedule(int64_t step, int64_t total_steps, double* out) {
  return guarded([&] {
    SELFEMO_REQUIRE(out, "out is null");
    *out = lambda_schedule(step, total_steps);
  });
}

selfemo_status selfemo_advantages(const double* primary, const double* secondary, size_t count,
                                  double lambda, double* out) {
  return guarded([&] {
    SELFEMO_REQUIRE(primary && secondary && out, "null argument");
    const AdvantageVector a = advantages(std::span<const double>(primary, count),
                                         std::span<const double>(secondary, count), lambda);
    std::copy(a.values.begin(), a.values.end(), out);
  });
}

selfemo_status selfemo_surrogate_loss(const double* new_logprobs, const double* old_logprobs,
                                      const double* adv, size_t count, double epsilon,
                                      double* loss, double* grad_scale) {
  return guarded([&] {
    SELFEMO_REQUIRE(new_logprobs && old_logprobs && adv && loss && grad_scale, "null argument");
    ClipConfig clip{epsilon};
    clip.validate();
    const SurrogateResult r = surrogate_loss(std::span<const double>(new_logprobs, count),
                                             std::span<const double>(old_logprobs, count),
                                             std::span<const double>(adv, count), clip);
    *loss = r.loss;
    std::copy(r.grad_scale.begin(), r.grad_scale.end(), grad_scale);
  });
}

selfemo_status selfemo_config_load(const char* path, selfemo_config** out) {
  return guarded([&] {
    SELFEMO_REQUIRE(path && out, "null argument");
    *out = new selfemo_config{load_config(path)};
  });
}

selfemo_status selfemo_config_parse(const char* json, size_t length, selfemo_config** out) {
  return guarded([&] {
    SELFEMO_REQUIRE(json && out, "null argument");
    *out = new selfemo_config{parse_config(std::string_view(json, length))};
  });
}

void selfemo_config_free(selfemo_config* config) { delete config; }

selfemo_status selfemo_config_set_seed(selfemo_config* config, uint64_t seed) {
  return guarded([&] {
    SELFEMO_REQUIRE(config, "config is null");
    config->config.set_seed(seed);
  });
}

int selfemo_config_iterations(const selfemo_config* config) {
  return config ? config->config.flywheel.iterations : 0;
}

selfemo_status selfemo_gen_world(const selfemo_config* config, const char* out_dir, int force) {
  return guarded([&] {
    SELFEMO_REQUIRE(config && out_dir, "null argument");
    cmd_gen_world(config->config, out_dir, force != 0);
  });
}

selfemo_status selfemo_train(const selfemo_config* config, const char* out_dir, int force,
                             int resume_iteration, selfemo_report_fn on_report, void* user) {
  return guarded([&] {
    SELFEMO_REQUIRE(config && out_dir, "null argument");
    TrainOptions options;
    options.force = force != 0;
    if (resume_iteration >= 0) options.resume = resume_iteration;
    options.on_report = [](const std::string& line, void* ctx) {
      auto* pair = static_cast<std::pair<selfemo_report_fn, void*>*>(ctx);
      pair->first(line.c_str(), pair->second);
    };
    std::pair<selfemo_report_fn, void*> ctx{on_report, user};
    if (on_report) {
      options.user = &ctx;
    } else {
      options.on_report = nullptr;
    }
    cmd_train(config->config, out_dir, options);
  });
}

selfemo_status selfemo_report(const char* out_dir, char** text) {
  return guarded([&] {
    SELFEMO_REQUIRE(out_dir && text, "null argument");
    *text = copy_string(cmd_report(out_dir));
  });
}

void selfemo_string_free(char* text) { std::free(text); }

}  // extern "C"
