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

#include "selfemo/world.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "selfemo/error.hpp"
#include "selfemo/rng.hpp"

namespace selfemo {
namespace {

constexpr double kCueGain = 3.0;
constexpr double kBiasGain = 0.5;
constexpr double kGoldThreshold = 0.15;
constexpr int kFillerTokens = 8;

std::vector<double> bias_from(const EmotionVocab& vocab,
                              std::initializer_list<std::pair<std::string_view, double>> named) {
  std::vector<double> bias(vocab.size(), 0.0);
  for (const auto& [name, b] : named) {
    if (auto id = vocab.find(name)) bias[id->index()] = b;
  }
  return bias;
}

std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += p[i] = std::exp(z[i] - m);
  for (double& v : p) v /= total;
  return p;
}

std::size_t argmax(std::span<const double> xs) {
  return static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string filler(Rng& rng) { return "f" + std::to_string(rng.below(kFillerTokens)); }

std::string cue(LabelId emotion, Rng& rng, std::size_t response_tokens) {
  const int variant = static_cast<int>(rng.below(2));
  return TokenVocab::response_name(expressive_token(emotion, variant, response_tokens));
}

// Thresholded, volatility-mixed softmax around a cued emotion; always keeps
// the argmax. Used for gold labels and for the expert's own emotions.
WeightedEmotionSet mixed_label(LabelId cued, std::span<const double> bias, double volatility,
                               double noise, Rng* rng) {
  const std::size_t e = bias.size();
  std::vector<double> z(e);
  for (std::size_t k = 0; k < e; ++k) {
    z[k] = (k == cued.index() ? kCueGain : 0.0) + kBiasGain * bias[k];
    if (rng) z[k] += volatility * noise * rng->normal();
  }
  const std::vector<double> q = softmax(z);
  const double mix = std::min(1.0, volatility * noise);
  const std::size_t top = argmax(z);
  std::vector<double> p(e);
  for (std::size_t k = 0; k < e; ++k) p[k] = (1.0 - mix) * (k == top ? 1.0 : 0.0) + mix * q[k];

  std::vector<std::size_t> order(e);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] > p[b]; });
  std::vector<LabelWeight> entries;
  for (std::size_t i = 0; i < std::min(kMaxEmotionLabels, e); ++i) {
    if (i > 0 && p[order[i]] < kGoldThreshold) break;
    const double w = std::max(0.01, std::round(p[order[i]] * 100.0) / 100.0);
    entries.emplace_back(LabelId{static_cast<std::uint16_t>(order[i])}, w);
  }
  return WeightedEmotionSet(std::move(entries));
}

DialogueRecord make_dialogue(std::uint64_t seed, const WorldConfig& config,
                             std::span<const PersonaArchetype> archetypes, std::size_t a,
                             std::size_t j, std::size_t response_tokens) {
  Rng rng(derive_seed(seed, 0x646c67, a, j));
  const PersonaArchetype& speaker = archetypes[a];
  const std::size_t e = speaker.bias.size();

  const std::vector<double> prior = softmax(speaker.bias);
  const LabelId latent{static_cast<std::uint16_t>(rng.categorical(prior))};

  std::size_t responder = a;
  if (archetypes.size() > 1) {
    responder = rng.below(archetypes.size() - 1);
    if (responder >= a) ++responder;
  }

  DialogueRecord d;
  d.id = archetypes[a].id + "-" + std::to_string(j);
  d.persona = Persona{archetypes[responder].id, archetypes[responder].traits};

  const std::size_t turns = 2 + rng.below(5);
  for (std::size_t u = 0; u < turns; ++u) {
    const std::size_t from_end = turns - 1 - u;
    const std::string& who = (from_end % 2 == 0) ? speaker.id : archetypes[responder].id;
    std::vector<std::string> words;
    const std::size_t len = 2 + rng.below(4);
    if (from_end == 0) {
      bool any_cue = false;
      for (std::size_t w = 0; w < len; ++w) {
        if (rng.uniform() < 0.8) {
          words.push_back(cue(latent, rng, response_tokens));
          any_cue = true;
        } else {
          words.push_back(filler(rng));
        }
      }
      if (!any_cue) words.back() = cue(latent, rng, response_tokens);
    } else {
      for (std::size_t w = 0; w < len; ++w) {
        if (rng.uniform() < 0.5) {
          words.push_back(cue(LabelId{static_cast<std::uint16_t>(rng.below(e))}, rng,
                              response_tokens));
        } else {
          words.push_back(filler(rng));
        }
      }
    }
    d.context.push_back(Utterance{who, join(words)});
  }
  d.label = mixed_label(latent, speaker.bias, speaker.volatility, config.noise, &rng);
  return d;
}

const PersonaArchetype* find_archetype(std::span<const PersonaArchetype> archetypes,
                                       std::string_view id) {
  for (const auto& a : archetypes) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

// Self emotion elicited in the responder by each recognized emotion.
std::vector<std::size_t> appraisal(const EmotionVocab& vocab) {
  std::vector<std::size_t> to(vocab.size());
  std::iota(to.begin(), to.end(), 0);
  const std::pair<std::string_view, std::string_view> table[] = {
      {"fear", "sadness"}, {"disgust", "anger"}, {"anger", "fear"}};
  for (const auto& [from, self] : table) {
    const auto f = vocab.find(from);
    const auto s = vocab.find(self);
    if (f && s) to[f->index()] = s->index();
  }
  return to;
}

}  // namespace

std::vector<PersonaArchetype> default_archetypes(const EmotionVocab& vocab) {
  return {
      {"a0", "humor_regulated_social",
       bias_from(vocab, {{"neutral", 0.8}, {"joy", 1.2}, {"surprise", 0.4}}), 0.0},
      {"a1", "composed_practical_direct_efficient",
       bias_from(vocab, {{"neutral", 1.4}, {"sadness", 0.3}}), 0.25},
      {"a2", "emotional_expressiveness_interpersonal_playfulness",
       bias_from(vocab, {{"surprise", 1.0}, {"joy", 1.0}}), 0.5},
      {"a3", "emotional_directness_assertive_engagement",
       bias_from(vocab, {{"anger", 0.8}, {"sadness", 0.6}, {"neutral", 0.3}}), 0.75},
      {"a4", "emotional_reactivity_defensive_confrontation",
       bias_from(vocab, {{"anger", 1.2}, {"disgust", 0.8}, {"fear", 0.5}}), 1.2},
  };
}

void WorldConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorCode::kConfig, "world.train_fraction must be in (0, 1)");
  }
  if (dialogues_per_archetype < 2) {
    fail(ErrorCode::kConfig, "world.dialogues_per_archetype must be at least 2");
  }
  if (!std::isfinite(noise) || noise < 0.0) {
    fail(ErrorCode::kConfig, "world.noise must be finite and non-negative");
  }
  if (custom_archetypes.empty() && (archetypes < 1 || archetypes > 5)) {
    fail(ErrorCode::kConfig, "world.archetypes must be in 1..5");
  }
  for (const auto& a : custom_archetypes) {
    if (a.id.empty()) fail(ErrorCode::kConfig, "archetype id must be non-empty");
    if (!std::isfinite(a.volatility) || a.volatility < 0.0) {
      fail(ErrorCode::kConfig, "archetype " + a.id + ": volatility must be finite and >= 0");
    }
    for (double b : a.bias) {
      if (!std::isfinite(b)) fail(ErrorCode::kConfig, "archetype " + a.id + ": bias not finite");
    }
  }
}

std::size_t expressive_token(LabelId emotion, int variant, std::size_t response_tokens) {
  if (response_tokens == 0) fail(ErrorCode::kInvalidArgument, "no response tokens");
  return (2 * emotion.index() + static_cast<std::size_t>(variant & 1)) % response_tokens;
}

World generate_world(const WorldConfig& config, const EmotionVocab& vocab,
                     std::size_t response_tokens) {
  config.validate();
  World world;
  if (config.custom_archetypes.empty()) {
    world.archetypes = default_archetypes(vocab);
    world.archetypes.resize(config.archetypes);
  } else {
    world.archetypes = config.custom_archetypes;
  }
  for (const auto& a : world.archetypes) {
    if (a.bias.size() != vocab.size()) {
      fail(ErrorCode::kConfig, "archetype " + a.id + ": bias must cover the vocabulary");
    }
    if (find_archetype(world.archetypes, a.id) != &a) {
      fail(ErrorCode::kConfig, "duplicate archetype id " + a.id);
    }
  }

  const std::size_t n = config.dialogues_per_archetype;
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(n))), 1,
      n - 1);
  for (std::size_t a = 0; a < world.archetypes.size(); ++a) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(config.seed, 0x73706c, a));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    std::vector<char> in_train(n, 0);
    for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;
    for (std::size_t j = 0; j < n; ++j) {
      auto d = make_dialogue(config.seed, config, world.archetypes, a, j, response_tokens);
      (in_train[j] ? world.train : world.heldout).push_back(std::move(d));
    }
  }
  return world;
}

StructuredOutput expert_output(const DialogueRecord& prompt,
                               std::span<const PersonaArchetype> archetypes,
                               const Policy& policy) {
  const EmotionVocab& vocab = policy.emotions();
  const std::size_t e = vocab.size();
  const PersonaArchetype* self = find_archetype(archetypes, prompt.persona.id);
  std::vector<double> bias = self ? self->bias : std::vector<double>(e, 0.0);
  const double volatility = self ? self->volatility : 0.5;
  if (bias.size() != e) fail(ErrorCode::kInvalidArgument, "archetype bias size mismatch");

  const LabelId elicited{
      static_cast<std::uint16_t>(appraisal(vocab)[prompt.label.top_label().index()])};
  WeightedEmotionSet self_set = mixed_label(elicited, bias, volatility, 1.0, nullptr);
  const LabelId first = self_set.entries().front().first;
  std::vector<LabelWeight> quantized;
  for (const auto& [label, w] : self_set.entries()) {
    quantized.emplace_back(label, weight_to_bucket(w) / static_cast<double>(kWeightBuckets));
  }

  std::vector<LabelWeight> other;
  for (const auto& [label, w] : prompt.label.entries()) {
    other.emplace_back(label, weight_to_bucket(w) / static_cast<double>(kWeightBuckets));
  }

  const std::size_t len = std::min<std::size_t>(
      policy.config().max_response_len, 2 + hash_string(0, prompt.persona.id) % 3);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < len; ++i) {
    words.push_back(TokenVocab::response_name(expressive_token(
        first, static_cast<int>(i % 2), policy.config().response_tokens)));
  }
  return StructuredOutput{WeightedEmotionSet(std::move(other)),
                          WeightedEmotionSet(std::move(quantized)), join(words)};
}

ContextFeatures record_features(const DialogueRecord& record, const Policy& policy,
                                std::uint64_t feature_seed) {
  return featurize(record.context, record.persona.id, feature_seed,
                   policy.config().feature_dim);
}

EvalMetrics score_predictions(std::span<const ParseOutcome> predictions,
                              std::span<const DialogueRecord> heldout,
                              std::size_t vocab_size) {
  if (heldout.empty()) fail(ErrorCode::kInvalidArgument, "empty evaluation set");
  if (predictions.size() != heldout.size()) {
    fail(ErrorCode::kInvalidArgument, "predictions and records differ in length");
  }
  std::vector<double> tp(vocab_size, 0.0), fp(vocab_size, 0.0), fn(vocab_size, 0.0),
      support(vocab_size, 0.0);
  double correct = 0.0, reward_sum = 0.0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const LabelId gold = heldout[i].label.top_label();
    support.at(gold.index()) += 1.0;
    reward_sum += reward(predictions[i], heldout[i].label);
    if (!predictions[i].is_valid()) {
      fn[gold.index()] += 1.0;
      continue;
    }
    const LabelId pred = predictions[i].output().last_emotions.top_label();
    if (pred == gold) {
      correct += 1.0;
      tp[gold.index()] += 1.0;
    } else {
      fp.at(pred.index()) += 1.0;
      fn[gold.index()] += 1.0;
    }
  }
  const double n = static_cast<double>(heldout.size());
  EvalMetrics m;
  m.accuracy = correct / n;
  m.mean_reward = reward_sum / n;
  for (std::size_t c = 0; c < vocab_size; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    if (support[c] > 0.0 && denom > 0.0) m.weighted_f1 += support[c] / n * (2.0 * tp[c] / denom);
  }
  return m;
}

EvalMetrics eval_metrics(const Policy& policy, const PolicyParams& params,
                         std::span<const DialogueRecord> heldout, std::uint64_t feature_seed) {
  std::vector<ParseOutcome> predictions;
  predictions.reserve(heldout.size());
  for (const auto& d : heldout) {
    const auto tokens = policy.greedy(params, record_features(d, policy, feature_seed));
    auto decoded = policy.decode(tokens);
    predictions.push_back(decoded ? ParseOutcome::valid(std::move(*decoded))
                                  : ParseOutcome::invalid(ParseFailure::kMalformed));
  }
  return score_predictions(predictions, heldout, policy.emotions().size());
}

std::vector<PersonalityRow> personality_reward_report(
    std::span<const ArchivedRollout> archive, std::span<const PersonaArchetype> archetypes) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : archive) {
    auto& [sum, count] = acc[r.archetype];
    sum += r.record.primary_reward;
    ++count;
  }
  std::vector<PersonalityRow> rows;
  auto emit = [&](const std::string& id) {
    auto it = acc.find(id);
    if (it == acc.end()) return;
    rows.push_back({id, it->second.first / static_cast<double>(it->second.second),
                    it->second.second});
    acc.erase(it);
  };
  for (const auto& a : archetypes) emit(a.id);
  while (!acc.empty()) emit(acc.begin()->first);
  return rows;
}

}  // namespace selfemo
