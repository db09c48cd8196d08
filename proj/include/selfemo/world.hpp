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

// Seeded synthetic world: persona archetypes with emotion biases, dialogue
// contexts, gold weighted labels and the scripted expert used for
// cold-start targets.

#ifndef SELFEMO_WORLD_HPP_
#define SELFEMO_WORLD_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfemo/archive.hpp"
#include "selfemo/dialogue.hpp"
#include "selfemo/emotion.hpp"
#include "selfemo/policy.hpp"

namespace selfemo {

struct PersonaArchetype {
  std::string id;
  std::string traits;
  std::vector<double> bias;  // one entry per emotion label
  double volatility = 0.0;

  friend bool operator==(const PersonaArchetype&, const PersonaArchetype&) = default;
};

// The five built-in archetypes, from calm (volatility 0) to confrontational.
std::vector<PersonaArchetype> default_archetypes(const EmotionVocab& vocab);

struct WorldConfig {
  std::uint64_t seed = 0;
  std::size_t archetypes = 5;
  std::size_t dialogues_per_archetype = 40;
  double train_fraction = 0.8;
  double noise = 1.0;
  // When non-empty, used instead of the built-in archetypes.
  std::vector<PersonaArchetype> custom_archetypes;

  void validate() const;
};

struct World {
  std::vector<PersonaArchetype> archetypes;
  std::vector<DialogueRecord> train;
  std::vector<DialogueRecord> heldout;
};

World generate_world(const WorldConfig& config, const EmotionVocab& vocab,
                     std::size_t response_tokens = 16);

// Response tokens that express an emotion in the synthetic dialogues.
std::size_t expressive_token(LabelId emotion, int variant, std::size_t response_tokens);

// Target output for a prompt: its label as last_emotions, plus the
// persona-conditioned self emotion and response of the scripted expert.
StructuredOutput expert_output(const DialogueRecord& prompt,
                               std::span<const PersonaArchetype> archetypes,
                               const Policy& policy);

ContextFeatures record_features(const DialogueRecord& record, const Policy& policy,
                                std::uint64_t feature_seed);

struct EvalMetrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  double mean_reward = 0.0;

  friend bool operator==(const EvalMetrics&, const EvalMetrics&) = default;
};

// Top-1 accuracy, support-weighted F1 over top-1 labels and mean reward of
// the given outcomes against each record's label.
EvalMetrics score_predictions(std::span<const ParseOutcome> predictions,
                              std::span<const DialogueRecord> heldout,
                              std::size_t vocab_size);

// Greedy-decodes every held-out prompt and scores it.
EvalMetrics eval_metrics(const Policy& policy, const PolicyParams& params,
                         std::span<const DialogueRecord> heldout, std::uint64_t feature_seed);

struct PersonalityRow {
  std::string archetype;
  double mean_reward = 0.0;
  std::size_t count = 0;

  friend bool operator==(const PersonalityRow&, const PersonalityRow&) = default;
};

// Mean primary reward per last-speaker archetype, in archetype order.
std::vector<PersonalityRow> personality_reward_report(
    std::span<const ArchivedRollout> archive, std::span<const PersonaArchetype> archetypes);

}  // namespace selfemo

#endif  // SELFEMO_WORLD_HPP_
