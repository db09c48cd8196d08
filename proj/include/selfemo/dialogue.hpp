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

// Dialogue records shared by the synthetic world, the replay buffer and the
// policy featurizer.

#ifndef SELFEMO_DIALOGUE_HPP_
#define SELFEMO_DIALOGUE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "selfemo/emotion.hpp"

namespace selfemo {

struct Utterance {
  std::string speaker;  // persona id of the speaker
  std::string text;     // space-separated tokens

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Persona {
  std::string id;
  std::string traits;

  friend bool operator==(const Persona&, const Persona&) = default;
};

struct Provenance {
  enum class Kind { kOriginal, kSynthesized };
  Kind kind = Kind::kOriginal;
  int iteration = 0;           // synthesized only
  std::string source_prompt;   // synthesized only
  int source_rollout = -1;     // synthesized only
  double source_reward = 0.0;  // synthesized only

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// One prompt: context C, the responding persona PI and the target label for
// the last utterance.
struct DialogueRecord {
  std::string id;
  std::vector<Utterance> context;
  Persona persona;
  WeightedEmotionSet label;
  Provenance provenance;

  // Speaker of the final utterance, i.e. whose emotion is recognized.
  const std::string& last_speaker() const;

  friend bool operator==(const DialogueRecord&, const DialogueRecord&) = default;
};

}  // namespace selfemo

#endif  // SELFEMO_DIALOGUE_HPP_
