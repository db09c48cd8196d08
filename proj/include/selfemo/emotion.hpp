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

// Emotion vocabulary, weighted multi-label sets and the smoothed IOU reward.

#ifndef SELFEMO_EMOTION_HPP_
#define SELFEMO_EMOTION_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace selfemo {

inline constexpr std::size_t kMaxEmotionLabels = 3;
inline constexpr double kSmoothingBonus = 0.1;
inline constexpr double kNormalizationTolerance = 1e-12;

struct LabelId {
  std::uint16_t value = 0;

  constexpr std::size_t index() const { return value; }
  friend constexpr auto operator<=>(LabelId, LabelId) = default;
};

// Ordered label alphabet; the order defines every tie-break.
class EmotionVocab {
 public:
  explicit EmotionVocab(std::vector<std::string> labels);

  // neutral, surprise, fear, sadness, joy, disgust, anger
  static EmotionVocab default_vocab();

  std::size_t size() const { return labels_.size(); }
  const std::string& label(LabelId id) const { return labels_.at(id.index()); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<LabelId> find(std::string_view label) const;
  LabelId at(std::string_view label) const;  // throws on unknown label

  friend bool operator==(const EmotionVocab&, const EmotionVocab&) = default;

 private:
  std::vector<std::string> labels_;
};

using LabelWeight = std::pair<LabelId, double>;

// 1..3 distinct labels with strictly positive weights, in insertion order.
class WeightedEmotionSet {
 public:
  WeightedEmotionSet() = default;  // empty; only valid as a placeholder
  explicit WeightedEmotionSet(std::vector<LabelWeight> entries);

  static WeightedEmotionSet from_names(
      const EmotionVocab& vocab,
      std::initializer_list<std::pair<std::string_view, double>> entries);

  const std::vector<LabelWeight>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(LabelId label) const;
  double weight(LabelId label) const;  // 0 when absent
  double total() const;

  // Highest weight; ties go to the earlier vocabulary label.
  LabelId top_label() const;

  friend bool operator==(const WeightedEmotionSet&,
                         const WeightedEmotionSet&) = default;

 private:
  std::vector<LabelWeight> entries_;
};

// Weights summing to one over a support of at most three labels.
class EmotionDistribution {
 public:
  EmotionDistribution() = default;
  explicit EmotionDistribution(std::vector<LabelWeight> entries);

  const std::vector<LabelWeight>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  double weight(LabelId label) const;

 private:
  std::vector<LabelWeight> entries_;
};

struct StructuredOutput {
  WeightedEmotionSet last_emotions;
  WeightedEmotionSet my_emotions;
  std::string my_output;

  friend bool operator==(const StructuredOutput&,
                         const StructuredOutput&) = default;
};

enum class ParseFailure {
  kNoDict,
  kBadKeys,
  kUnknownLabel,
  kNonpositiveWeight,
  kTooManyLabels,
  kEmptyResponse,
  kMalformed,
};

const char* parse_failure_name(ParseFailure failure);

class ParseOutcome {
 public:
  static ParseOutcome valid(StructuredOutput output) {
    return ParseOutcome(std::move(output));
  }
  static ParseOutcome invalid(ParseFailure reason) {
    return ParseOutcome(reason);
  }

  bool is_valid() const {
    return std::holds_alternative<StructuredOutput>(value_);
  }
  const StructuredOutput& output() const;
  ParseFailure failure() const;

  friend bool operator==(const ParseOutcome&, const ParseOutcome&) = default;

 private:
  explicit ParseOutcome(StructuredOutput output) : value_(std::move(output)) {}
  explicit ParseOutcome(ParseFailure reason) : value_(reason) {}

  std::variant<StructuredOutput, ParseFailure> value_;
};

// The rule() gate: an optional leading <think>...</think> block followed by
// exactly one dict with keys last_emotions, my_emotions and my_output.
ParseOutcome parse_structured_output(std::string_view text,
                                     const EmotionVocab& vocab);

// Canonical form: double quotes, fixed key order, weights with 4 decimals.
std::string serialize_structured_output(const StructuredOutput& output,
                                        const EmotionVocab& vocab);

EmotionDistribution normalize(const WeightedEmotionSet& set);

// Sum of minima over sum of maxima across the union of supports.
double weighted_iou(const EmotionDistribution& p, const EmotionDistribution& l);

// 0 for an invalid outcome, otherwise IOU + 0.1.
double reward(const ParseOutcome& outcome, const WeightedEmotionSet& label);

}  // namespace selfemo

#endif  // SELFEMO_EMOTION_HPP_
