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

#include "selfemo/emotion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "selfemo/error.hpp"

namespace selfemo {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kAllInvalid: return "ALL_INVALID";
    case ErrorCode::kNonFinite: return "NONFINITE";
    case ErrorCode::kUngrammatical: return "UNGRAMMATICAL";
    case ErrorCode::kDiverged: return "DIVERGED";
    case ErrorCode::kConfig: return "CONFIG";
    case ErrorCode::kOutputExists: return "OUTPUT_EXISTS";
    case ErrorCode::kMissingInput: return "MISSING_INPUT";
    case ErrorCode::kIo: return "IO";
    case ErrorCode::kRuntime: return "RUNTIME";
  }
  return "UNKNOWN";
}

EmotionVocab::EmotionVocab(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  if (labels_.empty()) fail(ErrorCode::kInvalidArgument, "empty emotion vocabulary");
  if (labels_.size() > 0xffff) fail(ErrorCode::kInvalidArgument, "emotion vocabulary too large");
  std::set<std::string_view> seen;
  for (const auto& l : labels_) {
    if (l.empty()) fail(ErrorCode::kInvalidArgument, "empty emotion label");
    for (char c : l) {
      if (c >= 'A' && c <= 'Z') {
        fail(ErrorCode::kInvalidArgument, "emotion label must be lowercase: " + l);
      }
    }
    if (!seen.insert(l).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate emotion label: " + l);
    }
  }
}

EmotionVocab EmotionVocab::default_vocab() {
  return EmotionVocab({"neutral", "surprise", "fear", "sadness", "joy",
                       "disgust", "anger"});
}

std::optional<LabelId> EmotionVocab::find(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return LabelId{static_cast<std::uint16_t>(i)};
  }
  return std::nullopt;
}

LabelId EmotionVocab::at(std::string_view label) const {
  auto id = find(label);
  if (!id) fail(ErrorCode::kInvalidArgument, "unknown emotion label: " + std::string(label));
  return *id;
}

WeightedEmotionSet::WeightedEmotionSet(std::vector<LabelWeight> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty() || entries_.size() > kMaxEmotionLabels) {
    fail(ErrorCode::kInvalidArgument, "weighted emotion set needs 1 to 3 entries");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const double w = entries_[i].second;
    if (!(w > 0.0) || !std::isfinite(w)) {
      fail(ErrorCode::kInvalidArgument, "emotion weights must be positive and finite");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[j].first == entries_[i].first) {
        fail(ErrorCode::kInvalidArgument, "duplicate label in weighted emotion set");
      }
    }
  }
}

WeightedEmotionSet WeightedEmotionSet::from_names(
    const EmotionVocab& vocab,
    std::initializer_list<std::pair<std::string_view, double>> entries) {
  std::vector<LabelWeight> out;
  for (const auto& [name, w] : entries) out.emplace_back(vocab.at(name), w);
  return WeightedEmotionSet(std::move(out));
}

bool WeightedEmotionSet::contains(LabelId label) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const LabelWeight& e) { return e.first == label; });
}

double WeightedEmotionSet::weight(LabelId label) const {
  for (const auto& [l, w] : entries_) {
    if (l == label) return w;
  }
  return 0.0;
}

double WeightedEmotionSet::total() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.second;
  return s;
}

LabelId WeightedEmotionSet::top_label() const {
  if (entries_.empty()) fail(ErrorCode::kInvalidArgument, "top_label of empty set");
  LabelWeight best = entries_.front();
  for (const auto& e : entries_) {
    if (e.second > best.second || (e.second == best.second && e.first < best.first)) {
      best = e;
    }
  }
  return best.first;
}

EmotionDistribution::EmotionDistribution(std::vector<LabelWeight> entries)
    : entries_(std::move(entries)) {
  double s = 0.0;
  for (const auto& e : entries_) s += e.second;
  if (entries_.size() > kMaxEmotionLabels ||
      (!entries_.empty() && std::abs(s - 1.0) > kNormalizationTolerance)) {
    fail(ErrorCode::kInvalidArgument, "emotion distribution must sum to 1 over at most 3 labels");
  }
}

double EmotionDistribution::weight(LabelId label) const {
  for (const auto& [l, w] : entries_) {
    if (l == label) return w;
  }
  return 0.0;
}

const StructuredOutput& ParseOutcome::output() const {
  if (!is_valid()) fail(ErrorCode::kInvalidArgument, "output() on invalid parse outcome");
  return std::get<StructuredOutput>(value_);
}

ParseFailure ParseOutcome::failure() const {
  if (is_valid()) fail(ErrorCode::kInvalidArgument, "failure() on valid parse outcome");
  return std::get<ParseFailure>(value_);
}

EmotionDistribution normalize(const WeightedEmotionSet& set) {
  const double total = set.total();
  std::vector<LabelWeight> out;
  out.reserve(set.size());
  for (const auto& [label, w] : set.entries()) out.emplace_back(label, w / total);
  return EmotionDistribution(std::move(out));
}

double weighted_iou(const EmotionDistribution& p, const EmotionDistribution& l) {
  double sum_min = 0.0;
  double sum_max = 0.0;
  for (const auto& [label, wp] : p.entries()) {
    const double wl = l.weight(label);
    sum_min += std::min(wp, wl);
    sum_max += std::max(wp, wl);
  }
  for (const auto& [label, wl] : l.entries()) {
    if (p.weight(label) == 0.0) sum_max += wl;
  }
  if (sum_max <= 0.0) return 0.0;
  return sum_min / sum_max;
}

double reward(const ParseOutcome& outcome, const WeightedEmotionSet& label) {
  if (!outcome.is_valid()) return 0.0;
  return weighted_iou(normalize(outcome.output().last_emotions), normalize(label)) +
         kSmoothingBonus;
}

}  // namespace selfemo
