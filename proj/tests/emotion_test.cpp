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

#include <gtest/gtest.h>

#include <string>

#include "oracles.hpp"
#include "selfemo/emotion.hpp"
#include "selfemo/error.hpp"
#include "selfemo/rng.hpp"

namespace selfemo {
namespace {

const EmotionVocab& vocab() {
  static const EmotionVocab v = EmotionVocab::default_vocab();
  return v;
}

WeightedEmotionSet set(std::initializer_list<std::pair<std::string_view, double>> e) {
  return WeightedEmotionSet::from_names(vocab(), e);
}

ParseFailure failure_of(const std::string& text) {
  auto outcome = parse_structured_output(text, vocab());
  EXPECT_FALSE(outcome.is_valid()) << text;
  return outcome.is_valid() ? ParseFailure::kMalformed : outcome.failure();
}

constexpr const char* kWorkedAnswer =
    "<think>So, we're analyzing the last speaker as neutral and surprise.</think>"
    "{'last_emotions': {'neutral': 0.8, 'surprise': 0.6}, 'my_emotions': {'joy': 0.6}, "
    "'my_output': \"Yeah, that sounds intense\xE2\x80\x94\"}";

TEST(EmotionVocab, DefaultOrder) {
  ASSERT_EQ(vocab().size(), 7u);
  EXPECT_EQ(vocab().label(LabelId{0}), "neutral");
  EXPECT_EQ(vocab().label(LabelId{6}), "anger");
  EXPECT_EQ(vocab().find("joy")->index(), 4u);
  EXPECT_FALSE(vocab().find("curiosity"));
}

TEST(EmotionVocab, RejectsDuplicatesAndUppercase) {
  EXPECT_THROW(EmotionVocab({"joy", "joy"}), Error);
  EXPECT_THROW(EmotionVocab({"Joy"}), Error);
  EXPECT_THROW(EmotionVocab(std::vector<std::string>{}), Error);
}

TEST(WeightedEmotionSet, Invariants) {
  EXPECT_THROW(set({}), Error);
  EXPECT_THROW(set({{"joy", 0.0}}), Error);
  EXPECT_THROW(set({{"joy", 1.0}, {"joy", 0.5}}), Error);
  EXPECT_THROW(set({{"joy", 0.1}, {"fear", 0.1}, {"anger", 0.1}, {"neutral", 0.1}}), Error);
  EXPECT_EQ(set({{"joy", 0.5}, {"neutral", 0.5}}).top_label(), vocab().at("neutral"));
}

TEST(ParseStructuredOutput, WorkedExampleAnswer) {
  auto outcome = parse_structured_output(kWorkedAnswer, vocab());
  ASSERT_TRUE(outcome.is_valid());
  EXPECT_EQ(outcome.output().last_emotions, set({{"neutral", 0.8}, {"surprise", 0.6}}));
  EXPECT_EQ(outcome.output().my_emotions, set({{"joy", 0.6}}));
  EXPECT_EQ(outcome.output().my_output, "Yeah, that sounds intense\xE2\x80\x94");
}

TEST(ParseStructuredOutput, FailureCodes) {
  EXPECT_EQ(failure_of("{}"), ParseFailure::kBadKeys);
  EXPECT_EQ(failure_of("no dictionary here"), ParseFailure::kNoDict);
  EXPECT_EQ(failure_of("<think>unterminated {'a': 1}"), ParseFailure::kNoDict);
  EXPECT_EQ(failure_of("{'last_emotions': {'neutral': 0.5, 'joy': 0.3, 'fear': 0.2, "
                       "'anger': 0.1}, 'my_emotions': {'joy': 1.0}, 'my_output': 'hi'}"),
            ParseFailure::kTooManyLabels);
  EXPECT_EQ(failure_of("{'last_emotions': {'curiosity': 0.5}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': 'hi'}"),
            ParseFailure::kUnknownLabel);
  EXPECT_EQ(failure_of("{'last_emotions': {'joy': 0}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': 'hi'}"),
            ParseFailure::kNonpositiveWeight);
  EXPECT_EQ(failure_of("{'last_emotions': {'joy': -0.5}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': 'hi'}"),
            ParseFailure::kNonpositiveWeight);
  EXPECT_EQ(failure_of("{'last_emotions': {'joy': 1}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': '   '}"),
            ParseFailure::kEmptyResponse);
  EXPECT_EQ(failure_of("{'last_emotions': {'joy': 1, 'joy': 2}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': 'x'}"),
            ParseFailure::kMalformed);
  EXPECT_EQ(failure_of("{'last_emotions': {'joy': 1e-1}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': 'x'}"),
            ParseFailure::kMalformed);
  EXPECT_EQ(failure_of("{'last_emotions': {'joy': 1}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': 'x'"),
            ParseFailure::kMalformed);
  EXPECT_EQ(failure_of("{'last_emotions': {'joy': 1}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': 'x'} {'again': 1}"),
            ParseFailure::kMalformed);
  EXPECT_EQ(failure_of("{'last_emotions': {'joy': 1}, 'my_emotions': {'joy': 1.0}, "
                       "'my_output': 'x', 'extra': 'y'}"),
            ParseFailure::kBadKeys);
  EXPECT_EQ(failure_of("{'last_emotions': {}, 'my_emotions': {'joy': 1.0}, 'my_output': 'x'}"),
            ParseFailure::kMalformed);
  EXPECT_EQ(failure_of("{'last_emotions': 'joy', 'my_emotions': {'joy': 1.0}, 'my_output': 'x'}"),
            ParseFailure::kMalformed);
}

TEST(ParseStructuredOutput, EarliestCodeWinsAcrossFields) {
  // unknown label in one sub-dict beats too many labels in the other
  EXPECT_EQ(failure_of("{'last_emotions': {'neutral': 0.5, 'joy': 0.3, 'fear': 0.2, "
                       "'anger': 0.1}, 'my_emotions': {'bliss': 1.0}, 'my_output': 'hi'}"),
            ParseFailure::kUnknownLabel);
}

TEST(ParseStructuredOutput, AcceptsQuotesOrderAndSurroundingText) {
  auto outcome = parse_structured_output(
      "Here you go:\n{\"my_output\": 'it\\'s fine', \"my_emotions\": {\"joy\": 2.5},"
      " \"last_emotions\": {\"fear\": .25,},} thanks",
      vocab());
  ASSERT_TRUE(outcome.is_valid());
  EXPECT_EQ(outcome.output().my_output, "it's fine");
  EXPECT_DOUBLE_EQ(outcome.output().last_emotions.weight(vocab().at("fear")), 0.25);
  EXPECT_DOUBLE_EQ(outcome.output().my_emotions.weight(vocab().at("joy")), 2.5);
}

TEST(Serialize, CanonicalForm) {
  StructuredOutput out{set({{"neutral", 0.8}, {"surprise", 0.6}}), set({{"joy", 0.6}}),
                       "say \"hi\"\\"};
  const std::string text = serialize_structured_output(out, vocab());
  EXPECT_EQ(text,
            "{\"last_emotions\": {\"neutral\": 0.8000, \"surprise\": 0.6000}, "
            "\"my_emotions\": {\"joy\": 0.6000}, \"my_output\": \"say \\\"hi\\\"\\\\\"}");
  auto back = parse_structured_output(text, vocab());
  ASSERT_TRUE(back.is_valid());
  EXPECT_EQ(back.output(), out);
  EXPECT_EQ(serialize_structured_output(back.output(), vocab()), text);
}

TEST(Serialize, RoundTripProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    auto random_set = [&] {
      std::vector<LabelWeight> e;
      const std::size_t n = 1 + rng.below(3);
      while (e.size() < n) {
        LabelId l{static_cast<std::uint16_t>(rng.below(vocab().size()))};
        bool dup = false;
        for (auto& x : e) dup |= x.first == l;
        if (!dup) e.emplace_back(l, static_cast<double>(1 + rng.below(10000)) / 1000.0);
      }
      return WeightedEmotionSet(e);
    };
    StructuredOutput out{random_set(), random_set(), "r" + std::to_string(rng.below(99)) + " '\n'"};
    const std::string text = serialize_structured_output(out, vocab());
    auto back = parse_structured_output(text, vocab());
    ASSERT_TRUE(back.is_valid()) << text;
    ASSERT_EQ(back.output(), out) << text;
    ASSERT_EQ(serialize_structured_output(back.output(), vocab()), text);
  }
}

TEST(Normalize, Examples) {
  auto single = normalize(set({{"joy", 1.0}}));
  EXPECT_EQ(single.weight(vocab().at("joy")), 1.0);
  auto pair = normalize(set({{"neutral", 0.8}, {"surprise", 0.6}}));
  EXPECT_NEAR(pair.weight(vocab().at("neutral")), 0.8 / 1.4, 1e-12);
  EXPECT_NEAR(pair.weight(vocab().at("surprise")), 0.6 / 1.4, 1e-12);
  auto gold = normalize(set({{"neutral", 0.85}, {"surprise", 0.45}, {"fear", 0.25}}));
  EXPECT_NEAR(gold.weight(vocab().at("neutral")), 0.85 / 1.55, 1e-12);
  EXPECT_NEAR(gold.weight(vocab().at("surprise")), 0.45 / 1.55, 1e-12);
  EXPECT_NEAR(gold.weight(vocab().at("fear")), 0.25 / 1.55, 1e-12);
  EXPECT_EQ(gold.entries().size(), 3u);
}

TEST(WeightedIou, IdentityAndDisjoint) {
  auto p = normalize(set({{"neutral", 0.3}, {"fear", 0.9}}));
  EXPECT_NEAR(weighted_iou(p, p), 1.0, 1e-12);
  EXPECT_EQ(weighted_iou(normalize(set({{"joy", 1.0}})), normalize(set({{"anger", 1.0}}))), 0.0);
}

TEST(WeightedIou, WorkedPairAgainstExactOracle) {
  // neutral=0, surprise=1, fear=2; weights in hundredths
  const testing::Fraction exact =
      testing::iou_exact({{0, 80}, {1, 60}}, {{0, 85}, {1, 45}, {2, 25}}, 7);
  EXPECT_EQ(exact.num, 13);
  EXPECT_EQ(exact.den, 18);
  auto p = normalize(set({{"neutral", 0.8}, {"surprise", 0.6}}));
  auto l = normalize(set({{"neutral", 0.85}, {"surprise", 0.45}, {"fear", 0.25}}));
  EXPECT_NEAR(weighted_iou(p, l), exact.value(), 1e-12);
  EXPECT_NEAR(weighted_iou(p, l), 0.7222, 1e-4);
}

TEST(WeightedIou, SymmetricAndIdentityRelation) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    auto draw = [&] {
      std::vector<LabelWeight> e;
      const std::size_t n = 1 + rng.below(3);
      while (e.size() < n) {
        LabelId l{static_cast<std::uint16_t>(rng.below(4))};
        bool dup = false;
        for (auto& x : e) dup |= x.first == l;
        if (!dup) e.emplace_back(l, 0.05 + rng.uniform());
      }
      return normalize(WeightedEmotionSet(e));
    };
    auto p = draw();
    auto l = draw();
    const double iou = weighted_iou(p, l);
    EXPECT_NEAR(iou, weighted_iou(l, p), 1e-15);
    double smin = 0.0;
    double smax = 0.0;
    for (std::uint16_t e = 0; e < 4; ++e) {
      smin += std::min(p.weight(LabelId{e}), l.weight(LabelId{e}));
      smax += std::max(p.weight(LabelId{e}), l.weight(LabelId{e}));
    }
    EXPECT_NEAR(smin + smax, 2.0, 1e-12);
    EXPECT_NEAR(iou, smin / (2.0 - smin), 1e-12);
    EXPECT_GE(iou, 0.0);
    EXPECT_LE(iou, 1.0);
  }
}

TEST(Reward, Contract) {
  const auto label = set({{"neutral", 0.85}, {"surprise", 0.45}, {"fear", 0.25}});
  EXPECT_EQ(reward(parse_structured_output("garbage", vocab()), label), 0.0);
  EXPECT_EQ(reward(ParseOutcome::invalid(ParseFailure::kBadKeys), label), 0.0);
  const double worked = reward(parse_structured_output(kWorkedAnswer, vocab()), label);
  EXPECT_NEAR(worked, 13.0 / 18.0 + 0.1, 1e-12);
  EXPECT_NEAR(worked, 0.8222, 1e-3);
  StructuredOutput exact{label, set({{"joy", 1.0}}), "ok"};
  EXPECT_NEAR(reward(ParseOutcome::valid(exact), label), 1.1, 1e-12);
  StructuredOutput disjoint{set({{"anger", 1.0}}), set({{"joy", 1.0}}), "ok"};
  EXPECT_NEAR(reward(ParseOutcome::valid(disjoint), label), 0.1, 1e-15);
}

}  // namespace
}  // namespace selfemo
