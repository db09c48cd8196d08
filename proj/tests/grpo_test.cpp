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

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "selfemo/error.hpp"
#include "selfemo/grpo.hpp"
#include "selfemo/rng.hpp"

namespace selfemo {
namespace {

const EmotionVocab& vocab() {
  static const EmotionVocab v = EmotionVocab::default_vocab();
  return v;
}

ParseOutcome predicting(std::initializer_list<std::pair<std::string_view, double>> e) {
  return ParseOutcome::valid(StructuredOutput{WeightedEmotionSet::from_names(vocab(), e),
                                              WeightedEmotionSet::from_names(vocab(), {{"joy", 1}}),
                                              "r1"});
}

LabelId L(std::string_view name) { return vocab().at(name); }

TEST(Consensus, DegenerateAgreement) {
  std::vector<ParseOutcome> group(8, predicting({{"joy", 1.0}}));
  auto c = consensus(std::span<const ParseOutcome>(group), vocab().size());
  ASSERT_TRUE(c);
  EXPECT_EQ(c->p_tilde[L("joy").index()], 1.0);
  ASSERT_EQ(c->top3.size(), 1u);
  EXPECT_EQ(c->top3[0], L("joy"));
  EXPECT_EQ(c->p_star[L("joy").index()], 1.0);
}

TEST(Consensus, ThreeRolloutsAgainstHandEnumeration) {
  std::vector<ParseOutcome> group = {predicting({{"joy", 1.0}}),
                                     predicting({{"joy", 0.5}, {"neutral", 0.5}}),
                                     predicting({{"sadness", 0.6}, {"anger", 0.4}})};
  // Pooled mass in thirtieths: joy 15, sadness 6, neutral 5, anger 4; the
  // top three carry 26.
  auto c = consensus(std::span<const ParseOutcome>(group), vocab().size());
  ASSERT_TRUE(c);
  EXPECT_NEAR(c->p_tilde[L("joy").index()], 15.0 / 30.0, 1e-12);
  EXPECT_NEAR(c->p_tilde[L("sadness").index()], 6.0 / 30.0, 1e-12);
  EXPECT_NEAR(c->p_tilde[L("neutral").index()], 5.0 / 30.0, 1e-12);
  EXPECT_NEAR(c->p_tilde[L("anger").index()], 4.0 / 30.0, 1e-12);
  ASSERT_EQ(c->top3, (std::vector<LabelId>{L("joy"), L("sadness"), L("neutral")}));
  EXPECT_NEAR(c->p_star[L("joy").index()], 15.0 / 26.0, 1e-12);
  EXPECT_NEAR(c->p_star[L("sadness").index()], 6.0 / 26.0, 1e-12);
  EXPECT_NEAR(c->p_star[L("neutral").index()], 5.0 / 26.0, 1e-12);
  EXPECT_EQ(c->p_star[L("anger").index()], 0.0);
  EXPECT_NEAR(c->p_star[L("joy").index()], 0.5769, 1e-4);

  EXPECT_NEAR(secondary_reward(group[0], c->top3), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(secondary_reward(group[1], c->top3), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(secondary_reward(group[2], c->top3), 1.0 / 3.0, 1e-15);
}

TEST(Consensus, AllInvalidAndInvalidSlots) {
  std::vector<ParseOutcome> one = {ParseOutcome::invalid(ParseFailure::kMalformed)};
  EXPECT_FALSE(consensus(std::span<const ParseOutcome>(one), vocab().size()));
  std::vector<ParseOutcome> mixed = {ParseOutcome::invalid(ParseFailure::kMalformed),
                                     predicting({{"fear", 1.0}})};
  auto c = consensus(std::span<const ParseOutcome>(mixed), vocab().size());
  ASSERT_TRUE(c);
  EXPECT_EQ(c->p_tilde[L("fear").index()], 1.0);
  EXPECT_EQ(secondary_reward(mixed[0], c->top3), 0.0);
}

TEST(Consensus, RankThreeTieUsesVocabOrder) {
  std::vector<ParseOutcome> group = {predicting({{"anger", 0.5}, {"joy", 0.5}}),
                                     predicting({{"fear", 0.5}, {"surprise", 0.5}})};
  auto c = consensus(std::span<const ParseOutcome>(group), vocab().size());
  ASSERT_TRUE(c);
  EXPECT_EQ(c->top3, (std::vector<LabelId>{L("surprise"), L("fear"), L("joy")}));
}

TEST(SecondaryReward, FullAndEmpty) {
  std::vector<LabelId> top3 = {L("joy"), L("sadness"), L("neutral")};
  EXPECT_EQ(secondary_reward(predicting({{"joy", 1}, {"sadness", 1}, {"neutral", 1}}), top3), 1.0);
  EXPECT_EQ(secondary_reward(predicting({{"anger", 1}}), top3), 0.0);
}

TEST(LambdaSchedule, EndpointsAndContract) {
  EXPECT_EQ(lambda_schedule(0, 100), 0.0);
  EXPECT_EQ(lambda_schedule(100, 100), 1.0);
  EXPECT_EQ(lambda_schedule(25, 100), 0.25);
  EXPECT_THROW(lambda_schedule(101, 100), Error);
  EXPECT_THROW(lambda_schedule(-1, 100), Error);
  EXPECT_THROW(lambda_schedule(0, 0), Error);
}

TEST(Advantages, Examples) {
  const std::vector<double> flat_r = {0.4, 0.4, 0.4};
  const std::vector<double> flat_s = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (double a : advantages(flat_r, flat_s, 0.7).values) EXPECT_EQ(a, 0.0);

  const std::vector<double> r = {1.1, 0.1};
  const auto a0 = advantages(r, std::vector<double>{1, 0}, 0.0);
  EXPECT_NEAR(a0.values[0], 1.0, 1e-12);
  EXPECT_NEAR(a0.values[1], -1.0, 1e-12);
  EXPECT_NEAR(a0.sigma_r, 0.5, 1e-12);
  const auto a1 = advantages(r, std::vector<double>{0, 1}, 1.0);
  EXPECT_NEAR(a1.values[0], 0.0, 1e-12);
  EXPECT_NEAR(a1.values[1], 0.0, 1e-12);
}

TEST(Advantages, Contract) {
  EXPECT_THROW(advantages(std::vector<double>{1, 2}, std::vector<double>{1}, 0.5), Error);
  EXPECT_THROW(advantages(std::vector<double>{1, 2}, std::vector<double>{1, 2}, 1.5), Error);
  EXPECT_THROW(advantages(std::vector<double>{}, std::vector<double>{}, 0.5), Error);
}

TEST(Advantages, ZeroMeanAndAffineInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    std::vector<double> r(n);
    std::vector<double> s(n);
    for (auto& x : r) x = rng.below(3) == 0 ? 0.0 : 0.1 + rng.uniform();
    for (auto& x : s) x = static_cast<double>(rng.below(4)) / 3.0;
    const double lambda = rng.uniform();
    const auto a = advantages(r, s, lambda);
    double mean = 0.0;
    for (double v : a.values) mean += v;
    mean /= static_cast<double>(n);
    EXPECT_NEAR(mean, 0.0, 1e-9);

    double m = 0.0;
    double sd = 0.0;
    testing::mean_std(r, m, sd);
    EXPECT_NEAR(a.mu_r, m, 1e-12);
    EXPECT_NEAR(a.sigma_r, sd, 1e-12);

    const double scale = 0.1 + 5.0 * rng.uniform();
    const double shift = -2.0 + 4.0 * rng.uniform();
    std::vector<double> r2(n);
    for (std::size_t i = 0; i < n; ++i) r2[i] = scale * r[i] + shift;
    const auto b = advantages(r2, s, lambda);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-9);
  }
}

TEST(SurrogateLoss, RatioOne) {
  const std::vector<double> lp = {-1.0, -2.0, -3.0};
  const std::vector<double> adv = {0.5, -1.5, 2.0};
  const auto s = surrogate_loss(lp, lp, adv, ClipConfig{0.2});
  EXPECT_NEAR(s.loss, 1.0 / 3.0, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.grad_scale[i], adv[i] / 3.0, 1e-12);
}

TEST(SurrogateLoss, ClipBranches) {
  const double eps = 0.2;
  const std::vector<double> old = {0.0};
  const std::vector<double> now = {std::log(1.0 + 2.0 * eps)};
  const auto pos = surrogate_loss(now, old, std::vector<double>{1.0}, ClipConfig{eps});
  EXPECT_NEAR(pos.loss, 1.0 + eps, 1e-12);
  EXPECT_EQ(pos.grad_scale[0], 0.0);
  EXPECT_TRUE(pos.clipped[0]);

  const auto neg = surrogate_loss(now, old, std::vector<double>{-1.0}, ClipConfig{eps});
  EXPECT_NEAR(neg.loss, -(1.0 + 2.0 * eps), 1e-12);
  EXPECT_NEAR(neg.grad_scale[0], -(1.0 + 2.0 * eps), 1e-12);
  // finite-difference probe in the log-probability
  const double h = 1e-6;
  const double up = surrogate_loss(std::vector<double>{now[0] + h}, old,
                                   std::vector<double>{-1.0}, ClipConfig{eps}).loss;
  const double down = surrogate_loss(std::vector<double>{now[0] - h}, old,
                                     std::vector<double>{-1.0}, ClipConfig{eps}).loss;
  EXPECT_NEAR((up - down) / (2 * h), neg.grad_scale[0], 1e-6);
}

TEST(SurrogateLoss, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  const ClipConfig clip{0.2};
  int checked = 0;
  while (checked < 100) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<double> old(n), now(n), adv(n);
    bool near_edge = false;
    for (std::size_t i = 0; i < n; ++i) {
      old[i] = -5.0 * rng.uniform();
      now[i] = old[i] + 0.6 * (rng.uniform() - 0.5);
      adv[i] = 2.0 * rng.normal();
      const double rho = std::exp(now[i] - old[i]);
      near_edge |= std::abs(rho - 0.8) < 1e-3 || std::abs(rho - 1.2) < 1e-3;
    }
    if (near_edge) continue;
    const auto s = surrogate_loss(now, old, adv, clip);
    for (std::size_t i = 0; i < n; ++i) {
      const double h = 1e-6;
      auto up = now;
      auto down = now;
      up[i] += h;
      down[i] -= h;
      const double fd = (surrogate_loss(up, old, adv, clip).loss -
                         surrogate_loss(down, old, adv, clip).loss) / (2 * h);
      if (s.clipped[i]) {
        EXPECT_EQ(s.grad_scale[i], 0.0);
        EXPECT_NEAR(fd, 0.0, 1e-8);
      } else {
        EXPECT_LT(std::abs(fd - s.grad_scale[i]), 1e-4 * std::max(1e-8, std::abs(fd)) + 1e-10);
      }
    }
    ++checked;
  }
}

TEST(SurrogateLoss, NonFiniteRatio) {
  EXPECT_THROW(surrogate_loss(std::vector<double>{0.0}, std::vector<double>{-60.0},
                              std::vector<double>{1.0}, ClipConfig{}),
               Error);
  EXPECT_THROW(ClipConfig{1.5}.validate(), Error);
}

}  // namespace
}  // namespace selfemo
