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

#include <algorithm>
#include <map>
#include <set>

#include "selfemo/error.hpp"
#include "selfemo/flywheel.hpp"

namespace selfemo {
namespace {

const EmotionVocab& vocab() {
  static const EmotionVocab v = EmotionVocab::default_vocab();
  return v;
}

World small_world(std::size_t per_archetype = 10, std::size_t archetypes = 2) {
  WorldConfig c;
  c.seed = 3;
  c.archetypes = archetypes;
  c.dialogues_per_archetype = per_archetype;
  return generate_world(c, vocab());
}

FlywheelConfig small_config() {
  FlywheelConfig c;
  c.iterations = 2;
  c.prompts_per_pass = 8;
  c.cold_start_epochs = 60;
  c.retrain_epochs = 40;
  c.probe_prompts = 4;
  c.probe_samples = 8;
  c.seed = 77;
  return c;
}

Flywheel make(const World& w, FlywheelConfig c = small_config()) {
  return Flywheel(Policy(vocab(), PolicyConfig{}), c, w.archetypes, w.heldout, 9);
}

ArchivedRollout scored(const std::string& prompt, int index, double r) {
  ArchivedRollout a;
  a.index = index;
  a.record.prompt_id = prompt;
  a.record.primary_reward = r;
  if (r > 0) {
    a.record.outcome = ParseOutcome::valid(
        {WeightedEmotionSet::from_names(vocab(), {{"joy", 0.5}}),
         WeightedEmotionSet::from_names(vocab(), {{"sadness", 0.7}, {"fear", 0.2}}),
         "r" + std::to_string(index)});
  }
  return a;
}

DialogueRecord prompt_record() {
  DialogueRecord d;
  d.id = "p";
  d.context = {{"a0", "r1 f2"}, {"a1", "r3 r4"}};
  d.persona = {"a0", "calm"};
  d.label = WeightedEmotionSet::from_names(vocab(), {{"joy", 1.0}});
  return d;
}

TEST(SelectBest, ArgmaxAndTies) {
  const DialogueRecord p = prompt_record();
  std::vector<ArchivedRollout> a = {scored("p", 0, 0.3), scored("p", 1, 1.1), scored("p", 2, 0.7),
                                    scored("q", 0, 1.1)};
  auto best = select_best(a, p, 1);
  ASSERT_TRUE(best.has_value());
  EXPECT_EQ(best->provenance.source_rollout, 1);

  std::vector<ArchivedRollout> zeros = {scored("p", 0, 0), scored("p", 1, 0), scored("p", 2, 0)};
  EXPECT_FALSE(select_best(zeros, p, 1).has_value());

  std::vector<ArchivedRollout> tie = {scored("p", 0, 0.9), scored("p", 1, 0.9)};
  EXPECT_EQ(select_best(tie, p, 1)->provenance.source_rollout, 0);
}

TEST(SelectBest, BuildsSynthesizedEntry) {
  const DialogueRecord p = prompt_record();
  std::vector<ArchivedRollout> a = {scored("p", 0, 0.2), scored("p", 1, 0.8)};
  const DialogueRecord d = *select_best(a, p, 4);
  EXPECT_NE(d.id, p.id);
  ASSERT_EQ(d.context.size(), p.context.size() + 1);
  EXPECT_TRUE(std::equal(p.context.begin(), p.context.end(), d.context.begin()));
  EXPECT_EQ(d.context.back(), (Utterance{"a0", "r1"}));
  EXPECT_EQ(d.label, a[1].record.outcome.output().my_emotions);
  EXPECT_EQ(d.persona, p.persona);
  EXPECT_EQ(d.provenance.kind, Provenance::Kind::kSynthesized);
  EXPECT_EQ(d.provenance.iteration, 4);
  EXPECT_EQ(d.provenance.source_prompt, "p");
  EXPECT_DOUBLE_EQ(d.provenance.source_reward, 0.8);
  EXPECT_EQ(d.last_speaker(), "a0");
}

TEST(Config, Validation) {
  FlywheelConfig c;
  c.rollouts = 1;
  EXPECT_THROW(c.validate(), Error);
  c = FlywheelConfig{};
  c.iterations = -1;
  EXPECT_THROW(c.validate(), Error);
  c = FlywheelConfig{};
  c.total_steps = 10;  // fewer than 3 * 64
  EXPECT_THROW(c.validate(), Error);
  c = FlywheelConfig{};
  c.clip.epsilon = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = FlywheelConfig{};
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.resolved_total_steps(), 3 * 64);
}

TEST(ColdStart, MemorizesSingleEntry) {
  World w = small_world();
  FlywheelConfig c = small_config();
  c.cold_start_epochs = 300;
  Flywheel fw = make(w, c);
  std::vector<DialogueRecord> d0 = {w.train[0]};
  const PolicyParams p = fw.cold_start(d0);
  const auto& policy = fw.policy();
  const auto target = fw.fit_examples(d0)[0].tokens;
  EXPECT_EQ(policy.greedy(p, record_features(d0[0], policy, fw.feature_seed())), target);
}

TEST(ColdStart, DeterministicAndRejectsEmpty) {
  World w = small_world();
  Flywheel fw = make(w);
  EXPECT_EQ(fw.cold_start(w.train), fw.cold_start(w.train));
  EXPECT_THROW(fw.cold_start({}), Error);
}

TEST(ColdStart, ConstantLabelIsPredictedEverywhere) {
  World w = small_world();
  std::vector<DialogueRecord> d0 = w.train;
  for (auto& d : d0) d.label = WeightedEmotionSet::from_names(vocab(), {{"disgust", 1.0}});
  Flywheel fw = make(w);
  const PolicyParams p = fw.cold_start(d0);
  const auto& policy = fw.policy();
  for (const auto* split : {&w.train, &w.heldout}) {
    for (const auto& d : *split) {
      const auto out = policy.decode(policy.greedy(p, record_features(d, policy, fw.feature_seed())));
      ASSERT_TRUE(out.has_value());
      EXPECT_EQ(out->last_emotions, d0[0].label) << d.id;
    }
  }
}

TEST(RlStage, ZeroPromptsIsNoOp) {
  World w = small_world();
  FlywheelConfig c = small_config();
  c.prompts_per_pass = 0;
  Flywheel fw = make(w, c);
  const PolicyParams p = fw.cold_start(w.train);
  const RlStageResult r = fw.rl_stage(p, w.train, 1, 0);
  EXPECT_EQ(r.params, p);
  EXPECT_TRUE(r.archive.empty());
  EXPECT_TRUE(r.steps.empty());
}

TEST(RlStage, AllInvalidGroupTakesNoStep) {
  World w = small_world();
  FlywheelConfig c = small_config();
  c.max_len = 10;
  c.prompts_per_pass = 2;
  Flywheel fw = make(w, c);
  PolicyParams p = fw.cold_start(w.train);
  // END is only forced after the longest response, far beyond the budget.
  p.bias(fw.policy().tokens().end()) -= 100.0;
  const RlStageResult r = fw.rl_stage(p, w.train, 1, 0);
  EXPECT_EQ(r.params, p);
  ASSERT_EQ(r.archive.size(), 2u * 8u);
  for (const auto& a : r.archive) {
    EXPECT_FALSE(a.record.outcome.is_valid());
    EXPECT_EQ(a.record.primary_reward, 0.0);
    EXPECT_EQ(a.advantage, 0.0);
    EXPECT_EQ(a.record.outcome.failure(), ParseFailure::kNoDict);
  }
}

TEST(RlStage, ArchiveContentsAndDeterminism) {
  World w = small_world();
  Flywheel fw = make(w);
  const PolicyParams p = fw.cold_start(w.train);
  const RlStageResult a = fw.rl_stage(p, w.train, 1, 5);
  const RlStageResult b = fw.rl_stage(p, w.train, 1, 5);
  EXPECT_EQ(a.archive, b.archive);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.steps, b.steps);
  EXPECT_NE(a.params, p);

  ASSERT_EQ(a.steps.size(), 8u);
  ASSERT_EQ(a.archive.size(), 64u);
  std::set<std::string> prompts(a.prompt_ids.begin(), a.prompt_ids.end());
  EXPECT_EQ(prompts.size(), 8u);  // without replacement
  std::map<std::string, const DialogueRecord*> by_id;
  for (const auto& d : w.train) by_id[d.id] = &d;
  const auto total = fw.config().resolved_total_steps();
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    EXPECT_EQ(a.steps[s].step, static_cast<std::int64_t>(6 + s));
    EXPECT_DOUBLE_EQ(a.steps[s].lambda, static_cast<double>(6 + s) / total);
  }
  for (const auto& r : a.archive) {
    const DialogueRecord& prompt = *by_id.at(r.record.prompt_id);
    EXPECT_EQ(r.archetype, prompt.last_speaker());
    EXPECT_EQ(r.record.primary_reward, reward(r.record.outcome, prompt.label));
    EXPECT_EQ(r.record.outcome, parse_structured_output(r.record.raw_text, vocab()));
  }
  // A different iteration draws a different prompt order and rollouts.
  EXPECT_NE(fw.rl_stage(p, w.train, 2, 5).archive, a.archive);
}

TEST(RlStage, GroupAdvantagesMatchRecomputation) {
  World w = small_world();
  Flywheel fw = make(w);
  const RlStageResult r = fw.rl_stage(fw.cold_start(w.train), w.train, 1, 0);
  for (std::size_t g = 0; g < r.steps.size(); ++g) {
    std::vector<RolloutRecord> group;
    std::vector<double> primary, secondary, adv;
    for (std::size_t i = 0; i < 8; ++i) {
      const auto& a = r.archive[g * 8 + i];
      group.push_back(a.record);
      primary.push_back(a.record.primary_reward);
      adv.push_back(a.advantage);
    }
    const auto cons = consensus(std::span<const RolloutRecord>(group), vocab().size());
    for (const auto& rec : group) secondary.push_back(cons ? secondary_reward(rec, cons->top3) : 0.0);
    const auto expect = advantages(primary, secondary, r.steps[g].lambda);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_EQ(r.archive[g * 8 + i].secondary_reward, secondary[i]);
      EXPECT_EQ(adv[i], expect.values[i]);
    }
  }
}

struct Recorder : FlywheelObserver {
  std::vector<IterationReport> reports;
  std::vector<std::vector<ArchivedRollout>> archives;
  std::vector<std::vector<std::string>> prompts;
  std::vector<std::vector<DialogueRecord>> buffers;
  void on_iteration(const IterationReport& r, const FlywheelState& s,
                    const RlStageResult* stage) override {
    reports.push_back(r);
    archives.push_back(stage ? stage->archive : std::vector<ArchivedRollout>{});
    prompts.push_back(stage ? stage->prompt_ids : std::vector<std::string>{});
    buffers.push_back(s.buffer);
  }
};

TEST(Run, TinyWorldGrowsByAtMostPromptCount) {
  World w = small_world(5, 2);  // 8 training prompts
  ASSERT_EQ(w.train.size(), 8u);
  FlywheelConfig c = small_config();
  c.iterations = 1;
  Flywheel fw = make(w, c);
  Recorder rec;
  FlywheelState s = fw.start(w.train, &rec);
  fw.resume(s, &rec);
  ASSERT_EQ(rec.reports.size(), 2u);
  EXPECT_LE(s.buffer.size(), 16u);
  EXPECT_GE(s.buffer.size(), 8u);
}

TEST(Run, BufferInvariantsAndProvenance) {
  World w = small_world(12, 2);
  FlywheelConfig c = small_config();
  c.iterations = 3;
  c.max_len = 12;  // frequent invalid rollouts
  Flywheel fw = make(w, c);
  Recorder rec;
  FlywheelState s = fw.start(w.train, &rec);
  fw.resume(s, &rec);
  ASSERT_EQ(rec.reports.size(), 4u);

  std::map<std::string, DialogueRecord> all;
  for (std::size_t k = 1; k < rec.reports.size(); ++k) {
    const auto& before = rec.buffers[k - 1];
    const auto& after = rec.buffers[k];
    // Existing entries are never touched.
    ASSERT_GE(after.size(), before.size());
    EXPECT_TRUE(std::equal(before.begin(), before.end(), after.begin()));

    std::size_t positive = 0;
    for (const auto& id : rec.prompts[k]) {
      double best = 0.0;
      for (const auto& a : rec.archives[k]) {
        if (a.record.prompt_id == id) best = std::max(best, a.record.primary_reward);
      }
      positive += best > 0.0;
    }
    EXPECT_EQ(after.size() - before.size(), positive);
    EXPECT_EQ(rec.reports[k].buffer_before, before.size());
    EXPECT_EQ(rec.reports[k].buffer_after, after.size());

    for (const auto& d : after) all[d.id] = d;
    for (std::size_t i = before.size(); i < after.size(); ++i) {
      const DialogueRecord& d = after[i];
      ASSERT_EQ(d.provenance.kind, Provenance::Kind::kSynthesized);
      EXPECT_EQ(d.provenance.iteration, static_cast<int>(k));
      const DialogueRecord& src = all.at(d.provenance.source_prompt);
      const auto it = std::find_if(rec.archives[k].begin(), rec.archives[k].end(), [&](const auto& a) {
        return a.record.prompt_id == src.id && a.index == d.provenance.source_rollout;
      });
      ASSERT_NE(it, rec.archives[k].end());
      EXPECT_EQ(d.label, it->record.outcome.output().my_emotions);
      EXPECT_EQ(d.context.back().text, it->record.outcome.output().my_output);
      EXPECT_EQ(d.context.back().speaker, src.persona.id);
      EXPECT_EQ(d.provenance.source_reward, it->record.primary_reward);
    }
  }
  EXPECT_GT(rec.reports.back().invalid_fraction, 0.0);
}

TEST(Run, RetrainStartsFromBase) {
  World w = small_world();
  Flywheel fw = make(w);
  FlywheelState s = fw.start(w.train, nullptr);
  const PolicyParams base = s.base;
  fw.resume(s, nullptr);
  EXPECT_EQ(s.base, base);
  EXPECT_EQ(s.params, fw.retrain(base, s.buffer));
}

TEST(Run, DeterministicAndResumable) {
  World w = small_world();
  Flywheel fw = make(w);
  const auto a = fw.run(w.train);
  const auto b = fw.run(w.train);
  EXPECT_EQ(a.reports, b.reports);
  EXPECT_EQ(a.state.params, b.state.params);
  ASSERT_EQ(a.reports.size(), 3u);
  EXPECT_EQ(a.reports[0].iteration, 0);
  EXPECT_EQ(a.reports[0].lambda, 0.0);
  EXPECT_EQ(a.reports.back().step, a.state.step);

  Recorder rec;
  FlywheelState s = fw.start(w.train, &rec);
  fw.resume(s, &rec, 1);
  EXPECT_EQ(s.iteration, 1);
  FlywheelState copy = s;
  fw.resume(copy, &rec);
  EXPECT_EQ(rec.reports, a.reports);
  EXPECT_EQ(copy.params, a.state.params);
  EXPECT_EQ(copy.buffer, a.state.buffer);
}

TEST(Run, ZeroIterationsIsBaselineOnly) {
  World w = small_world();
  FlywheelConfig c = small_config();
  c.iterations = 0;
  const auto r = make(w, c).run(w.train);
  ASSERT_EQ(r.reports.size(), 1u);
  EXPECT_EQ(r.state.buffer, w.train);
  EXPECT_EQ(r.state.params, r.state.base);
}

}  // namespace
}  // namespace selfemo
