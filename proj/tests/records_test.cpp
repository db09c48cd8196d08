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
#include <cmath>
#include <filesystem>
#include <limits>

#include "selfemo/error.hpp"
#include "selfemo/records.hpp"

namespace selfemo {
namespace {

namespace fs = std::filesystem;

const EmotionVocab& vocab() {
  static const EmotionVocab v = EmotionVocab::default_vocab();
  return v;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("selfemo_records_" + name);
  fs::remove_all(p);
  return p;
}

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(1.0), "1");
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const double x = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.below(80)) - 40);
    EXPECT_EQ(std::stod(format_real(x)), x);
  }
}

TEST(Records, WorldRoundTripsThroughJsonl) {
  WorldConfig c;
  c.seed = 4;
  c.archetypes = 3;
  c.dialogues_per_archetype = 12;
  const World w = generate_world(c, vocab());
  for (const auto& r : w.train) EXPECT_EQ(record_from_json(record_to_json(r, vocab()), vocab()), r);

  const fs::path dir = scratch("world");
  write_records(dir / "train.jsonl", w.train, vocab());
  EXPECT_EQ(read_records(dir / "train.jsonl", vocab()), w.train);
  write_archetypes(dir / "archetypes.json", w.archetypes, vocab());
  EXPECT_EQ(read_archetypes(dir / "archetypes.json", vocab()), w.archetypes);
  fs::remove_all(dir);
}

TEST(Records, SynthesizedProvenanceSurvives) {
  DialogueRecord d;
  d.id = "a1-3/k2";
  d.context = {{"a0", "r1 f2"}, {"a1", "r3"}};
  d.persona = {"a1", "composed"};
  d.label = WeightedEmotionSet::from_names(vocab(), {{"fear", 0.3}, {"joy", 0.7}});
  d.provenance = {Provenance::Kind::kSynthesized, 2, "a1-3", 5, 0.8333333333333334};
  const DialogueRecord back = record_from_json(record_to_json(d, vocab()), vocab());
  EXPECT_EQ(back, d);
  // label order is preserved as written
  EXPECT_EQ(back.label.entries()[0].first, vocab().at("fear"));
}

TEST(Records, MalformedAndMissingInputs) {
  try {
    record_from_json("{not json", vocab());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  try {
    read_lines("/nonexistent/selfemo/file.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingInput);
  }
}

TEST(Records, ArchiveRoundTrip) {
  WorldConfig wc;
  wc.seed = 5;
  wc.archetypes = 2;
  wc.dialogues_per_archetype = 8;
  const World w = generate_world(wc, vocab());
  FlywheelConfig fc;
  fc.iterations = 1;
  fc.prompts_per_pass = 6;
  fc.cold_start_epochs = 10;
  fc.seed = 8;
  const Flywheel f(Policy(vocab(), PolicyConfig{}), fc, w.archetypes, w.heldout, 1);
  const auto stage = f.rl_stage(f.cold_start(w.train), w.train, 1, 0);
  ASSERT_EQ(stage.archive.size(), 6u * fc.rollouts);
  for (const auto& a : stage.archive) {
    EXPECT_EQ(rollout_from_json(rollout_to_json(a, vocab()), vocab()), a);
  }
  const std::string group = group_to_json(
      stage.steps[0], std::span<const ArchivedRollout>(stage.archive.data(), fc.rollouts),
      vocab());
  EXPECT_NE(group.find("\"p_star\""), std::string::npos);
}

TEST(Records, CsvRowsMatchHeaders) {
  IterationReport r;
  r.iteration = 2;
  r.lambda = 0.5;
  auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(count(metrics_row(r)), count(metrics_header()));
  StepRecord s;
  s.prompt_id = "a0-1";
  EXPECT_EQ(count(steps_row(s)), count(steps_header()));
}

}  // namespace
}  // namespace selfemo
