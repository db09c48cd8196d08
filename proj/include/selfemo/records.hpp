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

// Line-delimited JSON persistence for dialogue records, archetypes, rollout
// archives and reports, plus the CSV metrics rows.

#ifndef SELFEMO_RECORDS_HPP_
#define SELFEMO_RECORDS_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfemo/archive.hpp"
#include "selfemo/dialogue.hpp"
#include "selfemo/flywheel.hpp"
#include "selfemo/world.hpp"

namespace selfemo {

// Shortest decimal text that parses back to the same double.
std::string format_real(double x);

std::string record_to_json(const DialogueRecord& record, const EmotionVocab& vocab);
DialogueRecord record_from_json(std::string_view line, const EmotionVocab& vocab);

void write_records(const std::filesystem::path& path, std::span<const DialogueRecord> records,
                   const EmotionVocab& vocab);
std::vector<DialogueRecord> read_records(const std::filesystem::path& path,
                                         const EmotionVocab& vocab);

void write_archetypes(const std::filesystem::path& path,
                      std::span<const PersonaArchetype> archetypes, const EmotionVocab& vocab);
std::vector<PersonaArchetype> read_archetypes(const std::filesystem::path& path,
                                              const EmotionVocab& vocab);

std::string rollout_to_json(const ArchivedRollout& rollout, const EmotionVocab& vocab);
ArchivedRollout rollout_from_json(std::string_view line, const EmotionVocab& vocab);
std::vector<ArchivedRollout> read_archive(const std::filesystem::path& path,
                                          const EmotionVocab& vocab);

// One line per group: per-rollout rewards, advantages and ratios with the
// group's consensus.
std::string group_to_json(const StepRecord& step, std::span<const ArchivedRollout> group,
                          const EmotionVocab& vocab);

std::string report_to_json(const IterationReport& report);

std::string metrics_header();
std::string metrics_row(const IterationReport& report);
std::string steps_header();
std::string steps_row(const StepRecord& step);

// Whole-file helpers; reading a missing file raises kMissingInput.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace selfemo

#endif  // SELFEMO_RECORDS_HPP_
