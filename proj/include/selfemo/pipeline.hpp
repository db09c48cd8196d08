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

// Run configuration and the three pipeline operations driven by the CLI.

#ifndef SELFEMO_PIPELINE_HPP_
#define SELFEMO_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "selfemo/emotion.hpp"
#include "selfemo/flywheel.hpp"
#include "selfemo/policy.hpp"
#include "selfemo/world.hpp"

namespace selfemo {

struct RunConfig {
  std::uint64_t seed = 0;
  EmotionVocab emotions = EmotionVocab::default_vocab();
  WorldConfig world;
  PolicyConfig policy;
  FlywheelConfig flywheel;

  // Substream seeds derived from `seed`.
  std::uint64_t feature_seed() const;
  void set_seed(std::uint64_t s);

  void validate() const;
  // Canonical JSON with every field spelled out.
  std::string to_json() const;
};

// Parses a JSON config; unknown keys, wrong types and a missing "seed" are
// rejected with kConfig naming the field.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Output layout, relative to the --out directory.
struct RunPaths {
  explicit RunPaths(std::filesystem::path out);

  std::filesystem::path root;
  std::filesystem::path world_dir, train, heldout, archetypes;
  std::filesystem::path run_dir, config, metrics, steps, reports, base_checkpoint;

  std::filesystem::path checkpoint(int iteration) const;
  std::filesystem::path buffer(int iteration) const;
  std::filesystem::path archive(int iteration) const;
  std::filesystem::path groups(int iteration) const;
};

void cmd_gen_world(const RunConfig& config, const std::filesystem::path& out, bool force);

struct TrainOptions {
  bool force = false;
  std::optional<int> resume;  // continue after this completed iteration
  // One line per report as it is produced.
  void (*on_report)(const std::string& line, void* user) = nullptr;
  void* user = nullptr;
};

void cmd_train(const RunConfig& config, const std::filesystem::path& out,
               const TrainOptions& options);

std::string cmd_report(const std::filesystem::path& out);

}  // namespace selfemo

#endif  // SELFEMO_PIPELINE_HPP_
