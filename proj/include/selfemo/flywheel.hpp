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

// The closed loop: cold start, then K rounds of group rollouts with the
// consensus-augmented update, best-rollout selection into the replay buffer
// and retraining from the cold-start parameters.

#ifndef SELFEMO_FLYWHEEL_HPP_
#define SELFEMO_FLYWHEEL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfemo/archive.hpp"
#include "selfemo/dialogue.hpp"
#include "selfemo/grpo.hpp"
#include "selfemo/policy.hpp"
#include "selfemo/world.hpp"

namespace selfemo {

struct FlywheelConfig {
  int iterations = 3;              // K
  int rollouts = 8;                // n
  std::int64_t total_steps = 0;    // T; 0 sizes it to iterations * prompts_per_pass
  std::size_t prompts_per_pass = 64;
  std::size_t max_len = 20;        // token budget per rollout
  ClipConfig clip;
  double rl_lr = 0.05;
  double sft_lr = 0.5;
  int cold_start_epochs = 60;
  int retrain_epochs = 300;
  double init_scale = 0.01;
  std::size_t probe_prompts = 16;
  std::size_t probe_samples = 32;
  std::uint64_t seed = 0;

  void validate() const;
  std::int64_t resolved_total_steps() const;
};

struct StepRecord {
  int iteration = 0;
  std::int64_t step = 0;
  std::string prompt_id;
  double lambda = 0.0;
  double mean_reward = 0.0;
  double max_reward = 0.0;
  double invalid_fraction = 0.0;
  double objective = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct IterationReport {
  int iteration = 0;
  std::int64_t step = 0;  // optimizer steps taken so far
  double lambda = 0.0;
  std::size_t prompts = 0;
  double rollout_mean_reward = 0.0;
  double rollout_max_reward = 0.0;
  double invalid_fraction = 0.0;
  std::size_t buffer_before = 0;
  std::size_t buffer_after = 0;
  EvalMetrics heldout;
  StageEntropies entropies;

  friend bool operator==(const IterationReport&, const IterationReport&) = default;
};

struct RlStageResult {
  PolicyParams params;
  std::vector<ArchivedRollout> archive;
  std::vector<StepRecord> steps;
  std::vector<std::string> prompt_ids;  // in processing order
};

// Everything needed to continue a run at an iteration boundary.
struct FlywheelState {
  PolicyParams base;    // cold-start parameters
  PolicyParams params;  // parameters entering the next iteration
  std::vector<DialogueRecord> buffer;
  int iteration = 0;  // last completed iteration
  std::int64_t step = 0;
};

class FlywheelObserver {
 public:
  virtual ~FlywheelObserver() = default;
  // Called once for the baseline and once per completed iteration.
  virtual void on_iteration(const IterationReport& report, const FlywheelState& state,
                            const RlStageResult* stage) = 0;
};

// Argmax of the prompt's primary rewards (lowest index on ties); nothing if
// the best reward is zero.
std::optional<DialogueRecord> select_best(std::span<const ArchivedRollout> archive,
                                          const DialogueRecord& prompt, int iteration);

class Flywheel {
 public:
  Flywheel(Policy policy, FlywheelConfig config, std::vector<PersonaArchetype> archetypes,
           std::vector<DialogueRecord> heldout, std::uint64_t feature_seed);

  const Policy& policy() const { return policy_; }
  const FlywheelConfig& config() const { return config_; }
  std::uint64_t feature_seed() const { return feature_seed_; }

  std::vector<FitExample> fit_examples(std::span<const DialogueRecord> buffer) const;
  PolicyParams cold_start(std::span<const DialogueRecord> d0) const;
  PolicyParams retrain(const PolicyParams& base, std::span<const DialogueRecord> buffer) const;

  RlStageResult rl_stage(const PolicyParams& params, std::span<const DialogueRecord> buffer,
                         int iteration, std::int64_t step) const;

  IterationReport evaluate(const PolicyParams& params, int iteration) const;

  // Cold start plus the baseline report.
  FlywheelState start(std::vector<DialogueRecord> d0, FlywheelObserver* observer) const;
  // Runs the remaining iterations up to config().iterations, or up to
  // `until` when it is smaller and non-negative.
  void resume(FlywheelState& state, FlywheelObserver* observer, int until = -1) const;

  struct RunResult {
    FlywheelState state;
    std::vector<IterationReport> reports;
  };
  RunResult run(std::vector<DialogueRecord> d0) const;

 private:
  Policy policy_;
  FlywheelConfig config_;
  std::vector<PersonaArchetype> archetypes_;
  std::vector<DialogueRecord> heldout_;
  std::uint64_t feature_seed_;
};

}  // namespace selfemo

#endif  // SELFEMO_FLYWHEEL_HPP_
