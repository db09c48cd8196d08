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

// Group-consensus rewards, scheduled advantage mixing and the clipped
// surrogate objective.

#ifndef SELFEMO_GRPO_HPP_
#define SELFEMO_GRPO_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfemo/emotion.hpp"

namespace selfemo {

struct RolloutRecord {
  std::string prompt_id;
  std::string raw_text;
  ParseOutcome outcome = ParseOutcome::invalid(ParseFailure::kNoDict);
  double primary_reward = 0.0;
  double behavior_logprob = 0.0;
  std::vector<std::uint16_t> token_ids;

  friend bool operator==(const RolloutRecord&, const RolloutRecord&) = default;
};

struct GroupConsensus {
  std::vector<double> p_tilde;  // indexed by label, sums to 1
  std::vector<double> p_star;   // zero outside top3, sums to 1 over top3
  std::vector<LabelId> top3;    // descending mass, vocab order on ties
};

// Pooled normalized last_emotions of every valid rollout. std::nullopt when
// all rollouts are invalid (ALL_INVALID).
std::optional<GroupConsensus> consensus(std::span<const ParseOutcome> outcomes,
                                        std::size_t vocab_size);
std::optional<GroupConsensus> consensus(std::span<const RolloutRecord> group,
                                        std::size_t vocab_size);

// |top3 ∩ support(last_emotions)| / 3, or 0 for an invalid rollout.
double secondary_reward(const ParseOutcome& outcome, std::span<const LabelId> top3);
double secondary_reward(const RolloutRecord& record, std::span<const LabelId> top3);

// t / T; rejects T < 1 or t outside [0, T].
double lambda_schedule(std::int64_t step, std::int64_t total_steps);

struct AdvantageVector {
  std::vector<double> values;
  double lambda = 0.0;
  double mu_r = 0.0;
  double sigma_r = 0.0;
  double mu_r2 = 0.0;
  double sigma_r2 = 0.0;
};

// A_i = z(r_i) + lambda * z(r2_i) with population standard deviations. A
// stream whose values are all identical contributes zero.
AdvantageVector advantages(std::span<const double> primary,
                           std::span<const double> secondary, double lambda);

struct ClipConfig {
  double epsilon = 0.2;

  void validate() const;
};

// Largest |new - old| log-probability gap accepted before the ratio is
// considered diverged.
inline constexpr double kMaxLogRatio = 50.0;

struct SurrogateResult {
  double loss = 0.0;               // quantity to maximize
  std::vector<double> grad_scale;  // d loss / d new_logprob_i
  std::vector<double> ratio;
  std::vector<bool> clipped;       // clipped branch active and binding
};

// (1/n) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i). Throws
// Error(kNonFinite) when a ratio would overflow.
SurrogateResult surrogate_loss(std::span<const double> new_logprobs,
                               std::span<const double> old_logprobs,
                               std::span<const double> adv, const ClipConfig& clip);

}  // namespace selfemo

#endif  // SELFEMO_GRPO_HPP_
