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

#include "selfemo/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selfemo/error.hpp"

namespace selfemo {
namespace {

struct StreamStats {
  double mean = 0.0;
  double sigma = 0.0;
  bool degenerate = true;
};

StreamStats stats_of(std::span<const double> xs) {
  StreamStats s;
  const double n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  s.degenerate = std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
  if (s.degenerate) return s;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.sigma = std::sqrt(ss / n);
  return s;
}

}  // namespace

std::optional<GroupConsensus> consensus(std::span<const ParseOutcome> outcomes,
                                        std::size_t vocab_size) {
  if (outcomes.empty()) fail(ErrorCode::kInvalidArgument, "consensus of an empty group");
  std::vector<double> mass(vocab_size, 0.0);
  bool any = false;
  for (const auto& o : outcomes) {
    if (!o.is_valid()) continue;
    any = true;
    const EmotionDistribution dist = normalize(o.output().last_emotions);
    for (const auto& [label, w] : dist.entries()) {
      mass.at(label.index()) += w;
    }
  }
  if (!any) return std::nullopt;

  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  GroupConsensus out;
  out.p_tilde.resize(vocab_size);
  for (std::size_t e = 0; e < vocab_size; ++e) out.p_tilde[e] = mass[e] / total;

  std::vector<std::size_t> order(vocab_size);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.p_tilde[a] > out.p_tilde[b];
  });
  double top_mass = 0.0;
  for (std::size_t k = 0; k < std::min(kMaxEmotionLabels, vocab_size); ++k) {
    if (out.p_tilde[order[k]] <= 0.0) break;
    out.top3.push_back(LabelId{static_cast<std::uint16_t>(order[k])});
    top_mass += out.p_tilde[order[k]];
  }
  out.p_star.assign(vocab_size, 0.0);
  for (LabelId l : out.top3) out.p_star[l.index()] = out.p_tilde[l.index()] / top_mass;
  return out;
}

std::optional<GroupConsensus> consensus(std::span<const RolloutRecord> group,
                                        std::size_t vocab_size) {
  std::vector<ParseOutcome> outcomes;
  outcomes.reserve(group.size());
  for (const auto& r : group) outcomes.push_back(r.outcome);
  return consensus(std::span<const ParseOutcome>(outcomes), vocab_size);
}

double secondary_reward(const ParseOutcome& outcome, std::span<const LabelId> top3) {
  if (!outcome.is_valid()) return 0.0;
  const auto& predicted = outcome.output().last_emotions;
  int hits = 0;
  for (LabelId l : top3) hits += predicted.contains(l) ? 1 : 0;
  return static_cast<double>(hits) / 3.0;
}

double secondary_reward(const RolloutRecord& record, std::span<const LabelId> top3) {
  return secondary_reward(record.outcome, top3);
}

double lambda_schedule(std::int64_t step, std::int64_t total_steps) {
  if (total_steps < 1) fail(ErrorCode::kInvalidArgument, "total steps must be at least 1");
  if (step < 0 || step > total_steps) {
    fail(ErrorCode::kInvalidArgument, "step outside [0, total steps]");
  }
  return static_cast<double>(step) / static_cast<double>(total_steps);
}

AdvantageVector advantages(std::span<const double> primary,
                           std::span<const double> secondary, double lambda) {
  if (primary.empty()) fail(ErrorCode::kInvalidArgument, "advantages of an empty group");
  if (primary.size() != secondary.size()) {
    fail(ErrorCode::kInvalidArgument, "primary and secondary reward lengths differ");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "lambda must lie in [0, 1]");
  }
  const StreamStats r = stats_of(primary);
  const StreamStats r2 = stats_of(secondary);
  AdvantageVector out;
  out.lambda = lambda;
  out.mu_r = r.mean;
  out.sigma_r = r.sigma;
  out.mu_r2 = r2.mean;
  out.sigma_r2 = r2.sigma;
  out.values.resize(primary.size());
  for (std::size_t i = 0; i < primary.size(); ++i) {
    const double z1 = r.degenerate ? 0.0 : (primary[i] - r.mean) / r.sigma;
    const double z2 = r2.degenerate ? 0.0 : (secondary[i] - r2.mean) / r2.sigma;
    out.values[i] = z1 + lambda * z2;
  }
  return out;
}

void ClipConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "clip epsilon must lie in (0, 1)");
  }
}

SurrogateResult surrogate_loss(std::span<const double> new_logprobs,
                               std::span<const double> old_logprobs,
                               std::span<const double> adv, const ClipConfig& clip) {
  clip.validate();
  const std::size_t n = new_logprobs.size();
  if (n == 0 || old_logprobs.size() != n || adv.size() != n) {
    fail(ErrorCode::kInvalidArgument, "surrogate inputs must be non-empty and equal length");
  }
  SurrogateResult out;
  out.grad_scale.resize(n);
  out.ratio.resize(n);
  out.clipped.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lo = 1.0 - clip.epsilon;
  const double hi = 1.0 + clip.epsilon;
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = new_logprobs[i] - old_logprobs[i];
    if (!std::isfinite(gap) || std::abs(gap) > kMaxLogRatio || !std::isfinite(adv[i])) {
      fail(ErrorCode::kNonFinite, "importance ratio diverged at rollout " + std::to_string(i));
    }
    const double rho = std::exp(gap);
    const double a = adv[i];
    const bool binding = (a > 0.0 && rho > hi) || (a < 0.0 && rho < lo);
    const double term = binding ? std::clamp(rho, lo, hi) * a : rho * a;
    out.loss += term * inv_n;
    out.ratio[i] = rho;
    out.clipped[i] = binding;
    out.grad_scale[i] = binding ? 0.0 : rho * a * inv_n;
  }
  return out;
}

}  // namespace selfemo
