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

#include "selfemo/flywheel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selfemo/error.hpp"
#include "selfemo/rng.hpp"

namespace selfemo {
namespace {

enum Stream : std::uint64_t { kInit = 1, kPrompts, kRollouts, kProbe };

}  // namespace

void FlywheelConfig::validate() const {
  if (iterations < 0) fail(ErrorCode::kConfig, "flywheel.iterations must be >= 0");
  if (rollouts < 2) fail(ErrorCode::kConfig, "flywheel.rollouts must be >= 2");
  if (total_steps < 0) fail(ErrorCode::kConfig, "flywheel.total_steps must be >= 0");
  if (total_steps > 0 &&
      total_steps < static_cast<std::int64_t>(iterations) *
                        static_cast<std::int64_t>(prompts_per_pass)) {
    fail(ErrorCode::kConfig,
         "flywheel.total_steps must cover iterations * prompts_per_pass optimizer steps");
  }
  if (max_len == 0) fail(ErrorCode::kConfig, "flywheel.max_len must be positive");
  if (!(rl_lr >= 0.0) || !std::isfinite(rl_lr)) {
    fail(ErrorCode::kConfig, "flywheel.rl_lr must be finite and >= 0");
  }
  if (!(sft_lr > 0.0) || !std::isfinite(sft_lr)) {
    fail(ErrorCode::kConfig, "flywheel.sft_lr must be finite and > 0");
  }
  if (cold_start_epochs < 0) fail(ErrorCode::kConfig, "flywheel.cold_start_epochs must be >= 0");
  if (retrain_epochs < 0) fail(ErrorCode::kConfig, "flywheel.retrain_epochs must be >= 0");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) {
    fail(ErrorCode::kConfig, "flywheel.init_scale must be finite and >= 0");
  }
  if (probe_samples == 0) fail(ErrorCode::kConfig, "flywheel.probe_samples must be positive");
  try {
    clip.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string("flywheel.epsilon: ") + e.what());
  }
}

std::int64_t FlywheelConfig::resolved_total_steps() const {
  if (total_steps > 0) return total_steps;
  return std::max<std::int64_t>(
      1, static_cast<std::int64_t>(iterations) * static_cast<std::int64_t>(prompts_per_pass));
}

std::optional<DialogueRecord> select_best(std::span<const ArchivedRollout> archive,
                                          const DialogueRecord& prompt, int iteration) {
  const ArchivedRollout* best = nullptr;
  for (const auto& r : archive) {
    if (r.record.prompt_id != prompt.id) continue;
    if (best == nullptr || r.record.primary_reward > best->record.primary_reward ||
        (r.record.primary_reward == best->record.primary_reward && r.index < best->index)) {
      best = &r;
    }
  }
  if (best == nullptr || !(best->record.primary_reward > 0.0) || !best->record.outcome.is_valid()) {
    return std::nullopt;
  }
  const StructuredOutput& out = best->record.outcome.output();
  DialogueRecord d;
  d.id = prompt.id + "/k" + std::to_string(iteration);
  d.context = prompt.context;
  d.context.push_back(Utterance{prompt.persona.id, out.my_output});
  d.persona = prompt.persona;
  d.label = out.my_emotions;
  d.provenance.kind = Provenance::Kind::kSynthesized;
  d.provenance.iteration = iteration;
  d.provenance.source_prompt = prompt.id;
  d.provenance.source_rollout = best->index;
  d.provenance.source_reward = best->record.primary_reward;
  return d;
}

Flywheel::Flywheel(Policy policy, FlywheelConfig config, std::vector<PersonaArchetype> archetypes,
                   std::vector<DialogueRecord> heldout, std::uint64_t feature_seed)
    : policy_(std::move(policy)),
      config_(config),
      archetypes_(std::move(archetypes)),
      heldout_(std::move(heldout)),
      feature_seed_(feature_seed) {
  config_.validate();
  if (heldout_.empty()) fail(ErrorCode::kInvalidArgument, "held-out set is empty");
}

std::vector<FitExample> Flywheel::fit_examples(std::span<const DialogueRecord> buffer) const {
  std::vector<FitExample> out;
  out.reserve(buffer.size());
  for (const auto& d : buffer) {
    if (d.label.empty()) fail(ErrorCode::kInvalidArgument, "buffer entry " + d.id + " has no label");
    out.push_back({record_features(d, policy_, feature_seed_),
                   policy_.encode(expert_output(d, archetypes_, policy_))});
  }
  return out;
}

PolicyParams Flywheel::cold_start(std::span<const DialogueRecord> d0) const {
  if (d0.empty()) fail(ErrorCode::kInvalidArgument, "cold start needs a non-empty dataset");
  Rng rng(derive_seed(config_.seed, kInit));
  const PolicyParams init = policy_.random_params(rng, config_.init_scale);
  const auto data = fit_examples(d0);
  return policy_.mle_fit(init, data, config_.cold_start_epochs, config_.sft_lr).params;
}

PolicyParams Flywheel::retrain(const PolicyParams& base,
                               std::span<const DialogueRecord> buffer) const {
  const auto data = fit_examples(buffer);
  return policy_.mle_fit(base, data, config_.retrain_epochs, config_.sft_lr).params;
}

RlStageResult Flywheel::rl_stage(const PolicyParams& params,
                                 std::span<const DialogueRecord> buffer, int iteration,
                                 std::int64_t step) const {
  RlStageResult out;
  out.params = params;
  const std::size_t count = std::min(config_.prompts_per_pass, buffer.size());
  if (count == 0) return out;

  // Prompts without replacement: a seeded partial shuffle of buffer indices.
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);
  Rng pick(derive_seed(config_.seed, kPrompts, iteration));
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + pick.below(buffer.size() - i)]);
  }

  const std::int64_t total = config_.resolved_total_steps();
  const std::size_t n = static_cast<std::size_t>(config_.rollouts);
  const std::size_t vocab = policy_.emotions().size();
  for (std::size_t p = 0; p < count; ++p) {
    const DialogueRecord& prompt = buffer[order[p]];
    out.prompt_ids.push_back(prompt.id);
    ++step;
    const double lambda = lambda_schedule(step, total);

    GroupBatch batch;
    batch.features = record_features(prompt, policy_, feature_seed_);
    Rng rng(derive_seed(config_.seed, kRollouts, iteration, step));
    std::vector<RolloutRecord> group(n);
    for (std::size_t i = 0; i < n; ++i) {
      const SampledTrajectory traj = policy_.sample(out.params, batch.features, rng, config_.max_len);
      RolloutRecord& r = group[i];
      r.prompt_id = prompt.id;
      r.raw_text = policy_.render(traj);
      r.outcome = parse_structured_output(r.raw_text, policy_.emotions());
      r.primary_reward = reward(r.outcome, prompt.label);
      r.behavior_logprob = traj.total_logprob();
      r.token_ids = traj.tokens;
      batch.trajectories.push_back(traj.tokens);
      batch.old_logprobs.push_back(r.behavior_logprob);
    }
    const auto cons = consensus(std::span<const RolloutRecord>(group), vocab);
    std::vector<double> primary(n), secondary(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      primary[i] = group[i].primary_reward;
      if (cons) secondary[i] = secondary_reward(group[i], cons->top3);
    }
    batch.advantages = advantages(primary, secondary, lambda);

    const SurrogateGradient g =
        policy_.grad_surrogate(out.params, std::span<const GroupBatch>(&batch, 1), config_.clip);
    if (!g.gradient.all_finite() || !std::isfinite(g.objective)) {
      fail(ErrorCode::kNonFinite, "non-finite update for group " + prompt.id);
    }
    out.params.axpy(config_.rl_lr, g.gradient);
    if (!out.params.all_finite()) {
      fail(ErrorCode::kNonFinite, "parameters became non-finite after group " + prompt.id);
    }

    StepRecord s{iteration, step, prompt.id, lambda, 0.0, 0.0, 0.0, g.objective};
    for (std::size_t i = 0; i < n; ++i) {
      s.mean_reward += primary[i] / static_cast<double>(n);
      s.max_reward = std::max(s.max_reward, primary[i]);
      if (!group[i].outcome.is_valid()) s.invalid_fraction += 1.0 / static_cast<double>(n);
      ArchivedRollout a;
      a.iteration = iteration;
      a.step = step;
      a.index = static_cast<int>(i);
      a.archetype = prompt.last_speaker();
      a.record = std::move(group[i]);
      a.secondary_reward = secondary[i];
      a.advantage = batch.advantages.values[i];
      a.ratio = 1.0;
      out.archive.push_back(std::move(a));
    }
    out.steps.push_back(std::move(s));
  }
  return out;
}

IterationReport Flywheel::evaluate(const PolicyParams& params, int iteration) const {
  IterationReport r;
  r.iteration = iteration;
  r.heldout = eval_metrics(policy_, params, heldout_, feature_seed_);
  const std::size_t probes = std::min(config_.probe_prompts, heldout_.size());
  for (std::size_t i = 0; i < probes; ++i) {
    const DialogueRecord& d = heldout_[i * heldout_.size() / probes];
    Rng rng(derive_seed(config_.seed, kProbe, i));
    const StageEntropies h = policy_.stage_entropies(
        params, record_features(d, policy_, feature_seed_), config_.probe_samples, rng);
    r.entropies.h_o += h.h_o / static_cast<double>(probes);
    r.entropies.h_s += h.h_s / static_cast<double>(probes);
    r.entropies.h_r += h.h_r / static_cast<double>(probes);
  }
  return r;
}

FlywheelState Flywheel::start(std::vector<DialogueRecord> d0, FlywheelObserver* observer) const {
  FlywheelState state;
  state.base = cold_start(d0);
  state.params = state.base;
  state.buffer = std::move(d0);
  IterationReport report = evaluate(state.params, 0);
  report.buffer_before = report.buffer_after = state.buffer.size();
  if (observer) observer->on_iteration(report, state, nullptr);
  return state;
}

void Flywheel::resume(FlywheelState& state, FlywheelObserver* observer, int until) const {
  const std::int64_t total = config_.resolved_total_steps();
  const int last = until >= 0 ? std::min(until, config_.iterations) : config_.iterations;
  while (state.iteration < last) {
    const int k = state.iteration + 1;
    RlStageResult stage;
    try {
      stage = rl_stage(state.params, state.buffer, k, state.step);
    } catch (const Error& e) {
      fail(e.code(), "iteration " + std::to_string(k) + ": " + e.what());
    }
    const std::size_t before = state.buffer.size();
    std::vector<DialogueRecord> additions;
    for (const auto& id : stage.prompt_ids) {
      const auto it = std::find_if(state.buffer.begin(), state.buffer.end(),
                                   [&](const DialogueRecord& d) { return d.id == id; });
      if (auto entry = select_best(stage.archive, *it, k)) additions.push_back(std::move(*entry));
    }
    for (auto& a : additions) state.buffer.push_back(std::move(a));
    state.step += static_cast<std::int64_t>(stage.steps.size());
    try {
      state.params = retrain(state.base, state.buffer);
    } catch (const Error& e) {
      fail(e.code(), "iteration " + std::to_string(k) + ": " + e.what());
    }
    state.iteration = k;

    IterationReport report = evaluate(state.params, k);
    report.step = state.step;
    report.lambda = state.step == 0 ? 0.0 : lambda_schedule(state.step, total);
    report.prompts = stage.steps.size();
    report.buffer_before = before;
    report.buffer_after = state.buffer.size();
    if (!stage.archive.empty()) {
      std::size_t invalid = 0;
      for (const auto& a : stage.archive) {
        report.rollout_mean_reward += a.record.primary_reward;
        report.rollout_max_reward = std::max(report.rollout_max_reward, a.record.primary_reward);
        if (!a.record.outcome.is_valid()) ++invalid;
      }
      const double m = static_cast<double>(stage.archive.size());
      report.rollout_mean_reward /= m;
      report.invalid_fraction = static_cast<double>(invalid) / m;
    }
    if (observer) observer->on_iteration(report, state, &stage);
  }
}

Flywheel::RunResult Flywheel::run(std::vector<DialogueRecord> d0) const {
  struct Collect : FlywheelObserver {
    std::vector<IterationReport> reports;
    void on_iteration(const IterationReport& r, const FlywheelState&,
                      const RlStageResult*) override {
      reports.push_back(r);
    }
  } collect;
  RunResult out;
  out.state = start(std::move(d0), &collect);
  resume(out.state, &collect);
  out.reports = std::move(collect.reports);
  return out;
}

}  // namespace selfemo
