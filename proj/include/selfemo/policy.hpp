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

// A linear-softmax autoregressive policy over a finite token alphabet that
// spells the three-stage output: others' emotions, own emotions, response.
//
// Token sequence grammar:
//   (emotion bucket){1,3} SEP_O (emotion bucket){1,3} SEP_S response{1,L} END
// with no emotion repeated within a stage. Next-token logits are a linear
// function of the context features, the previous token, the current stage,
// the leading recognized and own emotions and the position; illegal
// continuations are masked.

#ifndef SELFEMO_POLICY_HPP_
#define SELFEMO_POLICY_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfemo/dialogue.hpp"
#include "selfemo/emotion.hpp"
#include "selfemo/grpo.hpp"
#include "selfemo/rng.hpp"

namespace selfemo {

using TokenId = std::uint16_t;

inline constexpr int kWeightBuckets = 10;

class TokenVocab {
 public:
  enum class Kind { kEmotion, kBucket, kSepO, kSepS, kResponse, kEnd };

  TokenVocab(std::size_t emotions, std::size_t responses);

  std::size_t size() const { return emotions_ + kWeightBuckets + 3 + responses_; }
  std::size_t emotion_count() const { return emotions_; }
  std::size_t response_count() const { return responses_; }

  TokenId emotion(LabelId label) const;
  TokenId bucket(int tenths) const;  // 1..10 encodes 0.1..1.0
  TokenId sep_o() const { return static_cast<TokenId>(emotions_ + kWeightBuckets); }
  TokenId sep_s() const { return static_cast<TokenId>(emotions_ + kWeightBuckets + 1); }
  TokenId response(std::size_t index) const;
  TokenId end() const { return static_cast<TokenId>(size() - 1); }

  Kind kind(TokenId token) const;
  LabelId emotion_of(TokenId token) const;
  int bucket_of(TokenId token) const;
  std::size_t response_of(TokenId token) const;

  // Response tokens are spelled "r<index>" inside my_output.
  static std::string response_name(std::size_t index);
  std::optional<std::size_t> parse_response_name(std::string_view word) const;

  std::string name(TokenId token, const EmotionVocab& vocab) const;

 private:
  std::size_t emotions_;
  std::size_t responses_;
};

// Quantize a positive weight to the nearest bucket in 1..10 (tenths).
int weight_to_bucket(double weight);

struct ContextFeatures {
  std::vector<double> values;

  friend bool operator==(const ContextFeatures&, const ContextFeatures&) = default;
};

// Signed feature hashing of the context tokens (history and final utterance
// hashed separately, plus the final speaker) and of the persona id.
ContextFeatures featurize(std::span<const Utterance> context, std::string_view persona,
                          std::uint64_t seed, std::size_t dim);

struct PolicyConfig {
  std::size_t feature_dim = 64;
  std::size_t response_tokens = 16;
  std::size_t max_response_len = 8;
};

class Policy;

// Logit weights [vocab x input_dim] (row-major) followed by a bias [vocab].
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(std::size_t vocab, std::size_t input_dim);

  std::size_t vocab() const { return vocab_; }
  std::size_t input_dim() const { return input_dim_; }

  double& weight(std::size_t token, std::size_t input) {
    return values_[token * input_dim_ + input];
  }
  double weight(std::size_t token, std::size_t input) const {
    return values_[token * input_dim_ + input];
  }
  double& bias(std::size_t token) { return values_[vocab_ * input_dim_ + token]; }
  double bias(std::size_t token) const { return values_[vocab_ * input_dim_ + token]; }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  std::size_t size() const { return values_.size(); }

  // this += scale * other
  void axpy(double scale, const PolicyParams& other);
  bool all_finite() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  std::size_t vocab_ = 0;
  std::size_t input_dim_ = 0;
  std::vector<double> values_;
};

struct SampledTrajectory {
  std::vector<TokenId> tokens;
  std::vector<double> logprobs;  // per token, under the masked distribution
  std::optional<std::size_t> sep_o_index;
  std::optional<std::size_t> sep_s_index;
  bool truncated = false;  // LENGTH_EXCEEDED: END not reached within max_len
  std::optional<StructuredOutput> decoded;

  double total_logprob() const;
};

struct StageEntropies {
  double h_o = 0.0;
  double h_s = 0.0;
  double h_r = 0.0;

  friend bool operator==(const StageEntropies&, const StageEntropies&) = default;
};

// Rollouts for one prompt prepared for a policy-gradient step.
struct GroupBatch {
  ContextFeatures features;
  std::vector<std::vector<TokenId>> trajectories;
  std::vector<double> old_logprobs;
  AdvantageVector advantages;
};

struct SurrogateGradient {
  PolicyParams gradient;  // of the objective, to be ascended
  double objective = 0.0;
};

struct FitExample {
  ContextFeatures features;
  std::vector<TokenId> tokens;
};

struct FitResult {
  PolicyParams params;
  std::vector<double> nll_history;  // mean per-token NLL before each epoch, then final
};

class Policy {
 public:
  Policy(EmotionVocab emotions, PolicyConfig config);

  const EmotionVocab& emotions() const { return emotions_; }
  const TokenVocab& tokens() const { return tokens_; }
  const PolicyConfig& config() const { return config_; }
  std::size_t input_dim() const;

  // Shortest and longest grammatical sequences.
  std::size_t min_length() const;
  std::size_t max_length() const;

  PolicyParams zero_params() const;
  PolicyParams random_params(Rng& rng, double scale) const;

  SampledTrajectory sample(const PolicyParams& params, const ContextFeatures& features,
                           Rng& rng, std::size_t max_len) const;

  // Argmax decoding; ties go to the lowest token id. Always grammatical.
  std::vector<TokenId> greedy(const PolicyParams& params,
                              const ContextFeatures& features) const;

  // Exact log-probability of a grammatical sequence or prefix. Throws
  // Error(kUngrammatical) if the mask forbids a token.
  double logprob(const PolicyParams& params, const ContextFeatures& features,
                 std::span<const TokenId> tokens) const;

  // Adds scale * d logprob / d params into grad; returns the logprob.
  double accumulate_logprob_gradient(const PolicyParams& params,
                                     const ContextFeatures& features,
                                     std::span<const TokenId> tokens, double scale,
                                     PolicyParams& grad) const;

  // Masked next-token distribution after a prefix (zeros on illegal tokens).
  std::vector<double> next_token_distribution(const PolicyParams& params,
                                              const ContextFeatures& features,
                                              std::span<const TokenId> prefix) const;

  // Average per-position entropy (nats) of each stage over `count` sampled
  // sequences.
  StageEntropies stage_entropies(const PolicyParams& params,
                                 const ContextFeatures& features, std::size_t count,
                                 Rng& rng) const;

  // Gradient of (1/G) sum_g L_g, with L_g the clipped surrogate of group g.
  SurrogateGradient grad_surrogate(const PolicyParams& params,
                                   std::span<const GroupBatch> groups,
                                   const ClipConfig& clip) const;

  // Full-batch gradient descent on the mean per-token negative log-likelihood.
  FitResult mle_fit(const PolicyParams& init, std::span<const FitExample> dataset,
                    int epochs, double lr) const;
  double mean_nll(const PolicyParams& params, std::span<const FitExample> dataset) const;

  std::optional<StructuredOutput> decode(std::span<const TokenId> tokens) const;
  // Weights are quantized to buckets; my_output must spell response tokens.
  std::vector<TokenId> encode(const StructuredOutput& output) const;
  // Text produced for a trajectory: canonical dict when complete, otherwise
  // the raw token names.
  std::string render(const SampledTrajectory& trajectory) const;

  void save(std::ostream& out, const PolicyParams& params, std::uint64_t feature_seed) const;
  struct Loaded;
  static Loaded load(std::istream& in);

 private:
  struct State;
  struct Scratch;

  State initial_state() const;
  void legal_tokens(const State& state, std::vector<char>& legal) const;
  void advance(State& state, TokenId token) const;
  void base_logits(const PolicyParams& params, const ContextFeatures& features,
                   std::vector<double>& out) const;
  void distribution(const PolicyParams& params, const std::vector<double>& base,
                    const State& state, Scratch& scratch) const;
  void check_features(const ContextFeatures& features) const;

  EmotionVocab emotions_;
  TokenVocab tokens_;
  PolicyConfig config_;
};

struct Policy::Loaded {
  Policy policy;
  PolicyParams params;
  std::uint64_t feature_seed;
};

}  // namespace selfemo

#endif  // SELFEMO_POLICY_HPP_
