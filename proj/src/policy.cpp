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

#include "selfemo/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "selfemo/error.hpp"

namespace selfemo {

// ---------------------------------------------------------------------------
// Token alphabet

TokenVocab::TokenVocab(std::size_t emotions, std::size_t responses)
    : emotions_(emotions), responses_(responses) {
  if (emotions == 0 || responses == 0) {
    fail(ErrorCode::kInvalidArgument, "token vocabulary needs emotions and response tokens");
  }
  if (size() > std::numeric_limits<TokenId>::max()) {
    fail(ErrorCode::kInvalidArgument, "token vocabulary too large");
  }
}

TokenId TokenVocab::emotion(LabelId label) const {
  if (label.index() >= emotions_) fail(ErrorCode::kInvalidArgument, "emotion out of range");
  return static_cast<TokenId>(label.index());
}

TokenId TokenVocab::bucket(int tenths) const {
  if (tenths < 1 || tenths > kWeightBuckets) {
    fail(ErrorCode::kInvalidArgument, "weight bucket out of range");
  }
  return static_cast<TokenId>(emotions_ + static_cast<std::size_t>(tenths - 1));
}

TokenId TokenVocab::response(std::size_t index) const {
  if (index >= responses_) fail(ErrorCode::kInvalidArgument, "response token out of range");
  return static_cast<TokenId>(emotions_ + kWeightBuckets + 2 + index);
}

TokenVocab::Kind TokenVocab::kind(TokenId token) const {
  const std::size_t t = token;
  if (t < emotions_) return Kind::kEmotion;
  if (t < emotions_ + kWeightBuckets) return Kind::kBucket;
  if (t == sep_o()) return Kind::kSepO;
  if (t == sep_s()) return Kind::kSepS;
  if (t == end()) return Kind::kEnd;
  if (t < size()) return Kind::kResponse;
  fail(ErrorCode::kInvalidArgument, "token id out of range");
}

LabelId TokenVocab::emotion_of(TokenId token) const {
  if (kind(token) != Kind::kEmotion) fail(ErrorCode::kInvalidArgument, "not an emotion token");
  return LabelId{token};
}

int TokenVocab::bucket_of(TokenId token) const {
  if (kind(token) != Kind::kBucket) fail(ErrorCode::kInvalidArgument, "not a bucket token");
  return static_cast<int>(token - emotions_) + 1;
}

std::size_t TokenVocab::response_of(TokenId token) const {
  if (kind(token) != Kind::kResponse) fail(ErrorCode::kInvalidArgument, "not a response token");
  return token - (emotions_ + kWeightBuckets + 2);
}

std::string TokenVocab::response_name(std::size_t index) {
  return "r" + std::to_string(index);
}

std::optional<std::size_t> TokenVocab::parse_response_name(std::string_view word) const {
  if (word.size() < 2 || word.front() != 'r') return std::nullopt;
  std::size_t v = 0;
  auto res = std::from_chars(word.data() + 1, word.data() + word.size(), v);
  if (res.ec != std::errc() || res.ptr != word.data() + word.size()) return std::nullopt;
  if (v >= responses_ || response_name(v) != word) return std::nullopt;
  return v;
}

std::string TokenVocab::name(TokenId token, const EmotionVocab& vocab) const {
  switch (kind(token)) {
    case Kind::kEmotion: return vocab.label(emotion_of(token));
    case Kind::kBucket: return "W" + std::to_string(bucket_of(token));
    case Kind::kSepO: return "SEP_O";
    case Kind::kSepS: return "SEP_S";
    case Kind::kResponse: return response_name(response_of(token));
    case Kind::kEnd: return "END";
  }
  return "?";
}

int weight_to_bucket(double weight) {
  const long b = std::lround(weight * kWeightBuckets);
  return static_cast<int>(std::clamp(b, 1L, static_cast<long>(kWeightBuckets)));
}

// ---------------------------------------------------------------------------
// Features

namespace {

void add_hashed(std::vector<double>& out, std::uint64_t h, double value) {
  const std::size_t idx = static_cast<std::size_t>(h % out.size());
  out[idx] += (h >> 63) ? -value : value;
}

std::vector<std::string_view> words(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace

ContextFeatures featurize(std::span<const Utterance> context, std::string_view persona,
                          std::uint64_t seed, std::size_t dim) {
  if (dim == 0) fail(ErrorCode::kInvalidArgument, "feature dimension must be positive");
  ContextFeatures f;
  f.values.assign(dim, 0.0);
  const std::uint64_t history_seed = derive_seed(seed, 1);
  const std::uint64_t last_seed = derive_seed(seed, 2);
  const std::uint64_t speaker_seed = derive_seed(seed, 3);

  if (!context.empty()) {
    std::vector<std::string_view> history;
    for (std::size_t u = 0; u + 1 < context.size(); ++u) {
      for (auto w : words(context[u].text)) history.push_back(w);
    }
    if (!history.empty()) {
      const double v = 1.0 / std::sqrt(static_cast<double>(history.size()));
      for (auto w : history) add_hashed(f.values, hash_string(history_seed, w), v);
    }
    const auto last = words(context.back().text);
    if (!last.empty()) {
      const double v = 1.0 / std::sqrt(static_cast<double>(last.size()));
      for (auto w : last) add_hashed(f.values, hash_string(last_seed, w), v);
    }
    add_hashed(f.values, hash_string(speaker_seed, context.back().speaker), 1.0);
  }
  // Two independent slots keep distinct personas from colliding.
  add_hashed(f.values, hash_string(derive_seed(seed, 4), persona), M_SQRT1_2);
  add_hashed(f.values, hash_string(derive_seed(seed, 5), persona), M_SQRT1_2);
  return f;
}

// ---------------------------------------------------------------------------
// Parameters

PolicyParams::PolicyParams(std::size_t vocab, std::size_t input_dim)
    : vocab_(vocab), input_dim_(input_dim), values_(vocab * input_dim + vocab, 0.0) {}

void PolicyParams::axpy(double scale, const PolicyParams& other) {
  if (other.values_.size() != values_.size()) {
    fail(ErrorCode::kInvalidArgument, "parameter shapes differ");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

bool PolicyParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double SampledTrajectory::total_logprob() const {
  double s = 0.0;
  for (double lp : logprobs) s += lp;
  return s;
}

// ---------------------------------------------------------------------------
// Grammar

struct Policy::State {
  int stage = 0;  // 0 recognition, 1 self emotion, 2 response, 3 finished
  bool want_bucket = false;
  std::size_t pairs = 0;
  std::vector<char> used;
  std::size_t response_len = 0;
  std::size_t position = 0;
  std::optional<TokenId> prev;
  std::optional<LabelId> lead;       // first recognized emotion
  std::optional<LabelId> self_lead;  // first own emotion
};

struct Policy::Scratch {
  std::vector<char> legal;
  std::vector<double> probs;
};

Policy::Policy(EmotionVocab emotions, PolicyConfig config)
    : emotions_(std::move(emotions)),
      tokens_(emotions_.size(), config.response_tokens),
      config_(config) {
  if (config_.feature_dim == 0) fail(ErrorCode::kInvalidArgument, "feature_dim must be positive");
  if (config_.max_response_len == 0) {
    fail(ErrorCode::kInvalidArgument, "max_response_len must be positive");
  }
}

std::size_t Policy::input_dim() const {
  return config_.feature_dim + tokens_.size() + 3 + 2 * emotions_.size() + max_length();
}

std::size_t Policy::min_length() const { return 2 + 1 + 2 + 1 + 1 + 1; }

std::size_t Policy::max_length() const {
  const std::size_t pairs = std::min(kMaxEmotionLabels, emotions_.size());
  return 2 * (2 * pairs + 1) + config_.max_response_len + 1;
}

PolicyParams Policy::zero_params() const { return PolicyParams(tokens_.size(), input_dim()); }

PolicyParams Policy::random_params(Rng& rng, double scale) const {
  PolicyParams p = zero_params();
  for (double& v : p.flat()) v = scale * rng.normal();
  return p;
}

Policy::State Policy::initial_state() const {
  State s;
  s.used.assign(emotions_.size(), 0);
  return s;
}

void Policy::legal_tokens(const State& s, std::vector<char>& legal) const {
  legal.assign(tokens_.size(), 0);
  if (s.stage <= 1) {
    if (s.want_bucket) {
      for (int b = 1; b <= kWeightBuckets; ++b) legal[tokens_.bucket(b)] = 1;
      return;
    }
    if (s.pairs < kMaxEmotionLabels) {
      for (std::size_t e = 0; e < emotions_.size(); ++e) {
        if (!s.used[e]) legal[e] = 1;
      }
    }
    if (s.pairs >= 1) legal[s.stage == 0 ? tokens_.sep_o() : tokens_.sep_s()] = 1;
    return;
  }
  if (s.stage == 2) {
    if (s.response_len < config_.max_response_len) {
      for (std::size_t r = 0; r < tokens_.response_count(); ++r) legal[tokens_.response(r)] = 1;
    }
    if (s.response_len >= 1) legal[tokens_.end()] = 1;
  }
}

void Policy::advance(State& s, TokenId token) const {
  switch (tokens_.kind(token)) {
    case TokenVocab::Kind::kEmotion:
      s.used[token] = 1;
      s.want_bucket = true;
      if (s.stage == 0 && !s.lead) s.lead = tokens_.emotion_of(token);
      if (s.stage == 1 && !s.self_lead) s.self_lead = tokens_.emotion_of(token);
      break;
    case TokenVocab::Kind::kBucket:
      s.want_bucket = false;
      ++s.pairs;
      break;
    case TokenVocab::Kind::kSepO:
      s.stage = 1;
      s.pairs = 0;
      std::fill(s.used.begin(), s.used.end(), 0);
      break;
    case TokenVocab::Kind::kSepS:
      s.stage = 2;
      break;
    case TokenVocab::Kind::kResponse:
      ++s.response_len;
      break;
    case TokenVocab::Kind::kEnd:
      s.stage = 3;
      break;
  }
  s.prev = token;
  ++s.position;
}

void Policy::check_features(const ContextFeatures& features) const {
  if (features.values.size() != config_.feature_dim) {
    fail(ErrorCode::kInvalidArgument, "feature vector has the wrong dimension");
  }
}

void Policy::base_logits(const PolicyParams& params, const ContextFeatures& features,
                         std::vector<double>& out) const {
  const std::size_t v = tokens_.size();
  const std::size_t d = config_.feature_dim;
  out.assign(v, 0.0);
  for (std::size_t k = 0; k < v; ++k) {
    double z = params.bias(k);
    for (std::size_t j = 0; j < d; ++j) z += params.weight(k, j) * features.values[j];
    out[k] = z;
  }
}

void Policy::distribution(const PolicyParams& params, const std::vector<double>& base,
                          const State& s, Scratch& scratch) const {
  legal_tokens(s, scratch.legal);
  const std::size_t v = tokens_.size();
  const std::size_t d = config_.feature_dim;
  const std::size_t stage_col = d + v + static_cast<std::size_t>(s.stage);
  const std::size_t position_col = d + v + 3 + 2 * emotions_.size() + s.position;
  scratch.probs.assign(v, 0.0);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < v; ++k) {
    if (!scratch.legal[k]) continue;
    double z = base[k] + params.weight(k, stage_col) + params.weight(k, position_col);
    if (s.prev) z += params.weight(k, d + *s.prev);
    if (s.lead) z += params.weight(k, d + v + 3 + s.lead->index());
    if (s.self_lead) z += params.weight(k, d + v + 3 + emotions_.size() + s.self_lead->index());
    scratch.probs[k] = z;
    max_logit = std::max(max_logit, z);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < v; ++k) {
    if (!scratch.legal[k]) continue;
    scratch.probs[k] = std::exp(scratch.probs[k] - max_logit);
    total += scratch.probs[k];
  }
  for (std::size_t k = 0; k < v; ++k) {
    if (scratch.legal[k]) scratch.probs[k] /= total;
  }
}

// ---------------------------------------------------------------------------
// Sampling and likelihood

SampledTrajectory Policy::sample(const PolicyParams& params, const ContextFeatures& features,
                                 Rng& rng, std::size_t max_len) const {
  check_features(features);
  if (max_len < min_length()) {
    fail(ErrorCode::kInvalidArgument, "max_len shorter than the minimal grammatical length");
  }
  std::vector<double> base;
  base_logits(params, features, base);
  Scratch scratch;
  State s = initial_state();
  SampledTrajectory out;
  while (s.stage != 3 && out.tokens.size() < max_len) {
    distribution(params, base, s, scratch);
    const auto tok = static_cast<TokenId>(rng.categorical(scratch.probs));
    if (tok == tokens_.sep_o()) out.sep_o_index = out.tokens.size();
    if (tok == tokens_.sep_s()) out.sep_s_index = out.tokens.size();
    out.tokens.push_back(tok);
    out.logprobs.push_back(std::log(scratch.probs[tok]));
    advance(s, tok);
  }
  out.truncated = s.stage != 3;
  if (!out.truncated) out.decoded = decode(out.tokens);
  return out;
}

std::vector<TokenId> Policy::greedy(const PolicyParams& params,
                                    const ContextFeatures& features) const {
  check_features(features);
  std::vector<double> base;
  base_logits(params, features, base);
  Scratch scratch;
  State s = initial_state();
  std::vector<TokenId> out;
  while (s.stage != 3) {
    distribution(params, base, s, scratch);
    std::size_t best = tokens_.size();
    for (std::size_t k = 0; k < tokens_.size(); ++k) {
      if (!scratch.legal[k]) continue;
      if (best == tokens_.size() || scratch.probs[k] > scratch.probs[best]) best = k;
    }
    out.push_back(static_cast<TokenId>(best));
    advance(s, static_cast<TokenId>(best));
  }
  return out;
}

double Policy::logprob(const PolicyParams& params, const ContextFeatures& features,
                       std::span<const TokenId> tokens) const {
  check_features(features);
  std::vector<double> base;
  base_logits(params, features, base);
  Scratch scratch;
  State s = initial_state();
  double lp = 0.0;
  for (TokenId tok : tokens) {
    if (s.stage == 3) fail(ErrorCode::kUngrammatical, "token after END");
    distribution(params, base, s, scratch);
    if (tok >= tokens_.size() || !scratch.legal[tok]) {
      fail(ErrorCode::kUngrammatical, "token forbidden by the grammar mask");
    }
    lp += std::log(scratch.probs[tok]);
    advance(s, tok);
  }
  return lp;
}

double Policy::accumulate_logprob_gradient(const PolicyParams& params,
                                           const ContextFeatures& features,
                                           std::span<const TokenId> tokens, double scale,
                                           PolicyParams& grad) const {
  check_features(features);
  const std::size_t v = tokens_.size();
  const std::size_t d = config_.feature_dim;
  std::vector<double> base;
  base_logits(params, features, base);
  std::vector<double> feature_coef(v, 0.0);
  Scratch scratch;
  State s = initial_state();
  double lp = 0.0;
  for (TokenId tok : tokens) {
    if (s.stage == 3) fail(ErrorCode::kUngrammatical, "token after END");
    distribution(params, base, s, scratch);
    if (tok >= v || !scratch.legal[tok]) {
      fail(ErrorCode::kUngrammatical, "token forbidden by the grammar mask");
    }
    lp += std::log(scratch.probs[tok]);
    const std::size_t stage_col = d + v + static_cast<std::size_t>(s.stage);
    const std::size_t position_col = d + v + 3 + 2 * emotions_.size() + s.position;
    for (std::size_t k = 0; k < v; ++k) {
      if (!scratch.legal[k]) continue;
      const double c = scale * ((k == tok ? 1.0 : 0.0) - scratch.probs[k]);
      feature_coef[k] += c;
      grad.bias(k) += c;
      grad.weight(k, stage_col) += c;
      grad.weight(k, position_col) += c;
      if (s.prev) grad.weight(k, d + *s.prev) += c;
      if (s.lead) grad.weight(k, d + v + 3 + s.lead->index()) += c;
      if (s.self_lead) grad.weight(k, d + v + 3 + emotions_.size() + s.self_lead->index()) += c;
    }
    advance(s, tok);
  }
  for (std::size_t k = 0; k < v; ++k) {
    if (feature_coef[k] == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) grad.weight(k, j) += feature_coef[k] * features.values[j];
  }
  return lp;
}

std::vector<double> Policy::next_token_distribution(const PolicyParams& params,
                                                    const ContextFeatures& features,
                                                    std::span<const TokenId> prefix) const {
  check_features(features);
  std::vector<double> base;
  base_logits(params, features, base);
  Scratch scratch;
  State s = initial_state();
  for (TokenId tok : prefix) {
    legal_tokens(s, scratch.legal);
    if (s.stage == 3 || tok >= tokens_.size() || !scratch.legal[tok]) {
      fail(ErrorCode::kUngrammatical, "prefix forbidden by the grammar mask");
    }
    advance(s, tok);
  }
  if (s.stage == 3) return std::vector<double>(tokens_.size(), 0.0);
  distribution(params, base, s, scratch);
  return scratch.probs;
}

StageEntropies Policy::stage_entropies(const PolicyParams& params,
                                       const ContextFeatures& features, std::size_t count,
                                       Rng& rng) const {
  check_features(features);
  if (count == 0) fail(ErrorCode::kInvalidArgument, "entropy sample count must be positive");
  std::vector<double> base;
  base_logits(params, features, base);
  Scratch scratch;
  double sum[3] = {0.0, 0.0, 0.0};
  double n[3] = {0.0, 0.0, 0.0};
  for (std::size_t c = 0; c < count; ++c) {
    State s = initial_state();
    while (s.stage != 3) {
      distribution(params, base, s, scratch);
      double h = 0.0;
      for (std::size_t k = 0; k < tokens_.size(); ++k) {
        const double p = scratch.probs[k];
        if (p > 0.0) h -= p * std::log(p);
      }
      sum[s.stage] += std::max(h, 0.0);
      n[s.stage] += 1.0;
      const auto tok = static_cast<TokenId>(rng.categorical(scratch.probs));
      advance(s, tok);
    }
  }
  return StageEntropies{sum[0] / n[0], sum[1] / n[1], sum[2] / n[2]};
}

// ---------------------------------------------------------------------------
// Training

SurrogateGradient Policy::grad_surrogate(const PolicyParams& params,
                                         std::span<const GroupBatch> groups,
                                         const ClipConfig& clip) const {
  SurrogateGradient out;
  out.gradient = zero_params();
  if (groups.empty()) return out;
  const double inv_groups = 1.0 / static_cast<double>(groups.size());
  for (const auto& g : groups) {
    std::vector<double> new_lp;
    new_lp.reserve(g.trajectories.size());
    for (const auto& t : g.trajectories) new_lp.push_back(logprob(params, g.features, t));
    const SurrogateResult s = surrogate_loss(new_lp, g.old_logprobs, g.advantages.values, clip);
    out.objective += inv_groups * s.loss;
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      if (s.grad_scale[i] == 0.0) continue;
      accumulate_logprob_gradient(params, g.features, g.trajectories[i],
                                  inv_groups * s.grad_scale[i], out.gradient);
    }
  }
  return out;
}

double Policy::mean_nll(const PolicyParams& params, std::span<const FitExample> dataset) const {
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& ex : dataset) {
    nll -= logprob(params, ex.features, ex.tokens);
    count += ex.tokens.size();
  }
  return count == 0 ? 0.0 : nll / static_cast<double>(count);
}

FitResult Policy::mle_fit(const PolicyParams& init, std::span<const FitExample> dataset,
                          int epochs, double lr) const {
  FitResult out{init, {}};
  if (dataset.empty() || epochs <= 0) return out;
  std::size_t count = 0;
  for (const auto& ex : dataset) count += ex.tokens.size();
  if (count == 0) return out;
  const double inv = 1.0 / static_cast<double>(count);
  PolicyParams grad = zero_params();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad.flat().begin(), grad.flat().end(), 0.0);
    double ll = 0.0;
    for (const auto& ex : dataset) {
      ll += accumulate_logprob_gradient(out.params, ex.features, ex.tokens, inv, grad);
    }
    const double nll = -ll * inv;
    if (!std::isfinite(nll)) fail(ErrorCode::kDiverged, "negative log-likelihood is not finite");
    out.nll_history.push_back(nll);
    // grad holds d(mean log-likelihood); descend the NLL.
    out.params.axpy(lr, grad);
    if (!out.params.all_finite()) fail(ErrorCode::kDiverged, "parameters became non-finite");
  }
  const double final_nll = mean_nll(out.params, dataset);
  if (!std::isfinite(final_nll)) fail(ErrorCode::kDiverged, "negative log-likelihood is not finite");
  out.nll_history.push_back(final_nll);
  return out;
}

// ---------------------------------------------------------------------------
// Text <-> tokens

std::optional<StructuredOutput> Policy::decode(std::span<const TokenId> tokens) const {
  State s = initial_state();
  std::vector<LabelWeight> stage_sets[2];
  std::string response;
  std::vector<char> legal;
  std::optional<LabelId> pending;
  for (TokenId tok : tokens) {
    legal_tokens(s, legal);
    if (s.stage == 3 || tok >= tokens_.size() || !legal[tok]) return std::nullopt;
    switch (tokens_.kind(tok)) {
      case TokenVocab::Kind::kEmotion:
        pending = tokens_.emotion_of(tok);
        break;
      case TokenVocab::Kind::kBucket:
        stage_sets[s.stage].emplace_back(*pending,
                                         tokens_.bucket_of(tok) / static_cast<double>(kWeightBuckets));
        break;
      case TokenVocab::Kind::kResponse:
        if (!response.empty()) response.push_back(' ');
        response += TokenVocab::response_name(tokens_.response_of(tok));
        break;
      default:
        break;
    }
    advance(s, tok);
  }
  if (s.stage != 3) return std::nullopt;
  return StructuredOutput{WeightedEmotionSet(std::move(stage_sets[0])),
                          WeightedEmotionSet(std::move(stage_sets[1])), std::move(response)};
}

std::vector<TokenId> Policy::encode(const StructuredOutput& output) const {
  std::vector<TokenId> out;
  auto emit_set = [&](const WeightedEmotionSet& set) {
    if (set.empty()) fail(ErrorCode::kInvalidArgument, "cannot encode an empty emotion set");
    for (const auto& [label, w] : set.entries()) {
      out.push_back(tokens_.emotion(label));
      out.push_back(tokens_.bucket(weight_to_bucket(w)));
    }
  };
  emit_set(output.last_emotions);
  out.push_back(tokens_.sep_o());
  emit_set(output.my_emotions);
  out.push_back(tokens_.sep_s());
  const auto ws = words(output.my_output);
  if (ws.empty() || ws.size() > config_.max_response_len) {
    fail(ErrorCode::kInvalidArgument, "response must have 1..max_response_len tokens");
  }
  for (auto w : ws) {
    auto r = tokens_.parse_response_name(w);
    if (!r) fail(ErrorCode::kInvalidArgument, "not a response token: " + std::string(w));
    out.push_back(tokens_.response(*r));
  }
  out.push_back(tokens_.end());
  return out;
}

std::string Policy::render(const SampledTrajectory& trajectory) const {
  if (trajectory.decoded) return serialize_structured_output(*trajectory.decoded, emotions_);
  std::string out;
  for (TokenId t : trajectory.tokens) {
    if (!out.empty()) out.push_back(' ');
    out += tokens_.name(t, emotions_);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::string_view kCheckpointMagic = "selfemo-policy";
constexpr int kCheckpointVersion = 1;
}  // namespace

void Policy::save(std::ostream& out, const PolicyParams& params,
                  std::uint64_t feature_seed) const {
  if (params.size() != zero_params().size()) {
    fail(ErrorCode::kInvalidArgument, "parameters do not match the policy shape");
  }
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "emotions " << emotions_.size();
  for (const auto& l : emotions_.labels()) out << ' ' << l;
  out << '\n';
  out << "feature_dim " << config_.feature_dim << '\n';
  out << "response_tokens " << config_.response_tokens << '\n';
  out << "max_response_len " << config_.max_response_len << '\n';
  out << "feature_seed " << feature_seed << '\n';
  out << "params " << params.size() << '\n';
  char buf[64];
  for (double v : params.flat()) {
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, res.ptr - buf);
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "failed to write policy checkpoint");
}

Policy::Loaded Policy::load(std::istream& in) {
  auto expect = [&](std::string_view key) {
    std::string word;
    if (!(in >> word) || word != key) {
      fail(ErrorCode::kIo, "malformed checkpoint: expected '" + std::string(key) + "'");
    }
  };
  expect(kCheckpointMagic);
  int version = 0;
  if (!(in >> version) || version != kCheckpointVersion) {
    fail(ErrorCode::kIo, "unsupported checkpoint version");
  }
  expect("emotions");
  std::size_t n = 0;
  in >> n;
  std::vector<std::string> labels(n);
  for (auto& l : labels) in >> l;
  PolicyConfig config;
  std::uint64_t feature_seed = 0;
  std::size_t count = 0;
  expect("feature_dim");
  in >> config.feature_dim;
  expect("response_tokens");
  in >> config.response_tokens;
  expect("max_response_len");
  in >> config.max_response_len;
  expect("feature_seed");
  in >> feature_seed;
  expect("params");
  in >> count;
  if (!in) fail(ErrorCode::kIo, "malformed checkpoint header");
  Policy policy(EmotionVocab(std::move(labels)), config);
  PolicyParams params = policy.zero_params();
  if (count != params.size()) fail(ErrorCode::kIo, "checkpoint parameter count mismatch");
  std::string word;
  for (double& v : params.flat()) {
    if (!(in >> word)) fail(ErrorCode::kIo, "truncated checkpoint");
    auto res = std::from_chars(word.data(), word.data() + word.size(), v);
    if (res.ec != std::errc() || res.ptr != word.data() + word.size()) {
      fail(ErrorCode::kIo, "malformed checkpoint value");
    }
  }
  return Loaded{std::move(policy), std::move(params), feature_seed};
}

}  // namespace selfemo
