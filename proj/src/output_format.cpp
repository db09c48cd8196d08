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

// Reader and writer for the three-field output dict.

#include <algorithm>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfemo/emotion.hpp"

namespace selfemo {
namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kLastKey = "last_emotions";
constexpr std::string_view kMyKey = "my_emotions";
constexpr std::string_view kOutputKey = "my_output";

struct Value {
  enum class Kind { kDict, kString, kNumber };
  Kind kind = Kind::kNumber;
  std::vector<std::pair<std::string, Value>> items;
  std::string text;
  double number = 0.0;
};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Recursive-descent reader over a Python-literal subset: dicts, quoted
// strings and plain decimals. Any syntax error yields std::nullopt.
class Reader {
 public:
  Reader(std::string_view src, std::size_t pos) : src_(src), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  std::optional<Value> value() {
    skip();
    if (pos_ >= src_.size()) return std::nullopt;
    const char c = src_[pos_];
    if (c == '{') return dict();
    if (c == '"' || c == '\'') {
      auto s = string();
      if (!s) return std::nullopt;
      Value v;
      v.kind = Value::Kind::kString;
      v.text = std::move(*s);
      return v;
    }
    return number();
  }

 private:
  void skip() {
    while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
  }

  std::optional<Value> dict() {
    ++pos_;  // '{'
    Value out;
    out.kind = Value::Kind::kDict;
    skip();
    if (pos_ < src_.size() && src_[pos_] == '}') {
      ++pos_;
      return out;
    }
    while (true) {
      skip();
      if (pos_ >= src_.size()) return std::nullopt;
      if (src_[pos_] != '"' && src_[pos_] != '\'') return std::nullopt;
      auto key = string();
      if (!key) return std::nullopt;
      skip();
      if (pos_ >= src_.size() || src_[pos_] != ':') return std::nullopt;
      ++pos_;
      auto v = value();
      if (!v) return std::nullopt;
      out.items.emplace_back(std::move(*key), std::move(*v));
      skip();
      if (pos_ >= src_.size()) return std::nullopt;
      if (src_[pos_] == '}') {
        ++pos_;
        return out;
      }
      if (src_[pos_] != ',') return std::nullopt;
      ++pos_;
      skip();
      // Python allows a trailing comma.
      if (pos_ < src_.size() && src_[pos_] == '}') {
        ++pos_;
        return out;
      }
    }
  }

  std::optional<std::string> string() {
    const char quote = src_[pos_++];
    std::string out;
    while (pos_ < src_.size()) {
      const char c = src_[pos_++];
      if (c == quote) return out;
      if (c == '\\') {
        if (pos_ >= src_.size()) return std::nullopt;
        const char e = src_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          default: out.push_back(e); break;
        }
        continue;
      }
      if (c == '\n') return std::nullopt;  // unterminated literal
      out.push_back(c);
    }
    return std::nullopt;
  }

  // [+-]? digits [. digits]  or  [+-]? . digits ; exponents are rejected.
  std::optional<Value> number() {
    const std::size_t start = pos_;
    if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
    std::size_t digits = 0;
    while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
      ++pos_;
      ++digits;
    }
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
        ++pos_;
        ++digits;
      }
    }
    if (digits == 0) return std::nullopt;
    if (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == 'e' || c == 'E' || c == '_' || (c >= 'a' && c <= 'z') ||
          (c >= 'A' && c <= 'Z')) {
        return std::nullopt;
      }
    }
    std::string_view tok = src_.substr(start, pos_ - start);
    bool negative = false;
    if (tok.front() == '+' || tok.front() == '-') {
      negative = tok.front() == '-';
      tok.remove_prefix(1);
    }
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v,
                               std::chars_format::fixed);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) return std::nullopt;
    Value out;
    out.kind = Value::Kind::kNumber;
    out.number = negative ? -v : v;
    return out;
  }

  std::string_view src_;
  std::size_t pos_;
};

// Lowest enumerator wins when several problems are present.
struct FailureSink {
  std::optional<ParseFailure> worst;
  void add(ParseFailure f) {
    if (!worst || static_cast<int>(f) < static_cast<int>(*worst)) worst = f;
  }
};

std::optional<WeightedEmotionSet> read_emotions(const Value& v,
                                                const EmotionVocab& vocab,
                                                FailureSink& sink) {
  if (v.kind != Value::Kind::kDict) {
    sink.add(ParseFailure::kMalformed);
    return std::nullopt;
  }
  bool ok = true;
  std::vector<LabelWeight> entries;
  for (const auto& [name, w] : v.items) {
    auto id = vocab.find(name);
    if (!id) {
      sink.add(ParseFailure::kUnknownLabel);
      ok = false;
    }
    if (w.kind != Value::Kind::kNumber) {
      sink.add(ParseFailure::kMalformed);
      ok = false;
      continue;
    }
    if (!(w.number > 0.0)) {
      sink.add(ParseFailure::kNonpositiveWeight);
      ok = false;
    }
    if (id) {
      const bool dup = std::any_of(entries.begin(), entries.end(),
                                   [&](const LabelWeight& e) { return e.first == *id; });
      if (dup) {
        sink.add(ParseFailure::kMalformed);
        ok = false;
      }
      entries.emplace_back(*id, w.number);
    }
  }
  if (v.items.size() > kMaxEmotionLabels) {
    sink.add(ParseFailure::kTooManyLabels);
    ok = false;
  }
  if (v.items.empty()) {
    sink.add(ParseFailure::kMalformed);
    ok = false;
  }
  if (!ok) return std::nullopt;
  return WeightedEmotionSet(std::move(entries));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void append_quoted(std::string& out, std::string_view s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c); break;
    }
  }
  out.push_back('"');
}

void append_emotions(std::string& out, const WeightedEmotionSet& set,
                     const EmotionVocab& vocab) {
  out.push_back('{');
  bool first = true;
  for (const auto& [label, w] : set.entries()) {
    if (!first) out += ", ";
    first = false;
    append_quoted(out, vocab.label(label));
    out += ": ";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), w, std::chars_format::fixed, 4);
    out.append(buf, res.ptr);
  }
  out.push_back('}');
}

}  // namespace

const char* parse_failure_name(ParseFailure failure) {
  switch (failure) {
    case ParseFailure::kNoDict: return "NO_DICT";
    case ParseFailure::kBadKeys: return "BAD_KEYS";
    case ParseFailure::kUnknownLabel: return "UNKNOWN_LABEL";
    case ParseFailure::kNonpositiveWeight: return "NONPOSITIVE_WEIGHT";
    case ParseFailure::kTooManyLabels: return "TOO_MANY_LABELS";
    case ParseFailure::kEmptyResponse: return "EMPTY_RESPONSE";
    case ParseFailure::kMalformed: return "MALFORMED";
  }
  return "UNKNOWN";
}

ParseOutcome parse_structured_output(std::string_view text,
                                     const EmotionVocab& vocab) {
  std::string_view rest = text;
  std::string_view lead = trim(rest);
  if (lead.substr(0, kThinkOpen.size()) == kThinkOpen) {
    const std::size_t close = lead.find(kThinkClose);
    if (close == std::string_view::npos) return ParseOutcome::invalid(ParseFailure::kNoDict);
    rest = lead.substr(close + kThinkClose.size());
  }

  const std::size_t open = rest.find('{');
  if (open == std::string_view::npos) return ParseOutcome::invalid(ParseFailure::kNoDict);
  Reader reader(rest, open);
  auto top = reader.value();
  if (!top) return ParseOutcome::invalid(ParseFailure::kMalformed);
  if (rest.find('{', reader.pos()) != std::string_view::npos) {
    return ParseOutcome::invalid(ParseFailure::kMalformed);
  }

  const Value* last = nullptr;
  const Value* mine = nullptr;
  const Value* response = nullptr;
  bool bad_keys = top->items.size() != 3;
  for (const auto& [key, v] : top->items) {
    const Value** slot = nullptr;
    if (key == kLastKey) slot = &last;
    else if (key == kMyKey) slot = &mine;
    else if (key == kOutputKey) slot = &response;
    if (slot == nullptr || *slot != nullptr) {
      bad_keys = true;
      continue;
    }
    *slot = &v;
  }
  if (bad_keys || !last || !mine || !response) {
    return ParseOutcome::invalid(ParseFailure::kBadKeys);
  }

  FailureSink sink;
  auto last_set = read_emotions(*last, vocab, sink);
  auto my_set = read_emotions(*mine, vocab, sink);
  if (response->kind != Value::Kind::kString) {
    sink.add(ParseFailure::kMalformed);
  } else if (trim(response->text).empty()) {
    sink.add(ParseFailure::kEmptyResponse);
  }
  if (sink.worst) return ParseOutcome::invalid(*sink.worst);

  return ParseOutcome::valid(
      StructuredOutput{std::move(*last_set), std::move(*my_set), response->text});
}

std::string serialize_structured_output(const StructuredOutput& output,
                                        const EmotionVocab& vocab) {
  std::string out = "{\"last_emotions\": ";
  append_emotions(out, output.last_emotions, vocab);
  out += ", \"my_emotions\": ";
  append_emotions(out, output.my_emotions, vocab);
  out += ", \"my_output\": ";
  append_quoted(out, output.my_output);
  out.push_back('}');
  return out;
}

}  // namespace selfemo
