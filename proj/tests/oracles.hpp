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

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical routines.

#ifndef SELFEMO_TESTS_ORACLES_HPP_
#define SELFEMO_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

namespace selfemo::testing {

// Label index -> positive integer weight (a weight of 0.1 is stored as 1 when
// working on the tenths grid).
using IntSet = std::map<int, std::int64_t>;

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Exact weighted IOU of two integer-weighted sets: after normalization the
// weights are a_e / A and b_e / B, so cross-multiplying by A * B keeps every
// quantity integral. Enumerates every label of a vocabulary of size `labels`.
inline Fraction iou_exact(const IntSet& p, const IntSet& l, int labels) {
  std::int64_t a_total = 0;
  std::int64_t b_total = 0;
  for (const auto& [k, w] : p) a_total += w;
  for (const auto& [k, w] : l) b_total += w;
  std::int64_t num = 0;
  std::int64_t den = 0;
  for (int e = 0; e < labels; ++e) {
    const auto ip = p.find(e);
    const auto il = l.find(e);
    const std::int64_t a = ip == p.end() ? 0 : ip->second * b_total;
    const std::int64_t b = il == l.end() ? 0 : il->second * a_total;
    num += std::min(a, b);
    den += std::max(a, b);
  }
  const std::int64_t g = std::gcd(num, den);
  return Fraction{num / g, den / g};
}

// Every non-empty set of up to three labels from `labels`, each weight drawn
// from 1..grid.
inline std::vector<IntSet> enumerate_sets(int labels, int grid) {
  std::vector<IntSet> out;
  for (int mask = 1; mask < (1 << labels); ++mask) {
    std::vector<int> members;
    for (int e = 0; e < labels; ++e) {
      if (mask & (1 << e)) members.push_back(e);
    }
    if (members.size() > 3) continue;
    std::vector<int> w(members.size(), 1);
    while (true) {
      IntSet s;
      for (std::size_t i = 0; i < members.size(); ++i) s[members[i]] = w[i];
      out.push_back(s);
      std::size_t i = 0;
      while (i < w.size() && w[i] == grid) w[i++] = 1;
      if (i == w.size()) break;
      ++w[i];
    }
  }
  return out;
}

// Population mean and standard deviation, written out longhand.
inline void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace selfemo::testing

#endif  // SELFEMO_TESTS_ORACLES_HPP_
