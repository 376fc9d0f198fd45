/*
 * Copyright 2026 The biasnet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Brute-force reference computations used as test oracles.

#ifndef BIASNET_TESTS_ORACLES_HPP_
#define BIASNET_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "biasnet/common.hpp"

namespace biasnet::testing {

// Probability that a random positive outscores a random negative, ties 1/2.
inline double PairCountAuroc(std::span<const double> scores, std::span<const bool> positive) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Macro one-vs-rest over the classes present in labels.
inline double PairCountAurocMulticlass(const std::vector<std::vector<double>>& scores,
                                       const std::vector<int>& labels, int classes) {
  double total = 0.0;
  int used = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> col;
    std::unique_ptr<bool[]> pos(new bool[labels.size()]);
    bool any = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col.push_back(scores[i][static_cast<std::size_t>(c)]);
      pos[i] = labels[i] == c;
      any = any || pos[i];
    }
    if (!any) continue;
    total += PairCountAuroc(col, std::span<const bool>(pos.get(), labels.size()));
    ++used;
  }
  return total / used;
}

// Minimum over every monotone alignment path, enumerated explicitly.
inline double BruteForceDtw(std::span<const double> a, std::span<const double> b) {
  double best = std::numeric_limits<double>::infinity();
  auto walk = [&](auto&& self, std::size_t i, std::size_t j, double acc) -> void {
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size()) self(self, i + 1, j, acc + std::abs(a[i + 1] - b[j]));
    if (j + 1 < b.size()) self(self, i, j + 1, acc + std::abs(a[i] - b[j + 1]));
    if (i + 1 < a.size() && j + 1 < b.size()) {
      self(self, i + 1, j + 1, acc + std::abs(a[i + 1] - b[j + 1]));
    }
  };
  walk(walk, 0, 0, std::abs(a[0] - b[0]));
  return best;
}

// Adjusted Rand index between two labelings; 1.0 means identical partitions.
inline double AdjustedRandIndex(const std::vector<int>& x, const std::vector<int>& y) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rx, ry;
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[{x[i], y[i]}] += 1;
    rx[x[i]] += 1;
    ry[y[i]] += 1;
  }
  auto c2 = [](double n) { return n * (n - 1) / 2; };
  double sum_joint = 0, sum_x = 0, sum_y = 0;
  for (auto& [k, v] : joint) sum_joint += c2(v);
  for (auto& [k, v] : rx) sum_x += c2(v);
  for (auto& [k, v] : ry) sum_y += c2(v);
  const double expected = sum_x * sum_y / c2(static_cast<double>(x.size()));
  const double max_index = 0.5 * (sum_x + sum_y);
  if (max_index == expected) return 1.0;
  return (sum_joint - expected) / (max_index - expected);
}

}  // namespace biasnet::testing

#endif  // BIASNET_TESTS_ORACLES_HPP_
