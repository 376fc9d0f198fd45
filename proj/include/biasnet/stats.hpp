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

// Robustness statistics over repeated training trials.

#ifndef BIASNET_STATS_HPP_
#define BIASNET_STATS_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasnet/metrics.hpp"
#include "json.hpp"

namespace biasnet {

double NormalCdf(double x);
double NormalQuantile(double p);
double StudentTCdf(double t, double df);
double FisherFCdf(double x, double d1, double d2);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Royston's approximation; 3 <= n <= 5000, nonzero range.
TestResult ShapiroWilk(std::span<const double> sample);

// Two-sided test of equal means. Welch by default; pooled variance on
// request. Two constant samples with the same value give t = 0, p = 1.
TestResult TTestTwoSided(std::span<const double> a, std::span<const double> b,
                         bool pooled = false);

// f0 = var(baseline) / var(ours), p = P(F >= f0) with (n_b - 1, n_o - 1) df.
TestResult FTestOneSided(std::span<const double> baseline, std::span<const double> ours);

// Natural-log Jensen-Shannon divergence between two normal densities,
// integrated numerically. Result lies in [0, ln 2].
double JsdGaussian(double mean_a, double std_a, double mean_b, double std_b);
// Fits a normal to each group's AUROC sample (mean, sample std).
double JsdGaussian(const TrialGroup& a, const TrialGroup& b);

// "***" p < .001, "**" p < .01, "*" p < .05, "(ns)" otherwise.
std::string SignificanceStars(double p);

struct ComparisonSpec {
  std::string baseline_tag = "bert";
  std::string ours_tag = "ours";
  std::vector<std::string> test_sets = {"test1", "test2"};
  std::vector<int> train_sizes;  // empty: every size present in the results
  bool pooled_t_test = false;

  nlohmann::json ToJson() const;
};

struct CellSummary {
  int n = 0;
  double auroc_mean = 0.0;
  double auroc_std = 0.0;
  double f1_mean = 0.0;
  double f1_std = 0.0;
  // Absent when the sample is too small or constant.
  std::optional<TestResult> shapiro;
};

struct ModelRow {
  std::map<std::string, CellSummary> cells;  // by test set
  // Between the first two test sets, on AUROC.
  std::optional<double> jsd;
  std::optional<TestResult> t_test;
};

struct SizeBlock {
  int train_size = 0;
  ModelRow baseline;
  ModelRow ours;
  std::map<std::string, TestResult> f_test;  // AUROC variance ratio by test set
};

struct ComparisonReport {
  ComparisonSpec spec;
  std::vector<SizeBlock> blocks;

  nlohmann::json ToJson() const;
  // Aligned plain-text table, one block per train size.
  std::string ToText() const;
};

// Every requested (model, test set, size) cell needs at least two trials;
// all missing or short cells are listed in a single error.
ComparisonReport BuildComparisonReport(const std::vector<TrialResult>& results,
                                       const ComparisonSpec& spec);

}  // namespace biasnet

#endif  // BIASNET_STATS_HPP_
