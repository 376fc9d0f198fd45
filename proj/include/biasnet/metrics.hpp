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

#ifndef BIASNET_METRICS_HPP_
#define BIASNET_METRICS_HPP_

#include <span>
#include <string>
#include <vector>

#include "biasnet/common.hpp"
#include "biasnet/encoder.hpp"
#include "biasnet/model.hpp"
#include "json.hpp"

namespace biasnet {

inline constexpr char kAurocReduction[] = "macro-ovr";

// Rank-based binary AUROC with midranks for ties. Requires at least one
// positive and one negative.
double BinaryAuroc(std::span<const double> scores, std::span<const bool> positive);

// Mean over classes of one-vs-rest AUROC of scores(:, c). Classes absent from
// labels are skipped with a warning; fewer than two present classes is an
// error.
double AurocMulticlass(const Matrix& scores, std::span<const Label> labels);

// Unweighted mean of per-class F1; a class with no predictions and no
// support contributes 0.
double MacroF1(std::span<const Label> predicted, std::span<const Label> labels);

struct TrialResult {
  std::string model_tag;
  std::uint64_t seed = 0;
  std::string test_set;
  int train_size = 0;
  double auroc = 0.0;
  double macro_f1 = 0.0;
  std::string encoder;
  std::string auroc_reduction = kAurocReduction;
  std::string config_fingerprint;

  nlohmann::json ToJson() const;
  static TrialResult FromJson(const nlohmann::json& j);
};

std::vector<TrialResult> LoadTrialResults(const std::string& path);
void AppendTrialResult(const std::string& path, const TrialResult& result);

struct Predictions {
  Matrix scores;  // m x 3 mixture probabilities
  std::vector<Label> predicted;
  std::vector<Label> labels;
};
Predictions Predict(const ModelParams& params, const std::vector<EncodedArticle>& articles);

// Fingerprint of everything that determines a trained model's behaviour.
std::string ConfigFingerprint(const ModelConfig& config, const CheckpointMeta& meta);

// Runs the model over one split. The encoder identity must equal the one
// recorded in the checkpoint.
TrialResult Evaluate(const Checkpoint& checkpoint, const std::vector<EncodedArticle>& split,
                     const std::string& encoder_identity, const std::string& model_tag,
                     const std::string& test_set);

struct TrialGroup {
  std::string model_tag;
  std::string test_set;
  int train_size = 0;
  std::vector<TrialResult> results;

  std::vector<double> Aurocs() const;
  std::vector<double> MacroF1s() const;
};

double Mean(std::span<const double> x);
// Sample standard deviation (n - 1 denominator).
double SampleStd(std::span<const double> x);
double SampleVariance(std::span<const double> x);

}  // namespace biasnet

#endif  // BIASNET_METRICS_HPP_
