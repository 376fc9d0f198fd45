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

#include "biasnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

namespace biasnet {

double BinaryAuroc(std::span<const double> scores, std::span<const bool> positive) {
  Require(scores.size() == positive.size(), "AUROC: scores and labels differ in length");
  const std::size_t m = scores.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i;
    while (j + 1 < m && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (positive[order[k]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = m - n_pos;
  Require(n_pos > 0 && n_neg > 0, "AUROC needs both positives and negatives");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double AurocMulticlass(const Matrix& scores, std::span<const Label> labels) {
  Require(scores.rows() == static_cast<Eigen::Index>(labels.size()),
          "AUROC: score rows and labels differ in length");
  Require(scores.cols() == kNumClasses, "AUROC: expected one score column per class");
  Require(labels.size() >= 2, "AUROC needs at least two samples");
  std::array<std::size_t, kNumClasses> support{};
  for (Label l : labels) ++support[LabelIndex(l)];
  int present = 0;
  for (auto s : support) present += s > 0 ? 1 : 0;
  if (present < 2) {
    Fail(ErrorKind::kInvalidArgument, "AUROC undefined: labels contain a single class");
  }
  double total = 0.0;
  int used = 0;
  std::vector<double> col(labels.size());
  std::unique_ptr<bool[]> pos(new bool[labels.size()]);
  for (int c = 0; c < kNumClasses; ++c) {
    if (support[c] == 0) {
      spdlog::warn("AUROC: class {} absent from labels, skipped",
                   LabelName(static_cast<Label>(c)));
      continue;
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col[i] = scores(static_cast<Eigen::Index>(i), c);
      pos[i] = LabelIndex(labels[i]) == c;
    }
    total += BinaryAuroc(col, std::span<const bool>(pos.get(), labels.size()));
    ++used;
  }
  return total / used;
}

double MacroF1(std::span<const Label> predicted, std::span<const Label> labels) {
  Require(predicted.size() == labels.size(), "macro-F1: length mismatch");
  Require(!labels.empty(), "macro-F1 needs at least one sample");
  std::array<double, kNumClasses> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = LabelIndex(predicted[i]);
    const int t = LabelIndex(labels[i]);
    if (p == t) {
      tp[p] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    sum += denom > 0 ? 2 * tp[c] / denom : 0.0;
  }
  return sum / kNumClasses;
}

nlohmann::json TrialResult::ToJson() const {
  return {{"model_tag", model_tag},   {"seed", seed},
          {"test_set", test_set},     {"train_size", train_size},
          {"auroc", auroc},           {"macro_f1", macro_f1},
          {"encoder", encoder},       {"auroc_reduction", auroc_reduction},
          {"config_fingerprint", config_fingerprint}};
}

TrialResult TrialResult::FromJson(const nlohmann::json& j) {
  TrialResult r;
  try {
    r.model_tag = j.at("model_tag").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.test_set = j.at("test_set").get<std::string>();
    r.train_size = j.at("train_size").get<int>();
    r.auroc = j.at("auroc").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, std::string("trial result: ") + e.what());
  }
  r.encoder = j.value("encoder", std::string());
  r.auroc_reduction = j.value("auroc_reduction", std::string(kAurocReduction));
  r.config_fingerprint = j.value("config_fingerprint", std::string());
  if (!(r.auroc >= 0.0 && r.auroc <= 1.0) || !(r.macro_f1 >= 0.0 && r.macro_f1 <= 1.0)) {
    Fail(ErrorKind::kParse, "trial result metrics must lie in [0, 1]");
  }
  return r;
}

std::vector<TrialResult> LoadTrialResults(const std::string& path) {
  const std::string text = ReadFile(path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<TrialResult> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(TrialResult::FromJson(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      Fail(ErrorKind::kParse, path + ": line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      Fail(ErrorKind::kParse, path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void AppendTrialResult(const std::string& path, const TrialResult& result) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot append to " + path);
  out << result.ToJson().dump() << '\n';
}

Predictions Predict(const ModelParams& params, const std::vector<EncodedArticle>& articles) {
  Predictions p;
  p.scores.resize(static_cast<Eigen::Index>(articles.size()), kNumClasses);
  for (std::size_t i = 0; i < articles.size(); ++i) {
    const ForwardTrace trace = Forward(articles[i], params);
    p.scores.row(static_cast<Eigen::Index>(i)) = trace.mixture.transpose();
    p.predicted.push_back(static_cast<Label>(ArgMax(trace.mixture)));
    p.labels.push_back(articles[i].label);
  }
  return p;
}

std::string ConfigFingerprint(const ModelConfig& config, const CheckpointMeta& meta) {
  const nlohmann::json j = {{"config", config.ToJson()},
                            {"encoder", meta.encoder_name + "/" + meta.encoder_version},
                            {"encoder_dim", meta.encoder_dim},
                            {"extra", meta.extra}};
  return HexDigest(Fnv1a64(j.dump()));
}

TrialResult Evaluate(const Checkpoint& checkpoint, const std::vector<EncodedArticle>& split,
                     const std::string& encoder_identity, const std::string& model_tag,
                     const std::string& test_set) {
  const std::string expected =
      checkpoint.meta.encoder_name + "/" + checkpoint.meta.encoder_version;
  if (encoder_identity != expected) {
    Fail(ErrorKind::kInvalidArgument, "encoder mismatch: checkpoint was trained with " +
                                          expected + ", evaluation uses " + encoder_identity);
  }
  Require(!split.empty(), "split " + test_set + " is empty");
  const Predictions p = Predict(checkpoint.params, split);
  TrialResult r;
  r.model_tag = model_tag;
  r.seed = checkpoint.meta.seed;
  r.test_set = test_set;
  r.train_size = checkpoint.meta.extra.value("train_size", 0);
  r.auroc = AurocMulticlass(p.scores, p.labels);
  r.macro_f1 = MacroF1(p.predicted, p.labels);
  r.encoder = encoder_identity;
  r.config_fingerprint = ConfigFingerprint(checkpoint.params.config(), checkpoint.meta);
  return r;
}

std::vector<double> TrialGroup::Aurocs() const {
  std::vector<double> v;
  for (const auto& r : results) v.push_back(r.auroc);
  return v;
}

std::vector<double> TrialGroup::MacroF1s() const {
  std::vector<double> v;
  for (const auto& r : results) v.push_back(r.macro_f1);
  return v;
}

double Mean(std::span<const double> x) {
  Require(!x.empty(), "mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double SampleVariance(std::span<const double> x) {
  Require(x.size() >= 2, "sample variance needs at least two values");
  // Exactly zero for a constant sample, whose computed mean may be rounded.
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) return 0.0;
  const double m = Mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double SampleStd(std::span<const double> x) { return std::sqrt(SampleVariance(x)); }

}  // namespace biasnet
