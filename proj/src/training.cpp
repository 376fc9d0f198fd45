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

#include "biasnet/training.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "biasnet/metrics.hpp"

namespace biasnet {

void TrainConfig::Validate() const {
  Require(epochs >= 1, "epochs must be >= 1");
  Require(warmup_fraction > 0.0 && warmup_fraction < 1.0, "warmup_fraction must be in (0, 1)");
  Require(max_lr > 0.0, "max_lr must be > 0");
  Require(weight_decay >= 0.0, "weight_decay must be >= 0");
  Require(batch_size >= 1, "batch_size must be >= 1");
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"epochs", epochs},       {"weight_decay", weight_decay},
          {"max_lr", max_lr},       {"warmup_fraction", warmup_fraction},
          {"batch_size", batch_size}, {"seed", seed},
          {"beta1", beta1},         {"beta2", beta2},
          {"adam_eps", adam_eps},   {"keep_best_valid", keep_best_valid}};
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.max_lr = j.value("max_lr", c.max_lr);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.keep_best_valid = j.value("keep_best_valid", c.keep_best_valid);
  c.Validate();
  return c;
}

double OneCycleLr(long step, long total_steps, const TrainConfig& config) {
  Require(total_steps > 0, "total_steps must be > 0");
  Require(step >= 0 && step < total_steps, "step out of range");
  const double warmup = config.warmup_fraction * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s < warmup) return config.max_lr * s / warmup;
  const double progress = (s - warmup) / (static_cast<double>(total_steps) - warmup);
  return config.max_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(std::size_t size)
    : m_(Vector::Zero(static_cast<Eigen::Index>(size))),
      v_(Vector::Zero(static_cast<Eigen::Index>(size))) {}

void AdamW::Step(Vector& params, const Vector& grad, double lr, const TrainConfig& config) {
  ++t_;
  params *= (1.0 - lr * config.weight_decay);
  m_ = config.beta1 * m_ + (1.0 - config.beta1) * grad;
  v_ = config.beta2 * v_ + (1.0 - config.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t_));
  params.array() -=
      lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + config.adam_eps);
}

nlohmann::json EpochLog::ToJson() const {
  nlohmann::json j = {{"epoch", epoch}, {"train_loss", train_loss}};
  if (valid_auroc) j["valid_auroc"] = *valid_auroc;
  if (valid_macro_f1) j["valid_macro_f1"] = *valid_macro_f1;
  j["lr_end"] = lr_end;
  return j;
}

double BatchLossAndGradient(const std::vector<const EncodedArticle*>& batch,
                            const ModelParams& params, Vector& grad) {
  Require(!batch.empty(), "empty batch");
  grad.setZero();
  double loss = 0.0;
  for (const EncodedArticle* a : batch) {
    loss += LossAndGradient(a->embeddings, a->label, params, grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  grad *= inv;
  return loss * inv;
}

TrainResult Train(const std::vector<EncodedArticle>& train_set,
                  const std::vector<EncodedArticle>& valid_set, const ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.Validate();
  Require(!train_set.empty(), "train split is empty");
  TrainResult result;
  result.params = ModelParams::Initialize(model_config, config.seed);
  ModelParams& params = result.params;
  Require(train_set.front().embeddings.cols() == params.config().d_s,
          "encoder dim does not match model d_s");

  const long steps_per_epoch =
      (static_cast<long>(train_set.size()) + config.batch_size - 1) / config.batch_size;
  const long total_steps = steps_per_epoch * config.epochs;
  AdamW optimizer(params.size());
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(params.size()));
  double best_valid = -1.0;

  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(DeriveSeed(config.seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
    rng.Shuffle(order);

    double epoch_loss = 0.0;
    double lr = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::vector<const EncodedArticle*> batch;
      for (std::size_t i = start;
           i < order.size() && i < start + static_cast<std::size_t>(config.batch_size); ++i) {
        batch.push_back(&train_set[order[i]]);
      }
      lr = OneCycleLr(step, total_steps, config);
      const double loss = BatchLossAndGradient(batch, params, grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        std::ostringstream ids;
        for (std::size_t i = 0; i < batch.size(); ++i) {
          ids << (i ? "," : "") << batch[i]->article_id;
        }
        Fail(ErrorKind::kNumeric, "non-finite loss at step " + std::to_string(step) +
                                      " (lr " + std::to_string(lr) + ", batch " + ids.str() +
                                      ")");
      }
      optimizer.Step(params.values(), grad, lr, config);
      if (!params.values().allFinite()) {
        Fail(ErrorKind::kNumeric, "non-finite parameters after step " + std::to_string(step));
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      ++step;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = epoch_loss / static_cast<double>(train_set.size());
    entry.lr_end = lr;
    if (!valid_set.empty()) {
      const Predictions p = Predict(params, valid_set);
      entry.valid_macro_f1 = MacroF1(p.predicted, p.labels);
      try {
        entry.valid_auroc = AurocMulticlass(p.scores, p.labels);
      } catch (const Error& e) {
        spdlog::warn("epoch {}: valid AUROC unavailable: {}", epoch, e.what());
      }
      if (config.keep_best_valid && entry.valid_auroc && *entry.valid_auroc > best_valid) {
        best_valid = *entry.valid_auroc;
        result.best_valid_params = params;
        result.best_valid_epoch = epoch;
      }
    }
    spdlog::info("epoch {}/{} train_loss {:.6f} lr_end {:.3e}", epoch, config.epochs,
                 entry.train_loss, entry.lr_end);
    if (on_epoch) on_epoch(entry);
    result.log.push_back(entry);
  }
  return result;
}

std::vector<EncodedArticle> SelectSplit(const std::vector<EncodedArticle>& corpus,
                                        const std::vector<std::string>& ids, int max_sentences) {
  std::unordered_map<std::string, const EncodedArticle*> index;
  for (const auto& a : corpus) index.emplace(a.article_id, &a);
  std::vector<EncodedArticle> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      Fail(ErrorKind::kInvalidArgument, "manifest references unknown article \"" + id + "\"");
    }
    out.push_back(TruncateArticle(*it->second, max_sentences));
  }
  return out;
}

}  // namespace biasnet
