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

#ifndef BIASNET_TRAINING_HPP_
#define BIASNET_TRAINING_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "biasnet/corpus.hpp"
#include "biasnet/encoder.hpp"
#include "biasnet/model.hpp"
#include "json.hpp"

namespace biasnet {

struct TrainConfig {
  int epochs = 25;
  double weight_decay = 1e-5;
  double max_lr = 5e-5;
  double warmup_fraction = 0.1;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Keep a copy of the parameters from the epoch with the best valid AUROC.
  bool keep_best_valid = false;

  void Validate() const;
  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

// Linear ramp 0 -> max_lr over the first warmup_fraction of the steps, then
// cosine decay to 0.
double OneCycleLr(long step, long total_steps, const TrainConfig& config);

// Adam with decoupled weight decay: params shrink by lr * weight_decay
// before the moment-based step, never through the gradient.
class AdamW {
 public:
  explicit AdamW(std::size_t size);
  void Step(Vector& params, const Vector& grad, double lr, const TrainConfig& config);
  long steps() const { return t_; }

 private:
  Vector m_;
  Vector v_;
  long t_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> valid_auroc;
  std::optional<double> valid_macro_f1;
  double lr_end = 0.0;

  nlohmann::json ToJson() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  std::optional<ModelParams> best_valid_params;
  int best_valid_epoch = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Deterministic in (data, configs): initialization and per-epoch order come
// from config.seed. A non-finite loss aborts with the step, learning rate
// and batch ids.
TrainResult Train(const std::vector<EncodedArticle>& train_set,
                  const std::vector<EncodedArticle>& valid_set, const ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Mean loss and gradient over a batch; identical to averaging per-article
// LossAndGradient results in order.
double BatchLossAndGradient(const std::vector<const EncodedArticle*>& batch,
                            const ModelParams& params, Vector& grad);

// Picks a split's articles from an encoded corpus, truncated to the model's
// sentence cap.
std::vector<EncodedArticle> SelectSplit(const std::vector<EncodedArticle>& corpus,
                                        const std::vector<std::string>& ids, int max_sentences);

}  // namespace biasnet

#endif  // BIASNET_TRAINING_HPP_
