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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "biasnet/metrics.hpp"
#include "biasnet/training.hpp"
#include "model_checks.hpp"

namespace biasnet {
namespace {

using testing::RandomEmbeddings;
using testing::ToyConfig;

// Separable toy data: class c shifts embedding component c.
std::vector<EncodedArticle> ToyData(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EncodedArticle> out;
  for (int i = 0; i < per_class; ++i) {
    for (Label l : kAllLabels) {
      EncodedArticle a;
      a.article_id = "t" + std::to_string(out.size());
      a.label = l;
      a.embeddings = RandomEmbeddings(rng, 4, 8, 0.3);
      a.embeddings.col(LabelIndex(l)).array() += 1.5;
      out.push_back(std::move(a));
    }
  }
  return out;
}

TEST(OneCycleLr, WarmupThenCosine) {
  TrainConfig c;
  c.max_lr = 1.0;
  c.warmup_fraction = 0.1;
  EXPECT_EQ(OneCycleLr(0, 100, c), 0.0);
  EXPECT_NEAR(OneCycleLr(5, 100, c), 0.5, 1e-15);
  EXPECT_NEAR(OneCycleLr(10, 100, c), 1.0, 1e-15);
  EXPECT_NEAR(OneCycleLr(55, 100, c), 0.5, 1e-15);
  EXPECT_NEAR(OneCycleLr(99, 100, c), 0.5 * (1.0 + std::cos(std::numbers::pi * 89.0 / 90.0)),
              1e-15);
  for (long s = 1; s < 10; ++s) EXPECT_GT(OneCycleLr(s, 100, c), OneCycleLr(s - 1, 100, c));
  for (long s = 11; s < 100; ++s) EXPECT_LT(OneCycleLr(s, 100, c), OneCycleLr(s - 1, 100, c));
  EXPECT_THROW(OneCycleLr(100, 100, c), Error);
  EXPECT_THROW(OneCycleLr(0, 0, c), Error);
}

TEST(OneCycleLr, NoWarmup) {
  TrainConfig c;
  c.max_lr = 2.0;
  c.warmup_fraction = 0.0;
  EXPECT_EQ(OneCycleLr(0, 4, c), 2.0);
  EXPECT_NEAR(OneCycleLr(2, 4, c), 1.0, 1e-15);
}

TEST(AdamW, MatchesHandComputedSteps) {
  TrainConfig c;
  c.weight_decay = 0.1;
  AdamW opt(2);
  Vector p(2), g(2);
  p << 1.0, -2.0;
  g << 0.5, -4.0;
  // Reference recurrence written out per element.
  double ref[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  const double lrs[3] = {0.01, 0.02, 0.005};
  for (int t = 1; t <= 3; ++t) {
    const double lr = lrs[t - 1];
    opt.Step(p, g, lr, c);
    for (int i = 0; i < 2; ++i) {
      ref[i] -= lr * 0.1 * ref[i];
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    EXPECT_NEAR(p[0], ref[0], 1e-15);
    EXPECT_NEAR(p[1], ref[1], 1e-15);
  }
  EXPECT_EQ(opt.steps(), 3);
}

TEST(AdamW, FirstStepMovesByLr) {
  TrainConfig c;
  c.weight_decay = 0.0;
  AdamW opt(1);
  Vector p = Vector::Zero(1), g = Vector::Constant(1, 123.0);
  opt.Step(p, g, 0.01, c);
  EXPECT_NEAR(p[0], -0.01, 1e-9);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.epochs = 3;
  c.keep_best_valid = true;
  EXPECT_EQ(TrainConfig::FromJson(c.ToJson()).ToJson(), c.ToJson());
  c.batch_size = 0;
  EXPECT_THROW(c.Validate(), Error);
  c = TrainConfig{};
  c.warmup_fraction = 1.5;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(BatchLoss, IsMeanOfArticles) {
  const ModelParams p = ModelParams::Initialize(ToyConfig(), 1);
  const auto data = ToyData(2, 3);
  std::vector<const EncodedArticle*> batch = {&data[0], &data[1], &data[4]};
  Vector g = Vector::Zero(static_cast<Eigen::Index>(p.size()));
  const double loss = BatchLossAndGradient(batch, p, g);
  Vector ref = Vector::Zero(g.size());
  double ref_loss = 0;
  for (const auto* a : batch) ref_loss += LossAndGradient(a->embeddings, a->label, p, ref);
  EXPECT_NEAR(loss, ref_loss / 3.0, 1e-14);
  EXPECT_LT((g - ref / 3.0).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Train, DeterministicAndLearns) {
  const auto train = ToyData(10, 1);
  const auto valid = ToyData(4, 2);
  TrainConfig c;
  c.epochs = 8;
  c.batch_size = 2;
  c.max_lr = 5e-3;
  c.seed = 7;
  c.keep_best_valid = true;
  int calls = 0;
  const TrainResult a = Train(train, valid, ToyConfig(), c, [&](const EpochLog&) { ++calls; });
  const TrainResult b = Train(train, valid, ToyConfig(), c);
  EXPECT_EQ(calls, 8);
  EXPECT_EQ(a.params.values(), b.params.values());
  ASSERT_EQ(a.log.size(), 8u);
  EXPECT_LT(a.log.back().train_loss, a.log.front().train_loss);
  ASSERT_TRUE(a.log.back().valid_auroc.has_value());
  EXPECT_GT(*a.log.back().valid_auroc, 0.9);
  ASSERT_TRUE(a.best_valid_params.has_value());
  EXPECT_GE(a.best_valid_epoch, 1);
  EXPECT_EQ(a.log.back().ToJson().at("epoch"), 8);

  c.seed = 8;
  const TrainResult d = Train(train, valid, ToyConfig(), c);
  EXPECT_NE(a.params.values(), d.params.values());
}

TEST(Train, NonFiniteLossAborts) {
  auto train = ToyData(1, 1);
  train[1].embeddings(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 1;
  try {
    Train(train, {}, ToyConfig(), c);
    FAIL() << "expected a numeric error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
    EXPECT_NE(std::string(e.what()).find(train[1].article_id), std::string::npos);
  }
}

TEST(Train, RejectsMismatchedInputs) {
  TrainConfig c;
  c.epochs = 1;
  EXPECT_THROW(Train({}, {}, ToyConfig(), c), Error);
  ModelConfig m = ToyConfig();
  m.d_s = 9;
  EXPECT_THROW(Train(ToyData(1, 1), {}, m, c), Error);
}

TEST(SelectSplit, PicksInManifestOrderAndTruncates) {
  auto data = ToyData(2, 1);
  const auto out = SelectSplit(data, {"t3", "t0"}, 3);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].article_id, "t3");
  EXPECT_EQ(out[0].embeddings.rows(), 3);
  EXPECT_THROW(SelectSplit(data, {"zz"}, 3), Error);
}

}  // namespace
}  // namespace biasnet
