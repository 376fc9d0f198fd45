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
#include <filesystem>
#include <numbers>

#include "biasnet/model.hpp"
#include "model_checks.hpp"

namespace biasnet {
namespace {

using testing::ForwardViolation;
using testing::RandomEmbeddings;
using testing::ToyConfig;

double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar LSTM over one direction, written from the gate equations.
Matrix NaiveLstm(const Matrix& x, const Matrix& w_ih, const Matrix& w_hh, const Matrix& b,
                 bool reverse) {
  const int T = static_cast<int>(x.rows());
  const int h = static_cast<int>(w_hh.cols());
  Matrix out(T, h);
  std::vector<double> hp(h, 0.0), cp(h, 0.0);
  for (int s = 0; s < T; ++s) {
    const int t = reverse ? T - 1 - s : s;
    std::vector<double> a(4 * h);
    for (int r = 0; r < 4 * h; ++r) {
      double acc = b(r, 0);
      for (int c = 0; c < x.cols(); ++c) acc += w_ih(r, c) * x(t, c);
      for (int c = 0; c < h; ++c) acc += w_hh(r, c) * hp[c];
      a[r] = acc;
    }
    for (int j = 0; j < h; ++j) {
      const double i = Sig(a[j]), f = Sig(a[h + j]), g = std::tanh(a[2 * h + j]),
                   o = Sig(a[3 * h + j]);
      cp[j] = f * cp[j] + i * g;
      hp[j] = o * std::tanh(cp[j]);
      out(t, j) = hp[j];
    }
  }
  return out;
}

TEST(ModelConfig, ResolvesDerivedDims) {
  ModelConfig c;
  c.d_h = 6;
  const ModelConfig r = c.Resolved();
  EXPECT_EQ(r.head_dim, 12);
  EXPECT_EQ(r.perspective_dim, 12);
  c.head_dim = 5;
  EXPECT_EQ(c.Resolved().perspective_dim, 5);
}

TEST(ModelConfig, RejectsBadValues) {
  ModelConfig c;
  c.num_heads = 0;
  EXPECT_THROW(c.Resolved(), Error);
  c = ModelConfig{};
  c.num_classes = 2;
  EXPECT_THROW(c.Resolved(), Error);
  c = ModelConfig{};
  c.max_sentences = 1;
  EXPECT_THROW(c.Resolved(), Error);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c = ToyConfig();
  c.include_headline_cluster = false;
  c.share_classifier = true;
  const ModelConfig back = ModelConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
}

TEST(ModelParams, TensorShapes) {
  const ModelConfig c = ToyConfig();
  const ModelParams p(c);
  auto shape = [&](const std::string& name) {
    const int id = p.Find(name);
    return std::pair(p.tensors()[id].rows, p.tensors()[id].cols);
  };
  EXPECT_EQ(shape("lstm.l0.fwd.w_ih"), std::pair(16, 8));
  EXPECT_EQ(shape("lstm.l0.bwd.w_hh"), std::pair(16, 4));
  EXPECT_EQ(shape("lstm.l1.fwd.w_ih"), std::pair(16, 8));
  EXPECT_EQ(shape("lstm.l1.bwd.bias"), std::pair(16, 1));
  EXPECT_EQ(shape("head1.w_q"), std::pair(8, 8));
  EXPECT_EQ(shape("head0.main.w"), std::pair(8, 8));
  EXPECT_EQ(shape("head1.cls.w"), std::pair(3, 8));
  std::size_t total = 0;
  for (const auto& t : p.tensors()) {
    EXPECT_EQ(t.offset, total) << t.name;
    total += t.size();
  }
  EXPECT_EQ(total, p.size());
}

TEST(ModelParams, SharedClassifier) {
  ModelConfig c = ToyConfig();
  c.share_classifier = true;
  const ModelParams p(c);
  EXPECT_EQ(p.head(0).cls_w, p.head(1).cls_w);
  EXPECT_GE(p.Find("cls.w"), 0);
}

TEST(ModelParams, InitializationIsSeeded) {
  const ModelConfig c = ToyConfig();
  const ModelParams a = ModelParams::Initialize(c, 5);
  const ModelParams b = ModelParams::Initialize(c, 5);
  const ModelParams d = ModelParams::Initialize(c, 6);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), d.values());
  EXPECT_TRUE((a.tensor(a.head(0).ln_gain).array() == 1.0).all());
  EXPECT_TRUE((a.tensor(a.head(0).main_b).array() == 0.0).all());
}

TEST(Forward, BiLstmMatchesScalarReference) {
  ModelConfig c = ToyConfig();
  c.lstm_layers = 1;
  const ModelParams p = ModelParams::Initialize(c, 3);
  Rng rng(9);
  const Matrix x = RandomEmbeddings(rng, 5, c.d_s);
  const Matrix h = PositionEncode(x, p);
  ASSERT_EQ(h.rows(), 5);
  ASSERT_EQ(h.cols(), 2 * c.d_h);
  for (int d = 0; d < 2; ++d) {
    const auto& ids = p.lstm(0, d);
    const Matrix ref = NaiveLstm(x, p.tensor(ids.w_ih), p.tensor(ids.w_hh), p.tensor(ids.bias),
                                 d == 1);
    EXPECT_LT((h.middleCols(d * c.d_h, c.d_h) - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, AttentionMatchesLoops) {
  const ModelConfig c = ToyConfig();
  const ModelParams p = ModelParams::Initialize(c, 4);
  Rng rng(2);
  const Matrix enc = RandomEmbeddings(rng, 4, 2 * c.d_h);
  const HeadAttention a = HeadAttend(enc, 1, p);
  const auto& ids = p.head(1);
  const Matrix q = enc * p.tensor(ids.w_q), k = enc * p.tensor(ids.w_k), v = enc * p.tensor(ids.w_v);
  for (int r = 0; r < 4; ++r) {
    std::vector<double> e(4);
    double z = 0;
    for (int j = 0; j < 4; ++j) {
      e[j] = std::exp(q.row(r).dot(k.row(j)) / std::sqrt(8.0));
      z += e[j];
    }
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(a.weights(r, j), e[j] / z, 1e-12);
    for (int col = 0; col < c.head_dim; ++col) {
      double acc = 0;
      for (int j = 0; j < 4; ++j) acc += e[j] / z * v(j, col);
      EXPECT_NEAR(a.output(r, col), acc, 1e-12);
    }
  }
}

TEST(Forward, SentenceTypeScores) {
  Matrix h(3, 2);
  h << 1, 0, 2, 0, 0, 1;
  const Vector logits = SentenceTypeLogits(h);
  EXPECT_DOUBLE_EQ(logits[0], 2.0);
  EXPECT_DOUBLE_EQ(logits[1], 0.0);
  const Vector alpha = SentenceTypeScores(h);
  EXPECT_EQ(alpha[0], 1.0);
  EXPECT_NEAR(alpha[1], std::exp(2.0) / (std::exp(2.0) + 1.0), 1e-15);
  EXPECT_NEAR(alpha[1] + alpha[2], 1.0, 1e-15);
}

TEST(Forward, PerspectiveInputsScaleByAlpha) {
  const ModelConfig c = ToyConfig();
  const ModelParams p = ModelParams::Initialize(c, 4);
  Rng rng(3);
  const Matrix h = RandomEmbeddings(rng, 4, c.head_dim);
  const Vector alpha = SentenceTypeScores(h);
  const Perspectives per = PerspectiveVectors(h, alpha, 0, p);
  EXPECT_LT((per.main_input.row(0) - h.row(0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(per.supp_input.row(0).cwiseAbs().maxCoeff(), 1e-15);
  for (int i = 1; i < 4; ++i) {
    EXPECT_LT((per.main_input.row(i) + per.supp_input.row(i) - h.row(i)).cwiseAbs().maxCoeff(),
              1e-14);
  }
}

TEST(Forward, DependencyExcludesSelfAndHeadline) {
  const ModelConfig c = ToyConfig();
  const ModelParams p = ModelParams::Initialize(c, 8);
  Rng rng(4);
  const Matrix u = RandomEmbeddings(rng, 5, c.perspective_dim);
  const Matrix v = RandomEmbeddings(rng, 5, c.perspective_dim);
  const ContextClusters cc = ComputeContextClusters(u, v, 0, p);
  ASSERT_EQ(cc.dep.rows(), 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(cc.dep(i, i), 0.0);
    double z = 0;
    for (int j = 1; j <= 4; ++j) {
      if (j != i + 1) z += std::exp(v.row(j).dot(u.row(i + 1)));
    }
    for (int j = 1; j <= 4; ++j) {
      if (j == i + 1) continue;
      EXPECT_NEAR(cc.dep(i, j - 1), std::exp(v.row(j).dot(u.row(i + 1))) / z, 1e-12);
    }
  }
  EXPECT_NEAR(cc.headline_dep.sum(), 1.0, 1e-12);
  // c_i = u_i + sum_j P v_j, summed over every row including the headline.
  Vector sum = Vector::Zero(c.perspective_dim);
  for (int i = 0; i < 5; ++i) sum += cc.clusters.row(i).transpose();
  EXPECT_LT((sum - cc.summed).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((cc.clusters.row(2) - u.row(2) -
             (cc.dep.row(1) * v.bottomRows(4)))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_NEAR(cc.embedding.mean(), 0.0, 1e-12);
}

TEST(Forward, HeadlineClusterCanBeExcluded) {
  ModelConfig c = ToyConfig();
  c.include_headline_cluster = false;
  const ModelParams p = ModelParams::Initialize(c, 8);
  Rng rng(4);
  const Matrix u = RandomEmbeddings(rng, 4, c.perspective_dim);
  const Matrix v = RandomEmbeddings(rng, 4, c.perspective_dim);
  const ContextClusters cc = ComputeContextClusters(u, v, 0, p);
  EXPECT_LT((cc.clusters.bottomRows(3).colwise().sum().transpose() - cc.summed)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Forward, InvariantsHoldOnRandomInputs) {
  const ModelConfig c = ToyConfig();
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const ModelParams p = ModelParams::Initialize(c, trial);
    const int rows = 2 + static_cast<int>(rng.UniformIndex(7));
    const ForwardTrace t = Forward(RandomEmbeddings(rng, rows, c.d_s), p);
    EXPECT_EQ(ForwardViolation(t), "") << "trial " << trial;
    EXPECT_EQ(t.num_body(), rows - 1);
  }
}

TEST(Forward, SingleBodySentence) {
  const ModelConfig c = ToyConfig();
  const ModelParams p = ModelParams::Initialize(c, 1);
  Rng rng(1);
  const ForwardTrace t = Forward(RandomEmbeddings(rng, 2, c.d_s), p);
  EXPECT_EQ(t.heads[0].alpha[1], 1.0);
  EXPECT_EQ(t.heads[0].dep(0, 0), 0.0);
  EXPECT_EQ(t.heads[0].main_index, 1);
}

TEST(Forward, RejectsBadShapes) {
  ModelConfig c = ToyConfig();
  c.max_sentences = 4;
  const ModelParams p = ModelParams::Initialize(c, 1);
  Rng rng(1);
  EXPECT_THROW(Forward(RandomEmbeddings(rng, 1, c.d_s), p), Error);
  EXPECT_THROW(Forward(RandomEmbeddings(rng, 3, c.d_s + 1), p), Error);
  EXPECT_THROW(Forward(RandomEmbeddings(rng, 5, c.d_s), p), Error);
}

TEST(Forward, ExtractMainSentences) {
  const ModelConfig c = ToyConfig();
  const ModelParams p = ModelParams::Initialize(c, 2);
  Rng rng(5);
  const ForwardTrace t = Forward(RandomEmbeddings(rng, 6, c.d_s), p);
  const auto mains = ExtractMainSentences(t);
  ASSERT_EQ(mains.size(), 2u);
  for (const auto& m : mains) {
    const HeadTrace& h = t.heads[static_cast<std::size_t>(m.head)];
    EXPECT_EQ(m.index, 1 + ArgMax(h.alpha.tail(5)));
    EXPECT_EQ(m.supporting_weights, Vector(h.dep.row(m.index - 1).transpose()));
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  const ModelConfig c = ToyConfig();
  const ModelParams p = ModelParams::Initialize(c, 21);
  Rng rng(21);
  const auto r = testing::GradCheck(RandomEmbeddings(rng, 4, c.d_s), Label::kRight, p);
  EXPECT_TRUE(r.ok) << r.worst_tensor << " " << r.worst_relative;
  EXPECT_EQ(r.checked, p.size());
}

TEST(Gradient, SharedClassifierAndNoHeadline) {
  ModelConfig c = ToyConfig();
  c.share_classifier = true;
  c.include_headline_cluster = false;
  c.lstm_layers = 1;
  const ModelParams p = ModelParams::Initialize(c, 22);
  Rng rng(22);
  const auto r = testing::GradCheck(RandomEmbeddings(rng, 3, c.d_s), Label::kLeft, p);
  EXPECT_TRUE(r.ok) << r.worst_tensor << " " << r.worst_relative;
}

TEST(Gradient, AccumulatesIntoBuffer) {
  const ModelConfig c = ToyConfig();
  const ModelParams p = ModelParams::Initialize(c, 2);
  Rng rng(2);
  const Matrix x = RandomEmbeddings(rng, 3, c.d_s);
  Vector g1 = Vector::Zero(static_cast<Eigen::Index>(p.size()));
  const double loss = LossAndGradient(x, Label::kCenter, p, g1);
  Vector g2 = g1;
  LossAndGradient(x, Label::kCenter, p, g2);
  EXPECT_LT((g2 - 2.0 * g1).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(loss, MixtureNll(Forward(x, p).mixture, Label::kCenter), 1e-14);
}

TEST(Functions, GeluAndDerivative) {
  EXPECT_EQ(Gelu(0.0), 0.0);
  EXPECT_NEAR(Gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(Gelu(-1.0), -0.15865525393145707, 1e-15);
  for (double x : {-3.0, -0.5, 0.2, 2.5}) {
    const double fd = (Gelu(x + 1e-6) - Gelu(x - 1e-6)) / 2e-6;
    EXPECT_NEAR(GeluDerivative(x), fd, 1e-8);
  }
}

TEST(Functions, SoftmaxAndArgMax) {
  Vector v(3);
  v << 1000.0, 1000.0, -1000.0;
  const Vector s = Softmax(v);
  EXPECT_NEAR(s[0], 0.5, 1e-15);
  EXPECT_EQ(s[2], 0.0);
  EXPECT_EQ(ArgMax(v), 0);
  v << 1.0, 3.0, 3.0;
  EXPECT_EQ(ArgMax(v), 1);
}

TEST(Functions, MixtureNll) {
  Vector y(3);
  y << 0.2, 0.5, 0.3;
  EXPECT_NEAR(MixtureNll(y, Label::kCenter), -std::log(0.5 + 1e-12), 1e-15);
  y << 1.0, 0.0, 0.0;
  EXPECT_NEAR(MixtureNll(y, Label::kRight), -std::log(1e-12), 1e-9);
}

TEST(Checkpoint, RoundTrip) {
  const ModelConfig c = ToyConfig();
  const ModelParams p = ModelParams::Initialize(c, 13);
  CheckpointMeta meta;
  meta.seed = 13;
  meta.epoch = 4;
  meta.encoder_name = "hash";
  meta.encoder_dim = 8;
  meta.extra = {{"k", 1}};
  const std::string bytes = SerializeCheckpoint(p, meta);
  const Checkpoint ck = ParseCheckpoint(bytes);
  EXPECT_EQ(ck.params.values(), p.values());
  EXPECT_EQ(ck.params.config().ToJson(), c.ToJson());
  EXPECT_EQ(ck.meta.seed, 13u);
  EXPECT_EQ(ck.meta.epoch, 4);
  EXPECT_EQ(ck.meta.encoder_name, "hash");
  EXPECT_EQ(ck.meta.extra, meta.extra);
  EXPECT_EQ(SerializeCheckpoint(ck.params, ck.meta), bytes);

  const auto dir = std::filesystem::temp_directory_path() / "biasnet_test_model";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.ckpt").string();
  SaveCheckpoint(path, p, meta);
  EXPECT_EQ(LoadCheckpoint(path).params.values(), p.values());
  EXPECT_EQ(CheckpointHash(path).size(), 16u);
  EXPECT_EQ(CheckpointHash(path), HexDigest(Fnv1a64(bytes)));
}

TEST(Checkpoint, RejectsCorruptInput) {
  const ModelParams p = ModelParams::Initialize(ToyConfig(), 1);
  const std::string bytes = SerializeCheckpoint(p, CheckpointMeta{});
  auto kind_of = [](std::string_view b) {
    try {
      ParseCheckpoint(b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kInternal;
  };
  EXPECT_EQ(kind_of("garbage"), ErrorKind::kParse);
  EXPECT_EQ(kind_of(std::string_view(bytes).substr(0, bytes.size() - 8)), ErrorKind::kParse);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(kind_of(bad), ErrorKind::kParse);
  EXPECT_THROW(LoadCheckpoint("/nonexistent/m.ckpt"), Error);
}

}  // namespace
}  // namespace biasnet
