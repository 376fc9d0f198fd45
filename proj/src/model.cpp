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

#include "biasnet/model.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

namespace biasnet {

// ---------------------------------------------------------------------------
// Config and parameter layout.

ModelConfig ModelConfig::Resolved() const {
  ModelConfig c = *this;
  if (c.head_dim == 0) c.head_dim = 2 * c.d_h;
  if (c.perspective_dim == 0) c.perspective_dim = c.head_dim;
  c.Validate();
  return c;
}

void ModelConfig::Validate() const {
  Require(d_s > 0, "d_s must be > 0");
  Require(d_h > 0, "d_h must be > 0");
  Require(lstm_layers >= 1, "lstm_layers must be >= 1");
  Require(num_heads >= 1, "num_heads must be >= 1");
  Require(head_dim >= 0 && perspective_dim >= 0, "head dims must be >= 0");
  Require(num_classes == kNumClasses, "num_classes must be 3");
  Require(max_sentences >= 2, "max_sentences must be >= 2");
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"d_s", d_s},
          {"d_h", d_h},
          {"lstm_layers", lstm_layers},
          {"num_heads", num_heads},
          {"head_dim", head_dim},
          {"perspective_dim", perspective_dim},
          {"num_classes", num_classes},
          {"max_sentences", max_sentences},
          {"include_headline_cluster", include_headline_cluster},
          {"share_classifier", share_classifier}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.d_s = j.value("d_s", c.d_s);
  c.d_h = j.value("d_h", c.d_h);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.head_dim = j.value("head_dim", c.head_dim);
  c.perspective_dim = j.value("perspective_dim", c.perspective_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.max_sentences = j.value("max_sentences", c.max_sentences);
  c.include_headline_cluster = j.value("include_headline_cluster", c.include_headline_cluster);
  c.share_classifier = j.value("share_classifier", c.share_classifier);
  c.Validate();
  return c;
}

int ModelParams::Add(std::string name, int rows, int cols) {
  TensorInfo t;
  t.name = std::move(name);
  t.rows = rows;
  t.cols = cols;
  t.offset = tensors_.empty() ? 0 : tensors_.back().offset + tensors_.back().size();
  tensors_.push_back(std::move(t));
  return static_cast<int>(tensors_.size()) - 1;
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config.Resolved()) {
  const ModelConfig& c = config_;
  const int h = c.d_h;
  for (int l = 0; l < c.lstm_layers; ++l) {
    const int in = l == 0 ? c.d_s : 2 * h;
    for (int d = 0; d < 2; ++d) {
      const std::string p = "lstm.l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      LstmIds ids{};
      ids.w_ih = Add(p + ".w_ih", 4 * h, in);
      ids.w_hh = Add(p + ".w_hh", 4 * h, h);
      ids.bias = Add(p + ".bias", 4 * h, 1);
      lstm_ids_.push_back(ids);
    }
  }
  int shared_w = -1, shared_b = -1;
  if (c.share_classifier) {
    shared_w = Add("cls.w", c.num_classes, c.perspective_dim);
    shared_b = Add("cls.b", c.num_classes, 1);
  }
  for (int k = 0; k < c.num_heads; ++k) {
    const std::string p = "head" + std::to_string(k);
    HeadIds ids{};
    ids.w_q = Add(p + ".w_q", 2 * h, c.head_dim);
    ids.w_k = Add(p + ".w_k", 2 * h, c.head_dim);
    ids.w_v = Add(p + ".w_v", 2 * h, c.head_dim);
    ids.main_w = Add(p + ".main.w", c.perspective_dim, c.head_dim);
    ids.main_b = Add(p + ".main.b", c.perspective_dim, 1);
    ids.supp_w = Add(p + ".supp.w", c.perspective_dim, c.head_dim);
    ids.supp_b = Add(p + ".supp.b", c.perspective_dim, 1);
    ids.ln_gain = Add(p + ".ln.gain", c.perspective_dim, 1);
    ids.ln_bias = Add(p + ".ln.bias", c.perspective_dim, 1);
    if (c.share_classifier) {
      ids.cls_w = shared_w;
      ids.cls_b = shared_b;
    } else {
      ids.cls_w = Add(p + ".cls.w", c.num_classes, c.perspective_dim);
      ids.cls_b = Add(p + ".cls.b", c.num_classes, 1);
    }
    head_ids_.push_back(ids);
  }
  values_ = Vector::Zero(static_cast<Eigen::Index>(tensors_.back().offset + tensors_.back().size()));
}

ModelParams ModelParams::Initialize(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p(config);
  Rng rng(DeriveSeed(seed, "init"));
  for (int id = 0; id < static_cast<int>(p.tensors_.size()); ++id) {
    const TensorInfo& t = p.tensors_[static_cast<std::size_t>(id)];
    auto m = p.tensor(id);
    const bool is_gain = t.name.ends_with(".ln.gain");
    const bool is_bias = t.cols == 1;
    if (is_gain) {
      m.setOnes();
    } else if (is_bias) {
      m.setZero();
    } else {
      const double limit = std::sqrt(6.0 / (t.rows + t.cols));
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.Uniform(-limit, limit);
      }
    }
  }
  return p;
}

Eigen::Map<Matrix> ModelParams::MapTensor(Vector& flat, int id) const {
  const TensorInfo& t = tensors_.at(static_cast<std::size_t>(id));
  return Eigen::Map<Matrix>(flat.data() + t.offset, t.rows, t.cols);
}

Eigen::Map<const Matrix> ModelParams::MapTensor(const Vector& flat, int id) const {
  const TensorInfo& t = tensors_.at(static_cast<std::size_t>(id));
  return Eigen::Map<const Matrix>(flat.data() + t.offset, t.rows, t.cols);
}

int ModelParams::Find(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

// ---------------------------------------------------------------------------
// Elementwise helpers.

double Gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double GeluDerivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Vector Softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

int ArgMax(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double MixtureNll(const Vector& mixture, Label label) {
  return -std::log(mixture[LabelIndex(label)] + kLossEpsilon);
}

// ---------------------------------------------------------------------------
// BiLSTM.

namespace {

struct LstmDirCache {
  Matrix gates;   // T x 4h, activated (i, f, g, o)
  Matrix cell;    // T x h
  Matrix hidden;  // T x h
};

struct LstmLayerCache {
  Matrix input;
  LstmDirCache dir[2];
};

// Processing order: forward runs 0..T-1, backward runs T-1..0; outputs are
// stored by sentence position.
int StepToPosition(int step, int T, int direction) {
  return direction == 0 ? step : T - 1 - step;
}

LstmDirCache RunLstmDirection(const Matrix& input, const ModelParams& params, int layer,
                              int direction) {
  const auto& ids = params.lstm(layer, direction);
  const auto w_ih = params.tensor(ids.w_ih);
  const auto w_hh = params.tensor(ids.w_hh);
  const auto bias = params.tensor(ids.bias);
  const int T = static_cast<int>(input.rows());
  const int h = params.config().d_h;

  LstmDirCache cache;
  cache.gates.resize(T, 4 * h);
  cache.cell.resize(T, h);
  cache.hidden.resize(T, h);
  const Matrix projected = input * w_ih.transpose();
  Vector h_prev = Vector::Zero(h);
  Vector c_prev = Vector::Zero(h);
  for (int s = 0; s < T; ++s) {
    const int t = StepToPosition(s, T, direction);
    Vector a = projected.row(t).transpose() + w_hh * h_prev + bias.col(0);
    for (int j = 0; j < h; ++j) {
      a[j] = Sigmoid(a[j]);
      a[h + j] = Sigmoid(a[h + j]);
      a[2 * h + j] = std::tanh(a[2 * h + j]);
      a[3 * h + j] = Sigmoid(a[3 * h + j]);
    }
    Vector c = a.segment(h, h).cwiseProduct(c_prev) +
               a.segment(0, h).cwiseProduct(a.segment(2 * h, h));
    Vector hv = a.segment(3 * h, h).cwiseProduct(c.array().tanh().matrix());
    cache.gates.row(t) = a.transpose();
    cache.cell.row(t) = c.transpose();
    cache.hidden.row(t) = hv.transpose();
    h_prev = hv;
    c_prev = c;
  }
  return cache;
}

Matrix RunBiLstm(const Matrix& embeddings, const ModelParams& params,
                 std::vector<LstmLayerCache>* caches) {
  const ModelConfig& cfg = params.config();
  const int T = static_cast<int>(embeddings.rows());
  Require(embeddings.cols() == cfg.d_s, "embedding width " + std::to_string(embeddings.cols()) +
                                            " does not match d_s " + std::to_string(cfg.d_s));
  Require(T >= 2, "an article needs a headline and at least one body sentence");
  if (T > cfg.max_sentences) {
    Fail(ErrorKind::kInvalidArgument,
         "article has " + std::to_string(T) + " rows, exceeding max_sentences " +
             std::to_string(cfg.max_sentences) + " (truncate before the forward pass)");
  }
  Matrix x = embeddings;
  for (int l = 0; l < cfg.lstm_layers; ++l) {
    LstmLayerCache layer;
    layer.input = x;
    layer.dir[0] = RunLstmDirection(x, params, l, 0);
    layer.dir[1] = RunLstmDirection(x, params, l, 1);
    Matrix out(T, 2 * cfg.d_h);
    out << layer.dir[0].hidden, layer.dir[1].hidden;
    x = std::move(out);
    if (caches != nullptr) caches->push_back(std::move(layer));
  }
  return x;
}

// Accumulates parameter gradients into grad and returns d input.
Matrix BackpropLstmDirection(const LstmLayerCache& layer, const Matrix& d_hidden,
                             const ModelParams& params, int layer_index, int direction,
                             Vector& grad) {
  const auto& ids = params.lstm(layer_index, direction);
  const auto w_ih = params.tensor(ids.w_ih);
  const auto w_hh = params.tensor(ids.w_hh);
  auto g_ih = params.MapTensor(grad, ids.w_ih);
  auto g_hh = params.MapTensor(grad, ids.w_hh);
  auto g_b = params.MapTensor(grad, ids.bias);
  const LstmDirCache& cache = layer.dir[direction];
  const int T = static_cast<int>(layer.input.rows());
  const int h = params.config().d_h;

  Matrix d_gates(T, 4 * h);  // pre-activation gradients by position
  Vector dh_next = Vector::Zero(h);
  Vector dc_next = Vector::Zero(h);
  for (int s = T - 1; s >= 0; --s) {
    const int t = StepToPosition(s, T, direction);
    const Vector gates = cache.gates.row(t).transpose();
    const auto i = gates.segment(0, h).array();
    const auto f = gates.segment(h, h).array();
    const auto g = gates.segment(2 * h, h).array();
    const auto o = gates.segment(3 * h, h).array();
    const Eigen::ArrayXd tc = cache.cell.row(t).transpose().array().tanh();
    Eigen::ArrayXd c_prev = Eigen::ArrayXd::Zero(h);
    if (s > 0) c_prev = cache.cell.row(StepToPosition(s - 1, T, direction)).transpose().array();

    const Eigen::ArrayXd dh = d_hidden.row(t).transpose().array() + dh_next.array();
    const Eigen::ArrayXd d_o = dh * tc;
    const Eigen::ArrayXd dc = dc_next.array() + dh * o * (1.0 - tc * tc);
    const Eigen::ArrayXd d_i = dc * g;
    const Eigen::ArrayXd d_g = dc * i;
    const Eigen::ArrayXd d_f = dc * c_prev;
    dc_next = (dc * f).matrix();

    Vector da(4 * h);
    da.segment(0, h) = (d_i * i * (1.0 - i)).matrix();
    da.segment(h, h) = (d_f * f * (1.0 - f)).matrix();
    da.segment(2 * h, h) = (d_g * (1.0 - g * g)).matrix();
    da.segment(3 * h, h) = (d_o * o * (1.0 - o)).matrix();
    d_gates.row(t) = da.transpose();
    if (s > 0) {
      g_hh.noalias() += da * cache.hidden.row(StepToPosition(s - 1, T, direction));
    }
    dh_next = w_hh.transpose() * da;
  }
  g_ih.noalias() += d_gates.transpose() * layer.input;
  g_b.col(0) += d_gates.colwise().sum().transpose();
  return d_gates * w_ih;
}

}  // namespace

Matrix PositionEncode(const Matrix& embeddings, const ModelParams& params) {
  return RunBiLstm(embeddings, params, nullptr);
}

// ---------------------------------------------------------------------------
// Per-head stages.

HeadAttention HeadAttend(const Matrix& encoded, int head, const ModelParams& params) {
  const ModelConfig& cfg = params.config();
  Require(head >= 0 && head < cfg.num_heads, "head index out of range");
  const auto& ids = params.head(head);
  const Matrix q = encoded * params.tensor(ids.w_q);
  const Matrix k = encoded * params.tensor(ids.w_k);
  const Matrix v = encoded * params.tensor(ids.w_v);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
  const Matrix scores = (q * k.transpose()) * scale;
  HeadAttention out;
  out.weights.resize(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    out.weights.row(r) = Softmax(scores.row(r).transpose()).transpose();
  }
  out.output = out.weights * v;
  return out;
}

Vector SentenceTypeLogits(const Matrix& head_output) {
  const Eigen::Index n = head_output.rows() - 1;
  Require(n >= 1, "sentence type detection needs at least one body sentence");
  return head_output.bottomRows(n) * head_output.row(0).transpose();
}

Vector SentenceTypeScores(const Matrix& head_output) {
  const Vector body = Softmax(SentenceTypeLogits(head_output));
  Vector alpha(body.size() + 1);
  alpha[0] = 1.0;
  alpha.tail(body.size()) = body;
  return alpha;
}

Perspectives PerspectiveVectors(const Matrix& head_output, const Vector& alpha, int head,
                                const ModelParams& params) {
  const auto& ids = params.head(head);
  Perspectives p;
  p.main_input = alpha.asDiagonal() * head_output;
  p.supp_input = (Vector::Ones(alpha.size()) - alpha).asDiagonal() * head_output;
  Matrix pre_u = p.main_input * params.tensor(ids.main_w).transpose();
  pre_u.rowwise() += params.tensor(ids.main_b).col(0).transpose();
  Matrix pre_v = p.supp_input * params.tensor(ids.supp_w).transpose();
  pre_v.rowwise() += params.tensor(ids.supp_b).col(0).transpose();
  p.main = pre_u.unaryExpr([](double x) { return Gelu(x); });
  p.supporting = pre_v.unaryExpr([](double x) { return Gelu(x); });
  return p;
}

namespace {

// Row i of the (n+1) x (n+1) dependency matrix; column 0 and the diagonal are
// masked. A row without candidates (n = 1, i = 1) stays all zero.
Matrix DependencyMatrix(const Matrix& main, const Matrix& supporting) {
  const int T = static_cast<int>(main.rows());
  Matrix dep = Matrix::Zero(T, T);
  for (int i = 0; i < T; ++i) {
    Vector logits = Vector::Constant(T, kMaskedLogit);
    int candidates = 0;
    for (int j = 1; j < T; ++j) {
      if (j == i) continue;
      logits[j] = supporting.row(j).dot(main.row(i));
      ++candidates;
    }
    if (candidates == 0) continue;
    Vector p = Softmax(logits);
    p[0] = 0.0;
    if (i > 0) p[i] = 0.0;
    dep.row(i) = p.transpose();
  }
  return dep;
}

struct LayerNormCache {
  Vector xhat;
  double inv_std = 0.0;
};

Vector LayerNormForward(const Vector& x, const Eigen::Map<const Matrix>& gain,
                        const Eigen::Map<const Matrix>& bias, LayerNormCache* cache) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
  Vector xhat = (x.array() - mean).matrix() * inv_std;
  Vector out = gain.col(0).cwiseProduct(xhat) + bias.col(0);
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
  }
  return out;
}

}  // namespace

ContextClusters ComputeContextClusters(const Matrix& main, const Matrix& supporting, int head,
                                       const ModelParams& params) {
  const int T = static_cast<int>(main.rows());
  const int n = T - 1;
  Require(n >= 1 && supporting.rows() == T && supporting.cols() == main.cols(),
          "context clusters need matching main/supporting matrices");
  const Matrix dep = DependencyMatrix(main, supporting);
  ContextClusters cc;
  cc.dep = dep.block(1, 1, n, n);
  cc.headline_dep = dep.row(0).tail(n).transpose();
  cc.clusters = main + dep * supporting;
  const int first = params.config().include_headline_cluster ? 0 : 1;
  cc.summed = cc.clusters.bottomRows(T - first).colwise().sum().transpose();
  const auto& ids = params.head(head);
  cc.embedding =
      LayerNormForward(cc.summed, params.tensor(ids.ln_gain), params.tensor(ids.ln_bias), nullptr);
  return cc;
}

Classification Classify(const std::vector<Vector>& head_embeddings, const ModelParams& params) {
  const ModelConfig& cfg = params.config();
  Require(static_cast<int>(head_embeddings.size()) == cfg.num_heads,
          "classify needs one embedding per head");
  Classification out;
  out.mixture = Vector::Zero(cfg.num_classes);
  for (int k = 0; k < cfg.num_heads; ++k) {
    const auto& ids = params.head(k);
    const Vector logits =
        params.tensor(ids.cls_w) * head_embeddings[static_cast<std::size_t>(k)] +
        params.tensor(ids.cls_b).col(0);
    out.per_head.push_back(Softmax(logits));
    out.mixture += out.per_head.back();
  }
  out.mixture /= static_cast<double>(cfg.num_heads);
  return out;
}

// ---------------------------------------------------------------------------
// Full forward pass.

namespace {

struct HeadCache {
  HeadAttention attention;
  Vector alpha;
  Perspectives persp;
  ContextClusters clusters;
  Matrix dep_full;
};

struct ForwardCache {
  std::vector<LstmLayerCache> lstm;
  Matrix encoded;
  std::vector<HeadCache> heads;
  Classification classification;
};

ForwardCache RunForward(const Matrix& embeddings, const ModelParams& params, bool keep_lstm) {
  ForwardCache cache;
  cache.encoded = RunBiLstm(embeddings, params, keep_lstm ? &cache.lstm : nullptr);
  std::vector<Vector> head_embeddings;
  for (int k = 0; k < params.config().num_heads; ++k) {
    HeadCache hc;
    hc.attention = HeadAttend(cache.encoded, k, params);
    hc.alpha = SentenceTypeScores(hc.attention.output);
    hc.persp = PerspectiveVectors(hc.attention.output, hc.alpha, k, params);
    hc.clusters = ComputeContextClusters(hc.persp.main, hc.persp.supporting, k, params);
    head_embeddings.push_back(hc.clusters.embedding);
    cache.heads.push_back(std::move(hc));
  }
  cache.classification = Classify(head_embeddings, params);
  return cache;
}

}  // namespace

ForwardTrace Forward(const Matrix& embeddings, const ModelParams& params) {
  ForwardCache cache = RunForward(embeddings, params, false);
  ForwardTrace trace;
  for (std::size_t k = 0; k < cache.heads.size(); ++k) {
    HeadCache& hc = cache.heads[k];
    HeadTrace ht;
    ht.attention = std::move(hc.attention.weights);
    ht.alpha = hc.alpha;
    ht.dep = std::move(hc.clusters.dep);
    ht.headline_dep = std::move(hc.clusters.headline_dep);
    ht.probs = cache.classification.per_head[k];
    ht.main_index = 1 + ArgMax(hc.alpha.tail(hc.alpha.size() - 1));
    trace.heads.push_back(std::move(ht));
  }
  trace.mixture = cache.classification.mixture;
  return trace;
}

ForwardTrace Forward(const EncodedArticle& article, const ModelParams& params) {
  return Forward(article.embeddings, params);
}

std::vector<ForwardTrace> ForwardBatch(const std::vector<EncodedArticle>& batch,
                                       const ModelParams& params) {
  std::vector<ForwardTrace> out;
  out.reserve(batch.size());
  for (const auto& a : batch) out.push_back(Forward(a, params));
  return out;
}

std::vector<MainSentence> ExtractMainSentences(const ForwardTrace& trace) {
  std::vector<MainSentence> out;
  for (std::size_t k = 0; k < trace.heads.size(); ++k) {
    const HeadTrace& ht = trace.heads[k];
    MainSentence m;
    m.head = static_cast<int>(k);
    m.index = 1 + ArgMax(ht.alpha.tail(ht.alpha.size() - 1));
    m.supporting_weights = ht.dep.row(m.index - 1).transpose();
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward pass.

double LossAndGradient(const Matrix& embeddings, Label label, const ModelParams& params,
                       Vector& grad) {
  Require(grad.size() == static_cast<Eigen::Index>(params.size()),
          "gradient buffer has the wrong size");
  const ModelConfig& cfg = params.config();
  const ForwardCache cache = RunForward(embeddings, params, true);
  const int c = LabelIndex(label);
  const double y_c = cache.classification.mixture[c];
  const double loss = -std::log(y_c + kLossEpsilon);
  const double d_yc = -1.0 / (y_c + kLossEpsilon);

  const int T = static_cast<int>(embeddings.rows());
  const int n = T - 1;
  const Matrix& H = cache.encoded;
  Matrix dH = Matrix::Zero(H.rows(), H.cols());
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));

  for (int k = 0; k < cfg.num_heads; ++k) {
    const auto& ids = params.head(k);
    const HeadCache& hc = cache.heads[static_cast<std::size_t>(k)];
    const Vector& probs = cache.classification.per_head[static_cast<std::size_t>(k)];

    // Classifier: only y_k[c] carries gradient, scaled by the 1/N mixture weight.
    const double g = d_yc / cfg.num_heads;
    Vector d_logits = -g * probs[c] * probs;
    d_logits[c] += g * probs[c];
    const Vector& cbar = hc.clusters.embedding;
    params.MapTensor(grad, ids.cls_w).noalias() += d_logits * cbar.transpose();
    params.MapTensor(grad, ids.cls_b).col(0) += d_logits;
    const Vector d_cbar = params.tensor(ids.cls_w).transpose() * d_logits;

    // LayerNorm.
    LayerNormCache ln;
    LayerNormForward(hc.clusters.summed, params.tensor(ids.ln_gain), params.tensor(ids.ln_bias),
                     &ln);
    params.MapTensor(grad, ids.ln_gain).col(0) += d_cbar.cwiseProduct(ln.xhat);
    params.MapTensor(grad, ids.ln_bias).col(0) += d_cbar;
    const Vector d_xhat = d_cbar.cwiseProduct(params.tensor(ids.ln_gain).col(0));
    const double mean_d = d_xhat.mean();
    const double mean_dx = d_xhat.cwiseProduct(ln.xhat).mean();
    const Vector d_sum =
        ln.inv_std * (d_xhat.array() - mean_d - ln.xhat.array() * mean_dx).matrix();

    // Context clusters: c_i = u_i + sum_j P(i,j) v_j.
    const Matrix& U = hc.persp.main;
    const Matrix& V = hc.persp.supporting;
    const Matrix dep = DependencyMatrix(U, V);
    Matrix d_clusters = Matrix::Zero(T, U.cols());
    for (int i = cfg.include_headline_cluster ? 0 : 1; i < T; ++i) {
      d_clusters.row(i) = d_sum.transpose();
    }
    Matrix dU = d_clusters;
    Matrix dV = dep.transpose() * d_clusters;
    const Matrix d_dep = d_clusters * V.transpose();  // dP(i,j) = dc_i . v_j
    for (int i = 0; i < T; ++i) {
      const double inner = dep.row(i).dot(d_dep.row(i));
      for (int j = 1; j < T; ++j) {
        const double p = dep(i, j);
        if (p == 0.0) continue;
        const double dl = p * (d_dep(i, j) - inner);
        dU.row(i) += dl * V.row(j);
        dV.row(j) += dl * U.row(i);
      }
    }

    // Perspective FFNs.
    const auto main_w = params.tensor(ids.main_w);
    const auto supp_w = params.tensor(ids.supp_w);
    Matrix pre_u = hc.persp.main_input * main_w.transpose();
    pre_u.rowwise() += params.tensor(ids.main_b).col(0).transpose();
    Matrix pre_v = hc.persp.supp_input * supp_w.transpose();
    pre_v.rowwise() += params.tensor(ids.supp_b).col(0).transpose();
    const Matrix d_pre_u =
        dU.cwiseProduct(pre_u.unaryExpr([](double x) { return GeluDerivative(x); }));
    const Matrix d_pre_v =
        dV.cwiseProduct(pre_v.unaryExpr([](double x) { return GeluDerivative(x); }));
    params.MapTensor(grad, ids.main_w).noalias() += d_pre_u.transpose() * hc.persp.main_input;
    params.MapTensor(grad, ids.main_b).col(0) += d_pre_u.colwise().sum().transpose();
    params.MapTensor(grad, ids.supp_w).noalias() += d_pre_v.transpose() * hc.persp.supp_input;
    params.MapTensor(grad, ids.supp_b).col(0) += d_pre_v.colwise().sum().transpose();
    const Matrix d_main_in = d_pre_u * main_w;
    const Matrix d_supp_in = d_pre_v * supp_w;

    // Weighted inputs: main = alpha_i hbar_i, supp = (1 - alpha_i) hbar_i.
    const Matrix& Hb = hc.attention.output;
    const Vector& alpha = hc.alpha;
    Matrix dHb = alpha.asDiagonal() * d_main_in +
                 (Vector::Ones(T) - alpha).asDiagonal() * d_supp_in;
    Vector d_alpha(n);
    for (int i = 1; i < T; ++i) {
      d_alpha[i - 1] = Hb.row(i).dot(d_main_in.row(i)) - Hb.row(i).dot(d_supp_in.row(i));
    }

    // Sentence type softmax over body logits hbar_i . hbar_0.
    const Vector body_alpha = alpha.tail(n);
    const Vector dz = body_alpha.cwiseProduct(
        (d_alpha.array() - body_alpha.dot(d_alpha)).matrix());
    for (int i = 1; i < T; ++i) dHb.row(i) += dz[i - 1] * Hb.row(0);
    dHb.row(0) += dz.transpose() * Hb.bottomRows(n);

    // Scaled dot-product attention.
    const auto w_q = params.tensor(ids.w_q);
    const auto w_k = params.tensor(ids.w_k);
    const auto w_v = params.tensor(ids.w_v);
    const Matrix Q = H * w_q;
    const Matrix K = H * w_k;
    const Matrix Va = H * w_v;
    const Matrix& A = hc.attention.weights;
    const Matrix dA = dHb * Va.transpose();
    const Matrix dVa = A.transpose() * dHb;
    const Vector row_inner = A.cwiseProduct(dA).rowwise().sum();
    const Matrix dS = (A.array() * (dA.colwise() - row_inner).array()).matrix() * scale;
    const Matrix dQ = dS * K;
    const Matrix dK = dS.transpose() * Q;
    params.MapTensor(grad, ids.w_q).noalias() += H.transpose() * dQ;
    params.MapTensor(grad, ids.w_k).noalias() += H.transpose() * dK;
    params.MapTensor(grad, ids.w_v).noalias() += H.transpose() * dVa;
    dH.noalias() += dQ * w_q.transpose();
    dH.noalias() += dK * w_k.transpose();
    dH.noalias() += dVa * w_v.transpose();
  }

  // BiLSTM, top layer first.
  const int h = cfg.d_h;
  Matrix d_out = dH;
  for (int l = cfg.lstm_layers - 1; l >= 0; --l) {
    const LstmLayerCache& layer = cache.lstm[static_cast<std::size_t>(l)];
    Matrix d_in = BackpropLstmDirection(layer, d_out.leftCols(h), params, l, 0, grad);
    d_in += BackpropLstmDirection(layer, d_out.rightCols(h), params, l, 1, grad);
    d_out = std::move(d_in);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace {

constexpr char kCheckpointMagic[8] = {'B', 'N', 'C', 'K', 'P', 'T', '0', '1'};

}  // namespace

std::string SerializeCheckpoint(const ModelParams& params, const CheckpointMeta& meta) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : params.tensors()) {
    tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
  }
  const nlohmann::json header = {
      {"format", "biasnet-checkpoint-v1"},
      {"config", params.config().ToJson()},
      {"seed", meta.seed},
      {"epoch", meta.epoch},
      {"encoder",
       {{"name", meta.encoder_name}, {"version", meta.encoder_version}, {"dim", meta.encoder_dim}}},
      {"extra", meta.extra},
      {"tensors", tensors},
      {"num_values", params.size()}};
  const std::string head = header.dump();
  const std::uint64_t head_len = head.size();
  std::string out;
  out.reserve(16 + head.size() + params.size() * sizeof(double));
  out.append(kCheckpointMagic, 8);
  out.append(reinterpret_cast<const char*>(&head_len), 8);
  out.append(head);
  out.append(reinterpret_cast<const char*>(params.values().data()),
             params.size() * sizeof(double));
  return out;
}

void SaveCheckpoint(const std::string& path, const ModelParams& params,
                    const CheckpointMeta& meta) {
  WriteFileAtomic(path, SerializeCheckpoint(params, meta));
}

Checkpoint ParseCheckpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != std::string_view(kCheckpointMagic, 8)) {
    Fail(ErrorKind::kParse, "not a biasnet checkpoint");
  }
  std::uint64_t head_len = 0;
  std::memcpy(&head_len, bytes.data() + 8, 8);
  if (head_len > bytes.size() - 16) Fail(ErrorKind::kParse, "checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, head_len));
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorKind::kParse, std::string("checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.params = ModelParams(ModelConfig::FromJson(header.at("config")));
    ck.meta.seed = header.at("seed").get<std::uint64_t>();
    ck.meta.epoch = header.at("epoch").get<int>();
    ck.meta.encoder_name = header.at("encoder").at("name").get<std::string>();
    ck.meta.encoder_version = header.at("encoder").at("version").get<std::string>();
    ck.meta.encoder_dim = header.at("encoder").at("dim").get<int>();
    ck.meta.extra = header.value("extra", nlohmann::json::object());
    const auto& tensors = header.at("tensors");
    const auto& expected = ck.params.tensors();
    if (tensors.size() != expected.size()) {
      Fail(ErrorKind::kParse, "checkpoint has " + std::to_string(tensors.size()) +
                                  " tensors, config implies " + std::to_string(expected.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto name = tensors[i].at("name").get<std::string>();
      const auto shape = tensors[i].at("shape").get<std::vector<int>>();
      if (name != expected[i].name || shape.size() != 2 || shape[0] != expected[i].rows ||
          shape[1] != expected[i].cols) {
        Fail(ErrorKind::kParse, "checkpoint tensor " + std::to_string(i) + " (" + name +
                                    ") does not match the shape implied by its config (" +
                                    expected[i].name + " " + std::to_string(expected[i].rows) +
                                    "x" + std::to_string(expected[i].cols) + ")");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, std::string("checkpoint header: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kParse) throw;
    Fail(ErrorKind::kParse, std::string("checkpoint header: ") + e.what());
  }
  const std::size_t payload = bytes.size() - 16 - head_len;
  if (payload != ck.params.size() * sizeof(double)) {
    Fail(ErrorKind::kParse, "checkpoint payload has " + std::to_string(payload) +
                                " bytes, expected " +
                                std::to_string(ck.params.size() * sizeof(double)));
  }
  std::memcpy(ck.params.values().data(), bytes.data() + 16 + head_len, payload);
  if (!ck.params.values().allFinite()) Fail(ErrorKind::kParse, "checkpoint has non-finite values");
  return ck;
}

Checkpoint LoadCheckpoint(const std::string& path) {
  const std::string bytes = ReadFile(path);
  try {
    return ParseCheckpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::string CheckpointHash(const std::string& path) { return HexDigest(Fnv1a64(ReadFile(path))); }

}  // namespace biasnet
