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

// Multi-head hierarchical attention classifier.
//
// Pipeline for one article with headline row 0 and body rows 1..n:
//   H      = BiLSTM(sentence embeddings)                 (n+1) x 2*d_h
//   Hbar_k = softmax(Q K^T / sqrt(head_dim)) V, Q=H Wq_k  per head, never
//            concatenated across heads
//   alpha  = softmax_i(hbar_i . hbar_0) over body rows, alpha_0 = 1
//   u_i    = Gelu(FFN_main(alpha_i hbar_i)),  v_i = Gelu(FFN_supp((1-alpha_i) hbar_i))
//   c_i    = u_i + sum_{j != i} P_dep(j|i) v_j,  P_dep(j|i) = softmax_j(v_j . u_i)
//   cbar_k = LayerNorm(sum_i c_i),  y_k = softmax(W_k cbar_k + b_k)
//   y      = mean_k y_k
//
// All operations work on row-per-sentence matrices in double precision.

#ifndef BIASNET_MODEL_HPP_
#define BIASNET_MODEL_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "biasnet/common.hpp"
#include "biasnet/encoder.hpp"
#include "json.hpp"

namespace biasnet {

struct ModelConfig {
  int d_s = kDefaultTestEncoderDim;
  int d_h = 512;
  int lstm_layers = 2;
  int num_heads = 8;
  int head_dim = 0;         // 0 -> 2 * d_h
  int perspective_dim = 0;  // 0 -> head_dim
  int num_classes = kNumClasses;
  int max_sentences = 128;
  // Whether the headline cluster c_0 enters the per-head sum.
  bool include_headline_cluster = true;
  bool share_classifier = false;

  // Fills the derived dimensions and validates.
  ModelConfig Resolved() const;
  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
};

inline constexpr double kMaskedLogit = -1e9;
inline constexpr double kLayerNormEps = 1e-5;

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// All trainable tensors live in one flat vector; gradients and optimizer
// state share the same layout.
class ModelParams {
 public:
  struct LstmIds {
    int w_ih, w_hh, bias;
  };
  struct HeadIds {
    int w_q, w_k, w_v;
    int main_w, main_b, supp_w, supp_b;
    int ln_gain, ln_bias;
    int cls_w, cls_b;
  };

  ModelParams() = default;
  // Zero-valued parameters (LayerNorm gains are zero too).
  explicit ModelParams(const ModelConfig& config);
  // Xavier-uniform weights, zero biases, unit LayerNorm gains.
  static ModelParams Initialize(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  Eigen::Map<Matrix> tensor(int id) { return MapTensor(values_, id); }
  Eigen::Map<const Matrix> tensor(int id) const { return MapTensor(values_, id); }
  Eigen::Map<Matrix> MapTensor(Vector& flat, int id) const;
  Eigen::Map<const Matrix> MapTensor(const Vector& flat, int id) const;
  int Find(std::string_view name) const;

  const LstmIds& lstm(int layer, int direction) const {
    return lstm_ids_[static_cast<std::size_t>(layer * 2 + direction)];
  }
  const HeadIds& head(int k) const { return head_ids_[static_cast<std::size_t>(k)]; }

 private:
  int Add(std::string name, int rows, int cols);

  ModelConfig config_;
  std::vector<TensorInfo> tensors_;
  std::vector<LstmIds> lstm_ids_;
  std::vector<HeadIds> head_ids_;
  Vector values_;
};

// ---------------------------------------------------------------------------
// Individual stages. Forward() composes exactly these.

// (n+1) x d_s -> (n+1) x 2*d_h. Rows beyond max_sentences are an error.
Matrix PositionEncode(const Matrix& embeddings, const ModelParams& params);

struct HeadAttention {
  Matrix weights;  // (n+1) x (n+1), rows sum to 1
  Matrix output;   // (n+1) x head_dim
};
HeadAttention HeadAttend(const Matrix& encoded, int head, const ModelParams& params);

// alpha over all rows: alpha_0 = 1, alpha_1..n = softmax of hbar_i . hbar_0.
Vector SentenceTypeScores(const Matrix& head_output);
// The raw body logits hbar_i . hbar_0, i = 1..n.
Vector SentenceTypeLogits(const Matrix& head_output);

struct Perspectives {
  Matrix main_input;  // alpha_i * hbar_i
  Matrix supp_input;  // (1 - alpha_i) * hbar_i
  Matrix main;        // U
  Matrix supporting;  // V
};
Perspectives PerspectiveVectors(const Matrix& head_output, const Vector& alpha, int head,
                                const ModelParams& params);

struct ContextClusters {
  Matrix dep;            // n x n body block, P_dep(S_j | S_i) at (i-1, j-1)
  Vector headline_dep;   // P_dep(S_j | S_0), j = 1..n
  Matrix clusters;       // (n+1) x p, row i is c_i
  Vector summed;         // sum of the included c_i
  Vector embedding;      // LayerNorm(summed)
};
ContextClusters ComputeContextClusters(const Matrix& main, const Matrix& supporting, int head,
                                       const ModelParams& params);

struct Classification {
  std::vector<Vector> per_head;  // y_k
  Vector mixture;                // y
};
Classification Classify(const std::vector<Vector>& head_embeddings, const ModelParams& params);

struct HeadTrace {
  Matrix attention;     // (n+1) x (n+1)
  Vector alpha;         // n+1, alpha_0 = 1
  Matrix dep;           // n x n
  Vector headline_dep;  // n
  Vector probs;         // y_k
  int main_index = 1;   // 1-based body index, argmax of alpha over body rows
};

struct ForwardTrace {
  std::vector<HeadTrace> heads;
  Vector mixture;
  int num_body() const { return heads.empty() ? 0 : static_cast<int>(heads[0].alpha.size()) - 1; }
};

ForwardTrace Forward(const Matrix& embeddings, const ModelParams& params);
ForwardTrace Forward(const EncodedArticle& article, const ModelParams& params);
std::vector<ForwardTrace> ForwardBatch(const std::vector<EncodedArticle>& batch,
                                       const ModelParams& params);

struct MainSentence {
  int head = 0;
  int index = 1;              // 1-based body sentence index
  Vector supporting_weights;  // dep row of the main sentence, length n
};
std::vector<MainSentence> ExtractMainSentences(const ForwardTrace& trace);

// Index of the maximum, lowest index on ties.
int ArgMax(const Vector& v);
Vector Softmax(const Vector& logits);
double Gelu(double x);
double GeluDerivative(double x);

// Mixture negative log likelihood -log(y[label] + eps).
inline constexpr double kLossEpsilon = 1e-12;
double MixtureNll(const Vector& mixture, Label label);

// Loss of one article and its gradient, accumulated (+=) into grad, which
// must have params.size() entries.
double LossAndGradient(const Matrix& embeddings, Label label, const ModelParams& params,
                       Vector& grad);

// ---------------------------------------------------------------------------
// Checkpoints: 8-byte magic, u64 header length, JSON header, raw float64
// values in tensor order.

struct CheckpointMeta {
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string encoder_name;
  std::string encoder_version;
  int encoder_dim = 0;
  nlohmann::json extra = nlohmann::json::object();  // train config, manifest info
};

std::string SerializeCheckpoint(const ModelParams& params, const CheckpointMeta& meta);
void SaveCheckpoint(const std::string& path, const ModelParams& params,
                    const CheckpointMeta& meta);
struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
};
Checkpoint ParseCheckpoint(std::string_view bytes);
Checkpoint LoadCheckpoint(const std::string& path);
std::string CheckpointHash(const std::string& path);

}  // namespace biasnet

#endif  // BIASNET_MODEL_HPP_
