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

// Sentence encoders. Pretrained encoders sit behind SentenceEncoder (text in,
// vector out) and are never trained; the hash encoder is a deterministic
// stand-in for tests and desk-scale experiments.

#ifndef BIASNET_ENCODER_HPP_
#define BIASNET_ENCODER_HPP_

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasnet/common.hpp"
#include "biasnet/corpus.hpp"

namespace biasnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kDefaultTestEncoderDim = 64;

struct EncoderSpec {
  std::string name = "hash";
  int dim = kDefaultTestEncoderDim;
  bool frozen = true;
};

struct EncodedArticle {
  std::string article_id;
  Matrix embeddings;  // (n+1) x d_s, row 0 is the headline
  Label label = Label::kCenter;
  std::string outlet;

  int num_body() const { return static_cast<int>(embeddings.rows()) - 1; }
};

class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  virtual int dim() const = 0;
  // One row per input text. Rows depend only on their own text.
  virtual Matrix EncodeBatch(std::span<const std::string> texts) const = 0;

  std::string Identity() const { return name() + "/" + version(); }
};

// Normalized sum of per-token pseudo-random Gaussian vectors. Tokens are
// lower-cased whitespace pieces with surrounding punctuation stripped, so
// the vector depends only on the token multiset.
Vector DeterministicTestEncode(std::string_view text, int dim);

class HashEncoder : public SentenceEncoder {
 public:
  explicit HashEncoder(int dim);
  std::string name() const override { return "hash"; }
  std::string version() const override { return "fnv-gauss-v1"; }
  int dim() const override { return dim_; }
  Matrix EncodeBatch(std::span<const std::string> texts) const override;

 private:
  int dim_;
};

// Runs an external program: one JSON string per line on stdin, one JSON
// array of dim numbers per line on stdout.
class ExternalCommandEncoder : public SentenceEncoder {
 public:
  ExternalCommandEncoder(std::string name, std::string version, int dim,
                         std::string command);
  std::string name() const override { return name_; }
  std::string version() const override { return version_; }
  int dim() const override { return dim_; }
  Matrix EncodeBatch(std::span<const std::string> texts) const override;

 private:
  std::string name_;
  std::string version_;
  int dim_;
  std::string command_;
};

class EncoderRegistry {
 public:
  using Factory = std::function<std::unique_ptr<SentenceEncoder>(const EncoderSpec&)>;

  // Holds the built-in "hash" encoder.
  static EncoderRegistry& Default();

  void Register(const std::string& name, Factory factory);
  bool Contains(const std::string& name) const;
  std::unique_ptr<SentenceEncoder> Create(const EncoderSpec& spec) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Factory> factories_;
};

EncodedArticle EncodeArticle(const Article& article, const SentenceEncoder& encoder);
EncodedArticle EncodeArticle(const Article& article, const EncoderSpec& spec);

// Keeps the headline and the first max_sentences - 1 body rows.
EncodedArticle TruncateArticle(EncodedArticle article, int max_sentences);

// Content hash of the sentences an encoder sees for one article.
std::uint64_t ArticleTextHash(const Article& article);
// Stable id for a corpus: hash over ids and texts of all articles.
std::string CorpusId(const std::vector<Article>& articles);

// On-disk layout: <root>/<encoder>/<corpus-id>.bin plus .idx.json holding
// row offsets by article id. The .bin file is a small header followed by
// little-endian float64 rows, so hits are bit-exact.
class EmbeddingCache {
 public:
  EmbeddingCache(std::string root, std::string encoder_name);

  std::string BinPath(const std::string& corpus_id) const;
  std::string IndexPath(const std::string& corpus_id) const;
  bool Contains(const std::string& corpus_id) const;

  std::vector<EncodedArticle> Load(const std::string& corpus_id,
                                   const std::vector<Article>& articles) const;
  void Store(const std::string& corpus_id, const std::vector<Article>& articles,
             const std::vector<EncodedArticle>& encoded,
             const std::string& encoder_identity) const;

 private:
  std::string root_;
  std::string encoder_name_;
};

// Cache-first corpus encoding. With a null encoder a missing cache is an
// error that says how to provide one.
std::vector<EncodedArticle> EncodeCorpus(const std::vector<Article>& articles,
                                         const SentenceEncoder* encoder,
                                         const EmbeddingCache* cache,
                                         const std::string& encoder_name);

}  // namespace biasnet

#endif  // BIASNET_ENCODER_HPP_
