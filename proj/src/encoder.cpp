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

#include "biasnet/encoder.hpp"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace biasnet {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTokenSeed = 0x5eedba5e0f00d123ULL;
constexpr char kCacheMagic[8] = {'B', 'N', 'E', 'M', 'B', '0', '0', '1'};

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::string raw(text.substr(i, j - i));
      std::size_t b = 0, e = raw.size();
      while (b < e && std::ispunct(static_cast<unsigned char>(raw[b]))) ++b;
      while (e > b && std::ispunct(static_cast<unsigned char>(raw[e - 1]))) --e;
      std::string tok = b < e ? raw.substr(b, e - b) : raw;
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

void CheckFinite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) Fail(ErrorKind::kNumeric, what + ": non-finite embedding values");
}

}  // namespace

Vector DeterministicTestEncode(std::string_view text, int dim) {
  Require(dim >= 2, "test encoder dim must be >= 2");
  const auto tokens = Tokenize(text);
  Require(!tokens.empty(), "cannot encode an empty sentence");
  Vector sum = Vector::Zero(dim);
  for (const auto& tok : tokens) {
    Rng rng(SplitMix64(Fnv1a64(tok) ^ kTokenSeed));
    for (int j = 0; j < dim; ++j) sum[j] += rng.Normal();
  }
  const double norm = sum.norm();
  if (!(norm > 0.0)) Fail(ErrorKind::kNumeric, "degenerate token vector sum");
  return sum / norm;
}

HashEncoder::HashEncoder(int dim) : dim_(dim) {
  Require(dim >= 2, "test encoder dim must be >= 2");
}

Matrix HashEncoder::EncodeBatch(std::span<const std::string> texts) const {
  Matrix out(static_cast<Eigen::Index>(texts.size()), dim_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = DeterministicTestEncode(texts[i], dim_).transpose();
  }
  return out;
}

ExternalCommandEncoder::ExternalCommandEncoder(std::string name, std::string version,
                                               int dim, std::string command)
    : name_(std::move(name)),
      version_(std::move(version)),
      dim_(dim),
      command_(std::move(command)) {
  Require(dim_ > 0, "encoder dim must be > 0");
  Require(!command_.empty(), "external encoder needs a command");
}

Matrix ExternalCommandEncoder::EncodeBatch(std::span<const std::string> texts) const {
  static std::atomic<int> counter{0};
  const fs::path input = fs::temp_directory_path() /
                         ("biasnet-enc-" + std::to_string(::getpid()) + "-" +
                          std::to_string(counter++) + ".jsonl");
  {
    std::ofstream out(input, std::ios::binary);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + input.string());
    for (const auto& t : texts) {
      Require(!t.empty(), "cannot encode an empty sentence");
      out << nlohmann::json(t).dump() << '\n';
    }
  }
  const std::string cmd = command_ + " < '" + input.string() + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    fs::remove(input);
    Fail(ErrorKind::kIo, "cannot start encoder command: " + command_);
  }
  std::string output;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, got);
  const int status = ::pclose(pipe);
  fs::remove(input);
  if (status != 0) {
    Fail(ErrorKind::kIo, "encoder command exited with status " + std::to_string(status) +
                             ": " + command_);
  }

  Matrix result(static_cast<Eigen::Index>(texts.size()), dim_);
  std::istringstream lines(output);
  std::string line;
  Eigen::Index row = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (row >= result.rows()) Fail(ErrorKind::kParse, "encoder produced too many rows");
    nlohmann::json arr;
    try {
      arr = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      Fail(ErrorKind::kParse, "encoder output row " + std::to_string(row) + ": " + e.what());
    }
    if (!arr.is_array() || static_cast<int>(arr.size()) != dim_) {
      Fail(ErrorKind::kParse, "encoder output row " + std::to_string(row) +
                                  " is not an array of " + std::to_string(dim_) + " numbers");
    }
    for (int j = 0; j < dim_; ++j) result(row, j) = arr[j].get<double>();
    ++row;
  }
  if (row != result.rows()) {
    Fail(ErrorKind::kParse, "encoder produced " + std::to_string(row) + " rows for " +
                                std::to_string(result.rows()) + " sentences");
  }
  CheckFinite(result, name_);
  return result;
}

EncoderRegistry& EncoderRegistry::Default() {
  static EncoderRegistry* registry = [] {
    auto* r = new EncoderRegistry();
    r->Register("hash", [](const EncoderSpec& spec) {
      return std::make_unique<HashEncoder>(spec.dim);
    });
    return r;
  }();
  return *registry;
}

void EncoderRegistry::Register(const std::string& name, Factory factory) {
  std::lock_guard<std::mutex> lock(mu_);
  factories_[name] = std::move(factory);
}

bool EncoderRegistry::Contains(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mu_);
  return factories_.count(name) > 0;
}

std::unique_ptr<SentenceEncoder> EncoderRegistry::Create(const EncoderSpec& spec) const {
  Require(spec.dim > 0, "encoder dim must be > 0");
  Require(spec.frozen, "sentence encoders are always frozen");
  Factory factory;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = factories_.find(spec.name);
    if (it == factories_.end()) {
      Fail(ErrorKind::kInvalidArgument, "unregistered encoder \"" + spec.name + "\"");
    }
    factory = it->second;
  }
  auto encoder = factory(spec);
  if (encoder->dim() != spec.dim) {
    Fail(ErrorKind::kInvalidArgument, "encoder \"" + spec.name + "\" declares dim " +
                                          std::to_string(encoder->dim()) + ", expected " +
                                          std::to_string(spec.dim));
  }
  return encoder;
}

EncodedArticle EncodeArticle(const Article& article, const SentenceEncoder& encoder) {
  std::vector<std::string> texts;
  texts.reserve(article.sentences.size() + 1);
  texts.push_back(article.headline);
  texts.insert(texts.end(), article.sentences.begin(), article.sentences.end());
  for (const auto& t : texts) {
    Require(!t.empty(), "article " + article.id + ": cannot encode an empty sentence");
  }
  EncodedArticle out;
  out.article_id = article.id;
  out.label = article.label;
  out.outlet = article.outlet;
  out.embeddings = encoder.EncodeBatch(texts);
  if (out.embeddings.rows() != static_cast<Eigen::Index>(texts.size())) {
    Fail(ErrorKind::kInternal, "encoder returned the wrong number of rows");
  }
  CheckFinite(out.embeddings, "article " + article.id);
  return out;
}

EncodedArticle EncodeArticle(const Article& article, const EncoderSpec& spec) {
  auto encoder = EncoderRegistry::Default().Create(spec);
  return EncodeArticle(article, *encoder);
}

EncodedArticle TruncateArticle(EncodedArticle article, int max_sentences) {
  Require(max_sentences >= 2, "max_sentences must be >= 2");
  if (article.embeddings.rows() > max_sentences) {
    spdlog::warn("article {}: truncating {} body sentences to {}", article.article_id,
                 article.embeddings.rows() - 1, max_sentences - 1);
    article.embeddings.conservativeResize(max_sentences, Eigen::NoChange);
  }
  return article;
}

std::uint64_t ArticleTextHash(const Article& article) {
  std::uint64_t h = Fnv1a64(article.headline);
  for (const auto& s : article.sentences) {
    h = Fnv1a64(std::string_view("\x1f", 1), h);
    h = Fnv1a64(s, h);
  }
  return h;
}

std::string CorpusId(const std::vector<Article>& articles) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& a : articles) {
    h = Fnv1a64(a.id, h);
    h ^= ArticleTextHash(a);
    h = SplitMix64(h);
  }
  return "corpus-" + HexDigest(h);
}

EmbeddingCache::EmbeddingCache(std::string root, std::string encoder_name)
    : root_(std::move(root)), encoder_name_(std::move(encoder_name)) {}

std::string EmbeddingCache::BinPath(const std::string& corpus_id) const {
  return (fs::path(root_) / encoder_name_ / (corpus_id + ".bin")).string();
}

std::string EmbeddingCache::IndexPath(const std::string& corpus_id) const {
  return (fs::path(root_) / encoder_name_ / (corpus_id + ".idx.json")).string();
}

bool EmbeddingCache::Contains(const std::string& corpus_id) const {
  return fs::exists(BinPath(corpus_id)) && fs::exists(IndexPath(corpus_id));
}

std::vector<EncodedArticle> EmbeddingCache::Load(const std::string& corpus_id,
                                                 const std::vector<Article>& articles) const {
  static_assert(std::endian::native == std::endian::little,
                "embedding cache assumes a little-endian host");
  const std::string bin = ReadFile(BinPath(corpus_id));
  nlohmann::json idx;
  try {
    idx = nlohmann::json::parse(ReadFile(IndexPath(corpus_id)));
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorKind::kParse, IndexPath(corpus_id) + ": " + e.what());
  }
  if (bin.size() < 24 || std::memcmp(bin.data(), kCacheMagic, 8) != 0) {
    Fail(ErrorKind::kParse, BinPath(corpus_id) + ": not an embedding cache file");
  }
  std::uint64_t rows = 0, dim = 0;
  std::memcpy(&rows, bin.data() + 8, 8);
  std::memcpy(&dim, bin.data() + 16, 8);
  if (bin.size() != 24 + rows * dim * sizeof(double)) {
    Fail(ErrorKind::kParse, BinPath(corpus_id) + ": truncated cache file");
  }
  const double* data = reinterpret_cast<const double*>(bin.data() + 24);
  const auto& entries = idx.at("articles");
  std::vector<EncodedArticle> out;
  out.reserve(articles.size());
  for (const auto& a : articles) {
    auto it = entries.find(a.id);
    if (it == entries.end()) {
      Fail(ErrorKind::kInvalidArgument, "embedding cache has no entry for article " + a.id);
    }
    const auto offset = it->at("offset").get<std::uint64_t>();
    const auto n = it->at("rows").get<std::uint64_t>();
    if (it->at("text_hash").get<std::string>() != HexDigest(ArticleTextHash(a))) {
      Fail(ErrorKind::kInvalidArgument, "embedding cache is stale for article " + a.id);
    }
    if (offset + n > rows) Fail(ErrorKind::kParse, "embedding cache index out of range");
    EncodedArticle e;
    e.article_id = a.id;
    e.label = a.label;
    e.outlet = a.outlet;
    e.embeddings.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::uint64_t r = 0; r < n; ++r) {
      for (std::uint64_t c = 0; c < dim; ++c) {
        e.embeddings(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            data[(offset + r) * dim + c];
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

void EmbeddingCache::Store(const std::string& corpus_id, const std::vector<Article>& articles,
                           const std::vector<EncodedArticle>& encoded,
                           const std::string& encoder_identity) const {
  Require(articles.size() == encoded.size(), "cache store: article/encoding count mismatch");
  std::uint64_t rows = 0;
  std::uint64_t dim = encoded.empty() ? 0 : static_cast<std::uint64_t>(encoded[0].embeddings.cols());
  nlohmann::json entries = nlohmann::json::object();
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const auto n = static_cast<std::uint64_t>(encoded[i].embeddings.rows());
    entries[articles[i].id] = {{"offset", rows},
                               {"rows", n},
                               {"text_hash", HexDigest(ArticleTextHash(articles[i]))}};
    rows += n;
  }
  std::string bin(24 + rows * dim * sizeof(double), '\0');
  std::memcpy(bin.data(), kCacheMagic, 8);
  std::memcpy(bin.data() + 8, &rows, 8);
  std::memcpy(bin.data() + 16, &dim, 8);
  auto* data = reinterpret_cast<double*>(bin.data() + 24);
  std::uint64_t r = 0;
  for (const auto& e : encoded) {
    for (Eigen::Index i = 0; i < e.embeddings.rows(); ++i, ++r) {
      for (Eigen::Index c = 0; c < e.embeddings.cols(); ++c) {
        data[r * dim + static_cast<std::uint64_t>(c)] = e.embeddings(i, c);
      }
    }
  }
  const nlohmann::json idx = {{"encoder", encoder_identity},
                              {"corpus_id", corpus_id},
                              {"dim", dim},
                              {"rows", rows},
                              {"articles", entries}};
  // Data first, index last: a reader that sees the index sees complete data.
  WriteFileAtomic(BinPath(corpus_id), bin);
  WriteFileAtomic(IndexPath(corpus_id), idx.dump(1) + "\n");
}

std::vector<EncodedArticle> EncodeCorpus(const std::vector<Article>& articles,
                                         const SentenceEncoder* encoder,
                                         const EmbeddingCache* cache,
                                         const std::string& encoder_name) {
  const std::string corpus_id = CorpusId(articles);
  if (cache != nullptr && cache->Contains(corpus_id)) return cache->Load(corpus_id, articles);
  if (encoder == nullptr) {
    std::string where = cache ? cache->BinPath(corpus_id) : std::string("(no cache directory)");
    Fail(ErrorKind::kInvalidArgument,
         "no embedding cache for encoder \"" + encoder_name + "\" at " + where +
             "; pass an adapter command (--encoder-cmd) to fill it, or use the built-in "
             "\"hash\" encoder");
  }
  std::vector<EncodedArticle> encoded;
  encoded.reserve(articles.size());
  for (const auto& a : articles) encoded.push_back(EncodeArticle(a, *encoder));
  if (cache != nullptr) cache->Store(corpus_id, articles, encoded, encoder->Identity());
  return encoded;
}

}  // namespace biasnet
