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

// Article ingestion, outlet filtering and outlet-disjoint split construction.

#ifndef BIASNET_CORPUS_HPP_
#define BIASNET_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biasnet/common.hpp"
#include "json.hpp"

namespace biasnet {

struct Article {
  std::string id;
  std::string headline;                // S_0
  std::vector<std::string> sentences;  // S_1..S_n
  std::string outlet;
  Label label = Label::kCenter;
  int word_count = 0;  // whitespace tokens over body sentences
};

class SentenceSegmenter {
 public:
  virtual ~SentenceSegmenter() = default;
  virtual std::vector<std::string> Split(std::string_view text) const = 0;
};

// Splits on '.', '!' or '?' (optionally followed by closing quotes or
// brackets) when followed by whitespace or end of text. Tokens found in the
// abbreviation list never end a sentence.
class RuleSegmenter : public SentenceSegmenter {
 public:
  RuleSegmenter();
  explicit RuleSegmenter(std::vector<std::string> abbreviations);

  std::vector<std::string> Split(std::string_view text) const override;

  static std::vector<std::string> DefaultAbbreviations();

 private:
  std::vector<std::string> abbreviations_;  // lower-cased, with trailing '.'
};

int CountWords(const std::vector<std::string>& sentences);

// Parses JSONL records {"id", "headline", "body" | "sentences", "outlet",
// "label"}. Errors name the offending line and field.
std::vector<Article> ParseArticlesJsonl(std::string_view text,
                                        const SentenceSegmenter& segmenter);
std::vector<Article> LoadArticles(const std::string& path,
                                  const SentenceSegmenter& segmenter);
std::vector<Article> LoadArticles(const std::string& path);

// Renames outlets through merge_map, then drops outlets with fewer than
// min_articles articles. Input order is preserved for survivors.
std::vector<Article> FilterAndMergeOutlets(
    std::vector<Article> articles, int min_articles,
    const std::map<std::string, std::string>& merge_map);

struct SplitTarget {
  int outlets_per_class = 0;
  int articles_per_outlet = 0;
};

struct SplitConfig {
  int train_per_class = 7300;
  SplitTarget test1{4, 50};
  SplitTarget test2{4, 60};
  SplitTarget valid{0, 50};

  nlohmann::json ToJson() const;
  static SplitConfig FromJson(const nlohmann::json& j);
};

inline constexpr std::array<std::string_view, 4> kSplitNames = {
    "train", "valid", "test1", "test2"};

struct SplitManifest {
  SplitConfig config;
  std::uint64_t seed = 0;
  // 0 means the full train split; otherwise the class-balanced subset size.
  int train_size = 0;
  std::uint64_t subsample_seed = 0;

  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test1;
  std::vector<std::string> test2;
  std::map<std::string, std::string> outlet_assignment;
  std::map<std::string, std::array<int, kNumClasses>> per_class_counts;

  const std::vector<std::string>& Split(std::string_view name) const;

  nlohmann::json ToJson() const;
  // Canonical serialization; identical manifests give identical bytes.
  std::string Serialize() const;
  static SplitManifest FromJson(const nlohmann::json& j);
  static SplitManifest Load(const std::string& path);
};

using ArticleIndex = std::unordered_map<std::string, const Article*>;
ArticleIndex IndexArticles(const std::vector<Article>& articles);

// Held-out outlets are drawn first (test1, test2, then valid), each class
// taking outlets_per_class outlets with at least articles_per_outlet articles
// of that class. Train is sampled per class from articles of the remaining
// outlets, regardless of outlet.
SplitManifest BuildAugmentedSplit(const std::vector<Article>& articles,
                                  const SplitConfig& config,
                                  std::uint64_t seed);

// Class-balanced subset of the train split: size / 3 per class, with the
// remainder handed out one article at a time in class order.
SplitManifest SubsampleTrain(const SplitManifest& manifest,
                             const std::vector<Article>& articles, int size,
                             std::uint64_t seed);

}  // namespace biasnet

#endif  // BIASNET_CORPUS_HPP_
