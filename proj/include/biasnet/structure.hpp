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

// Main-sentence location profiles and their clustering.

#ifndef BIASNET_STRUCTURE_HPP_
#define BIASNET_STRUCTURE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasnet/corpus.hpp"
#include "biasnet/model.hpp"
#include "json.hpp"

namespace biasnet {

struct BiasCounts {
  int lexical = 0;        // sentences with lexical bias
  int informational = 0;  // sentences with informational bias
};

struct MainSentenceProfile {
  std::string article_id;
  int n_sentences = 0;
  std::vector<double> salience;        // mean body alpha over heads, sums to 1
  std::vector<int> main_indices;       // 1-based, one per head unless deduplicated
  std::vector<double> main_locations;  // main_indices / n_sentences
  int word_count = 0;
  std::optional<BiasCounts> bias;

  nlohmann::json ToJson() const;
  static MainSentenceProfile FromJson(const nlohmann::json& j);
};

struct ProfileOptions {
  bool dedup_locations = true;
};

MainSentenceProfile BuildProfile(const ForwardTrace& trace, const Article& article,
                                 const ProfileOptions& options = {});

std::string ProfilesToJsonl(const std::vector<MainSentenceProfile>& profiles);
std::vector<MainSentenceProfile> ParseProfilesJsonl(std::string_view text);

// Keeps articles with min_words <= word_count <= max_words.
std::vector<MainSentenceProfile> FilterByWordCount(std::vector<MainSentenceProfile> profiles,
                                                   int min_words = 200, int max_words = 1000);

// Concatenated text of the distinct main sentences, in body order.
std::string MainSentenceText(const ForwardTrace& trace, const Article& article);

// DTW with |a_i - b_j| cost, no window, match/insert/delete steps.
double DtwDistance(std::span<const double> a, std::span<const double> b);

enum class SeriesKind {
  kSalience,  // mean-over-heads alpha per body position
  kOneHot,    // share of heads choosing each body position
};
std::string_view SeriesKindName(SeriesKind kind);
SeriesKind ParseSeriesKind(std::string_view name);
std::vector<double> ProfileSeries(const MainSentenceProfile& profile, SeriesKind kind);

// Symmetric pairwise DTW matrix. jobs > 1 splits rows across threads; the
// result does not depend on jobs.
Matrix DtwMatrix(const std::vector<std::vector<double>>& series, int jobs = 1);

struct ClusterConfig {
  int k = 3;
  std::uint64_t seed = 0;
  int max_iter = 100;
  SeriesKind series = SeriesKind::kSalience;
  int jobs = 1;

  nlohmann::json ToJson() const;
};

struct ClusterStats {
  int size = 0;
  double size_percent = 0.0;
  double avg_words = 0.0;
  // Present when every member carries annotation counts.
  std::optional<double> avg_lexical;
  std::optional<double> avg_informational;
  std::string medoid_id;
};

struct ClusterReport {
  ClusterConfig config;
  std::vector<std::string> article_ids;
  std::vector<int> assignments;  // cluster per article, same order as article_ids
  std::vector<ClusterStats> clusters;
  double total_cost = 0.0;
  std::vector<double> cost_history;  // after initialization, then after each swap

  nlohmann::json ToJson() const;
};

// k-medoids (PAM swap) over pairwise DTW distances. Initial medoids are a
// seeded random draw; each iteration applies the best improving swap.
// Clusters are numbered by the position of their medoid in the input.
ClusterReport ClusterProfiles(const std::vector<MainSentenceProfile>& profiles,
                              const ClusterConfig& config);
// Same, on a precomputed distance matrix.
ClusterReport ClusterDistances(const Matrix& distances, const std::vector<std::string>& ids,
                               const ClusterConfig& config);

struct DensityBin {
  double left = 0.0;
  double right = 0.0;
  int count = 0;
};

struct LocationDensity {
  std::vector<DensityBin> bins;
  std::vector<double> rug;  // raw positions, sorted

  std::string ToCsv() const;
  nlohmann::json ToJson() const;
};

// Histogram of positions over [0, 1]; 1.0 falls in the last bin.
LocationDensity ComputeLocationDensity(std::span<const double> locations, int bins);
// Pools main_locations of one cluster's members.
LocationDensity ComputeLocationDensity(const std::vector<MainSentenceProfile>& profiles,
                                       const ClusterReport& report, int cluster, int bins);

// BASIL-style annotations: {"<article id>": {"<sentence index>": {"lexical":
// bool|int, "informational": bool|int}}}. Returns per-article counts of
// sentences flagged with each bias type.
std::map<std::string, BiasCounts> ParseAnnotations(const nlohmann::json& j);
std::map<std::string, BiasCounts> LoadAnnotations(const std::string& path);
void ApplyAnnotations(std::vector<MainSentenceProfile>& profiles,
                      const std::map<std::string, BiasCounts>& annotations);

}  // namespace biasnet

#endif  // BIASNET_STRUCTURE_HPP_
