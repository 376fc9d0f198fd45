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

#include "biasnet/structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace biasnet {

nlohmann::json MainSentenceProfile::ToJson() const {
  nlohmann::json j = {{"article_id", article_id},         {"n_sentences", n_sentences},
                      {"salience", salience},             {"main_indices", main_indices},
                      {"main_locations", main_locations}, {"word_count", word_count}};
  if (bias) j["bias"] = {{"lexical", bias->lexical}, {"informational", bias->informational}};
  return j;
}

MainSentenceProfile MainSentenceProfile::FromJson(const nlohmann::json& j) {
  MainSentenceProfile p;
  try {
    p.article_id = j.at("article_id").get<std::string>();
    p.n_sentences = j.at("n_sentences").get<int>();
    p.salience = j.at("salience").get<std::vector<double>>();
    p.main_indices = j.at("main_indices").get<std::vector<int>>();
    p.main_locations = j.at("main_locations").get<std::vector<double>>();
    p.word_count = j.at("word_count").get<int>();
    if (j.contains("bias")) {
      p.bias = BiasCounts{j["bias"].at("lexical").get<int>(),
                          j["bias"].at("informational").get<int>()};
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, std::string("profile: ") + e.what());
  }
  return p;
}

MainSentenceProfile BuildProfile(const ForwardTrace& trace, const Article& article,
                                 const ProfileOptions& options) {
  const int n = trace.num_body();
  Require(!trace.heads.empty() && n >= 1, "profile needs a trace with body sentences");
  Require(n <= static_cast<int>(article.sentences.size()),
          "trace has more body sentences than article " + article.id);
  MainSentenceProfile p;
  p.article_id = article.id;
  p.n_sentences = n;
  p.word_count = article.word_count;
  p.salience.assign(static_cast<std::size_t>(n), 0.0);
  for (const HeadTrace& h : trace.heads) {
    for (int i = 0; i < n; ++i) p.salience[static_cast<std::size_t>(i)] += h.alpha[i + 1];
  }
  const double total = std::accumulate(p.salience.begin(), p.salience.end(), 0.0);
  Require(total > 0.0, "sentence-type scores sum to zero");
  for (double& s : p.salience) s /= total;

  for (const MainSentence& m : ExtractMainSentences(trace)) p.main_indices.push_back(m.index);
  if (options.dedup_locations) {
    std::sort(p.main_indices.begin(), p.main_indices.end());
    p.main_indices.erase(std::unique(p.main_indices.begin(), p.main_indices.end()),
                         p.main_indices.end());
  }
  for (int idx : p.main_indices) {
    p.main_locations.push_back(static_cast<double>(idx) / static_cast<double>(n));
  }
  return p;
}

std::string ProfilesToJsonl(const std::vector<MainSentenceProfile>& profiles) {
  std::string out;
  for (const auto& p : profiles) out += p.ToJson().dump() + "\n";
  return out;
}

std::vector<MainSentenceProfile> ParseProfilesJsonl(std::string_view text) {
  std::vector<MainSentenceProfile> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(MainSentenceProfile::FromJson(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      Fail(ErrorKind::kParse, "profiles line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<MainSentenceProfile> FilterByWordCount(std::vector<MainSentenceProfile> profiles,
                                                   int min_words, int max_words) {
  Require(min_words <= max_words, "min_words must not exceed max_words");
  std::erase_if(profiles, [&](const MainSentenceProfile& p) {
    return p.word_count < min_words || p.word_count > max_words;
  });
  return profiles;
}

std::string MainSentenceText(const ForwardTrace& trace, const Article& article) {
  std::set<int> indices;
  for (const MainSentence& m : ExtractMainSentences(trace)) indices.insert(m.index);
  std::string text;
  for (int idx : indices) {
    Require(idx <= static_cast<int>(article.sentences.size()),
            "main sentence index beyond article " + article.id);
    if (!text.empty()) text += ' ';
    text += article.sentences[static_cast<std::size_t>(idx - 1)];
  }
  return text;
}

double DtwDistance(std::span<const double> a, std::span<const double> b) {
  Require(!a.empty() && !b.empty(), "DTW needs non-empty series");
  const std::size_t m = b.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, kInf);
  std::vector<double> cur(m + 1, kInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = kInf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = std::abs(a[i - 1] - b[j - 1]) + best;
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

std::string_view SeriesKindName(SeriesKind kind) {
  return kind == SeriesKind::kSalience ? "salience" : "onehot";
}

SeriesKind ParseSeriesKind(std::string_view name) {
  if (name == "salience") return SeriesKind::kSalience;
  if (name == "onehot") return SeriesKind::kOneHot;
  Fail(ErrorKind::kInvalidArgument,
       "unknown series kind \"" + std::string(name) + "\" (salience|onehot)");
}

std::vector<double> ProfileSeries(const MainSentenceProfile& profile, SeriesKind kind) {
  if (kind == SeriesKind::kSalience) return profile.salience;
  Require(!profile.main_indices.empty(), "profile " + profile.article_id + " has no main sentences");
  std::vector<double> s(static_cast<std::size_t>(profile.n_sentences), 0.0);
  const double w = 1.0 / static_cast<double>(profile.main_indices.size());
  for (int idx : profile.main_indices) s[static_cast<std::size_t>(idx - 1)] += w;
  return s;
}

Matrix DtwMatrix(const std::vector<std::vector<double>>& series, int jobs) {
  const auto m = static_cast<Eigen::Index>(series.size());
  Matrix d = Matrix::Zero(m, m);
  auto fill_rows = [&](Eigen::Index start, Eigen::Index stride) {
    for (Eigen::Index i = start; i < m; i += stride) {
      for (Eigen::Index j = i + 1; j < m; ++j) {
        d(i, j) = DtwDistance(series[static_cast<std::size_t>(i)],
                              series[static_cast<std::size_t>(j)]);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(m)));
  if (workers == 1) {
    fill_rows(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(fill_rows, w, workers);
    for (auto& t : threads) t.join();
  }
  d.triangularView<Eigen::StrictlyLower>() = d.transpose();
  return d;
}

nlohmann::json ClusterConfig::ToJson() const {
  return {{"k", k},
          {"seed", seed},
          {"max_iter", max_iter},
          {"series", std::string(SeriesKindName(series))}};
}

namespace {

double MedoidCost(const Matrix& d, const std::vector<Eigen::Index>& medoids) {
  double cost = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index med : medoids) best = std::min(best, d(i, med));
    cost += best;
  }
  return cost;
}

}  // namespace

ClusterReport ClusterDistances(const Matrix& distances, const std::vector<std::string>& ids,
                               const ClusterConfig& config) {
  const auto m = static_cast<Eigen::Index>(ids.size());
  Require(distances.rows() == m && distances.cols() == m, "distance matrix does not match ids");
  Require(config.k >= 1, "k must be >= 1");
  Require(config.max_iter >= 0, "max_iter must be >= 0");
  if (config.k > m) {
    Fail(ErrorKind::kInvalidArgument, fmt::format("k = {} exceeds the {} profiles", config.k, m));
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(config.seed, "kmedoids-init"));
  rng.Shuffle(order);
  std::vector<Eigen::Index> medoids(order.begin(), order.begin() + config.k);
  std::sort(medoids.begin(), medoids.end());

  ClusterReport report;
  report.config = config;
  report.article_ids = ids;
  double cost = MedoidCost(distances, medoids);
  report.cost_history.push_back(cost);

  for (int iter = 0; iter < config.max_iter; ++iter) {
    double best_cost = cost;
    std::size_t best_slot = 0;
    Eigen::Index best_candidate = -1;
    std::vector<Eigen::Index> trial = medoids;
    for (std::size_t s = 0; s < medoids.size(); ++s) {
      for (Eigen::Index o = 0; o < m; ++o) {
        if (std::find(medoids.begin(), medoids.end(), o) != medoids.end()) continue;
        trial[s] = o;
        const double c = MedoidCost(distances, trial);
        if (c < best_cost - 1e-12 * (1.0 + std::abs(best_cost))) {
          best_cost = c;
          best_slot = s;
          best_candidate = o;
        }
      }
      trial[s] = medoids[s];
    }
    if (best_candidate < 0) break;
    medoids[best_slot] = best_candidate;
    std::sort(medoids.begin(), medoids.end());
    cost = best_cost;
    report.cost_history.push_back(cost);
  }
  report.total_cost = cost;

  report.assignments.assign(static_cast<std::size_t>(m), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    int best = 0;
    for (int c = 1; c < config.k; ++c) {
      if (distances(i, medoids[c]) < distances(i, medoids[best])) best = c;
    }
    // A medoid always belongs to its own cluster, even at zero distance ties.
    for (int c = 0; c < config.k; ++c) {
      if (medoids[c] == i) best = c;
    }
    report.assignments[static_cast<std::size_t>(i)] = best;
  }
  report.clusters.resize(static_cast<std::size_t>(config.k));
  for (int c = 0; c < config.k; ++c) {
    report.clusters[c].medoid_id = ids[static_cast<std::size_t>(medoids[c])];
  }
  for (int a : report.assignments) ++report.clusters[static_cast<std::size_t>(a)].size;
  for (auto& c : report.clusters) {
    c.size_percent = 100.0 * c.size / static_cast<double>(m);
  }
  return report;
}

ClusterReport ClusterProfiles(const std::vector<MainSentenceProfile>& profiles,
                              const ClusterConfig& config) {
  Require(!profiles.empty(), "no profiles to cluster");
  std::vector<std::vector<double>> series;
  std::vector<std::string> ids;
  for (const auto& p : profiles) {
    series.push_back(ProfileSeries(p, config.series));
    ids.push_back(p.article_id);
  }
  ClusterReport report = ClusterDistances(DtwMatrix(series, config.jobs), ids, config);

  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    ClusterStats& st = report.clusters[c];
    double words = 0.0;
    double lexical = 0.0;
    double informational = 0.0;
    bool annotated = true;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (report.assignments[i] != static_cast<int>(c)) continue;
      words += profiles[i].word_count;
      if (profiles[i].bias) {
        lexical += profiles[i].bias->lexical;
        informational += profiles[i].bias->informational;
      } else {
        annotated = false;
      }
    }
    st.avg_words = words / st.size;
    if (annotated) {
      st.avg_lexical = lexical / st.size;
      st.avg_informational = informational / st.size;
    }
  }
  return report;
}

nlohmann::json ClusterReport::ToJson() const {
  nlohmann::json clusters_json = nlohmann::json::array();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const ClusterStats& s = clusters[c];
    clusters_json.push_back(
        {{"cluster", c},
         {"size", s.size},
         {"size_percent", s.size_percent},
         {"avg_words", s.avg_words},
         {"avg_lexical", s.avg_lexical ? nlohmann::json(*s.avg_lexical) : nlohmann::json()},
         {"avg_informational",
          s.avg_informational ? nlohmann::json(*s.avg_informational) : nlohmann::json()},
         {"medoid", s.medoid_id}});
  }
  nlohmann::json assign = nlohmann::json::object();
  for (std::size_t i = 0; i < article_ids.size(); ++i) assign[article_ids[i]] = assignments[i];
  return {{"metadata",
           {{"algorithm", "k-medoids (PAM swap)"},
            {"distance", "DTW, absolute difference, no window"}}},
          {"config", config.ToJson()},
          {"k", config.k},
          {"total_cost", total_cost},
          {"cost_history", cost_history},
          {"clusters", clusters_json},
          {"assignments", assign}};
}

LocationDensity ComputeLocationDensity(std::span<const double> locations, int bins) {
  Require(bins >= 1, "bins must be >= 1");
  LocationDensity d;
  for (int b = 0; b < bins; ++b) {
    d.bins.push_back({static_cast<double>(b) / bins, static_cast<double>(b + 1) / bins, 0});
  }
  for (double x : locations) {
    Require(x >= 0.0 && x <= 1.0, "relative locations must lie in [0, 1]");
    const int b = std::min(bins - 1, static_cast<int>(std::floor(x * bins)));
    ++d.bins[static_cast<std::size_t>(b)].count;
    d.rug.push_back(x);
  }
  std::sort(d.rug.begin(), d.rug.end());
  return d;
}

LocationDensity ComputeLocationDensity(const std::vector<MainSentenceProfile>& profiles,
                                       const ClusterReport& report, int cluster, int bins) {
  Require(profiles.size() == report.assignments.size(), "profiles do not match the report");
  std::vector<double> locations;
  bool any = false;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (report.assignments[i] != cluster) continue;
    any = true;
    locations.insert(locations.end(), profiles[i].main_locations.begin(),
                     profiles[i].main_locations.end());
  }
  if (!any) Fail(ErrorKind::kInvalidArgument, fmt::format("cluster {} is empty", cluster));
  return ComputeLocationDensity(locations, bins);
}

std::string LocationDensity::ToCsv() const {
  std::string out = "bin_left,bin_right,count\n";
  for (const auto& b : bins) out += fmt::format("{},{},{}\n", b.left, b.right, b.count);
  return out;
}

nlohmann::json LocationDensity::ToJson() const {
  nlohmann::json bins_json = nlohmann::json::array();
  std::size_t total = rug.size();
  for (const auto& b : bins) {
    bins_json.push_back({{"left", b.left},
                         {"right", b.right},
                         {"count", b.count},
                         {"mass", total ? static_cast<double>(b.count) / total : 0.0}});
  }
  return {{"bins", bins_json}, {"rug", rug}};
}

namespace {

bool Flagged(const nlohmann::json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>() > 0.0;
  if (v.is_null()) return false;
  Fail(ErrorKind::kParse, "annotation flags must be boolean or numeric");
}

void CountSentence(const nlohmann::json& s, BiasCounts& counts) {
  if (!s.is_object()) Fail(ErrorKind::kParse, "sentence annotation must be an object");
  if (Flagged(s.value("lexical", nlohmann::json()))) ++counts.lexical;
  if (Flagged(s.value("informational", nlohmann::json()))) ++counts.informational;
}

}  // namespace

std::map<std::string, BiasCounts> ParseAnnotations(const nlohmann::json& j) {
  if (!j.is_object()) Fail(ErrorKind::kParse, "annotations must be an object keyed by article id");
  std::map<std::string, BiasCounts> out;
  for (const auto& [id, sentences] : j.items()) {
    BiasCounts counts;
    if (sentences.is_object()) {
      for (const auto& [idx, s] : sentences.items()) CountSentence(s, counts);
    } else if (sentences.is_array()) {
      for (const auto& s : sentences) CountSentence(s, counts);
    } else {
      Fail(ErrorKind::kParse, "annotations for " + id + " must be an object or array");
    }
    out[id] = counts;
  }
  return out;
}

std::map<std::string, BiasCounts> LoadAnnotations(const std::string& path) {
  try {
    return ParseAnnotations(nlohmann::json::parse(ReadFile(path)));
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorKind::kParse, path + ": " + e.what());
  }
}

void ApplyAnnotations(std::vector<MainSentenceProfile>& profiles,
                      const std::map<std::string, BiasCounts>& annotations) {
  for (auto& p : profiles) {
    auto it = annotations.find(p.article_id);
    if (it != annotations.end()) p.bias = it->second;
  }
}

}  // namespace biasnet
