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

#include <algorithm>

#include "biasnet/structure.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace biasnet {
namespace {

// A trace whose heads put their largest alpha at the given 1-based indices.
ForwardTrace TraceWithMains(int n, const std::vector<int>& mains) {
  ForwardTrace t;
  for (int idx : mains) {
    HeadTrace h;
    h.alpha = Vector::Constant(n + 1, 0.5 / (n - 1));
    h.alpha[0] = 1.0;
    h.alpha[idx] = 0.5;
    h.dep = Matrix::Zero(n, n);
    h.headline_dep = Vector::Constant(n, 1.0 / n);
    h.probs = Vector::Constant(3, 1.0 / 3);
    h.main_index = idx;
    t.heads.push_back(h);
  }
  t.mixture = Vector::Constant(3, 1.0 / 3);
  return t;
}

Article MakeArticle(int n) {
  Article a;
  a.id = "art";
  a.headline = "head";
  for (int i = 1; i <= n; ++i) a.sentences.push_back("s" + std::to_string(i));
  a.word_count = 250;
  return a;
}

TEST(Profile, BuildsSalienceAndLocations) {
  const ForwardTrace t = TraceWithMains(4, {3, 1, 3});
  const MainSentenceProfile p = BuildProfile(t, MakeArticle(4));
  EXPECT_EQ(p.n_sentences, 4);
  EXPECT_EQ(p.main_indices, (std::vector<int>{1, 3}));
  EXPECT_EQ(p.main_locations, (std::vector<double>{0.25, 0.75}));
  double total = 0;
  for (double s : p.salience) total += s;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_GT(p.salience[2], p.salience[1]);
  EXPECT_EQ(p.word_count, 250);

  const MainSentenceProfile raw = BuildProfile(t, MakeArticle(4), {.dedup_locations = false});
  EXPECT_EQ(raw.main_indices, (std::vector<int>{3, 1, 3}));
  EXPECT_EQ(MainSentenceText(t, MakeArticle(4)), "s1 s3");
  EXPECT_THROW(BuildProfile(t, MakeArticle(3)), Error);
}

TEST(Profile, JsonlRoundTripAndFilter) {
  std::vector<MainSentenceProfile> ps;
  for (int wc : {150, 200, 600, 1000, 1001}) {
    MainSentenceProfile p = BuildProfile(TraceWithMains(3, {2}), MakeArticle(3));
    p.article_id = "a" + std::to_string(wc);
    p.word_count = wc;
    ps.push_back(p);
  }
  ps[1].bias = BiasCounts{2, 1};
  const auto back = ParseProfilesJsonl(ProfilesToJsonl(ps));
  ASSERT_EQ(back.size(), ps.size());
  EXPECT_EQ(back[1].ToJson(), ps[1].ToJson());
  EXPECT_EQ(back[0].ToJson(), ps[0].ToJson());
  const auto kept = FilterByWordCount(ps);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept.front().word_count, 200);
  EXPECT_EQ(kept.back().word_count, 1000);
  EXPECT_THROW(ParseProfilesJsonl("{bad\n"), Error);
}

TEST(Series, OneHotSharesHeads) {
  MainSentenceProfile p = BuildProfile(TraceWithMains(4, {3, 1, 3}), MakeArticle(4),
                                       {.dedup_locations = false});
  const auto s = ProfileSeries(p, SeriesKind::kOneHot);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_NEAR(s[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(s[2], 2.0 / 3, 1e-15);
  EXPECT_EQ(ProfileSeries(p, SeriesKind::kSalience), p.salience);
  EXPECT_EQ(ParseSeriesKind("onehot"), SeriesKind::kOneHot);
  EXPECT_EQ(SeriesKindName(SeriesKind::kSalience), "salience");
  EXPECT_THROW(ParseSeriesKind("x"), Error);
}

TEST(Dtw, KnownValues) {
  const std::vector<double> a = {0, 1, 2}, b = {0, 2};
  EXPECT_EQ(DtwDistance(a, b), 1.0);
  EXPECT_EQ(DtwDistance(a, a), 0.0);
  const std::vector<double> c = {1, 1, 1, 1}, d = {1};
  EXPECT_EQ(DtwDistance(c, d), 0.0);
  const std::vector<double> e = {0}, f = {3};
  EXPECT_EQ(DtwDistance(e, f), 3.0);
  EXPECT_THROW(DtwDistance(a, std::vector<double>{}), Error);
}

TEST(Dtw, EqualsBruteForce) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng.UniformIndex(6)), b(1 + rng.UniformIndex(6));
    for (double& x : a) x = rng.Uniform(-1, 1);
    for (double& x : b) x = rng.Uniform(-1, 1);
    EXPECT_EQ(DtwDistance(a, b), testing::BruteForceDtw(a, b));
    EXPECT_EQ(DtwDistance(a, b), DtwDistance(b, a));
  }
}

TEST(Dtw, MatrixIsSymmetricAndIndependentOfJobs) {
  const auto fam = testing::MakePeakFamilies(7, 3);
  const Matrix one = DtwMatrix(fam.series, 1);
  const Matrix three = DtwMatrix(fam.series, 3);
  EXPECT_EQ(one, three);
  EXPECT_EQ(one, one.transpose());
  EXPECT_TRUE((one.diagonal().array() == 0.0).all());
}

TEST(Cluster, RecoversPeakFamilies) {
  const auto fam = testing::MakePeakFamilies(15, 11);
  const Matrix d = DtwMatrix(fam.series);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < fam.series.size(); ++i) ids.push_back("p" + std::to_string(i));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ClusterConfig c;
    c.k = 2;
    c.seed = seed;
    const ClusterReport r = ClusterDistances(d, ids, c);
    EXPECT_EQ(testing::AdjustedRandIndex(r.assignments, fam.family), 1.0) << "seed " << seed;
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) {
      EXPECT_LT(r.cost_history[i], r.cost_history[i - 1]);
    }
    EXPECT_EQ(r.total_cost, r.cost_history.back());
  }
}

TEST(Cluster, AssignsToNearestMedoid) {
  const auto fam = testing::MakePeakFamilies(6, 2);
  const Matrix d = DtwMatrix(fam.series);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < fam.series.size(); ++i) ids.push_back("p" + std::to_string(i));
  ClusterConfig c;
  c.k = 3;
  const ClusterReport r = ClusterDistances(d, ids, c);
  ASSERT_EQ(r.clusters.size(), 3u);
  std::vector<Eigen::Index> medoids;
  for (const auto& st : r.clusters) {
    medoids.push_back(std::find(ids.begin(), ids.end(), st.medoid_id) - ids.begin());
  }
  EXPECT_TRUE(std::is_sorted(medoids.begin(), medoids.end()));
  double cost = 0;
  int total = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    int best = 0;
    for (int q = 1; q < 3; ++q) {
      if (d(i, medoids[q]) < d(i, medoids[best])) best = q;
    }
    if (i == medoids[r.assignments[i]]) best = r.assignments[i];
    EXPECT_EQ(r.assignments[i], best) << "point " << i;
    cost += d(i, medoids[best]);
  }
  for (const auto& st : r.clusters) total += st.size;
  EXPECT_EQ(total, static_cast<int>(ids.size()));
  EXPECT_NEAR(r.total_cost, cost, 1e-12);
}

TEST(Cluster, KEqualsNAndErrors) {
  const auto fam = testing::MakePeakFamilies(2, 4);
  const Matrix d = DtwMatrix(fam.series);
  const std::vector<std::string> ids = {"a", "b", "c", "d"};
  ClusterConfig c;
  c.k = 4;
  const ClusterReport r = ClusterDistances(d, ids, c);
  EXPECT_EQ(r.total_cost, 0.0);
  EXPECT_EQ(r.assignments, (std::vector<int>{0, 1, 2, 3}));
  c.k = 5;
  EXPECT_THROW(ClusterDistances(d, ids, c), Error);
  c.k = 0;
  EXPECT_THROW(ClusterDistances(d, ids, c), Error);
}

TEST(Cluster, ProfilesCarryStatsAndAnnotations) {
  std::vector<MainSentenceProfile> ps;
  const auto fam = testing::MakePeakFamilies(4, 9);
  for (std::size_t i = 0; i < fam.series.size(); ++i) {
    MainSentenceProfile p;
    p.article_id = "a" + std::to_string(i);
    p.salience = fam.series[i];
    p.n_sentences = static_cast<int>(p.salience.size());
    p.main_indices = {fam.family[i] == 0 ? 1 : p.n_sentences};
    p.main_locations = {static_cast<double>(p.main_indices[0]) / p.n_sentences};
    p.word_count = 100 * static_cast<int>(i + 1);
    ps.push_back(p);
  }
  const auto ann = ParseAnnotations(nlohmann::json::parse(R"({
    "a0": {"1": {"lexical": true, "informational": 0}, "2": {"lexical": 1, "informational": true}},
    "a1": [{"lexical": false, "informational": true}]})"));
  EXPECT_EQ(ann.at("a0").lexical, 2);
  EXPECT_EQ(ann.at("a0").informational, 1);
  EXPECT_EQ(ann.at("a1").informational, 1);
  ApplyAnnotations(ps, ann);
  EXPECT_TRUE(ps[0].bias.has_value());
  EXPECT_FALSE(ps[2].bias.has_value());

  ClusterConfig c;
  c.k = 2;
  const ClusterReport r = ClusterProfiles(ps, c);
  EXPECT_EQ(testing::AdjustedRandIndex(r.assignments, fam.family), 1.0);
  const int c0 = r.assignments[0];
  const ClusterStats& st = r.clusters[static_cast<std::size_t>(c0)];
  EXPECT_EQ(st.size, 4);
  EXPECT_DOUBLE_EQ(st.size_percent, 50.0);
  EXPECT_DOUBLE_EQ(st.avg_words, 250.0);
  EXPECT_FALSE(st.avg_lexical.has_value());  // a2, a3 lack annotations
  EXPECT_TRUE(r.ToJson().contains("clusters"));

  const LocationDensity early = ComputeLocationDensity(ps, r, c0, 4);
  EXPECT_EQ(early.rug.size(), 4u);
  EXPECT_EQ(early.bins[3].count, 0);
  EXPECT_THROW(ParseAnnotations(nlohmann::json::array()), Error);
}

TEST(Density, BinsAndEdges) {
  const std::vector<double> x = {0.0, 0.1, 0.5, 0.99, 1.0, 0.25};
  const LocationDensity d = ComputeLocationDensity(x, 4);
  ASSERT_EQ(d.bins.size(), 4u);
  EXPECT_EQ(d.bins[0].count, 2);
  EXPECT_EQ(d.bins[1].count, 1);
  EXPECT_EQ(d.bins[2].count, 1);
  EXPECT_EQ(d.bins[3].count, 2);
  EXPECT_EQ(d.rug.front(), 0.0);
  EXPECT_EQ(d.rug.back(), 1.0);
  EXPECT_EQ(d.ToCsv().substr(0, 25), "bin_left,bin_right,count\n");
  const std::vector<double> bad = {1.5};
  EXPECT_THROW(ComputeLocationDensity(bad, 4), Error);
  EXPECT_THROW(ComputeLocationDensity(x, 0), Error);
}

}  // namespace
}  // namespace biasnet
