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

#include "biasnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

namespace biasnet {
namespace {

namespace bm = boost::math;

double Poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

double NormalUpperTail(double z) { return bm::cdf(bm::complement(bm::normal(), z)); }

double ClampProbability(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace

double NormalCdf(double x) { return bm::cdf(bm::normal(), x); }

double NormalQuantile(double p) {
  Require(p > 0.0 && p < 1.0, "normal quantile needs p in (0, 1)");
  return bm::quantile(bm::normal(), p);
}

double StudentTCdf(double t, double df) {
  Require(df > 0.0, "t distribution needs df > 0");
  return bm::cdf(bm::students_t(df), t);
}

double FisherFCdf(double x, double d1, double d2) {
  Require(d1 > 0.0 && d2 > 0.0, "F distribution needs positive df");
  if (x <= 0.0) return 0.0;
  return bm::cdf(bm::fisher_f(d1, d2), x);
}

TestResult ShapiroWilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  Require(n >= 3, "Shapiro-Wilk needs at least 3 values");
  Require(n <= 5000, "Shapiro-Wilk supports at most 5000 values");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (!(x.back() - x.front() > 0.0)) {
    Fail(ErrorKind::kInvalidArgument, "Shapiro-Wilk undefined for a constant sample");
  }

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::numbers::sqrt2 / 2.0;
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = NormalQuantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = Poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first = 1;
    double fac = 0.0;
    if (n > 5) {
      const double a2 = -m[1] / ssumm2 + Poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
      first = 2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  }

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= an;
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);
  double b = 0.0;
  for (std::size_t i = 0; i < half; ++i) b += a[i] * (x[n - 1 - i] - x[i]);
  double w = std::min(1.0, b * b / ssq);

  TestResult r;
  if (n == 3) {
    w = std::max(w, 0.75);
    r.statistic = w;
    r.p_value = ClampProbability(6.0 / std::numbers::pi * (std::asin(std::sqrt(w)) - std::numbers::pi / 3.0));
    return r;
  }
  r.statistic = w;
  double y = std::log1p(-w);
  double mu = 0.0;
  double sigma = 0.0;
  if (n <= 11) {
    const double gamma = Poly(g, an);
    if (y >= gamma) {
      r.p_value = 1e-99;
      return r;
    }
    y = -std::log(gamma - y);
    mu = Poly(c3, an);
    sigma = std::exp(Poly(c4, an));
  } else {
    const double ln = std::log(an);
    mu = Poly(c5, ln);
    sigma = std::exp(Poly(c6, ln));
  }
  r.p_value = ClampProbability(NormalUpperTail((y - mu) / sigma));
  return r;
}

TestResult TTestTwoSided(std::span<const double> a, std::span<const double> b, bool pooled) {
  Require(a.size() >= 2 && b.size() >= 2, "t-test needs at least two values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = Mean(a);
  const double mb = Mean(b);
  const double va = SampleVariance(a);
  const double vb = SampleVariance(b);
  double se2 = 0.0;
  double df = 0.0;
  if (pooled) {
    df = na + nb - 2.0;
    const double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    se2 = sp2 * (1.0 / na + 1.0 / nb);
  } else {
    const double qa = va / na;
    const double qb = vb / nb;
    se2 = qa + qb;
    if (se2 > 0.0) df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  }
  if (!(se2 > 0.0)) {
    if (ma == mb) return {0.0, 1.0};
    Fail(ErrorKind::kNumeric, "t-test undefined: both samples are constant with different means");
  }
  TestResult r;
  r.statistic = (ma - mb) / std::sqrt(se2);
  r.p_value = ClampProbability(
      2.0 * bm::cdf(bm::students_t(df), -std::abs(r.statistic)));
  return r;
}

TestResult FTestOneSided(std::span<const double> baseline, std::span<const double> ours) {
  Require(baseline.size() >= 2 && ours.size() >= 2,
          "F-test needs at least two values per sample");
  const double vo = SampleVariance(ours);
  if (!(vo > 0.0)) Fail(ErrorKind::kInvalidArgument, "F-test undefined: zero variance in ours");
  const double vb = SampleVariance(baseline);
  TestResult r;
  r.statistic = vb / vo;
  const double d1 = static_cast<double>(baseline.size() - 1);
  const double d2 = static_cast<double>(ours.size() - 1);
  r.p_value = r.statistic > 0.0
                  ? ClampProbability(bm::cdf(bm::complement(bm::fisher_f(d1, d2), r.statistic)))
                  : 1.0;
  return r;
}

double JsdGaussian(double mean_a, double std_a, double mean_b, double std_b) {
  Require(std_a > 0.0 && std_b > 0.0, "JSD needs nonzero standard deviations");
  Require(std::isfinite(mean_a) && std::isfinite(mean_b), "JSD needs finite means");
  if (mean_a == mean_b && std_a == std_b) return 0.0;
  const double max_sd = std::max(std_a, std_b);
  const double min_sd = std::min(std_a, std_b);
  const double lo = std::min(mean_a, mean_b) - 8.0 * max_sd;
  const double hi = std::max(mean_a, mean_b) + 8.0 * max_sd;
  const double wanted = std::ceil((hi - lo) / (min_sd / 16.0)) + 1.0;
  constexpr double kMaxPoints = 1 << 24;
  Require(wanted <= kMaxPoints, "JSD grid too large for the given spread");
  const long points = std::max(4096L, static_cast<long>(wanted));
  const double h = (hi - lo) / static_cast<double>(points - 1);

  const double log_norm_a = -std::log(std_a) - 0.5 * std::log(2.0 * std::numbers::pi);
  const double log_norm_b = -std::log(std_b) - 0.5 * std::log(2.0 * std::numbers::pi);
  double sum = 0.0;
  for (long i = 0; i < points; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double za = (x - mean_a) / std_a;
    const double zb = (x - mean_b) / std_b;
    const double lp = log_norm_a - 0.5 * za * za;
    const double lq = log_norm_b - 0.5 * zb * zb;
    const double hi_l = std::max(lp, lq);
    const double lm = hi_l + std::log1p(std::exp(std::min(lp, lq) - hi_l)) - std::numbers::ln2;
    const double f = 0.5 * (std::exp(lp) * (lp - lm) + std::exp(lq) * (lq - lm));
    sum += (i == 0 || i == points - 1) ? 0.5 * f : f;
  }
  return std::clamp(sum * h, 0.0, std::numbers::ln2);
}

double JsdGaussian(const TrialGroup& a, const TrialGroup& b) {
  const auto xa = a.Aurocs();
  const auto xb = b.Aurocs();
  Require(xa.size() >= 2 && xb.size() >= 2, "JSD needs at least two trials per group");
  return JsdGaussian(Mean(xa), SampleStd(xa), Mean(xb), SampleStd(xb));
}

std::string SignificanceStars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "(ns)";
}

nlohmann::json ComparisonSpec::ToJson() const {
  return {{"baseline_tag", baseline_tag},
          {"ours_tag", ours_tag},
          {"test_sets", test_sets},
          {"train_sizes", train_sizes},
          {"pooled_t_test", pooled_t_test}};
}

namespace {

using CellKey = std::tuple<std::string, std::string, int>;  // tag, test set, size

std::string SizeLabel(int size) { return size == 0 ? "full" : std::to_string(size); }

CellSummary Summarize(const TrialGroup& g) {
  CellSummary c;
  const auto au = g.Aurocs();
  const auto f1 = g.MacroF1s();
  c.n = static_cast<int>(au.size());
  c.auroc_mean = Mean(au);
  c.auroc_std = SampleStd(au);
  c.f1_mean = Mean(f1);
  c.f1_std = SampleStd(f1);
  const auto [lo, hi] = std::minmax_element(au.begin(), au.end());
  if (au.size() >= 3 && *hi > *lo) c.shapiro = ShapiroWilk(au);
  return c;
}

ModelRow BuildRow(const std::map<CellKey, TrialGroup>& groups, const std::string& tag, int size,
                  const ComparisonSpec& spec) {
  ModelRow row;
  for (const auto& ts : spec.test_sets) {
    row.cells[ts] = Summarize(groups.at({tag, ts, size}));
  }
  if (spec.test_sets.size() >= 2) {
    const TrialGroup& g1 = groups.at({tag, spec.test_sets[0], size});
    const TrialGroup& g2 = groups.at({tag, spec.test_sets[1], size});
    const auto a1 = g1.Aurocs();
    const auto a2 = g2.Aurocs();
    row.t_test = TTestTwoSided(a1, a2, spec.pooled_t_test);
    const double s1 = SampleStd(a1);
    const double s2 = SampleStd(a2);
    if (s1 > 0.0 && s2 > 0.0) {
      row.jsd = JsdGaussian(Mean(a1), s1, Mean(a2), s2);
    } else if (s1 == s2 && Mean(a1) == Mean(a2)) {
      row.jsd = 0.0;
    }
  }
  return row;
}

nlohmann::json TestJson(const std::optional<TestResult>& r, const char* stat_name) {
  if (!r) return nullptr;
  return {{stat_name, r->statistic}, {"p_value", r->p_value},
          {"stars", SignificanceStars(r->p_value)}};
}

nlohmann::json RowJson(const ModelRow& row) {
  nlohmann::json cells = nlohmann::json::object();
  for (const auto& [ts, c] : row.cells) {
    cells[ts] = {{"n", c.n},
                 {"auroc_mean", c.auroc_mean},
                 {"auroc_std", c.auroc_std},
                 {"macro_f1_mean", c.f1_mean},
                 {"macro_f1_std", c.f1_std},
                 {"shapiro", TestJson(c.shapiro, "w")}};
  }
  nlohmann::json j = {{"cells", cells}, {"t_test", TestJson(row.t_test, "t")}};
  j["jsd"] = row.jsd ? nlohmann::json(*row.jsd) : nlohmann::json(nullptr);
  return j;
}

std::string MeanStd(double mean, double sd) { return fmt::format("{:.4f} ({:.4f})", mean, sd); }

}  // namespace

ComparisonReport BuildComparisonReport(const std::vector<TrialResult>& results,
                                       const ComparisonSpec& spec) {
  Require(!spec.baseline_tag.empty() && !spec.ours_tag.empty(), "model tags must be non-empty");
  Require(spec.baseline_tag != spec.ours_tag, "baseline and ours tags must differ");
  Require(!spec.test_sets.empty(), "at least one test set is required");

  std::map<CellKey, TrialGroup> groups;
  std::set<std::tuple<std::string, std::string, int, std::uint64_t>> seen;
  std::set<int> sizes_found;
  for (const auto& r : results) {
    if (r.model_tag != spec.baseline_tag && r.model_tag != spec.ours_tag) continue;
    if (!seen.emplace(r.model_tag, r.test_set, r.train_size, r.seed).second) {
      Fail(ErrorKind::kInvalidArgument,
           fmt::format("duplicate trial: model {} test set {} size {} seed {}", r.model_tag,
                       r.test_set, SizeLabel(r.train_size), r.seed));
    }
    TrialGroup& g = groups[{r.model_tag, r.test_set, r.train_size}];
    g.model_tag = r.model_tag;
    g.test_set = r.test_set;
    g.train_size = r.train_size;
    g.results.push_back(r);
    sizes_found.insert(r.train_size);
  }

  std::vector<int> sizes = spec.train_sizes;
  if (sizes.empty()) sizes.assign(sizes_found.begin(), sizes_found.end());
  // Full-data rows (size 0) come last.
  std::stable_sort(sizes.begin(), sizes.end(), [](int a, int b) {
    if ((a == 0) != (b == 0)) return b == 0;
    return a < b;
  });
  Require(!sizes.empty(), "no trial results match the requested model tags");

  std::vector<std::string> missing;
  for (int size : sizes) {
    for (const auto& tag : {spec.baseline_tag, spec.ours_tag}) {
      for (const auto& ts : spec.test_sets) {
        auto it = groups.find({tag, ts, size});
        const std::size_t have = it == groups.end() ? 0 : it->second.results.size();
        if (have < 2) {
          missing.push_back(fmt::format("{}/{}/{} ({} trial{})", tag, ts, SizeLabel(size), have,
                                        have == 1 ? "" : "s"));
        }
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "cells need at least 2 trials:";
    for (const auto& m : missing) msg += " " + m + ";";
    msg.pop_back();
    Fail(ErrorKind::kInvalidArgument, msg);
  }

  ComparisonReport report;
  report.spec = spec;
  for (int size : sizes) {
    SizeBlock block;
    block.train_size = size;
    block.baseline = BuildRow(groups, spec.baseline_tag, size, spec);
    block.ours = BuildRow(groups, spec.ours_tag, size, spec);
    for (const auto& ts : spec.test_sets) {
      const auto b = groups.at({spec.baseline_tag, ts, size}).Aurocs();
      const auto o = groups.at({spec.ours_tag, ts, size}).Aurocs();
      if (SampleVariance(o) > 0.0) block.f_test[ts] = FTestOneSided(b, o);
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

nlohmann::json ComparisonReport::ToJson() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks) {
    nlohmann::json f = nlohmann::json::object();
    for (const auto& [ts, r] : b.f_test) f[ts] = TestJson(r, "f0");
    blocks_json.push_back({{"train_size", b.train_size},
                           {"baseline", RowJson(b.baseline)},
                           {"ours", RowJson(b.ours)},
                           {"f_test", f}});
  }
  return {{"metadata",
           {{"metric_for_tests", "auroc"},
            {"t_test", spec.pooled_t_test ? "pooled two-sided" : "welch two-sided"},
            {"f_test", "one-sided, var(baseline) / var(ours)"},
            {"jsd", "gaussian fit (mean, sample std), natural log, trapezoid quadrature"},
            {"stars", "*** p<.001, ** p<.01, * p<.05, (ns) otherwise"}}},
          {"spec", spec.ToJson()},
          {"blocks", blocks_json}};
}

std::string ComparisonReport::ToText() const {
  using Row = std::vector<std::string>;
  std::vector<Row> rows;
  const std::string& bt = spec.baseline_tag;
  const std::string& ot = spec.ours_tag;
  rows.push_back({"Train size", "Test set", bt + " AUROC", bt + " Macro-F1", ot + " AUROC",
                  ot + " Macro-F1", "Ratio of Var. (F-test)"});
  std::vector<std::size_t> rules;  // row indices preceded by a rule
  for (const auto& b : blocks) {
    rules.push_back(rows.size());
    bool first = true;
    for (const auto& ts : spec.test_sets) {
      const CellSummary& cb = b.baseline.cells.at(ts);
      const CellSummary& co = b.ours.cells.at(ts);
      auto f = b.f_test.find(ts);
      rows.push_back({first ? SizeLabel(b.train_size) : "", ts,
                      MeanStd(cb.auroc_mean, cb.auroc_std), MeanStd(cb.f1_mean, cb.f1_std),
                      MeanStd(co.auroc_mean, co.auroc_std), MeanStd(co.f1_mean, co.f1_std),
                      f == b.f_test.end() ? "-"
                                          : fmt::format("{:.4f}{}", f->second.statistic,
                                                        SignificanceStars(f->second.p_value))});
      first = false;
    }
    if (spec.test_sets.size() >= 2) {
      auto jsd_cell = [](const ModelRow& r) -> std::string {
        if (!r.jsd || !r.t_test) return "-";
        return fmt::format("{:.4f}{}", *r.jsd, SignificanceStars(r.t_test->p_value));
      };
      rows.push_back({"", "JSD (t-test)", jsd_cell(b.baseline), "", jsd_cell(b.ours), "", "-"});
    }
  }

  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::size_t total = 0;
  for (auto w : width) total += w;
  total += 2 * (width.size() - 1);

  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::find(rules.begin(), rules.end(), i) != rules.end()) {
      out << std::string(total, '-') << '\n';
    }
    std::string line;
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) line += "  ";
      line += rows[i][c];
      if (c + 1 < rows[i].size()) line += std::string(width[c] - rows[i][c].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  out << std::string(total, '-') << '\n';
  out << "mean (sample std) over trials; t-test " << (spec.pooled_t_test ? "pooled" : "Welch")
      << " two-sided on AUROC; F-test one-sided var(" << bt << ")/var(" << ot << ")\n";
  out << "*** p<.001, ** p<.01, * p<.05, (ns) otherwise\n";
  return out.str();
}

}  // namespace biasnet
