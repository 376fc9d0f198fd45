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

// Seeded synthetic corpora for tests. Class signal is injected through
// class-specific tokens, which the hash encoder turns into shared vector
// components; each outlet adds its own style tokens.

#ifndef BIASNET_TESTS_SYNTHETIC_HPP_
#define BIASNET_TESTS_SYNTHETIC_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "biasnet/common.hpp"
#include "biasnet/corpus.hpp"
#include "json.hpp"

namespace biasnet::testing {

struct SyntheticCorpusSpec {
  int outlets_per_class = 2;
  int articles_per_outlet = 50;
  int min_sentences = 4;
  int max_sentences = 8;
  int words_per_sentence = 8;
  int class_tokens_per_sentence = 3;
  int class_vocab = 8;
  int noise_vocab = 300;
  std::uint64_t seed = 1;
};

inline std::vector<Article> MakeSyntheticCorpus(const SyntheticCorpusSpec& spec) {
  Rng rng(spec.seed);
  auto pick = [&](const std::string& prefix, int vocab) {
    return prefix + std::to_string(rng.UniformIndex(static_cast<std::uint64_t>(vocab)));
  };
  auto sentence = [&](Label label, const std::string& outlet, int class_tokens) {
    std::vector<std::string> words;
    for (int w = 0; w < spec.words_per_sentence - class_tokens - 1; ++w) {
      words.push_back(pick("w", spec.noise_vocab));
    }
    for (int w = 0; w < class_tokens; ++w) {
      words.push_back(pick(std::string(LabelName(label)).substr(0, 1) + "tok", spec.class_vocab));
    }
    words.push_back(outlet + "style" + std::to_string(rng.UniformIndex(4)));
    rng.Shuffle(words);
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
    return s + ".";
  };

  std::vector<Article> out;
  int next_id = 0;
  for (Label label : kAllLabels) {
    for (int o = 0; o < spec.outlets_per_class; ++o) {
      const std::string outlet =
          std::string(LabelName(label)) + "outlet" + std::to_string(o);
      for (int a = 0; a < spec.articles_per_outlet; ++a) {
        Article art;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "a%05d", next_id++);
        art.id = buf;
        art.outlet = outlet;
        art.label = label;
        art.headline = sentence(label, outlet, 1);
        const int n = spec.min_sentences +
                      static_cast<int>(rng.UniformIndex(
                          static_cast<std::uint64_t>(spec.max_sentences - spec.min_sentences + 1)));
        for (int s = 0; s < n; ++s) {
          art.sentences.push_back(sentence(label, outlet, spec.class_tokens_per_sentence));
        }
        art.word_count = CountWords(art.sentences);
        out.push_back(std::move(art));
      }
    }
  }
  return out;
}

inline std::string ToJsonl(const std::vector<Article>& articles) {
  std::string out;
  for (const auto& a : articles) {
    nlohmann::json j = {{"id", a.id},
                        {"headline", a.headline},
                        {"sentences", a.sentences},
                        {"outlet", a.outlet},
                        {"label", std::string(LabelName(a.label))}};
    out += j.dump() + "\n";
  }
  return out;
}

// Two salience families: family 0 peaks in the first two body positions,
// family 1 in the last two. Lengths vary from 6 to 12.
struct PeakFamilies {
  std::vector<std::vector<double>> series;
  std::vector<int> family;
};

inline PeakFamilies MakePeakFamilies(int per_family, std::uint64_t seed) {
  Rng rng(seed);
  PeakFamilies out;
  for (int f = 0; f < 2; ++f) {
    for (int i = 0; i < per_family; ++i) {
      const int n = 6 + static_cast<int>(rng.UniformIndex(7));
      const int offset = static_cast<int>(rng.UniformIndex(2));
      const int peak = f == 0 ? offset : n - 1 - offset;
      std::vector<double> s(static_cast<std::size_t>(n));
      double total = 0.0;
      for (int j = 0; j < n; ++j) {
        const double d = j - peak;
        s[static_cast<std::size_t>(j)] = std::exp(-d * d / 2.0) + rng.Uniform(0.0, 0.02);
        total += s[static_cast<std::size_t>(j)];
      }
      for (double& v : s) v /= total;
      out.series.push_back(std::move(s));
      out.family.push_back(f);
    }
  }
  return out;
}

}  // namespace biasnet::testing

#endif  // BIASNET_TESTS_SYNTHETIC_HPP_
