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

#include "biasnet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_set>

namespace biasnet {

namespace {

bool IsSpace(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && IsSpace(s[b])) ++b;
  while (e > b && IsSpace(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string ToLower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool IsCloser(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

}  // namespace

RuleSegmenter::RuleSegmenter() : RuleSegmenter(DefaultAbbreviations()) {}

RuleSegmenter::RuleSegmenter(std::vector<std::string> abbreviations) {
  for (auto& a : abbreviations) {
    std::string lower = ToLower(a);
    if (lower.empty()) continue;
    if (lower.back() != '.') lower.push_back('.');
    abbreviations_.push_back(std::move(lower));
  }
}

std::vector<std::string> RuleSegmenter::DefaultAbbreviations() {
  return {"mr.",   "mrs.", "ms.",   "dr.",  "prof.", "sen.", "rep.",
          "gov.",  "gen.", "st.",   "jr.",  "sr.",   "vs.",  "e.g.",
          "i.e.",  "u.s.", "u.k.",  "u.n.", "inc.",  "co.",  "corp.",
          "ltd.",  "jan.", "feb.",  "aug.", "sept.", "oct.", "nov.",
          "dec.",  "no.",  "mt.",   "ft.",  "d.c."};
}

std::vector<std::string> RuleSegmenter::Split(std::string_view text) const {
  std::vector<std::string> out;
  std::size_t start = 0;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t end = i + 1;
    while (end < n && (text[end] == '.' || text[end] == '!' || text[end] == '?')) ++end;
    while (end < n && IsCloser(text[end])) ++end;
    if (end < n && !IsSpace(text[end])) continue;
    if (c == '.') {
      // Token ending at this period.
      std::size_t tb = i;
      while (tb > start && !IsSpace(text[tb - 1])) --tb;
      std::string token = ToLower(text.substr(tb, i + 1 - tb));
      while (!token.empty() && (token.front() == '"' || token.front() == '(' ||
                                token.front() == '\'')) {
        token.erase(token.begin());
      }
      if (std::find(abbreviations_.begin(), abbreviations_.end(), token) !=
          abbreviations_.end()) {
        i = end - 1;
        continue;
      }
    }
    std::string sentence = Trim(text.substr(start, end - start));
    if (!sentence.empty()) out.push_back(std::move(sentence));
    start = end;
    i = end - 1;
  }
  std::string tail = Trim(text.substr(std::min(start, n)));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

int CountWords(const std::vector<std::string>& sentences) {
  int words = 0;
  for (const auto& s : sentences) {
    bool in_word = false;
    for (char c : s) {
      if (IsSpace(c)) {
        in_word = false;
      } else if (!in_word) {
        in_word = true;
        ++words;
      }
    }
  }
  return words;
}

std::vector<Article> ParseArticlesJsonl(std::string_view text,
                                        const SentenceSegmenter& segmenter) {
  std::vector<Article> articles;
  std::unordered_set<std::string> seen;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (Trim(line).empty()) {
      if (nl == text.size()) break;
      continue;
    }
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      Fail(ErrorKind::kParse, where + ": malformed JSON: " + e.what());
    }
    if (!rec.is_object()) Fail(ErrorKind::kParse, where + ": record is not an object");

    auto get_string = [&](const char* field) -> std::string {
      auto it = rec.find(field);
      if (it == rec.end()) {
        Fail(ErrorKind::kParse, where + ": missing field \"" + field + "\"");
      }
      if (!it->is_string()) {
        Fail(ErrorKind::kParse, where + ": field \"" + field + "\" must be a string");
      }
      return it->get<std::string>();
    };

    Article a;
    if (rec.contains("id")) {
      a.id = get_string("id");
    } else {
      a.id = "L" + std::to_string(line_no);
    }
    a.headline = Trim(get_string("headline"));
    if (a.headline.empty()) Fail(ErrorKind::kParse, where + ": empty headline");
    if (auto it = rec.find("sentences"); it != rec.end()) {
      if (!it->is_array()) {
        Fail(ErrorKind::kParse, where + ": field \"sentences\" must be an array");
      }
      for (const auto& s : *it) {
        if (!s.is_string()) {
          Fail(ErrorKind::kParse, where + ": field \"sentences\" must hold strings");
        }
        std::string t = Trim(s.get<std::string>());
        if (!t.empty()) a.sentences.push_back(std::move(t));
      }
    } else if (rec.contains("body")) {
      a.sentences = segmenter.Split(get_string("body"));
    } else {
      Fail(ErrorKind::kParse, where + ": missing field \"body\"");
    }
    if (a.sentences.empty()) Fail(ErrorKind::kParse, where + ": body has no sentences");
    a.outlet = get_string("outlet");
    try {
      a.label = ParseLabel(get_string("label"));
    } catch (const Error& e) {
      Fail(ErrorKind::kParse, where + ": " + e.what());
    }
    a.word_count = CountWords(a.sentences);
    if (!seen.insert(a.id).second) {
      Fail(ErrorKind::kParse, where + ": duplicate article id \"" + a.id + "\"");
    }
    articles.push_back(std::move(a));
    if (nl == text.size()) break;
  }
  return articles;
}

std::vector<Article> LoadArticles(const std::string& path,
                                  const SentenceSegmenter& segmenter) {
  const std::string text = ReadFile(path);
  try {
    return ParseArticlesJsonl(text, segmenter);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::vector<Article> LoadArticles(const std::string& path) {
  return LoadArticles(path, RuleSegmenter());
}

std::vector<Article> FilterAndMergeOutlets(
    std::vector<Article> articles, int min_articles,
    const std::map<std::string, std::string>& merge_map) {
  Require(min_articles >= 1, "min_articles must be >= 1");
  std::map<std::string, int> counts;
  for (auto& a : articles) {
    if (auto it = merge_map.find(a.outlet); it != merge_map.end()) a.outlet = it->second;
    ++counts[a.outlet];
  }
  std::vector<Article> kept;
  kept.reserve(articles.size());
  for (auto& a : articles) {
    if (counts[a.outlet] >= min_articles) kept.push_back(std::move(a));
  }
  return kept;
}

nlohmann::json SplitConfig::ToJson() const {
  auto target = [](const SplitTarget& t) {
    return nlohmann::json{{"outlets_per_class", t.outlets_per_class},
                          {"articles_per_outlet", t.articles_per_outlet}};
  };
  return {{"train_per_class", train_per_class},
          {"test1", target(test1)},
          {"test2", target(test2)},
          {"valid", target(valid)}};
}

SplitConfig SplitConfig::FromJson(const nlohmann::json& j) {
  SplitConfig c;
  auto target = [](const nlohmann::json& t, SplitTarget def) {
    def.outlets_per_class = t.value("outlets_per_class", def.outlets_per_class);
    def.articles_per_outlet = t.value("articles_per_outlet", def.articles_per_outlet);
    return def;
  };
  c.train_per_class = j.value("train_per_class", c.train_per_class);
  if (j.contains("test1")) c.test1 = target(j["test1"], c.test1);
  if (j.contains("test2")) c.test2 = target(j["test2"], c.test2);
  if (j.contains("valid")) c.valid = target(j["valid"], c.valid);
  Require(c.train_per_class >= 0, "train_per_class must be >= 0");
  for (const SplitTarget* t : {&c.test1, &c.test2, &c.valid}) {
    Require(t->outlets_per_class >= 0 && t->articles_per_outlet >= 0,
            "split targets must be non-negative");
  }
  return c;
}

const std::vector<std::string>& SplitManifest::Split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test1") return test1;
  if (name == "test2") return test2;
  Fail(ErrorKind::kInvalidArgument, "unknown split \"" + std::string(name) +
                                        "\" (expected train, valid, test1 or test2)");
}

nlohmann::json SplitManifest::ToJson() const {
  nlohmann::json config_json = config.ToJson();
  config_json["train_size"] = train_size;
  config_json["subsample_seed"] = subsample_seed;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [split, per_class] : per_class_counts) {
    nlohmann::json row = nlohmann::json::object();
    for (Label l : kAllLabels) row[std::string(LabelName(l))] = per_class[LabelIndex(l)];
    counts[split] = row;
  }
  return {{"config", config_json},
          {"seed", seed},
          {"splits",
           {{"train", train}, {"valid", valid}, {"test1", test1}, {"test2", test2}}},
          {"outlets", outlet_assignment},
          {"counts", counts}};
}

std::string SplitManifest::Serialize() const { return ToJson().dump(2) + "\n"; }

SplitManifest SplitManifest::FromJson(const nlohmann::json& j) {
  SplitManifest m;
  try {
    const auto& cfg = j.at("config");
    m.config = SplitConfig::FromJson(cfg);
    m.train_size = cfg.value("train_size", 0);
    m.subsample_seed = cfg.value("subsample_seed", std::uint64_t{0});
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& splits = j.at("splits");
    m.train = splits.value("train", std::vector<std::string>{});
    m.valid = splits.value("valid", std::vector<std::string>{});
    m.test1 = splits.value("test1", std::vector<std::string>{});
    m.test2 = splits.value("test2", std::vector<std::string>{});
    m.outlet_assignment =
        j.value("outlets", std::map<std::string, std::string>{});
    if (j.contains("counts")) {
      for (const auto& [split, row] : j["counts"].items()) {
        std::array<int, kNumClasses> per_class{};
        for (Label l : kAllLabels) {
          per_class[LabelIndex(l)] = row.value(std::string(LabelName(l)), 0);
        }
        m.per_class_counts[split] = per_class;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

SplitManifest SplitManifest::Load(const std::string& path) {
  const std::string text = ReadFile(path);
  try {
    return FromJson(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorKind::kParse, path + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

ArticleIndex IndexArticles(const std::vector<Article>& articles) {
  ArticleIndex index;
  index.reserve(articles.size());
  for (const auto& a : articles) index.emplace(a.id, &a);
  return index;
}

namespace {

std::array<int, kNumClasses> CountClasses(const std::vector<std::string>& ids,
                                          const ArticleIndex& index) {
  std::array<int, kNumClasses> counts{};
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) Fail(ErrorKind::kInvalidArgument, "unknown article id \"" + id + "\"");
    ++counts[LabelIndex(it->second->label)];
  }
  return counts;
}

void FillCounts(SplitManifest& m, const ArticleIndex& index) {
  m.per_class_counts.clear();
  for (std::string_view name : kSplitNames) {
    m.per_class_counts[std::string(name)] = CountClasses(m.Split(name), index);
  }
}

}  // namespace

SplitManifest BuildAugmentedSplit(const std::vector<Article>& articles,
                                  const SplitConfig& config, std::uint64_t seed) {
  // outlet -> class -> article ids (sorted for a seed-only dependence).
  std::map<std::string, std::array<std::vector<std::string>, kNumClasses>> by_outlet;
  for (const auto& a : articles) by_outlet[a.outlet][LabelIndex(a.label)].push_back(a.id);
  for (auto& [outlet, per_class] : by_outlet) {
    for (auto& ids : per_class) std::sort(ids.begin(), ids.end());
  }

  SplitManifest m;
  m.config = config;
  m.seed = seed;

  struct Held {
    std::string_view name;
    SplitTarget target;
    std::vector<std::string>* ids;
  };
  const std::array<Held, 3> held = {Held{"test1", config.test1, &m.test1},
                                    Held{"test2", config.test2, &m.test2},
                                    Held{"valid", config.valid, &m.valid}};
  for (const Held& split : held) {
    if (split.target.outlets_per_class == 0) continue;
    for (Label label : kAllLabels) {
      const int c = LabelIndex(label);
      std::vector<std::string> eligible;
      for (const auto& [outlet, per_class] : by_outlet) {
        if (m.outlet_assignment.count(outlet)) continue;
        if (static_cast<int>(per_class[c].size()) >= split.target.articles_per_outlet) {
          eligible.push_back(outlet);
        }
      }
      if (static_cast<int>(eligible.size()) < split.target.outlets_per_class) {
        Fail(ErrorKind::kInfeasible,
             std::string(split.name) + ": class " + std::string(LabelName(label)) +
                 " needs " + std::to_string(split.target.outlets_per_class) +
                 " unassigned outlets with >= " +
                 std::to_string(split.target.articles_per_outlet) + " " +
                 std::string(LabelName(label)) + " articles, only " +
                 std::to_string(eligible.size()) + " eligible");
      }
      Rng rng(DeriveSeed(seed, std::string("outlets/") + std::string(split.name),
                         static_cast<std::uint64_t>(c)));
      rng.Shuffle(eligible);
      for (int k = 0; k < split.target.outlets_per_class; ++k) {
        const std::string& outlet = eligible[k];
        m.outlet_assignment[outlet] = std::string(split.name);
        std::vector<std::string> pool = by_outlet[outlet][c];
        rng.Shuffle(pool);
        split.ids->insert(split.ids->end(), pool.begin(),
                          pool.begin() + split.target.articles_per_outlet);
      }
    }
  }

  std::array<std::vector<const Article*>, kNumClasses> train_pool;
  for (const auto& a : articles) {
    if (!m.outlet_assignment.count(a.outlet)) train_pool[LabelIndex(a.label)].push_back(&a);
  }
  for (Label label : kAllLabels) {
    auto& pool = train_pool[LabelIndex(label)];
    if (static_cast<int>(pool.size()) < config.train_per_class) {
      Fail(ErrorKind::kInfeasible,
           "train: class " + std::string(LabelName(label)) + " needs " +
               std::to_string(config.train_per_class) +
               " articles outside held-out outlets, only " +
               std::to_string(pool.size()) + " available");
    }
    std::sort(pool.begin(), pool.end(),
              [](const Article* a, const Article* b) { return a->id < b->id; });
    Rng rng(DeriveSeed(seed, "train", static_cast<std::uint64_t>(LabelIndex(label))));
    rng.Shuffle(pool);
    for (int i = 0; i < config.train_per_class; ++i) {
      m.train.push_back(pool[i]->id);
      m.outlet_assignment[pool[i]->outlet] = "train";
    }
  }

  for (auto* ids : {&m.train, &m.valid, &m.test1, &m.test2}) {
    std::sort(ids->begin(), ids->end());
  }
  FillCounts(m, IndexArticles(articles));
  return m;
}

SplitManifest SubsampleTrain(const SplitManifest& manifest,
                             const std::vector<Article>& articles, int size,
                             std::uint64_t seed) {
  Require(size >= 3, "subsample size must be >= 3 (one article per class)");
  Require(size <= static_cast<int>(manifest.train.size()),
          "subsample size " + std::to_string(size) + " exceeds train size " +
              std::to_string(manifest.train.size()));
  const ArticleIndex index = IndexArticles(articles);
  std::array<std::vector<std::string>, kNumClasses> by_class;
  for (const auto& id : manifest.train) {
    auto it = index.find(id);
    if (it == index.end()) Fail(ErrorKind::kInvalidArgument, "unknown article id \"" + id + "\"");
    by_class[LabelIndex(it->second->label)].push_back(id);
  }

  SplitManifest out = manifest;
  out.train.clear();
  out.train_size = size;
  out.subsample_seed = seed;
  for (int c = 0; c < kNumClasses; ++c) {
    const int want = size / kNumClasses + (c < size % kNumClasses ? 1 : 0);
    auto& pool = by_class[c];
    if (static_cast<int>(pool.size()) < want) {
      Fail(ErrorKind::kInfeasible,
           "subsample: class " + std::string(LabelName(static_cast<Label>(c))) +
               " needs " + std::to_string(want) + " train articles, only " +
               std::to_string(pool.size()) + " available");
    }
    std::sort(pool.begin(), pool.end());
    Rng rng(DeriveSeed(seed, "subsample", static_cast<std::uint64_t>(c)));
    rng.Shuffle(pool);
    out.train.insert(out.train.end(), pool.begin(), pool.begin() + want);
  }
  std::sort(out.train.begin(), out.train.end());

  for (auto it = out.outlet_assignment.begin(); it != out.outlet_assignment.end();) {
    it = it->second == "train" ? out.outlet_assignment.erase(it) : std::next(it);
  }
  for (const auto& id : out.train) out.outlet_assignment[index.at(id)->outlet] = "train";
  FillCounts(out, index);
  return out;
}

}  // namespace biasnet
