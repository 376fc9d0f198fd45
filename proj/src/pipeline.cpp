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

#include "biasnet/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "biasnet/corpus.hpp"
#include "biasnet/encoder.hpp"
#include "biasnet/metrics.hpp"
#include "biasnet/model.hpp"
#include "biasnet/stats.hpp"
#include "biasnet/structure.hpp"
#include "biasnet/training.hpp"

namespace biasnet::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::map<std::string, std::vector<std::string>>& RequiredKeys() {
  static const auto* keys = new std::map<std::string, std::vector<std::string>>{
      {"prepare-data", {"corpus", "out"}},
      {"train", {"corpus", "manifest", "out_dir"}},
      {"evaluate", {"checkpoint", "corpus", "manifest", "results"}},
      {"stats", {"results", "out_dir"}},
      {"analyze-structure", {"checkpoint", "corpus", "out_dir"}},
      {"extract-main-sentences", {"checkpoint", "corpus", "out"}},
  };
  return *keys;
}

const char* TypeCategory(const json& v) {
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

// Overlays over onto base. Objects with default keys are closed: unknown
// keys are errors. Empty default objects are free-form maps.
void Overlay(json& base, const json& over, const std::string& path) {
  if (!over.is_object()) Fail(ErrorKind::kInvalidArgument, "config " + path + " must be an object");
  for (const auto& [key, value] : over.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) {
      if (base.empty()) {
        base[key] = value;
        continue;
      }
      Fail(ErrorKind::kInvalidArgument, "unknown config key \"" + where + "\"");
    }
    json& slot = base[key];
    if (!slot.is_null() && !value.is_null() &&
        std::string_view(TypeCategory(slot)) != TypeCategory(value)) {
      Fail(ErrorKind::kInvalidArgument, "config key \"" + where + "\" must be a " +
                                            TypeCategory(slot) + ", got " + TypeCategory(value));
    }
    if (slot.is_object() && !slot.empty()) {
      Overlay(slot, value, where);
    } else {
      slot = value;
    }
  }
}

std::string Str(const json& cfg, const char* key) { return cfg.at(key).get<std::string>(); }

void WriteRunConfig(const std::string& path, const json& resolved) {
  WriteFileAtomic(path, resolved.dump(2) + "\n");
}

struct EncoderChoice {
  std::string name;
  std::string version;
  int dim = 0;
  std::string command;
};

struct EncodedCorpus {
  std::vector<Article> articles;
  std::vector<EncodedArticle> encoded;
  std::string identity;
};

EncodedCorpus LoadEncodedCorpus(const std::string& corpus_path, const EncoderChoice& choice,
                                const std::string& cache_dir) {
  EncodedCorpus out;
  out.articles = LoadArticles(corpus_path);
  std::unique_ptr<SentenceEncoder> encoder;
  if (EncoderRegistry::Default().Contains(choice.name)) {
    EncoderSpec spec;
    spec.name = choice.name;
    spec.dim = choice.dim;
    encoder = EncoderRegistry::Default().Create(spec);
  } else if (!choice.command.empty()) {
    Require(!choice.version.empty(), "external encoder \"" + choice.name + "\" needs a version");
    encoder = std::make_unique<ExternalCommandEncoder>(choice.name, choice.version, choice.dim,
                                                       choice.command);
  }
  if (encoder) {
    if (!choice.version.empty() && encoder->version() != choice.version) {
      Fail(ErrorKind::kInvalidArgument, "encoder \"" + choice.name + "\" is version " +
                                            encoder->version() + ", requested " +
                                            choice.version);
    }
    out.identity = encoder->Identity();
  } else {
    Require(!choice.version.empty(), "encoder \"" + choice.name + "\" needs a version");
    out.identity = choice.name + "/" + choice.version;
  }
  std::unique_ptr<EmbeddingCache> cache;
  if (!cache_dir.empty()) cache = std::make_unique<EmbeddingCache>(cache_dir, choice.name);
  out.encoded = EncodeCorpus(out.articles, encoder.get(), cache.get(), choice.name);
  for (const auto& e : out.encoded) {
    if (e.embeddings.cols() != choice.dim) {
      Fail(ErrorKind::kInvalidArgument,
           fmt::format("embeddings of {} have dim {}, expected {}", e.article_id,
                       e.embeddings.cols(), choice.dim));
    }
  }
  return out;
}

EncoderChoice CheckpointEncoder(const Checkpoint& ck, const json& cfg) {
  return {ck.meta.encoder_name, ck.meta.encoder_version, ck.meta.encoder_dim,
          Str(cfg, "encoder_cmd")};
}

// Ids of one manifest split, or the whole corpus in file order.
std::vector<std::string> SelectIds(const json& cfg, const std::vector<Article>& articles) {
  const std::string manifest_path = Str(cfg, "manifest");
  const std::string split = Str(cfg, "split");
  if (manifest_path.empty()) {
    Require(split.empty(), "split requires a manifest");
    std::vector<std::string> ids;
    for (const auto& a : articles) ids.push_back(a.id);
    return ids;
  }
  Require(!split.empty(), "manifest given without a split name");
  return SplitManifest::Load(manifest_path).Split(split);
}

struct TracedArticle {
  const Article* article;
  ForwardTrace trace;
};

std::vector<TracedArticle> TraceArticles(const Checkpoint& ck, const EncodedCorpus& corpus,
                                         const std::vector<std::string>& ids) {
  const ArticleIndex index = IndexArticles(corpus.articles);
  const std::vector<EncodedArticle> selected =
      SelectSplit(corpus.encoded, ids, ck.params.config().max_sentences);
  std::vector<TracedArticle> out;
  for (const auto& e : selected) {
    out.push_back({index.at(e.article_id), Forward(e, ck.params)});
  }
  return out;
}

}  // namespace

std::vector<std::string> Commands() {
  return {"prepare-data",      "train",
          "evaluate",          "stats",
          "analyze-structure", "extract-main-sentences"};
}

json Defaults(std::string_view command) {
  if (command == "prepare-data") {
    return {{"corpus", ""},
            {"out", ""},
            {"seed", 0},
            {"train_size", 0},
            {"subsample_seed", nullptr},
            {"min_outlet_articles", 1},
            {"merge_outlets", json::object()},
            {"split", SplitConfig().ToJson()}};
  }
  if (command == "train") {
    json model = ModelConfig().ToJson();
    model.erase("d_s");
    json train = TrainConfig().ToJson();
    train.erase("seed");
    return {{"corpus", ""},
            {"manifest", ""},
            {"out_dir", ""},
            {"seed", 0},
            {"encoder", {{"name", "hash"}, {"version", ""}, {"dim", kDefaultTestEncoderDim},
                         {"cmd", ""}}},
            {"cache_dir", ""},
            {"model", model},
            {"train", train}};
  }
  if (command == "evaluate") {
    return {{"checkpoint", ""}, {"corpus", ""},     {"manifest", ""},
            {"split", "test1"}, {"results", ""},    {"model_tag", "ours"},
            {"encoder_cmd", ""}, {"cache_dir", ""}};
  }
  if (command == "stats") {
    const ComparisonSpec spec;
    return {{"results", ""},
            {"out_dir", ""},
            {"baseline_tag", spec.baseline_tag},
            {"ours_tag", spec.ours_tag},
            {"test_sets", spec.test_sets},
            {"train_sizes", json::array()},
            {"pooled", false},
            {"format", "both"}};
  }
  if (command == "analyze-structure") {
    const ClusterConfig cc;
    return {{"checkpoint", ""},
            {"corpus", ""},
            {"manifest", ""},
            {"split", ""},
            {"out_dir", ""},
            {"k", cc.k},
            {"seed", 0},
            {"max_iter", cc.max_iter},
            {"series", "salience"},
            {"dedup", true},
            {"min_words", 200},
            {"max_words", 1000},
            {"bins", 10},
            {"annotations", ""},
            {"jobs", 1},
            {"export_main_sentences", false},
            {"encoder_cmd", ""},
            {"cache_dir", ""}};
  }
  if (command == "extract-main-sentences") {
    return {{"checkpoint", ""}, {"corpus", ""},      {"manifest", ""},  {"split", ""},
            {"out", ""},        {"encoder_cmd", ""}, {"cache_dir", ""}};
  }
  Fail(ErrorKind::kInvalidArgument, "unknown command \"" + std::string(command) + "\"");
}

json Resolve(std::string_view command, const json& config) {
  json resolved = Defaults(command);
  if (!config.is_null()) Overlay(resolved, config, "");
  std::vector<std::string> missing;
  for (const auto& key : RequiredKeys().at(std::string(command))) {
    if (Str(resolved, key.c_str()).empty()) missing.push_back(key);
  }
  if (!missing.empty()) {
    std::string msg = std::string(command) + ": missing required";
    for (const auto& k : missing) msg += " " + k;
    Fail(ErrorKind::kInvalidArgument, msg);
  }
  if (resolved.contains("cache_dir") && Str(resolved, "cache_dir").empty()) {
    if (const char* env = std::getenv(kCacheDirEnv); env != nullptr && *env != '\0') {
      resolved["cache_dir"] = env;
    }
  }
  if (command == "prepare-data" && resolved["subsample_seed"].is_null()) {
    resolved["subsample_seed"] = resolved["seed"];
  }
  return resolved;
}

json Run(std::string_view command, const json& config) {
  if (command == "prepare-data") return PrepareData(config);
  if (command == "train") return Train(config);
  if (command == "evaluate") return Evaluate(config);
  if (command == "stats") return Stats(config);
  if (command == "analyze-structure") return AnalyzeStructure(config);
  if (command == "extract-main-sentences") return ExtractMainSentences(config);
  Fail(ErrorKind::kInvalidArgument, "unknown command \"" + std::string(command) + "\"");
}

json PrepareData(const json& config) {
  const json cfg = Resolve("prepare-data", config);
  const std::string out = Str(cfg, "out");
  std::vector<Article> articles = LoadArticles(Str(cfg, "corpus"));
  const auto merge = cfg.at("merge_outlets").get<std::map<std::string, std::string>>();
  articles = FilterAndMergeOutlets(std::move(articles), cfg.at("min_outlet_articles").get<int>(),
                                   merge);
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  SplitManifest manifest =
      BuildAugmentedSplit(articles, SplitConfig::FromJson(cfg.at("split")), seed);
  const int train_size = cfg.at("train_size").get<int>();
  if (train_size > 0) {
    manifest = SubsampleTrain(manifest, articles, train_size,
                              cfg.at("subsample_seed").get<std::uint64_t>());
  }
  WriteFileAtomic(out, manifest.Serialize());
  WriteRunConfig(out + ".run.json", cfg);
  json sizes = json::object();
  for (auto name : kSplitNames) {
    sizes[std::string(name)] = manifest.Split(name).size();
  }
  return {{"manifest", out}, {"sizes", sizes}};
}

json Train(const json& config) {
  const json cfg = Resolve("train", config);
  const fs::path out_dir = Str(cfg, "out_dir");
  const json& enc = cfg.at("encoder");
  const EncoderChoice choice{enc.at("name").get<std::string>(),
                             enc.at("version").get<std::string>(), enc.at("dim").get<int>(),
                             enc.at("cmd").get<std::string>()};
  const SplitManifest manifest = SplitManifest::Load(Str(cfg, "manifest"));
  const EncodedCorpus corpus = LoadEncodedCorpus(Str(cfg, "corpus"), choice, Str(cfg, "cache_dir"));

  json model_json = cfg.at("model");
  model_json["d_s"] = choice.dim;
  const ModelConfig model_config = ModelConfig::FromJson(model_json);
  json train_json = cfg.at("train");
  train_json["seed"] = cfg.at("seed");
  const TrainConfig train_config = TrainConfig::FromJson(train_json);

  const auto train_set = SelectSplit(corpus.encoded, manifest.train, model_config.max_sentences);
  const auto valid_set = SelectSplit(corpus.encoded, manifest.valid, model_config.max_sentences);
  const TrainResult result = biasnet::Train(train_set, valid_set, model_config, train_config);

  std::string log;
  for (const auto& e : result.log) log += e.ToJson().dump() + "\n";
  WriteFileAtomic((out_dir / "train_log.jsonl").string(), log);

  const auto slash = corpus.identity.find('/');
  CheckpointMeta meta;
  meta.seed = train_config.seed;
  meta.epoch = train_config.epochs;
  meta.encoder_name = corpus.identity.substr(0, slash);
  meta.encoder_version = corpus.identity.substr(slash + 1);
  meta.encoder_dim = choice.dim;
  meta.extra = {{"train_size", manifest.train_size},
                {"manifest_seed", manifest.seed},
                {"corpus_id", CorpusId(corpus.articles)},
                {"train_config", train_config.ToJson()}};
  const std::string ckpt = (out_dir / "model.ckpt").string();
  SaveCheckpoint(ckpt, result.params, meta);
  json summary = {{"checkpoint", ckpt},
                  {"checkpoint_hash", CheckpointHash(ckpt)},
                  {"final_train_loss", result.log.back().train_loss}};
  if (result.best_valid_params) {
    CheckpointMeta best = meta;
    best.epoch = result.best_valid_epoch;
    const std::string best_path = (out_dir / "model.best.ckpt").string();
    SaveCheckpoint(best_path, *result.best_valid_params, best);
    summary["best_checkpoint"] = best_path;
  }
  WriteRunConfig((out_dir / "run.json").string(), cfg);
  return summary;
}

json Evaluate(const json& config) {
  const json cfg = Resolve("evaluate", config);
  const Checkpoint ck = LoadCheckpoint(Str(cfg, "checkpoint"));
  const EncodedCorpus corpus =
      LoadEncodedCorpus(Str(cfg, "corpus"), CheckpointEncoder(ck, cfg), Str(cfg, "cache_dir"));
  const SplitManifest manifest = SplitManifest::Load(Str(cfg, "manifest"));
  const std::string split = Str(cfg, "split");
  const auto set = SelectSplit(corpus.encoded, manifest.Split(split), ck.params.config().max_sentences);
  const TrialResult row =
      biasnet::Evaluate(ck, set, corpus.identity, Str(cfg, "model_tag"), split);

  // Replace an existing row with the same key so reruns leave the file unchanged.
  const std::string results_path = Str(cfg, "results");
  std::vector<TrialResult> rows;
  if (fs::exists(results_path)) rows = LoadTrialResults(results_path);
  bool replaced = false;
  for (auto& r : rows) {
    if (r.model_tag == row.model_tag && r.seed == row.seed && r.test_set == row.test_set &&
        r.train_size == row.train_size) {
      r = row;
      replaced = true;
    }
  }
  if (!replaced) rows.push_back(row);
  std::string text;
  for (const auto& r : rows) text += r.ToJson().dump() + "\n";
  WriteFileAtomic(results_path, text);
  WriteRunConfig(fmt::format("{}.runs/{}-s{}-{}-n{}.json", results_path, row.model_tag, row.seed,
                             row.test_set, row.train_size),
                 cfg);
  return row.ToJson();
}

json Stats(const json& config) {
  const json cfg = Resolve("stats", config);
  const std::string format = Str(cfg, "format");
  Require(format == "text" || format == "json" || format == "both",
          "format must be text, json or both");
  ComparisonSpec spec;
  spec.baseline_tag = Str(cfg, "baseline_tag");
  spec.ours_tag = Str(cfg, "ours_tag");
  spec.test_sets = cfg.at("test_sets").get<std::vector<std::string>>();
  spec.train_sizes = cfg.at("train_sizes").get<std::vector<int>>();
  spec.pooled_t_test = cfg.at("pooled").get<bool>();
  const ComparisonReport report =
      BuildComparisonReport(LoadTrialResults(Str(cfg, "results")), spec);

  const fs::path out_dir = Str(cfg, "out_dir");
  json summary = json::object();
  if (format != "json") {
    const std::string text = report.ToText();
    WriteFileAtomic((out_dir / "report.txt").string(), text);
    summary["text"] = text;
  }
  if (format != "text") {
    const json j = report.ToJson();
    WriteFileAtomic((out_dir / "report.json").string(), j.dump(2) + "\n");
    summary["report"] = j;
  }
  WriteRunConfig((out_dir / "run.json").string(), cfg);
  return summary;
}

json AnalyzeStructure(const json& config) {
  const json cfg = Resolve("analyze-structure", config);
  const Checkpoint ck = LoadCheckpoint(Str(cfg, "checkpoint"));
  const EncodedCorpus corpus =
      LoadEncodedCorpus(Str(cfg, "corpus"), CheckpointEncoder(ck, cfg), Str(cfg, "cache_dir"));
  const auto traced = TraceArticles(ck, corpus, SelectIds(cfg, corpus.articles));

  ProfileOptions options;
  options.dedup_locations = cfg.at("dedup").get<bool>();
  std::vector<MainSentenceProfile> all;
  std::string main_text;
  for (const auto& t : traced) {
    all.push_back(BuildProfile(t.trace, *t.article, options));
    main_text += json{{"article_id", t.article->id},
                      {"main_indices", all.back().main_indices},
                      {"text", MainSentenceText(t.trace, *t.article)}}
                     .dump() +
                 "\n";
  }
  std::vector<MainSentenceProfile> profiles =
      FilterByWordCount(all, cfg.at("min_words").get<int>(), cfg.at("max_words").get<int>());
  const std::size_t excluded = all.size() - profiles.size();
  if (!Str(cfg, "annotations").empty()) {
    ApplyAnnotations(profiles, LoadAnnotations(Str(cfg, "annotations")));
  }

  ClusterConfig cc;
  cc.k = cfg.at("k").get<int>();
  cc.seed = cfg.at("seed").get<std::uint64_t>();
  cc.max_iter = cfg.at("max_iter").get<int>();
  cc.series = ParseSeriesKind(Str(cfg, "series"));
  cc.jobs = cfg.at("jobs").get<int>();
  if (static_cast<int>(profiles.size()) < cc.k) {
    Fail(ErrorKind::kInfeasible,
         fmt::format("{} articles remain after the word-count filter [{}, {}] ({} excluded); "
                     "need at least k = {}",
                     profiles.size(), cfg.at("min_words").get<int>(),
                     cfg.at("max_words").get<int>(), excluded, cc.k));
  }
  const ClusterReport report = ClusterProfiles(profiles, cc);

  const fs::path out_dir = Str(cfg, "out_dir");
  const int bins = cfg.at("bins").get<int>();
  WriteFileAtomic((out_dir / "profiles.jsonl").string(), ProfilesToJsonl(profiles));
  WriteFileAtomic((out_dir / "clusters.json").string(), report.ToJson().dump(2) + "\n");
  json sizes = json::array();
  for (int c = 0; c < cc.k; ++c) {
    const LocationDensity d = ComputeLocationDensity(profiles, report, c, bins);
    WriteFileAtomic((out_dir / fmt::format("density_cluster{}.csv", c)).string(), d.ToCsv());
    WriteFileAtomic((out_dir / fmt::format("density_cluster{}.json", c)).string(),
                    d.ToJson().dump(2) + "\n");
    sizes.push_back(report.clusters[static_cast<std::size_t>(c)].size);
  }
  if (cfg.at("export_main_sentences").get<bool>()) {
    WriteFileAtomic((out_dir / "main_sentences.jsonl").string(), main_text);
  }
  WriteRunConfig((out_dir / "run.json").string(), cfg);
  return {{"profiles", profiles.size()},
          {"excluded_by_word_count", excluded},
          {"cluster_sizes", sizes},
          {"total_cost", report.total_cost}};
}

json ExtractMainSentences(const json& config) {
  const json cfg = Resolve("extract-main-sentences", config);
  const Checkpoint ck = LoadCheckpoint(Str(cfg, "checkpoint"));
  const EncodedCorpus corpus =
      LoadEncodedCorpus(Str(cfg, "corpus"), CheckpointEncoder(ck, cfg), Str(cfg, "cache_dir"));
  std::string text;
  std::size_t count = 0;
  for (const auto& t : TraceArticles(ck, corpus, SelectIds(cfg, corpus.articles))) {
    std::vector<int> indices;
    for (const auto& m : biasnet::ExtractMainSentences(t.trace)) indices.push_back(m.index);
    text += json{{"article_id", t.article->id},
                 {"main_indices", indices},
                 {"text", MainSentenceText(t.trace, *t.article)}}
                .dump() +
            "\n";
    ++count;
  }
  const std::string out = Str(cfg, "out");
  WriteFileAtomic(out, text);
  WriteRunConfig(out + ".run.json", cfg);
  return {{"out", out}, {"articles", count}};
}

}  // namespace biasnet::pipeline
