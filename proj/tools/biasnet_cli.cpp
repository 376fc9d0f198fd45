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

// Command-line front end. Builds a config from defaults, an optional JSON
// config file and flags (flags win), then hands it to the C API.

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "biasnet/biasnet.h"
#include "json.hpp"

namespace {

using nlohmann::json;

enum class Kind { kString, kInt, kUint, kDouble, kStringList, kIntList };

struct ValueFlag {
  std::string flag;
  std::string key;  // dotted path into the command config
  Kind kind;
  std::string help;
};

struct BoolFlag {
  std::string on;
  std::string off;
  std::string key;
  std::string help;
};

struct CommandFlags {
  std::string help;
  std::vector<ValueFlag> values;
  std::vector<BoolFlag> bools;
};

const std::vector<ValueFlag> kEncoderCache = {
    {"--encoder-cmd", "encoder_cmd", Kind::kString, "adapter command that fills the cache"},
    {"--cache-dir", "cache_dir", Kind::kString, "embedding cache root"},
};

std::vector<ValueFlag> Join(std::vector<ValueFlag> a, const std::vector<ValueFlag>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::map<std::string, CommandFlags> CommandTable() {
  std::map<std::string, CommandFlags> t;
  t["prepare-data"] = {
      "Build the outlet-disjoint split manifest",
      {{"--corpus", "corpus", Kind::kString, "articles JSONL"},
       {"--out", "out", Kind::kString, "manifest path"},
       {"--seed", "seed", Kind::kUint, "split seed"},
       {"--train-size", "train_size", Kind::kInt, "class-balanced train subset size"},
       {"--subsample-seed", "subsample_seed", Kind::kUint, "subset seed (default: --seed)"},
       {"--min-outlet-articles", "min_outlet_articles", Kind::kInt, "drop smaller outlets"},
       {"--train-per-class", "split.train_per_class", Kind::kInt, "train articles per class"},
       {"--test1-outlets", "split.test1.outlets_per_class", Kind::kInt, "outlets per class"},
       {"--test1-articles", "split.test1.articles_per_outlet", Kind::kInt, "articles per outlet"},
       {"--test2-outlets", "split.test2.outlets_per_class", Kind::kInt, "outlets per class"},
       {"--test2-articles", "split.test2.articles_per_outlet", Kind::kInt, "articles per outlet"},
       {"--valid-outlets", "split.valid.outlets_per_class", Kind::kInt, "outlets per class"},
       {"--valid-articles", "split.valid.articles_per_outlet", Kind::kInt, "articles per outlet"}},
      {}};
  t["train"] = {
      "Train a model on a manifest's train split",
      {{"--corpus", "corpus", Kind::kString, "articles JSONL"},
       {"--manifest", "manifest", Kind::kString, "split manifest"},
       {"--out-dir", "out_dir", Kind::kString, "output directory"},
       {"--seed", "seed", Kind::kUint, "initialization and order seed"},
       {"--encoder", "encoder.name", Kind::kString, "sentence encoder name"},
       {"--encoder-version", "encoder.version", Kind::kString, "encoder version"},
       {"--encoder-dim", "encoder.dim", Kind::kInt, "encoder output dimension"},
       {"--encoder-cmd", "encoder.cmd", Kind::kString, "adapter command for external encoders"},
       {"--cache-dir", "cache_dir", Kind::kString, "embedding cache root"},
       {"--epochs", "train.epochs", Kind::kInt, "epochs"},
       {"--batch-size", "train.batch_size", Kind::kInt, "articles per step"},
       {"--max-lr", "train.max_lr", Kind::kDouble, "peak learning rate"},
       {"--weight-decay", "train.weight_decay", Kind::kDouble, "decoupled weight decay"},
       {"--warmup-fraction", "train.warmup_fraction", Kind::kDouble, "warmup share of steps"},
       {"--d-h", "model.d_h", Kind::kInt, "LSTM hidden size per direction"},
       {"--lstm-layers", "model.lstm_layers", Kind::kInt, "stacked BiLSTM layers"},
       {"--heads", "model.num_heads", Kind::kInt, "attention heads"},
       {"--head-dim", "model.head_dim", Kind::kInt, "per-head width (0: 2 * d_h)"},
       {"--perspective-dim", "model.perspective_dim", Kind::kInt, "u/v width (0: head dim)"},
       {"--max-sentences", "model.max_sentences", Kind::kInt, "sentence cap incl. headline"}},
      {{"--keep-best-valid", "--no-keep-best-valid", "train.keep_best_valid",
        "also save the best-validation checkpoint"},
       {"--headline-cluster", "--no-headline-cluster", "model.include_headline_cluster",
        "include c_0 in the cluster sum"},
       {"--share-classifier", "--no-share-classifier", "model.share_classifier",
        "one classifier for all heads"}}};
  t["evaluate"] = {
      "Evaluate a checkpoint on one split and record the trial",
      Join({{"--checkpoint", "checkpoint", Kind::kString, "checkpoint file"},
            {"--corpus", "corpus", Kind::kString, "articles JSONL"},
            {"--manifest", "manifest", Kind::kString, "split manifest"},
            {"--split", "split", Kind::kString, "split name"},
            {"--results", "results", Kind::kString, "trial results JSONL"},
            {"--model-tag", "model_tag", Kind::kString, "model tag for the row"}},
           kEncoderCache),
      {}};
  t["stats"] = {
      "Robustness statistics over trial results",
      {{"--results", "results", Kind::kString, "trial results JSONL"},
       {"--out-dir", "out_dir", Kind::kString, "output directory"},
       {"--baseline-tag", "baseline_tag", Kind::kString, "baseline model tag"},
       {"--ours-tag", "ours_tag", Kind::kString, "compared model tag"},
       {"--test-sets", "test_sets", Kind::kStringList, "comma-separated test sets"},
       {"--train-sizes", "train_sizes", Kind::kIntList, "comma-separated sizes (0: full)"},
       {"--format", "format", Kind::kString, "text, json or both"}},
      {{"--pooled", "--welch", "pooled", "pooled-variance t-test"}}};
  t["analyze-structure"] = {
      "Main-sentence profiles, DTW clustering and location densities",
      Join({{"--checkpoint", "checkpoint", Kind::kString, "checkpoint file"},
            {"--corpus", "corpus", Kind::kString, "articles JSONL"},
            {"--manifest", "manifest", Kind::kString, "restrict to a manifest split"},
            {"--split", "split", Kind::kString, "split name"},
            {"--out-dir", "out_dir", Kind::kString, "output directory"},
            {"--k", "k", Kind::kInt, "clusters"},
            {"--seed", "seed", Kind::kUint, "medoid initialization seed"},
            {"--max-iter", "max_iter", Kind::kInt, "swap iterations"},
            {"--series", "series", Kind::kString, "salience or onehot"},
            {"--min-words", "min_words", Kind::kInt, "minimum article words"},
            {"--max-words", "max_words", Kind::kInt, "maximum article words"},
            {"--bins", "bins", Kind::kInt, "density bins"},
            {"--annotations", "annotations", Kind::kString, "sentence-level bias annotations"},
            {"--jobs", "jobs", Kind::kInt, "threads for the DTW matrix"}},
           kEncoderCache),
      {{"--dedup", "--no-dedup", "dedup", "deduplicate main locations across heads"},
       {"--export-main-sentences", "--no-export-main-sentences", "export_main_sentences",
        "write main_sentences.jsonl"}}};
  t["extract-main-sentences"] = {
      "Write each article's main sentences",
      Join({{"--checkpoint", "checkpoint", Kind::kString, "checkpoint file"},
            {"--corpus", "corpus", Kind::kString, "articles JSONL"},
            {"--manifest", "manifest", Kind::kString, "restrict to a manifest split"},
            {"--split", "split", Kind::kString, "split name"},
            {"--out", "out", Kind::kString, "output JSONL"}},
           kEncoderCache),
      {}};
  return t;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json ParseNumber(const std::string& flag, const std::string& text, Kind kind) {
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error&) {
    throw UsageError(flag + ": not a number: " + text);
  }
  const bool ok = (kind == Kind::kInt && v.is_number_integer()) ||
                  (kind == Kind::kUint && v.is_number_unsigned()) ||
                  (kind == Kind::kDouble && v.is_number());
  if (!ok) throw UsageError(flag + ": invalid value " + text);
  return v;
}

json Convert(const ValueFlag& f, const std::string& text) {
  switch (f.kind) {
    case Kind::kString:
      return text;
    case Kind::kInt:
    case Kind::kUint:
    case Kind::kDouble:
      return ParseNumber(f.flag, text, f.kind);
    case Kind::kStringList:
      return SplitList(text);
    case Kind::kIntList: {
      json arr = json::array();
      for (const auto& item : SplitList(text)) arr.push_back(ParseNumber(f.flag, item, Kind::kInt));
      return arr;
    }
  }
  return nullptr;
}

void SetPath(json& root, const std::string& dotted, json value) {
  json* node = &root;
  std::stringstream in(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(in, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (!child.is_object()) child = json::object();
    node = &child;
  }
  (*node)[parts.back()] = std::move(value);
}

void MergeObjects(json& base, const json& over) {
  for (const auto& [k, v] : over.items()) {
    if (v.is_object() && base.contains(k) && base[k].is_object()) {
      MergeObjects(base[k], v);
    } else {
      base[k] = v;
    }
  }
}

// A config file either holds one section per command or the command's keys
// directly.
json LoadConfigFile(const std::string& path, const std::string& command,
                    const std::map<std::string, CommandFlags>& table) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  bool sectioned = false;
  for (const auto& [k, v] : j.items()) sectioned = sectioned || table.count(k) > 0;
  if (!sectioned) return j;
  return j.contains(command) ? j[command] : json::object();
}

bn_log_level ParseLogLevel(const std::string& s) {
  if (s == "debug") return BN_LOG_DEBUG;
  if (s == "info") return BN_LOG_INFO;
  if (s == "warn") return BN_LOG_WARN;
  if (s == "error") return BN_LOG_ERROR;
  if (s == "off") return BN_LOG_OFF;
  throw UsageError("--log-level must be debug, info, warn, error or off");
}

int ExitCodeFor(bn_status status) {
  if (status == BN_OK) return 0;
  if (status == BN_ERR_NUMERIC || status == BN_ERR_INTERNAL) return 2;
  return 1;
}

struct Bound {
  std::vector<std::string> values;
  std::vector<int> bool_state;  // -1 unset, 0 off, 1 on
};

}  // namespace

int main(int argc, char** argv) {
  const auto table = CommandTable();
  CLI::App app{"biasnet: article-level political bias detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::string log_level = "info";
  bool print_config = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--log-level", log_level, "debug, info, warn, error or off");
  app.add_flag("--print-config", print_config, "print the resolved config and exit");
  app.set_version_flag("--version", std::string(bn_version()));

  std::map<std::string, Bound> bound;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, spec] : table) {
    CLI::App* sub = app.add_subcommand(name, spec.help);
    subs[name] = sub;
    Bound& b = bound[name];
    b.values.resize(spec.values.size());
    b.bool_state.assign(spec.bools.size(), -1);
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
      sub->add_option(spec.values[i].flag, b.values[i], spec.values[i].help);
    }
    for (std::size_t i = 0; i < spec.bools.size(); ++i) {
      int* state = &b.bool_state[i];
      sub->add_flag_callback(spec.bools[i].on, [state] { *state = 1; }, spec.bools[i].help);
      sub->add_flag_callback(spec.bools[i].off, [state] { *state = 0; });
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }
  const CommandFlags& spec = table.at(command);
  const Bound& b = bound.at(command);
  CLI::App* sub = subs.at(command);

  json config = json::object();
  try {
    bn_set_log_level(ParseLogLevel(log_level));
    if (!config_path.empty()) config = LoadConfigFile(config_path, command, table);
    json flags = json::object();
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
      if (sub->count(spec.values[i].flag) > 0) {
        SetPath(flags, spec.values[i].key, Convert(spec.values[i], b.values[i]));
      }
    }
    for (std::size_t i = 0; i < spec.bools.size(); ++i) {
      if (b.bool_state[i] >= 0) SetPath(flags, spec.bools[i].key, b.bool_state[i] == 1);
    }
    MergeObjects(config, flags);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  const std::string text = config.dump();
  bn_result* result = nullptr;
  const bn_status status = print_config
                               ? bn_resolve_config(command.c_str(), text.c_str(), &result)
                               : bn_run_command(command.c_str(), text.c_str(), &result);
  if (status != BN_OK) {
    std::cerr << "error (" << bn_status_name(status) << "): " << bn_last_error() << "\n";
    return ExitCodeFor(status);
  }
  std::unique_ptr<bn_result, decltype(&bn_result_free)> owned(result, bn_result_free);
  const json out = json::parse(bn_result_json(result));
  if (!print_config && command == "stats" && out.contains("text")) {
    std::cout << out["text"].get<std::string>();
  } else {
    std::cout << out.dump(2) << "\n";
  }
  return 0;
}
