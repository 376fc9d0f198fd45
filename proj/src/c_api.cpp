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

#include "biasnet/biasnet.h"

#include <exception>
#include <new>
#include <span>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "biasnet/model.hpp"
#include "biasnet/pipeline.hpp"
#include "biasnet/stats.hpp"
#include "biasnet/structure.hpp"

struct bn_result {
  std::string json;
};

struct bn_model {
  biasnet::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

void EnsureLogger() {
  static const bool once = [] {
    auto logger = spdlog::stderr_color_mt("biasnet");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)once;
}

bn_status StatusOf(biasnet::ErrorKind kind) {
  switch (kind) {
    case biasnet::ErrorKind::kInvalidArgument:
      return BN_ERR_INVALID_ARGUMENT;
    case biasnet::ErrorKind::kIo:
      return BN_ERR_IO;
    case biasnet::ErrorKind::kParse:
      return BN_ERR_PARSE;
    case biasnet::ErrorKind::kInfeasible:
      return BN_ERR_INFEASIBLE;
    case biasnet::ErrorKind::kNumeric:
      return BN_ERR_NUMERIC;
    case biasnet::ErrorKind::kInternal:
      return BN_ERR_INTERNAL;
  }
  return BN_ERR_INTERNAL;
}

template <typename F>
bn_status Guard(F&& body) {
  EnsureLogger();
  g_last_error.clear();
  try {
    body();
    return BN_OK;
  } catch (const biasnet::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return BN_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BN_ERR_INTERNAL;
  }
}

void NotNull(const void* p, const char* what) {
  biasnet::Require(p != nullptr, std::string(what) + " must not be null");
}

nlohmann::json ParseConfig(const char* config_json) {
  if (config_json == nullptr || *config_json == '\0') return nlohmann::json::object();
  try {
    return nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::parse_error& e) {
    biasnet::Fail(biasnet::ErrorKind::kParse, std::string("config: ") + e.what());
  }
}

void Emit(const nlohmann::json& j, bn_result** out) {
  auto* r = new bn_result;
  r->json = j.dump(2);
  *out = r;
}

bn_status RunNamed(const char* command, const char* config_json, bn_result** out) {
  return Guard([&] {
    NotNull(command, "command");
    NotNull(out, "out");
    *out = nullptr;
    Emit(biasnet::pipeline::Run(command, ParseConfig(config_json)), out);
  });
}

}  // namespace

extern "C" {

const char* bn_version(void) { return "0.1.0"; }

const char* bn_status_name(bn_status status) {
  switch (status) {
    case BN_OK:
      return "ok";
    case BN_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case BN_ERR_IO:
      return "i/o error";
    case BN_ERR_PARSE:
      return "parse error";
    case BN_ERR_INFEASIBLE:
      return "infeasible";
    case BN_ERR_NUMERIC:
      return "numeric error";
    case BN_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* bn_last_error(void) { return g_last_error.c_str(); }

void bn_set_log_level(bn_log_level level) {
  EnsureLogger();
  switch (level) {
    case BN_LOG_DEBUG:
      spdlog::set_level(spdlog::level::debug);
      break;
    case BN_LOG_INFO:
      spdlog::set_level(spdlog::level::info);
      break;
    case BN_LOG_WARN:
      spdlog::set_level(spdlog::level::warn);
      break;
    case BN_LOG_ERROR:
      spdlog::set_level(spdlog::level::err);
      break;
    case BN_LOG_OFF:
      spdlog::set_level(spdlog::level::off);
      break;
  }
}

const char* bn_result_json(const bn_result* result) {
  return result == nullptr ? "" : result->json.c_str();
}

void bn_result_free(bn_result* result) { delete result; }

bn_status bn_command_defaults(const char* command, bn_result** out) {
  return Guard([&] {
    NotNull(command, "command");
    NotNull(out, "out");
    *out = nullptr;
    Emit(biasnet::pipeline::Defaults(command), out);
  });
}

bn_status bn_resolve_config(const char* command, const char* config_json, bn_result** out) {
  return Guard([&] {
    NotNull(command, "command");
    NotNull(out, "out");
    *out = nullptr;
    Emit(biasnet::pipeline::Resolve(command, ParseConfig(config_json)), out);
  });
}

bn_status bn_run_command(const char* command, const char* config_json, bn_result** out) {
  return RunNamed(command, config_json, out);
}

bn_status bn_prepare_data(const char* config_json, bn_result** out) {
  return RunNamed("prepare-data", config_json, out);
}
bn_status bn_train(const char* config_json, bn_result** out) {
  return RunNamed("train", config_json, out);
}
bn_status bn_evaluate(const char* config_json, bn_result** out) {
  return RunNamed("evaluate", config_json, out);
}
bn_status bn_stats(const char* config_json, bn_result** out) {
  return RunNamed("stats", config_json, out);
}
bn_status bn_analyze_structure(const char* config_json, bn_result** out) {
  return RunNamed("analyze-structure", config_json, out);
}
bn_status bn_extract_main_sentences(const char* config_json, bn_result** out) {
  return RunNamed("extract-main-sentences", config_json, out);
}

bn_status bn_model_load(const char* path, bn_model** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = nullptr;
    auto* m = new bn_model{biasnet::LoadCheckpoint(path)};
    *out = m;
  });
}

void bn_model_free(bn_model* model) { delete model; }

int bn_model_encoder_dim(const bn_model* model) {
  return model == nullptr ? 0 : model->checkpoint.params.config().d_s;
}

int bn_model_num_classes(const bn_model* model) {
  return model == nullptr ? 0 : model->checkpoint.params.config().num_classes;
}

bn_status bn_model_predict(const bn_model* model, const double* embeddings, size_t rows,
                           size_t cols, double* probs) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(embeddings, "embeddings");
    NotNull(probs, "probs");
    biasnet::Require(rows >= 2, "need a headline and at least one body sentence");
    const auto& params = model->checkpoint.params;
    biasnet::Require(static_cast<int>(cols) == params.config().d_s,
                     "embedding width does not match the model");
    biasnet::Matrix e(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < cols; ++c) {
        e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = embeddings[r * cols + c];
      }
    }
    const biasnet::ForwardTrace trace = biasnet::Forward(e, params);
    for (Eigen::Index k = 0; k < trace.mixture.size(); ++k) probs[k] = trace.mixture[k];
  });
}

bn_status bn_t_test(const double* a, size_t na, const double* b, size_t nb, int pooled,
                    double* t, double* p) {
  return Guard([&] {
    NotNull(a, "a");
    NotNull(b, "b");
    NotNull(t, "t");
    NotNull(p, "p");
    const auto r = biasnet::TTestTwoSided(std::span(a, na), std::span(b, nb), pooled != 0);
    *t = r.statistic;
    *p = r.p_value;
  });
}

bn_status bn_f_test(const double* baseline, size_t nb, const double* ours, size_t no, double* f0,
                    double* p) {
  return Guard([&] {
    NotNull(baseline, "baseline");
    NotNull(ours, "ours");
    NotNull(f0, "f0");
    NotNull(p, "p");
    const auto r = biasnet::FTestOneSided(std::span(baseline, nb), std::span(ours, no));
    *f0 = r.statistic;
    *p = r.p_value;
  });
}

bn_status bn_shapiro_wilk(const double* x, size_t n, double* w, double* p) {
  return Guard([&] {
    NotNull(x, "x");
    NotNull(w, "w");
    NotNull(p, "p");
    const auto r = biasnet::ShapiroWilk(std::span(x, n));
    *w = r.statistic;
    *p = r.p_value;
  });
}

bn_status bn_jsd_gaussian(double mean_a, double std_a, double mean_b, double std_b,
                          double* jsd) {
  return Guard([&] {
    NotNull(jsd, "jsd");
    *jsd = biasnet::JsdGaussian(mean_a, std_a, mean_b, std_b);
  });
}

bn_status bn_dtw_distance(const double* a, size_t na, const double* b, size_t nb,
                          double* distance) {
  return Guard([&] {
    NotNull(a, "a");
    NotNull(b, "b");
    NotNull(distance, "distance");
    *distance = biasnet::DtwDistance(std::span(a, na), std::span(b, nb));
  });
}

}  // extern "C"
