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

#ifndef BIASNET_COMMON_HPP_
#define BIASNET_COMMON_HPP_

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace biasnet {

// Error categories surfaced through the C API as status codes.
enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kParse,
  kInfeasible,
  kNumeric,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void Require(bool cond, const std::string& msg) {
  if (!cond) Fail(ErrorKind::kInvalidArgument, msg);
}

enum class Label : int { kLeft = 0, kCenter = 1, kRight = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels = {
    Label::kLeft, Label::kCenter, Label::kRight};

// Accepts "left", "center", "right" in any case; anything else throws.
Label ParseLabel(std::string_view text);
std::string_view LabelName(Label label);
inline int LabelIndex(Label label) { return static_cast<int>(label); }

// 64-bit FNV-1a. Stable across platforms, used for every persisted hash.
std::uint64_t Fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t SplitMix64(std::uint64_t x);
std::string HexDigest(std::uint64_t h);

// Deterministic RNG. The engine is fully specified by the standard; the
// distributions below are implemented here so draws are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t UniformIndex(std::uint64_t bound);
  // Uniform double in [0, 1).
  double Uniform01();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  double Normal(double mean = 0.0, double stddev = 1.0);

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(UniformIndex(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a purpose tag.
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view tag,
                         std::uint64_t index = 0);

std::string ReadFile(const std::string& path);
// Writes through a temporary file and renames, so readers never observe a
// partially written file.
void WriteFileAtomic(const std::string& path, std::string_view contents);

}  // namespace biasnet

#endif  // BIASNET_COMMON_HPP_
