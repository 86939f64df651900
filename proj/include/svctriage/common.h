// Copyright 2026 The svctriage Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SVCTRIAGE_COMMON_H_
#define SVCTRIAGE_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace svctriage {

// Malformed input data: unreadable files, bad records, shape mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values. The message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses or residuals during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a.
uint64_t Fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL);

// Lowercase 16-digit hex rendering of a 64-bit value.
std::string HexDigest(uint64_t value);

// Derives a named sub-seed so that every pipeline stage has its own stream.
uint64_t DeriveSeed(uint64_t seed, std::string_view name);

// Seeded random source. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the distributions below are implemented here
// because the std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t Below(uint64_t n);

  bool Bernoulli(double p) { return Uniform() < p; }

  // Index drawn from non-negative weights (need not be normalized).
  size_t Categorical(const std::vector<double> &weights);

  template <typename T>
  void Shuffle(std::vector<T> &items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = Below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  const T &Pick(const std::vector<T> &items) {
    return items[Below(items.size())];
  }

 private:
  std::mt19937_64 engine_;
};

// Text helpers shared by the text modules.
std::string ToLower(std::string_view text);
std::string Trim(std::string_view text);
std::vector<std::string> SplitWhitespace(std::string_view text);
std::string Join(const std::vector<std::string> &parts, std::string_view sep);
bool IsAllDigits(std::string_view text);

// Exact text rendering of a double (round-trips through strtod).
std::string FormatDouble(double value);

// Writes `contents` to `path` through a temporary file and a rename.
void WriteFileAtomic(const std::string &path, const std::string &contents);
std::string ReadFile(const std::string &path);

}  // namespace svctriage

#endif  // SVCTRIAGE_COMMON_H_
