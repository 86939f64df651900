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

#ifndef SVCTRIAGE_TENSOR_IO_H_
#define SVCTRIAGE_TENSOR_IO_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace svctriage {

struct Tensor {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;  // row-major
};

// Versioned text container for trained models: a kind tag, string fields
// and named tensors. Doubles are written with 17 significant digits so a
// save/load cycle is exact.
class ModelArchive {
 public:
  static constexpr int kVersion = 1;

  explicit ModelArchive(std::string kind = "") : kind_(std::move(kind)) {}

  const std::string &kind() const { return kind_; }

  void SetString(const std::string &key, std::string value) { strings_[key] = std::move(value); }
  void SetInt(const std::string &key, int64_t value) { SetString(key, std::to_string(value)); }
  void SetDouble(const std::string &key, double value);
  void SetTensor(const std::string &name, size_t rows, size_t cols, std::vector<double> data);

  // Getters throw DataError when the entry is missing or malformed.
  const std::string &GetString(const std::string &key) const;
  int64_t GetInt(const std::string &key) const;
  double GetDouble(const std::string &key) const;
  const Tensor &GetTensor(const std::string &name) const;
  bool HasString(const std::string &key) const { return strings_.count(key) > 0; }
  bool HasTensor(const std::string &name) const { return tensors_.count(name) > 0; }

  std::string Serialize() const;
  static ModelArchive Parse(std::string_view text);

  void Save(const std::string &path) const;
  static ModelArchive Load(const std::string &path);

 private:
  std::string kind_;
  std::map<std::string, std::string> strings_;
  std::map<std::string, Tensor> tensors_;
};

}  // namespace svctriage

#endif  // SVCTRIAGE_TENSOR_IO_H_
