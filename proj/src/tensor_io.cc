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

#include "svctriage/tensor_io.h"

#include <cstdlib>
#include <sstream>

#include "svctriage/common.h"

namespace svctriage {

namespace {

constexpr std::string_view kMagic = "svctriage-model";

std::string Escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string Unescape(std::string_view s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    char c = s[++i];
    out.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c == 'r' ? '\r' : c);
  }
  return out;
}

}  // namespace

void ModelArchive::SetDouble(const std::string &key, double value) {
  SetString(key, FormatDouble(value));
}

void ModelArchive::SetTensor(const std::string &name, size_t rows, size_t cols,
                             std::vector<double> data) {
  if (data.size() != rows * cols) throw DataError("tensor '" + name + "' has wrong size");
  tensors_[name] = Tensor{rows, cols, std::move(data)};
}

const std::string &ModelArchive::GetString(const std::string &key) const {
  auto it = strings_.find(key);
  if (it == strings_.end()) throw DataError("model file lacks field '" + key + "'");
  return it->second;
}

int64_t ModelArchive::GetInt(const std::string &key) const {
  const std::string &s = GetString(key);
  char *end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw DataError("field '" + key + "' is not an integer");
  return v;
}

double ModelArchive::GetDouble(const std::string &key) const {
  const std::string &s = GetString(key);
  char *end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw DataError("field '" + key + "' is not a number");
  return v;
}

const Tensor &ModelArchive::GetTensor(const std::string &name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw DataError("model file lacks tensor '" + name + "'");
  return it->second;
}

std::string ModelArchive::Serialize() const {
  std::ostringstream out;
  out << kMagic << ' ' << kVersion << '\n';
  out << "kind " << kind_ << '\n';
  for (const auto &[k, v] : strings_) out << "field " << k << '\t' << Escape(v) << '\n';
  for (const auto &[name, t] : tensors_) {
    out << "tensor " << name << ' ' << t.rows << ' ' << t.cols << '\n';
    for (size_t r = 0; r < t.rows; ++r) {
      for (size_t c = 0; c < t.cols; ++c) {
        if (c > 0) out << ' ';
        out << FormatDouble(t.data[r * t.cols + c]);
      }
      out << '\n';
    }
  }
  return out.str();
}

ModelArchive ModelArchive::Parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty model file");
  std::istringstream head(line);
  std::string magic;
  int version = 0;
  head >> magic >> version;
  if (magic != kMagic) throw DataError("not a model file");
  if (version != kVersion) {
    throw DataError("unsupported model file version " + std::to_string(version));
  }
  ModelArchive archive;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("kind ", 0) == 0) {
      archive.kind_ = line.substr(5);
    } else if (line.rfind("field ", 0) == 0) {
      size_t tab = line.find('\t');
      if (tab == std::string::npos) throw DataError("malformed field line");
      archive.strings_[line.substr(6, tab - 6)] = Unescape(line.substr(tab + 1));
    } else if (line.rfind("tensor ", 0) == 0) {
      std::istringstream th(line.substr(7));
      std::string name;
      size_t rows = 0, cols = 0;
      if (!(th >> name >> rows >> cols)) throw DataError("malformed tensor header");
      std::vector<double> data(rows * cols);
      for (size_t r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw DataError("truncated tensor '" + name + "'");
        const char *p = line.c_str();
        for (size_t c = 0; c < cols; ++c) {
          char *end = nullptr;
          data[r * cols + c] = std::strtod(p, &end);
          if (end == p) throw DataError("bad number in tensor '" + name + "'");
          p = end;
        }
      }
      archive.tensors_[name] = Tensor{rows, cols, std::move(data)};
    } else {
      throw DataError("unexpected model file line: " + line.substr(0, 40));
    }
  }
  return archive;
}

void ModelArchive::Save(const std::string &path) const { WriteFileAtomic(path, Serialize()); }

ModelArchive ModelArchive::Load(const std::string &path) { return Parse(ReadFile(path)); }

}  // namespace svctriage
