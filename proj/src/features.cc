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

#include "svctriage/features.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "svctriage/common.h"

namespace svctriage {

namespace {

constexpr std::array<std::string_view, kNumFeatureCategories> kCategoryNames = {
    "noun", "verb", "adjective", "adverb", "bigram"};

std::string Key(std::string_view term, FeatureCategory category) {
  std::string key(1, static_cast<char>('0' + static_cast<int>(category)));
  key.push_back('\t');
  key.append(term);
  return key;
}

// Content tokens of one segment: the ones that carry a unigram category.
std::vector<TaggedToken> ContentTokens(const std::vector<TaggedToken> &segment) {
  std::vector<TaggedToken> out;
  for (const auto &t : segment) {
    if (CategoryOf(t.tag)) out.push_back(t);
  }
  return out;
}

template <typename Fn>
void ForEachTerm(const Document &doc, Fn &&fn) {
  for (const auto &segment : doc.segments) {
    std::vector<TaggedToken> content = ContentTokens(segment);
    for (const auto &t : content) fn(t.text, *CategoryOf(t.tag));
    for (const auto &gram : ExtractNgrams(content, 2)) fn(gram, FeatureCategory::kBigram);
  }
}

}  // namespace

std::string_view CategoryName(FeatureCategory category) {
  return kCategoryNames[static_cast<int>(category)];
}

std::optional<FeatureCategory> ParseCategory(std::string_view name) {
  for (int i = 0; i < kNumFeatureCategories; ++i) {
    if (kCategoryNames[i] == name) return static_cast<FeatureCategory>(i);
  }
  return std::nullopt;
}

std::optional<FeatureCategory> CategoryOf(PosTag tag) {
  switch (tag) {
    case PosTag::kNoun:
    case PosTag::kModelId:
      return FeatureCategory::kNoun;
    case PosTag::kVerb:
      return FeatureCategory::kVerb;
    case PosTag::kAdjective:
      return FeatureCategory::kAdjective;
    case PosTag::kAdverb:
      return FeatureCategory::kAdverb;
    default:
      return std::nullopt;
  }
}

Vocabulary::Vocabulary(std::vector<VocabEntry> entries) : entries_(std::move(entries)) {
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(Key(entries_[i].term, entries_[i].category), i).second) {
      throw DataError("duplicate vocabulary entry '" + entries_[i].term + "'");
    }
  }
}

std::optional<size_t> Vocabulary::Find(std::string_view term,
                                       FeatureCategory category) const {
  auto it = index_.find(Key(term, category));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::Serialize() const {
  std::ostringstream out;
  for (const auto &e : entries_) {
    out << e.term << '\t' << CategoryName(e.category) << '\t' << e.frequency << '\n';
  }
  return out.str();
}

Vocabulary Vocabulary::Parse(std::string_view text) {
  std::vector<VocabEntry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t a = line.find('\t');
    size_t b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos) {
      throw DataError("vocabulary line " + std::to_string(line_no) + " is malformed");
    }
    auto category = ParseCategory(line.substr(a + 1, b - a - 1));
    std::string freq = line.substr(b + 1);
    if (!category || !IsAllDigits(freq)) {
      throw DataError("vocabulary line " + std::to_string(line_no) + " is malformed");
    }
    entries.push_back({line.substr(0, a), *category, std::stoull(freq)});
  }
  return Vocabulary(std::move(entries));
}

uint64_t Vocabulary::Hash() const { return Fnv1a64(Serialize()); }

Vocabulary BuildVocabulary(std::span<const Document> docs,
                           const VocabularyOptions &options) {
  std::array<std::map<std::string, uint64_t>, kNumFeatureCategories> counts;
  for (const Document &doc : docs) {
    ForEachTerm(doc, [&](const std::string &term, FeatureCategory category) {
      if (category != FeatureCategory::kBigram && options.excluded.count(term)) return;
      ++counts[static_cast<int>(category)][term];
    });
  }
  std::vector<VocabEntry> entries;
  for (int c = 0; c < kNumFeatureCategories; ++c) {
    std::vector<VocabEntry> ranked;
    for (const auto &[term, n] : counts[c]) {
      ranked.push_back({term, static_cast<FeatureCategory>(c), n});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
      return a.frequency > b.frequency;
    });
    if (ranked.size() > options.top_k) ranked.resize(options.top_k);
    entries.insert(entries.end(), ranked.begin(), ranked.end());
  }
  std::sort(entries.begin(), entries.end(), [](const auto &a, const auto &b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    if (a.term != b.term) return a.term < b.term;
    return a.category < b.category;
  });
  return Vocabulary(std::move(entries));
}

FeatureVector Vectorize(const Document &doc, const Vocabulary &vocab,
                        std::string record_id) {
  FeatureVector v;
  v.record_id = std::move(record_id);
  v.values.assign(vocab.size(), 0.0);
  ForEachTerm(doc, [&](const std::string &term, FeatureCategory category) {
    if (auto i = vocab.Find(term, category)) v.values[*i] += 1.0;
  });
  return v;
}

std::vector<double> ChiSquaredScores(std::span<const FeatureVector> vectors,
                                     std::span<const int> labels) {
  if (vectors.size() != labels.size() || vectors.empty()) {
    throw DataError("chi-squared needs one label per vector and at least one vector");
  }
  std::map<int, size_t> group_of;
  for (int y : labels) group_of.emplace(y, 0);
  size_t g = 0;
  for (auto &[label, idx] : group_of) idx = g++;
  size_t n_features = vectors[0].values.size();
  std::vector<double> class_size(g, 0.0);
  // present[f * g + c]
  std::vector<double> present(n_features * g, 0.0);
  for (size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].values.size() != n_features) throw DataError("ragged feature vectors");
    size_t c = group_of[labels[i]];
    class_size[c] += 1.0;
    for (size_t f = 0; f < n_features; ++f) {
      if (vectors[i].values[f] > 0) present[f * g + c] += 1.0;
    }
  }
  double total = static_cast<double>(vectors.size());
  std::vector<double> scores(n_features, 0.0);
  for (size_t f = 0; f < n_features; ++f) {
    double with = 0.0;
    for (size_t c = 0; c < g; ++c) with += present[f * g + c];
    double without = total - with;
    if (with == 0.0 || without == 0.0) continue;
    double chi2 = 0.0;
    for (size_t c = 0; c < g; ++c) {
      double e1 = class_size[c] * with / total;
      double e0 = class_size[c] * without / total;
      double o1 = present[f * g + c];
      double o0 = class_size[c] - o1;
      chi2 += (o1 - e1) * (o1 - e1) / e1 + (o0 - e0) * (o0 - e0) / e0;
    }
    scores[f] = chi2;
  }
  return scores;
}

Matrix CorrelationMatrix(std::span<const FeatureVector> vectors) {
  if (vectors.size() < 2) throw DataError("correlation needs at least two samples");
  size_t f = vectors[0].values.size();
  double n = static_cast<double>(vectors.size());
  std::vector<double> mean(f, 0.0);
  for (const auto &v : vectors) {
    if (v.values.size() != f) throw DataError("ragged feature vectors");
    for (size_t j = 0; j < f; ++j) mean[j] += v.values[j];
  }
  for (double &m : mean) m /= n;
  // Centered cross products, accumulated over the nonzero entries of each
  // row: sum (x-mx)(y-my) = sum xy - n mx my.
  Matrix cross(f, std::vector<double>(f, 0.0));
  std::vector<size_t> nz;
  for (const auto &v : vectors) {
    nz.clear();
    for (size_t j = 0; j < f; ++j) {
      if (v.values[j] != 0.0) nz.push_back(j);
    }
    for (size_t a : nz) {
      for (size_t b : nz) cross[a][b] += v.values[a] * v.values[b];
    }
  }
  for (size_t a = 0; a < f; ++a) {
    for (size_t b = 0; b < f; ++b) cross[a][b] -= n * mean[a] * mean[b];
  }
  Matrix corr(f, std::vector<double>(f, 0.0));
  for (size_t a = 0; a < f; ++a) {
    corr[a][a] = 1.0;
    for (size_t b = a + 1; b < f; ++b) {
      double va = cross[a][a], vb = cross[b][b];
      double r = 0.0;
      if (va > 1e-12 * n && vb > 1e-12 * n) {
        r = std::clamp(cross[a][b] / std::sqrt(va * vb), -1.0, 1.0);
      }
      corr[a][b] = corr[b][a] = r;
    }
  }
  return corr;
}

Vocabulary SelectFeatures(const Vocabulary &vocab, std::span<const double> scores,
                          const Matrix &corr, size_t keep, double corr_threshold) {
  if (scores.size() != vocab.size() || corr.size() != vocab.size()) {
    throw DataError("feature scores do not match the vocabulary");
  }
  std::vector<size_t> order(vocab.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::vector<size_t> admitted;
  for (size_t i : order) {
    if (admitted.size() >= keep) break;
    bool redundant = false;
    for (size_t a : admitted) {
      if (std::fabs(corr[i][a]) > corr_threshold) {
        redundant = true;
        break;
      }
    }
    if (!redundant) admitted.push_back(i);
  }
  std::vector<VocabEntry> entries;
  for (size_t i : admitted) entries.push_back(vocab[i]);
  return Vocabulary(std::move(entries));
}

std::vector<double> MissingValueRatios(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) return {};
  std::vector<double> missing(vectors[0].values.size(), 0.0);
  for (const auto &v : vectors) {
    for (size_t j = 0; j < missing.size(); ++j) {
      if (v.values[j] == 0.0) missing[j] += 1.0;
    }
  }
  for (double &m : missing) m /= static_cast<double>(vectors.size());
  return missing;
}

void WriteFeatureMatrix(std::ostream &out, const Vocabulary &vocab,
                        std::span<const FeatureVector> vectors) {
  out << "record_id";
  for (const auto &e : vocab.entries()) out << '\t' << e.term << '/' << CategoryName(e.category);
  out << '\n';
  for (const auto &v : vectors) {
    out << v.record_id;
    for (double x : v.values) out << '\t' << FormatDouble(x);
    out << '\n';
  }
}

}  // namespace svctriage
