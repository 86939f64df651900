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

#ifndef SVCTRIAGE_FEATURES_H_
#define SVCTRIAGE_FEATURES_H_

// Count features over the most frequent terms of each grammatical category,
// chi-squared scoring, feature correlation and correlation-aware selection.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "svctriage/textprep.h"

namespace svctriage {

enum class FeatureCategory { kNoun = 0, kVerb, kAdjective, kAdverb, kBigram };
inline constexpr int kNumFeatureCategories = 5;

std::string_view CategoryName(FeatureCategory category);
std::optional<FeatureCategory> ParseCategory(std::string_view name);

// Category a unigram token counts under, if any. Numbers, part and unit
// numbers and dates are not vocabulary terms.
std::optional<FeatureCategory> CategoryOf(PosTag tag);

struct VocabEntry {
  std::string term;
  FeatureCategory category;
  uint64_t frequency = 0;
  bool operator==(const VocabEntry &) const = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Keeps the given order. Throws DataError on a duplicate (term, category).
  explicit Vocabulary(std::vector<VocabEntry> entries);

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<VocabEntry> &entries() const { return entries_; }
  const VocabEntry &operator[](size_t i) const { return entries_[i]; }

  std::optional<size_t> Find(std::string_view term, FeatureCategory category) const;

  // "term<TAB>category<TAB>frequency" lines.
  std::string Serialize() const;
  static Vocabulary Parse(std::string_view text);

  uint64_t Hash() const;

  bool operator==(const Vocabulary &other) const { return entries_ == other.entries_; }

 private:
  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

struct VocabularyOptions {
  size_t top_k = 200;  // per category
  // Frequent words that carry no information.
  std::set<std::string> excluded = {"unit", "vehicle"};
};

// Per category the top_k most frequent terms; bigrams come from
// ExtractNgrams(segment, 2) over the content tokens of each segment.
// Ordered by descending frequency, then term, then category.
Vocabulary BuildVocabulary(std::span<const Document> docs, const VocabularyOptions &options);

struct FeatureVector {
  std::string record_id;
  std::vector<double> values;
};

// Raw occurrence counts aligned with the vocabulary.
FeatureVector Vectorize(const Document &doc, const Vocabulary &vocab,
                        std::string record_id = "");

// Per feature: presence (count > 0) against class, chi-squared over the
// 2 x G contingency table. Features present in every or no document score 0.
std::vector<double> ChiSquaredScores(std::span<const FeatureVector> vectors,
                                     std::span<const int> labels);

using Matrix = std::vector<std::vector<double>>;

// Pearson correlation between feature columns. Zero-variance columns get 0
// off the diagonal; the diagonal is 1. Throws DataError for < 2 samples.
Matrix CorrelationMatrix(std::span<const FeatureVector> vectors);

// Greedy by descending score (ties: lower vocabulary index first). A feature
// is skipped when its |correlation| with an admitted one exceeds the
// threshold. Stops after `keep` features. Entries come back in admission order.
Vocabulary SelectFeatures(const Vocabulary &vocab, std::span<const double> scores,
                          const Matrix &corr, size_t keep, double corr_threshold);

// Fraction of documents in which each feature is absent. Reported only;
// dropping rare features loses rare but diagnostic parts.
std::vector<double> MissingValueRatios(std::span<const FeatureVector> vectors);

// Header row of terms, then "record_id<TAB>v1<TAB>v2..." per vector.
void WriteFeatureMatrix(std::ostream &out, const Vocabulary &vocab,
                        std::span<const FeatureVector> vectors);

}  // namespace svctriage

#endif  // SVCTRIAGE_FEATURES_H_
