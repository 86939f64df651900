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

#ifndef SVCTRIAGE_TEXTPREP_H_
#define SVCTRIAGE_TEXTPREP_H_

// Text front-end for service reports: segmentation, domain lemmatization,
// stop rules, vague-phrase removal, staging-term recognition, multiword
// tokenization and tagging.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svctriage/lexicon.h"

namespace svctriage {

// Half-open byte range [begin, end).
struct Span {
  size_t begin = 0;
  size_t end = 0;
  bool operator==(const Span &) const = default;
};

enum class TermKind { kPartNumber, kUnitNumber, kServiceDate };

struct TermMatch {
  TermKind kind;
  std::string raw;
  Span span;
};

struct TaggedToken {
  std::string text;
  PosTag tag = PosTag::kOther;
  Span span;
  int n = 1;  // source words covered
};

// Lowercases, splits on "--" and newlines into task segments, collapses
// inner whitespace and drops empty segments.
std::vector<std::string> Normalize(std::string_view text);

// Abbreviation map first, then the irregular-form table, then suffix
// stripping, repeated to a fixed point.
std::string Lemmatize(std::string_view token, const Lexicon &lexicon);

// Removes stop words. A stop word listed as an exception that is directly
// followed by a number is merged with it ("an" "50" -> "an50").
std::vector<std::string> ApplyStopRules(const std::vector<std::string> &tokens,
                                        const Lexicon &lexicon);

struct VagueStrip {
  std::string text;
  bool vague = false;  // a phrase was removed and nothing is left
};

VagueStrip StripVaguePhrases(std::string_view segment, const Lexicon &lexicon);

// Part numbers (optional "pn" + 6-12 digits), unit numbers (4-5 digits at
// the start of a token) and service dates. Non-overlapping, leftmost-longest.
std::vector<TermMatch> RecognizeTerms(std::string_view segment);

// Staging terms become single tokens, multiword expressions are merged
// longest-first, everything else is split into words. Word tokens carry
// PosTag::kOther until TagPos runs.
std::vector<TaggedToken> Tokenize(std::string_view segment, const Lexicon &lexicon);

// Plain split on non-alphanumeric characters, no lexicon involvement.
std::vector<TaggedToken> TokenizeWords(std::string_view segment);

// Overrides first, multiword tokens are nouns, then suffix heuristics.
std::vector<TaggedToken> TagPos(std::vector<TaggedToken> tokens, const Lexicon &lexicon);

// Contiguous n-token sequences joined by single spaces.
std::vector<std::string> ExtractNgrams(std::span<const TaggedToken> tokens, int n);

// One analyzed report: a token list per task segment.
struct Document {
  std::vector<std::vector<TaggedToken>> segments;
  bool vague = false;  // empty, or nothing but vague phrases

  size_t TokenCount() const;
  std::vector<std::string> Texts() const;
};

// Full front-end. With domain processing off, only the generic steps run:
// segmentation, word splitting, suffix tagging and lemmatization, and
// generic stop-word removal.
class TextAnalyzer {
 public:
  TextAnalyzer(Lexicon lexicon, bool domain_nlp);

  Document Analyze(std::string_view text) const;

  const Lexicon &lexicon() const { return lexicon_; }
  bool domain_nlp() const { return domain_nlp_; }

 private:
  Lexicon lexicon_;
  bool domain_nlp_;
};

}  // namespace svctriage

#endif  // SVCTRIAGE_TEXTPREP_H_
