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

#ifndef SVCTRIAGE_LEXICON_H_
#define SVCTRIAGE_LEXICON_H_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace svctriage {

enum class PosTag {
  kNoun = 0,
  kVerb,
  kAdjective,
  kAdverb,
  kNumber,
  kModelId,
  kPartNumber,
  kUnitNumber,
  kDate,
  kOther,
};

std::string_view PosTagName(PosTag tag);
std::optional<PosTag> ParsePosTag(std::string_view name);

// A stop word that is kept, merged with the following number, when the next
// token is numeric ("an 50" names a product model).
struct StopException {
  std::string word;
};

// Domain vocabulary: abbreviations, multiword expressions, tag overrides,
// stop words and vague phrases. Immutable once parsed.
//
// File layout is sectioned text:
//
//   [abbreviations]      brk -> break
//   [mwe]                upper valve
//   [pos]                can : NOUN
//   [stop]               the
//   [stop_exceptions]    an +number
//   [vague]              service needed
//
// Blank lines and lines starting with '#' are ignored.
class Lexicon {
 public:
  Lexicon() = default;

  // Throws DataError with the line number on malformed input or when an
  // invariant is broken (abbreviation chains, stop/override overlap).
  static Lexicon Parse(std::string_view text);
  static Lexicon Load(const std::string &path);

  // Only the generic stop-word list; used when domain processing is off.
  static Lexicon Generic();

  std::string Serialize() const;

  const std::map<std::string, std::string> &abbreviations() const {
    return abbreviations_;
  }
  // Longest pattern first; ties keep file order.
  const std::vector<std::vector<std::string>> &mwe_patterns() const {
    return mwe_patterns_;
  }
  const std::map<std::string, PosTag> &pos_overrides() const { return pos_overrides_; }
  const std::set<std::string> &stop_words() const { return stop_words_; }
  const std::vector<StopException> &stop_exceptions() const { return stop_exceptions_; }
  const std::vector<std::string> &vague_phrases() const { return vague_phrases_; }

  bool IsStopWord(std::string_view word) const {
    return stop_words_.count(std::string(word)) > 0;
  }

  // Canonical root for an abbreviation, or nullopt.
  std::optional<std::string> Expand(std::string_view surface) const;

  // Abbreviated spellings of a canonical root, sorted.
  std::vector<std::string> AbbreviationsOf(std::string_view canonical) const;

 private:
  std::map<std::string, std::string> abbreviations_;
  std::vector<std::vector<std::string>> mwe_patterns_;
  std::map<std::string, PosTag> pos_overrides_;
  std::set<std::string> stop_words_;
  std::vector<StopException> stop_exceptions_;
  std::vector<std::string> vague_phrases_;
};

// Generic English stop words shared by both processing modes.
const std::vector<std::string> &GenericStopWords();

}  // namespace svctriage

#endif  // SVCTRIAGE_LEXICON_H_
