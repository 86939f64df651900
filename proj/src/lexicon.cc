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

#include "svctriage/lexicon.h"

#include <algorithm>
#include <array>
#include <sstream>

#include "svctriage/common.h"

namespace svctriage {

namespace {

constexpr std::array<std::string_view, 10> kTagNames = {
    "NOUN", "VERB", "ADJ", "ADV", "NUMBER", "MODEL", "PART", "UNIT", "DATE", "OTHER"};

enum class Section { kNone, kAbbreviations, kMwe, kPos, kStop, kStopExceptions, kVague };

Section ParseSection(std::string_view header) {
  if (header == "[abbreviations]") return Section::kAbbreviations;
  if (header == "[mwe]") return Section::kMwe;
  if (header == "[pos]") return Section::kPos;
  if (header == "[stop]") return Section::kStop;
  if (header == "[stop_exceptions]") return Section::kStopExceptions;
  if (header == "[vague]") return Section::kVague;
  return Section::kNone;
}

std::string CollapseSpaces(std::string_view text) {
  return Join(SplitWhitespace(ToLower(text)), " ");
}

}  // namespace

std::string_view PosTagName(PosTag tag) { return kTagNames[static_cast<int>(tag)]; }

std::optional<PosTag> ParsePosTag(std::string_view name) {
  std::string upper(name);
  for (char &c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "ADJECTIVE") upper = "ADJ";
  if (upper == "ADVERB") upper = "ADV";
  for (size_t i = 0; i < kTagNames.size(); ++i) {
    if (kTagNames[i] == upper) return static_cast<PosTag>(i);
  }
  return std::nullopt;
}

const std::vector<std::string> &GenericStopWords() {
  static const std::vector<std::string> kWords = {
      "a",     "about", "after", "all",   "also",  "an",    "and",   "any",
      "are",   "as",    "at",    "be",    "been",  "before", "being", "but",
      "by",    "did",   "do",    "does",  "for",   "from",  "had",   "has",
      "have",  "he",    "her",   "his",   "i",     "if",    "in",    "into",
      "is",    "it",    "its",   "me",    "my",    "of",    "on",    "or",
      "our",   "she",   "so",    "some",  "than",  "that",  "the",   "their",
      "them",  "then",  "there", "these", "they",  "this",  "those", "to",
      "too",   "very",  "was",   "we",    "were",  "what",  "when",  "where",
      "which", "while", "who",   "will",  "with",  "would", "you",   "your"};
  return kWords;
}

Lexicon Lexicon::Generic() {
  Lexicon lex;
  lex.stop_words_.insert(GenericStopWords().begin(), GenericStopWords().end());
  return lex;
}

Lexicon Lexicon::Load(const std::string &path) { return Parse(ReadFile(path)); }

Lexicon Lexicon::Parse(std::string_view text) {
  Lexicon lex;
  Section section = Section::kNone;
  std::istringstream in{std::string(text)};
  std::string raw;
  size_t line_no = 0;
  auto fail = [&](const std::string &why) {
    throw DataError("lexicon line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = Trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      section = ParseSection(line);
      if (section == Section::kNone) fail("unknown section " + line);
      continue;
    }
    switch (section) {
      case Section::kNone:
        fail("entry outside of a section");
        break;
      case Section::kAbbreviations: {
        size_t arrow = line.find("->");
        if (arrow == std::string::npos) fail("expected 'surface -> canonical'");
        std::string surface = CollapseSpaces(line.substr(0, arrow));
        std::string canonical = CollapseSpaces(line.substr(arrow + 2));
        if (surface.empty() || canonical.empty()) fail("empty abbreviation entry");
        if (surface == canonical) fail("abbreviation maps to itself: " + surface);
        lex.abbreviations_[surface] = canonical;
        break;
      }
      case Section::kMwe: {
        auto words = SplitWhitespace(ToLower(line));
        if (words.size() < 2) fail("multiword expression needs at least two words");
        if (std::find(lex.mwe_patterns_.begin(), lex.mwe_patterns_.end(), words) ==
            lex.mwe_patterns_.end()) {
          lex.mwe_patterns_.push_back(std::move(words));
        }
        break;
      }
      case Section::kPos: {
        size_t colon = line.rfind(':');
        if (colon == std::string::npos) fail("expected 'token : TAG'");
        std::string token = CollapseSpaces(line.substr(0, colon));
        auto tag = ParsePosTag(Trim(line.substr(colon + 1)));
        if (token.empty() || !tag) fail("bad pos override");
        lex.pos_overrides_[token] = *tag;
        break;
      }
      case Section::kStop:
        lex.stop_words_.insert(CollapseSpaces(line));
        break;
      case Section::kStopExceptions: {
        auto parts = SplitWhitespace(ToLower(line));
        if (parts.size() != 2 || parts[1] != "+number") {
          fail("expected 'word +number'");
        }
        lex.stop_exceptions_.push_back({parts[0]});
        break;
      }
      case Section::kVague:
        lex.vague_phrases_.push_back(CollapseSpaces(line));
        break;
    }
  }
  for (const auto &[surface, canonical] : lex.abbreviations_) {
    if (lex.abbreviations_.count(canonical)) {
      throw DataError("lexicon: canonical root '" + canonical +
                      "' is itself an abbreviation (via '" + surface + "')");
    }
  }
  for (const auto &[token, tag] : lex.pos_overrides_) {
    if (lex.stop_words_.count(token)) {
      throw DataError("lexicon: '" + token + "' is both a stop word and a pos override");
    }
  }
  std::stable_sort(lex.mwe_patterns_.begin(), lex.mwe_patterns_.end(),
                   [](const auto &a, const auto &b) { return a.size() > b.size(); });
  // Longer vague phrases are removed first.
  std::stable_sort(lex.vague_phrases_.begin(), lex.vague_phrases_.end(),
                   [](const auto &a, const auto &b) { return a.size() > b.size(); });
  return lex;
}

std::string Lexicon::Serialize() const {
  std::ostringstream out;
  out << "[abbreviations]\n";
  for (const auto &[s, c] : abbreviations_) out << s << " -> " << c << '\n';
  out << "\n[mwe]\n";
  for (const auto &p : mwe_patterns_) out << Join(p, " ") << '\n';
  out << "\n[pos]\n";
  for (const auto &[t, tag] : pos_overrides_) out << t << " : " << PosTagName(tag) << '\n';
  out << "\n[stop]\n";
  for (const auto &w : stop_words_) out << w << '\n';
  out << "\n[stop_exceptions]\n";
  for (const auto &e : stop_exceptions_) out << e.word << " +number\n";
  out << "\n[vague]\n";
  for (const auto &v : vague_phrases_) out << v << '\n';
  return out.str();
}

std::optional<std::string> Lexicon::Expand(std::string_view surface) const {
  auto it = abbreviations_.find(std::string(surface));
  if (it == abbreviations_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Lexicon::AbbreviationsOf(std::string_view canonical) const {
  std::vector<std::string> out;
  for (const auto &[s, c] : abbreviations_) {
    if (c == canonical) out.push_back(s);
  }
  return out;
}

}  // namespace svctriage
