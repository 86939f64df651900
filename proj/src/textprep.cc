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

#include "svctriage/textprep.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include "svctriage/common.h"

namespace svctriage {

namespace {

// Word characters: ASCII alphanumerics and any non-ASCII byte, so UTF-8
// sequences stay inside their word.
bool IsWordChar(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80;
}

bool IsAlnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool IsVowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

bool AllLower(std::string_view w) {
  for (char c : w) {
    if (c < 'a' || c > 'z') return false;
  }
  return !w.empty();
}

bool EndsWith(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

bool HasVowel(std::string_view w) {
  return std::any_of(w.begin(), w.end(), IsVowel);
}

const std::map<std::string, std::string> &IrregularForms() {
  static const std::map<std::string, std::string> kForms = {
      {"bent", "bend"},     {"blew", "blow"},     {"blown", "blow"},
      {"broke", "break"},   {"broken", "break"},  {"caught", "catch"},
      {"fallen", "fall"},   {"fell", "fall"},     {"found", "find"},
      {"froze", "freeze"},  {"frozen", "freeze"}, {"ran", "run"},
      {"rode", "ride"},     {"sent", "send"},     {"spun", "spin"},
      {"torn", "tear"},     {"took", "take"},     {"used", "use"},
      {"went", "go"},       {"worn", "wear"},     {"wound", "wind"},
      {"wrote", "write"},
  };
  return kForms;
}

// Words whose suffix is part of the stem.
const std::set<std::string> &ProtectedWords() {
  static const std::set<std::string> kWords = {
      "awning",  "bearing", "brakes", "bushing", "ceiling", "chassis", "coupling",
      "during",  "fitting", "gas",    "housing", "landing", "lining",  "mounting",
      "nothing", "railing", "ring",   "seating", "spring",  "string",  "tubing",
      "wiring",  "bus",     "lens",   "series",  "species", "axis",    "thing",
  };
  return kWords;
}

std::string RestoreStem(std::string stem) {
  size_t n = stem.size();
  char last = stem[n - 1];
  if (n >= 2 && last == stem[n - 2] && !IsVowel(last) && last != 'l' && last != 's' &&
      last != 'z') {
    stem.pop_back();
    return stem;
  }
  bool consonant_at = n >= 3 && EndsWith(stem, "at") && !IsVowel(stem[n - 3]);
  if (last == 'c' || last == 'v' || consonant_at || EndsWith(stem, "iz") ||
      EndsWith(stem, "ag") || EndsWith(stem, "bl") || EndsWith(stem, "us") ||
      EndsWith(stem, "sur") || EndsWith(stem, "dg") || EndsWith(stem, "rg") ||
      EndsWith(stem, "os")) {
    stem.push_back('e');
  }
  return stem;
}

std::string LemmatizeStep(const std::string &w, const Lexicon &lexicon) {
  if (auto expanded = lexicon.Expand(w)) return *expanded;
  auto irregular = IrregularForms().find(w);
  if (irregular != IrregularForms().end()) return irregular->second;
  if (ProtectedWords().count(w) || !AllLower(w)) return w;
  size_t n = w.size();
  if (n > 4 && EndsWith(w, "ies")) return w.substr(0, n - 3) + "y";
  if (EndsWith(w, "sses")) return w.substr(0, n - 2);
  if (n > 4 && EndsWith(w, "es")) {
    std::string_view base = std::string_view(w).substr(0, n - 2);
    if (EndsWith(base, "x") || EndsWith(base, "z") || EndsWith(base, "ch") ||
        EndsWith(base, "sh")) {
      return std::string(base);
    }
  }
  if (n > 3 && EndsWith(w, "s") && !EndsWith(w, "ss") && !EndsWith(w, "us") &&
      !EndsWith(w, "is")) {
    return w.substr(0, n - 1);
  }
  if (n > 5 && EndsWith(w, "ing")) {
    std::string stem = w.substr(0, n - 3);
    if (stem.size() >= 3 && HasVowel(stem)) return RestoreStem(stem);
  }
  if (n > 4 && EndsWith(w, "ed") && !EndsWith(w, "eed")) {
    std::string stem = w.substr(0, n - 2);
    if (stem.size() >= 3 && HasVowel(stem)) return RestoreStem(stem);
  }
  return w;
}

const std::set<std::string> &KnownVerbs() {
  static const std::set<std::string> kVerbs = {
      "adjust", "can",   "fix",    "perform", "remove", "repair",
      "replace", "reset", "tighten", "weld",  "order",  "need",
  };
  return kVerbs;
}

const std::set<std::string> &KnownAdjectives() {
  static const std::set<std::string> kAdjectives = {
      "bad",  "cold",  "dead",  "down",  "front", "good",  "high", "hot",
      "left", "loose", "lower", "low",   "main",  "major", "minor", "new",
      "old",  "rear",  "right", "upper", "weak",  "inoperable",
  };
  return kAdjectives;
}

// Words ending in -ly that are not adverbs.
const std::set<std::string> &LyNouns() {
  static const std::set<std::string> kWords = {"assembly", "supply", "apply", "reply",
                                               "family", "poly", "anomaly"};
  return kWords;
}

PosTag HeuristicTag(const std::string &w) {
  if (IsAllDigits(w)) return PosTag::kNumber;
  if (KnownAdjectives().count(w)) return PosTag::kAdjective;
  if (w.size() > 4 && EndsWith(w, "ly") && !LyNouns().count(w)) return PosTag::kAdverb;
  if (IrregularForms().count(w) || KnownVerbs().count(w)) return PosTag::kVerb;
  if (!ProtectedWords().count(w)) {
    if (w.size() > 5 && EndsWith(w, "ing")) return PosTag::kVerb;
    if (w.size() > 4 && EndsWith(w, "ed") && !EndsWith(w, "eed")) return PosTag::kVerb;
  }
  for (std::string_view suffix : {"able", "ible", "ous", "ful", "ive", "less", "ical"}) {
    if (w.size() > suffix.size() + 2 && EndsWith(w, suffix)) return PosTag::kAdjective;
  }
  return PosTag::kNoun;
}

bool IsNumeric(PosTag tag) { return tag == PosTag::kNumber || tag == PosTag::kUnitNumber; }

bool IsWordTag(PosTag tag) {
  return tag == PosTag::kNoun || tag == PosTag::kVerb || tag == PosTag::kAdjective ||
         tag == PosTag::kAdverb || tag == PosTag::kOther;
}

bool IsStopException(const Lexicon &lexicon, std::string_view word) {
  for (const auto &e : lexicon.stop_exceptions()) {
    if (e.word == word) return true;
  }
  return false;
}

std::vector<TaggedToken> FilterStopTokens(const std::vector<TaggedToken> &tokens,
                                          const Lexicon &lexicon) {
  std::vector<TaggedToken> out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const TaggedToken &t = tokens[i];
    if (t.n != 1 || !IsWordTag(t.tag) || !lexicon.IsStopWord(t.text)) {
      out.push_back(t);
      continue;
    }
    if (IsStopException(lexicon, t.text) && i + 1 < tokens.size() &&
        IsNumeric(tokens[i + 1].tag)) {
      const TaggedToken &num = tokens[i + 1];
      out.push_back({t.text + num.text, PosTag::kModelId, {t.span.begin, num.span.end}, 2});
      ++i;
    }
  }
  return out;
}

struct TermPattern {
  TermKind kind;
  std::regex re;
  bool token_start;  // must start a whitespace-delimited token
};

const std::vector<TermPattern> &TermPatterns() {
  static const std::vector<TermPattern> kPatterns = {
      {TermKind::kPartNumber, std::regex("(pn)?[0-9]{6,12}"), false},
      {TermKind::kUnitNumber, std::regex("[0-9]{4,5}"), true},
      {TermKind::kServiceDate,
       std::regex("[0-9]{4}-[0-9]{2}-[0-9]{2}|[0-9]{1,2}/[0-9]{1,2}/([0-9]{4}|[0-9]{2})"),
       false},
  };
  return kPatterns;
}

}  // namespace

std::vector<std::string> Normalize(std::string_view text) {
  std::string lower = ToLower(text);
  std::vector<std::string> segments;
  size_t start = 0;
  auto flush = [&](size_t end) {
    std::string seg = Join(SplitWhitespace(std::string_view(lower).substr(start, end - start)), " ");
    if (!seg.empty()) segments.push_back(std::move(seg));
  };
  for (size_t i = 0; i < lower.size();) {
    if (lower[i] == '\n') {
      flush(i);
      start = ++i;
    } else if (lower[i] == '-' && i + 1 < lower.size() && lower[i + 1] == '-') {
      flush(i);
      i += 2;
      start = i;
    } else {
      ++i;
    }
  }
  flush(lower.size());
  return segments;
}

std::string Lemmatize(std::string_view token, const Lexicon &lexicon) {
  std::string current(token);
  // Every rewrite either hits a fixed point or shortens the word.
  for (int guard = 0; guard < 64; ++guard) {
    std::string next = LemmatizeStep(current, lexicon);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::vector<std::string> ApplyStopRules(const std::vector<std::string> &tokens,
                                        const Lexicon &lexicon) {
  std::vector<std::string> out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!lexicon.IsStopWord(tokens[i])) {
      out.push_back(tokens[i]);
      continue;
    }
    if (IsStopException(lexicon, tokens[i]) && i + 1 < tokens.size() &&
        IsAllDigits(tokens[i + 1])) {
      out.push_back(tokens[i] + tokens[i + 1]);
      ++i;
    }
  }
  return out;
}

VagueStrip StripVaguePhrases(std::string_view segment, const Lexicon &lexicon) {
  std::vector<TaggedToken> words = TokenizeWords(segment);
  std::vector<bool> removed_word(words.size(), false);
  std::vector<bool> drop(segment.size(), false);
  bool removed = false;
  for (const std::string &phrase : lexicon.vague_phrases()) {
    std::vector<std::string> pw = SplitWhitespace(phrase);
    if (pw.empty()) continue;
    for (size_t i = 0; i + pw.size() <= words.size(); ++i) {
      bool match = true;
      for (size_t j = 0; j < pw.size() && match; ++j) {
        match = !removed_word[i + j] && words[i + j].text == pw[j];
      }
      if (!match) continue;
      for (size_t j = 0; j < pw.size(); ++j) removed_word[i + j] = true;
      for (size_t b = words[i].span.begin; b < words[i + pw.size() - 1].span.end; ++b) {
        drop[b] = true;
      }
      removed = true;
      i += pw.size() - 1;
    }
  }
  std::string kept;
  for (size_t b = 0; b < segment.size(); ++b) {
    kept.push_back(drop[b] ? ' ' : segment[b]);
  }
  VagueStrip result;
  result.text = Join(SplitWhitespace(kept), " ");
  result.vague = removed && result.text.empty();
  return result;
}

std::vector<TermMatch> RecognizeTerms(std::string_view segment) {
  std::vector<TermMatch> candidates;
  const std::string text(segment);
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (!std::isdigit(static_cast<unsigned char>(c)) && c != 'p') continue;
    for (const TermPattern &p : TermPatterns()) {
      bool at_token_start = i == 0 || std::isspace(static_cast<unsigned char>(text[i - 1]));
      if (p.token_start ? !at_token_start : (i > 0 && IsAlnum(text[i - 1]))) continue;
      std::smatch m;
      if (!std::regex_search(text.cbegin() + i, text.cend(), m, p.re,
                             std::regex_constants::match_continuous)) {
        continue;
      }
      size_t end = i + m.length(0);
      if (end < text.size() && IsAlnum(text[end])) continue;
      candidates.push_back({p.kind, m.str(0), {i, end}});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto &a, const auto &b) {
    if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
    return (a.span.end - a.span.begin) > (b.span.end - b.span.begin);
  });
  std::vector<TermMatch> out;
  size_t covered = 0;
  for (auto &m : candidates) {
    if (!out.empty() && m.span.begin < covered) continue;
    covered = m.span.end;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<TaggedToken> TokenizeWords(std::string_view segment) {
  std::vector<TaggedToken> out;
  size_t i = 0;
  while (i < segment.size()) {
    while (i < segment.size() && !IsWordChar(segment[i])) ++i;
    size_t start = i;
    while (i < segment.size() && IsWordChar(segment[i])) ++i;
    if (i > start) {
      std::string word(segment.substr(start, i - start));
      PosTag tag = IsAllDigits(word) ? PosTag::kNumber : PosTag::kOther;
      out.push_back({std::move(word), tag, {start, i}, 1});
    }
  }
  return out;
}

std::vector<TaggedToken> Tokenize(std::string_view segment, const Lexicon &lexicon) {
  std::vector<TaggedToken> tokens;
  size_t pos = 0;
  auto add_words = [&](size_t end) {
    for (TaggedToken t : TokenizeWords(segment.substr(pos, end - pos))) {
      t.span.begin += pos;
      t.span.end += pos;
      tokens.push_back(std::move(t));
    }
  };
  for (const TermMatch &m : RecognizeTerms(segment)) {
    add_words(m.span.begin);
    PosTag tag = m.kind == TermKind::kPartNumber   ? PosTag::kPartNumber
                 : m.kind == TermKind::kUnitNumber ? PosTag::kUnitNumber
                                                   : PosTag::kDate;
    tokens.push_back({m.raw, tag, m.span, 1});
    pos = m.span.end;
  }
  add_words(segment.size());

  const auto &patterns = lexicon.mwe_patterns();
  if (patterns.empty()) return tokens;

  std::vector<std::string> lemmas(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].tag == PosTag::kOther) lemmas[i] = Lemmatize(tokens[i].text, lexicon);
  }
  struct Candidate {
    size_t start, len, pattern;
  };
  std::vector<Candidate> candidates;
  for (size_t p = 0; p < patterns.size(); ++p) {
    std::vector<std::string> pattern_lemmas;
    for (const auto &w : patterns[p]) pattern_lemmas.push_back(Lemmatize(w, lexicon));
    size_t len = patterns[p].size();
    for (size_t i = 0; i + len <= tokens.size(); ++i) {
      bool match = true;
      for (size_t j = 0; j < len && match; ++j) {
        const TaggedToken &t = tokens[i + j];
        match = t.tag == PosTag::kOther &&
                (t.text == patterns[p][j] || lemmas[i + j] == pattern_lemmas[j]);
      }
      if (match) candidates.push_back({i, len, p});
    }
  }
  // Longer matches win; equal lengths go to the earlier start.
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto &a, const auto &b) {
    if (a.len != b.len) return a.len > b.len;
    return a.start < b.start;
  });
  std::vector<int> owner(tokens.size(), -1);
  std::vector<Candidate> chosen;
  for (const Candidate &c : candidates) {
    bool free = true;
    for (size_t j = c.start; j < c.start + c.len; ++j) free = free && owner[j] < 0;
    if (!free) continue;
    for (size_t j = c.start; j < c.start + c.len; ++j) owner[j] = static_cast<int>(chosen.size());
    chosen.push_back(c);
  }
  std::vector<TaggedToken> merged;
  for (size_t i = 0; i < tokens.size();) {
    if (owner[i] < 0) {
      merged.push_back(std::move(tokens[i]));
      ++i;
      continue;
    }
    const Candidate &c = chosen[owner[i]];
    TaggedToken t;
    t.text = Join(patterns[c.pattern], " ");
    t.tag = PosTag::kOther;
    t.span = {tokens[c.start].span.begin, tokens[c.start + c.len - 1].span.end};
    t.n = static_cast<int>(c.len);
    merged.push_back(std::move(t));
    i = c.start + c.len;
  }
  return merged;
}

std::vector<TaggedToken> TagPos(std::vector<TaggedToken> tokens, const Lexicon &lexicon) {
  for (TaggedToken &t : tokens) {
    if (!IsWordTag(t.tag)) continue;
    const auto &overrides = lexicon.pos_overrides();
    auto it = overrides.find(t.text);
    if (it == overrides.end() && t.n == 1) it = overrides.find(Lemmatize(t.text, lexicon));
    if (it != overrides.end()) {
      t.tag = it->second;
    } else if (t.n >= 2) {
      t.tag = PosTag::kNoun;
    } else {
      t.tag = HeuristicTag(t.text);
    }
  }
  return tokens;
}

std::vector<std::string> ExtractNgrams(std::span<const TaggedToken> tokens, int n) {
  std::vector<std::string> out;
  if (n < 1 || tokens.size() < static_cast<size_t>(n)) return out;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string gram = tokens[i].text;
    for (int j = 1; j < n; ++j) {
      gram.push_back(' ');
      gram += tokens[i + j].text;
    }
    out.push_back(std::move(gram));
  }
  return out;
}

size_t Document::TokenCount() const {
  size_t n = 0;
  for (const auto &s : segments) n += s.size();
  return n;
}

std::vector<std::string> Document::Texts() const {
  std::vector<std::string> out;
  for (const auto &s : segments) {
    for (const auto &t : s) out.push_back(t.text);
  }
  return out;
}

TextAnalyzer::TextAnalyzer(Lexicon lexicon, bool domain_nlp)
    : lexicon_(domain_nlp ? std::move(lexicon) : Lexicon::Generic()),
      domain_nlp_(domain_nlp) {}

Document TextAnalyzer::Analyze(std::string_view text) const {
  Document doc;
  for (const std::string &segment : Normalize(text)) {
    std::vector<TaggedToken> tokens;
    if (domain_nlp_) {
      VagueStrip stripped = StripVaguePhrases(segment, lexicon_);
      if (stripped.text.empty()) continue;
      tokens = Tokenize(stripped.text, lexicon_);
    } else {
      tokens = TokenizeWords(segment);
    }
    tokens = FilterStopTokens(TagPos(std::move(tokens), lexicon_), lexicon_);
    for (TaggedToken &t : tokens) {
      if (t.n == 1 && IsWordTag(t.tag)) t.text = Lemmatize(t.text, lexicon_);
    }
    if (!tokens.empty()) doc.segments.push_back(std::move(tokens));
  }
  doc.vague = doc.segments.empty();
  return doc;
}

}  // namespace svctriage
