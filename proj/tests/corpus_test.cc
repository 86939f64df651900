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


#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "svctriage/common.h"
#include "svctriage/corpus.h"
#include "svctriage/lexicon.h"

namespace svctriage {
namespace {

const Lexicon &TestLexicon() {
  static const Lexicon lexicon = Lexicon::Load(std::string(SVCTRIAGE_DATA_DIR) + "/lexicon.txt");
  return lexicon;
}

ServiceRecord MakeRecord(const std::string &id, Department dept) {
  ServiceRecord r;
  r.id = id;
  r.call_log = "boom won't rotate";
  r.detail = "replaced rotation gearbox -- tested boom";
  r.relation = Relation::kValid;
  r.department = dept;
  r.age_months = 12;
  r.zip = "53703";
  r.company = "Acme Utility";
  r.failure_date = {2019, 4, 7};
  r.runtime_hours = 1234.5;
  r.ownership = Ownership::kLeased;
  r.months_since_service = 3.5;
  r.operator_id = "op017";
  return r;
}

std::string Line(const ServiceRecord &r) { return SerializeRecord(r); }

TEST_CASE("empty stream parses to nothing") {
  std::istringstream in("");
  ParseResult result = ParseRecords(in);
  CHECK(result.records.empty());
  CHECK(result.errors.empty());
}

TEST_CASE("relation and department map to enums") {
  std::istringstream in(Line(MakeRecord("a1", Department::kBoom)) + "\n");
  ParseResult result = ParseRecords(in);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].relation == Relation::kValid);
  CHECK(result.records[0].department == Department::kBoom);
}

TEST_CASE("department outside the sixteen is rejected") {
  std::string line = Line(MakeRecord("a1", Department::kBoom));
  size_t at = line.find("\"Boom\"");
  REQUIRE(at != std::string::npos);
  line.replace(at, 6, "\"Engine\"");
  std::istringstream in(Line(MakeRecord("a0", Department::kPto)) + "\n" + line + "\n");
  ParseResult result = ParseRecords(in);
  CHECK(result.records.size() == 1);
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].line == 2);
  CHECK(result.errors[0].message.find("Engine") != std::string::npos);
}

TEST_CASE("the sixteen department names") {
  const std::vector<std::string> names = {
      "Controls", "Vague", "Harness", "Hydraulics", "PTO",     "Boom",    "Maintenance",
      "Test",     "Rotation", "Auger", "Outrigger", "Digger", "Body", "Chassis",
      "Electronics", "Resale"};
  REQUIRE(names.size() == kNumDepartments);
  for (int i = 0; i < kNumDepartments; ++i) {
    CHECK(DepartmentName(DepartmentFromIndex(i)) == names[i]);
    CHECK(ParseDepartment(names[i]) == DepartmentFromIndex(i));
  }
  CHECK_FALSE(ParseDepartment("Engine").has_value());
}

TEST_CASE("relation labels accept the claim suffix") {
  CHECK(ParseRelation("False claim") == Relation::kFalse);
  CHECK(ParseRelation("Vague") == Relation::kVague);
  CHECK_FALSE(ParseRelation("Maybe").has_value());
}

TEST_CASE("malformed lines are reported and parsing continues") {
  std::string good = Line(MakeRecord("a1", Department::kBoom));
  std::istringstream in("{not json\n" + good + "\n[1,2]\n");
  ParseResult result = ParseRecords(in);
  CHECK(result.records.size() == 1);
  REQUIRE(result.errors.size() == 2);
  CHECK(result.errors[0].line == 1);
  CHECK(result.errors[1].line == 3);
}

TEST_CASE("record invariants") {
  ServiceRecord r = MakeRecord("a1", Department::kBoom);
  CHECK(CheckRecord(r).empty());
  r.call_log.clear();
  CHECK_FALSE(CheckRecord(r).empty());
  r.relation = Relation::kVague;
  CHECK(CheckRecord(r).empty());
  r.detail.clear();
  CHECK_FALSE(CheckRecord(r).empty());
  ServiceRecord v = MakeRecord("a2", Department::kBoom);
  v.department.reset();
  CHECK_FALSE(CheckRecord(v).empty());
}

TEST_CASE("serialize then parse round-trips") {
  SynthConfig config;
  config.n_records = 200;
  config.noise_rate = 0.1;
  config.abbreviation_rate = 0.3;
  SynthCorpus corpus = GenerateCorpus(config, TestLexicon());
  std::ostringstream out;
  WriteRecords(out, corpus.records);
  std::istringstream in(out.str());
  ParseResult result = ParseRecords(in);
  CHECK(result.errors.empty());
  CHECK(result.records == corpus.records);
}

std::vector<ServiceRecord> Records(size_t n) {
  std::vector<ServiceRecord> out;
  for (size_t i = 0; i < n; ++i) {
    out.push_back(MakeRecord("r" + std::to_string(i), DepartmentFromIndex(static_cast<int>(i % 5))));
  }
  return out;
}

std::vector<size_t> FoldSizes(const FoldAssignment &folds) {
  std::vector<size_t> sizes(folds.k, 0);
  for (int f : folds.fold_of) ++sizes.at(f);
  return sizes;
}

TEST_CASE("ten records in ten folds") {
  auto records = Records(10);
  FoldAssignment folds = SplitFolds(records, 10, 3);
  for (size_t s : FoldSizes(folds)) CHECK(s == 1);
}

TEST_CASE("103 records in ten folds") {
  auto records = Records(103);
  auto sizes = FoldSizes(SplitFolds(records, 10, 3));
  CHECK(std::count(sizes.begin(), sizes.end(), 11u) == 3);
  CHECK(std::count(sizes.begin(), sizes.end(), 10u) == 7);
}

TEST_CASE("folds are a deterministic stratified partition") {
  SynthConfig config;
  config.n_records = 997;
  SynthCorpus corpus = GenerateCorpus(config, TestLexicon());
  FoldAssignment a = SplitFolds(corpus.records, 10, 42);
  FoldAssignment b = SplitFolds(corpus.records, 10, 42);
  CHECK(a.mapping == b.mapping);
  CHECK(a.mapping.size() == corpus.records.size());
  std::set<size_t> seen;
  for (int f = 0; f < 10; ++f) {
    for (size_t i : a.TestIndices(f)) CHECK(seen.insert(i).second);
    CHECK(a.TestIndices(f).size() + a.TrainIndices(f).size() == corpus.records.size());
  }
  CHECK(seen.size() == corpus.records.size());
  auto sizes = FoldSizes(a);
  CHECK(*std::max_element(sizes.begin(), sizes.end()) -
            *std::min_element(sizes.begin(), sizes.end()) <=
        1);
  for (int d = 0; d < kNumDepartments; ++d) {
    std::vector<double> per_fold(10, 0.0);
    double total = 0;
    for (size_t i = 0; i < corpus.records.size(); ++i) {
      if (corpus.records[i].department == DepartmentFromIndex(d)) {
        ++per_fold[a.fold_of[i]];
        ++total;
      }
    }
    for (double c : per_fold) CHECK(std::fabs(c - total / 10.0) <= 1.0);
  }
}

TEST_CASE("fold count above record count is an error") {
  auto records = Records(5);
  CHECK_THROWS_AS(SplitFolds(records, 6, 1), ConfigError);
  CHECK_THROWS_AS(SplitFolds(records, 1, 1), ConfigError);
}

TEST_CASE("zero records generate an empty corpus") {
  SynthConfig config;
  config.n_records = 0;
  SynthCorpus corpus = GenerateCorpus(config, TestLexicon());
  CHECK(corpus.records.empty());
  CHECK(corpus.truth.empty());
}

TEST_CASE("degenerate relation mix") {
  SynthConfig config;
  config.n_records = 100;
  config.relation_mix = {1.0, 0.0, 0.0};
  SynthCorpus corpus = GenerateCorpus(config, TestLexicon());
  REQUIRE(corpus.records.size() == 100);
  for (const auto &r : corpus.records) {
    CHECK(corpus.truth.at(r.id).relation == Relation::kValid);
    CHECK(r.relation == Relation::kValid);
  }
}

TEST_CASE("generation is byte-identical for a fixed seed") {
  SynthConfig config;
  config.n_records = 300;
  config.noise_rate = 0.05;
  config.abbreviation_rate = 0.3;
  std::ostringstream a, b;
  WriteRecords(a, GenerateCorpus(config, TestLexicon()).records);
  WriteRecords(b, GenerateCorpus(config, TestLexicon()).records);
  CHECK(a.str() == b.str());
  config.seed = 2;
  std::ostringstream c;
  WriteRecords(c, GenerateCorpus(config, TestLexicon()).records);
  CHECK(a.str() != c.str());
}

size_t SignatureHits(const std::string &text, Department dept) {
  std::string lower = ToLower(text);
  size_t hits = 0;
  for (const std::string &term : DepartmentSignatureTerms(dept)) {
    for (size_t at = lower.find(term); at != std::string::npos; at = lower.find(term, at + 1)) {
      ++hits;
    }
  }
  return hits;
}

TEST_CASE("noiseless valid records carry their department signature") {
  SynthConfig config;
  config.n_records = 1000;
  SynthCorpus corpus = GenerateCorpus(config, TestLexicon());
  size_t valid = 0;
  for (const auto &r : corpus.records) {
    const GroundTruth &truth = corpus.truth.at(r.id);
    CHECK(CheckRecord(r).empty());
    if (truth.relation == Relation::kValid) {
      ++valid;
      CHECK(SignatureHits(r.detail, truth.department) >= 2);
      CHECK(KeywordLookup(r.detail) == truth.department);
      CHECK(KeywordLookup(r.call_log) == truth.department);
    } else if (truth.relation == Relation::kFalse) {
      CHECK(KeywordLookup(r.detail) == truth.department);
      CHECK(KeywordLookup(r.call_log) != truth.department);
    } else {
      bool vague_phrase = false;
      for (const std::string &phrase : TestLexicon().vague_phrases()) {
        if (ToLower(r.call_log).find(phrase) != std::string::npos) vague_phrase = true;
      }
      CHECK((r.call_log.empty() || vague_phrase));
    }
  }
  CHECK(valid > 500);
}

TEST_CASE("relation proportions follow the mix") {
  SynthConfig config;
  config.n_records = 10000;
  config.relation_mix = {0.5, 0.3, 0.2};
  SynthCorpus corpus = GenerateCorpus(config, TestLexicon());
  std::vector<double> counts(kNumRelations, 0.0);
  for (const auto &[id, truth] : corpus.truth) ++counts[static_cast<int>(truth.relation)];
  for (int k = 0; k < kNumRelations; ++k) {
    CHECK(std::fabs(counts[k] / 10000.0 - config.relation_mix[k]) <= 0.02);
  }
}

TEST_CASE("mix validation") {
  SynthConfig config;
  config.class_mix.fill(0.0);
  config.class_mix[0] = 0.9;
  CHECK_THROWS_AS(ValidateSynthConfig(config), ConfigError);
  SynthConfig rates;
  rates.noise_rate = 1.5;
  CHECK_THROWS_AS(ValidateSynthConfig(rates), ConfigError);
}

TEST_CASE("ground truth sidecar round-trips") {
  SynthConfig config;
  config.n_records = 50;
  SynthCorpus corpus = GenerateCorpus(config, TestLexicon());
  std::ostringstream out;
  out << "# header comment\n";
  WriteGroundTruth(out, corpus);
  std::istringstream in(out.str());
  auto truth = ReadGroundTruth(in);
  REQUIRE(truth.size() == corpus.truth.size());
  for (const auto &[id, t] : corpus.truth) {
    CHECK(truth.at(id).relation == t.relation);
    CHECK(truth.at(id).department == t.department);
  }
}

TEST_CASE("iso dates") {
  CHECK(Date{2020, 2, 29}.ToIso() == "2020-02-29");
  CHECK(Date::ParseIso("2020-02-29").has_value());
  CHECK_FALSE(Date::ParseIso("2019-02-29").has_value());
  CHECK_FALSE(Date::ParseIso("2019-13-01").has_value());
}

}  // namespace
}  // namespace svctriage
