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

#ifndef SVCTRIAGE_CORPUS_H_
#define SVCTRIAGE_CORPUS_H_

// Service-record data model, record files, cross-validation folds and the
// seeded synthetic corpus generator.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace svctriage {

class Lexicon;

enum class Relation { kValid = 0, kFalse = 1, kVague = 2 };
inline constexpr int kNumRelations = 3;

// The 16 service departments, in their catalogue order.
enum class Department {
  kControls = 0,
  kVague,
  kHarness,
  kHydraulics,
  kPto,
  kBoom,
  kMaintenance,
  kTest,
  kRotation,
  kAuger,
  kOutrigger,
  kDigger,
  kBody,
  kChassis,
  kElectronics,
  kResale,
};
inline constexpr int kNumDepartments = 16;

enum class Ownership { kRented = 0, kLeased, kPurchased };

std::string_view RelationName(Relation relation);
std::optional<Relation> ParseRelation(std::string_view name);
std::string_view DepartmentName(Department department);
std::optional<Department> ParseDepartment(std::string_view name);
std::string_view OwnershipName(Ownership ownership);
std::optional<Ownership> ParseOwnership(std::string_view name);

inline Department DepartmentFromIndex(int index) {
  return static_cast<Department>(index);
}
inline int DepartmentIndex(Department department) {
  return static_cast<int>(department);
}

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  std::string ToIso() const;
  static std::optional<Date> ParseIso(std::string_view text);
  bool operator==(const Date &) const = default;
};

struct ServiceRecord {
  std::string id;
  std::string call_log;
  std::string detail;
  std::optional<Relation> relation;
  std::optional<Department> department;
  int age_months = 0;
  std::string zip = "00000";
  std::string company;
  Date failure_date;
  double runtime_hours = 0.0;
  Ownership ownership = Ownership::kPurchased;
  double months_since_service = 0.0;
  std::string operator_id;

  bool operator==(const ServiceRecord &) const = default;
};

// Checks the labeled-record invariants. Returns an empty string when valid.
std::string CheckRecord(const ServiceRecord &record);

// Record files hold one JSON object per line.
std::string SerializeRecord(const ServiceRecord &record);
void WriteRecords(std::ostream &out, std::span<const ServiceRecord> records);

// Parses a single record line. Throws DataError with a reason on failure.
ServiceRecord ParseRecordLine(std::string_view line);

struct LineError {
  size_t line = 0;  // 1-based
  std::string message;
};

struct ParseResult {
  std::vector<ServiceRecord> records;
  std::vector<LineError> errors;
};

// Parses every line; blank lines are skipped, bad lines are reported and the
// rest of the stream is still read.
ParseResult ParseRecords(std::istream &in);

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> mapping;  // record id -> fold
  std::vector<int> fold_of;            // aligned with the input records

  // Record indices of one fold, in input order.
  std::vector<size_t> TestIndices(int fold) const;
  std::vector<size_t> TrainIndices(int fold) const;
};

// Stratified by department (unlabeled records form their own stratum).
// Throws ConfigError when k < 2 or k exceeds the record count.
FoldAssignment SplitFolds(std::span<const ServiceRecord> records, int k,
                          uint64_t seed);

struct SynthConfig {
  size_t n_records = 1000;
  uint64_t seed = 1;
  std::array<double, kNumDepartments> class_mix;
  std::array<double, kNumRelations> relation_mix{0.6, 0.2, 0.2};
  double noise_rate = 0.0;
  double abbreviation_rate = 0.0;

  SynthConfig() { class_mix.fill(1.0 / kNumDepartments); }
};

// Throws ConfigError naming the field that is out of range.
void ValidateSynthConfig(const SynthConfig &config);

struct GroundTruth {
  Relation relation;
  Department department;
};

struct SynthCorpus {
  std::vector<ServiceRecord> records;
  std::map<std::string, GroundTruth> truth;
};

// Deterministic for a fixed config. Abbreviated renderings are drawn from
// the lexicon's abbreviation map.
SynthCorpus GenerateCorpus(const SynthConfig &config, const Lexicon &lexicon);

// Sidecar: "id<TAB>relation<TAB>department" per line, in record order.
void WriteGroundTruth(std::ostream &out, const SynthCorpus &corpus);
std::map<std::string, GroundTruth> ReadGroundTruth(std::istream &in);

// Canonical signature terms the generator uses for a department.
const std::vector<std::string> &DepartmentSignatureTerms(Department department);

// Department whose signature terms occur most often in `text` (canonical,
// lowercased word sequences); ties go to the lowest index. Returns nullopt
// when no term occurs.
std::optional<Department> KeywordLookup(std::string_view text);

}  // namespace svctriage

#endif  // SVCTRIAGE_CORPUS_H_
