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

#include "svctriage/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"
#include "svctriage/common.h"

namespace svctriage {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "Valid", "False", "Vague"};

constexpr std::array<std::string_view, kNumDepartments> kDepartmentNames = {
    "Controls",    "Vague",    "Harness", "Hydraulics",  "PTO",
    "Boom",        "Maintenance", "Test", "Rotation",    "Auger",
    "Outrigger",   "Digger",   "Body",    "Chassis",     "Electronics",
    "Resale"};

constexpr std::array<std::string_view, 3> kOwnershipNames = {
    "rented", "leased", "purchased"};

constexpr std::array<std::string_view, 13> kRecordKeys = {
    "id",      "call_log",     "detail",        "relation",
    "department", "age_months", "zip",          "company",
    "failure_date", "runtime_hours", "ownership", "months_since_service",
    "operator_id"};

bool IsLeap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int DaysInMonth(int y, int m) {
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && IsLeap(y) ? 29 : kDays[m - 1];
}

const Json &Field(const Json &obj, std::string_view key) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw DataError("missing key '" + std::string(key) + "'");
  return *it;
}

std::string StringField(const Json &obj, std::string_view key) {
  const Json &v = Field(obj, key);
  if (!v.is_string()) throw DataError("key '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

double NumberField(const Json &obj, std::string_view key) {
  const Json &v = Field(obj, key);
  if (!v.is_number()) throw DataError("key '" + std::string(key) + "' must be a number");
  double x = v.get<double>();
  if (!std::isfinite(x) || x < 0) {
    throw DataError("key '" + std::string(key) + "' must be a non-negative number");
  }
  return x;
}

}  // namespace

std::string_view RelationName(Relation relation) {
  return kRelationNames[static_cast<int>(relation)];
}

std::optional<Relation> ParseRelation(std::string_view name) {
  for (int i = 0; i < kNumRelations; ++i) {
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  }
  // Annotation spelling used in the raw service data.
  for (int i = 0; i < kNumRelations; ++i) {
    if (std::string(kRelationNames[i]) + " claim" == name) {
      return static_cast<Relation>(i);
    }
  }
  return std::nullopt;
}

std::string_view DepartmentName(Department department) {
  return kDepartmentNames[static_cast<int>(department)];
}

std::optional<Department> ParseDepartment(std::string_view name) {
  for (int i = 0; i < kNumDepartments; ++i) {
    if (kDepartmentNames[i] == name) return static_cast<Department>(i);
  }
  return std::nullopt;
}

std::string_view OwnershipName(Ownership ownership) {
  return kOwnershipNames[static_cast<int>(ownership)];
}

std::optional<Ownership> ParseOwnership(std::string_view name) {
  for (size_t i = 0; i < kOwnershipNames.size(); ++i) {
    if (kOwnershipNames[i] == name) return static_cast<Ownership>(i);
  }
  return std::nullopt;
}

std::string Date::ToIso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::optional<Date> Date::ParseIso(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!IsAllDigits(text.substr(0, 4)) || !IsAllDigits(text.substr(5, 2)) ||
      !IsAllDigits(text.substr(8, 2))) {
    return std::nullopt;
  }
  Date d;
  d.year = std::stoi(std::string(text.substr(0, 4)));
  d.month = std::stoi(std::string(text.substr(5, 2)));
  d.day = std::stoi(std::string(text.substr(8, 2)));
  if (d.month < 1 || d.month > 12) return std::nullopt;
  if (d.day < 1 || d.day > DaysInMonth(d.year, d.month)) return std::nullopt;
  return d;
}

std::string CheckRecord(const ServiceRecord &record) {
  if (record.id.empty()) return "empty id";
  if (record.relation.has_value()) {
    if (record.detail.empty()) return "labeled record with empty detail";
    if (record.call_log.empty() && *record.relation != Relation::kVague) {
      return "empty call_log is only allowed for Vague records";
    }
    if (*record.relation == Relation::kValid && !record.department.has_value()) {
      return "Valid record without a department";
    }
  }
  if (record.zip.size() != 5 || !IsAllDigits(record.zip)) return "zip must be 5 digits";
  if (record.age_months < 0) return "negative age_months";
  return "";
}

std::string SerializeRecord(const ServiceRecord &r) {
  Json obj;
  obj["id"] = r.id;
  obj["call_log"] = r.call_log;
  obj["detail"] = r.detail;
  obj["relation"] = r.relation ? std::string(RelationName(*r.relation)) : "";
  obj["department"] = r.department ? std::string(DepartmentName(*r.department)) : "";
  obj["age_months"] = r.age_months;
  obj["zip"] = r.zip;
  obj["company"] = r.company;
  obj["failure_date"] = r.failure_date.ToIso();
  obj["runtime_hours"] = r.runtime_hours;
  obj["ownership"] = std::string(OwnershipName(r.ownership));
  obj["months_since_service"] = r.months_since_service;
  obj["operator_id"] = r.operator_id;
  return obj.dump();
}

void WriteRecords(std::ostream &out, std::span<const ServiceRecord> records) {
  for (const auto &r : records) out << SerializeRecord(r) << '\n';
}

ServiceRecord ParseRecordLine(std::string_view line) {
  Json obj;
  try {
    obj = Json::parse(line);
  } catch (const nlohmann::json::parse_error &e) {
    throw DataError(std::string("not a JSON object: ") + e.what());
  }
  if (!obj.is_object()) throw DataError("not a JSON object");
  for (const auto &item : obj.items()) {
    if (std::find(kRecordKeys.begin(), kRecordKeys.end(), item.key()) == kRecordKeys.end()) {
      throw DataError("unknown key '" + item.key() + "'");
    }
  }
  ServiceRecord r;
  r.id = StringField(obj, "id");
  r.call_log = StringField(obj, "call_log");
  r.detail = StringField(obj, "detail");
  std::string relation = StringField(obj, "relation");
  if (!relation.empty()) {
    r.relation = ParseRelation(relation);
    if (!r.relation) throw DataError("unknown relation '" + relation + "'");
  }
  std::string department = StringField(obj, "department");
  if (!department.empty()) {
    r.department = ParseDepartment(department);
    if (!r.department) {
      throw DataError("unknown department '" + department +
                      "' (not one of the 16 service departments)");
    }
  }
  const Json &age = Field(obj, "age_months");
  if (!age.is_number_integer() || age.get<int64_t>() < 0) {
    throw DataError("key 'age_months' must be a non-negative integer");
  }
  r.age_months = age.get<int>();
  r.zip = StringField(obj, "zip");
  r.company = StringField(obj, "company");
  std::string date = StringField(obj, "failure_date");
  auto parsed_date = Date::ParseIso(date);
  if (!parsed_date) throw DataError("bad failure_date '" + date + "'");
  r.failure_date = *parsed_date;
  r.runtime_hours = NumberField(obj, "runtime_hours");
  std::string ownership = StringField(obj, "ownership");
  auto parsed_ownership = ParseOwnership(ownership);
  if (!parsed_ownership) throw DataError("unknown ownership '" + ownership + "'");
  r.ownership = *parsed_ownership;
  r.months_since_service = NumberField(obj, "months_since_service");
  r.operator_id = StringField(obj, "operator_id");
  std::string problem = CheckRecord(r);
  if (!problem.empty()) throw DataError(problem);
  return r;
}

ParseResult ParseRecords(std::istream &in) {
  ParseResult result;
  std::set<std::string> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      ServiceRecord r = ParseRecordLine(line);
      if (!seen.insert(r.id).second) throw DataError("duplicate id '" + r.id + "'");
      result.records.push_back(std::move(r));
    } catch (const DataError &e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  return result;
}

std::vector<size_t> FoldAssignment::TestIndices(int fold) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<size_t> FoldAssignment::TrainIndices(int fold) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

FoldAssignment SplitFolds(std::span<const ServiceRecord> records, int k,
                          uint64_t seed) {
  if (k < 2) throw ConfigError("folds: k must be at least 2");
  if (static_cast<size_t>(k) > records.size()) {
    throw ConfigError("folds: k=" + std::to_string(k) + " exceeds record count " +
                      std::to_string(records.size()));
  }
  // Strata: one per department plus one for unlabeled records.
  std::vector<std::vector<size_t>> strata(kNumDepartments + 1);
  for (size_t i = 0; i < records.size(); ++i) {
    int s = records[i].department ? DepartmentIndex(*records[i].department)
                                  : kNumDepartments;
    strata[s].push_back(i);
  }
  Rng rng(seed);
  FoldAssignment folds;
  folds.k = k;
  folds.fold_of.assign(records.size(), -1);
  // Dealing round-robin with one running counter keeps both the total fold
  // sizes and each stratum's per-fold counts within one of each other.
  size_t counter = 0;
  for (auto &stratum : strata) {
    rng.Shuffle(stratum);
    for (size_t idx : stratum) {
      int fold = static_cast<int>(counter++ % k);
      folds.fold_of[idx] = fold;
      folds.mapping[records[idx].id] = fold;
    }
  }
  return folds;
}

void WriteGroundTruth(std::ostream &out, const SynthCorpus &corpus) {
  for (const auto &r : corpus.records) {
    const GroundTruth &t = corpus.truth.at(r.id);
    out << r.id << '\t' << RelationName(t.relation) << '\t'
        << DepartmentName(t.department) << '\n';
  }
}

std::map<std::string, GroundTruth> ReadGroundTruth(std::istream &in) {
  std::map<std::string, GroundTruth> truth;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    size_t start = 0;
    for (size_t pos; (pos = line.find('\t', start)) != std::string::npos; start = pos + 1) {
      cols.push_back(line.substr(start, pos - start));
    }
    cols.push_back(line.substr(start));
    auto relation = cols.size() == 3 ? ParseRelation(cols[1]) : std::nullopt;
    auto department = cols.size() == 3 ? ParseDepartment(cols[2]) : std::nullopt;
    if (!relation || !department) {
      throw DataError("ground truth line " + std::to_string(line_no) + " is malformed");
    }
    truth[cols[0]] = {*relation, *department};
  }
  return truth;
}

}  // namespace svctriage
