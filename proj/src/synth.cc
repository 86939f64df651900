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
#include <cmath>
#include <cstdio>

#include "svctriage/common.h"
#include "svctriage/corpus.h"
#include "svctriage/lexicon.h"

namespace svctriage {

namespace {

// Signature terms per department, in catalogue order. No term of one
// department is a word subsequence of another department's term.
const std::vector<std::vector<std::string>> &TermBanks() {
  static const std::vector<std::vector<std::string>> kBanks = {
      /* Controls */ {"upper control", "control valve", "upper valve", "joystick",
                      "control handle", "lever"},
      /* Vague */ {"customer request", "special request", "misc item", "unknown issue",
                   "general concern"},
      /* Harness */ {"harness", "connector", "wire", "pigtail", "terminal", "plug"},
      /* Hydraulics */ {"hydraulic leak", "hose", "pump", "hydraulic oil", "filter",
                        "reservoir"},
      /* PTO */ {"pto", "pto shaft", "clutch", "pto switch", "shift cable", "driveline"},
      /* Boom */ {"boom", "boom function", "upper boom", "boom tip", "jib", "cylinder"},
      /* Maintenance */ {"pm inspection", "annual pm", "grease", "lube", "oil change"},
      /* Test */ {"dielectric test", "load test", "insulation", "certification",
                  "leakage current"},
      /* Rotation */ {"rotation gearbox", "turntable", "rotation bearing", "swing motor",
                      "below rotation valve"},
      /* Auger */ {"auger", "auger motor", "auger teeth", "kelly bar", "pilot bit"},
      /* Outrigger */ {"outrigger", "outrigger pad", "stabilizer", "outrigger leg",
                       "interlock"},
      /* Digger */ {"digger", "pole guide", "pole", "winch", "winch rope", "derrick"},
      /* Body */ {"compartment", "door", "hinge", "latch", "tailgate", "toolbox"},
      /* Chassis */ {"chassis", "frame", "tire", "brake", "axle", "transmission"},
      /* Electronics */ {"sensor", "display", "module", "radio remote", "fuse", "light"},
      /* Resale */ {"resale", "resale prep", "decal", "cleanup", "touch up", "buyer"},
  };
  return kBanks;
}

const std::vector<std::string> kActions = {
    "replaced",  "inspected", "adjusted", "cleaned",  "installed new",
    "repaired",  "checked",   "tightened", "removed and replaced",
    "found damaged", "rebuilt", "serviced"};

const std::vector<std::string> kFillers = {
    "area", "bolts", "as needed", "per spec", "system pressure", "gasket",
    "seal", "bracket", "mounting bolts", "transfer pin", "and verified"};

const std::vector<std::string> kComplaints = {
    "leaking", "not working", "broken", "stuck", "making noise", "damaged",
    "cracked", "slow", "failed", "needs repair", "bad"};

const std::vector<std::string> kVagueLogs = {
    "service needed", "unit failed", "needs service", "inoperable",
    "customer called", "see notes", "no info"};

const std::vector<std::string> kCompanies = {
    "Valley Electric Coop", "North Line Services", "Summit Utility", "Metro Tree Care",
    "Coastal Power", "Prairie Telecom", "Ridge Construction", "Lakeside Municipal"};

// Renders words with abbreviation substitution and misspellings.
class NoiseModel {
 public:
  NoiseModel(const SynthConfig &config, const Lexicon &lexicon, Rng &rng)
      : config_(config), lexicon_(lexicon), rng_(rng) {}

  std::string Render(const std::string &phrase) {
    std::vector<std::string> words = SplitWhitespace(phrase);
    for (std::string &w : words) w = RenderWord(w);
    return Join(words, " ");
  }

 private:
  std::string RenderWord(std::string word) {
    bool alpha = std::all_of(word.begin(), word.end(),
                             [](char c) { return c >= 'a' && c <= 'z'; });
    if (!alpha) return word;
    // Both draws happen for every word so the stream stays aligned across
    // configurations that differ only in rates.
    double u_abbrev = rng_.Uniform();
    double u_noise = rng_.Uniform();
    if (u_abbrev < config_.abbreviation_rate) {
      auto forms = lexicon_.AbbreviationsOf(word);
      if (!forms.empty()) word = rng_.Pick(forms);
    }
    if (u_noise < config_.noise_rate && word.size() >= 4) {
      size_t pos = rng_.Below(word.size() - 1);
      if (rng_.Bernoulli(0.5)) {
        word.erase(pos, 1);
      } else {
        std::swap(word[pos], word[pos + 1]);
      }
    }
    return word;
  }

  const SynthConfig &config_;
  const Lexicon &lexicon_;
  Rng &rng_;
};

std::string UnitNumber(Rng &rng) {
  return std::to_string(1000 + rng.Below(99000));
}

std::string MakeCallLog(Department dept, Rng &rng) {
  const auto &bank = TermBanks()[DepartmentIndex(dept)];
  std::string log = rng.Pick(bank);
  if (rng.Bernoulli(0.3)) log += " and " + rng.Pick(bank);
  log += " " + rng.Pick(kComplaints);
  if (rng.Bernoulli(0.3)) log = UnitNumber(rng) + "-" + log;
  return log;
}

std::vector<std::string> MakeTasks(Department dept, Rng &rng) {
  const auto &bank = TermBanks()[DepartmentIndex(dept)];
  size_t n_tasks = 2 + rng.Below(3);
  std::vector<std::string> terms = bank;
  rng.Shuffle(terms);
  std::vector<std::string> tasks;
  for (size_t t = 0; t < n_tasks; ++t) {
    const std::string &term = terms[t % terms.size()];
    std::string task;
    switch (rng.Below(3)) {
      case 0:
        task = rng.Pick(kActions) + " " + term;
        break;
      case 1:
        task = term + " " + rng.Pick(kActions);
        break;
      default:
        task = rng.Pick(kActions) + " " + term + " " + rng.Pick(kFillers);
        break;
    }
    if (rng.Bernoulli(0.15)) {
      char pn[24];
      std::snprintf(pn, sizeof(pn), " pn%010llu",
                    static_cast<unsigned long long>(rng.Below(10000000000ULL)));
      task += pn;
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::string JoinTasks(const std::vector<std::string> &tasks, Rng &rng) {
  std::string out;
  if (rng.Bernoulli(0.3)) out = "--";
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (i > 0) {
      switch (rng.Below(3)) {
        case 0: out += "--"; break;
        case 1: out += " -- "; break;
        default: out += "\n"; break;
      }
    }
    out += tasks[i];
  }
  return out;
}

void CheckMix(std::span<const double> mix, const char *field) {
  double total = 0.0;
  for (double p : mix) {
    if (!std::isfinite(p) || p < 0) {
      throw ConfigError(std::string(field) + ": proportions must be non-negative");
    }
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ConfigError(std::string(field) + ": proportions sum to " + FormatDouble(total) +
                      ", expected 1");
  }
}

}  // namespace

const std::vector<std::string> &DepartmentSignatureTerms(Department department) {
  return TermBanks()[DepartmentIndex(department)];
}

std::optional<Department> KeywordLookup(std::string_view text) {
  std::vector<std::string> words;
  std::string lower = ToLower(text);
  std::string current;
  for (char c : lower) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      current.push_back(c);
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(current);
  int best = -1;
  size_t best_hits = 0;
  for (int d = 0; d < kNumDepartments; ++d) {
    size_t hits = 0;
    for (const std::string &term : TermBanks()[d]) {
      std::vector<std::string> tw = SplitWhitespace(term);
      for (size_t i = 0; i + tw.size() <= words.size(); ++i) {
        if (std::equal(tw.begin(), tw.end(), words.begin() + i)) ++hits;
      }
    }
    if (hits > best_hits) {
      best_hits = hits;
      best = d;
    }
  }
  if (best < 0) return std::nullopt;
  return DepartmentFromIndex(best);
}

void ValidateSynthConfig(const SynthConfig &config) {
  CheckMix(config.class_mix, "class_mix");
  CheckMix(config.relation_mix, "relation_mix");
  if (!(config.noise_rate >= 0.0 && config.noise_rate <= 1.0)) {
    throw ConfigError("noise_rate: must be in [0, 1]");
  }
  if (!(config.abbreviation_rate >= 0.0 && config.abbreviation_rate <= 1.0)) {
    throw ConfigError("abbreviation_rate: must be in [0, 1]");
  }
}

SynthCorpus GenerateCorpus(const SynthConfig &config, const Lexicon &lexicon) {
  ValidateSynthConfig(config);
  Rng rng(DeriveSeed(config.seed, "corpus"));
  NoiseModel noise(config, lexicon, rng);
  std::vector<double> class_mix(config.class_mix.begin(), config.class_mix.end());
  std::vector<double> relation_mix(config.relation_mix.begin(), config.relation_mix.end());

  SynthCorpus corpus;
  corpus.records.reserve(config.n_records);
  for (size_t i = 0; i < config.n_records; ++i) {
    ServiceRecord r;
    char id[16];
    std::snprintf(id, sizeof(id), "SR%07zu", i + 1);
    r.id = id;
    Relation relation = static_cast<Relation>(rng.Categorical(relation_mix));
    Department dept = DepartmentFromIndex(static_cast<int>(rng.Categorical(class_mix)));

    std::vector<std::string> tasks = MakeTasks(dept, rng);
    for (std::string &t : tasks) t = noise.Render(t);
    r.detail = JoinTasks(tasks, rng);

    switch (relation) {
      case Relation::kValid:
        r.call_log = noise.Render(MakeCallLog(dept, rng));
        break;
      case Relation::kFalse: {
        int other = static_cast<int>(rng.Below(kNumDepartments - 1));
        if (other >= DepartmentIndex(dept)) ++other;
        r.call_log = noise.Render(MakeCallLog(DepartmentFromIndex(other), rng));
        break;
      }
      case Relation::kVague:
        if (rng.Bernoulli(0.5)) {
          std::string log = rng.Pick(kVagueLogs);
          if (rng.Bernoulli(0.3)) log = UnitNumber(rng) + "-" + log;
          r.call_log = log;
        }
        break;
    }
    r.relation = relation;
    r.department = dept;
    r.age_months = static_cast<int>(rng.Below(240));
    r.zip = std::to_string(10000 + rng.Below(90000));
    r.company = rng.Pick(kCompanies);
    r.failure_date.year = 2015 + static_cast<int>(rng.Below(6));
    r.failure_date.month = 1 + static_cast<int>(rng.Below(12));
    r.failure_date.day = 1 + static_cast<int>(rng.Below(28));
    r.runtime_hours = std::round(rng.Uniform(0.0, 20000.0) * 10.0) / 10.0;
    r.ownership = static_cast<Ownership>(rng.Below(3));
    r.months_since_service = std::round(rng.Uniform(0.0, 36.0) * 10.0) / 10.0;
    char op[16];
    std::snprintf(op, sizeof(op), "op%03llu", static_cast<unsigned long long>(rng.Below(200)));
    r.operator_id = op;

    corpus.truth[r.id] = {relation, dept};
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

}  // namespace svctriage
