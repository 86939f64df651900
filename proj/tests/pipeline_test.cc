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


#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "svctriage/common.h"
#include "svctriage/lexicon.h"
#include "svctriage/pipeline.h"

namespace svctriage {
namespace {

namespace fs = std::filesystem;

const std::string kData = SVCTRIAGE_DATA_DIR;

// Small enough to train in well under a second per run.
PipelineConfig SmallConfig() {
  PipelineConfig c = PipelineConfig::Load(kData + "/desk.json");
  c.net.seq_len = 16;
  c.net.embed_dim = 8;
  c.net.filters_per_size = 4;
  c.net.lstm_hidden = 4;
  c.net.dense_hidden = 8;
  c.net.epochs = 2;
  c.router.gtb.n_stages = 10;
  c.synth.n_records = 200;
  return c;
}

SynthCorpus SmallCorpus(const PipelineConfig &c) {
  return GenerateCorpus(c.SeededSynth(), Lexicon::Load(c.lexicon_path));
}

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path TempDir(const std::string &name) {
  fs::path p = fs::temp_directory_path() / ("svctriage_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

TEST_CASE("config paths resolve against the config file's directory") {
  PipelineConfig c = PipelineConfig::Load(kData + "/desk.json");
  CHECK(fs::equivalent(c.lexicon_path, kData + "/lexicon.txt"));
  CHECK(fs::equivalent(c.weights_path, kData + "/department_weights.txt"));
  CHECK(c.net.seq_len == 24);
}

TEST_CASE("unknown config keys are rejected with their location") {
  auto reject = [](const nlohmann::json &j, const std::string &needle) {
    try {
      PipelineConfig::FromJson(j, kData);
      FAIL("accepted " << j.dump());
    } catch (const ConfigError &e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  reject({{"sede", 3}}, "sede");
  reject({{"validator", {{"epoch", 3}}}}, "validator");
  reject({{"router", {{"kind", "svm"}, {"svm", {{"lambda", 1}}}}}}, "router.svm");
  reject({{"router", {{"kind", "knn"}}}}, "router.kind");
  reject({{"validator", {{"junction", "diagonal"}}}}, "validator.junction");
  reject({{"folds", 1}}, "folds");
  reject({{"synth", {{"class_mix", {{"Boom", 0.9}}}}}}, "class_mix");
}

TEST_CASE("config json round-trips") {
  PipelineConfig c = SmallConfig();
  c.router_kind = RouterKind::kSvm;
  c.net.junction = Junction::kPooledVector;
  c.synth.relation_mix = {0.5, 0.25, 0.25};
  PipelineConfig back = PipelineConfig::FromJson(c.ToJson());
  CHECK(back.ToJson() == c.ToJson());
  CHECK(ConfigFingerprint(back) == ConfigFingerprint(c));
}

TEST_CASE("fingerprint follows content, not paths") {
  PipelineConfig a = SmallConfig();
  PipelineConfig b = a;
  b.seed = a.seed + 1;
  CHECK(ConfigFingerprint(a) != ConfigFingerprint(b));

  fs::path dir = TempDir("fp");
  fs::create_directories(dir);
  fs::copy_file(a.lexicon_path, dir / "lexicon.txt");
  fs::copy_file(a.weights_path, dir / "department_weights.txt");
  PipelineConfig moved = a;
  moved.lexicon_path = (dir / "lexicon.txt").string();
  moved.weights_path = (dir / "department_weights.txt").string();
  CHECK(ConfigFingerprint(moved) == ConfigFingerprint(a));

  std::ofstream(dir / "lexicon.txt", std::ios::app) << "\n# edited\n";
  CHECK(ConfigFingerprint(moved) != ConfigFingerprint(a));
  fs::remove_all(dir);
}

TEST_CASE("named seeds differ per stage") {
  PipelineConfig c = SmallConfig();
  CHECK(c.SeededNet().seed != c.SeededRouter().forest.seed);
  CHECK(c.SeededSynth().seed != c.SeededNet().seed);
  CHECK(c.FoldSeed() != c.SeededSynth().seed);
}

TEST_CASE("routing labels") {
  ServiceRecord valid, fals, vague_dept, unlabeled;
  valid.relation = Relation::kValid;
  valid.department = Department::kBoom;
  fals.relation = Relation::kFalse;
  fals.department = Department::kControls;
  vague_dept.relation = Relation::kValid;
  vague_dept.department = Department::kVague;
  unlabeled.relation = Relation::kValid;
  std::vector<ServiceRecord> rs{valid, fals, vague_dept, unlabeled};

  PipelineConfig c;
  std::vector<int> on = RoutingLabels(rs, c);
  CHECK(on == std::vector<int>{DepartmentIndex(Department::kBoom), -1, -1, -1});

  c.validation = false;
  std::vector<int> off = RoutingLabels(rs, c);
  CHECK(off == std::vector<int>{DepartmentIndex(Department::kBoom),
                                DepartmentIndex(Department::kControls), -1, -1});

  c.include_vague_department = true;
  CHECK(RoutingLabels(rs, c)[2] == DepartmentIndex(Department::kVague));
  CHECK(RelationLabels(rs) == std::vector<int>{0, 1, 0, 0});
}

TEST_CASE("training needs routable records") {
  PipelineConfig c = SmallConfig();
  std::vector<ServiceRecord> none;
  CHECK_THROWS_AS(TrainPipeline(c, none), DataError);

  SynthCorpus corpus = SmallCorpus(c);
  corpus.records[0].relation.reset();
  CHECK_THROWS_AS(TrainPipeline(c, corpus.records), DataError);
  c.validation = false;
  CHECK_NOTHROW(TrainPipeline(c, corpus.records));
}

TEST_CASE("train, save, load, route") {
  PipelineConfig c = SmallConfig();
  SynthCorpus corpus = SmallCorpus(c);
  TrainedPipeline model = TrainPipeline(c, corpus.records);
  REQUIRE(model.validator.has_value());
  CHECK(model.fingerprint == ConfigFingerprint(c));
  CHECK(model.history.size() == c.net.epochs);

  fs::path dir = TempDir("model");
  model.Save(dir.string());
  TrainedPipeline loaded = TrainedPipeline::Load(dir.string());
  Featurizer featurizer(c);
  for (size_t i = 0; i < 40; ++i) {
    const ServiceRecord &r = corpus.records[i];
    RoutingDecision a = Route(model, featurizer, r);
    RoutingDecision b = Route(loaded, featurizer, r);
    CHECK(a.ToJson() == b.ToJson());
    CHECK(a.id == r.id);
    CHECK(a.relation_probs.size() == kNumRelations);
    if (a.verdict == "Valid") {
      REQUIRE(a.department.has_value());
      CHECK(a.department_scores.size() == static_cast<size_t>(kNumDepartments));
    } else {
      CHECK_FALSE(a.department.has_value());
      CHECK(a.department_scores.empty());
    }
  }

  SUBCASE("a tampered vocabulary is caught") {
    std::ofstream(dir / "vocabulary.tsv", std::ios::app) << "zzz\t1\n";
    CHECK_THROWS_AS(TrainedPipeline::Load(dir.string()), DataError);
  }
  SUBCASE("a missing manifest is caught") {
    fs::remove(dir / "manifest.json");
    CHECK_THROWS_AS(TrainedPipeline::Load(dir.string()), DataError);
  }
  fs::remove_all(dir);
}

TEST_CASE("without validation every decision is routed") {
  PipelineConfig c = SmallConfig();
  c.validation = false;
  SynthCorpus corpus = SmallCorpus(c);
  TrainedPipeline model = TrainPipeline(c, corpus.records);
  CHECK_FALSE(model.validator.has_value());
  Featurizer featurizer(c);
  for (size_t i = 0; i < 20; ++i) {
    RoutingDecision d = Route(model, featurizer, corpus.records[i]);
    CHECK(d.verdict == "Valid");
    CHECK(d.relation_probs.empty());
    CHECK(d.department.has_value());
  }
  fs::path dir = TempDir("noval");
  model.Save(dir.string());
  CHECK_FALSE(fs::exists(dir / "validator.model"));
  CHECK_FALSE(TrainedPipeline::Load(dir.string()).validator.has_value());
  fs::remove_all(dir);
}

TEST_CASE("two runs write byte-identical artifacts") {
  PipelineConfig c = SmallConfig();
  SynthCorpus corpus = SmallCorpus(c);
  fs::path a = TempDir("det_a"), b = TempDir("det_b");
  TrainPipeline(c, corpus.records).Save(a.string());
  TrainPipeline(c, corpus.records).Save(b.string());
  for (const char *f : {"manifest.json", "validator.model", "router.model", "vocabulary.tsv",
                        "history.tsv"}) {
    CHECK_MESSAGE(Slurp(a / f) == Slurp(b / f), f);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("evaluation folds partition the records") {
  PipelineConfig c = SmallConfig();
  c.folds = 4;
  SynthCorpus corpus = SmallCorpus(c);
  EvaluationReports reports = Evaluate(c, corpus.records);
  REQUIRE(reports.validation.has_value());
  CHECK(reports.validation->folds.size() == 4);
  CHECK(reports.validation->total.Total() == corpus.records.size());
  size_t routable = 0;
  for (int l : RoutingLabels(corpus.records, c)) routable += l >= 0;
  CHECK(reports.routing.folds.size() == 4);
  CHECK(reports.routing.total.Total() == routable);

  c.validation = false;
  EvaluationReports off = Evaluate(c, corpus.records);
  CHECK_FALSE(off.validation.has_value());
  size_t with_dept = 0;
  for (const auto &r : corpus.records) {
    with_dept += r.department && *r.department != Department::kVague;
  }
  CHECK(off.routing.total.Total() == with_dept);
  CHECK(off.routing.total.Total() > routable);
}

TEST_CASE("decision serialization") {
  RoutingDecision d;
  d.id = "R1";
  d.verdict = "Vague";
  d.relation_probs = {0.1, 0.2, 0.7};
  d.fingerprint = "abc";
  auto j = d.ToJson();
  CHECK(j["id"] == "R1");
  CHECK(j["verdict"] == "Vague");
  CHECK(j["department"].is_null());
  CHECK(d.ToText().find("R1") != std::string::npos);
}

}  // namespace
}  // namespace svctriage
