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

// Command-line front end: synth, train, eval, route, inspect-lexicon.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data, 3 numeric.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "svctriage/common.h"
#include "svctriage/corpus.h"
#include "svctriage/lexicon.h"
#include "svctriage/metrics.h"
#include "svctriage/pipeline.h"

namespace {

using namespace svctriage;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  bool ablate = false;
  bool no_validation = false;
  std::string out;
  std::string format = "text";
};

PipelineConfig LoadConfig(const CommonOptions &o) {
  PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : PipelineConfig::Load(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.ablate) c.domain_nlp = false;
  if (o.no_validation) c.validation = false;
  c.Validate();
  return c;
}

std::vector<ServiceRecord> ReadCorpus(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus " + path);
  ParseResult parsed = ParseRecords(in);
  if (!parsed.errors.empty()) {
    std::ostringstream msg;
    msg << path << ": " << parsed.errors.size() << " malformed line(s)";
    for (size_t i = 0; i < std::min<size_t>(parsed.errors.size(), 5); ++i) {
      msg << "\n  line " << parsed.errors[i].line << ": " << parsed.errors[i].message;
    }
    throw DataError(msg.str());
  }
  return std::move(parsed.records);
}

int CmdSynth(const CommonOptions &o, std::optional<size_t> n_records) {
  PipelineConfig config = LoadConfig(o);
  SynthConfig synth = config.SeededSynth();
  if (n_records) synth.n_records = *n_records;
  ValidateSynthConfig(synth);
  Lexicon lexicon = Lexicon::Load(config.lexicon_path);
  SynthCorpus corpus = GenerateCorpus(synth, lexicon);
  const std::string fingerprint = ConfigFingerprint(config);
  fs::create_directories(o.out);
  std::ostringstream records, truth;
  WriteRecords(records, corpus.records);
  truth << "# fingerprint " << fingerprint << " seed " << config.seed << "\n";
  WriteGroundTruth(truth, corpus);
  WriteFileAtomic((fs::path(o.out) / "corpus.jsonl").string(), records.str());
  WriteFileAtomic((fs::path(o.out) / "ground_truth.tsv").string(), truth.str());
  nlohmann::ordered_json manifest;
  manifest["fingerprint"] = fingerprint;
  manifest["seed"] = config.seed;
  manifest["n_records"] = synth.n_records;
  manifest["corpus_hash"] = HexDigest(Fnv1a64(records.str()));
  WriteFileAtomic((fs::path(o.out) / "synth_manifest.json").string(), manifest.dump(2) + "\n");
  std::cerr << "wrote " << corpus.records.size() << " records to " << o.out << "\n";
  return 0;
}

// Metrics of the trained models on their own training records.
std::string TrainingReport(const PipelineConfig &config, const TrainedPipeline &model,
                           const std::vector<ServiceRecord> &records) {
  Featurizer featurizer(config);
  ClassWeights weights = ClassWeights::Load(config.weights_path, DepartmentNames());
  std::vector<int> routing = RoutingLabels(records, config);
  ConfusionMatrix relation_conf(kNumRelations), route_conf(kNumDepartments);
  for (size_t i = 0; i < records.size(); ++i) {
    const ServiceRecord &r = records[i];
    if (model.validator && r.relation) {
      PairInput in = featurizer.ValidatorInput(r, model.validator->vocab());
      relation_conf.Add(static_cast<int>(*r.relation), ArgMax(model.validator->Predict(in)));
    }
    if (routing[i] >= 0) {
      Prediction p = model.router.Predict(Vectorize(featurizer.RoutingDocument(r),
                                                    model.routing_vocab).values);
      route_conf.Add(routing[i], p.label);
    }
  }
  std::ostringstream out;
  out << "# svctriage training report (training-set metrics, not held out)\n";
  out << "fingerprint\t" << model.fingerprint << "\nseed\t" << config.seed << "\n";
  out << "router\t" << RouterKindName(config.router_kind) << "\n";
  char buf[64];
  if (relation_conf.Total() > 0) {
    std::snprintf(buf, sizeof(buf), "%.6f", WeightedAccuracy(relation_conf,
                                                             ClassWeights::Uniform(kNumRelations)));
    out << "validation_training_accuracy\t" << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf), "%.6f", WeightedAccuracy(route_conf, weights));
  out << "routing_training_accuracy\t" << buf << "\n";
  out << "vocabulary_size\t" << model.routing_vocab.size() << "\n";
  for (size_t e = 0; e < model.history.size(); ++e) {
    out << "epoch" << e + 1 << "\ttrain_loss " << FormatDouble(model.history[e].train_loss)
        << "\tval_loss " << FormatDouble(model.history[e].val_loss) << "\n";
  }
  return out.str();
}

int CmdTrain(const CommonOptions &o, const std::string &corpus_path) {
  PipelineConfig config = LoadConfig(o);
  std::vector<ServiceRecord> records = ReadCorpus(corpus_path);
  TrainedPipeline model = TrainPipeline(config, records);
  model.Save(o.out);
  WriteFileAtomic((fs::path(o.out) / "config.json").string(), config.ToJson().dump(2) + "\n");
  WriteFileAtomic((fs::path(o.out) / "training_report.txt").string(),
                  TrainingReport(config, model, records));
  std::cout << "fingerprint " << model.fingerprint << "\n";
  return 0;
}

nlohmann::ordered_json ReportSummary(const MetricsReport &r) {
  nlohmann::ordered_json j;
  j["stage"] = r.stage;
  j["Accuracy"] = r.weighted_accuracy_mean;
  j["Accuracy_sd"] = r.weighted_accuracy_sd;
  j["Sensitivity"] = r.headline.sensitivity;
  j["Specificity"] = r.headline.specificity;
  j["Precision"] = r.headline.precision;
  j["F-score"] = r.headline.f_score;
  j["records"] = r.total.Total();
  j["folds"] = r.folds.size();
  for (const auto &[k, v] : r.meta) j[k] = v;
  return j;
}

void WriteReport(const fs::path &dir, const MetricsReport &r, const std::string &format) {
  WriteFileAtomic((dir / (r.stage + "_report.txt")).string(), r.ToText());
  fs::create_directories(dir / ("roc_" + r.stage));
  for (size_t k = 0; k < r.per_class.size(); ++k) {
    if (!r.per_class[k].auc) continue;
    WriteFileAtomic((dir / ("roc_" + r.stage) / (r.per_class[k].name + ".tsv")).string(),
                    r.RocFile(k));
  }
  if (format == "json-lines") {
    std::cout << ReportSummary(r).dump() << "\n";
  } else {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s\tAccuracy %.4f (sd %.4f)\n", r.stage.c_str(),
                  r.weighted_accuracy_mean, r.weighted_accuracy_sd);
    std::cout << buf;
  }
}

int CmdEval(const CommonOptions &o, const std::string &corpus_path, const std::string &models) {
  PipelineConfig config = LoadConfig(o);
  if (!models.empty()) {
    TrainedPipeline trained = TrainedPipeline::Load(models);
    if (trained.fingerprint != ConfigFingerprint(config)) {
      throw DataError("models in " + models + " were trained with configuration " +
                      trained.fingerprint + ", not " + ConfigFingerprint(config) +
                      "; their featurization is incompatible");
    }
  }
  std::vector<ServiceRecord> records = ReadCorpus(corpus_path);
  EvaluationReports reports = Evaluate(config, records);
  fs::create_directories(o.out);
  if (reports.validation) WriteReport(o.out, *reports.validation, o.format);
  WriteReport(o.out, reports.routing, o.format);
  return 0;
}

int CmdRoute(const CommonOptions &o, const std::string &models, const std::string &input) {
  TrainedPipeline trained = TrainedPipeline::Load(models);
  CommonOptions opts = o;
  if (opts.config_path.empty()) opts.config_path = (fs::path(models) / "config.json").string();
  PipelineConfig config = LoadConfig(opts);
  if (ConfigFingerprint(config) != trained.fingerprint) {
    throw DataError("configuration does not match the models in " + models);
  }
  Featurizer featurizer(config);
  std::ifstream file;
  std::istream *in = &std::cin;
  if (!input.empty() && input != "-") {
    file.open(input);
    if (!file) throw DataError("cannot read " + input);
    in = &file;
  }
  std::ofstream out_file;
  std::ostream *out = &std::cout;
  if (!o.out.empty()) {
    out_file.open(o.out);
    if (!out_file) throw DataError("cannot write " + o.out);
    out = &out_file;
  }
  std::string line;
  size_t line_no = 0;
  while (std::getline(*in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    RoutingDecision d;
    try {
      d = Route(trained, featurizer, ParseRecordLine(line));
    } catch (const DataError &e) {
      d.fingerprint = trained.fingerprint;
      d.error = "line " + std::to_string(line_no) + ": " + e.what();
      try {
        auto j = nlohmann::json::parse(line);
        if (j.is_object() && j.contains("id") && j["id"].is_string()) d.id = j["id"];
      } catch (const std::exception &) {
      }
    }
    if (o.format == "json-lines") {
      *out << d.ToJson().dump() << "\n";
    } else {
      *out << d.ToText() << "\n";
    }
  }
  return 0;
}

int CmdInspectLexicon(const CommonOptions &o, const std::string &text) {
  PipelineConfig config = LoadConfig(o);
  Lexicon lexicon = Lexicon::Load(config.lexicon_path);
  if (text.empty()) {
    std::cout << "abbreviations\t" << lexicon.abbreviations().size() << "\n"
              << "mwe\t" << lexicon.mwe_patterns().size() << "\n"
              << "pos\t" << lexicon.pos_overrides().size() << "\n"
              << "stop\t" << lexicon.stop_words().size() << "\n"
              << "stop_exceptions\t" << lexicon.stop_exceptions().size() << "\n"
              << "vague\t" << lexicon.vague_phrases().size() << "\n";
    return 0;
  }
  TextAnalyzer analyzer(config.domain_nlp ? lexicon : Lexicon::Generic(), config.domain_nlp);
  Document doc = analyzer.Analyze(text);
  for (size_t s = 0; s < doc.segments.size(); ++s) {
    for (const auto &t : doc.segments[s]) {
      if (o.format == "json-lines") {
        nlohmann::ordered_json j{{"segment", s}, {"text", t.text},
                                 {"tag", std::string(PosTagName(t.tag))}, {"n", t.n}};
        std::cout << j.dump() << "\n";
      } else {
        std::cout << s << "\t" << t.text << "\t" << PosTagName(t.tag) << "\t" << t.n << "\n";
      }
    }
  }
  if (doc.vague) std::cout << (o.format == "json-lines" ? "{\"vague\":true}" : "vague") << "\n";
  return 0;
}

void AddCommon(CLI::App *app, CommonOptions &o, bool with_out_required) {
  app->add_option("--config", o.config_path, "pipeline configuration (JSON)");
  app->add_option("--seed", o.seed, "override the configuration seed");
  app->add_flag("--ablate-domain-nlp", o.ablate, "generic text processing only");
  app->add_flag("--no-validation", o.no_validation, "skip the validation stage");
  auto *out = app->add_option("--out", o.out, "output location");
  if (with_out_required) out->required();
  app->add_option("--format", o.format, "output format")
      ->check(CLI::IsMember({"text", "json-lines"}));
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"svctriage: service report validation and department routing"};
  app.require_subcommand(1);
  CommonOptions o;

  auto *synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  AddCommon(synth, o, true);
  std::optional<size_t> n_records;
  synth->add_option("--n-records", n_records, "override the record count");

  std::string corpus, models, input, text;
  auto *train = app.add_subcommand("train", "train the validator and router");
  AddCommon(train, o, true);
  train->add_option("corpus", corpus, "record file")->required();

  auto *eval = app.add_subcommand("eval", "cross-validated evaluation reports");
  AddCommon(eval, o, true);
  eval->add_option("corpus", corpus, "record file")->required();
  eval->add_option("--models", models, "trained model directory to check compatibility against");

  auto *route = app.add_subcommand("route", "validate and route records");
  AddCommon(route, o, false);
  route->add_option("--models", models, "trained model directory")->required();
  route->add_option("input", input, "record file (default: stdin)");

  auto *inspect = app.add_subcommand("inspect-lexicon", "summarize the lexicon or analyze text");
  AddCommon(inspect, o, false);
  inspect->add_option("--text", text, "text to analyze");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return CmdSynth(o, n_records);
    if (*train) return CmdTrain(o, corpus);
    if (*eval) return CmdEval(o, corpus, models);
    if (*route) return CmdRoute(o, models, input);
    if (*inspect) return CmdInspectLexicon(o, text);
  } catch (const ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError &e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
