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

#include "svctriage/pipeline.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "svctriage/common.h"
#include "svctriage/lexicon.h"

namespace svctriage {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Reads fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void Get(const std::string &key, T &out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (it->is_number_integer() && !it->is_number_unsigned()) {
            throw std::invalid_argument("non-negative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("number");
      }
      out = it->get<T>();
    } catch (const std::exception &e) {
      throw ConfigError(Field(key) + ": wrong type (" + e.what() + ")");
    }
  }

  const Json *Child(const std::string &key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string Field(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(Field(it.key()) + ": unknown key");
    }
  }

 private:
  const Json &j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string Resolve(const std::string &path, const std::string &base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

std::string JunctionName(Junction j) {
  return j == Junction::kSequence ? "sequence" : "pooled";
}

}  // namespace

PipelineConfig PipelineConfig::FromJson(const Json &j, const std::string &base_dir) {
  PipelineConfig c;
  ObjectReader top(j, "");
  top.Get("lexicon", c.lexicon_path);
  top.Get("weights", c.weights_path);
  top.Get("seed", c.seed);
  top.Get("folds", c.folds);
  top.Get("domain_nlp", c.domain_nlp);
  top.Get("validation", c.validation);
  top.Get("include_vague_department", c.include_vague_department);
  c.lexicon_path = Resolve(c.lexicon_path, base_dir);
  c.weights_path = Resolve(c.weights_path, base_dir);

  if (const Json *v = top.Child("vocabulary")) {
    ObjectReader r(*v, "vocabulary");
    r.Get("top_k", c.vocab.top_k);
    r.Get("chi2_keep", c.vocab.chi2_keep);
    r.Get("corr_threshold", c.vocab.corr_threshold);
    r.Finish();
  }
  if (const Json *v = top.Child("validator")) {
    ObjectReader r(*v, "validator");
    NetConfig &n = c.net;
    r.Get("seq_len", n.seq_len);
    r.Get("embed_dim", n.embed_dim);
    r.Get("filter_sizes", n.filter_sizes);
    r.Get("filters_per_size", n.filters_per_size);
    r.Get("lstm_hidden", n.lstm_hidden);
    r.Get("dense_hidden", n.dense_hidden);
    r.Get("dropout", n.dropout);
    r.Get("batch_size", n.batch_size);
    r.Get("epochs", n.epochs);
    r.Get("learning_rate", n.learning_rate);
    r.Get("momentum", n.momentum);
    r.Get("plateau_patience", n.plateau_patience);
    r.Get("validation_fraction", n.validation_fraction);
    r.Get("min_token_count", n.min_token_count);
    r.Get("max_vocab", n.max_vocab);
    std::string junction = JunctionName(n.junction);
    r.Get("junction", junction);
    if (junction == "sequence") {
      n.junction = Junction::kSequence;
    } else if (junction == "pooled") {
      n.junction = Junction::kPooledVector;
    } else {
      throw ConfigError("validator.junction: expected 'sequence' or 'pooled'");
    }
    r.Finish();
  }
  if (const Json *v = top.Child("router")) {
    ObjectReader r(*v, "router");
    std::string kind = RouterKindName(c.router_kind);
    r.Get("kind", kind);
    auto parsed = ParseRouterKind(kind);
    if (!parsed) {
      throw ConfigError("router.kind: expected decision_tree, random_forest, gtb or svm");
    }
    c.router_kind = *parsed;
    if (const Json *t = r.Child("tree")) {
      ObjectReader tr(*t, "router.tree");
      tr.Get("max_depth", c.router.tree.max_depth);
      tr.Get("min_leaf", c.router.tree.min_leaf);
      tr.Finish();
    }
    if (const Json *t = r.Child("forest")) {
      ObjectReader tr(*t, "router.forest");
      tr.Get("n_trees", c.router.forest.n_trees);
      tr.Get("max_features", c.router.forest.max_features);
      tr.Get("bootstrap", c.router.forest.bootstrap);
      tr.Finish();
    }
    if (const Json *t = r.Child("gtb")) {
      ObjectReader tr(*t, "router.gtb");
      tr.Get("n_stages", c.router.gtb.n_stages);
      tr.Get("learning_rate", c.router.gtb.learning_rate);
      tr.Get("max_depth", c.router.gtb.max_depth);
      tr.Get("min_leaf", c.router.gtb.min_leaf);
      tr.Finish();
    }
    if (const Json *t = r.Child("svm")) {
      ObjectReader tr(*t, "router.svm");
      tr.Get("c", c.router.svm.c);
      tr.Get("epochs", c.router.svm.epochs);
      tr.Finish();
    }
    r.Finish();
  }
  if (const Json *v = top.Child("synth")) {
    ObjectReader r(*v, "synth");
    r.Get("n_records", c.synth.n_records);
    r.Get("noise_rate", c.synth.noise_rate);
    r.Get("abbreviation_rate", c.synth.abbreviation_rate);
    if (const Json *m = r.Child("relation_mix")) {
      ObjectReader mr(*m, "synth.relation_mix");
      for (int i = 0; i < kNumRelations; ++i) {
        mr.Get(std::string(RelationName(static_cast<Relation>(i))), c.synth.relation_mix[i]);
      }
      mr.Finish();
    }
    if (const Json *m = r.Child("class_mix")) {
      ObjectReader mr(*m, "synth.class_mix");
      c.synth.class_mix.fill(0.0);
      for (int i = 0; i < kNumDepartments; ++i) {
        mr.Get(std::string(DepartmentName(DepartmentFromIndex(i))), c.synth.class_mix[i]);
      }
      mr.Finish();
    }
    r.Finish();
  }
  top.Finish();
  c.Validate();
  return c;
}

PipelineConfig PipelineConfig::Load(const std::string &path) {
  std::string text = ReadFile(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error &e) {
    throw ConfigError(path + ": invalid JSON (" + e.what() + ")");
  }
  return FromJson(j, fs::path(path).parent_path().string());
}

OrderedJson PipelineConfig::ToJson() const {
  OrderedJson j;
  j["lexicon"] = lexicon_path;
  j["weights"] = weights_path;
  j["seed"] = seed;
  j["folds"] = folds;
  j["domain_nlp"] = domain_nlp;
  j["validation"] = validation;
  j["include_vague_department"] = include_vague_department;
  j["vocabulary"] = {{"top_k", vocab.top_k},
                     {"chi2_keep", vocab.chi2_keep},
                     {"corr_threshold", vocab.corr_threshold}};
  OrderedJson n;
  n["seq_len"] = net.seq_len;
  n["embed_dim"] = net.embed_dim;
  n["filter_sizes"] = net.filter_sizes;
  n["filters_per_size"] = net.filters_per_size;
  n["lstm_hidden"] = net.lstm_hidden;
  n["dense_hidden"] = net.dense_hidden;
  n["dropout"] = net.dropout;
  n["batch_size"] = net.batch_size;
  n["epochs"] = net.epochs;
  n["learning_rate"] = net.learning_rate;
  n["momentum"] = net.momentum;
  n["plateau_patience"] = net.plateau_patience;
  n["validation_fraction"] = net.validation_fraction;
  n["min_token_count"] = net.min_token_count;
  n["max_vocab"] = net.max_vocab;
  n["junction"] = JunctionName(net.junction);
  j["validator"] = n;
  OrderedJson r;
  r["kind"] = RouterKindName(router_kind);
  r["tree"] = {{"max_depth", router.tree.max_depth}, {"min_leaf", router.tree.min_leaf}};
  r["forest"] = {{"n_trees", router.forest.n_trees},
                 {"max_features", router.forest.max_features},
                 {"bootstrap", router.forest.bootstrap}};
  r["gtb"] = {{"n_stages", router.gtb.n_stages},
              {"learning_rate", router.gtb.learning_rate},
              {"max_depth", router.gtb.max_depth},
              {"min_leaf", router.gtb.min_leaf}};
  r["svm"] = {{"c", router.svm.c}, {"epochs", router.svm.epochs}};
  j["router"] = r;
  OrderedJson s;
  s["n_records"] = synth.n_records;
  s["noise_rate"] = synth.noise_rate;
  s["abbreviation_rate"] = synth.abbreviation_rate;
  OrderedJson rm, cm;
  for (int i = 0; i < kNumRelations; ++i) {
    rm[std::string(RelationName(static_cast<Relation>(i)))] = synth.relation_mix[i];
  }
  for (int i = 0; i < kNumDepartments; ++i) {
    cm[std::string(DepartmentName(DepartmentFromIndex(i)))] = synth.class_mix[i];
  }
  s["relation_mix"] = rm;
  s["class_mix"] = cm;
  j["synth"] = s;
  return j;
}

void PipelineConfig::Validate() const {
  if (folds < 2) throw ConfigError("folds: must be >= 2");
  if (!(vocab.corr_threshold > 0.0 && vocab.corr_threshold <= 1.0)) {
    throw ConfigError("vocabulary.corr_threshold: must be in (0, 1]");
  }
  net.Validate();
  if (router.forest.n_trees < 1) throw ConfigError("router.forest.n_trees: must be >= 1");
  if (!(router.gtb.learning_rate > 0.0)) throw ConfigError("router.gtb.learning_rate: must be positive");
  if (router.svm.c < 0.0) throw ConfigError("router.svm.c: must be >= 0");
  ValidateSynthConfig(synth);
}

NetConfig PipelineConfig::SeededNet() const {
  NetConfig n = net;
  n.classes = kNumRelations;
  n.seed = DeriveSeed(seed, "validator");
  return n;
}

RouterParams PipelineConfig::SeededRouter() const {
  RouterParams p = router;
  p.forest.tree = router.tree;
  p.forest.seed = DeriveSeed(seed, "forest");
  p.gtb.seed = DeriveSeed(seed, "gtb");
  p.svm.seed = DeriveSeed(seed, "svm");
  return p;
}

SynthConfig PipelineConfig::SeededSynth() const {
  SynthConfig s = synth;
  s.seed = DeriveSeed(seed, "corpus");
  return s;
}

uint64_t PipelineConfig::FoldSeed() const { return DeriveSeed(seed, "folds"); }

std::string ConfigFingerprint(const PipelineConfig &config) {
  OrderedJson j = config.ToJson();
  // Paths do not matter, only what they hold.
  j.erase("lexicon");
  j.erase("weights");
  uint64_t h = Fnv1a64(j.dump());
  h = Fnv1a64(ReadFile(config.lexicon_path), h);
  h = Fnv1a64(ReadFile(config.weights_path), h);
  return HexDigest(h);
}

// ---------------------------------------------------------------------------
// Featurization

Featurizer::Featurizer(const PipelineConfig &config)
    : analyzer_(config.domain_nlp ? Lexicon::Load(config.lexicon_path) : Lexicon::Generic(),
                config.domain_nlp) {}

Document Featurizer::RoutingDocument(const ServiceRecord &record) const {
  Document call = analyzer_.Analyze(record.call_log);
  Document detail = analyzer_.Analyze(record.detail);
  call.segments.insert(call.segments.end(), detail.segments.begin(), detail.segments.end());
  call.vague = call.vague && detail.vague;
  return call;
}

std::pair<Document, Document> Featurizer::Pair(const ServiceRecord &record) const {
  return {analyzer_.Analyze(record.call_log), analyzer_.Analyze(record.detail)};
}

PairInput Featurizer::ValidatorInput(const ServiceRecord &record, const TokenVocab &vocab) const {
  auto [call, detail] = Pair(record);
  return {vocab.Encode(call), vocab.Encode(detail)};
}

Vocabulary FitRoutingVocabulary(std::span<const Document> docs, std::span<const int> labels,
                                const PipelineConfig &config) {
  VocabularyOptions options;
  options.top_k = config.vocab.top_k;
  Vocabulary vocab = BuildVocabulary(docs, options);
  if (!config.domain_nlp || config.vocab.chi2_keep == 0 || vocab.size() <= 1 || docs.size() < 2) {
    return vocab;
  }
  std::vector<FeatureVector> vectors;
  vectors.reserve(docs.size());
  for (const Document &d : docs) vectors.push_back(Vectorize(d, vocab));
  std::vector<double> scores = ChiSquaredScores(vectors, labels);
  Matrix corr = CorrelationMatrix(vectors);
  return SelectFeatures(vocab, scores, corr, config.vocab.chi2_keep, config.vocab.corr_threshold);
}

SparseMatrix FeatureRows(std::span<const Document> docs, const Vocabulary &vocab) {
  SparseMatrix m(vocab.size());
  for (const Document &d : docs) m.AddRow(Vectorize(d, vocab).values);
  return m;
}

std::vector<int> RelationLabels(std::span<const ServiceRecord> records) {
  std::vector<int> labels;
  for (const auto &r : records) labels.push_back(r.relation ? static_cast<int>(*r.relation) : -1);
  return labels;
}

std::vector<int> RoutingLabels(std::span<const ServiceRecord> records,
                               const PipelineConfig &config) {
  std::vector<int> labels;
  for (const auto &r : records) {
    bool in = r.department.has_value();
    if (in && config.validation) in = r.relation == Relation::kValid;
    if (in && !config.include_vague_department) in = *r.department != Department::kVague;
    labels.push_back(in ? DepartmentIndex(*r.department) : -1);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Training and persistence

namespace {

ValidatorModel FitValidator(const NetConfig &net, std::span<const Document> call_docs,
                            std::span<const Document> detail_docs, std::span<const int> labels,
                            std::span<const size_t> rows, TrainHistory *history) {
  std::vector<Document> vocab_docs;
  vocab_docs.reserve(rows.size() * 2);
  for (size_t i : rows) {
    vocab_docs.push_back(call_docs[i]);
    vocab_docs.push_back(detail_docs[i]);
  }
  TokenVocab vocab = TokenVocab::Build(vocab_docs, net.min_token_count, net.max_vocab);
  std::vector<PairInput> inputs;
  std::vector<int> y;
  for (size_t i : rows) {
    inputs.push_back({vocab.Encode(call_docs[i]), vocab.Encode(detail_docs[i])});
    y.push_back(labels[i]);
  }
  TrainedValidator trained = TrainValidator(inputs, y, std::move(vocab), net);
  if (history) *history = std::move(trained.history);
  return std::move(trained.model);
}

struct RoutingFit {
  Vocabulary vocab;
  RouterModel model;
};

RoutingFit FitRouter(const PipelineConfig &config, std::span<const Document> docs,
                     std::span<const int> labels, std::span<const size_t> rows) {
  std::vector<Document> train_docs;
  std::vector<int> y;
  for (size_t i : rows) {
    train_docs.push_back(docs[i]);
    y.push_back(labels[i]);
  }
  RoutingFit fit;
  fit.vocab = FitRoutingVocabulary(train_docs, y, config);
  SparseMatrix x = FeatureRows(train_docs, fit.vocab);
  fit.model = RouterModel::Train(config.router_kind, x, y, kNumDepartments, config.SeededRouter());
  return fit;
}

std::string ReadOrEmpty(const fs::path &p) { return fs::exists(p) ? ReadFile(p.string()) : ""; }

}  // namespace

TrainedPipeline TrainPipeline(const PipelineConfig &config,
                              std::span<const ServiceRecord> records) {
  config.Validate();
  TrainedPipeline out;
  out.fingerprint = ConfigFingerprint(config);
  out.seed = config.seed;
  out.validation = config.validation;
  Featurizer featurizer(config);

  std::vector<int> relation = RelationLabels(records);
  std::vector<int> routing = RoutingLabels(records, config);
  size_t unlabeled = std::count(relation.begin(), relation.end(), -1);
  size_t routable = records.size() - std::count(routing.begin(), routing.end(), -1);
  if (config.validation && unlabeled > 0) {
    throw DataError(std::to_string(unlabeled) + " of " + std::to_string(records.size()) +
                    " records have no relation label");
  }
  if (routable == 0) {
    throw DataError("no records are eligible for routing (" + std::to_string(records.size()) +
                    " records, " + std::to_string(unlabeled) + " without a relation label)");
  }

  std::vector<Document> call_docs, detail_docs, route_docs;
  for (const auto &r : records) {
    auto [call, detail] = featurizer.Pair(r);
    route_docs.push_back(featurizer.RoutingDocument(r));
    call_docs.push_back(std::move(call));
    detail_docs.push_back(std::move(detail));
  }
  if (config.validation) {
    std::vector<size_t> rows(records.size());
    std::iota(rows.begin(), rows.end(), 0);
    out.validator = FitValidator(config.SeededNet(), call_docs, detail_docs, relation, rows,
                                 &out.history);
  }
  std::vector<size_t> route_rows;
  for (size_t i = 0; i < routing.size(); ++i) {
    if (routing[i] >= 0) route_rows.push_back(i);
  }
  RoutingFit fit = FitRouter(config, route_docs, routing, route_rows);
  out.routing_vocab = std::move(fit.vocab);
  out.router = std::move(fit.model);
  return out;
}

void TrainedPipeline::Save(const std::string &dir) const {
  fs::create_directories(dir);
  const fs::path base(dir);
  OrderedJson manifest;
  manifest["format"] = "svctriage-pipeline 1";
  manifest["fingerprint"] = fingerprint;
  manifest["seed"] = seed;
  manifest["validation"] = validation;
  OrderedJson files;
  auto put = [&](const std::string &name, const std::string &contents) {
    WriteFileAtomic((base / name).string(), contents);
    files[name] = HexDigest(Fnv1a64(contents));
  };
  if (validator) {
    ModelArchive a = validator->ToArchive();
    a.SetString("config_fingerprint", fingerprint);
    a.SetString("config_seed", std::to_string(seed));
    put("validator.model", a.Serialize());
    std::ostringstream hist;
    hist << "# fingerprint " << fingerprint << " seed " << seed << "\n";
    hist << "epoch\ttrain_loss\tval_loss\tval_accuracy\tlearning_rate\n";
    for (size_t e = 0; e < history.size(); ++e) {
      hist << e + 1 << "\t" << FormatDouble(history[e].train_loss) << "\t"
           << FormatDouble(history[e].val_loss) << "\t" << FormatDouble(history[e].val_accuracy)
           << "\t" << FormatDouble(history[e].learning_rate) << "\n";
    }
    put("history.tsv", hist.str());
  }
  ModelArchive r = router.ToArchive();
  r.SetString("vocab_hash", HexDigest(routing_vocab.Hash()));
  r.SetString("config_fingerprint", fingerprint);
  r.SetString("config_seed", std::to_string(seed));
  put("router.model", r.Serialize());
  put("vocabulary.tsv", routing_vocab.Serialize());
  manifest["files"] = files;
  WriteFileAtomic((base / "manifest.json").string(), manifest.dump(2) + "\n");
}

TrainedPipeline TrainedPipeline::Load(const std::string &dir) {
  const fs::path base(dir);
  std::string manifest_text = ReadOrEmpty(base / "manifest.json");
  if (manifest_text.empty()) throw DataError(dir + ": no manifest.json (not a model directory)");
  Json manifest;
  try {
    manifest = Json::parse(manifest_text);
  } catch (const Json::parse_error &e) {
    throw DataError(dir + "/manifest.json: " + e.what());
  }
  TrainedPipeline p;
  p.fingerprint = manifest.at("fingerprint").get<std::string>();
  p.seed = manifest.at("seed").get<uint64_t>();
  p.validation = manifest.at("validation").get<bool>();
  p.routing_vocab = Vocabulary::Parse(ReadFile((base / "vocabulary.tsv").string()));
  ModelArchive r = ModelArchive::Load((base / "router.model").string());
  if (r.GetString("vocab_hash") != HexDigest(p.routing_vocab.Hash())) {
    throw DataError("router vocabulary hash mismatch: the model was trained on a different "
                    "vocabulary than " + (base / "vocabulary.tsv").string());
  }
  if (r.GetString("config_fingerprint") != p.fingerprint) {
    throw DataError("router model fingerprint does not match the manifest");
  }
  p.router = RouterModel::FromArchive(r);
  if (p.router.features() != p.routing_vocab.size()) {
    throw DataError("router feature count does not match the vocabulary");
  }
  if (p.validation) {
    ModelArchive v = ModelArchive::Load((base / "validator.model").string());
    if (v.GetString("config_fingerprint") != p.fingerprint) {
      throw DataError("validator model fingerprint does not match the manifest");
    }
    p.validator = ValidatorModel::FromArchive(v);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Routing

OrderedJson RoutingDecision::ToJson() const {
  OrderedJson j;
  j["id"] = id;
  if (!error.empty()) {
    j["error"] = error;
    j["fingerprint"] = fingerprint;
    return j;
  }
  j["verdict"] = verdict;
  OrderedJson probs = OrderedJson::object();
  for (size_t i = 0; i < relation_probs.size(); ++i) {
    probs[std::string(RelationName(static_cast<Relation>(i)))] = relation_probs[i];
  }
  j["relation_probs"] = probs;
  if (department) {
    j["department"] = *department;
    OrderedJson scores = OrderedJson::object();
    for (size_t i = 0; i < department_scores.size(); ++i) {
      scores[std::string(DepartmentName(DepartmentFromIndex(static_cast<int>(i))))] =
          department_scores[i];
    }
    j["department_scores"] = scores;
  } else {
    j["department"] = nullptr;
  }
  j["fingerprint"] = fingerprint;
  return j;
}

std::string RoutingDecision::ToText() const {
  std::string out = id.empty() ? "-" : id;
  if (!error.empty()) return out + "\tERROR\t" + error;
  out += "\t" + verdict;
  if (!relation_probs.empty()) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "\t%.4f", *std::max_element(relation_probs.begin(),
                                                               relation_probs.end()));
    out += buf;
  }
  out += "\t" + (department ? *department : std::string("-"));
  return out;
}

RoutingDecision Route(const TrainedPipeline &model, const Featurizer &featurizer,
                      const ServiceRecord &record) {
  RoutingDecision d;
  d.id = record.id;
  d.fingerprint = model.fingerprint;
  if (model.validator) {
    PairInput input = featurizer.ValidatorInput(record, model.validator->vocab());
    d.relation_probs = model.validator->Predict(input);
    int verdict = ArgMax(d.relation_probs);
    d.verdict = RelationName(static_cast<Relation>(verdict));
    if (verdict != static_cast<int>(Relation::kValid)) return d;
  } else {
    d.verdict = RelationName(Relation::kValid);
  }
  FeatureVector v = Vectorize(featurizer.RoutingDocument(record), model.routing_vocab);
  Prediction p = model.router.Predict(v.values);
  d.department = std::string(DepartmentName(DepartmentFromIndex(p.label)));
  d.department_scores = std::move(p.scores);
  return d;
}

// ---------------------------------------------------------------------------
// Evaluation

MetricsReport CrossValidateRouting(const PipelineConfig &config,
                                   std::span<const Document> docs,
                                   std::span<const int> labels, const FoldAssignment &folds,
                                   const ClassWeights &weights) {
  Trainer trainer = [&](std::span<const size_t> train) -> Predictor {
    auto fit = std::make_shared<RoutingFit>(FitRouter(config, docs, labels, train));
    return [fit, docs](size_t i) {
      return fit->model.Predict(Vectorize(docs[i], fit->vocab).values);
    };
  };
  MetricsReport report =
      CrossValidate(trainer, labels, folds, weights, DepartmentNames(), std::nullopt);
  report.stage = "routing";
  return report;
}

MetricsReport CrossValidateValidator(const PipelineConfig &config,
                                     std::span<const Document> call_docs,
                                     std::span<const Document> detail_docs,
                                     std::span<const int> labels, const FoldAssignment &folds) {
  const NetConfig net = config.SeededNet();
  Trainer trainer = [&](std::span<const size_t> train) -> Predictor {
    auto model = std::make_shared<ValidatorModel>(
        FitValidator(net, call_docs, detail_docs, labels, train, nullptr));
    return [model, call_docs, detail_docs](size_t i) {
      PairInput in{model->vocab().Encode(call_docs[i]), model->vocab().Encode(detail_docs[i])};
      Prediction p;
      p.scores = model->Predict(in);
      p.label = ArgMax(p.scores);
      return p;
    };
  };
  MetricsReport report = CrossValidate(trainer, labels, folds, ClassWeights::Uniform(kNumRelations),
                                       RelationNames(), static_cast<int>(Relation::kValid));
  report.stage = "validation";
  return report;
}

EvaluationReports Evaluate(const PipelineConfig &config, std::span<const ServiceRecord> records) {
  config.Validate();
  Featurizer featurizer(config);
  ClassWeights weights = ClassWeights::Load(config.weights_path, DepartmentNames());
  const std::string fingerprint = ConfigFingerprint(config);
  auto stamp = [&](MetricsReport &r) {
    r.meta["fingerprint"] = fingerprint;
    r.meta["seed"] = std::to_string(config.seed);
    r.meta["domain_nlp"] = config.domain_nlp ? "true" : "false";
    r.meta["validation"] = config.validation ? "true" : "false";
    r.meta["vague_department"] = config.include_vague_department ? "included" : "excluded";
  };
  EvaluationReports out;
  if (config.validation) {
    std::vector<int> relation = RelationLabels(records);
    std::vector<ServiceRecord> labeled;
    std::vector<Document> calls, details;
    std::vector<int> y;
    for (size_t i = 0; i < records.size(); ++i) {
      if (relation[i] < 0) continue;
      labeled.push_back(records[i]);
      auto [c, d] = featurizer.Pair(records[i]);
      calls.push_back(std::move(c));
      details.push_back(std::move(d));
      y.push_back(relation[i]);
    }
    if (labeled.size() < static_cast<size_t>(config.folds)) {
      throw DataError("validation needs at least " + std::to_string(config.folds) +
                      " labeled records, found " + std::to_string(labeled.size()));
    }
    FoldAssignment folds = SplitFolds(labeled, config.folds, config.FoldSeed());
    out.validation = CrossValidateValidator(config, calls, details, y, folds);
    stamp(*out.validation);
  }
  std::vector<int> routing = RoutingLabels(records, config);
  std::vector<ServiceRecord> subset;
  std::vector<Document> docs;
  std::vector<int> y;
  for (size_t i = 0; i < records.size(); ++i) {
    if (routing[i] < 0) continue;
    subset.push_back(records[i]);
    docs.push_back(featurizer.RoutingDocument(records[i]));
    y.push_back(routing[i]);
  }
  if (subset.size() < static_cast<size_t>(config.folds)) {
    throw DataError("routing needs at least " + std::to_string(config.folds) +
                    " eligible records, found " + std::to_string(subset.size()));
  }
  FoldAssignment folds = SplitFolds(subset, config.folds, config.FoldSeed());
  out.routing = CrossValidateRouting(config, docs, y, folds, weights);
  stamp(out.routing);
  return out;
}

}  // namespace svctriage
