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

// End-to-end composition: text analysis, request validation, department
// routing, persistence and cross-validated evaluation.

#ifndef SVCTRIAGE_PIPELINE_H_
#define SVCTRIAGE_PIPELINE_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "svctriage/corpus.h"
#include "svctriage/features.h"
#include "svctriage/metrics.h"
#include "svctriage/router.h"
#include "svctriage/textprep.h"
#include "svctriage/validator_net.h"

namespace svctriage {

struct VocabParams {
  size_t top_k = 200;            // per category
  size_t chi2_keep = 400;        // 0 disables chi-squared pruning
  double corr_threshold = 0.95;  // in (0, 1]
};

struct PipelineConfig {
  std::string lexicon_path = "data/lexicon.txt";
  std::string weights_path = "data/department_weights.txt";
  uint64_t seed = 1;
  int folds = 10;
  bool domain_nlp = true;
  bool validation = true;
  bool include_vague_department = false;
  VocabParams vocab;
  NetConfig net;
  RouterKind router_kind = RouterKind::kGtb;
  RouterParams router;
  SynthConfig synth;

  // Unknown keys are rejected. Relative paths resolve against `base_dir`.
  static PipelineConfig FromJson(const nlohmann::json &j, const std::string &base_dir = "");
  static PipelineConfig Load(const std::string &path);
  nlohmann::ordered_json ToJson() const;
  void Validate() const;

  // Sub-configurations with their named seeds applied.
  NetConfig SeededNet() const;
  RouterParams SeededRouter() const;
  SynthConfig SeededSynth() const;
  uint64_t FoldSeed() const;
};

// Hash of the configuration together with the lexicon and weight files.
std::string ConfigFingerprint(const PipelineConfig &config);

class Featurizer {
 public:
  explicit Featurizer(const PipelineConfig &config);
  const TextAnalyzer &analyzer() const { return analyzer_; }

  // Call log and detail together, for routing.
  Document RoutingDocument(const ServiceRecord &record) const;
  PairInput ValidatorInput(const ServiceRecord &record, const TokenVocab &vocab) const;
  // Call log and detail analyzed separately.
  std::pair<Document, Document> Pair(const ServiceRecord &record) const;

 private:
  TextAnalyzer analyzer_;
};

// Vocabulary fit on the given documents only.
Vocabulary FitRoutingVocabulary(std::span<const Document> docs, std::span<const int> labels,
                                const PipelineConfig &config);
SparseMatrix FeatureRows(std::span<const Document> docs, const Vocabulary &vocab);

// Relation label per record, or -1.
std::vector<int> RelationLabels(std::span<const ServiceRecord> records);
// Department label per record for routing, or -1 when the record is outside
// the routing set of this configuration.
std::vector<int> RoutingLabels(std::span<const ServiceRecord> records,
                               const PipelineConfig &config);

struct TrainedPipeline {
  std::string fingerprint;
  uint64_t seed = 0;
  bool validation = true;
  std::optional<ValidatorModel> validator;
  TrainHistory history;
  Vocabulary routing_vocab;
  RouterModel router;

  void Save(const std::string &dir) const;
  static TrainedPipeline Load(const std::string &dir);
};

TrainedPipeline TrainPipeline(const PipelineConfig &config,
                              std::span<const ServiceRecord> records);

struct RoutingDecision {
  std::string id;
  std::string verdict;  // Valid, False, Vague; "Valid" when validation is off
  std::vector<double> relation_probs;
  std::optional<std::string> department;
  std::vector<double> department_scores;
  std::string fingerprint;
  std::string error;  // non-empty for malformed input

  nlohmann::ordered_json ToJson() const;
  std::string ToText() const;
};

RoutingDecision Route(const TrainedPipeline &model, const Featurizer &featurizer,
                      const ServiceRecord &record);

struct EvaluationReports {
  std::optional<MetricsReport> validation;
  MetricsReport routing;
};

EvaluationReports Evaluate(const PipelineConfig &config, std::span<const ServiceRecord> records);

// Cross-validated routing report for a record set with precomputed documents.
MetricsReport CrossValidateRouting(const PipelineConfig &config,
                                   std::span<const Document> docs,
                                   std::span<const int> labels, const FoldAssignment &folds,
                                   const ClassWeights &weights);
MetricsReport CrossValidateValidator(const PipelineConfig &config,
                                     std::span<const Document> call_docs,
                                     std::span<const Document> detail_docs,
                                     std::span<const int> labels, const FoldAssignment &folds);

}  // namespace svctriage

#endif  // SVCTRIAGE_PIPELINE_H_
