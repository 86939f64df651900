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

// Evaluation: confusion matrices, department-weighted accuracy, one-vs-rest
// rates, ROC curves with AUC, and k-fold cross-validation.

#ifndef SVCTRIAGE_METRICS_H_
#define SVCTRIAGE_METRICS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svctriage/corpus.h"
#include "svctriage/router.h"

namespace svctriage {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes) : g_(classes), counts_(classes * classes, 0) {}

  int classes() const { return g_; }
  void Add(int truth, int predicted, uint64_t count = 1);
  uint64_t At(int truth, int predicted) const { return counts_[truth * g_ + predicted]; }
  uint64_t RowTotal(int truth) const;
  uint64_t ColTotal(int predicted) const;
  uint64_t Total() const;
  ConfusionMatrix &operator+=(const ConfusionMatrix &other);
  bool operator==(const ConfusionMatrix &) const = default;

 private:
  int g_ = 0;
  std::vector<uint64_t> counts_;
};

// Class index -> weight. Missing classes have no weight.
struct ClassWeights {
  std::map<int, double> weights;

  static ClassWeights Uniform(int classes);
  // "Name weight" lines; names resolved against `class_names`.
  static ClassWeights Parse(std::string_view text, std::span<const std::string> class_names);
  static ClassWeights Load(const std::string &path, std::span<const std::string> class_names);
};

std::vector<std::string> DepartmentNames();
std::vector<std::string> RelationNames();

enum class AccuracyMode {
  kRecall,    // sum_k W_k * correct_k / row_k
  kRawCount,  // sum_k W_k * correct_k, the literal unnormalized reading
};

// Weights are renormalized over the classes with a nonzero row.
double WeightedAccuracy(const ConfusionMatrix &conf, const ClassWeights &weights,
                        AccuracyMode mode = AccuracyMode::kRecall);

struct BasicMetrics {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f_score = 0.0;
  bool sensitivity_degenerate = false;
  bool specificity_degenerate = false;
  bool precision_degenerate = false;
  bool f_score_degenerate = false;
};

BasicMetrics ComputeBasicMetrics(uint64_t tp, uint64_t fp, uint64_t fn, uint64_t tn);
BasicMetrics ComputeBasicMetrics(const ConfusionMatrix &conf, int positive_class);
// Unweighted mean over the classes with a nonzero row.
BasicMetrics MacroBasicMetrics(const ConfusionMatrix &conf);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  double auc = 0.0;
};

// Mann-Whitney AUC: P(pos > neg) + P(tie) / 2.
double AucMannWhitney(std::span<const double> scores, const std::vector<bool> &labels);
double TrapezoidArea(const RocCurve &curve);
RocCurve RocAuc(std::span<const double> scores, const std::vector<bool> &labels);

double SampleStdDev(std::span<const double> values);

// Maps a test-record index to a prediction.
using Predictor = std::function<Prediction(size_t)>;
// Fits on the given training indices only.
using Trainer = std::function<Predictor(std::span<const size_t>)>;

struct FoldReport {
  ConfusionMatrix confusion;
  double weighted_accuracy = 0.0;
  BasicMetrics headline;
};

struct ClassReport {
  std::string name;
  BasicMetrics rates;
  std::optional<double> auc;
  RocCurve roc;
};

struct MetricsReport {
  std::string stage;
  std::vector<std::string> class_names;
  std::optional<int> positive_class;  // one-vs-rest headline; macro when absent
  std::vector<FoldReport> folds;
  ConfusionMatrix total;
  double weighted_accuracy_mean = 0.0;
  double weighted_accuracy_sd = 0.0;
  BasicMetrics headline;
  std::vector<ClassReport> per_class;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> meta;  // fingerprint, seed, flags

  std::string ToText() const;
  std::string RocFile(size_t class_index) const;
};

// The five report columns.
const std::vector<std::string> &ReportColumns();

// `labels` covers every record; `folds.fold_of` gives each record's test fold.
// Records whose label is negative are skipped.
MetricsReport CrossValidate(const Trainer &trainer, std::span<const int> labels,
                            const FoldAssignment &folds, const ClassWeights &weights,
                            std::vector<std::string> class_names,
                            std::optional<int> positive_class = std::nullopt);

}  // namespace svctriage

#endif  // SVCTRIAGE_METRICS_H_
