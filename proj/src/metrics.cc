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

#include "svctriage/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "svctriage/common.h"

namespace svctriage {

void ConfusionMatrix::Add(int truth, int predicted, uint64_t count) {
  if (truth < 0 || truth >= g_ || predicted < 0 || predicted >= g_) {
    throw DataError("confusion matrix class out of range");
  }
  counts_[truth * g_ + predicted] += count;
}

uint64_t ConfusionMatrix::RowTotal(int truth) const {
  uint64_t s = 0;
  for (int p = 0; p < g_; ++p) s += At(truth, p);
  return s;
}

uint64_t ConfusionMatrix::ColTotal(int predicted) const {
  uint64_t s = 0;
  for (int t = 0; t < g_; ++t) s += At(t, predicted);
  return s;
}

uint64_t ConfusionMatrix::Total() const {
  return std::accumulate(counts_.begin(), counts_.end(), uint64_t{0});
}

ConfusionMatrix &ConfusionMatrix::operator+=(const ConfusionMatrix &other) {
  if (other.g_ != g_) throw DataError("confusion matrices differ in class count");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ClassWeights ClassWeights::Uniform(int classes) {
  ClassWeights w;
  for (int c = 0; c < classes; ++c) w.weights[c] = 1.0 / classes;
  return w;
}

ClassWeights ClassWeights::Parse(std::string_view text, std::span<const std::string> class_names) {
  ClassWeights w;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto parts = SplitWhitespace(t);
    if (parts.size() != 2) {
      throw DataError("weights line " + std::to_string(line_no) + ": expected 'name weight'");
    }
    auto it = std::find(class_names.begin(), class_names.end(), parts[0]);
    if (it == class_names.end()) {
      throw DataError("weights line " + std::to_string(line_no) + ": unknown class '" +
                      parts[0] + "'");
    }
    double v = 0.0;
    try {
      size_t used = 0;
      v = std::stod(parts[1], &used);
      if (used != parts[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception &) {
      throw DataError("weights line " + std::to_string(line_no) + ": bad weight '" + parts[1] + "'");
    }
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DataError("weights line " + std::to_string(line_no) + ": weight must be >= 0");
    }
    w.weights[static_cast<int>(it - class_names.begin())] = v;
  }
  return w;
}

ClassWeights ClassWeights::Load(const std::string &path, std::span<const std::string> class_names) {
  return Parse(ReadFile(path), class_names);
}

std::vector<std::string> DepartmentNames() {
  std::vector<std::string> names;
  for (int i = 0; i < kNumDepartments; ++i) {
    names.emplace_back(DepartmentName(DepartmentFromIndex(i)));
  }
  return names;
}

std::vector<std::string> RelationNames() {
  std::vector<std::string> names;
  for (int i = 0; i < kNumRelations; ++i) names.emplace_back(RelationName(static_cast<Relation>(i)));
  return names;
}

double WeightedAccuracy(const ConfusionMatrix &conf, const ClassWeights &weights,
                        AccuracyMode mode) {
  if (conf.Total() == 0) throw DataError("weighted accuracy of an empty confusion matrix");
  double mass = 0.0;
  for (int k = 0; k < conf.classes(); ++k) {
    if (conf.RowTotal(k) == 0) continue;
    auto it = weights.weights.find(k);
    if (it == weights.weights.end()) {
      throw DataError("class " + std::to_string(k) + " has records but no weight");
    }
    mass += it->second;
  }
  if (!(mass > 0.0)) throw DataError("weights of the present classes sum to zero");
  double acc = 0.0;
  for (int k = 0; k < conf.classes(); ++k) {
    uint64_t row = conf.RowTotal(k);
    if (row == 0) continue;
    double w = weights.weights.at(k) / mass;
    double correct = static_cast<double>(conf.At(k, k));
    acc += mode == AccuracyMode::kRecall ? w * correct / static_cast<double>(row) : w * correct;
  }
  return acc;
}

BasicMetrics ComputeBasicMetrics(uint64_t tp, uint64_t fp, uint64_t fn, uint64_t tn) {
  BasicMetrics m;
  auto ratio = [](uint64_t num, uint64_t den, bool *degenerate) {
    if (den == 0) {
      *degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.sensitivity = ratio(tp, tp + fn, &m.sensitivity_degenerate);
  m.specificity = ratio(tn, tn + fp, &m.specificity_degenerate);
  m.precision = ratio(tp, tp + fp, &m.precision_degenerate);
  if (m.precision + m.sensitivity > 0.0) {
    m.f_score = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
  } else {
    m.f_score_degenerate = true;
  }
  return m;
}

BasicMetrics ComputeBasicMetrics(const ConfusionMatrix &conf, int positive_class) {
  if (positive_class < 0 || positive_class >= conf.classes()) {
    throw DataError("positive class out of range");
  }
  uint64_t tp = conf.At(positive_class, positive_class);
  uint64_t fn = conf.RowTotal(positive_class) - tp;
  uint64_t fp = conf.ColTotal(positive_class) - tp;
  uint64_t tn = conf.Total() - tp - fn - fp;
  return ComputeBasicMetrics(tp, fp, fn, tn);
}

BasicMetrics MacroBasicMetrics(const ConfusionMatrix &conf) {
  BasicMetrics mean;
  int present = 0;
  for (int k = 0; k < conf.classes(); ++k) {
    if (conf.RowTotal(k) == 0) continue;
    BasicMetrics m = ComputeBasicMetrics(conf, k);
    mean.sensitivity += m.sensitivity;
    mean.specificity += m.specificity;
    mean.precision += m.precision;
    mean.f_score += m.f_score;
    mean.specificity_degenerate |= m.specificity_degenerate;
    mean.precision_degenerate |= m.precision_degenerate;
    mean.f_score_degenerate |= m.f_score_degenerate;
    ++present;
  }
  if (present == 0) {
    mean.sensitivity_degenerate = mean.specificity_degenerate = true;
    mean.precision_degenerate = mean.f_score_degenerate = true;
    return mean;
  }
  mean.sensitivity /= present;
  mean.specificity /= present;
  mean.precision /= present;
  mean.f_score /= present;
  return mean;
}

namespace {

void CheckRocInput(std::span<const double> scores, const std::vector<bool> &labels) {
  if (scores.size() != labels.size()) throw DataError("one label per score required");
  size_t pos = std::count(labels.begin(), labels.end(), true);
  if (pos == 0 || pos == labels.size()) {
    throw DataError("ROC needs both positive and negative examples");
  }
}

}  // namespace

double AucMannWhitney(std::span<const double> scores, const std::vector<bool> &labels) {
  CheckRocInput(scores, labels);
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Sum of positive ranks with tied groups sharing their mean rank, doubled to
  // stay in integers.
  uint64_t rank_sum_x2 = 0;
  uint64_t n_pos = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    uint64_t rank_x2 = static_cast<uint64_t>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (size_t t = i; t < j; ++t) {
      if (labels[order[t]]) {
        rank_sum_x2 += rank_x2;
        ++n_pos;
      }
    }
    i = j;
  }
  uint64_t n_neg = scores.size() - n_pos;
  double u = (static_cast<double>(rank_sum_x2) - static_cast<double>(n_pos * (n_pos + 1))) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double TrapezoidArea(const RocCurve &curve) {
  double area = 0.0;
  for (size_t i = 1; i < curve.points.size(); ++i) {
    auto [x0, y0] = curve.points[i - 1];
    auto [x1, y1] = curve.points[i];
    area += (x1 - x0) * (y0 + y1) / 2.0;
  }
  return area;
}

RocCurve RocAuc(std::span<const double> scores, const std::vector<bool> &labels) {
  CheckRocInput(scores, labels);
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  double tp = 0.0, fp = 0.0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    curve.points.emplace_back(fp / n_neg, tp / n_pos);
    i = j;
  }
  curve.auc = AucMannWhitney(scores, labels);
  return curve;
}

double SampleStdDev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

const std::vector<std::string> &ReportColumns() {
  static const std::vector<std::string> kColumns = {"Accuracy", "Sensitivity", "Specificity",
                                                    "Precision", "F-score"};
  return kColumns;
}

namespace {

std::string Row(const std::string &label, double accuracy, const BasicMetrics &m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f", label.c_str(), accuracy,
                m.sensitivity, m.specificity, m.precision, m.f_score);
  return buf;
}

}  // namespace

std::string MetricsReport::ToText() const {
  std::ostringstream out;
  out << "# svctriage metrics report\n";
  out << "stage\t" << stage << "\n";
  for (const auto &[k, v] : meta) out << k << "\t" << v << "\n";
  out << "folds\t" << folds.size() << "\n";
  out << "records\t" << total.Total() << "\n";
  out << "headline\t"
      << (positive_class ? "one-vs-rest on " + class_names[*positive_class] : std::string("macro"))
      << "\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.6f", weighted_accuracy_sd);
  out << "Accuracy_sd\t" << buf << "\n";
  out << "\n";
  out << "row";
  for (const auto &c : ReportColumns()) out << "\t" << c;
  out << "\n";
  out << Row("mean", weighted_accuracy_mean, headline) << "\n";
  for (size_t f = 0; f < folds.size(); ++f) {
    out << Row("fold" + std::to_string(f), folds[f].weighted_accuracy, folds[f].headline) << "\n";
  }
  out << "\nclass\tSensitivity\tSpecificity\tPrecision\tF-score\tAUC\tsupport\n";
  for (size_t k = 0; k < per_class.size(); ++k) {
    const ClassReport &c = per_class[k];
    uint64_t support = total.RowTotal(static_cast<int>(k));
    if (support == 0) continue;
    std::snprintf(buf, sizeof(buf), "%.6f\t%.6f\t%.6f\t%.6f\t", c.rates.sensitivity,
                  c.rates.specificity, c.rates.precision, c.rates.f_score);
    out << c.name << "\t" << buf;
    if (c.auc) {
      std::snprintf(buf, sizeof(buf), "%.6f", *c.auc);
      out << buf;
    } else {
      out << "NA";
    }
    out << "\t" << support << "\n";
  }
  out << "\nconfusion";
  for (const auto &n : class_names) out << "\t" << n;
  out << "\n";
  for (int t = 0; t < total.classes(); ++t) {
    out << class_names[t];
    for (int p = 0; p < total.classes(); ++p) out << "\t" << total.At(t, p);
    out << "\n";
  }
  for (const auto &w : warnings) out << "warning\t" << w << "\n";
  return out.str();
}

std::string MetricsReport::RocFile(size_t class_index) const {
  std::ostringstream out;
  out << "fpr tpr\n";
  for (auto [x, y] : per_class.at(class_index).roc.points) {
    out << FormatDouble(x) << " " << FormatDouble(y) << "\n";
  }
  return out.str();
}

MetricsReport CrossValidate(const Trainer &trainer, std::span<const int> labels,
                            const FoldAssignment &folds, const ClassWeights &weights,
                            std::vector<std::string> class_names,
                            std::optional<int> positive_class) {
  if (folds.fold_of.size() != labels.size()) {
    throw DataError("fold assignment does not cover every record");
  }
  const int g = static_cast<int>(class_names.size());
  MetricsReport report;
  report.class_names = class_names;
  report.positive_class = positive_class;
  report.total = ConfusionMatrix(g);
  std::vector<bool> present(g, false);
  for (int y : labels) {
    if (y >= g) throw DataError("label out of range");
    if (y >= 0) present[y] = true;
  }
  std::vector<std::vector<double>> class_scores(g);
  std::vector<int> scored_truth;
  std::vector<double> fold_accuracy;
  for (int f = 0; f < folds.k; ++f) {
    std::vector<size_t> train, test;
    for (size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0) continue;
      (folds.fold_of[i] == f ? test : train).push_back(i);
    }
    FoldReport fr;
    fr.confusion = ConfusionMatrix(g);
    if (test.empty()) {
      report.warnings.push_back("fold " + std::to_string(f) + " has no test records");
      report.folds.push_back(fr);
      continue;
    }
    Predictor predict = trainer(train);
    std::vector<bool> in_fold(g, false);
    for (size_t i : test) {
      Prediction p = predict(i);
      fr.confusion.Add(labels[i], p.label);
      in_fold[labels[i]] = true;
      for (int c = 0; c < g; ++c) class_scores[c].push_back(c < (int)p.scores.size() ? p.scores[c] : 0.0);
      scored_truth.push_back(labels[i]);
    }
    for (int c = 0; c < g; ++c) {
      if (present[c] && !in_fold[c]) {
        report.warnings.push_back("fold " + std::to_string(f) + " lacks class " + class_names[c] +
                                  "; excluded from that fold's weighted accuracy");
      }
    }
    fr.weighted_accuracy = WeightedAccuracy(fr.confusion, weights);
    fr.headline = positive_class ? ComputeBasicMetrics(fr.confusion, *positive_class)
                                 : MacroBasicMetrics(fr.confusion);
    fold_accuracy.push_back(fr.weighted_accuracy);
    report.total += fr.confusion;
    report.folds.push_back(fr);
  }
  if (!fold_accuracy.empty()) {
    report.weighted_accuracy_mean =
        std::accumulate(fold_accuracy.begin(), fold_accuracy.end(), 0.0) / fold_accuracy.size();
    report.weighted_accuracy_sd = SampleStdDev(fold_accuracy);
  }
  if (report.total.Total() > 0) {
    report.headline = positive_class ? ComputeBasicMetrics(report.total, *positive_class)
                                     : MacroBasicMetrics(report.total);
  }
  for (int c = 0; c < g; ++c) {
    ClassReport cr;
    cr.name = class_names[c];
    if (report.total.Total() > 0) cr.rates = ComputeBasicMetrics(report.total, c);
    std::vector<bool> is_pos(scored_truth.size());
    size_t n_pos = 0;
    for (size_t i = 0; i < scored_truth.size(); ++i) {
      is_pos[i] = scored_truth[i] == c;
      n_pos += is_pos[i];
    }
    if (n_pos > 0 && n_pos < scored_truth.size()) {
      cr.roc = RocAuc(class_scores[c], is_pos);
      cr.auc = cr.roc.auc;
    }
    report.per_class.push_back(std::move(cr));
  }
  return report;
}

}  // namespace svctriage
