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


// Acceptance checks. Prints one PASS or FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "svctriage/common.h"
#include "svctriage/corpus.h"
#include "svctriage/features.h"
#include "svctriage/lexicon.h"
#include "svctriage/metrics.h"
#include "svctriage/pipeline.h"
#include "svctriage/router.h"
#include "svctriage/textprep.h"
#include "svctriage/validator_net.h"

namespace svctriage {
namespace {

namespace fs = std::filesystem;

const std::string kData = SVCTRIAGE_DATA_DIR;

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Collects failed sub-checks without stopping at the first one.
class Checks {
 public:
  void Expect(bool ok, const std::string &what) {
    ++total_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ += !ok;
  }
  Outcome Result(const std::string &summary) const {
    std::ostringstream s;
    s << summary << " (" << total_ - failed_ << "/" << total_ << " checks)";
    for (const auto &f : failures_) s << "; failed: " << f;
    return {failed_ == 0 && total_ > 0, s.str()};
  }

 private:
  size_t total_ = 0;
  size_t failed_ = 0;
  std::vector<std::string> failures_;
};

const Lexicon &Lex() {
  static const Lexicon lexicon = Lexicon::Load(kData + "/lexicon.txt");
  return lexicon;
}

PipelineConfig DeskConfig() { return PipelineConfig::Load(kData + "/desk.json"); }

std::string Fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness at the default network shape.

Outcome GradientCorrectness() {
  NetConfig net;
  net.dropout = 0.5;  // the check itself runs with dropout off
  SynthConfig synth;
  synth.n_records = 300;
  synth.seed = 5;
  SynthCorpus corpus = GenerateCorpus(synth, Lex());
  PipelineConfig pc;
  pc.lexicon_path = kData + "/lexicon.txt";
  pc.weights_path = kData + "/department_weights.txt";
  Featurizer featurizer(pc);
  std::vector<Document> docs;
  for (const auto &r : corpus.records) {
    auto [c, d] = featurizer.Pair(r);
    docs.push_back(std::move(c));
    docs.push_back(std::move(d));
  }
  TokenVocab vocab = TokenVocab::Build(docs, net.min_token_count, net.max_vocab);
  ValidatorModel model(net, vocab);
  const ServiceRecord &record = corpus.records[0];
  PairInput sample = featurizer.ValidatorInput(record, vocab);

  GradCheckOptions options;
  auto start = Clock::now();
  GradCheckResult r = GradCheck(model, sample, static_cast<int>(*record.relation), options);
  double elapsed = Seconds(start);

  Checks c;
  c.Expect(options.epsilon == 1e-5, "epsilon");
  c.Expect(r.max_relative_error <= 1e-4, "max relative error " + std::to_string(r.max_relative_error));
  c.Expect(elapsed < 60.0, "runtime " + Fmt(elapsed, 1) + " s");
  std::set<std::string> groups;
  for (const auto &[g, e] : r.per_group) {
    groups.insert(g);
    c.Expect(e <= 1e-4, g + " " + std::to_string(e));
  }
  c.Expect(groups.size() == model.params().Groups().size(), "every group sampled");
  return c.Result("max rel err " + std::to_string(r.max_relative_error) + " over " +
                  std::to_string(r.checked) + " params in " + std::to_string(groups.size()) +
                  " groups, " + Fmt(elapsed, 1) + " s");
}

// ---------------------------------------------------------------------------
// 2. Metric oracles on randomized small instances.

ConfusionMatrix RandomConfusion(Rng &rng, int g) {
  ConfusionMatrix conf(g);
  for (int a = 0; a < g; ++a) {
    if (rng.Bernoulli(0.2)) continue;
    for (int b = 0; b < g; ++b) conf.Add(a, b, rng.Below(6));
  }
  if (conf.Total() == 0) conf.Add(0, 0);
  return conf;
}

double WeightedAccuracyOracle(const ConfusionMatrix &conf, const ClassWeights &w) {
  double mass = 0, acc = 0;
  for (int k = 0; k < conf.classes(); ++k) {
    double row = 0;
    for (int p = 0; p < conf.classes(); ++p) row += conf.At(k, p);
    if (row == 0) continue;
    mass += w.weights.at(k);
    acc += w.weights.at(k) * conf.At(k, k) / row;
  }
  return acc / mass;
}

double ChiSquaredOracle(const std::vector<FeatureVector> &vectors, const std::vector<int> &labels,
                        int classes, size_t feature) {
  std::vector<std::vector<double>> observed(2, std::vector<double>(classes, 0.0));
  for (size_t i = 0; i < vectors.size(); ++i) {
    observed[vectors[i].values[feature] > 0 ? 0 : 1][labels[i]] += 1.0;
  }
  const double n = static_cast<double>(vectors.size());
  double chi2 = 0.0;
  for (int r = 0; r < 2; ++r) {
    double row = 0;
    for (int c = 0; c < classes; ++c) row += observed[r][c];
    for (int c = 0; c < classes; ++c) {
      double expected = row * (observed[0][c] + observed[1][c]) / n;
      if (expected > 0) chi2 += (observed[r][c] - expected) * (observed[r][c] - expected) / expected;
    }
  }
  return chi2;
}

double PearsonOracle(const std::vector<double> &x, const std::vector<double> &y) {
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 1e-12 || syy <= 1e-12) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double PairwiseAuc(const std::vector<double> &s, const std::vector<bool> &y) {
  double good = 0, pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    for (size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1;
      good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return good / pairs;
}

Outcome MetricOracles() {
  Checks c;
  Rng rng(20260101);
  const int kTrials = 120;
  for (int t = 0; t < kTrials; ++t) {
    int g = 2 + static_cast<int>(rng.Below(6));
    ConfusionMatrix conf = RandomConfusion(rng, g);
    ClassWeights w;
    for (int k = 0; k < g; ++k) w.weights[k] = rng.Uniform(0.01, 1.0);
    c.Expect(std::fabs(WeightedAccuracy(conf, w) - WeightedAccuracyOracle(conf, w)) <= 1e-9,
             "weighted accuracy trial " + std::to_string(t));
  }
  for (int t = 0; t < kTrials; ++t) {
    int g = 2 + static_cast<int>(rng.Below(5));
    ConfusionMatrix conf = RandomConfusion(rng, g);
    int pos = static_cast<int>(rng.Below(g));
    double tp = conf.At(pos, pos), fn = 0, fp = 0, tn = 0;
    for (int a = 0; a < g; ++a) {
      for (int b = 0; b < g; ++b) {
        if (a == pos && b != pos) fn += conf.At(a, b);
        if (a != pos && b == pos) fp += conf.At(a, b);
        if (a != pos && b != pos) tn += conf.At(a, b);
      }
    }
    auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
    double sens = ratio(tp, tp + fn), spec = ratio(tn, tn + fp), prec = ratio(tp, tp + fp);
    double f = ratio(2 * prec * sens, prec + sens);
    BasicMetrics m = ComputeBasicMetrics(conf, pos);
    c.Expect(std::fabs(m.sensitivity - sens) <= 1e-9 && std::fabs(m.specificity - spec) <= 1e-9 &&
                 std::fabs(m.precision - prec) <= 1e-9 && std::fabs(m.f_score - f) <= 1e-9,
             "basic metrics trial " + std::to_string(t));
  }
  for (int t = 0; t < kTrials; ++t) {
    size_t n = 2 + rng.Below(49), f = 1 + rng.Below(6);
    int classes = 2 + static_cast<int>(rng.Below(4));
    std::vector<FeatureVector> vectors;
    std::vector<int> labels;
    for (size_t i = 0; i < n; ++i) {
      std::vector<double> v(f);
      for (auto &x : v) x = rng.Bernoulli(0.4) ? static_cast<double>(1 + rng.Below(3)) : 0.0;
      vectors.push_back({"", v});
      labels.push_back(static_cast<int>(rng.Below(classes)));
    }
    labels[0] = classes - 1;
    std::vector<double> scores = ChiSquaredScores(vectors, labels);
    for (size_t j = 0; j < f; ++j) {
      double oracle = ChiSquaredOracle(vectors, labels, classes, j);
      c.Expect(std::fabs(scores[j] - oracle) <= 1e-9 * std::max(1.0, oracle),
               "chi-squared trial " + std::to_string(t));
    }
  }
  for (int t = 0; t < kTrials; ++t) {
    size_t n = 2 + rng.Below(30), f = 2 + rng.Below(5);
    std::vector<FeatureVector> vectors;
    std::vector<std::vector<double>> cols(f, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i) {
      std::vector<double> v(f);
      for (size_t j = 0; j < f; ++j) v[j] = cols[j][i] = rng.Uniform() < 0.3 ? 0.0 : rng.Uniform(-2, 2);
      vectors.push_back({"", v});
    }
    Matrix corr = CorrelationMatrix(vectors);
    for (size_t a = 0; a < f; ++a) {
      for (size_t b = a + 1; b < f; ++b) {
        c.Expect(std::fabs(corr[a][b] - PearsonOracle(cols[a], cols[b])) <= 1e-9,
                 "pearson trial " + std::to_string(t));
      }
    }
  }
  for (int t = 0; t < kTrials; ++t) {
    size_t n = 2 + rng.Below(40);
    std::vector<double> s(n);
    std::vector<bool> y(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.Below(8)) / 8.0;
      y[i] = rng.Bernoulli(0.5);
    }
    y[0] = true;
    y[1] = false;
    double oracle = PairwiseAuc(s, y);
    c.Expect(std::fabs(RocAuc(s, y).auc - oracle) <= 1e-9, "auc trial " + std::to_string(t));
    c.Expect(std::fabs(TrapezoidArea(RocAuc(s, y)) - oracle) <= 1e-9,
             "trapezoid trial " + std::to_string(t));
  }
  return c.Result(std::to_string(kTrials) + " randomized instances per metric");
}

// ---------------------------------------------------------------------------
// 3. Weighted-accuracy worked example with the shipped weights.

Outcome WorkedWeightedAccuracy() {
  std::vector<std::string> names = DepartmentNames();
  ClassWeights w = ClassWeights::Load(kData + "/department_weights.txt", names);
  const int boom = DepartmentIndex(Department::kBoom);
  const int controls = DepartmentIndex(Department::kControls);
  ConfusionMatrix conf(kNumDepartments);
  conf.Add(boom, boom, 3);
  conf.Add(boom, controls, 1);
  conf.Add(controls, controls, 1);
  conf.Add(controls, boom, 1);
  double wa = WeightedAccuracy(conf, w);
  return {std::fabs(wa - 0.6602) <= 1e-4, "weighted accuracy " + Fmt(wa, 6) + " vs 0.6602"};
}

// ---------------------------------------------------------------------------
// 4. Decision trees equal an exhaustive split search.

struct Dataset {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  int classes = 0;
  SparseMatrix Matrix() const { return SparseMatrix::FromDense(rows, rows[0].size()); }
};

Dataset RandomDataset(Rng &rng, size_t n, size_t f, int classes, int levels) {
  Dataset d;
  d.classes = classes;
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> row(f);
    for (auto &v : row) v = static_cast<double>(rng.Below(levels));
    d.rows.push_back(row);
    d.y.push_back(static_cast<int>(rng.Below(classes)));
  }
  return d;
}

double Gini(const std::vector<double> &counts) {
  double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  double sum = 0;
  for (double c : counts) sum += (c / n) * (c / n);
  return 1.0 - sum;
}

// Every feature, every midpoint between distinct node values, weighted Gini;
// the lowest feature and then the lowest threshold win ties. A split must
// lower the impurity.
class OracleTree {
 public:
  OracleTree(const Dataset &d, const TreeParams &p) : d_(d), p_(p) {}

  Tree Build() {
    std::vector<size_t> rows(d_.rows.size());
    std::iota(rows.begin(), rows.end(), 0);
    Grow(rows, 0);
    return tree_;
  }

 private:
  std::vector<double> Counts(const std::vector<size_t> &rows) const {
    std::vector<double> c(d_.classes, 0.0);
    for (size_t r : rows) c[d_.y[r]] += 1;
    return c;
  }

  int Grow(const std::vector<size_t> &rows, size_t depth) {
    int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<double> counts = Counts(rows);
    tree_.nodes[id].value = counts;
    size_t present = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; });
    size_t min_leaf = std::max<size_t>(p_.min_leaf, 1);
    if (depth >= p_.max_depth || rows.size() < 2 * min_leaf || present <= 1) return id;
    const double n = static_cast<double>(rows.size());
    double best = Gini(counts);
    int best_f = -1;
    double best_t = 0;
    for (size_t f = 0; f < d_.rows[0].size(); ++f) {
      std::set<double> values;
      for (size_t r : rows) values.insert(d_.rows[r][f]);
      std::vector<double> v(values.begin(), values.end());
      for (size_t i = 0; i + 1 < v.size(); ++i) {
        double t = (v[i] + v[i + 1]) / 2;
        std::vector<size_t> l, r;
        for (size_t row : rows) (d_.rows[row][f] <= t ? l : r).push_back(row);
        if (l.size() < min_leaf || r.size() < min_leaf) continue;
        double imp = (l.size() * Gini(Counts(l)) + r.size() * Gini(Counts(r))) / n;
        if (imp < best - 1e-9) {
          best = imp;
          best_f = static_cast<int>(f);
          best_t = t;
        }
      }
    }
    if (best_f < 0) return id;
    std::vector<size_t> l, r;
    for (size_t row : rows) (d_.rows[row][best_f] <= best_t ? l : r).push_back(row);
    tree_.nodes[id].feature = best_f;
    tree_.nodes[id].threshold = best_t;
    int li = Grow(l, depth + 1);
    tree_.nodes[id].left = li;
    int ri = Grow(r, depth + 1);
    tree_.nodes[id].right = ri;
    return id;
  }

  const Dataset &d_;
  TreeParams p_;
  Tree tree_;
};

Outcome TreeOracle() {
  Checks c;
  Rng rng(404);
  const int kCases = 80;
  for (int t = 0; t < kCases; ++t) {
    size_t n = 2 + rng.Below(29), f = 1 + rng.Below(5);
    Dataset d = RandomDataset(rng, n, f, 2 + static_cast<int>(rng.Below(3)),
                              2 + static_cast<int>(rng.Below(4)));
    TreeParams p;
    p.max_depth = 1 + rng.Below(8);
    p.min_leaf = 1 + rng.Below(3);
    c.Expect(TrainDecisionTree(d.Matrix(), d.y, d.classes, p) == OracleTree(d, p).Build(),
             "case " + std::to_string(t));
  }
  return c.Result(std::to_string(kCases) + " datasets, n <= 30, features <= 5");
}

// ---------------------------------------------------------------------------
// 5. Boosting never raises the training loss.

Outcome GtbMonotonicity() {
  Checks c;
  Rng rng(505);
  double worst = -1e300;
  for (int t = 0; t < 20; ++t) {
    Dataset d = RandomDataset(rng, 40 + rng.Below(80), 1 + rng.Below(6),
                              2 + static_cast<int>(rng.Below(5)), 5);
    GtbParams p;
    p.n_stages = 40;
    p.learning_rate = rng.Uniform(0.05, 1.0);
    p.max_depth = 1 + rng.Below(4);
    Gtb g = TrainGtb(d.Matrix(), d.y, d.classes, p);
    c.Expect(g.train_loss.size() == p.n_stages + 1, "loss history length");
    for (size_t s = 1; s < g.train_loss.size(); ++s) {
      worst = std::max(worst, g.train_loss[s] - g.train_loss[s - 1]);
      c.Expect(g.train_loss[s] <= g.train_loss[s - 1] + 1e-12,
               "dataset " + std::to_string(t) + " stage " + std::to_string(s));
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", worst);
  return c.Result("20 datasets, largest per-stage change " + std::string(buf));
}

// ---------------------------------------------------------------------------
// 6. End-to-end synthetic performance.

SynthCorpus Corpus(const PipelineConfig &config) {
  return GenerateCorpus(config.SeededSynth(), Lexicon::Load(config.lexicon_path));
}

Outcome EndToEnd() {
  PipelineConfig config = DeskConfig();
  config.synth.n_records = 10000;
  config.synth.noise_rate = 0.05;
  config.synth.abbreviation_rate = 0.3;
  config.router_kind = RouterKind::kGtb;
  SynthCorpus corpus = Corpus(config);
  auto start = Clock::now();
  EvaluationReports reports = Evaluate(config, corpus.records);
  double elapsed = Seconds(start);
  const double validator = reports.validation->weighted_accuracy_mean;
  const double routing = reports.routing.weighted_accuracy_mean;

  Checks c;
  c.Expect(reports.validation->folds.size() == 10 && reports.routing.folds.size() == 10,
           "ten folds");
  c.Expect(validator >= 0.90, "validator " + Fmt(validator));
  c.Expect(routing >= 0.85, "routing " + Fmt(routing));
  c.Expect(elapsed <= 15 * 60, "runtime " + Fmt(elapsed, 0) + " s");
  std::ostringstream recall;
  const ConfusionMatrix &t = reports.validation->total;
  for (int k = 0; k < t.classes(); ++k) {
    recall << (k ? "/" : "") << Fmt(static_cast<double>(t.At(k, k)) / t.RowTotal(k), 3);
  }
  return c.Result("validator " + Fmt(validator) + " (recall Valid/False/Vague " + recall.str() +
                  "), GTB routing " + Fmt(routing) + ", " + Fmt(elapsed, 0) + " s");
}

// ---------------------------------------------------------------------------
// 7. Domain text processing against the generic analyzer.

double RoutingOnValid(const PipelineConfig &config, std::span<const ServiceRecord> records) {
  Featurizer featurizer(config);
  std::vector<int> labels = RoutingLabels(records, config);
  std::vector<ServiceRecord> subset;
  std::vector<Document> docs;
  std::vector<int> y;
  for (size_t i = 0; i < records.size(); ++i) {
    if (labels[i] < 0) continue;
    subset.push_back(records[i]);
    docs.push_back(featurizer.RoutingDocument(records[i]));
    y.push_back(labels[i]);
  }
  FoldAssignment folds = SplitFolds(subset, config.folds, config.FoldSeed());
  ClassWeights weights = ClassWeights::Load(config.weights_path, DepartmentNames());
  return CrossValidateRouting(config, docs, y, folds, weights).weighted_accuracy_mean;
}

Outcome Ablation() {
  PipelineConfig config = DeskConfig();
  config.synth.n_records = 5000;
  config.synth.noise_rate = 0.05;
  config.synth.abbreviation_rate = 0.6;
  config.router_kind = RouterKind::kGtb;
  SynthCorpus corpus = Corpus(config);
  double domain = RoutingOnValid(config, corpus.records);
  config.domain_nlp = false;
  double generic = RoutingOnValid(config, corpus.records);
  double gap = (domain - generic) * 100;
  return {gap >= 10.0, "domain " + Fmt(domain) + ", generic " + Fmt(generic) + ", gap " +
                           Fmt(gap, 2) + " points (needs >= 10)"};
}

// ---------------------------------------------------------------------------
// 8. Forest variance against a single tree.

Outcome ForestVariance() {
  std::vector<double> tree_acc, forest_acc;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    PipelineConfig config = DeskConfig();
    config.seed = seed;
    config.validation = false;
    config.synth.n_records = 1500;
    config.synth.noise_rate = 0.3;
    config.synth.abbreviation_rate = 0.3;
    SynthCorpus corpus = Corpus(config);
    FoldAssignment folds = SplitFolds(corpus.records, 3, config.FoldSeed());
    std::vector<ServiceRecord> train, test;
    for (size_t i = 0; i < corpus.records.size(); ++i) {
      (folds.fold_of[i] == 0 ? test : train).push_back(corpus.records[i]);
    }
    std::vector<int> test_labels = RoutingLabels(test, config);
    for (RouterKind kind : {RouterKind::kDecisionTree, RouterKind::kRandomForest}) {
      config.router_kind = kind;
      TrainedPipeline model = TrainPipeline(config, train);
      Featurizer featurizer(config);
      double correct = 0, total = 0;
      for (size_t i = 0; i < test.size(); ++i) {
        if (test_labels[i] < 0) continue;
        RoutingDecision d = Route(model, featurizer, test[i]);
        total += 1;
        correct += *d.department == DepartmentName(DepartmentFromIndex(test_labels[i]));
      }
      (kind == RouterKind::kDecisionTree ? tree_acc : forest_acc).push_back(correct / total);
    }
  }
  double tree_sd = SampleStdDev(tree_acc), forest_sd = SampleStdDev(forest_acc);
  double tree_mean = std::accumulate(tree_acc.begin(), tree_acc.end(), 0.0) / 10;
  double forest_mean = std::accumulate(forest_acc.begin(), forest_acc.end(), 0.0) / 10;
  return {forest_sd < tree_sd, "10 seeds: forest sd " + Fmt(forest_sd) + " (mean " +
                                   Fmt(forest_mean) + "), tree sd " + Fmt(tree_sd) + " (mean " +
                                   Fmt(tree_mean) + ")"};
}

// ---------------------------------------------------------------------------
// 9. Two full runs produce identical artifacts.

// Digest of every file under `dir`, in path order.
std::string TreeDigest(const fs::path &dir) {
  std::vector<fs::path> files;
  for (const auto &e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  uint64_t h = Fnv1a64("");
  for (const auto &f : files) {
    h = Fnv1a64(fs::relative(f, dir).string(), h);
    h = Fnv1a64(ReadFile(f.string()), h);
  }
  return HexDigest(h);
}

std::string FullRun(const PipelineConfig &config, const fs::path &dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  SynthCorpus corpus = Corpus(config);
  std::ostringstream records, truth;
  WriteRecords(records, corpus.records);
  WriteGroundTruth(truth, corpus);
  WriteFileAtomic((dir / "corpus.jsonl").string(), records.str());
  WriteFileAtomic((dir / "ground_truth.tsv").string(), truth.str());
  TrainPipeline(config, corpus.records).Save((dir / "models").string());
  EvaluationReports reports = Evaluate(config, corpus.records);
  WriteFileAtomic((dir / "validation_report.txt").string(), reports.validation->ToText());
  WriteFileAtomic((dir / "routing_report.txt").string(), reports.routing.ToText());
  return TreeDigest(dir);
}

Outcome Determinism() {
  PipelineConfig config = DeskConfig();
  config.synth.n_records = 800;
  config.folds = 4;
  config.net.epochs = 3;
  config.router.gtb.n_stages = 40;
  const fs::path base = fs::temp_directory_path() / "svctriage_acceptance";
  std::string a = FullRun(config, base / "a");
  std::string b = FullRun(config, base / "b");
  config.seed += 1;
  std::string other = FullRun(config, base / "c");
  fs::remove_all(base);
  Checks c;
  c.Expect(a == b, "repeat run digest " + a + " vs " + b);
  c.Expect(a != other, "a different seed changes the artifacts");
  return c.Result("artifact digest " + a);
}

// ---------------------------------------------------------------------------
// 10. Text processing goldens.

Outcome TextprepGoldens() {
  using Strings = std::vector<std::string>;
  Checks c;
  c.Expect(Lemmatize("brk", Lex()) == "break", "brk");
  c.Expect(ApplyStopRules({"an", "50", "failed"}, Lex()) == Strings{"an50", "failed"}, "an 50");
  std::vector<TaggedToken> upper = Tokenize("upper valve leaking", Lex());
  c.Expect(!upper.empty() && upper[0].text == "upper valve" && upper[0].n == 2, "upper valve");
  std::vector<TaggedToken> down = Tokenize("unit down", Lex());
  c.Expect(down.size() == 1 && down[0].text == "unit down", "unit down");
  VagueStrip vague = StripVaguePhrases("service needed", Lex());
  c.Expect(vague.vague && vague.text.empty(), "service needed");
  auto terms = RecognizeTerms("replaced gasket pn9700007824");
  c.Expect(terms.size() == 1 && terms[0].kind == TermKind::kPartNumber &&
               terms[0].raw == "pn9700007824",
           "part number");
  c.Expect(Normalize("cut off and replaced damaged area or repair--perform test") ==
               Strings{"cut off and replaced damaged area or repair", "perform test"},
           "segmentation");
  TextAnalyzer analyzer(Lex(), true);
  Document doc = analyzer.Analyze("Unit DWN--HYD inspected -- replaced related valve");
  c.Expect(doc.segments.size() == 3, "worked report segments");
  c.Expect(!doc.segments.empty() && !doc.segments[0].empty() &&
               doc.segments[0][0].text == "unit down",
           "worked report merge");
  return c.Result("worked examples");
}

}  // namespace
}  // namespace svctriage

int main(int argc, char **argv) {
  using namespace svctriage;
  struct Criterion {
    int id;
    const char *name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", GradientCorrectness},
      {2, "metric oracles", MetricOracles},
      {3, "weighted accuracy worked example", WorkedWeightedAccuracy},
      {4, "decision tree oracle", TreeOracle},
      {5, "boosting monotonicity", GtbMonotonicity},
      {6, "end-to-end synthetic performance", EndToEnd},
      {7, "domain text processing ablation", Ablation},
      {8, "forest variance", ForestVariance},
      {9, "determinism", Determinism},
      {10, "text processing goldens", TextprepGoldens},
  };
  // Optional arguments select criteria by number.
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto &c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    auto start = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d. %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), Seconds(start));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
