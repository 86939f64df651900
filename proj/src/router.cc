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

#include "svctriage/router.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svctriage/common.h"
#include "svctriage/validator_net.h"

namespace svctriage {

// ---------------------------------------------------------------------------
// Sparse storage

SparseMatrix SparseMatrix::FromDense(const std::vector<std::vector<double>> &rows,
                                     size_t cols) {
  SparseMatrix m(cols);
  for (const auto &r : rows) m.AddRow(r);
  return m;
}

void SparseMatrix::AddRow(std::span<const double> dense) {
  if (dense.size() != cols_) {
    throw DataError("feature row has " + std::to_string(dense.size()) + " values, expected " +
                    std::to_string(cols_));
  }
  for (size_t c = 0; c < dense.size(); ++c) {
    if (dense[c] != 0.0) {
      col_.push_back(static_cast<uint32_t>(c));
      val_.push_back(dense[c]);
    }
  }
  row_ptr_.push_back(col_.size());
}

double SparseMatrix::At(size_t row, size_t col) const {
  auto first = col_.begin() + row_ptr_[row];
  auto last = col_.begin() + row_ptr_[row + 1];
  auto it = std::lower_bound(first, last, static_cast<uint32_t>(col));
  return it != last && *it == col ? val_[it - col_.begin()] : 0.0;
}

std::vector<double> SparseMatrix::Dense(size_t row) const {
  std::vector<double> out(cols_, 0.0);
  for (size_t j = row_ptr_[row]; j < row_ptr_[row + 1]; ++j) out[col_[j]] = val_[j];
  return out;
}

SparseMatrix SparseMatrix::Subset(std::span<const size_t> rows) const {
  SparseMatrix m(cols_);
  for (size_t r : rows) {
    m.col_.insert(m.col_.end(), col_.begin() + row_ptr_[r], col_.begin() + row_ptr_[r + 1]);
    m.val_.insert(m.val_.end(), val_.begin() + row_ptr_[r], val_.begin() + row_ptr_[r + 1]);
    m.row_ptr_.push_back(m.col_.size());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Trees

const std::vector<double> &Tree::Leaf(std::span<const double> x) const {
  int at = 0;
  while (nodes[at].feature >= 0) {
    at = x[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
  }
  return nodes[at].value;
}

const std::vector<double> &Tree::Leaf(const SparseMatrix &m, size_t row) const {
  int at = 0;
  while (nodes[at].feature >= 0) {
    double v = m.At(row, nodes[at].feature);
    at = v <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
  }
  return nodes[at].value;
}

size_t Tree::Depth() const {
  if (nodes.empty()) return 0;
  std::vector<size_t> depth(nodes.size(), 0);
  size_t best = 0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, depth[i]);
    if (nodes[i].feature >= 0) {
      depth[nodes[i].left] = depth[i] + 1;
      depth[nodes[i].right] = depth[i] + 1;
    }
  }
  return best;
}

bool Tree::operator==(const Tree &other) const {
  if (nodes.size() != other.nodes.size()) return false;
  for (size_t i = 0; i < nodes.size(); ++i) {
    const Node &a = nodes[i], &b = other.nodes[i];
    if (a.feature != b.feature || a.left != b.left || a.right != b.right || a.value != b.value) {
      return false;
    }
    if (a.feature >= 0 && a.threshold != b.threshold) return false;
  }
  return true;
}

int ArgMax(std::span<const double> scores) {
  int best = 0;
  for (size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best;
}

namespace {

constexpr double kTieSlack = 1e-12;

// Per-feature sorted distinct values (always including zero) and the bin of
// every stored nonzero.
struct Binning {
  std::vector<size_t> offset;     // features + 1
  std::vector<double> value;      // global bin -> value
  std::vector<size_t> zero_bin;   // per feature
  std::vector<uint32_t> entry;    // per stored nonzero, in row order
  std::vector<size_t> entry_ptr;  // row -> first entry

  explicit Binning(const SparseMatrix &x) {
    const size_t f_count = x.cols();
    std::vector<std::vector<double>> distinct(f_count, std::vector<double>{0.0});
    for (size_t r = 0; r < x.rows(); ++r) {
      auto cols = x.RowCols(r);
      auto vals = x.RowValues(r);
      for (size_t j = 0; j < cols.size(); ++j) distinct[cols[j]].push_back(vals[j]);
    }
    offset.assign(f_count + 1, 0);
    zero_bin.resize(f_count);
    for (size_t f = 0; f < f_count; ++f) {
      auto &d = distinct[f];
      std::sort(d.begin(), d.end());
      d.erase(std::unique(d.begin(), d.end()), d.end());
      offset[f + 1] = offset[f] + d.size();
      zero_bin[f] = offset[f] + (std::lower_bound(d.begin(), d.end(), 0.0) - d.begin());
      value.insert(value.end(), d.begin(), d.end());
    }
    entry_ptr.assign(x.rows() + 1, 0);
    for (size_t r = 0; r < x.rows(); ++r) {
      auto cols = x.RowCols(r);
      auto vals = x.RowValues(r);
      for (size_t j = 0; j < cols.size(); ++j) {
        size_t f = cols[j];
        auto first = value.begin() + offset[f];
        auto last = value.begin() + offset[f + 1];
        entry.push_back(static_cast<uint32_t>(std::lower_bound(first, last, vals[j]) - value.begin()));
      }
      entry_ptr[r + 1] = entry.size();
    }
  }
  size_t bins() const { return value.size(); }
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

std::vector<size_t> SampleFeatures(size_t total, size_t wanted, Rng *rng) {
  std::vector<size_t> all(total);
  std::iota(all.begin(), all.end(), 0);
  if (!rng || wanted == 0 || wanted >= total) return all;
  for (size_t i = 0; i < wanted; ++i) {
    size_t j = i + rng->Below(total - i);
    std::swap(all[i], all[j]);
  }
  all.resize(wanted);
  std::sort(all.begin(), all.end());
  return all;
}

// Gini classification tree builder.
class ClassTreeBuilder {
 public:
  ClassTreeBuilder(const SparseMatrix &x, const Binning &bins, std::span<const int> y,
                   int classes, const TreeParams &params, Rng *rng)
      : x_(x), bins_(bins), y_(y), g_(classes), params_(params), rng_(rng),
        hist_(bins.bins() * classes, 0), touched_(x.cols(), 0) {}

  Tree Build(std::vector<size_t> rows) {
    tree_.nodes.clear();
    Grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int Grow(std::vector<size_t> rows, size_t depth) {
    int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<double> counts(g_, 0.0);
    for (size_t r : rows) counts[y_[r]] += 1.0;
    tree_.nodes[id].value = counts;
    const double n = static_cast<double>(rows.size());
    size_t nonzero_classes = std::count_if(counts.begin(), counts.end(),
                                           [](double c) { return c > 0.0; });
    if (depth >= params_.max_depth || rows.size() < 2 * std::max<size_t>(params_.min_leaf, 1) ||
        nonzero_classes <= 1) {
      return id;
    }
    double parent = 0.0;
    for (double c : counts) parent += c * c;
    parent /= n;
    SplitChoice best = FindSplit(rows, counts, parent);
    if (best.feature < 0) return id;
    std::vector<size_t> left, right;
    for (size_t r : rows) {
      (x_.At(r, best.feature) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    int l = Grow(std::move(left), depth + 1);
    tree_.nodes[id].left = l;
    int r = Grow(std::move(right), depth + 1);
    tree_.nodes[id].right = r;
    return id;
  }

  SplitChoice FindSplit(const std::vector<size_t> &rows, const std::vector<double> &counts,
                        double parent) {
    std::vector<size_t> used_features;
    for (size_t r : rows) {
      for (size_t j = bins_.entry_ptr[r]; j < bins_.entry_ptr[r + 1]; ++j) {
        ++hist_[bins_.entry[j] * g_ + y_[r]];
      }
      for (uint32_t f : x_.RowCols(r)) {
        if (!touched_[f]) {
          touched_[f] = 1;
          used_features.push_back(f);
        }
      }
    }
    std::vector<size_t> candidates =
        SampleFeatures(x_.cols(), params_.max_features, rng_);
    SplitChoice best;
    best.score = parent + kTieSlack;
    const size_t min_leaf = std::max<size_t>(params_.min_leaf, 1);
    const double n = static_cast<double>(rows.size());
    std::vector<double> left(g_), zero(g_);
    for (size_t f : candidates) {
      if (!touched_[f]) continue;  // constant zero inside this node
      const size_t lo = bins_.offset[f], hi = bins_.offset[f + 1], zb = bins_.zero_bin[f];
      zero = counts;
      for (size_t b = lo; b < hi; ++b) {
        if (b == zb) continue;
        for (int c = 0; c < g_; ++c) zero[c] -= hist_[b * g_ + c];
      }
      std::fill(left.begin(), left.end(), 0.0);
      double n_left = 0.0;
      double prev_value = 0.0;
      bool have_prev = false;
      for (size_t b = lo; b < hi; ++b) {
        double bin_n = 0.0;
        for (int c = 0; c < g_; ++c) bin_n += b == zb ? zero[c] : hist_[b * g_ + c];
        if (bin_n == 0.0) continue;
        if (have_prev && n_left >= min_leaf && n - n_left >= min_leaf) {
          double sl = 0.0, sr = 0.0;
          for (int c = 0; c < g_; ++c) {
            double r = counts[c] - left[c];
            sl += left[c] * left[c];
            sr += r * r;
          }
          double score = sl / n_left + sr / (n - n_left);
          if (score > best.score) {
            best.score = score + kTieSlack;
            best.feature = static_cast<int>(f);
            best.threshold = (prev_value + bins_.value[b]) / 2.0;
          }
        }
        for (int c = 0; c < g_; ++c) left[c] += b == zb ? zero[c] : hist_[b * g_ + c];
        n_left += bin_n;
        prev_value = bins_.value[b];
        have_prev = true;
      }
    }
    // Reset the histogram cells this node touched.
    for (size_t f : used_features) {
      touched_[f] = 0;
      std::fill(hist_.begin() + bins_.offset[f] * g_, hist_.begin() + bins_.offset[f + 1] * g_, 0);
    }
    return best;
  }

  const SparseMatrix &x_;
  const Binning &bins_;
  std::span<const int> y_;
  int g_;
  TreeParams params_;
  Rng *rng_;
  std::vector<double> hist_;
  std::vector<char> touched_;
  Tree tree_;
};

// Least-squares regression tree on gradients with Newton leaf values.
class RegressionTreeBuilder {
 public:
  RegressionTreeBuilder(const SparseMatrix &x, const Binning &bins, size_t max_depth,
                        size_t min_leaf, double leaf_scale)
      : x_(x), bins_(bins), max_depth_(max_depth), min_leaf_(std::max<size_t>(min_leaf, 1)),
        leaf_scale_(leaf_scale), hist_(bins.bins() * 3, 0.0), touched_(x.cols(), 0) {}

  Tree Build(std::span<const double> grad, std::span<const double> hess) {
    grad_ = grad;
    hess_ = hess;
    tree_.nodes.clear();
    std::vector<size_t> rows(x_.rows());
    std::iota(rows.begin(), rows.end(), 0);
    Grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int Grow(std::vector<size_t> rows, size_t depth) {
    int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double sg = 0.0, sh = 0.0;
    for (size_t r : rows) {
      sg += grad_[r];
      sh += hess_[r];
    }
    tree_.nodes[id].value = {sh > 1e-12 ? leaf_scale_ * sg / sh : 0.0};
    const double n = static_cast<double>(rows.size());
    if (depth >= max_depth_ || rows.size() < 2 * min_leaf_) return id;
    SplitChoice best = FindSplit(rows, n, sg, sh, sg * sg / n);
    if (best.feature < 0) return id;
    std::vector<size_t> left, right;
    for (size_t r : rows) {
      (x_.At(r, best.feature) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    int l = Grow(std::move(left), depth + 1);
    tree_.nodes[id].left = l;
    int r = Grow(std::move(right), depth + 1);
    tree_.nodes[id].right = r;
    return id;
  }

  SplitChoice FindSplit(const std::vector<size_t> &rows, double n, double sg, double sh,
                        double parent) {
    std::vector<size_t> used;
    for (size_t r : rows) {
      for (size_t j = bins_.entry_ptr[r]; j < bins_.entry_ptr[r + 1]; ++j) {
        double *cell = &hist_[bins_.entry[j] * 3];
        cell[0] += 1.0;
        cell[1] += grad_[r];
        cell[2] += hess_[r];
      }
      for (uint32_t f : x_.RowCols(r)) {
        if (!touched_[f]) {
          touched_[f] = 1;
          used.push_back(f);
        }
      }
    }
    std::sort(used.begin(), used.end());
    SplitChoice best;
    best.score = parent + kTieSlack;
    for (size_t f : used) {
      const size_t lo = bins_.offset[f], hi = bins_.offset[f + 1], zb = bins_.zero_bin[f];
      double zn = n, zg = sg;
      for (size_t b = lo; b < hi; ++b) {
        if (b == zb) continue;
        zn -= hist_[b * 3];
        zg -= hist_[b * 3 + 1];
      }
      double nl = 0.0, gl = 0.0, prev_value = 0.0;
      bool have_prev = false;
      for (size_t b = lo; b < hi; ++b) {
        double bn = b == zb ? zn : hist_[b * 3];
        double bg = b == zb ? zg : hist_[b * 3 + 1];
        if (bn <= 0.5) continue;
        if (have_prev && nl >= min_leaf_ && n - nl >= min_leaf_) {
          double gr = sg - gl;
          double score = gl * gl / nl + gr * gr / (n - nl);
          if (score > best.score) {
            best.score = score + kTieSlack;
            best.feature = static_cast<int>(f);
            best.threshold = (prev_value + bins_.value[b]) / 2.0;
          }
        }
        nl += bn;
        gl += bg;
        prev_value = bins_.value[b];
        have_prev = true;
      }
    }
    for (size_t f : used) {
      touched_[f] = 0;
      std::fill(hist_.begin() + bins_.offset[f] * 3, hist_.begin() + bins_.offset[f + 1] * 3, 0.0);
    }
    (void)sh;
    return best;
  }

  const SparseMatrix &x_;
  const Binning &bins_;
  size_t max_depth_;
  size_t min_leaf_;
  double leaf_scale_;
  std::span<const double> grad_, hess_;
  std::vector<double> hist_;
  std::vector<char> touched_;
  Tree tree_;
};

void CheckTrainingData(const SparseMatrix &x, std::span<const int> y, int classes) {
  if (x.rows() != y.size()) throw DataError("one label per feature row required");
  if (x.rows() == 0) throw DataError("cannot train a router on zero rows");
  if (classes < 1) throw ConfigError("classes: must be >= 1");
  for (int label : y) {
    if (label < 0 || label >= classes) throw DataError("label out of range");
  }
}

double CrossEntropy(const std::vector<double> &f, std::span<const int> y, int k) {
  double total = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    std::span<const double> row(f.data() + i * k, k);
    double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    total += m + std::log(s) - row[y[i]];
  }
  return total / static_cast<double>(y.size());
}

}  // namespace

Tree TrainClassificationTree(const SparseMatrix &x, std::span<const int> y, int classes,
                             std::span<const size_t> rows, const TreeParams &params,
                             uint64_t seed) {
  CheckTrainingData(x, y, classes);
  Binning bins(x);
  Rng rng(seed);
  ClassTreeBuilder builder(x, bins, y, classes, params, params.max_features ? &rng : nullptr);
  return builder.Build(std::vector<size_t>(rows.begin(), rows.end()));
}

Tree TrainDecisionTree(const SparseMatrix &x, std::span<const int> y, int classes,
                       const TreeParams &params) {
  std::vector<size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  TreeParams p = params;
  p.max_features = 0;
  return TrainClassificationTree(x, y, classes, rows, p);
}

Forest TrainRandomForest(const SparseMatrix &x, std::span<const int> y, int classes,
                         const ForestParams &params) {
  CheckTrainingData(x, y, classes);
  if (params.n_trees < 1) throw ConfigError("n_trees: must be >= 1");
  Binning bins(x);
  TreeParams tp = params.tree;
  tp.max_features = params.max_features
                        ? params.max_features
                        : std::max<size_t>(1, static_cast<size_t>(std::sqrt(double(x.cols()))));
  if (tp.max_features >= x.cols()) tp.max_features = 0;
  Forest forest;
  for (size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(DeriveSeed(params.seed, "forest-tree-" + std::to_string(t)));
    std::vector<size_t> rows(x.rows());
    if (params.bootstrap) {
      for (size_t &r : rows) r = rng.Below(x.rows());
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    ClassTreeBuilder builder(x, bins, y, classes, tp, tp.max_features ? &rng : nullptr);
    forest.trees.push_back(builder.Build(std::move(rows)));
  }
  return forest;
}

Gtb TrainGtb(const SparseMatrix &x, std::span<const int> y, int classes,
             const GtbParams &params) {
  CheckTrainingData(x, y, classes);
  if (!(params.learning_rate > 0.0)) throw ConfigError("gtb learning_rate: must be positive");
  const size_t n = x.rows(), k = classes;
  Gtb model;
  std::vector<double> counts(k, 0.0);
  for (int label : y) counts[label] += 1.0;
  model.init.resize(k);
  for (size_t c = 0; c < k; ++c) {
    model.init[c] = counts[c] > 0.0 ? std::log(counts[c] / n) : -30.0;
  }
  std::vector<double> f(n * k);
  for (size_t i = 0; i < n; ++i) std::copy(model.init.begin(), model.init.end(), f.begin() + i * k);
  double loss = CrossEntropy(f, y, classes);
  model.train_loss.push_back(loss);
  if (params.n_stages == 0) return model;

  Binning bins(x);
  const double leaf_scale = k > 1 ? (k - 1.0) / k : 1.0;
  RegressionTreeBuilder builder(x, bins, params.max_depth, params.min_leaf, leaf_scale);
  std::vector<double> prob(n * k), grad(n), hess(n), delta(n * k), trial(n * k);
  for (size_t s = 0; s < params.n_stages; ++s) {
    for (size_t i = 0; i < n; ++i) {
      auto p = Softmax(std::span<const double>(f.data() + i * k, k));
      std::copy(p.begin(), p.end(), prob.begin() + i * k);
    }
    std::vector<Tree> stage(k);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (size_t c = 0; c < k; ++c) {
      if (counts[c] == 0.0) continue;
      for (size_t i = 0; i < n; ++i) {
        double p = prob[i * k + c];
        grad[i] = (y[i] == static_cast<int>(c) ? 1.0 : 0.0) - p;
        hess[i] = p * (1.0 - p);
        if (!std::isfinite(grad[i])) {
          throw NumericError("non-finite boosting residual at stage " + std::to_string(s));
        }
      }
      stage[c] = builder.Build(grad, hess);
      for (size_t i = 0; i < n; ++i) delta[i * k + c] = stage[c].Leaf(x, i)[0];
    }
    // Halve the step until the training loss does not increase.
    double step = params.learning_rate;
    double next = loss;
    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      for (size_t j = 0; j < n * k; ++j) trial[j] = f[j] + step * delta[j];
      next = CrossEntropy(trial, y, classes);
      if (std::isfinite(next) && next <= loss) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      step = 0.0;
      next = loss;
    } else {
      f.swap(trial);
    }
    loss = next;
    model.stages.push_back(std::move(stage));
    model.step.push_back(step);
    model.train_loss.push_back(loss);
  }
  return model;
}

Svm TrainSvm(const SparseMatrix &x, std::span<const int> y, int classes,
             const SvmParams &params) {
  CheckTrainingData(x, y, classes);
  if (params.c < 0.0) throw ConfigError("svm c: must be >= 0");
  const size_t n = x.rows(), d = x.cols();
  Svm model;
  model.mean.assign(d, 0.0);
  model.scale.assign(d, 1.0);
  std::vector<double> sq(d, 0.0);
  for (size_t r = 0; r < n; ++r) {
    auto cols = x.RowCols(r);
    auto vals = x.RowValues(r);
    for (size_t j = 0; j < cols.size(); ++j) {
      model.mean[cols[j]] += vals[j];
      sq[cols[j]] += vals[j] * vals[j];
    }
  }
  for (size_t j = 0; j < d; ++j) {
    model.mean[j] /= n;
    double var = sq[j] / n - model.mean[j] * model.mean[j];
    double sd = std::sqrt(std::max(var, 0.0));
    model.scale[j] = sd > 1e-12 * std::max(1.0, std::fabs(model.mean[j])) ? 1.0 / sd : 1.0;
  }
  model.weights.assign(classes, std::vector<double>(d + 1, 0.0));
  if (params.c == 0.0 || params.epochs == 0) return model;

  const double lambda = 1.0 / (params.c * n);
  Rng rng(DeriveSeed(params.seed, "svm-order"));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> z(d + 1);
  size_t t = 0;
  for (size_t epoch = 0; epoch < params.epochs; ++epoch) {
    rng.Shuffle(order);
    for (size_t r : order) {
      ++t;
      std::vector<double> dense = x.Dense(r);
      for (size_t j = 0; j < d; ++j) z[j] = (dense[j] - model.mean[j]) * model.scale[j];
      z[d] = 1.0;
      const double eta = 1.0 / (lambda * t);
      const double decay = 1.0 - eta * lambda;
      for (int c = 0; c < classes; ++c) {
        auto &w = model.weights[c];
        double target = y[r] == c ? 1.0 : -1.0;
        double margin = 0.0;
        for (size_t j = 0; j <= d; ++j) margin += w[j] * z[j];
        for (double &v : w) v *= decay;
        if (target * margin < 1.0) {
          for (size_t j = 0; j <= d; ++j) w[j] += eta * target * z[j];
        }
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Unified model

std::string RouterKindName(RouterKind kind) {
  switch (kind) {
    case RouterKind::kDecisionTree: return "decision_tree";
    case RouterKind::kRandomForest: return "random_forest";
    case RouterKind::kGtb: return "gtb";
    case RouterKind::kSvm: return "svm";
  }
  return "";
}

std::optional<RouterKind> ParseRouterKind(std::string_view name) {
  for (RouterKind k : {RouterKind::kDecisionTree, RouterKind::kRandomForest, RouterKind::kGtb,
                       RouterKind::kSvm}) {
    if (RouterKindName(k) == name) return k;
  }
  return std::nullopt;
}

RouterModel RouterModel::Train(RouterKind kind, const SparseMatrix &x, std::span<const int> y,
                               int classes, const RouterParams &params) {
  RouterModel m;
  m.kind_ = kind;
  m.classes_ = classes;
  m.features_ = x.cols();
  switch (kind) {
    case RouterKind::kDecisionTree: m.model_ = TrainDecisionTree(x, y, classes, params.tree); break;
    case RouterKind::kRandomForest: m.model_ = TrainRandomForest(x, y, classes, params.forest); break;
    case RouterKind::kGtb: m.model_ = TrainGtb(x, y, classes, params.gtb); break;
    case RouterKind::kSvm: m.model_ = TrainSvm(x, y, classes, params.svm); break;
  }
  return m;
}

namespace {

template <typename LeafFn>
Prediction PredictWith(const std::variant<Tree, Forest, Gtb, Svm> &model, int classes,
                       LeafFn leaf, const std::vector<double> *dense) {
  Prediction out;
  std::vector<double> scores(classes, 0.0);
  if (const Tree *tree = std::get_if<Tree>(&model)) {
    const auto &counts = leaf(*tree);
    double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    for (int c = 0; c < classes; ++c) scores[c] = counts[c] / total;
    out.label = ArgMax(scores);
  } else if (const Forest *forest = std::get_if<Forest>(&model)) {
    std::vector<double> mass(classes, 0.0);
    for (const Tree &t : forest->trees) {
      const auto &counts = leaf(t);
      double total = std::accumulate(counts.begin(), counts.end(), 0.0);
      int vote = ArgMax(counts);
      scores[vote] += 1.0;
      for (int c = 0; c < classes; ++c) mass[c] += counts[c] / total;
    }
    for (double &s : scores) s /= static_cast<double>(forest->trees.size());
    int best = 0;
    for (int c = 1; c < classes; ++c) {
      if (scores[c] > scores[best] || (scores[c] == scores[best] && mass[c] > mass[best])) {
        best = c;
      }
    }
    out.label = best;
  } else if (const Gtb *gtb = std::get_if<Gtb>(&model)) {
    std::vector<double> f = gtb->init;
    for (size_t s = 0; s < gtb->stages.size(); ++s) {
      for (int c = 0; c < classes; ++c) {
        if (!gtb->stages[s][c].nodes.empty()) f[c] += gtb->step[s] * leaf(gtb->stages[s][c])[0];
      }
    }
    scores = Softmax(f);
    out.label = ArgMax(f);
  } else {
    const Svm &svm = std::get<Svm>(model);
    const size_t d = svm.mean.size();
    std::vector<double> margins(classes, 0.0);
    for (int c = 0; c < classes; ++c) {
      const auto &w = svm.weights[c];
      double m = w[d];
      for (size_t j = 0; j < d; ++j) m += w[j] * ((*dense)[j] - svm.mean[j]) * svm.scale[j];
      margins[c] = m;
    }
    scores = Softmax(margins);
    out.label = ArgMax(margins);
  }
  out.scores = std::move(scores);
  return out;
}

}  // namespace

Prediction RouterModel::Predict(std::span<const double> x) const {
  if (x.size() != features_) {
    throw DataError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                    std::to_string(features_));
  }
  std::vector<double> dense(x.begin(), x.end());
  return PredictWith(model_, classes_, [&](const Tree &t) -> const std::vector<double> & {
    return t.Leaf(dense);
  }, &dense);
}

Prediction RouterModel::Predict(const SparseMatrix &m, size_t row) const {
  if (m.cols() != features_) {
    throw DataError("feature matrix has " + std::to_string(m.cols()) + " columns, model expects " +
                    std::to_string(features_));
  }
  if (kind_ == RouterKind::kSvm) return Predict(m.Dense(row));
  return PredictWith(model_, classes_, [&](const Tree &t) -> const std::vector<double> & {
    return t.Leaf(m, row);
  }, nullptr);
}

namespace {

void PutTree(ModelArchive &a, const std::string &name, const Tree &t) {
  size_t width = t.nodes.empty() ? 0 : t.nodes[0].value.size();
  std::vector<double> data;
  for (const auto &node : t.nodes) {
    data.push_back(node.feature);
    data.push_back(node.threshold);
    data.push_back(node.left);
    data.push_back(node.right);
    data.insert(data.end(), node.value.begin(), node.value.end());
  }
  a.SetTensor(name, t.nodes.size(), 4 + width, std::move(data));
}

Tree GetTree(const ModelArchive &a, const std::string &name) {
  const Tensor &ten = a.GetTensor(name);
  Tree t;
  if (ten.rows > 0 && ten.cols < 4) throw DataError("malformed tree tensor " + name);
  for (size_t r = 0; r < ten.rows; ++r) {
    const double *row = ten.data.data() + r * ten.cols;
    Tree::Node node;
    node.feature = static_cast<int>(row[0]);
    node.threshold = row[1];
    node.left = static_cast<int>(row[2]);
    node.right = static_cast<int>(row[3]);
    node.value.assign(row + 4, row + ten.cols);
    t.nodes.push_back(std::move(node));
  }
  for (const auto &node : t.nodes) {
    if (node.feature >= 0 && (node.left <= 0 || node.right <= 0 ||
                              static_cast<size_t>(std::max(node.left, node.right)) >= t.nodes.size())) {
      throw DataError("malformed tree tensor " + name);
    }
  }
  return t;
}

}  // namespace

ModelArchive RouterModel::ToArchive() const {
  ModelArchive a("router");
  a.SetString("router_kind", RouterKindName(kind_));
  a.SetInt("classes", classes_);
  a.SetInt("features", features_);
  if (const Tree *t = tree()) {
    PutTree(a, "tree", *t);
  } else if (const Forest *f = forest()) {
    a.SetInt("n_trees", f->trees.size());
    for (size_t i = 0; i < f->trees.size(); ++i) PutTree(a, "tree" + std::to_string(i), f->trees[i]);
  } else if (const Gtb *g = gtb()) {
    a.SetInt("n_stages", g->stages.size());
    a.SetTensor("init", 1, g->init.size(), g->init);
    a.SetTensor("step", 1, g->step.size(), g->step);
    a.SetTensor("train_loss", 1, g->train_loss.size(), g->train_loss);
    for (size_t s = 0; s < g->stages.size(); ++s) {
      for (int c = 0; c < classes_; ++c) {
        if (!g->stages[s][c].nodes.empty()) {
          PutTree(a, "stage" + std::to_string(s) + ".class" + std::to_string(c), g->stages[s][c]);
        }
      }
    }
  } else if (const Svm *s = svm()) {
    a.SetTensor("mean", 1, s->mean.size(), s->mean);
    a.SetTensor("scale", 1, s->scale.size(), s->scale);
    std::vector<double> w;
    for (const auto &row : s->weights) w.insert(w.end(), row.begin(), row.end());
    a.SetTensor("weights", s->weights.size(), s->mean.size() + 1, std::move(w));
  }
  return a;
}

RouterModel RouterModel::FromArchive(const ModelArchive &a) {
  if (a.kind() != "router") throw DataError("not a router model file");
  RouterModel m;
  auto kind = ParseRouterKind(a.GetString("router_kind"));
  if (!kind) throw DataError("unknown router kind '" + a.GetString("router_kind") + "'");
  m.kind_ = *kind;
  m.classes_ = static_cast<int>(a.GetInt("classes"));
  m.features_ = static_cast<size_t>(a.GetInt("features"));
  switch (m.kind_) {
    case RouterKind::kDecisionTree: m.model_ = GetTree(a, "tree"); break;
    case RouterKind::kRandomForest: {
      Forest f;
      for (int64_t i = 0; i < a.GetInt("n_trees"); ++i) {
        f.trees.push_back(GetTree(a, "tree" + std::to_string(i)));
      }
      m.model_ = std::move(f);
      break;
    }
    case RouterKind::kGtb: {
      Gtb g;
      g.init = a.GetTensor("init").data;
      g.step = a.GetTensor("step").data;
      g.train_loss = a.GetTensor("train_loss").data;
      for (int64_t s = 0; s < a.GetInt("n_stages"); ++s) {
        std::vector<Tree> stage(m.classes_);
        for (int c = 0; c < m.classes_; ++c) {
          std::string name = "stage" + std::to_string(s) + ".class" + std::to_string(c);
          if (a.HasTensor(name)) stage[c] = GetTree(a, name);
        }
        g.stages.push_back(std::move(stage));
      }
      m.model_ = std::move(g);
      break;
    }
    case RouterKind::kSvm: {
      Svm s;
      s.mean = a.GetTensor("mean").data;
      s.scale = a.GetTensor("scale").data;
      const Tensor &w = a.GetTensor("weights");
      for (size_t r = 0; r < w.rows; ++r) {
        s.weights.emplace_back(w.data.begin() + r * w.cols, w.data.begin() + (r + 1) * w.cols);
      }
      m.model_ = std::move(s);
      break;
    }
  }
  return m;
}

}  // namespace svctriage
