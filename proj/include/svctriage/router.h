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

// Department routers: CART decision tree, random forest, multiclass gradient
// tree boosting and one-vs-rest linear SVM over sparse count features.

#ifndef SVCTRIAGE_ROUTER_H_
#define SVCTRIAGE_ROUTER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "svctriage/tensor_io.h"

namespace svctriage {

// Compressed sparse rows. Column indices ascend within a row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(size_t cols) : cols_(cols) {}
  static SparseMatrix FromDense(const std::vector<std::vector<double>> &rows, size_t cols);

  void AddRow(std::span<const double> dense);
  size_t rows() const { return row_ptr_.size() - 1; }
  size_t cols() const { return cols_; }
  double At(size_t row, size_t col) const;
  std::vector<double> Dense(size_t row) const;
  std::span<const uint32_t> RowCols(size_t row) const {
    return {col_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
  }
  std::span<const double> RowValues(size_t row) const {
    return {val_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
  }
  SparseMatrix Subset(std::span<const size_t> rows) const;

 private:
  size_t cols_ = 0;
  std::vector<size_t> row_ptr_{0};
  std::vector<uint32_t> col_;
  std::vector<double> val_;
};

// A flat binary tree. Leaves have feature == -1. For classification trees the
// value is the per-class count vector; for regression trees it is one number.
struct Tree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> value;
  };
  std::vector<Node> nodes;

  const std::vector<double> &Leaf(std::span<const double> x) const;
  const std::vector<double> &Leaf(const SparseMatrix &m, size_t row) const;
  size_t Depth() const;
  bool operator==(const Tree &other) const;
};

struct TreeParams {
  size_t max_depth = 20;
  size_t min_leaf = 2;
  size_t max_features = 0;  // 0: every feature at every split
};

// Gini CART. `rows` may repeat indices (bootstrap multiplicity). Splits are
// scored by sum(c_L^2)/n_L + sum(c_R^2)/n_R; ties keep the lowest feature, then
// the lowest threshold. x <= threshold goes left.
Tree TrainClassificationTree(const SparseMatrix &x, std::span<const int> y, int classes,
                             std::span<const size_t> rows, const TreeParams &params,
                             uint64_t seed = 0);
Tree TrainDecisionTree(const SparseMatrix &x, std::span<const int> y, int classes,
                       const TreeParams &params = {});

struct ForestParams {
  size_t n_trees = 100;
  size_t max_features = 0;  // 0: floor(sqrt(F)), at least 1
  bool bootstrap = true;
  TreeParams tree;
  uint64_t seed = 1;
};
struct Forest {
  std::vector<Tree> trees;
};
Forest TrainRandomForest(const SparseMatrix &x, std::span<const int> y, int classes,
                         const ForestParams &params = {});

struct GtbParams {
  size_t n_stages = 200;
  double learning_rate = 0.1;
  size_t max_depth = 3;
  size_t min_leaf = 1;
  uint64_t seed = 1;
};
struct Gtb {
  std::vector<double> init;  // per-class log prior
  // stages[s][k]: regression tree for class k; empty when the class is absent.
  std::vector<std::vector<Tree>> stages;
  std::vector<double> step;         // effective shrinkage per stage
  std::vector<double> train_loss;   // cross-entropy before stage 0, then after each stage
};
Gtb TrainGtb(const SparseMatrix &x, std::span<const int> y, int classes,
             const GtbParams &params = {});

struct SvmParams {
  double c = 1.0;
  size_t epochs = 50;
  uint64_t seed = 1;
};
struct Svm {
  std::vector<double> mean;   // standardization fit on the training rows
  std::vector<double> scale;  // 1 / std, 1 for constant features
  std::vector<std::vector<double>> weights;  // per class: features + bias
};
Svm TrainSvm(const SparseMatrix &x, std::span<const int> y, int classes,
             const SvmParams &params = {});

enum class RouterKind { kDecisionTree, kRandomForest, kGtb, kSvm };
std::string RouterKindName(RouterKind kind);
std::optional<RouterKind> ParseRouterKind(std::string_view name);

struct RouterParams {
  TreeParams tree;
  ForestParams forest;
  GtbParams gtb;
  SvmParams svm;
};

struct Prediction {
  int label = 0;
  std::vector<double> scores;  // sums to 1
};

class RouterModel {
 public:
  RouterModel() = default;

  static RouterModel Train(RouterKind kind, const SparseMatrix &x, std::span<const int> y,
                           int classes, const RouterParams &params);

  RouterKind kind() const { return kind_; }
  int classes() const { return classes_; }
  size_t features() const { return features_; }
  Prediction Predict(std::span<const double> x) const;
  Prediction Predict(const SparseMatrix &m, size_t row) const;

  const Tree *tree() const { return std::get_if<Tree>(&model_); }
  const Forest *forest() const { return std::get_if<Forest>(&model_); }
  const Gtb *gtb() const { return std::get_if<Gtb>(&model_); }
  const Svm *svm() const { return std::get_if<Svm>(&model_); }

  ModelArchive ToArchive() const;
  static RouterModel FromArchive(const ModelArchive &archive);

 private:
  RouterKind kind_ = RouterKind::kDecisionTree;
  int classes_ = 0;
  size_t features_ = 0;
  std::variant<Tree, Forest, Gtb, Svm> model_;
};

// Index of the largest score; ties go to the lowest index.
int ArgMax(std::span<const double> scores);

}  // namespace svctriage

#endif  // SVCTRIAGE_ROUTER_H_
