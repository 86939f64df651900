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

#ifndef SVCTRIAGE_VALIDATOR_NET_H_
#define SVCTRIAGE_VALIDATOR_NET_H_

// Request validation network. A (call log, detail) pair is embedded as one
// token matrix, convolved with several window sizes, max-pooled into a
// dense hidden layer, and run through a bidirectional LSTM. The merged
// state feeds a softmax over Valid / False / Vague.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "svctriage/common.h"
#include "svctriage/tensor_io.h"
#include "svctriage/textprep.h"

namespace svctriage {

// What the recurrent layer reads.
enum class Junction {
  kSequence,      // per-position concatenated convolution outputs
  kPooledVector,  // the dense layer output as a one-step sequence
};

struct NetConfig {
  size_t seq_len = 500;  // token rows after padding/truncation
  size_t embed_dim = 100;
  std::vector<size_t> filter_sizes{2, 3, 4};
  size_t filters_per_size = 200;
  size_t lstm_hidden = 64;    // per direction
  size_t dense_hidden = 100;  // layer after max-pooling
  double dropout = 0.5;
  size_t classes = 3;
  size_t batch_size = 200;
  size_t epochs = 15;
  double learning_rate = 0.01;
  double momentum = 0.9;
  size_t plateau_patience = 2;  // epochs without validation improvement
  double validation_fraction = 0.1;
  size_t min_token_count = 2;
  size_t max_vocab = 20000;
  uint64_t seed = 1;
  Junction junction = Junction::kSequence;

  // Throws ConfigError naming the offending field.
  void Validate() const;
  size_t max_filter() const;
  size_t pooled_dim() const { return filter_sizes.size() * filters_per_size; }
};

// Token ids for the network. Id 0 is the shared out-of-vocabulary row and
// id 1 the call-log/detail separator.
class TokenVocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kSep = 1;

  TokenVocab() = default;
  explicit TokenVocab(std::vector<std::string> tokens);

  // Tokens seen at least `min_count` times, most frequent first (ties by
  // text), at most `max_size` of them.
  static TokenVocab Build(std::span<const Document> docs, size_t min_count, size_t max_size);

  // Staging terms collapse to class tokens such as "<part>".
  static std::string TokenKey(const TaggedToken &token);

  std::vector<int> Encode(const Document &doc) const;
  int Id(const std::string &token) const;

  // Embedding rows: the two reserved ids plus one per token.
  size_t rows() const { return tokens_.size() + 2; }
  const std::vector<std::string> &tokens() const { return tokens_; }
  uint64_t Hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct PairInput {
  std::vector<int> call_log;
  std::vector<int> detail;
};

using ClassProbs = std::vector<double>;

// Numerically stable softmax.
std::vector<double> Softmax(std::span<const double> logits);

// All trainable tensors. Gradients use the same layout.
struct NetParams {
  std::vector<double> embedding;            // rows x embed_dim
  std::vector<std::vector<double>> conv_w;  // per size: filters x (h * embed_dim)
  std::vector<std::vector<double>> conv_b;  // per size: filters
  std::vector<double> dense_w;              // dense_hidden x pooled_dim
  std::vector<double> dense_b;
  std::array<std::vector<double>, 2> lstm_wx;  // per direction: 4H x input
  std::array<std::vector<double>, 2> lstm_wh;  // 4H x H, gate order i f o g
  std::array<std::vector<double>, 2> lstm_b;
  std::vector<double> out_w;  // classes x (dense_hidden + 2H)
  std::vector<double> out_b;

  struct Group {
    std::string name;
    std::vector<double> *values;
  };
  std::vector<Group> Groups();
  void SetZeroLike(const NetParams &other);
  bool AllFinite() const;
};

// Intermediate values of one forward pass, kept for backpropagation and for
// inspecting individual stages.
struct ForwardState {
  size_t occupied_rows = 0;
  std::vector<int> row_ids;   // token id per occupied row
  std::vector<double> x;      // seq_len x embed_dim
  std::vector<std::vector<double>> conv_pre;  // per size: (d-h+1) x filters
  std::vector<std::vector<double>> conv_out;
  std::vector<double> pooled;
  std::vector<size_t> argmax;
  std::vector<double> pooled_mask;  // dropout scale per unit, empty at inference
  std::vector<double> dense_pre;
  std::vector<double> dense;
  size_t steps = 0;
  size_t lstm_input = 0;
  std::vector<double> sequence;  // steps x lstm_input
  std::array<std::vector<double>, 2> gates;  // steps x 4H, activated
  std::array<std::vector<double>, 2> cell;   // (steps+1) x H
  std::array<std::vector<double>, 2> hidden; // (steps+1) x H
  std::vector<double> merged;
  std::vector<double> merged_mask;
  std::vector<double> logits;
  std::vector<double> probs;
};

class ValidatorModel {
 public:
  ValidatorModel() = default;
  // Seeded initialization: embedding uniform in [-0.05, 0.05]; convolution and
  // dense weights uniform in +-sqrt(6/fan_in), recurrent and output weights in
  // +-1/sqrt(fan_in); convolution biases 0.01, LSTM forget-gate biases 1,
  // other biases 0.
  ValidatorModel(NetConfig config, TokenVocab vocab);

  const NetConfig &config() const { return config_; }
  const TokenVocab &vocab() const { return vocab_; }
  NetParams &params() { return params_; }
  const NetParams &params() const { return params_; }

  // d x embed_dim matrix: call-log rows, separator row, detail rows, zeros.
  // Detail tokens are truncated first.
  std::vector<double> Embed(const PairInput &pair, std::vector<int> *row_ids = nullptr) const;

  // Full pass. With `dropout_rng` set the pass runs in training mode
  // (inverted dropout); without it, inference mode.
  ForwardState Forward(const PairInput &pair, Rng *dropout_rng = nullptr) const;
  ClassProbs Predict(const PairInput &pair) const { return Forward(pair).probs; }

  // Cross-entropy of one example. Accumulates d(loss)/d(params) into `grad`.
  double Backward(const ForwardState &state, int label, NetParams &grad) const;

  // Mean cross-entropy over examples in inference mode.
  double Loss(std::span<const PairInput> inputs, std::span<const int> labels) const;

  // Cross-entropy from a separate straightforward forward pass, in long double
  // when `extended`. Inference mode only.
  double ReferenceLoss(const PairInput &pair, int label, bool extended = false) const;

  ModelArchive ToArchive() const;
  static ValidatorModel FromArchive(const ModelArchive &archive);
  uint64_t Fingerprint() const;

 private:
  void CheckShapes() const;

  NetConfig config_;
  TokenVocab vocab_;
  NetParams params_;
};

// Recurrent building block, exposed for testing. Runs one LSTM direction
// over `steps` rows of `input` (each `input_dim` wide); returns the final
// hidden state.
std::vector<double> LstmFinalState(std::span<const double> input, size_t steps,
                                   size_t input_dim, std::span<const double> wx,
                                   std::span<const double> wh, std::span<const double> b,
                                   size_t hidden, bool reverse);

// Valid-window convolution of a rows x width matrix with filters of h rows,
// followed by max(0, x). Output is (rows-h+1) x n_filters.
std::vector<double> ConvRelu(std::span<const double> input, size_t rows, size_t width,
                             std::span<const double> filters, std::span<const double> bias,
                             size_t h);

// Per-column maximum of a rows x cols map.
std::vector<double> MaxPoolColumns(std::span<const double> map, size_t rows, size_t cols);

// Inverted dropout: each unit is zeroed with probability p and otherwise
// scaled by 1/(1-p).
std::vector<double> DropoutMask(size_t n, double p, Rng &rng);

struct EpochStats {
  double train_loss = 0.0;  // inference-mode loss on the training split
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;
};
using TrainHistory = std::vector<EpochStats>;

struct TrainedValidator {
  ValidatorModel model;
  TrainHistory history;
};

// Mini-batch momentum gradient descent on mean cross-entropy. A seeded
// fraction of the examples is held out for the validation columns of the
// history; the learning rate halves after `plateau_patience` epochs without
// validation improvement. Throws NumericError on a non-finite loss.
TrainedValidator TrainValidator(std::span<const PairInput> inputs, std::span<const int> labels,
                                TokenVocab vocab, const NetConfig &config);

struct GradCheckOptions {
  double epsilon = 1e-5;
  size_t n_params = 240;
  uint64_t seed = 7;
  // Entries whose double-precision estimate differs by more than this are
  // re-measured in extended precision.
  double refine_above = 1e-6;
  // Multiplies one analytic gradient entry before comparison.
  struct Corruption {
    std::string group;
    size_t index;
    double factor;
  };
  std::optional<Corruption> corrupt;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  size_t checked = 0;
  std::vector<std::pair<std::string, double>> per_group;  // max error per group
};

// Compares backpropagated gradients with central finite differences on a
// seeded subset of parameters drawn from every group. Dropout is off. The
// relative error of a pair is |a-n|/max(|a|,|n|), or 0 when both are below
// 1e-12.
GradCheckResult GradCheck(const ValidatorModel &model, const PairInput &sample, int label,
                          const GradCheckOptions &options = {});

}  // namespace svctriage

#endif  // SVCTRIAGE_VALIDATOR_NET_H_
