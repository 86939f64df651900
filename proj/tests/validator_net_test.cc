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


#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "svctriage/common.h"
#include "svctriage/validator_net.h"

namespace svctriage {
namespace {

TokenVocab SmallVocab(size_t n = 10) {
  std::vector<std::string> tokens;
  for (size_t i = 0; i < n; ++i) tokens.push_back("t" + std::to_string(i));
  return TokenVocab(tokens);
}

NetConfig TinyConfig() {
  NetConfig c;
  c.seq_len = 8;
  c.embed_dim = 4;
  c.filter_sizes = {2, 3};
  c.filters_per_size = 3;
  c.lstm_hidden = 3;
  c.dense_hidden = 5;
  c.dropout = 0.5;
  c.batch_size = 10;
  c.epochs = 5;
  c.learning_rate = 0.05;
  c.seed = 3;
  return c;
}

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST_CASE("softmax") {
  auto p = Softmax(std::vector<double>{1, 0, 0});
  CHECK(std::fabs(p[0] - 0.5761) <= 1e-4);
  CHECK(std::fabs(p[1] - 0.2119) <= 1e-4);
  CHECK(std::fabs(p[2] - 0.2119) <= 1e-4);
  CHECK(p[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 2.0)).epsilon(1e-14));
  for (double z : {-800.0, 0.0, 3.5, 900.0}) {
    auto u = Softmax(std::vector<double>{z, z, z});
    for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  auto big = Softmax(std::vector<double>{1000, -1000, 0});
  CHECK(std::isfinite(big[0]));
  CHECK(std::fabs(big[0] + big[1] + big[2] - 1.0) <= 1e-9);
}

TEST_CASE("embedding layout") {
  NetConfig c = TinyConfig();
  ValidatorModel m(c, SmallVocab());
  auto &emb = m.params().embedding;
  const size_t e = c.embed_dim, d = c.seq_len;
  // Identity-like rows make each lookup recognizable.
  for (size_t r = 0; r < emb.size() / e; ++r) {
    for (size_t k = 0; k < e; ++k) emb[r * e + k] = static_cast<double>(r) + 0.1 * k;
  }
  auto row = [&](const std::vector<double> &x, size_t r) {
    return std::vector<double>(x.begin() + r * e, x.begin() + (r + 1) * e);
  };
  auto emb_row = [&](size_t id) { return row(emb, id); };
  const std::vector<double> zeros(e, 0.0);

  SUBCASE("empty pair keeps only the separator") {
    std::vector<int> ids;
    auto x = m.Embed({}, &ids);
    CHECK(ids == std::vector<int>{TokenVocab::kSep});
    CHECK(row(x, 0) == emb_row(TokenVocab::kSep));
    for (size_t r = 1; r < d; ++r) CHECK(row(x, r) == zeros);
  }
  SUBCASE("three tokens") {
    auto x = m.Embed({{2, 3}, {4}});
    CHECK(row(x, 0) == emb_row(2));
    CHECK(row(x, 1) == emb_row(3));
    CHECK(row(x, 2) == emb_row(TokenVocab::kSep));
    CHECK(row(x, 3) == emb_row(4));
    for (size_t r = 4; r < d; ++r) CHECK(row(x, r) == zeros);
  }
  SUBCASE("one row short of full leaves one padding row") {
    std::vector<int> ids;
    auto x = m.Embed({{2, 3, 4}, {5, 6, 7}}, &ids);
    CHECK(ids.size() == d - 1);
    CHECK(row(x, d - 2) == emb_row(7));
    CHECK(row(x, d - 1) == zeros);
  }
  SUBCASE("d-1 tokens fill every row without truncation") {
    std::vector<int> ids;
    m.Embed({{2, 3, 4}, {5, 6, 7, 8}}, &ids);
    CHECK(ids == std::vector<int>{2, 3, 4, TokenVocab::kSep, 5, 6, 7, 8});
  }
  SUBCASE("detail truncates first") {
    std::vector<int> ids;
    m.Embed({{2, 3, 4, 5}, {6, 7, 8, 9, 10}}, &ids);
    CHECK(ids == std::vector<int>{2, 3, 4, 5, TokenVocab::kSep, 6, 7, 8});
  }
  SUBCASE("unknown ids use the shared row") {
    std::vector<int> ids;
    auto x = m.Embed({{999}, {}}, &ids);
    CHECK(ids[0] == TokenVocab::kUnk);
    CHECK(row(x, 0) == emb_row(TokenVocab::kUnk));
  }
}

TEST_CASE("convolution") {
  SUBCASE("hand oracle") {
    std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};  // 4 x 2
    std::vector<double> ones = {1, 1, 1, 1};
    auto out = ConvRelu(x, 4, 2, ones, std::vector<double>{0.0}, 2);
    CHECK(out == std::vector<double>{1 + 2 + 3 + 4, 3 + 4 + 5 + 6, 5 + 6 + 7 + 8});
  }
  SUBCASE("zero input and bias") {
    std::vector<double> x(12, 0.0), w(8, 0.7);
    auto out = ConvRelu(x, 6, 2, w, std::vector<double>{0.0, 0.0}, 2);
    CHECK(out.size() == 5 * 2);
    for (double v : out) CHECK(v == 0.0);
  }
  SUBCASE("window as tall as the input") {
    std::vector<double> x = {1, -1, 2};
    auto out = ConvRelu(x, 3, 1, std::vector<double>{1, 1, 1}, std::vector<double>{0.5}, 3);
    CHECK(out == std::vector<double>{2.5});
  }
  SUBCASE("rectification") {
    auto out = ConvRelu(std::vector<double>{1, -3}, 2, 1, std::vector<double>{1}, std::vector<double>{0}, 1);
    CHECK(out == std::vector<double>{1, 0});
  }
}

TEST_CASE("max pooling") {
  CHECK(MaxPoolColumns(std::vector<double>{2, 2, 2}, 3, 1) == std::vector<double>{2});
  CHECK(MaxPoolColumns(std::vector<double>{0, 3, 1}, 3, 1) == std::vector<double>{3});
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> map(5 * 4);
    for (auto &v : map) v = rng.Uniform(-1, 1);
    auto pooled = MaxPoolColumns(map, 5, 4);
    for (size_t c = 0; c < 4; ++c) {
      double best = map[c];
      for (size_t r = 1; r < 5; ++r) best = std::max(best, map[r * 4 + c]);
      CHECK(pooled[c] == best);
    }
  }
}

TEST_CASE("lstm recurrence") {
  SUBCASE("zero parameters give a zero state") {
    std::vector<double> input = {1, 2, 3, 4, 5, 6}, wx(4 * 2 * 2, 0.0), wh(4 * 2 * 2, 0.0), b(8, 0.0);
    for (bool reverse : {false, true}) {
      auto h = LstmFinalState(input, 3, 2, wx, wh, b, 2, reverse);
      CHECK(h == std::vector<double>{0, 0});
    }
  }
  SUBCASE("scalar replay") {
    // One input, one hidden unit; gate order i f o g.
    std::vector<double> wx = {0.3, -0.2, 0.5, 0.7}, wh = {0.1, 0.4, -0.3, 0.2};
    std::vector<double> b = {0.05, 1.0, -0.1, 0.02};
    std::vector<double> xs = {0.5, -1.0, 2.0};
    for (bool reverse : {false, true}) {
      double h = 0, c = 0;
      for (size_t k = 0; k < 3; ++k) {
        double x = xs[reverse ? 2 - k : k];
        double i = Sigmoid(wx[0] * x + wh[0] * h + b[0]);
        double f = Sigmoid(wx[1] * x + wh[1] * h + b[1]);
        double o = Sigmoid(wx[2] * x + wh[2] * h + b[2]);
        double g = std::tanh(wx[3] * x + wh[3] * h + b[3]);
        c = f * c + i * g;
        h = o * std::tanh(c);
      }
      auto out = LstmFinalState(xs, 3, 1, wx, wh, b, 1, reverse);
      CHECK(std::fabs(out[0] - h) <= 1e-10);
    }
  }
  SUBCASE("one step reads the same input in both directions") {
    std::vector<double> wx = {0.3, -0.2, 0.5, 0.7}, wh = {0.1, 0.4, -0.3, 0.2}, b(4, 0.1);
    std::vector<double> xs = {0.8};
    CHECK(LstmFinalState(xs, 1, 1, wx, wh, b, 1, false) == LstmFinalState(xs, 1, 1, wx, wh, b, 1, true));
  }
}

TEST_CASE("forward shapes and normalization") {
  for (Junction j : {Junction::kSequence, Junction::kPooledVector}) {
    NetConfig c = TinyConfig();
    c.junction = j;
    ValidatorModel m(c, SmallVocab());
    ForwardState s = m.Forward({{2, 3}, {4, 5, 6}});
    REQUIRE(s.conv_out.size() == 2);
    CHECK(s.conv_out[0].size() == (c.seq_len - 2 + 1) * c.filters_per_size);
    CHECK(s.conv_out[1].size() == (c.seq_len - 3 + 1) * c.filters_per_size);
    CHECK(s.pooled.size() == 2 * c.filters_per_size);
    CHECK(s.merged.size() == c.dense_hidden + 2 * c.lstm_hidden);
    REQUIRE(s.probs.size() == 3);
    CHECK(std::fabs(s.probs[0] + s.probs[1] + s.probs[2] - 1.0) <= 1e-9);
    for (double p : s.probs) CHECK(p >= 0.0);
    CHECK(m.Predict({{2, 3}, {4, 5, 6}}) == s.probs);
  }
}

TEST_CASE("reference loss agrees with the production pass") {
  NetConfig c = TinyConfig();
  ValidatorModel m(c, SmallVocab());
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    PairInput in;
    for (size_t k = rng.Below(4); k > 0; --k) in.call_log.push_back(static_cast<int>(rng.Below(12)));
    for (size_t k = rng.Below(8); k > 0; --k) in.detail.push_back(static_cast<int>(rng.Below(12)));
    int label = static_cast<int>(rng.Below(3));
    double loss = -std::log(m.Predict(in)[label]);
    CHECK(std::fabs(m.ReferenceLoss(in, label) - loss) <= 1e-10);
    CHECK(std::fabs(m.ReferenceLoss(in, label, true) - loss) <= 1e-10);
  }
}

TEST_CASE("inverted dropout preserves the expected activation") {
  NetConfig c = TinyConfig();
  ValidatorModel m(c, SmallVocab());
  PairInput in{{2, 3}, {4, 5, 6, 7}};
  ForwardState infer = m.Forward(in);
  std::vector<double> mean(infer.dense_pre.size(), 0.0);
  Rng rng(4);
  const int passes = 10000;
  for (int k = 0; k < passes; ++k) {
    ForwardState t = m.Forward(in, &rng);
    REQUIRE_FALSE(t.pooled_mask.empty());
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += t.dense_pre[i] / passes;
  }
  double diff = 0, norm = 0;
  for (size_t i = 0; i < mean.size(); ++i) {
    diff += (mean[i] - infer.dense_pre[i]) * (mean[i] - infer.dense_pre[i]);
    norm += infer.dense_pre[i] * infer.dense_pre[i];
  }
  CHECK(std::sqrt(diff / norm) <= 0.02);
  auto mask = DropoutMask(20000, 0.5, rng);
  double avg = std::accumulate(mask.begin(), mask.end(), 0.0) / mask.size();
  CHECK(std::fabs(avg - 1.0) <= 0.02);
  for (double v : mask) CHECK((v == 0.0 || v == 2.0));
}

TEST_CASE("detail order matters") {
  NetConfig c = TinyConfig();
  c.seq_len = 12;
  ValidatorModel m(c, SmallVocab());
  std::vector<int> detail = {4, 5, 6, 7, 8};
  std::vector<int> reversed(detail.rbegin(), detail.rend());
  ForwardState a = m.Forward({{2, 3}, detail});
  ForwardState b = m.Forward({{2, 3}, reversed});
  std::vector<double> ha(a.merged.begin() + c.dense_hidden, a.merged.end());
  std::vector<double> hb(b.merged.begin() + c.dense_hidden, b.merged.end());
  CHECK(ha != hb);
}

// Three classes, each marked by a distinct call-log token.
void Separable(size_t n, std::vector<PairInput> &inputs, std::vector<int> &labels) {
  Rng rng(8);
  for (size_t i = 0; i < n; ++i) {
    int label = static_cast<int>(i % 3);
    PairInput in;
    in.call_log = {2 + label};
    for (size_t k = 1 + rng.Below(4); k > 0; --k) in.detail.push_back(5 + static_cast<int>(rng.Below(6)));
    inputs.push_back(in);
    labels.push_back(label);
  }
}

TEST_CASE("training reduces loss on separable data") {
  std::vector<PairInput> inputs;
  std::vector<int> labels;
  Separable(200, inputs, labels);
  NetConfig c = TinyConfig();
  c.dropout = 0.0;
  c.epochs = 5;
  c.learning_rate = 0.05;
  TrainedValidator t = TrainValidator(inputs, labels, SmallVocab(), c);
  REQUIRE(t.history.size() == 5);
  int flat = 0;
  for (size_t k = 1; k < t.history.size(); ++k) {
    double prev = t.history[k - 1].train_loss, cur = t.history[k].train_loss;
    if (cur >= prev - 1e-6) {
      ++flat;
      CHECK(cur <= prev + 1e-6);
    }
  }
  CHECK(flat <= 1);
  CHECK(t.history.back().train_loss < t.history.front().train_loss);
}

TEST_CASE("zero epochs return the initialized model") {
  std::vector<PairInput> inputs;
  std::vector<int> labels;
  Separable(30, inputs, labels);
  NetConfig c = TinyConfig();
  c.epochs = 0;
  TrainedValidator t = TrainValidator(inputs, labels, SmallVocab(), c);
  CHECK(t.history.empty());
  CHECK(t.model.Fingerprint() == ValidatorModel(c, SmallVocab()).Fingerprint());
}

TEST_CASE("training is deterministic") {
  std::vector<PairInput> inputs;
  std::vector<int> labels;
  Separable(60, inputs, labels);
  NetConfig c = TinyConfig();
  c.epochs = 2;
  auto a = TrainValidator(inputs, labels, SmallVocab(), c);
  auto b = TrainValidator(inputs, labels, SmallVocab(), c);
  CHECK(a.model.Fingerprint() == b.model.Fingerprint());
  CHECK(a.model.ToArchive().Serialize() == b.model.ToArchive().Serialize());
}

TEST_CASE("non-finite loss aborts with guidance") {
  std::vector<PairInput> inputs;
  std::vector<int> labels;
  Separable(60, inputs, labels);
  NetConfig c = TinyConfig();
  c.learning_rate = 1e200;
  c.epochs = 3;
  try {
    TrainValidator(inputs, labels, SmallVocab(), c);
    FAIL("expected a NumericError");
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("learning") != std::string::npos);
  }
}

TEST_CASE("archive round trip and vocabulary check") {
  NetConfig c = TinyConfig();
  ValidatorModel m(c, SmallVocab());
  ValidatorModel back = ValidatorModel::FromArchive(ModelArchive::Parse(m.ToArchive().Serialize()));
  CHECK(back.Fingerprint() == m.Fingerprint());
  PairInput in{{2}, {3, 4}};
  CHECK(back.Predict(in) == m.Predict(in));
  ModelArchive tampered = m.ToArchive();
  tampered.SetString("vocab_hash", "0");
  CHECK_THROWS_AS(ValidatorModel::FromArchive(tampered), DataError);
}

TEST_CASE("config validation") {
  NetConfig c = TinyConfig();
  c.filter_sizes = {2, 9};
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = TinyConfig();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}

TEST_CASE("gradient check") {
  NetConfig c = TinyConfig();
  c.seq_len = 14;
  c.filter_sizes = {2, 3, 4};
  ValidatorModel m(c, SmallVocab());
  PairInput sample{{2, 3, 4}, {5, 6, 7, 8, 9, 10, 11}};
  GradCheckResult ok = GradCheck(m, sample, 1);
  CHECK(ok.checked >= 200);
  CHECK(ok.max_relative_error <= 1e-4);
  CHECK(ok.per_group.size() == m.params().Groups().size());

  // Corrupt the largest entry of a group so the factor is visible.
  NetParams grad;
  grad.SetZeroLike(m.params());
  m.Backward(m.Forward(sample), 1, grad);
  for (const auto &group : grad.Groups()) {
    const auto &g = *group.values;
    size_t idx = 0;
    for (size_t i = 1; i < g.size(); ++i) {
      if (std::fabs(g[i]) > std::fabs(g[idx])) idx = i;
    }
    GradCheckOptions bad;
    bad.corrupt = GradCheckOptions::Corruption{group.name, idx, 1.01};
    CHECK_MESSAGE(GradCheck(m, sample, 1, bad).max_relative_error > 1e-4, group.name);
  }
}

TEST_CASE("dead filters count as agreement") {
  NetConfig c = TinyConfig();
  ValidatorModel m(c, SmallVocab());
  for (auto &b : m.params().conv_b) std::fill(b.begin(), b.end(), -100.0);
  GradCheckResult r = GradCheck(m, {{2, 3}, {4, 5}}, 0);
  for (const auto &[name, err] : r.per_group) {
    if (name.rfind("conv", 0) == 0) CHECK(err == 0.0);
  }
}

}  // namespace
}  // namespace svctriage
