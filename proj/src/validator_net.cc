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

#include "svctriage/validator_net.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace svctriage {

namespace {

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += W x for a rows x cols matrix.
void MatVecAdd(const double *w, const double *x, size_t rows, size_t cols, double *y) {
  for (size_t r = 0; r < rows; ++r) {
    const double *wr = w + r * cols;
    double acc = 0.0;
    for (size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// y += W^T g.
void MatTVecAdd(const double *w, const double *g, size_t rows, size_t cols, double *y) {
  for (size_t r = 0; r < rows; ++r) {
    double gr = g[r];
    if (gr == 0.0) continue;
    const double *wr = w + r * cols;
    for (size_t c = 0; c < cols; ++c) y[c] += gr * wr[c];
  }
}

// W += g x^T.
void OuterAdd(const double *g, const double *x, size_t rows, size_t cols, double *w) {
  for (size_t r = 0; r < rows; ++r) {
    double gr = g[r];
    if (gr == 0.0) continue;
    double *wr = w + r * cols;
    for (size_t c = 0; c < cols; ++c) wr[c] += gr * x[c];
  }
}

void FillUniform(std::vector<double> &v, size_t n, double limit, Rng &rng) {
  v.resize(n);
  for (double &x : v) x = rng.Uniform(-limit, limit);
}

double LogSumExp(std::span<const double> z) {
  double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

double ExampleLoss(const std::vector<double> &logits, int label) {
  return LogSumExp(logits) - logits[label];
}

// Gate activations and state update for one LSTM step.
void LstmStep(const double *pre, const double *c_prev, size_t h, double *gates, double *c,
              double *hid) {
  for (size_t j = 0; j < h; ++j) {
    double i = Sigmoid(pre[j]);
    double f = Sigmoid(pre[h + j]);
    double o = Sigmoid(pre[2 * h + j]);
    double g = std::tanh(pre[3 * h + j]);
    gates[j] = i;
    gates[h + j] = f;
    gates[2 * h + j] = o;
    gates[3 * h + j] = g;
    c[j] = f * c_prev[j] + i * g;
    hid[j] = o * std::tanh(c[j]);
  }
}

}  // namespace

void NetConfig::Validate() const {
  if (filter_sizes.empty()) throw ConfigError("filter_sizes: at least one size required");
  for (size_t h : filter_sizes) {
    if (h < 1) throw ConfigError("filter_sizes: sizes must be >= 1");
  }
  if (seq_len < max_filter()) throw ConfigError("seq_len: must be >= the largest filter size");
  if (embed_dim < 1) throw ConfigError("embed_dim: must be >= 1");
  if (filters_per_size < 1) throw ConfigError("filters_per_size: must be >= 1");
  if (lstm_hidden < 1) throw ConfigError("lstm_hidden: must be >= 1");
  if (dense_hidden < 1) throw ConfigError("dense_hidden: must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout: must be in [0, 1)");
  if (classes < 2) throw ConfigError("classes: must be >= 2");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate: must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum: must be in [0, 1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction: must be in [0, 1)");
  }
}

size_t NetConfig::max_filter() const {
  return filter_sizes.empty() ? 0 : *std::max_element(filter_sizes.begin(), filter_sizes.end());
}

// ---------------------------------------------------------------------------
// Token vocabulary

TokenVocab::TokenVocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i) + 2).second) {
      throw DataError("duplicate token '" + tokens_[i] + "' in network vocabulary");
    }
  }
}

std::string TokenVocab::TokenKey(const TaggedToken &token) {
  switch (token.tag) {
    case PosTag::kPartNumber: return "<part>";
    case PosTag::kUnitNumber: return "<unit>";
    case PosTag::kNumber: return "<num>";
    case PosTag::kDate: return "<date>";
    default: return token.text;
  }
}

TokenVocab TokenVocab::Build(std::span<const Document> docs, size_t min_count,
                             size_t max_size) {
  std::map<std::string, size_t> counts;
  for (const Document &doc : docs) {
    for (const auto &segment : doc.segments) {
      for (const auto &t : segment) ++counts[TokenKey(t)];
    }
  }
  std::vector<std::pair<std::string, size_t>> ranked;
  for (const auto &[tok, n] : counts) {
    if (n >= min_count) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> tokens;
  for (auto &[tok, n] : ranked) tokens.push_back(tok);
  return TokenVocab(std::move(tokens));
}

int TokenVocab::Id(const std::string &token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> TokenVocab::Encode(const Document &doc) const {
  std::vector<int> ids;
  for (const auto &segment : doc.segments) {
    for (const auto &t : segment) ids.push_back(Id(TokenKey(t)));
  }
  return ids;
}

uint64_t TokenVocab::Hash() const {
  uint64_t h = Fnv1a64("token-vocab");
  for (const auto &t : tokens_) {
    h = Fnv1a64(t, h);
    h = Fnv1a64("\n", h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<NetParams::Group> NetParams::Groups() {
  std::vector<Group> groups;
  groups.push_back({"embedding", &embedding});
  for (size_t g = 0; g < conv_w.size(); ++g) {
    groups.push_back({"conv_w" + std::to_string(g), &conv_w[g]});
    groups.push_back({"conv_b" + std::to_string(g), &conv_b[g]});
  }
  groups.push_back({"dense_w", &dense_w});
  groups.push_back({"dense_b", &dense_b});
  for (int d = 0; d < 2; ++d) {
    std::string dir = d == 0 ? "fwd" : "bwd";
    groups.push_back({"lstm_wx_" + dir, &lstm_wx[d]});
    groups.push_back({"lstm_wh_" + dir, &lstm_wh[d]});
    groups.push_back({"lstm_b_" + dir, &lstm_b[d]});
  }
  groups.push_back({"out_w", &out_w});
  groups.push_back({"out_b", &out_b});
  return groups;
}

void NetParams::SetZeroLike(const NetParams &other) {
  *this = other;
  for (auto &g : Groups()) std::fill(g.values->begin(), g.values->end(), 0.0);
}

bool NetParams::AllFinite() const {
  auto &self = const_cast<NetParams &>(*this);
  for (auto &g : self.Groups()) {
    for (double v : *g.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Building blocks

std::vector<double> Softmax(std::span<const double> logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double &v : p) v /= s;
  return p;
}

std::vector<double> ConvRelu(std::span<const double> input, size_t rows, size_t width,
                             std::span<const double> filters, std::span<const double> bias,
                             size_t h) {
  size_t n_filters = bias.size();
  size_t out_rows = rows - h + 1;
  std::vector<double> out(out_rows * n_filters);
  for (size_t t = 0; t < out_rows; ++t) {
    const double *window = input.data() + t * width;
    for (size_t f = 0; f < n_filters; ++f) {
      const double *w = filters.data() + f * h * width;
      double acc = bias[f];
      for (size_t k = 0; k < h * width; ++k) acc += w[k] * window[k];
      out[t * n_filters + f] = std::max(0.0, acc);
    }
  }
  return out;
}

std::vector<double> MaxPoolColumns(std::span<const double> map, size_t rows, size_t cols) {
  std::vector<double> out(cols, -std::numeric_limits<double>::infinity());
  for (size_t t = 0; t < rows; ++t) {
    for (size_t c = 0; c < cols; ++c) out[c] = std::max(out[c], map[t * cols + c]);
  }
  return out;
}

std::vector<double> DropoutMask(size_t n, double p, Rng &rng) {
  std::vector<double> mask(n);
  double keep_scale = 1.0 / (1.0 - p);
  for (double &m : mask) m = rng.Uniform() < p ? 0.0 : keep_scale;
  return mask;
}

std::vector<double> LstmFinalState(std::span<const double> input, size_t steps,
                                   size_t input_dim, std::span<const double> wx,
                                   std::span<const double> wh, std::span<const double> b,
                                   size_t hidden, bool reverse) {
  std::vector<double> h(hidden, 0.0), c(hidden, 0.0), c_next(hidden), h_next(hidden);
  std::vector<double> pre(4 * hidden), gates(4 * hidden);
  for (size_t k = 0; k < steps; ++k) {
    size_t t = reverse ? steps - 1 - k : k;
    std::copy(b.begin(), b.end(), pre.begin());
    MatVecAdd(wx.data(), input.data() + t * input_dim, 4 * hidden, input_dim, pre.data());
    MatVecAdd(wh.data(), h.data(), 4 * hidden, hidden, pre.data());
    LstmStep(pre.data(), c.data(), hidden, gates.data(), c_next.data(), h_next.data());
    std::swap(c, c_next);
    std::swap(h, h_next);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Model

ValidatorModel::ValidatorModel(NetConfig config, TokenVocab vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.Validate();
  Rng rng(DeriveSeed(config_.seed, "validator-init"));
  const size_t e = config_.embed_dim, nf = config_.filters_per_size;
  const size_t p = config_.pooled_dim(), q = config_.dense_hidden, hh = config_.lstm_hidden;
  const size_t in = config_.junction == Junction::kSequence ? p : q;
  FillUniform(params_.embedding, vocab_.rows() * e, 0.05, rng);
  for (size_t h : config_.filter_sizes) {
    std::vector<double> w;
    FillUniform(w, nf * h * e, std::sqrt(6.0 / static_cast<double>(h * e)), rng);
    params_.conv_w.push_back(std::move(w));
    params_.conv_b.emplace_back(nf, 0.01);
  }
  FillUniform(params_.dense_w, q * p, std::sqrt(6.0 / static_cast<double>(p)), rng);
  params_.dense_b.assign(q, 0.0);
  for (int d = 0; d < 2; ++d) {
    FillUniform(params_.lstm_wx[d], 4 * hh * in, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    FillUniform(params_.lstm_wh[d], 4 * hh * hh, 1.0 / std::sqrt(static_cast<double>(hh)), rng);
    params_.lstm_b[d].assign(4 * hh, 0.0);
    std::fill(params_.lstm_b[d].begin() + hh, params_.lstm_b[d].begin() + 2 * hh, 1.0);
  }
  size_t m = q + 2 * hh;
  FillUniform(params_.out_w, config_.classes * m, 1.0 / std::sqrt(static_cast<double>(m)), rng);
  params_.out_b.assign(config_.classes, 0.0);
}

void ValidatorModel::CheckShapes() const {
  const size_t e = config_.embed_dim, nf = config_.filters_per_size;
  const size_t p = config_.pooled_dim(), q = config_.dense_hidden, hh = config_.lstm_hidden;
  const size_t in = config_.junction == Junction::kSequence ? p : q;
  bool ok = params_.embedding.size() == vocab_.rows() * e &&
            params_.conv_w.size() == config_.filter_sizes.size() &&
            params_.conv_b.size() == config_.filter_sizes.size() &&
            params_.dense_w.size() == q * p && params_.dense_b.size() == q &&
            params_.out_w.size() == config_.classes * (q + 2 * hh) &&
            params_.out_b.size() == config_.classes;
  for (size_t g = 0; ok && g < config_.filter_sizes.size(); ++g) {
    ok = params_.conv_w[g].size() == nf * config_.filter_sizes[g] * e &&
         params_.conv_b[g].size() == nf;
  }
  for (int d = 0; ok && d < 2; ++d) {
    ok = params_.lstm_wx[d].size() == 4 * hh * in && params_.lstm_wh[d].size() == 4 * hh * hh &&
         params_.lstm_b[d].size() == 4 * hh;
  }
  if (!ok) throw DataError("validator parameters do not match the network configuration");
}

std::vector<double> ValidatorModel::Embed(const PairInput &pair,
                                          std::vector<int> *row_ids) const {
  const size_t d = config_.seq_len, e = config_.embed_dim;
  const size_t budget = d - 1;
  size_t call_keep = std::min(pair.call_log.size(), budget);
  size_t detail_keep = std::min(pair.detail.size(), budget - call_keep);
  std::vector<int> ids;
  ids.reserve(call_keep + 1 + detail_keep);
  ids.insert(ids.end(), pair.call_log.begin(), pair.call_log.begin() + call_keep);
  ids.push_back(TokenVocab::kSep);
  ids.insert(ids.end(), pair.detail.begin(), pair.detail.begin() + detail_keep);
  std::vector<double> x(d * e, 0.0);
  const size_t vocab_rows = vocab_.rows();
  for (size_t r = 0; r < ids.size(); ++r) {
    int id = ids[r];
    if (id < 0 || static_cast<size_t>(id) >= vocab_rows) {
      id = TokenVocab::kUnk;
      ids[r] = id;
    }
    std::copy_n(params_.embedding.begin() + id * e, e, x.begin() + r * e);
  }
  if (row_ids) *row_ids = std::move(ids);
  return x;
}

ForwardState ValidatorModel::Forward(const PairInput &pair, Rng *dropout_rng) const {
  CheckShapes();
  const NetConfig &cfg = config_;
  const size_t d = cfg.seq_len, e = cfg.embed_dim, nf = cfg.filters_per_size;
  const size_t p = cfg.pooled_dim(), q = cfg.dense_hidden, hh = cfg.lstm_hidden;
  const size_t n_groups = cfg.filter_sizes.size();
  ForwardState s;
  s.x = Embed(pair, &s.row_ids);
  s.occupied_rows = s.row_ids.size();
  const size_t occupied = s.occupied_rows;

  // Convolutions. Windows made only of padding rows equal relu(bias).
  s.conv_pre.resize(n_groups);
  s.conv_out.resize(n_groups);
  for (size_t g = 0; g < n_groups; ++g) {
    const size_t h = cfg.filter_sizes[g], rows = d - h + 1;
    const auto &w = params_.conv_w[g];
    const auto &b = params_.conv_b[g];
    auto &pre = s.conv_pre[g];
    pre.resize(rows * nf);
    for (size_t t = 0; t < rows; ++t) {
      double *out = pre.data() + t * nf;
      std::copy(b.begin(), b.end(), out);
      if (t >= occupied) continue;
      size_t live = std::min(h, occupied - t);
      // Only occupied rows of the window contribute.
      for (size_t f = 0; f < nf; ++f) {
        const double *wf = w.data() + f * h * e;
        const double *xw = s.x.data() + t * e;
        double acc = 0.0;
        for (size_t k = 0; k < live * e; ++k) acc += wf[k] * xw[k];
        out[f] += acc;
      }
    }
    auto &act = s.conv_out[g];
    act.resize(pre.size());
    for (size_t i = 0; i < pre.size(); ++i) act[i] = std::max(0.0, pre[i]);
  }

  // Max-pooling; the first maximal position wins.
  s.pooled.assign(p, 0.0);
  s.argmax.assign(p, 0);
  for (size_t g = 0; g < n_groups; ++g) {
    const size_t rows = d - cfg.filter_sizes[g] + 1;
    const auto &act = s.conv_out[g];
    for (size_t f = 0; f < nf; ++f) {
      double best = act[f];
      size_t at = 0;
      for (size_t t = 1; t < rows; ++t) {
        if (act[t * nf + f] > best) {
          best = act[t * nf + f];
          at = t;
        }
      }
      s.pooled[g * nf + f] = best;
      s.argmax[g * nf + f] = at;
    }
  }

  std::vector<double> pooled_in = s.pooled;
  if (dropout_rng && cfg.dropout > 0.0) {
    s.pooled_mask = DropoutMask(p, cfg.dropout, *dropout_rng);
    for (size_t i = 0; i < p; ++i) pooled_in[i] *= s.pooled_mask[i];
  }
  s.dense_pre = params_.dense_b;
  MatVecAdd(params_.dense_w.data(), pooled_in.data(), q, p, s.dense_pre.data());
  s.dense.resize(q);
  for (size_t i = 0; i < q; ++i) s.dense[i] = std::max(0.0, s.dense_pre[i]);

  // Recurrent input.
  if (cfg.junction == Junction::kSequence) {
    s.steps = d - cfg.max_filter() + 1;
    s.lstm_input = p;
    s.sequence.assign(s.steps * p, 0.0);
    for (size_t t = 0; t < s.steps; ++t) {
      for (size_t g = 0; g < n_groups; ++g) {
        std::copy_n(s.conv_out[g].begin() + t * nf, nf, s.sequence.begin() + t * p + g * nf);
      }
    }
  } else {
    s.steps = 1;
    s.lstm_input = q;
    s.sequence = s.dense;
  }
  const size_t steps = s.steps, in = s.lstm_input;
  // Steps at or past the occupied rows all see the same input, so their
  // input projection is computed once.
  const bool shared_tail = cfg.junction == Junction::kSequence;
  for (int dir = 0; dir < 2; ++dir) {
    const auto &wx = params_.lstm_wx[dir];
    const auto &wh = params_.lstm_wh[dir];
    const auto &b = params_.lstm_b[dir];
    s.gates[dir].assign(steps * 4 * hh, 0.0);
    s.cell[dir].assign((steps + 1) * hh, 0.0);
    s.hidden[dir].assign((steps + 1) * hh, 0.0);
    std::vector<double> tail_proj;
    std::vector<double> pre(4 * hh);
    for (size_t k = 0; k < steps; ++k) {
      size_t t = dir == 0 ? k : steps - 1 - k;
      if (shared_tail && t >= occupied) {
        if (tail_proj.empty()) {
          tail_proj.assign(4 * hh, 0.0);
          MatVecAdd(wx.data(), s.sequence.data() + t * in, 4 * hh, in, tail_proj.data());
        }
        std::copy(tail_proj.begin(), tail_proj.end(), pre.begin());
      } else {
        std::fill(pre.begin(), pre.end(), 0.0);
        MatVecAdd(wx.data(), s.sequence.data() + t * in, 4 * hh, in, pre.data());
      }
      for (size_t j = 0; j < 4 * hh; ++j) pre[j] += b[j];
      MatVecAdd(wh.data(), s.hidden[dir].data() + k * hh, 4 * hh, hh, pre.data());
      LstmStep(pre.data(), s.cell[dir].data() + k * hh, hh, s.gates[dir].data() + k * 4 * hh,
               s.cell[dir].data() + (k + 1) * hh, s.hidden[dir].data() + (k + 1) * hh);
    }
  }

  const size_t m = q + 2 * hh;
  s.merged.resize(m);
  std::copy(s.dense.begin(), s.dense.end(), s.merged.begin());
  std::copy_n(s.hidden[0].begin() + steps * hh, hh, s.merged.begin() + q);
  std::copy_n(s.hidden[1].begin() + steps * hh, hh, s.merged.begin() + q + hh);
  std::vector<double> merged_in = s.merged;
  if (dropout_rng && cfg.dropout > 0.0) {
    s.merged_mask = DropoutMask(m, cfg.dropout, *dropout_rng);
    for (size_t i = 0; i < m; ++i) merged_in[i] *= s.merged_mask[i];
  }
  s.logits = params_.out_b;
  MatVecAdd(params_.out_w.data(), merged_in.data(), cfg.classes, m, s.logits.data());
  s.probs = Softmax(s.logits);
  return s;
}

double ValidatorModel::Backward(const ForwardState &s, int label, NetParams &grad) const {
  const NetConfig &cfg = config_;
  const size_t d = cfg.seq_len, e = cfg.embed_dim, nf = cfg.filters_per_size;
  const size_t p = cfg.pooled_dim(), q = cfg.dense_hidden, hh = cfg.lstm_hidden;
  const size_t n_groups = cfg.filter_sizes.size(), m = q + 2 * hh;
  const size_t steps = s.steps, in = s.lstm_input, occupied = s.occupied_rows;
  const double loss = ExampleLoss(s.logits, label);

  // Softmax + cross-entropy.
  std::vector<double> dlogits = s.probs;
  dlogits[label] -= 1.0;
  std::vector<double> merged_in = s.merged;
  if (!s.merged_mask.empty()) {
    for (size_t i = 0; i < m; ++i) merged_in[i] *= s.merged_mask[i];
  }
  OuterAdd(dlogits.data(), merged_in.data(), cfg.classes, m, grad.out_w.data());
  for (size_t c = 0; c < cfg.classes; ++c) grad.out_b[c] += dlogits[c];
  std::vector<double> dmerged(m, 0.0);
  MatTVecAdd(params_.out_w.data(), dlogits.data(), cfg.classes, m, dmerged.data());
  if (!s.merged_mask.empty()) {
    for (size_t i = 0; i < m; ++i) dmerged[i] *= s.merged_mask[i];
  }

  std::vector<double> ddense(dmerged.begin(), dmerged.begin() + q);
  std::vector<double> dsequence(steps * in, 0.0);
  // Summed input gradient over the shared-input tail steps.
  std::vector<double> tail_dseq;
  const bool shared_tail = cfg.junction == Junction::kSequence;

  for (int dir = 0; dir < 2; ++dir) {
    const auto &wx = params_.lstm_wx[dir];
    const auto &wh = params_.lstm_wh[dir];
    auto &gwx = grad.lstm_wx[dir];
    auto &gwh = grad.lstm_wh[dir];
    auto &gb = grad.lstm_b[dir];
    std::vector<double> dh(dmerged.begin() + q + dir * hh, dmerged.begin() + q + (dir + 1) * hh);
    std::vector<double> dc(hh, 0.0), da(4 * hh), tail_da(4 * hh, 0.0);
    bool tail_used = false;
    size_t tail_t = 0;
    for (size_t k = steps; k-- > 0;) {
      size_t t = dir == 0 ? k : steps - 1 - k;
      const double *gates = s.gates[dir].data() + k * 4 * hh;
      const double *c_prev = s.cell[dir].data() + k * hh;
      const double *c_now = s.cell[dir].data() + (k + 1) * hh;
      const double *h_prev = s.hidden[dir].data() + k * hh;
      for (size_t j = 0; j < hh; ++j) {
        double i = gates[j], f = gates[hh + j], o = gates[2 * hh + j], g = gates[3 * hh + j];
        double tc = std::tanh(c_now[j]);
        double dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
        da[j] = dcj * g * i * (1.0 - i);
        da[hh + j] = dcj * c_prev[j] * f * (1.0 - f);
        da[2 * hh + j] = dh[j] * tc * o * (1.0 - o);
        da[3 * hh + j] = dcj * i * (1.0 - g * g);
        dc[j] = dcj * f;
      }
      for (size_t j = 0; j < 4 * hh; ++j) gb[j] += da[j];
      OuterAdd(da.data(), h_prev, 4 * hh, hh, gwh.data());
      if (shared_tail && t >= occupied) {
        for (size_t j = 0; j < 4 * hh; ++j) tail_da[j] += da[j];
        tail_used = true;
        tail_t = t;
      } else {
        OuterAdd(da.data(), s.sequence.data() + t * in, 4 * hh, in, gwx.data());
        MatTVecAdd(wx.data(), da.data(), 4 * hh, in, dsequence.data() + t * in);
      }
      std::fill(dh.begin(), dh.end(), 0.0);
      MatTVecAdd(wh.data(), da.data(), 4 * hh, hh, dh.data());
    }
    if (tail_used) {
      OuterAdd(tail_da.data(), s.sequence.data() + tail_t * in, 4 * hh, in, gwx.data());
      if (tail_dseq.empty()) tail_dseq.assign(in, 0.0);
      MatTVecAdd(wx.data(), tail_da.data(), 4 * hh, in, tail_dseq.data());
    }
  }

  // Gradient w.r.t. the convolution outputs.
  std::vector<std::vector<double>> dconv(n_groups);
  for (size_t g = 0; g < n_groups; ++g) dconv[g].assign(s.conv_out[g].size(), 0.0);
  // Tail steps share one gradient per filter; it lands on the bias only.
  std::vector<std::vector<double>> dtail(n_groups, std::vector<double>(nf, 0.0));
  if (cfg.junction == Junction::kSequence) {
    for (size_t t = 0; t < std::min(steps, occupied); ++t) {
      for (size_t g = 0; g < n_groups; ++g) {
        for (size_t f = 0; f < nf; ++f) dconv[g][t * nf + f] += dsequence[t * p + g * nf + f];
      }
    }
    if (!tail_dseq.empty()) {
      for (size_t g = 0; g < n_groups; ++g) {
        for (size_t f = 0; f < nf; ++f) dtail[g][f] = tail_dseq[g * nf + f];
      }
    }
  } else {
    for (size_t i = 0; i < q; ++i) ddense[i] += dsequence[i];
  }

  // Dense layer after pooling.
  std::vector<double> pooled_in = s.pooled;
  if (!s.pooled_mask.empty()) {
    for (size_t i = 0; i < p; ++i) pooled_in[i] *= s.pooled_mask[i];
  }
  for (size_t i = 0; i < q; ++i) {
    if (s.dense_pre[i] <= 0.0) ddense[i] = 0.0;
  }
  OuterAdd(ddense.data(), pooled_in.data(), q, p, grad.dense_w.data());
  for (size_t i = 0; i < q; ++i) grad.dense_b[i] += ddense[i];
  std::vector<double> dpooled(p, 0.0);
  MatTVecAdd(params_.dense_w.data(), ddense.data(), q, p, dpooled.data());
  if (!s.pooled_mask.empty()) {
    for (size_t i = 0; i < p; ++i) dpooled[i] *= s.pooled_mask[i];
  }
  for (size_t g = 0; g < n_groups; ++g) {
    for (size_t f = 0; f < nf; ++f) dconv[g][s.argmax[g * nf + f] * nf + f] += dpooled[g * nf + f];
  }

  // Convolutions and embedding rows.
  std::vector<double> dx(occupied * e, 0.0);
  for (size_t g = 0; g < n_groups; ++g) {
    const size_t h = cfg.filter_sizes[g], rows = d - h + 1;
    const auto &w = params_.conv_w[g];
    auto &gw = grad.conv_w[g];
    auto &gb = grad.conv_b[g];
    const auto &pre = s.conv_pre[g];
    for (size_t f = 0; f < nf; ++f) {
      // Every padding-only window has pre-activation equal to the bias.
      if (params_.conv_b[g][f] > 0.0) gb[f] += dtail[g][f];
    }
    for (size_t t = 0; t < rows; ++t) {
      size_t live = t < occupied ? std::min(h, occupied - t) : 0;
      for (size_t f = 0; f < nf; ++f) {
        double da = pre[t * nf + f] > 0.0 ? dconv[g][t * nf + f] : 0.0;
        if (da == 0.0) continue;
        gb[f] += da;
        if (live == 0) continue;
        const double *xw = s.x.data() + t * e;
        double *gwf = gw.data() + f * h * e;
        const double *wf = w.data() + f * h * e;
        double *dxw = dx.data() + t * e;
        for (size_t k = 0; k < live * e; ++k) {
          gwf[k] += da * xw[k];
          dxw[k] += da * wf[k];
        }
      }
    }
  }
  for (size_t r = 0; r < occupied; ++r) {
    double *row = grad.embedding.data() + s.row_ids[r] * e;
    for (size_t k = 0; k < e; ++k) row[k] += dx[r * e + k];
  }
  return loss;
}

double ValidatorModel::Loss(std::span<const PairInput> inputs, std::span<const int> labels) const {
  if (inputs.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    total += ExampleLoss(Forward(inputs[i]).logits, labels[i]);
  }
  return total / static_cast<double>(inputs.size());
}

// ---------------------------------------------------------------------------
// Persistence

ModelArchive ValidatorModel::ToArchive() const {
  ModelArchive a("validator");
  const NetConfig &c = config_;
  a.SetInt("seq_len", c.seq_len);
  a.SetInt("embed_dim", c.embed_dim);
  std::vector<std::string> sizes;
  for (size_t h : c.filter_sizes) sizes.push_back(std::to_string(h));
  a.SetString("filter_sizes", Join(sizes, ","));
  a.SetInt("filters_per_size", c.filters_per_size);
  a.SetInt("lstm_hidden", c.lstm_hidden);
  a.SetInt("dense_hidden", c.dense_hidden);
  a.SetDouble("dropout", c.dropout);
  a.SetInt("classes", c.classes);
  a.SetInt("batch_size", c.batch_size);
  a.SetInt("epochs", c.epochs);
  a.SetDouble("learning_rate", c.learning_rate);
  a.SetDouble("momentum", c.momentum);
  a.SetInt("plateau_patience", c.plateau_patience);
  a.SetDouble("validation_fraction", c.validation_fraction);
  a.SetInt("min_token_count", c.min_token_count);
  a.SetInt("max_vocab", c.max_vocab);
  a.SetString("seed", std::to_string(c.seed));
  a.SetString("junction", c.junction == Junction::kSequence ? "sequence" : "pooled");
  a.SetString("tokens", Join(vocab_.tokens(), "\n"));
  a.SetString("vocab_hash", HexDigest(vocab_.Hash()));
  auto &self = const_cast<NetParams &>(params_);
  for (const auto &g : self.Groups()) a.SetTensor(g.name, 1, g.values->size(), *g.values);
  return a;
}

ValidatorModel ValidatorModel::FromArchive(const ModelArchive &a) {
  if (a.kind() != "validator") throw DataError("not a validator model file");
  NetConfig c;
  c.seq_len = a.GetInt("seq_len");
  c.embed_dim = a.GetInt("embed_dim");
  c.filter_sizes.clear();
  std::string sizes = a.GetString("filter_sizes");
  std::stringstream ss(sizes);
  for (std::string item; std::getline(ss, item, ',');) c.filter_sizes.push_back(std::stoul(item));
  c.filters_per_size = a.GetInt("filters_per_size");
  c.lstm_hidden = a.GetInt("lstm_hidden");
  c.dense_hidden = a.GetInt("dense_hidden");
  c.dropout = a.GetDouble("dropout");
  c.classes = a.GetInt("classes");
  c.batch_size = a.GetInt("batch_size");
  c.epochs = a.GetInt("epochs");
  c.learning_rate = a.GetDouble("learning_rate");
  c.momentum = a.GetDouble("momentum");
  c.plateau_patience = a.GetInt("plateau_patience");
  c.validation_fraction = a.GetDouble("validation_fraction");
  c.min_token_count = a.GetInt("min_token_count");
  c.max_vocab = a.GetInt("max_vocab");
  c.seed = std::stoull(a.GetString("seed"));
  c.junction = a.GetString("junction") == "sequence" ? Junction::kSequence : Junction::kPooledVector;
  const std::string &tokens = a.GetString("tokens");
  TokenVocab vocab(tokens.empty() ? std::vector<std::string>{} : [&] {
    std::vector<std::string> out;
    std::stringstream ts(tokens);
    for (std::string t; std::getline(ts, t, '\n');) out.push_back(t);
    return out;
  }());
  if (HexDigest(vocab.Hash()) != a.GetString("vocab_hash")) {
    throw DataError("validator vocabulary hash mismatch");
  }
  ValidatorModel model;
  model.config_ = c;
  model.vocab_ = std::move(vocab);
  model.params_.conv_w.resize(c.filter_sizes.size());
  model.params_.conv_b.resize(c.filter_sizes.size());
  for (auto &g : model.params_.Groups()) *g.values = a.GetTensor(g.name).data;
  model.config_.Validate();
  model.CheckShapes();
  return model;
}

uint64_t ValidatorModel::Fingerprint() const { return Fnv1a64(ToArchive().Serialize()); }

// ---------------------------------------------------------------------------
// Training

TrainedValidator TrainValidator(std::span<const PairInput> inputs, std::span<const int> labels,
                                TokenVocab vocab, const NetConfig &config) {
  if (inputs.size() != labels.size()) throw DataError("one label per input required");
  TrainedValidator out{ValidatorModel(config, std::move(vocab)), {}};
  ValidatorModel &model = out.model;
  if (config.epochs == 0 || inputs.empty()) return out;

  Rng split_rng(DeriveSeed(config.seed, "validator-split"));
  std::vector<size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  split_rng.Shuffle(order);
  size_t n_val = static_cast<size_t>(config.validation_fraction * inputs.size());
  if (n_val >= inputs.size()) n_val = 0;
  std::vector<size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<size_t> train_idx(order.begin() + n_val, order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  auto subset_loss = [&](const std::vector<size_t> &idx, double *accuracy) {
    double loss = 0.0;
    size_t correct = 0;
    for (size_t i : idx) {
      ForwardState s = model.Forward(inputs[i]);
      loss += ExampleLoss(s.logits, labels[i]);
      int pred = static_cast<int>(std::max_element(s.probs.begin(), s.probs.end()) - s.probs.begin());
      correct += pred == labels[i];
    }
    if (accuracy) *accuracy = idx.empty() ? 0.0 : static_cast<double>(correct) / idx.size();
    return idx.empty() ? 0.0 : loss / static_cast<double>(idx.size());
  };

  Rng shuffle_rng(DeriveSeed(config.seed, "validator-shuffle"));
  Rng dropout_rng(DeriveSeed(config.seed, "validator-dropout"));
  NetParams grad, velocity;
  grad.SetZeroLike(model.params());
  velocity.SetZeroLike(model.params());
  double lr = config.learning_rate;
  double best_val = std::numeric_limits<double>::infinity();
  size_t stale = 0;

  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<size_t> epoch_order = train_idx;
    shuffle_rng.Shuffle(epoch_order);
    for (size_t start = 0; start < epoch_order.size(); start += config.batch_size) {
      size_t end = std::min(epoch_order.size(), start + config.batch_size);
      for (auto &g : grad.Groups()) std::fill(g.values->begin(), g.values->end(), 0.0);
      double batch_loss = 0.0;
      for (size_t b = start; b < end; ++b) {
        size_t i = epoch_order[b];
        ForwardState s = model.Forward(inputs[i], &dropout_rng);
        batch_loss += model.Backward(s, labels[i], grad);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("validator loss became non-finite in epoch " +
                           std::to_string(epoch + 1) + " (learning_rate " + FormatDouble(lr) +
                           "); lower the learning rate");
      }
      double scale = 1.0 / static_cast<double>(end - start);
      auto pg = model.params().Groups();
      auto gg = grad.Groups();
      auto vg = velocity.Groups();
      for (size_t k = 0; k < pg.size(); ++k) {
        auto &pv = *pg[k].values;
        auto &gv = *gg[k].values;
        auto &vv = *vg[k].values;
        for (size_t j = 0; j < pv.size(); ++j) {
          vv[j] = config.momentum * vv[j] - lr * gv[j] * scale;
          pv[j] += vv[j];
        }
      }
    }
    EpochStats stats;
    stats.learning_rate = lr;
    stats.train_loss = subset_loss(train_idx, nullptr);
    if (!std::isfinite(stats.train_loss) || !model.params().AllFinite()) {
      throw NumericError("validator parameters became non-finite in epoch " +
                         std::to_string(epoch + 1) + " (learning_rate " + FormatDouble(lr) +
                         "); lower the learning rate");
    }
    stats.val_loss = subset_loss(val_idx.empty() ? train_idx : val_idx, &stats.val_accuracy);
    out.history.push_back(stats);
    if (stats.val_loss < best_val - 1e-12) {
      best_val = stats.val_loss;
      stale = 0;
    } else if (++stale >= config.plateau_patience && config.plateau_patience > 0) {
      lr *= 0.5;
      stale = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference loss

template <typename T>
T ReferenceLoss(const NetConfig &cfg, const NetParams &params, const std::vector<int> &row_ids,
                int label) {
  const size_t d = cfg.seq_len, e = cfg.embed_dim, nf = cfg.filters_per_size;
  const size_t p = cfg.pooled_dim(), q = cfg.dense_hidden, hh = cfg.lstm_hidden;
  const size_t occupied = row_ids.size(), n_groups = cfg.filter_sizes.size();
  std::vector<std::vector<T>> conv(n_groups);
  for (size_t g = 0; g < n_groups; ++g) {
    const size_t h = cfg.filter_sizes[g], rows = d - h + 1;
    conv[g].resize(rows * nf);
    for (size_t t = 0; t < rows; ++t) {
      for (size_t f = 0; f < nf; ++f) {
        T acc = params.conv_b[g][f];
        for (size_t j = 0; j < h && t + j < occupied; ++j) {
          const double *w = params.conv_w[g].data() + f * h * e + j * e;
          const double *x = params.embedding.data() + row_ids[t + j] * e;
          for (size_t k = 0; k < e; ++k) acc += static_cast<T>(w[k]) * static_cast<T>(x[k]);
        }
        conv[g][t * nf + f] = acc > 0 ? acc : T(0);
      }
    }
  }
  std::vector<T> pooled(p);
  for (size_t g = 0; g < n_groups; ++g) {
    const size_t rows = d - cfg.filter_sizes[g] + 1;
    for (size_t f = 0; f < nf; ++f) {
      T best = conv[g][f];
      for (size_t t = 1; t < rows; ++t) best = std::max(best, conv[g][t * nf + f]);
      pooled[g * nf + f] = best;
    }
  }
  std::vector<T> dense(q);
  for (size_t i = 0; i < q; ++i) {
    T acc = params.dense_b[i];
    for (size_t j = 0; j < p; ++j) acc += static_cast<T>(params.dense_w[i * p + j]) * pooled[j];
    dense[i] = acc > 0 ? acc : T(0);
  }
  const bool seq = cfg.junction == Junction::kSequence;
  const size_t steps = seq ? d - cfg.max_filter() + 1 : 1, in = seq ? p : q;
  auto input_at = [&](size_t t, std::vector<T> &x) {
    if (!seq) {
      x = dense;
      return;
    }
    for (size_t g = 0; g < n_groups; ++g) {
      for (size_t f = 0; f < nf; ++f) x[g * nf + f] = conv[g][t * nf + f];
    }
  };
  std::vector<T> merged(dense);
  for (int dir = 0; dir < 2; ++dir) {
    const auto &wx = params.lstm_wx[dir];
    const auto &wh = params.lstm_wh[dir];
    const auto &b = params.lstm_b[dir];
    std::vector<T> h(hh, T(0)), c(hh, T(0)), pre(4 * hh), x(in), tail;
    for (size_t k = 0; k < steps; ++k) {
      size_t t = dir == 0 ? k : steps - 1 - k;
      bool shared = seq && t >= occupied;
      if (!shared || tail.empty()) {
        input_at(t, x);
        std::vector<T> proj(4 * hh, T(0));
        for (size_t r = 0; r < 4 * hh; ++r) {
          for (size_t j = 0; j < in; ++j) proj[r] += static_cast<T>(wx[r * in + j]) * x[j];
        }
        if (shared) tail = proj;
        pre = proj;
      } else {
        pre = tail;
      }
      for (size_t r = 0; r < 4 * hh; ++r) {
        pre[r] += static_cast<T>(b[r]);
        for (size_t j = 0; j < hh; ++j) pre[r] += static_cast<T>(wh[r * hh + j]) * h[j];
      }
      for (size_t j = 0; j < hh; ++j) {
        T i = T(1) / (T(1) + std::exp(-pre[j]));
        T f = T(1) / (T(1) + std::exp(-pre[hh + j]));
        T o = T(1) / (T(1) + std::exp(-pre[2 * hh + j]));
        T gg = std::tanh(pre[3 * hh + j]);
        c[j] = f * c[j] + i * gg;
        h[j] = o * std::tanh(c[j]);
      }
    }
    merged.insert(merged.end(), h.begin(), h.end());
  }
  const size_t m = merged.size();
  std::vector<T> z(cfg.classes);
  T zmax = -std::numeric_limits<T>::infinity();
  for (size_t k = 0; k < cfg.classes; ++k) {
    T acc = params.out_b[k];
    for (size_t j = 0; j < m; ++j) acc += static_cast<T>(params.out_w[k * m + j]) * merged[j];
    z[k] = acc;
    zmax = std::max(zmax, acc);
  }
  T sum = 0;
  for (T v : z) sum += std::exp(v - zmax);
  return zmax + std::log(sum) - z[label];
}

double ValidatorModel::ReferenceLoss(const PairInput &pair, int label, bool extended) const {
  CheckShapes();
  std::vector<int> rows;
  Embed(pair, &rows);
  if (extended) {
    return static_cast<double>(svctriage::ReferenceLoss<long double>(config_, params_, rows, label));
  }
  return svctriage::ReferenceLoss<double>(config_, params_, rows, label);
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckResult GradCheck(const ValidatorModel &model, const PairInput &sample, int label,
                          const GradCheckOptions &options) {
  ValidatorModel probe = model;
  NetConfig cfg = probe.config();
  ForwardState s = probe.Forward(sample);
  NetParams analytic;
  analytic.SetZeroLike(probe.params());
  probe.Backward(s, label, analytic);

  auto groups = probe.params().Groups();
  auto agroups = analytic.Groups();
  if (options.corrupt) {
    for (size_t k = 0; k < agroups.size(); ++k) {
      if (agroups[k].name == options.corrupt->group) {
        (*agroups[k].values)[options.corrupt->index] *= options.corrupt->factor;
      }
    }
  }

  // Embedding rows outside the sample have identically zero gradients; the
  // sample draws from the rows the input touches.
  std::vector<int> used_rows;
  probe.Embed(sample, &used_rows);
  std::sort(used_rows.begin(), used_rows.end());
  used_rows.erase(std::unique(used_rows.begin(), used_rows.end()), used_rows.end());

  Rng rng(options.seed);
  // Spread the budget evenly; groups smaller than their share are checked in
  // full and the remainder moves to the larger groups.
  std::vector<size_t> quota(groups.size(), 0);
  {
    size_t remaining = options.n_params;
    std::vector<size_t> open(groups.size());
    std::iota(open.begin(), open.end(), 0);
    while (remaining > 0 && !open.empty()) {
      size_t share = std::max<size_t>(1, remaining / open.size());
      std::vector<size_t> still_open;
      for (size_t k : open) {
        size_t cap = groups[k].name == "embedding" ? std::numeric_limits<size_t>::max()
                                                   : groups[k].values->size();
        size_t add = std::min({share, cap - quota[k], remaining});
        quota[k] += add;
        remaining -= add;
        if (quota[k] < cap) still_open.push_back(k);
      }
      open.swap(still_open);
    }
  }
  GradCheckResult result;
  // Central difference. The double pass uses the production forward; entries
  // it cannot resolve are re-measured on the long double reference, which keeps
  // the cancellation in (up - down) far below the smallest gradients.
  auto numeric_at = [&](std::vector<double> &values, size_t idx, bool extended) {
    const double saved = values[idx];
    const double hi = saved + options.epsilon, lo = saved - options.epsilon;
    auto loss = [&]() -> long double {
      if (!extended) return ExampleLoss(probe.Forward(sample).logits, label);
      std::vector<int> rows;
      probe.Embed(sample, &rows);
      return svctriage::ReferenceLoss<long double>(cfg, probe.params(), rows, label);
    };
    values[idx] = hi;
    long double up = loss();
    values[idx] = lo;
    long double down = loss();
    values[idx] = saved;
    return static_cast<double>((up - down) / static_cast<long double>(hi - lo));
  };
  auto relative = [](double a, double n) {
    double denom = std::max(std::fabs(a), std::fabs(n));
    return denom < 1e-12 ? 0.0 : std::fabs(a - n) / denom;
  };
  for (size_t k = 0; k < groups.size(); ++k) {
    auto &values = *groups[k].values;
    std::vector<size_t> picks;
    if (groups[k].name == "embedding") {
      size_t e = cfg.embed_dim;
      for (size_t n = 0; n < quota[k]; ++n) {
        picks.push_back(used_rows[rng.Below(used_rows.size())] * e + rng.Below(e));
      }
    } else if (quota[k] >= values.size()) {
      picks.resize(values.size());
      std::iota(picks.begin(), picks.end(), 0);
    } else {
      // Distinct indices by partial Fisher-Yates.
      std::vector<size_t> all(values.size());
      std::iota(all.begin(), all.end(), 0);
      for (size_t n = 0; n < quota[k]; ++n) {
        std::swap(all[n], all[n + rng.Below(all.size() - n)]);
      }
      picks.assign(all.begin(), all.begin() + quota[k]);
    }
    if (options.corrupt && options.corrupt->group == groups[k].name) {
      picks.push_back(options.corrupt->index);
    }
    double group_max = 0.0;
    for (size_t idx : picks) {
      double a = (*agroups[k].values)[idx];
      double rel = relative(a, numeric_at(values, idx, false));
      if (rel > options.refine_above) rel = relative(a, numeric_at(values, idx, true));
      group_max = std::max(group_max, rel);
      ++result.checked;
    }
    result.per_group.emplace_back(groups[k].name, group_max);
    result.max_relative_error = std::max(result.max_relative_error, group_max);
  }
  return result;
}

}  // namespace svctriage
