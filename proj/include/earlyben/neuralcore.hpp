// Copyright 2026 The earlyben Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyben/error.hpp"

namespace earlyben {

enum class Activation { tanh, sigmoid };

/// full: softmax attention over every cached hidden state, queried by the
/// current cell state. last_state: the head reads concat(h_t, c_t) directly,
/// so a streamed update costs the same at every tick.
enum class AttentionMode { full, last_state };

inline const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "sigmoid"; }
inline const char* to_string(AttentionMode m) { return m == AttentionMode::full ? "full" : "last-state"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ArgumentError("unknown activation '" + s + "'");
}

inline AttentionMode parse_attention_mode(const std::string& s) {
  if (s == "full") return AttentionMode::full;
  if (s == "last-state" || s == "last_state") return AttentionMode::last_state;
  throw ArgumentError("unknown attention mode '" + s + "' (expected full or last-state)");
}

struct ModelConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 16;
  Activation activation = Activation::tanh;
  AttentionMode attention = AttentionMode::full;

  void validate() const {
    if (input_dim < 1) throw ArgumentError("input dimension must be >= 1");
    if (hidden_dim < 1) throw ArgumentError("hidden dimension must be >= 1");
  }

  std::size_t parameter_count() const {
    const std::size_t d = input_dim, h = hidden_dim;
    return 4 * (h * d + h * h + h) + h * 2 * h + h + 1;
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Named slices of the flat parameter vector, in storage order.
enum class ParamGroup { input_weights, recurrent_weights, gate_bias, attention, head_weights, head_bias };

inline constexpr ParamGroup kParamGroups[] = {ParamGroup::input_weights, ParamGroup::recurrent_weights,
                                              ParamGroup::gate_bias,     ParamGroup::attention,
                                              ParamGroup::head_weights,  ParamGroup::head_bias};

inline const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::input_weights: return "input_weights";
    case ParamGroup::recurrent_weights: return "recurrent_weights";
    case ParamGroup::gate_bias: return "gate_bias";
    case ParamGroup::attention: return "attention";
    case ParamGroup::head_weights: return "head_weights";
    case ParamGroup::head_bias: return "head_bias";
  }
  return "?";
}

/// Flat parameter storage. Layout:
///   W_x [4H x d] | W_h [4H x H] | b [4H] | W_a [H x 2H] | w [H] | w0
/// Gate rows are ordered input, forget, candidate, output. Matrices are
/// row-major. Gradients use the same type.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelConfig& cfg) : config_(cfg), data_(cfg.parameter_count(), 0.0) {
    cfg.validate();
  }

  const ModelConfig& config() const { return config_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  std::size_t offset(ParamGroup g) const {
    const std::size_t d = config_.input_dim, h = config_.hidden_dim;
    switch (g) {
      case ParamGroup::input_weights: return 0;
      case ParamGroup::recurrent_weights: return 4 * h * d;
      case ParamGroup::gate_bias: return 4 * h * d + 4 * h * h;
      case ParamGroup::attention: return 4 * h * d + 4 * h * h + 4 * h;
      case ParamGroup::head_weights: return 4 * h * d + 4 * h * h + 4 * h + 2 * h * h;
      case ParamGroup::head_bias: return 4 * h * d + 4 * h * h + 4 * h + 2 * h * h + h;
    }
    return 0;
  }

  std::size_t group_size(ParamGroup g) const {
    const std::size_t d = config_.input_dim, h = config_.hidden_dim;
    switch (g) {
      case ParamGroup::input_weights: return 4 * h * d;
      case ParamGroup::recurrent_weights: return 4 * h * h;
      case ParamGroup::gate_bias: return 4 * h;
      case ParamGroup::attention: return 2 * h * h;
      case ParamGroup::head_weights: return h;
      case ParamGroup::head_bias: return 1;
    }
    return 0;
  }

  std::span<double> group(ParamGroup g) { return {data_.data() + offset(g), group_size(g)}; }
  std::span<const double> group(ParamGroup g) const { return {data_.data() + offset(g), group_size(g)}; }

  std::span<const double> input_weights() const { return group(ParamGroup::input_weights); }
  std::span<const double> recurrent_weights() const { return group(ParamGroup::recurrent_weights); }
  std::span<const double> gate_bias() const { return group(ParamGroup::gate_bias); }
  std::span<const double> attention_weights() const { return group(ParamGroup::attention); }
  std::span<const double> head_weights() const { return group(ParamGroup::head_weights); }
  double head_bias() const { return data_.back(); }
  double& head_bias() { return data_.back(); }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const ModelParams&) const = default;

 private:
  ModelConfig config_;
  std::vector<double> data_;
};

/// Uniform(-1/sqrt(H), 1/sqrt(H)) weights with the forget-gate bias at 1.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p(cfg);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : p.flat()) v = dist(rng);
  auto bias = p.group(ParamGroup::gate_bias);
  const std::size_t h = cfg.hidden_dim;
  std::fill(bias.begin() + static_cast<std::ptrdiff_t>(h), bias.begin() + static_cast<std::ptrdiff_t>(2 * h), 1.0);
  return p;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double activate(Activation a, double x) {
  return a == Activation::tanh ? std::tanh(x) : sigmoid(x);
}

/// Derivative expressed through the activation's output y.
inline double activate_grad(Activation a, double y) {
  return a == Activation::tanh ? 1.0 - y * y : y * (1.0 - y);
}

/// Dot product with four independent partial sums so the loop vectorizes.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

inline std::size_t sequence_length(std::span<const double> seq, std::size_t dim) {
  if (dim == 0 || seq.size() % dim != 0) {
    throw ShapeError("sequence of " + std::to_string(seq.size()) +
                     " values is not a whole number of " + std::to_string(dim) + "-vectors");
  }
  return seq.size() / dim;
}

}  // namespace detail

/// Gate activations and states of one LSTM step.
struct LstmStep {
  std::vector<double> gates;  // 4H: input, forget, candidate, output (post-nonlinearity)
  std::vector<double> hidden;
  std::vector<double> cell;
};

/// One LSTM recurrence step. Writes the 4H gate activations and the new
/// hidden and cell states.
inline void lstm_step(const ModelParams& p, std::span<const double> x, std::span<const double> h_prev,
                      std::span<const double> c_prev, std::span<double> gates, std::span<double> h_out,
                      std::span<double> c_out) {
  const std::size_t d = p.config().input_dim, h = p.config().hidden_dim;
  if (x.size() != d) {
    throw ShapeError("observation has dimension " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(d));
  }
  const auto wx = p.input_weights();
  const auto wh = p.recurrent_weights();
  const auto b = p.gate_bias();
  for (std::size_t r = 0; r < 4 * h; ++r) {
    const double z = b[r] + detail::dot(wx.data() + r * d, x.data(), d) +
                     detail::dot(wh.data() + r * h, h_prev.data(), h);
    gates[r] = (r >= 2 * h && r < 3 * h) ? std::tanh(z) : detail::sigmoid(z);
  }
  for (std::size_t j = 0; j < h; ++j) {
    const double i = gates[j], f = gates[h + j], g = gates[2 * h + j], o = gates[3 * h + j];
    c_out[j] = f * c_prev[j] + i * g;
    h_out[j] = o * std::tanh(c_out[j]);
  }
}

/// Hidden/cell states of every tick, flattened T x H, plus gate activations.
struct LstmTrace {
  std::size_t hidden_dim = 0;
  std::vector<double> hidden;
  std::vector<double> cell;
  std::vector<double> gates;  // T x 4H

  std::size_t length() const { return hidden_dim == 0 ? 0 : hidden.size() / hidden_dim; }
  std::span<const double> h(std::size_t t) const { return {hidden.data() + t * hidden_dim, hidden_dim}; }
  std::span<const double> c(std::size_t t) const { return {cell.data() + t * hidden_dim, hidden_dim}; }
  std::span<const double> hiddens_upto(std::size_t n) const { return {hidden.data(), n * hidden_dim}; }
};

/// Runs the recurrence from zero initial state over a prefix of T ticks.
inline LstmTrace lstm_forward(const ModelParams& p, std::span<const double> prefix) {
  const std::size_t d = p.config().input_dim, h = p.config().hidden_dim;
  const std::size_t len = detail::sequence_length(prefix, d);
  if (len == 0) throw ShapeError("prefix must contain at least one tick");
  LstmTrace tr;
  tr.hidden_dim = h;
  tr.hidden.assign(len * h, 0.0);
  tr.cell.assign(len * h, 0.0);
  tr.gates.assign(len * 4 * h, 0.0);
  const std::vector<double> zeros(h, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    std::span<const double> hp = t == 0 ? std::span<const double>(zeros) : tr.h(t - 1);
    std::span<const double> cp = t == 0 ? std::span<const double>(zeros) : tr.c(t - 1);
    lstm_step(p, prefix.subspan(t * d, d), hp, cp, {tr.gates.data() + t * 4 * h, 4 * h},
              {tr.hidden.data() + t * h, h}, {tr.cell.data() + t * h, h});
  }
  return tr;
}

struct AttentionResult {
  std::vector<double> alpha;     // T weights; empty in last-state mode
  std::vector<double> context;   // H
  std::vector<double> attended;  // H, activation(W_a [context; query])
};

/// alpha = softmax_t(query . h_t) computed with max-subtraction,
/// context = sum_t alpha_t h_t, attended = act(W_a [context; query]).
inline AttentionResult attention(std::span<const double> hiddens, std::span<const double> query,
                                 std::span<const double> wa, Activation act) {
  const std::size_t h = query.size();
  const std::size_t len = detail::sequence_length(hiddens, h);
  if (len == 0) throw ShapeError("attention over an empty sequence");
  if (wa.size() != 2 * h * h) throw ShapeError("attention matrix must be H x 2H");

  AttentionResult r;
  r.alpha.resize(len);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < len; ++t) {
    const double s = detail::dot(query.data(), hiddens.data() + t * h, h);
    r.alpha[t] = s;
    top = std::max(top, s);
  }
  double denom = 0.0;
  for (double& a : r.alpha) {
    a = std::exp(a - top);
    denom += a;
  }
  for (double& a : r.alpha) a /= denom;

  r.context.assign(h, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j < h; ++j) r.context[j] += r.alpha[t] * hiddens[t * h + j];
  }
  r.attended.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    const double* row = wa.data() + i * 2 * h;
    const double u = detail::dot(row, r.context.data(), h) + detail::dot(row + h, query.data(), h);
    r.attended[i] = detail::activate(act, u);
  }
  return r;
}

/// Last-state head input: act(W_a [h_t; c_t]); no attention weights.
inline AttentionResult last_state_projection(std::span<const double> hidden, std::span<const double> cell,
                                             std::span<const double> wa, Activation act) {
  const std::size_t h = hidden.size();
  if (cell.size() != h || wa.size() != 2 * h * h) throw ShapeError("last-state projection shape mismatch");
  AttentionResult r;
  r.context.assign(hidden.begin(), hidden.end());
  r.attended.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    const double* row = wa.data() + i * 2 * h;
    const double u = detail::dot(row, hidden.data(), h) + detail::dot(row + h, cell.data(), h);
    r.attended[i] = detail::activate(act, u);
  }
  return r;
}

inline double linear_head(const ModelParams& p, std::span<const double> attended) {
  const auto w = p.head_weights();
  return p.head_bias() + detail::dot(attended.data(), w.data(), w.size());
}

/// Attention (or last-state projection) for the prefix ending at tick n-1 of
/// an LSTM trace. Shared by the batch and streaming paths so both produce
/// bit-identical estimates.
inline AttentionResult head_input(const ModelParams& p, std::span<const double> hiddens,
                                  std::span<const double> last_hidden, std::span<const double> last_cell) {
  const auto wa = p.attention_weights();
  if (p.config().attention == AttentionMode::full) {
    return attention(hiddens, last_cell, wa, p.config().activation);
  }
  return last_state_projection(last_hidden, last_cell, wa, p.config().activation);
}

struct Prediction {
  double value = 0.0;
  std::vector<double> alpha;
};

/// Estimated benefit of the raw regressor for one prefix.
inline Prediction predict_benefit(const ModelParams& p, std::span<const double> prefix) {
  const LstmTrace tr = lstm_forward(p, prefix);
  const std::size_t n = tr.length();
  AttentionResult a = head_input(p, tr.hiddens_upto(n), tr.h(n - 1), tr.c(n - 1));
  Prediction out;
  out.value = linear_head(p, a.attended);
  if (!std::isfinite(out.value)) throw NumericError("non-finite prediction at tick " + std::to_string(n));
  out.alpha = std::move(a.alpha);
  return out;
}

// ---------------------------------------------------------------------------
// Objective and gradients

struct RegressionSample {
  std::span<const double> prefix;  // T x d values
  double target = 0.0;
};

/// All requested prefixes of one series, evaluated with a single recurrence
/// pass. Prefix lengths are tick counts in [1, length].
struct SeriesTargets {
  std::span<const double> series;
  std::vector<std::size_t> prefix_lengths;
  std::vector<double> targets;
};

namespace detail {

/// Sum of squared residuals over the requested prefixes of one series. With a
/// grad target, also adds grad_scale * r * d(pred)/d(theta) per prefix.
inline double accumulate_series(const ModelParams& p, const SeriesTargets& st, double grad_scale,
                                ModelParams* grad) {
  const std::size_t d = p.config().input_dim, h = p.config().hidden_dim;
  const Activation act = p.config().activation;
  const bool full = p.config().attention == AttentionMode::full;
  const std::size_t series_len = sequence_length(st.series, d);
  if (st.prefix_lengths.size() != st.targets.size()) throw ShapeError("prefix/target count mismatch");
  std::size_t max_len = 0;
  for (std::size_t n : st.prefix_lengths) {
    if (n < 1 || n > series_len) throw ShapeError("prefix length outside the series");
    max_len = std::max(max_len, n);
  }
  if (max_len == 0) return 0.0;

  const LstmTrace tr = lstm_forward(p, st.series.subspan(0, max_len * d));
  const auto wa = p.attention_weights();
  const auto w = p.head_weights();

  std::vector<double> dh_ext, dc_ext;
  if (grad) {
    dh_ext.assign(max_len * h, 0.0);
    dc_ext.assign(max_len * h, 0.0);
  }
  std::vector<double> du(h), dz(2 * h), dalpha;

  double sse = 0.0;
  for (std::size_t e = 0; e < st.prefix_lengths.size(); ++e) {
    const std::size_t n = st.prefix_lengths[e];
    const auto hl = tr.h(n - 1);
    const auto cl = tr.c(n - 1);
    const AttentionResult a = head_input(p, tr.hiddens_upto(n), hl, cl);
    const double pred = linear_head(p, a.attended);
    if (!std::isfinite(pred)) throw NumericError("non-finite prediction at tick " + std::to_string(n));
    const double r = pred - st.targets[e];
    sse += r * r;
    if (!grad) continue;

    const double db = grad_scale * r;
    auto gw = grad->group(ParamGroup::head_weights);
    for (std::size_t j = 0; j < h; ++j) gw[j] += db * a.attended[j];
    grad->head_bias() += db;

    for (std::size_t i = 0; i < h; ++i) du[i] = db * w[i] * activate_grad(act, a.attended[i]);
    // z = [context; query] for full attention, [h_n; c_n] for last-state.
    auto gwa = grad->group(ParamGroup::attention);
    std::span<const double> z_lo = full ? std::span<const double>(a.context) : hl;
    std::fill(dz.begin(), dz.end(), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
      const double* row = wa.data() + i * 2 * h;
      double* grow = gwa.data() + i * 2 * h;
      for (std::size_t j = 0; j < h; ++j) {
        grow[j] += du[i] * z_lo[j];
        grow[h + j] += du[i] * cl[j];
        dz[j] += row[j] * du[i];
        dz[h + j] += row[h + j] * du[i];
      }
    }
    double* dc_last = dc_ext.data() + (n - 1) * h;
    if (!full) {
      double* dh_last = dh_ext.data() + (n - 1) * h;
      for (std::size_t j = 0; j < h; ++j) {
        dh_last[j] += dz[j];
        dc_last[j] += dz[h + j];
      }
      continue;
    }
    // Softmax backward: ds_k = alpha_k (dalpha_k - sum_j alpha_j dalpha_j).
    dalpha.assign(n, 0.0);
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = dot(dz.data(), tr.h(k).data(), h);
      dalpha[k] = s;
      mean += a.alpha[k] * s;
    }
    for (std::size_t j = 0; j < h; ++j) dc_last[j] += dz[h + j];
    for (std::size_t k = 0; k < n; ++k) {
      const double ds = a.alpha[k] * (dalpha[k] - mean);
      const auto hk = tr.h(k);
      double* dhk = dh_ext.data() + k * h;
      for (std::size_t j = 0; j < h; ++j) {
        dhk[j] += a.alpha[k] * dz[j] + ds * cl[j];
        dc_last[j] += ds * hk[j];
      }
    }
  }
  if (!grad) return sse;

  // Backpropagation through time.
  auto gwx = grad->group(ParamGroup::input_weights);
  auto gwh = grad->group(ParamGroup::recurrent_weights);
  auto gb = grad->group(ParamGroup::gate_bias);
  const auto wh = p.recurrent_weights();
  std::vector<double> dh_rec(h, 0.0), dc_rec(h, 0.0), dgate(4 * h);
  for (std::size_t k = max_len; k-- > 0;) {
    const double* gates = tr.gates.data() + k * 4 * h;
    const auto ck = tr.c(k);
    for (std::size_t j = 0; j < h; ++j) {
      const double i = gates[j], f = gates[h + j], g = gates[2 * h + j], o = gates[3 * h + j];
      const double dh = dh_ext[k * h + j] + dh_rec[j];
      const double tc = std::tanh(ck[j]);
      const double dc = dc_ext[k * h + j] + dc_rec[j] + dh * o * (1.0 - tc * tc);
      const double c_prev = k == 0 ? 0.0 : tr.c(k - 1)[j];
      dgate[j] = dc * g * i * (1.0 - i);
      dgate[h + j] = dc * c_prev * f * (1.0 - f);
      dgate[2 * h + j] = dc * i * (1.0 - g * g);
      dgate[3 * h + j] = dh * tc * o * (1.0 - o);
      dc_rec[j] = dc * f;
      if (!std::isfinite(dc) || !std::isfinite(dh)) {
        throw NumericError("non-finite gradient at tick " + std::to_string(k + 1));
      }
    }
    const auto xk = st.series.subspan(k * d, d);
    std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double g = dgate[r];
      gb[r] += g;
      double* gx = gwx.data() + r * d;
      for (std::size_t c = 0; c < d; ++c) gx[c] += g * xk[c];
      if (k > 0) {
        const auto hp = tr.h(k - 1);
        double* gh = gwh.data() + r * h;
        for (std::size_t c = 0; c < h; ++c) gh[c] += g * hp[c];
      }
      const double* whr = wh.data() + r * h;
      for (std::size_t c = 0; c < h; ++c) dh_rec[c] += whr[c] * g;
    }
  }
  return sse;
}

inline SeriesTargets single_prefix(const RegressionSample& s, std::size_t dim) {
  SeriesTargets st;
  st.series = s.prefix;
  st.prefix_lengths = {sequence_length(s.prefix, dim)};
  st.targets = {s.target};
  return st;
}

}  // namespace detail

/// Mean squared error over the prefix samples of a batch.
inline double loss(const ModelParams& p, std::span<const RegressionSample> batch) {
  if (batch.empty()) throw ArgumentError("loss over an empty batch");
  double sse = 0.0;
  for (const auto& s : batch) sse += detail::accumulate_series(p, detail::single_prefix(s, p.config().input_dim), 0.0, nullptr);
  return sse / static_cast<double>(batch.size());
}

/// Exact gradient of loss() by backpropagation through time, one
/// independent forward pass per sample.
inline ModelParams backward(const ModelParams& p, std::span<const RegressionSample> batch) {
  if (batch.empty()) throw ArgumentError("gradient over an empty batch");
  ModelParams g(p.config());
  const double scale = 2.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) detail::accumulate_series(p, detail::single_prefix(s, p.config().input_dim), scale, &g);
  return g;
}

/// Mean squared error over every prefix of every series in the batch; each
/// series is run through the recurrence once. Returns the loss and, when
/// grad is non-null, overwrites it with the gradient.
inline double series_loss_and_gradient(const ModelParams& p, std::span<const SeriesTargets> batch,
                                       ModelParams* grad) {
  std::size_t count = 0;
  for (const auto& st : batch) count += st.prefix_lengths.size();
  if (count == 0) throw ArgumentError("loss over an empty batch");
  if (grad) {
    if (!(grad->config() == p.config())) *grad = ModelParams(p.config());
    grad->set_zero();
  }
  const double scale = 2.0 / static_cast<double>(count);
  double sse = 0.0;
  for (const auto& st : batch) sse += detail::accumulate_series(p, st, scale, grad);
  return sse / static_cast<double>(count);
}

/// Central-difference gradient estimate, the verification oracle for backward().
inline ModelParams finite_diff_grad(const ModelParams& p, std::span<const RegressionSample> batch,
                                    double step = 1e-5) {
  if (!(step > 0.0)) throw ArgumentError("finite-difference step must be positive");
  ModelParams probe = p;
  ModelParams g(p.config());
  auto theta = probe.flat();
  auto out = g.flat();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double orig = theta[k];
    theta[k] = orig + step;
    const double up = loss(probe, batch);
    theta[k] = orig - step;
    const double down = loss(probe, batch);
    theta[k] = orig;
    out[k] = (up - down) / (2.0 * step);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ModelParams& p, double lr) {
    AdamState s;
    s.m.assign(p.size(), 0.0);
    s.v.assign(p.size(), 0.0);
    s.learning_rate = lr;
    return s;
  }
};

/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
inline void adam_step(ModelParams& p, const ModelParams& grads, AdamState& state) {
  if (grads.size() != p.size() || state.m.size() != p.size() || state.v.size() != p.size()) {
    throw ShapeError("Adam state, gradient and parameters must have the same size");
  }
  const auto g = grads.flat();
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!std::isfinite(g[k])) throw NumericError("non-finite gradient entry " + std::to_string(k));
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto theta = p.flat();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g[k];
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g[k] * g[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    theta[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden_dim", c.hidden_dim},
          {"activation", to_string(c.activation)},
          {"attention", to_string(c.attention)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.attention = parse_attention_mode(j.at("attention").get<std::string>());
  c.validate();
  return c;
}

}  // namespace earlyben
