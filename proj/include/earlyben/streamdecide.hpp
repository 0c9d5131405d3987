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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlyben/error.hpp"
#include "earlyben/neuralcore.hpp"
#include "earlyben/policy.hpp"
#include "earlyben/training.hpp"

namespace earlyben {

enum class DecisionStatus { undecided, decided, finalized, unclassified };

inline const char* to_string(DecisionStatus s) {
  switch (s) {
    case DecisionStatus::undecided: return "undecided";
    case DecisionStatus::decided: return "decided";
    case DecisionStatus::finalized: return "finalized";
    case DecisionStatus::unclassified: return "unclassified";
  }
  return "?";
}

struct DecisionOutcome {
  DecisionStatus status = DecisionStatus::undecided;
  std::optional<int> predicted;
  std::size_t tick = 0;  // 1-based decision tick; 0 while undecided
  /// Benefit estimate of each active class at the current tick.
  std::vector<double> estimates;
};

/// Clamped min/max map of one raw value, identical to apply_normalize().
inline double normalize_value(double v, double lo, double hi) {
  const double span = hi - lo;
  return span > 0.0 ? std::clamp((v - lo) / span, 0.0, 1.0) : 0.0;
}

/// Online decision engine over one stream. Observations are raw values; the
/// bundle's normalization stats are applied on ingestion. Once a decision
/// fires it is sealed: later observations still advance the recurrent state
/// (for attention export) but never change the decision.
class StreamState {
 public:
  StreamState(std::shared_ptr<const TrainedBundle> bundle, DecisionPolicy policy)
      : bundle_(std::move(bundle)), policy_(policy) {
    if (!bundle_) throw ConfigError("stream needs a bundle");
    policy_.validate();
    if (policy_.mode != bundle_->benefit.mode) {
      throw ConfigError(std::string("policy mode '") + to_string(policy_.mode) + "' does not match bundle mode '" +
                        to_string(bundle_->benefit.mode) + "'");
    }
    if (policy_.attention != bundle_->model_config.attention) {
      throw ConfigError(std::string("policy attention mode '") + to_string(policy_.attention) +
                        "' does not match the bundle's trained mode '" +
                        to_string(bundle_->model_config.attention) + "'");
    }
    const std::size_t h = bundle_->model_config.hidden_dim;
    classes_ = bundle_->active_classes();
    lanes_.resize(bundle_->models.size());
    for (auto& lane : lanes_) {
      lane.hidden.assign(h, 0.0);
      lane.cell.assign(h, 0.0);
      lane.next_hidden.assign(h, 0.0);
      lane.next_cell.assign(h, 0.0);
      lane.gates.assign(4 * h, 0.0);
    }
    x_.resize(bundle_->model_config.input_dim);
    outcome_.estimates.assign(lanes_.size(), 0.0);
  }

  std::size_t tick() const { return tick_; }
  const DecisionPolicy& policy() const { return policy_; }
  const std::vector<int>& classes() const { return classes_; }
  const DecisionOutcome& current() const { return outcome_; }

  /// Advances every per-class recurrence by one tick and evaluates the rule.
  DecisionOutcome observe(std::span<const double> raw) {
    if (finalized_) throw StateError("observation after finalize");
    const std::size_t d = bundle_->model_config.input_dim;
    if (raw.size() != d) {
      throw ShapeError("observation has dimension " + std::to_string(raw.size()) + ", expected " + std::to_string(d));
    }
    for (std::size_t c = 0; c < d; ++c) {
      if (!std::isfinite(raw[c])) throw ArgumentError("observation contains a non-finite value");
      x_[c] = bundle_->norm ? normalize_value(raw[c], bundle_->norm->min[c], bundle_->norm->max[c]) : raw[c];
    }
    ++tick_;
    const bool full = policy_.attention == AttentionMode::full;
    for (std::size_t k = 0; k < lanes_.size(); ++k) {
      Lane& lane = lanes_[k];
      const RegressorModel& model = bundle_->models[k];
      lstm_step(model.params, x_, lane.hidden, lane.cell, lane.gates, lane.next_hidden, lane.next_cell);
      lane.hidden.swap(lane.next_hidden);
      lane.cell.swap(lane.next_cell);
      if (full) lane.history.insert(lane.history.end(), lane.hidden.begin(), lane.hidden.end());
      AttentionResult a = head_input(model.params, lane.history, lane.hidden, lane.cell);
      const double raw_estimate = linear_head(model.params, a.attended);
      if (!std::isfinite(raw_estimate)) throw NumericError("non-finite estimate at tick " + std::to_string(tick_));
      outcome_.estimates[k] = model.target_scale * raw_estimate;
      lane.alpha = std::move(a.alpha);
    }
    if (outcome_.status == DecisionStatus::undecided) {
      if (auto fired = apply_rule(policy_, classes_, outcome_.estimates)) {
        outcome_.status = DecisionStatus::decided;
        outcome_.predicted = *fired;
        outcome_.tick = tick_;
      }
    }
    return outcome_;
  }

  /// Closes the stream after exactly `length` observations. An undecided
  /// outcome stream becomes a default-class prediction at tick L; an
  /// undecided type stream is unclassified at tick L.
  DecisionOutcome finalize(std::size_t length) {
    if (tick_ != length) {
      throw StateError("finalize at length " + std::to_string(length) + " after " + std::to_string(tick_) +
                       " observations");
    }
    finalized_ = true;
    if (outcome_.status == DecisionStatus::undecided) {
      outcome_.tick = length;
      if (policy_.mode == TaskMode::outcome) {
        outcome_.status = DecisionStatus::finalized;
        outcome_.predicted = bundle_->benefit.default_class;
      } else {
        outcome_.status = DecisionStatus::unclassified;
        outcome_.predicted.reset();
      }
    }
    return outcome_;
  }

  /// Current attention weights alpha_1..alpha_t of every class model.
  std::vector<std::vector<double>> attention_snapshot() const {
    if (policy_.attention != AttentionMode::full) {
      throw ConfigError("attention export is unsupported in last-state mode");
    }
    if (tick_ == 0) throw StateError("attention snapshot before the first observation");
    std::vector<std::vector<double>> out;
    for (const auto& lane : lanes_) out.push_back(lane.alpha);
    return out;
  }

 private:
  struct Lane {
    std::vector<double> hidden, cell, next_hidden, next_cell, gates;
    std::vector<double> history;  // cached hidden states, full attention only
    std::vector<double> alpha;
  };

  std::shared_ptr<const TrainedBundle> bundle_;
  DecisionPolicy policy_;
  std::vector<int> classes_;
  std::vector<Lane> lanes_;
  std::vector<double> x_;
  std::size_t tick_ = 0;
  bool finalized_ = false;
  DecisionOutcome outcome_;
};

inline StreamState init_stream(std::shared_ptr<const TrainedBundle> bundle, const DecisionPolicy& policy) {
  return StreamState(std::move(bundle), policy);
}

/// Result of replaying one series through a stream.
struct StreamReplay {
  std::string id;
  int truth = 0;
  std::size_t length = 0;
  DecisionOutcome outcome;
  /// Per tick, per class benefit estimates (T x classes).
  std::vector<std::vector<double>> estimates;
  /// Per tick, per class attention rows (only when requested).
  std::vector<std::vector<std::vector<double>>> attention;
};

inline StreamReplay replay_series(std::shared_ptr<const TrainedBundle> bundle, const DecisionPolicy& policy,
                                  const SeriesInstance& inst, bool keep_attention = false) {
  if (inst.has_missing()) throw ArgumentError("instance '" + inst.id + "' has missing values");
  StreamState st(std::move(bundle), policy);
  StreamReplay r;
  r.id = inst.id;
  r.truth = inst.label;
  r.length = inst.length();
  for (std::size_t t = 0; t < inst.length(); ++t) {
    r.estimates.push_back(st.observe(inst.series.row(t)).estimates);
    if (keep_attention) r.attention.push_back(st.attention_snapshot());
  }
  r.outcome = st.finalize(inst.length());
  return r;
}

/// Re-applies a decision policy to stored estimate trajectories; matches
/// what a live stream with that policy would have decided.
inline DecisionOutcome decide_from_trajectory(const DecisionPolicy& policy, const BenefitSpec& spec,
                                              std::span<const int> classes,
                                              const std::vector<std::vector<double>>& estimates) {
  DecisionOutcome out;
  for (std::size_t t = 0; t < estimates.size(); ++t) {
    if (auto fired = apply_rule(policy, classes, estimates[t])) {
      out.status = DecisionStatus::decided;
      out.predicted = *fired;
      out.tick = t + 1;
      out.estimates = estimates[t];
      return out;
    }
  }
  out.tick = estimates.size();
  if (!estimates.empty()) out.estimates = estimates.back();
  if (policy.mode == TaskMode::outcome) {
    out.status = DecisionStatus::finalized;
    out.predicted = spec.default_class;
  } else {
    out.status = DecisionStatus::unclassified;
  }
  return out;
}

}  // namespace earlyben
