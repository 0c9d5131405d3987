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

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyben/error.hpp"

namespace earlyben {

/// Outcome tasks have a favourable default class that is never actively
/// predicted; type tasks model every class.
enum class TaskMode { outcome, type };

inline const char* to_string(TaskMode m) { return m == TaskMode::outcome ? "outcome" : "type"; }

inline TaskMode parse_task_mode(const std::string& s) {
  if (s == "outcome") return TaskMode::outcome;
  if (s == "type") return TaskMode::type;
  throw ArgumentError("unknown mode '" + s + "' (expected outcome or type)");
}

/// Shape of the savings S(t) gained by deciding at tick t of L. Only the
/// linear form is provided; new shapes are added here and in savings_at().
enum class SavingsShape { linear };

/// Payoff model: savings rate plus a full C x C misclassification cost
/// matrix, cost(truth, predicted), zero on the diagonal.
struct BenefitSpec {
  TaskMode mode = TaskMode::type;
  double savings = 1.0;
  SavingsShape shape = SavingsShape::linear;
  std::size_t num_classes = 2;
  std::vector<double> cost;  // row-major, truth-major
  int default_class = 0;     // outcome mode only

  double cost_of(int truth, int predicted) const {
    return cost.at(static_cast<std::size_t>(truth) * num_classes + static_cast<std::size_t>(predicted));
  }

  /// S(t) for 1-based tick t of a length-L series.
  double savings_at(std::size_t t, std::size_t length) const {
    switch (shape) {
      case SavingsShape::linear:
        return static_cast<double>(length - t) * savings;
    }
    return 0.0;
  }

  /// Classes that get their own regressor.
  std::vector<int> active_classes() const {
    std::vector<int> out;
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (mode == TaskMode::type || static_cast<int>(c) != default_class) {
        out.push_back(static_cast<int>(c));
      }
    }
    return out;
  }

  bool is_active(int c) const {
    return c >= 0 && static_cast<std::size_t>(c) < num_classes &&
           (mode == TaskMode::type || c != default_class);
  }

  void validate() const {
    if (!(savings > 0.0) || !std::isfinite(savings)) {
      throw ArgumentError("savings rate must be positive and finite");
    }
    if (num_classes < 2) throw ArgumentError("benefit model needs at least 2 classes");
    if (cost.size() != num_classes * num_classes) {
      throw ArgumentError("cost matrix must be " + std::to_string(num_classes) + "x" +
                          std::to_string(num_classes));
    }
    for (std::size_t l = 0; l < num_classes; ++l) {
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double v = cost[l * num_classes + c];
        if (!std::isfinite(v) || v < 0.0) throw ArgumentError("cost entries must be finite and >= 0");
        if (l == c && v != 0.0) throw ArgumentError("cost matrix diagonal must be zero");
      }
    }
    if (mode == TaskMode::outcome &&
        (default_class < 0 || static_cast<std::size_t>(default_class) >= num_classes)) {
      throw ArgumentError("outcome mode needs a valid default class");
    }
  }

  bool operator==(const BenefitSpec&) const = default;
};

/// s = 1 and every off-diagonal cost equal to ratio.
inline BenefitSpec ms_ratio_spec(double ratio, std::size_t num_classes, TaskMode mode,
                                 int default_class = 0) {
  BenefitSpec spec;
  spec.mode = mode;
  spec.savings = 1.0;
  spec.num_classes = num_classes;
  spec.default_class = default_class;
  spec.cost.assign(num_classes * num_classes, ratio);
  for (std::size_t c = 0; c < num_classes; ++c) spec.cost[c * num_classes + c] = 0.0;
  spec.validate();
  return spec;
}

/// Benefit of predicting `predicted` at 1-based tick t on a series of length
/// L whose true class is `truth`: S(t) - cost(truth, predicted). Predicting
/// the default class in outcome mode is worth exactly 0.
inline double benefit_value(const BenefitSpec& spec, int truth, int predicted, std::size_t t,
                            std::size_t length) {
  if (t < 1 || t > length) {
    throw ArgumentError("tick " + std::to_string(t) + " outside [1, " + std::to_string(length) + "]");
  }
  if (truth < 0 || static_cast<std::size_t>(truth) >= spec.num_classes || predicted < 0 ||
      static_cast<std::size_t>(predicted) >= spec.num_classes) {
    throw ArgumentError("class index out of range");
  }
  if (spec.mode == TaskMode::outcome && predicted == spec.default_class) return 0.0;
  return spec.savings_at(t, length) - spec.cost_of(truth, predicted);
}

/// Per-tick regression targets b_1..b_L for one (series, modelled class) pair.
inline std::vector<double> build_targets(const BenefitSpec& spec, int truth, int model_class,
                                         std::size_t length) {
  if (!spec.is_active(model_class)) {
    throw ArgumentError("class " + std::to_string(model_class) + " has no regressor in " +
                        to_string(spec.mode) + " mode");
  }
  std::vector<double> out(length);
  for (std::size_t t = 1; t <= length; ++t) out[t - 1] = benefit_value(spec, truth, model_class, t, length);
  return out;
}

/// One decided (or undecided) instance, as consumed by total_benefit.
struct DecisionTuple {
  int truth = 0;
  std::optional<int> predicted;  // nullopt: no prediction fired
  std::size_t tick = 0;          // 1-based; ignored when predicted is empty
  std::size_t length = 0;
};

/// Sum of benefit_value over decided instances. Undecided instances add 0:
/// in outcome mode they are default predictions, in type mode unclassified.
inline double total_benefit(const BenefitSpec& spec, const std::vector<DecisionTuple>& decisions) {
  double total = 0.0;
  for (const auto& d : decisions) {
    if (!d.predicted) continue;
    total += benefit_value(spec, d.truth, *d.predicted, d.tick, d.length);
  }
  return total;
}

inline nlohmann::json to_json(const BenefitSpec& spec) {
  nlohmann::json cost = nlohmann::json::array();
  for (std::size_t l = 0; l < spec.num_classes; ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < spec.num_classes; ++c) row.push_back(spec.cost_of(static_cast<int>(l), static_cast<int>(c)));
    cost.push_back(row);
  }
  nlohmann::json j = {{"mode", to_string(spec.mode)}, {"savings", spec.savings}, {"cost", cost}};
  j["default_class"] = spec.default_class;
  return j;
}

inline BenefitSpec benefit_spec_from_json(const nlohmann::json& j) {
  BenefitSpec spec;
  try {
    spec.mode = parse_task_mode(j.at("mode").get<std::string>());
    spec.savings = j.at("savings").get<double>();
    const auto& rows = j.at("cost");
    spec.num_classes = rows.size();
    for (const auto& row : rows) {
      if (row.size() != spec.num_classes) throw ArgumentError("cost matrix must be square");
      for (const auto& v : row) spec.cost.push_back(v.get<double>());
    }
    spec.default_class = j.value("default_class", 0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("benefit config: ") + e.what());
  }
  spec.validate();
  return spec;
}

inline BenefitSpec load_benefit_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open benefit config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("benefit config '" + path + "': " + e.what());
  }
  return benefit_spec_from_json(j);
}

inline void save_benefit_spec(const BenefitSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PersistenceError("cannot write '" + path + "'");
  out << to_json(spec).dump(2) << '\n';
}

}  // namespace earlyben
