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
#include <limits>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "earlyben/benefit.hpp"
#include "earlyben/error.hpp"
#include "earlyben/neuralcore.hpp"

namespace earlyben {

/// When a streamed benefit estimate turns into a label.
struct DecisionPolicy {
  TaskMode mode = TaskMode::type;
  /// Required lead of the best class over the runner-up (type mode only).
  double delta_abs = 0.0;
  AttentionMode attention = AttentionMode::full;

  void validate() const {
    if (!(delta_abs >= 0.0) || !std::isfinite(delta_abs)) throw ConfigError("decision margin must be >= 0");
  }

  bool operator==(const DecisionPolicy&) const = default;
};

/// Applies the decision rule to one tick's per-class estimates.
/// Outcome mode: fire the best unfavourable class once its estimate is > 0.
/// Type mode: fire the argmax class c* when b[c*] > 0 and
/// b[c*] - max_{c != c*} b[c] >= delta_abs. Ties go to the lowest index; a
/// margin exactly equal to delta_abs fires.
inline std::optional<int> apply_rule(const DecisionPolicy& policy, std::span<const int> classes,
                                     std::span<const double> estimates) {
  if (classes.empty() || classes.size() != estimates.size()) {
    throw ShapeError("decision rule needs one estimate per active class");
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < estimates.size(); ++k) {
    if (estimates[k] > estimates[best]) best = k;
  }
  if (!(estimates[best] > 0.0)) return std::nullopt;
  if (policy.mode == TaskMode::type) {
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      if (k != best) runner_up = std::max(runner_up, estimates[k]);
    }
    if (estimates[best] - runner_up < policy.delta_abs) return std::nullopt;
  }
  return classes[best];
}

inline nlohmann::ordered_json to_json(const DecisionPolicy& p) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(p.mode);
  j["delta_abs"] = p.delta_abs;
  j["attention"] = to_string(p.attention);
  return j;
}

inline DecisionPolicy decision_policy_from_json(const nlohmann::json& j) {
  DecisionPolicy p;
  p.mode = parse_task_mode(j.at("mode").get<std::string>());
  p.delta_abs = j.at("delta_abs").get<double>();
  p.attention = parse_attention_mode(j.at("attention").get<std::string>());
  p.validate();
  return p;
}

}  // namespace earlyben
