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

// Random bundles and datasets shared by the streaming and evaluation suites.

#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "earlyben/training.hpp"

namespace earlyben::testing {

/// A bundle with seeded random (untrained) regressors and random
/// normalization stats.
inline std::shared_ptr<const TrainedBundle> random_bundle(TaskMode mode, std::size_t d, std::size_t h,
                                                          AttentionMode attention, std::uint64_t seed,
                                                          std::size_t num_classes = 2, double delta_abs = 0.0) {
  std::mt19937_64 rng(seed);
  auto b = std::make_shared<TrainedBundle>();
  b->model_config.input_dim = d;
  b->model_config.hidden_dim = h;
  b->model_config.attention = attention;
  b->benefit = ms_ratio_spec(10.0, num_classes, mode, 0);
  b->policy.mode = mode;
  b->policy.attention = attention;
  b->policy.delta_abs = mode == TaskMode::type ? delta_abs : 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) b->class_labels.push_back(std::to_string(c));
  NormStats st;
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (std::size_t c = 0; c < d; ++c) {
    const double lo = u(rng);
    st.min.push_back(lo);
    st.max.push_back(lo + 1.0 + std::abs(u(rng)));
  }
  b->norm = st;
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  for (int c : b->benefit.active_classes()) {
    RegressorModel m;
    m.model_class = c;
    m.params = init_params(b->model_config, rng());
    m.params.head_bias() = bias(rng);
    m.target_scale = 4.0;
    b->models.push_back(std::move(m));
  }
  return b;
}

inline SeriesInstance random_instance(std::mt19937_64& rng, std::size_t len, std::size_t d, int label = 0) {
  std::normal_distribution<double> nd(0.0, 1.5);
  SeriesInstance inst;
  inst.id = "r" + std::to_string(rng() % 100000);
  inst.label = label;
  inst.series.dim = d;
  for (std::size_t k = 0; k < len * d; ++k) inst.series.values.push_back(nd(rng));
  return inst;
}

}  // namespace earlyben::testing
