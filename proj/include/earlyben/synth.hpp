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
#include <cstddef>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyben/dataio.hpp"
#include "earlyben/error.hpp"
#include "earlyben/rng.hpp"

namespace earlyben {

struct SynthConfig {
  std::size_t n = 200;
  std::size_t dim = 8;
  std::size_t min_length = 24;
  std::size_t max_length = 96;
  /// Total drift reached at the last tick of an unfavourable series.
  double drift = 2.0;
  double noise = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 4) throw ArgumentError("synthetic dataset needs n >= 4");
    if (dim < 1) throw ArgumentError("synthetic dimension must be >= 1");
    if (min_length < 1 || min_length > max_length) throw ArgumentError("invalid length range");
    if (!(drift >= 0.0)) throw ArgumentError("drift must be >= 0");
    if (!(noise >= 0.0)) throw ArgumentError("noise must be >= 0");
  }
};

struct SynthTruth {
  std::string id;
  int label = 0;
  std::size_t length = 0;
  std::vector<std::size_t> drift_channels;
};

struct SynthData {
  LabeledDataset dataset;
  std::vector<SynthTruth> truth;
};

/// Two-outcome multivariate data. Class 0 (favourable) is stationary noise
/// around per-channel baselines; class 1 adds a linear drift, reaching
/// `drift` at the final tick, to a random non-empty channel subset.
/// Classes are split n/2 each and shuffled.
inline SynthData synth_outcome_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, "synth"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> len_dist(cfg.min_length, cfg.max_length);

  std::vector<double> baseline(cfg.dim);
  for (double& b : baseline) b = unit(rng);
  std::vector<int> labels(cfg.n, 0);
  std::fill(labels.begin() + static_cast<std::ptrdiff_t>(cfg.n / 2), labels.end(), 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  SynthData out;
  auto& ds = out.dataset;
  ds.dim = cfg.dim;
  ds.num_classes = 2;
  ds.class_labels = {"0", "1"};
  for (std::size_t i = 0; i < cfg.n; ++i) {
    SeriesInstance inst;
    inst.id = "s" + std::to_string(i);
    inst.label = labels[i];
    const std::size_t len = len_dist(rng);
    SynthTruth truth{inst.id, inst.label, len, {}};
    if (inst.label == 1) {
      for (std::size_t c = 0; c < cfg.dim; ++c) {
        if (unit(rng) < 0.5) truth.drift_channels.push_back(c);
      }
      if (truth.drift_channels.empty()) {
        truth.drift_channels.push_back(std::uniform_int_distribution<std::size_t>(0, cfg.dim - 1)(rng));
      }
    }
    inst.series = Sequence(cfg.dim, std::vector<double>(len * cfg.dim));
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < cfg.dim; ++c) inst.series.at(t, c) = baseline[c] + cfg.noise * gauss(rng);
      const double ramp = cfg.drift * static_cast<double>(t + 1) / static_cast<double>(len);
      for (std::size_t c : truth.drift_channels) inst.series.at(t, c) += ramp;
    }
    ds.instances.push_back(std::move(inst));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

/// Ground-truth sidecar: one JSON object per line with id, label, length
/// and the drifting channels.
inline void save_synth_truth(const std::vector<SynthTruth>& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PersistenceError("cannot write '" + path + "'");
  for (const auto& t : truth) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["label"] = t.label;
    j["length"] = t.length;
    j["drift_channels"] = t.drift_channels;
    out << j.dump() << '\n';
  }
}

}  // namespace earlyben
