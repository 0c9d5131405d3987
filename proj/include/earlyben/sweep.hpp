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
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyben/benefit.hpp"
#include "earlyben/dataio.hpp"
#include "earlyben/error.hpp"
#include "earlyben/evalbench.hpp"
#include "earlyben/parallel.hpp"
#include "earlyben/training.hpp"

namespace earlyben {

/// Hyperparameter grid. M/s values are absolute ratios; ms_factors, when
/// set, are multiplied by the longest training series at resolve time.
struct SweepGrid {
  std::vector<double> learning_rates = {0.01, 0.001};
  std::vector<std::size_t> hidden_dims = {16, 32};
  std::vector<double> ms_ratios;
  std::vector<double> ms_factors = {0.5, 1.0, 1.5, 2.0};
  std::vector<double> delta_fractions = {0.4, 0.5, 0.6, 0.7};
  TaskMode mode = TaskMode::type;
  int default_class = 0;
  /// Everything except learning rate, hidden size and delta fraction.
  TrainConfig base;

  void validate() const {
    if (learning_rates.empty() || hidden_dims.empty() || delta_fractions.empty()) {
      throw ConfigError("sweep grids must be non-empty");
    }
    if (ms_ratios.empty() && ms_factors.empty()) throw ConfigError("sweep needs ms_ratio or ms_factor values");
    for (double r : ms_ratios) {
      if (!(r > 0.0)) throw ConfigError("M/s ratios must be positive");
    }
    for (double f : ms_factors) {
      if (!(f > 0.0)) throw ConfigError("M/s factors must be positive");
    }
    base.validate();
  }
};

/// Absolute M/s values for a training set.
inline std::vector<double> resolve_ms_ratios(const SweepGrid& grid, const LabeledDataset& train) {
  if (!grid.ms_ratios.empty()) return grid.ms_ratios;
  std::vector<double> out;
  for (double f : grid.ms_factors) out.push_back(f * static_cast<double>(train.max_length()));
  return out;
}

/// One model-training unit of the grid. Delta fractions only change the
/// decision margin, so every delta value shares the unit's bundle.
struct SweepUnit {
  double learning_rate = 0.0;
  std::size_t hidden_dim = 0;
  double ms_ratio = 0.0;
};

struct SweepConfig {
  double learning_rate = 0.0;
  std::size_t hidden_dim = 0;
  double ms_ratio = 0.0;
  double delta_fraction = 0.0;

  std::string id() const {
    return "lr" + detail::format_double(learning_rate) + "_h" + std::to_string(hidden_dim) + "_ms" +
           detail::format_double(ms_ratio) + "_d" + detail::format_double(delta_fraction);
  }
};

struct SweepResult {
  SweepConfig config;
  /// Position in grid enumeration order.
  std::size_t order = 0;
  std::optional<EvalReport> val;
  std::optional<EvalReport> test;
  double distance = std::numeric_limits<double>::infinity();
  /// 1-based rank among successful points; 0 for failed points.
  std::size_t rank = 0;
  bool best = false;
  std::string error;
  std::shared_ptr<const TrainedBundle> bundle;
};

/// Units in enumeration order: learning rate, hidden size, M/s.
inline std::vector<SweepUnit> sweep_units(const SweepGrid& grid, const LabeledDataset& train) {
  std::vector<SweepUnit> out;
  for (double lr : grid.learning_rates) {
    for (std::size_t h : grid.hidden_dims) {
      for (double ms : resolve_ms_ratios(grid, train)) out.push_back({lr, h, ms});
    }
  }
  return out;
}

/// Delta values that produce distinct policies for the grid's mode.
inline std::vector<double> effective_deltas(const SweepGrid& grid) {
  if (grid.mode == TaskMode::outcome) return {grid.delta_fractions.front()};
  return grid.delta_fractions;
}

/// Raw training instances whose ids the bundle held out for validation.
inline LabeledDataset validation_subset(const LabeledDataset& train, const TrainedBundle& bundle) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < train.size(); ++i) index.emplace(train.instances[i].id, i);
  LabeledDataset val = train;
  val.instances.clear();
  for (const auto& id : bundle.validation_ids) {
    auto it = index.find(id);
    if (it == index.end()) throw ConfigError("validation id '" + id + "' not found in training data");
    val.instances.push_back(train.instances[it->second]);
  }
  return val;
}

/// Trains one unit and scores every delta variant on the validation split
/// and, when given, on a test set. Training failures are recorded in the
/// results rather than thrown.
inline std::vector<SweepResult> run_sweep_unit(const LabeledDataset& train, const LabeledDataset* test,
                                               const SweepGrid& grid, const SweepUnit& unit,
                                               std::size_t workers = 1) {
  const auto deltas = effective_deltas(grid);
  std::vector<SweepResult> out(deltas.size());
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    out[k].config = {unit.learning_rate, unit.hidden_dim, unit.ms_ratio, deltas[k]};
  }
  try {
    const auto spec = ms_ratio_spec(unit.ms_ratio, train.num_classes, grid.mode, grid.default_class);
    TrainConfig cfg = grid.base;
    cfg.learning_rate = unit.learning_rate;
    cfg.hidden_dim = unit.hidden_dim;
    cfg.delta_fraction = deltas.front();
    const auto trained = std::make_shared<const TrainedBundle>(train_bundle(train, spec, cfg, workers));
    const auto classes = trained->active_classes();
    const int positive = default_positive_class(spec);
    const auto val_replays = replay_dataset(trained, trained->policy, validation_subset(train, *trained));
    std::vector<StreamReplay> test_replays;
    if (test) test_replays = replay_dataset(trained, trained->policy, *test);

    for (std::size_t k = 0; k < deltas.size(); ++k) {
      auto variant = std::make_shared<TrainedBundle>(*trained);
      variant->train_config.delta_fraction = deltas[k];
      if (grid.mode == TaskMode::type) variant->policy.delta_abs = deltas[k] * variant->target_spread;
      out[k].val = evaluate(records_under_policy(val_replays, variant->policy, spec, classes), spec, positive);
      if (test) {
        out[k].test = evaluate(records_under_policy(test_replays, variant->policy, spec, classes), spec, positive);
      }
      out[k].distance = distance_to_ideal(out[k].val->accuracy, out[k].val->tardiness);
      out[k].bundle = std::move(variant);
    }
  } catch (const Error& e) {
    for (auto& r : out) r.error = std::string(category_name(e.category())) + ": " + e.what();
  }
  return out;
}

/// Distance rounded to 1e-12 so that ties in exact arithmetic stay ties
/// after floating-point rounding.
inline long long distance_key(double d) { return std::llround(d * 1e12); }

/// Ranks successful points by distance to (accuracy 1, tardiness 0), then
/// lower tardiness, lower M/s and enumeration order; marks rank 1 as best.
inline void rank_sweep(std::vector<SweepResult>& results) {
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].rank = 0;
    results[i].best = false;
    if (results[i].val) ok.push_back(i);
  }
  std::sort(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = results[a];
    const auto& y = results[b];
    if (distance_key(x.distance) != distance_key(y.distance)) return distance_key(x.distance) < distance_key(y.distance);
    if (x.val->tardiness != y.val->tardiness) return x.val->tardiness < y.val->tardiness;
    if (x.config.ms_ratio != y.config.ms_ratio) return x.config.ms_ratio < y.config.ms_ratio;
    return x.order < y.order;
  });
  for (std::size_t r = 0; r < ok.size(); ++r) results[ok[r]].rank = r + 1;
  if (!ok.empty()) results[ok.front()].best = true;
}

/// Trains every grid point (units run concurrently on `workers` threads),
/// scores on validation and ranks. Results keep enumeration order.
inline std::vector<SweepResult> grid_search(const LabeledDataset& train, const LabeledDataset* test,
                                            const SweepGrid& grid, std::size_t workers = 1) {
  grid.validate();
  validate(train);
  const auto units = sweep_units(grid, train);
  std::vector<std::vector<SweepResult>> per_unit(units.size());
  parallel_for(units.size(), workers,
               [&](std::size_t u) { per_unit[u] = run_sweep_unit(train, test, grid, units[u], 1); });
  std::vector<SweepResult> results;
  for (auto& chunk : per_unit) {
    for (auto& r : chunk) {
      r.order = results.size();
      results.push_back(std::move(r));
    }
  }
  rank_sweep(results);
  return results;
}

inline std::vector<SweepPoint> sweep_points(const std::vector<SweepResult>& results, bool use_test) {
  std::vector<SweepPoint> out;
  for (const auto& r : results) {
    const auto& rep = use_test ? r.test : r.val;
    if (!rep) continue;
    out.push_back({r.config.id(), rep->tardiness, rep->accuracy, *rep});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid files and ranked manifests

namespace detail {

template <typename T>
std::vector<T> scalar_or_list(const nlohmann::json& j, const char* key, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_array()) return v.get<std::vector<T>>();
  return {v.get<T>()};
}

}  // namespace detail

/// Grid from a JSON object. List-valued keys: learning_rate, hidden_dim,
/// ms_ratio, ms_factor, delta_fraction. Scalar keys fill the base config.
inline SweepGrid sweep_grid_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("grid file must hold a JSON object");
  try {
    SweepGrid g;
    g.learning_rates = detail::scalar_or_list(j, "learning_rate", g.learning_rates);
    g.hidden_dims = detail::scalar_or_list(j, "hidden_dim", g.hidden_dims);
    g.ms_ratios = detail::scalar_or_list(j, "ms_ratio", std::vector<double>{});
    g.ms_factors = detail::scalar_or_list(j, "ms_factor", g.ms_ratios.empty() ? g.ms_factors : std::vector<double>{});
    g.delta_fractions = detail::scalar_or_list(j, "delta_fraction", g.delta_fractions);
    if (j.contains("mode")) g.mode = parse_task_mode(j.at("mode").get<std::string>());
    g.default_class = j.value("default_class", g.default_class);
    auto& b = g.base;
    b.epochs = j.value("epochs", b.epochs);
    b.batch_size = j.value("batch_size", b.batch_size);
    b.stride = j.value("stride", b.stride);
    b.patience = j.value("patience", b.patience);
    b.train_fraction = j.value("train_fraction", b.train_fraction);
    b.normalize = j.value("normalize", b.normalize);
    b.seed = j.value("seed", b.seed);
    if (j.contains("attention")) b.attention = parse_attention_mode(j.at("attention").get<std::string>());
    if (j.contains("activation")) b.activation = parse_activation(j.at("activation").get<std::string>());
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grid file: ") + e.what());
  }
}

inline nlohmann::ordered_json to_json(const SweepGrid& g) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(g.mode);
  j["default_class"] = g.default_class;
  j["learning_rate"] = g.learning_rates;
  j["hidden_dim"] = g.hidden_dims;
  if (!g.ms_ratios.empty()) {
    j["ms_ratio"] = g.ms_ratios;
  } else {
    j["ms_factor"] = g.ms_factors;
  }
  j["delta_fraction"] = g.delta_fractions;
  const auto base = to_json(g.base);
  for (const char* key : {"epochs", "batch_size", "stride", "patience", "train_fraction", "normalize", "seed",
                          "attention", "activation"}) {
    j[key] = base.at(key);
  }
  return j;
}

inline std::vector<std::string> sweep_manifest_columns(bool with_test) {
  std::vector<std::string> cols = {"rank",     "best",           "config_id", "learning_rate",
                                   "hidden_dim", "ms_ratio", "delta_fraction", "distance"};
  for (const auto& c : report_columns()) cols.push_back("val_" + c);
  if (with_test) {
    for (const auto& c : report_columns()) cols.push_back("test_" + c);
  }
  cols.push_back("bundle");
  cols.push_back("error");
  return cols;
}

/// Ranked manifest CSV: successful points by rank, then failed points in
/// enumeration order. bundle_names[i] is the file written for results[i].
inline void write_sweep_manifest(const std::string& path, const std::vector<SweepResult>& results,
                                 const std::vector<std::string>& bundle_names) {
  const bool with_test = std::any_of(results.begin(), results.end(), [](const auto& r) { return r.test.has_value(); });
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const std::size_t ra = results[a].rank ? results[a].rank : results.size() + 1;
    const std::size_t rb = results[b].rank ? results[b].rank : results.size() + 1;
    return ra < rb;
  });
  std::ofstream out(path);
  if (!out) throw PersistenceError("cannot write '" + path + "'");
  const auto cols = sweep_manifest_columns(with_test);
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << '\n';
  const std::vector<std::string> blanks(report_columns().size());
  for (std::size_t i : order) {
    const auto& r = results[i];
    std::vector<std::string> cells = {r.rank ? std::to_string(r.rank) : "",
                                      r.best ? "1" : "0",
                                      r.config.id(),
                                      csv::fmt(r.config.learning_rate),
                                      std::to_string(r.config.hidden_dim),
                                      csv::fmt(r.config.ms_ratio),
                                      csv::fmt(r.config.delta_fraction),
                                      r.val ? csv::fmt(r.distance) : ""};
    const auto vcells = r.val ? report_cells(*r.val) : blanks;
    cells.insert(cells.end(), vcells.begin(), vcells.end());
    if (with_test) {
      const auto tcells = r.test ? report_cells(*r.test) : blanks;
      cells.insert(cells.end(), tcells.begin(), tcells.end());
    }
    cells.push_back(i < bundle_names.size() ? bundle_names[i] : "");
    cells.push_back(r.error);
    for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << csv::quote(cells[k]);
    out << '\n';
  }
}

/// Sweep points from a ranked manifest, read from the val_ or test_ columns.
inline std::vector<SweepPoint> read_sweep_points(const std::string& path, bool use_test) {
  const auto table = csv::read(path);
  const std::string prefix = use_test ? "test_" : "val_";
  if (!table.has_column(prefix + "accuracy")) {
    throw FormatError("'" + path + "' has no " + prefix + "metrics");
  }
  csv::Table sub;
  for (const auto& c : report_columns()) sub.header.push_back(c);
  std::vector<SweepPoint> out;
  for (const auto& row : table.rows) {
    if (row[table.column(prefix + "accuracy")].empty()) continue;
    std::vector<std::string> cells;
    for (const auto& c : report_columns()) cells.push_back(row[table.column(prefix + c)]);
    const auto rep = report_from_row(sub, cells);
    out.push_back({row[table.column("config_id")], rep.tardiness, rep.accuracy, rep});
  }
  return out;
}

}  // namespace earlyben
