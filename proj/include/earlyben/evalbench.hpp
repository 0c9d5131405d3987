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
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "earlyben/benefit.hpp"
#include "earlyben/dataio.hpp"
#include "earlyben/error.hpp"
#include "earlyben/rng.hpp"
#include "earlyben/streamdecide.hpp"
#include "earlyben/training.hpp"

namespace earlyben {

/// Outcome of one test series, as consumed by evaluate().
struct DecisionRecord {
  std::string id;
  int truth = 0;
  std::optional<int> predicted;  // empty: no prediction (unclassified or default)
  std::size_t tick = 0;          // 1-based; L when nothing fired
  std::size_t length = 0;

  bool operator==(const DecisionRecord&) const = default;
};

inline DecisionRecord to_record(const StreamReplay& r) {
  return {r.id, r.truth, r.outcome.predicted, r.outcome.tick, r.length};
}

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double tardiness = 0.0;
  double total_benefit = 0.0;
  std::size_t unclassified = 0;
  std::size_t n = 0;

  bool operator==(const EvalReport&) const = default;
};

/// Precision/recall/F1 for positive_class, accuracy, mean tardiness
/// (tick / L, 1.0 when nothing fired), total benefit and unclassified count.
/// Outcome mode reads a missing prediction as the default class; type mode
/// counts it as unclassified and wrong.
inline EvalReport evaluate(std::span<const DecisionRecord> records, const BenefitSpec& spec, int positive_class) {
  if (records.empty()) throw ArgumentError("evaluate needs at least one decision record");
  EvalReport r;
  r.n = records.size();
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  double tardiness = 0.0;
  std::vector<DecisionTuple> tuples;
  tuples.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.length == 0) throw ArgumentError("record '" + rec.id + "' has zero length");
    if (rec.predicted && (rec.tick < 1 || rec.tick > rec.length)) {
      throw ArgumentError("record '" + rec.id + "' has decision tick outside [1, L]");
    }
    tardiness += rec.predicted ? static_cast<double>(rec.tick) / static_cast<double>(rec.length) : 1.0;

    std::optional<int> effective = rec.predicted;
    if (!effective && spec.mode == TaskMode::outcome) effective = spec.default_class;
    if (!effective) ++r.unclassified;

    if (effective && *effective == rec.truth) ++correct;
    const bool said_pos = effective && *effective == positive_class;
    const bool is_pos = rec.truth == positive_class;
    if (said_pos && is_pos) ++tp;
    if (said_pos && !is_pos) ++fp;
    if (!said_pos && is_pos) ++fn;
    tuples.push_back({rec.truth, rec.predicted, rec.predicted ? rec.tick : rec.length, rec.length});
  }
  const double n = static_cast<double>(r.n);
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.accuracy = static_cast<double>(correct) / n;
  r.tardiness = tardiness / n;
  r.total_benefit = total_benefit(spec, tuples);
  return r;
}

/// Positive class for precision/recall: the unfavourable class in outcome
/// mode, the highest class index in type mode unless overridden.
inline int default_positive_class(const BenefitSpec& spec) {
  if (spec.mode == TaskMode::outcome) return spec.active_classes().front();
  return static_cast<int>(spec.num_classes) - 1;
}

/// Streams every instance through the bundle and collects decisions.
inline std::vector<StreamReplay> replay_dataset(const std::shared_ptr<const TrainedBundle>& bundle,
                                                const DecisionPolicy& policy, const LabeledDataset& ds,
                                                bool keep_attention = false) {
  std::vector<StreamReplay> out;
  out.reserve(ds.size());
  for (const auto& inst : ds.instances) out.push_back(replay_series(bundle, policy, inst, keep_attention));
  return out;
}

/// Decision records for stored trajectories under a (possibly different) policy.
inline std::vector<DecisionRecord> records_under_policy(const std::vector<StreamReplay>& replays,
                                                        const DecisionPolicy& policy, const BenefitSpec& spec,
                                                        std::span<const int> classes) {
  std::vector<DecisionRecord> out;
  out.reserve(replays.size());
  for (const auto& r : replays) {
    const auto o = decide_from_trajectory(policy, spec, classes, r.estimates);
    out.push_back({r.id, r.truth, o.predicted, o.tick, r.length});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pareto analysis

struct SweepPoint {
  std::string config_id;
  double tardiness = 0.0;
  double accuracy = 0.0;
  EvalReport report;
};

/// Points not dominated under (lower tardiness, higher accuracy), sorted by
/// tardiness. Points with identical coordinates are kept once.
inline std::vector<SweepPoint> pareto_front(std::span<const SweepPoint> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].tardiness != points[b].tardiness) return points[a].tardiness < points[b].tardiness;
    return points[a].accuracy > points[b].accuracy;
  });
  std::vector<SweepPoint> front;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i : order) {
    if (points[i].accuracy > best) {
      front.push_back(points[i]);
      best = points[i].accuracy;
    }
  }
  return front;
}

/// Best accuracy among points whose mean tardiness is within tol; empty when
/// no point qualifies.
inline std::optional<double> accuracy_at_tolerance(std::span<const SweepPoint> points, double tol) {
  if (!(tol > 0.0 && tol <= 1.0)) throw ArgumentError("tolerance must lie in (0, 1]");
  std::optional<double> best;
  for (const auto& p : points) {
    if (p.tardiness <= tol && (!best || p.accuracy > *best)) best = p.accuracy;
  }
  return best;
}

/// Euclidean distance to the ideal corner (accuracy 1, tardiness 0).
inline double distance_to_ideal(double accuracy, double tardiness) {
  return std::sqrt((1.0 - accuracy) * (1.0 - accuracy) + tardiness * tardiness);
}

// ---------------------------------------------------------------------------
// Runtime benchmarks

/// Coefficient of determination of the least-squares line through (x, y).
inline std::optional<double> linear_fit_r2(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  if (syy == 0.0) return 1.0;
  return sxy * sxy / (sxx * syy);
}

/// Least-squares slope of y on x.
inline double linear_fit_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

struct ScalingPoint {
  double fraction = 0.0;
  std::size_t n = 0;
  double seconds = 0.0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  std::optional<double> r2;
};

/// Nested subsets: fraction f keeps the first round(f n) series of one seeded
/// permutation, so every larger fraction contains the smaller ones.
inline std::vector<LabeledDataset> nested_subsets(const LabeledDataset& ds, std::span<const double> fractions,
                                                  std::uint64_t seed) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, "subsets"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<LabeledDataset> out;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("fractions must lie in (0, 1]");
    const auto k = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(f * static_cast<double>(ds.size()))));
    LabeledDataset sub = ds;
    sub.instances.clear();
    for (std::size_t i = 0; i < std::min(k, ds.size()); ++i) sub.instances.push_back(ds.instances[order[i]]);
    out.push_back(std::move(sub));
  }
  return out;
}

/// Wall time of train_bundle per nested fraction and the R^2 of a line
/// through (fraction, seconds). Early stopping is disabled so every fraction
/// runs the same number of epochs. With `repeats` > 1 each fraction keeps its
/// fastest run.
inline ScalingReport bench_training_scaling(const LabeledDataset& ds, std::span<const double> fractions,
                                            const BenefitSpec& spec, TrainConfig cfg, std::size_t repeats = 1) {
  if (!std::is_sorted(fractions.begin(), fractions.end())) throw ArgumentError("fractions must be sorted");
  if (repeats == 0) throw ArgumentError("repeats must be positive");
  cfg.patience = 0;
  const auto subsets = nested_subsets(ds, fractions, cfg.seed);
  ScalingReport rep;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    double secs = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      const auto bundle = train_bundle(subsets[k], spec, cfg, 1);
      const auto stop = std::chrono::steady_clock::now();
      secs = std::min(secs, std::chrono::duration<double>(stop - start).count());
    }
    rep.points.push_back({fractions[k], subsets[k].size(), secs});
    xs.push_back(fractions[k]);
    ys.push_back(secs);
  }
  rep.r2 = linear_fit_r2(xs, ys);
  return rep;
}

/// Seeded, untrained bundle for latency measurements: `classes` type-mode
/// regressors, no normalization.
inline std::shared_ptr<const TrainedBundle> untrained_bundle(std::size_t dim, std::size_t hidden,
                                                             AttentionMode attention, std::size_t classes,
                                                             std::uint64_t seed) {
  auto b = std::make_shared<TrainedBundle>();
  b->model_config.input_dim = dim;
  b->model_config.hidden_dim = hidden;
  b->model_config.attention = attention;
  b->benefit = ms_ratio_spec(1.0, classes, TaskMode::type);
  b->policy.mode = TaskMode::type;
  b->policy.attention = attention;
  for (std::size_t c = 0; c < classes; ++c) b->class_labels.push_back(std::to_string(c));
  for (int c : b->benefit.active_classes()) {
    RegressorModel m;
    m.model_class = c;
    m.params = init_params(b->model_config, derive_seed(seed, static_cast<std::uint64_t>(c) + 1));
    b->models.push_back(std::move(m));
  }
  return b;
}

/// Median wall time of observe() at every tick over `repeats` replays, after
/// one untimed warm-up replay.
inline std::vector<double> bench_step_latency(const std::shared_ptr<const TrainedBundle>& bundle,
                                              const DecisionPolicy& policy, const Sequence& series,
                                              std::size_t repeats = 5) {
  if (series.length() == 0) throw ArgumentError("latency benchmark needs a non-empty series");
  repeats = std::max<std::size_t>(repeats, 5);
  const std::size_t len = series.length();
  std::vector<std::vector<double>> samples(len);
  for (std::size_t rep = 0; rep <= repeats; ++rep) {
    StreamState st(bundle, policy);
    for (std::size_t t = 0; t < len; ++t) {
      const auto start = std::chrono::steady_clock::now();
      st.observe(series.row(t));
      const auto stop = std::chrono::steady_clock::now();
      if (rep > 0) samples[t].push_back(std::chrono::duration<double>(stop - start).count());
    }
  }
  std::vector<double> out(len);
  for (std::size_t t = 0; t < len; ++t) out[t] = median(samples[t]);
  return out;
}

// ---------------------------------------------------------------------------
// CSV helpers

namespace csv {

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("CSV is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  bool has_column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path + "' is empty");
  t.header = split_line(line);
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw FormatError("'" + path + "' row " + std::to_string(ln) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline std::string fmt(double v) { return detail::format_double(v); }

}  // namespace csv

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {"precision", "recall",        "f1",           "accuracy",
                                                "tardiness", "total_benefit", "unclassified", "n"};
  return cols;
}

inline std::vector<std::string> report_cells(const EvalReport& r) {
  return {csv::fmt(r.precision), csv::fmt(r.recall),        csv::fmt(r.f1),              csv::fmt(r.accuracy),
          csv::fmt(r.tardiness), csv::fmt(r.total_benefit), std::to_string(r.unclassified), std::to_string(r.n)};
}

inline EvalReport report_from_row(const csv::Table& t, const std::vector<std::string>& row) {
  auto num = [&](const std::string& col) {
    auto v = detail::parse_double(row[t.column(col)]);
    if (!v) throw FormatError("column '" + col + "' is not numeric");
    return *v;
  };
  EvalReport r;
  r.precision = num("precision");
  r.recall = num("recall");
  r.f1 = num("f1");
  r.accuracy = num("accuracy");
  r.tardiness = num("tardiness");
  r.total_benefit = num("total_benefit");
  r.unclassified = static_cast<std::size_t>(num("unclassified"));
  r.n = static_cast<std::size_t>(num("n"));
  return r;
}

inline void write_report_csv(const std::string& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  const auto& cols = report_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << '\n';
  const auto cells = report_cells(r);
  for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
  out << '\n';
}

/// Decisions CSV: id, truth, predicted, tick, length, status, labels and,
/// when trace is set, the per-tick estimates ("a;b;c" per class, classes
/// separated by '|').
inline void write_decisions_csv(const std::string& path, const std::vector<StreamReplay>& replays,
                                const std::vector<std::string>& class_labels, bool trace) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "id,truth,predicted,tick,length,status,truth_label,predicted_label";
  if (trace) out << ",trace";
  out << '\n';
  for (const auto& r : replays) {
    const auto& o = r.outcome;
    out << csv::quote(r.id) << ',' << r.truth << ',' << (o.predicted ? std::to_string(*o.predicted) : "") << ','
        << o.tick << ',' << r.length << ',' << to_string(o.status) << ','
        << csv::quote(class_labels.at(static_cast<std::size_t>(r.truth))) << ','
        << (o.predicted ? csv::quote(class_labels.at(static_cast<std::size_t>(*o.predicted))) : "");
    if (trace) {
      std::string cell;
      const std::size_t nc = r.estimates.empty() ? 0 : r.estimates.front().size();
      for (std::size_t c = 0; c < nc; ++c) {
        if (c) cell += '|';
        for (std::size_t t = 0; t < r.estimates.size(); ++t) {
          if (t) cell += ';';
          cell += csv::fmt(r.estimates[t][c]);
        }
      }
      out << ',' << cell;
    }
    out << '\n';
  }
}

inline std::vector<DecisionRecord> read_decisions_csv(const std::string& path) {
  const auto t = csv::read(path);
  const std::size_t ci = t.column("id"), ct = t.column("truth"), cp = t.column("predicted"), ck = t.column("tick"),
                    cl = t.column("length");
  std::vector<DecisionRecord> out;
  for (const auto& row : t.rows) {
    DecisionRecord r;
    r.id = row[ci];
    auto truth = detail::parse_double(row[ct]);
    auto tick = detail::parse_double(row[ck]);
    auto len = detail::parse_double(row[cl]);
    if (!truth || !tick || !len) throw FormatError("decision record '" + r.id + "' has non-numeric fields");
    r.truth = static_cast<int>(*truth);
    r.tick = static_cast<std::size_t>(*tick);
    r.length = static_cast<std::size_t>(*len);
    if (!row[cp].empty()) {
      auto p = detail::parse_double(row[cp]);
      if (!p) throw FormatError("decision record '" + r.id + "' has a non-numeric prediction");
      r.predicted = static_cast<int>(*p);
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Attention heat-map rows: one row per (class, evaluation tick), columns
/// alpha_1..alpha_L (cells past the evaluation tick are left empty).
inline void write_attention_csv(const std::string& path, const std::vector<StreamReplay>& replays,
                                std::span<const int> classes) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  std::size_t max_len = 0;
  for (const auto& r : replays) max_len = std::max(max_len, r.length);
  out << "id,class,eval_tick";
  for (std::size_t t = 1; t <= max_len; ++t) out << ",t" << t;
  out << '\n';
  for (const auto& r : replays) {
    for (std::size_t k = 0; k < classes.size(); ++k) {
      for (std::size_t e = 0; e < r.attention.size(); ++e) {
        out << csv::quote(r.id) << ',' << classes[k] << ',' << (e + 1);
        const auto& alpha = r.attention[e][k];
        for (std::size_t t = 0; t < max_len; ++t) {
          out << ',';
          if (t < alpha.size()) out << csv::fmt(alpha[t]);
        }
        out << '\n';
      }
    }
  }
}

}  // namespace earlyben
