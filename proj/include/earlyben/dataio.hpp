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
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyben/error.hpp"

namespace earlyben {

/// Row-major multivariate sequence: length() ticks of dim values each.
struct Sequence {
  std::size_t dim = 0;
  std::vector<double> values;

  Sequence() = default;
  Sequence(std::size_t d, std::vector<double> v) : dim(d), values(std::move(v)) {}

  std::size_t length() const { return dim == 0 ? 0 : values.size() / dim; }

  /// Tick t is 0-based here; the 1-based tick used by the benefit model is t + 1.
  std::span<const double> row(std::size_t t) const { return {values.data() + t * dim, dim}; }
  std::span<double> row(std::size_t t) { return {values.data() + t * dim, dim}; }

  double at(std::size_t t, std::size_t c) const { return values[t * dim + c]; }
  double& at(std::size_t t, std::size_t c) { return values[t * dim + c]; }

  /// First n ticks.
  std::span<const double> prefix(std::size_t n) const { return {values.data(), n * dim}; }

  bool operator==(const Sequence&) const = default;
};

struct SeriesInstance {
  std::string id;
  int label = 0;
  Sequence series;
  /// Missing-value mask parallel to series.values. Empty when nothing is missing.
  std::vector<bool> missing;

  std::size_t length() const { return series.length(); }
  std::size_t dim() const { return series.dim; }
  bool has_missing() const {
    return std::find(missing.begin(), missing.end(), true) != missing.end();
  }
  bool is_missing(std::size_t t, std::size_t c) const {
    return !missing.empty() && missing[t * series.dim + c];
  }

  bool operator==(const SeriesInstance&) const = default;
};

enum class SplitRole { train, test };

struct LabeledDataset {
  std::vector<SeriesInstance> instances;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  SplitRole role = SplitRole::train;
  /// Original label text for each contiguous class index.
  std::vector<std::string> class_labels;

  std::size_t size() const { return instances.size(); }

  std::size_t max_length() const {
    std::size_t m = 0;
    for (const auto& inst : instances) m = std::max(m, inst.length());
    return m;
  }

  std::size_t min_length() const {
    if (instances.empty()) return 0;
    std::size_t m = instances.front().length();
    for (const auto& inst : instances) m = std::min(m, inst.length());
    return m;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (const auto& inst : instances) ++counts.at(static_cast<std::size_t>(inst.label));
    return counts;
  }

  bool operator==(const LabeledDataset&) const = default;
};

/// Per-channel min/max fitted on the training split.
struct NormStats {
  std::vector<double> min;
  std::vector<double> max;
  /// Channels that were constant on the training split.
  std::vector<std::size_t> constant_channels;

  bool operator==(const NormStats&) const = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline bool is_missing_token(std::string_view s) {
  s = trim(s);
  return s == "NaN" || s == "nan" || s == "NA" || s == "null" || s == "?";
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Canonical label text: numeric labels are normalised so "1" and "1.0" agree.
inline std::string canonical_label(std::string_view raw) {
  raw = trim(raw);
  if (auto v = parse_double(raw)) return format_double(*v);
  return std::string(raw);
}

/// Sorted class label list: numeric order when every label is numeric,
/// lexicographic otherwise.
inline std::vector<std::string> sorted_labels(const std::vector<std::string>& raw) {
  std::vector<std::string> uniq(raw);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  bool all_numeric = std::all_of(uniq.begin(), uniq.end(),
                                 [](const std::string& s) { return parse_double(s).has_value(); });
  if (all_numeric) {
    std::sort(uniq.begin(), uniq.end(), [](const std::string& a, const std::string& b) {
      return *parse_double(a) < *parse_double(b);
    });
  }
  return uniq;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

/// Assigns contiguous class indices. With known_labels, the mapping is fixed
/// (e.g. a test split reusing the train mapping) and unknown labels are errors.
inline void assign_labels(LabeledDataset& ds, const std::vector<std::string>& raw_labels,
                          const std::vector<std::size_t>& rows,
                          const std::vector<std::string>* known_labels) {
  ds.class_labels = known_labels ? *known_labels : sorted_labels(raw_labels);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < ds.class_labels.size(); ++i) {
    index[ds.class_labels[i]] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    auto it = index.find(raw_labels[i]);
    if (it == index.end()) {
      throw FormatError("row " + std::to_string(rows[i]) + ": label '" + raw_labels[i] +
                        "' not in the known label mapping");
    }
    ds.instances[i].label = it->second;
  }
  ds.num_classes = ds.class_labels.size();
}

}  // namespace detail

/// Checks the dataset-level invariants; throws FormatError on violation.
inline void validate(const LabeledDataset& ds) {
  if (ds.instances.empty()) throw FormatError("dataset has no instances");
  if (ds.num_classes < 2) {
    throw FormatError("dataset needs at least 2 classes, found " + std::to_string(ds.num_classes));
  }
  for (const auto& inst : ds.instances) {
    if (inst.series.dim != ds.dim) {
      throw FormatError("instance '" + inst.id + "' has dimension " +
                        std::to_string(inst.series.dim) + ", expected " + std::to_string(ds.dim));
    }
    if (inst.length() == 0) throw FormatError("instance '" + inst.id + "' is empty");
    if (inst.label < 0 || static_cast<std::size_t>(inst.label) >= ds.num_classes) {
      throw FormatError("instance '" + inst.id + "' has out-of-range label");
    }
    for (std::size_t k = 0; k < inst.series.values.size(); ++k) {
      bool miss = !inst.missing.empty() && inst.missing[k];
      if (!miss && !std::isfinite(inst.series.values[k])) {
        throw FormatError("instance '" + inst.id + "' has a non-finite value");
      }
    }
  }
}

/// Loads a univariate fixed-length file: each row is a label followed by L
/// values, separated by tabs or commas. "NaN" cells are recorded as missing.
inline LabeledDataset load_ucr(const std::string& path, SplitRole role = SplitRole::train,
                               const std::vector<std::string>* known_labels = nullptr) {
  LabeledDataset ds;
  ds.role = role;
  ds.dim = 1;
  std::vector<std::string> raw_labels;
  std::vector<std::size_t> rows;
  std::size_t expected_len = 0;

  const auto lines = detail::read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    const std::size_t row = ln + 1;
    char delim = line.find('\t') != std::string_view::npos ? '\t' : ',';

    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t pos = line.find(delim, start);
      cells.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    if (cells.size() < 2) throw FormatError("row " + std::to_string(row) + ": no values");

    SeriesInstance inst;
    inst.id = std::to_string(ds.instances.size());
    inst.series.dim = 1;
    bool any_missing = false;
    std::vector<bool> miss;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (detail::is_missing_token(cells[c])) {
        inst.series.values.push_back(0.0);
        miss.push_back(true);
        any_missing = true;
        continue;
      }
      auto v = detail::parse_double(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw FormatError("row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                          ": non-numeric cell '" + std::string(detail::trim(cells[c])) + "'");
      }
      inst.series.values.push_back(*v);
      miss.push_back(false);
    }
    if (any_missing) inst.missing = std::move(miss);

    const std::size_t len = cells.size() - 1;
    if (expected_len == 0) {
      expected_len = len;
    } else if (len != expected_len) {
      throw FormatError("row " + std::to_string(row) + ": ragged row with " + std::to_string(len) +
                        " values, expected " + std::to_string(expected_len));
    }
    raw_labels.push_back(detail::canonical_label(cells[0]));
    rows.push_back(row);
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.empty()) throw FormatError("'" + path + "' is empty");
  detail::assign_labels(ds, raw_labels, rows, known_labels);
  if (!known_labels && ds.num_classes < 2) {
    throw FormatError("'" + path + "' contains a single class");
  }
  return ds;
}

/// Loads the multivariate JSON-lines format:
///   {"id": "a", "label": 1, "series": [[x11, x12], [x21, null], ...]}
/// Lengths may differ across records; the vector dimension may not.
inline LabeledDataset load_multivariate(const std::string& path,
                                        SplitRole role = SplitRole::train,
                                        const std::vector<std::string>* known_labels = nullptr) {
  LabeledDataset ds;
  ds.role = role;
  std::vector<std::string> raw_labels;
  std::vector<std::size_t> rows;

  const auto lines = detail::read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    const std::size_t row = ln + 1;
    const std::string where = "record at line " + std::to_string(row);

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("label") || !rec.contains("series")) {
      throw FormatError(where + ": expected an object with label and series");
    }
    if (!rec["label"].is_number_integer()) throw FormatError(where + ": label must be an integer");
    const auto& series = rec["series"];
    if (!series.is_array() || series.empty()) throw FormatError(where + ": empty series");

    SeriesInstance inst;
    if (rec.contains("id")) {
      inst.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    } else {
      inst.id = std::to_string(ds.instances.size());
    }
    const std::size_t d = series[0].is_array() ? series[0].size() : 0;
    if (d == 0) throw FormatError(where + ": observation vectors must be non-empty arrays");
    if (ds.instances.empty()) {
      ds.dim = d;
    } else if (d != ds.dim) {
      throw FormatError(where + ": dimension " + std::to_string(d) + " differs from " +
                        std::to_string(ds.dim));
    }
    inst.series.dim = d;
    inst.series.values.reserve(series.size() * d);
    std::vector<bool> miss;
    miss.reserve(series.size() * d);
    bool any_missing = false;
    for (std::size_t t = 0; t < series.size(); ++t) {
      const auto& obs = series[t];
      if (!obs.is_array() || obs.size() != d) {
        throw FormatError(where + ", tick " + std::to_string(t + 1) +
                          ": inconsistent observation dimension");
      }
      for (const auto& cell : obs) {
        if (cell.is_null()) {
          inst.series.values.push_back(0.0);
          miss.push_back(true);
          any_missing = true;
        } else if (cell.is_number()) {
          double v = cell.get<double>();
          if (!std::isfinite(v)) throw FormatError(where + ": non-finite value");
          inst.series.values.push_back(v);
          miss.push_back(false);
        } else {
          throw FormatError(where + ", tick " + std::to_string(t + 1) + ": non-numeric value");
        }
      }
    }
    if (any_missing) inst.missing = std::move(miss);
    raw_labels.push_back(std::to_string(rec["label"].get<long long>()));
    rows.push_back(row);
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.empty()) throw FormatError("'" + path + "' is empty");
  detail::assign_labels(ds, raw_labels, rows, known_labels);
  if (!known_labels && ds.num_classes < 2) {
    throw FormatError("'" + path + "' contains a single class");
  }
  return ds;
}

inline bool looks_multivariate(const std::string& path) {
  for (const auto& line : detail::read_lines(path)) {
    auto s = detail::trim(line);
    if (!s.empty()) return s.front() == '{';
  }
  return false;
}

/// Dispatches on content: JSON-lines records or UCR rows.
inline LabeledDataset load_dataset(const std::string& path, SplitRole role = SplitRole::train,
                                   const std::vector<std::string>* known_labels = nullptr) {
  return looks_multivariate(path) ? load_multivariate(path, role, known_labels)
                                  : load_ucr(path, role, known_labels);
}

inline void save_ucr(const LabeledDataset& ds, const std::string& path) {
  if (ds.dim != 1) throw ArgumentError("UCR format holds univariate series only");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  for (const auto& inst : ds.instances) {
    out << ds.class_labels.at(static_cast<std::size_t>(inst.label));
    for (std::size_t k = 0; k < inst.series.values.size(); ++k) {
      out << '\t';
      if (!inst.missing.empty() && inst.missing[k]) {
        out << "NaN";
      } else {
        out << detail::format_double(inst.series.values[k]);
      }
    }
    out << '\n';
  }
}

inline void save_multivariate(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  for (const auto& inst : ds.instances) {
    const std::string& label = ds.class_labels.at(static_cast<std::size_t>(inst.label));
    out << "{\"id\":" << nlohmann::json(inst.id).dump() << ",\"label\":" << label
        << ",\"series\":[";
    for (std::size_t t = 0; t < inst.length(); ++t) {
      if (t) out << ',';
      out << '[';
      for (std::size_t c = 0; c < inst.dim(); ++c) {
        if (c) out << ',';
        if (inst.is_missing(t, c)) {
          out << "null";
        } else {
          out << detail::format_double(inst.series.at(t, c));
        }
      }
      out << ']';
    }
    out << "]}\n";
  }
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Fills interior gaps by linear interpolation between the nearest observed
/// neighbours and edge gaps by nearest-value extension. Observed entries are
/// copied untouched.
inline SeriesInstance interpolate_missing(const SeriesInstance& inst) {
  SeriesInstance out = inst;
  out.missing.clear();
  if (!inst.has_missing()) return out;
  const std::size_t len = inst.length();
  for (std::size_t c = 0; c < inst.dim(); ++c) {
    std::vector<std::size_t> known;
    for (std::size_t t = 0; t < len; ++t) {
      if (!inst.is_missing(t, c)) known.push_back(t);
    }
    if (known.empty()) {
      throw UnrecoverableInstanceError("instance '" + inst.id + "': channel " +
                                       std::to_string(c) + " has no observed values");
    }
    for (std::size_t t = 0; t < known.front(); ++t) out.series.at(t, c) = inst.series.at(known.front(), c);
    for (std::size_t t = known.back() + 1; t < len; ++t) out.series.at(t, c) = inst.series.at(known.back(), c);
    for (std::size_t k = 0; k + 1 < known.size(); ++k) {
      const std::size_t a = known[k], b = known[k + 1];
      const double va = inst.series.at(a, c), vb = inst.series.at(b, c);
      for (std::size_t t = a + 1; t < b; ++t) {
        const double w = static_cast<double>(t - a) / static_cast<double>(b - a);
        out.series.at(t, c) = va + w * (vb - va);
      }
    }
  }
  return out;
}

/// Drops the leading run of ticks where any channel spikes above
/// mean + lead_sigma * std and the trailing run where every channel is at or
/// below trail_eps. Spike statistics for tick t are computed over all other
/// ticks of the channel (leave-one-out, population std), so a single outlier
/// does not mask itself.
inline SeriesInstance trim_artifacts(const SeriesInstance& inst, double lead_sigma = 3.0,
                                     double trail_eps = 1e-9) {
  if (inst.has_missing()) throw ArgumentError("trim_artifacts needs missing values filled first");
  const std::size_t len = inst.length();
  const std::size_t d = inst.dim();

  std::size_t end = len;
  while (end > 0) {
    auto r = inst.series.row(end - 1);
    if (!std::all_of(r.begin(), r.end(), [&](double v) { return v <= trail_eps; })) break;
    --end;
  }

  std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < d; ++c) {
      const double v = inst.series.at(t, c);
      sum[c] += v;
      sumsq[c] += v * v;
    }
  }
  auto spikes = [&](std::size_t t) {
    if (len < 2) return false;
    const double n = static_cast<double>(len - 1);
    for (std::size_t c = 0; c < d; ++c) {
      const double v = inst.series.at(t, c);
      const double mean = (sum[c] - v) / n;
      const double var = std::max(0.0, (sumsq[c] - v * v) / n - mean * mean);
      if (v > mean + lead_sigma * std::sqrt(var)) return true;
    }
    return false;
  };
  std::size_t begin = 0;
  while (begin < end && spikes(begin)) ++begin;

  if (begin >= end) {
    throw UnrecoverableInstanceError("instance '" + inst.id + "': trimming removes every tick");
  }
  SeriesInstance out;
  out.id = inst.id;
  out.label = inst.label;
  out.series.dim = d;
  out.series.values.assign(inst.series.values.begin() + static_cast<std::ptrdiff_t>(begin * d),
                           inst.series.values.begin() + static_cast<std::ptrdiff_t>(end * d));
  return out;
}

/// Replaces consecutive non-overlapping windows by their per-channel median.
/// A trailing partial window is reduced by its own median.
inline SeriesInstance median_downsample(const SeriesInstance& inst, long window) {
  if (window <= 0) throw ArgumentError("downsample window must be positive, got " + std::to_string(window));
  if (inst.has_missing()) throw ArgumentError("median_downsample needs missing values filled first");
  const std::size_t w = static_cast<std::size_t>(window);
  const std::size_t len = inst.length();
  const std::size_t d = inst.dim();
  const std::size_t out_len = (len + w - 1) / w;

  SeriesInstance out;
  out.id = inst.id;
  out.label = inst.label;
  out.series.dim = d;
  out.series.values.resize(out_len * d);
  std::vector<double> buf;
  for (std::size_t k = 0; k < out_len; ++k) {
    const std::size_t lo = k * w, hi = std::min(len, lo + w);
    for (std::size_t c = 0; c < d; ++c) {
      buf.clear();
      for (std::size_t t = lo; t < hi; ++t) buf.push_back(inst.series.at(t, c));
      std::sort(buf.begin(), buf.end());
      const std::size_t m = buf.size();
      out.series.at(k, c) = (m % 2 == 1) ? buf[m / 2] : 0.5 * (buf[m / 2 - 1] + buf[m / 2]);
    }
  }
  return out;
}

inline NormStats fit_normalize(const LabeledDataset& train) {
  NormStats st;
  st.min.assign(train.dim, std::numeric_limits<double>::infinity());
  st.max.assign(train.dim, -std::numeric_limits<double>::infinity());
  for (const auto& inst : train.instances) {
    if (inst.has_missing()) throw ArgumentError("normalization needs missing values filled first");
    for (std::size_t t = 0; t < inst.length(); ++t) {
      for (std::size_t c = 0; c < train.dim; ++c) {
        st.min[c] = std::min(st.min[c], inst.series.at(t, c));
        st.max[c] = std::max(st.max[c], inst.series.at(t, c));
      }
    }
  }
  for (std::size_t c = 0; c < train.dim; ++c) {
    if (!(st.max[c] > st.min[c])) st.constant_channels.push_back(c);
  }
  return st;
}

/// Affine map into [0,1] with the given stats; values outside are clamped.
/// Constant channels map to 0.
inline LabeledDataset apply_normalize(const LabeledDataset& ds, const NormStats& st) {
  if (st.min.size() != ds.dim) throw ShapeError("normalization stats do not match dataset dimension");
  LabeledDataset out = ds;
  for (auto& inst : out.instances) {
    if (inst.has_missing()) throw ArgumentError("normalization needs missing values filled first");
    for (std::size_t t = 0; t < inst.length(); ++t) {
      for (std::size_t c = 0; c < ds.dim; ++c) {
        double& v = inst.series.at(t, c);
        const double span = st.max[c] - st.min[c];
        v = span > 0.0 ? std::clamp((v - st.min[c]) / span, 0.0, 1.0) : 0.0;
      }
    }
  }
  return out;
}

struct NormalizedSplits {
  LabeledDataset train;
  LabeledDataset test;
  NormStats stats;
};

/// Fits min/max on the train split only and applies them to both splits.
inline NormalizedSplits fit_apply_normalize(const LabeledDataset& train, const LabeledDataset& test) {
  NormStats st = fit_normalize(train);
  return {apply_normalize(train, st), apply_normalize(test, st), st};
}

inline nlohmann::json to_json(const NormStats& st) {
  return {{"min", st.min}, {"max", st.max}, {"constant_channels", st.constant_channels}};
}

inline NormStats norm_stats_from_json(const nlohmann::json& j) {
  NormStats st;
  st.min = j.at("min").get<std::vector<double>>();
  st.max = j.at("max").get<std::vector<double>>();
  st.constant_channels = j.at("constant_channels").get<std::vector<std::size_t>>();
  return st;
}

}  // namespace earlyben
