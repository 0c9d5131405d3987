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
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyben/benefit.hpp"
#include "earlyben/dataio.hpp"
#include "earlyben/error.hpp"
#include "earlyben/neuralcore.hpp"
#include "earlyben/parallel.hpp"
#include "earlyben/policy.hpp"
#include "earlyben/rng.hpp"

namespace earlyben {

// ---------------------------------------------------------------------------
// Prefix samples

/// One regression sample: the first `length` ticks of series `series`,
/// paired with the benefit target at that tick.
struct PrefixSample {
  std::size_t series = 0;
  std::size_t length = 0;
  double target = 0.0;

  bool operator==(const PrefixSample&) const = default;
};

struct PrefixSamples {
  std::vector<Sequence> series;
  std::vector<std::string> ids;
  std::vector<PrefixSample> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::span<const double> prefix(const PrefixSample& s) const { return series[s.series].prefix(s.length); }
};

/// Prefix lengths 1, 1 + stride, 1 + 2 stride, ... and always L.
inline std::vector<std::size_t> prefix_lengths(std::size_t length, std::size_t stride) {
  if (stride < 1) throw ArgumentError("prefix stride must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t <= length; t += stride) out.push_back(t);
  if (out.empty() || out.back() != length) out.push_back(length);
  return out;
}

/// Builds {(X_[1:t], b_t)} for every instance and the selected prefix ticks.
inline PrefixSamples make_prefix_samples(const LabeledDataset& ds, const BenefitSpec& spec, int model_class,
                                         std::size_t stride = 1) {
  if (!spec.is_active(model_class)) {
    throw ArgumentError("class " + std::to_string(model_class) + " has no regressor");
  }
  PrefixSamples out;
  out.series.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& inst = ds.instances[i];
    if (inst.has_missing()) throw ArgumentError("instance '" + inst.id + "' still has missing values");
    out.series.push_back(inst.series);
    out.ids.push_back(inst.id);
    const auto targets = build_targets(spec, inst.label, model_class, inst.length());
    for (std::size_t t : prefix_lengths(inst.length(), stride)) out.items.push_back({i, t, targets[t - 1]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train/validation split

struct TrainValSplit {
  LabeledDataset train;
  LabeledDataset val;
  bool stratified = true;
  std::vector<std::string> warnings;
};

/// Sequence-level split (every prefix of a series lands on one side),
/// stratified by label with a seeded shuffle. The validation side holds
/// max(1, round((1 - frac) n)) series, allotted to classes by largest
/// remainder; when there are at least as many validation slots as classes,
/// every class gets one.
inline TrainValSplit split_train_val(const LabeledDataset& ds, double frac = 0.9, std::uint64_t seed = 0) {
  if (ds.size() < 2) throw ArgumentError("need at least 2 series to split");
  if (!(frac > 0.0 && frac < 1.0)) throw ArgumentError("train fraction must lie in (0, 1)");
  std::mt19937_64 rng(derive_seed(seed, "split"));

  TrainValSplit out;
  out.train = ds;
  out.val = ds;
  out.train.instances.clear();
  out.val.instances.clear();

  const auto want = static_cast<std::size_t>(std::llround((1.0 - frac) * static_cast<double>(ds.size())));
  const std::size_t n_val = std::min(ds.size() - 1, std::max<std::size_t>(1, want));

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.instances[i].label)].push_back(i);
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    if (by_class[c].size() == 1) {
      out.stratified = false;
      out.warnings.push_back("class " + std::to_string(c) + " has fewer than 2 instances; split is unstratified");
    }
  }

  std::vector<bool> in_val(ds.size(), false);
  if (out.stratified) {
    const std::size_t k = ds.num_classes;
    std::vector<std::size_t> quota(k, 0);
    std::vector<double> rem(k, 0.0);
    std::size_t given = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double exact = static_cast<double>(n_val * by_class[c].size()) / static_cast<double>(ds.size());
      quota[c] = static_cast<std::size_t>(exact);
      rem[c] = exact - static_cast<double>(quota[c]);
      given += quota[c];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    std::size_t capacity = 0;
    for (const auto& m : by_class) capacity += m.empty() ? 0 : m.size() - 1;
    for (std::size_t j = 0; given < std::min(n_val, capacity); j = (j + 1) % k) {
      if (quota[order[j]] + 1 < by_class[order[j]].size()) {
        ++quota[order[j]];
        ++given;
      }
    }
    std::size_t populated = 0;
    for (const auto& m : by_class) populated += m.empty() ? 0 : 1;
    if (n_val >= populated) {
      for (std::size_t c = 0; c < k; ++c) {
        if (by_class[c].empty() || quota[c] > 0) continue;
        const auto donor = static_cast<std::size_t>(std::max_element(quota.begin(), quota.end()) - quota.begin());
        if (quota[donor] < 2) break;
        --quota[donor];
        ++quota[c];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto& members = by_class[c];
      std::shuffle(members.begin(), members.end(), rng);
      for (std::size_t j = 0; j < std::min(quota[c], members.size()); ++j) in_val[members[j]] = true;
    }
  } else {
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j = 0; j < n_val; ++j) in_val[order[j]] = true;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (in_val[i] ? out.val : out.train).instances.push_back(ds.instances[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regressor training

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t hidden_dim = 16;
  Activation activation = Activation::tanh;
  AttentionMode attention = AttentionMode::full;
  std::size_t epochs = 100;
  /// Series per minibatch; every selected prefix of a series is in its batch.
  std::size_t batch_size = 4;
  std::size_t stride = 1;
  /// Early-stopping patience in epochs; 0 disables early stopping.
  std::size_t patience = 10;
  double train_fraction = 0.9;
  double delta_fraction = 0.5;
  bool normalize = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
    if (hidden_dim < 1) throw ArgumentError("hidden dimension must be >= 1");
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    if (stride < 1) throw ArgumentError("prefix stride must be >= 1");
    if (!(delta_fraction >= 0.0)) throw ArgumentError("delta fraction must be >= 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch, in benefit units squared
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;      // 1-based
  double best_val_loss = std::numeric_limits<double>::infinity();

  bool operator==(const TrainHistory&) const = default;
};

/// One per-class benefit regressor. The network is fitted to targets divided
/// by target_scale; estimate() multiplies back, so the sign (and the decision
/// rule) is unaffected.
struct RegressorModel {
  int model_class = 0;
  ModelParams params;
  double target_scale = 1.0;
  std::uint64_t seed = 0;
  TrainHistory history;

  double estimate(std::span<const double> prefix) const {
    return target_scale * predict_benefit(params, prefix).value;
  }

  bool operator==(const RegressorModel&) const = default;
};

namespace detail {

inline std::vector<SeriesTargets> group_by_series(const PrefixSamples& s, double scale) {
  std::vector<SeriesTargets> grouped(s.series.size());
  for (std::size_t i = 0; i < s.series.size(); ++i) grouped[i].series = s.series[i].values;
  for (const auto& item : s.items) {
    grouped[item.series].prefix_lengths.push_back(item.length);
    grouped[item.series].targets.push_back(item.target / scale);
  }
  std::erase_if(grouped, [](const SeriesTargets& g) { return g.prefix_lengths.empty(); });
  return grouped;
}

}  // namespace detail

/// Minibatch Adam on the prefix MSE; keeps the parameters with the lowest
/// validation loss.
inline RegressorModel train_regressor(const PrefixSamples& train, const PrefixSamples& val,
                                      const ModelConfig& model_config, const TrainConfig& cfg,
                                      std::uint64_t seed) {
  if (train.empty()) throw ArgumentError("no training samples");
  cfg.validate();
  model_config.validate();

  double scale = 0.0;
  for (const auto& s : train.items) scale = std::max(scale, std::abs(s.target));
  if (!(scale > 0.0)) scale = 1.0;

  const auto train_groups = detail::group_by_series(train, scale);
  const auto val_groups = detail::group_by_series(val.empty() ? train : val, scale);

  RegressorModel model;
  model.seed = seed;
  model.target_scale = scale;
  model.params = init_params(model_config, derive_seed(seed, "init"));
  ModelParams best = model.params;
  ModelParams grad(model_config);
  AdamState adam = AdamState::for_params(model.params, cfg.learning_rate);
  std::mt19937_64 rng(derive_seed(seed, "shuffle"));

  std::vector<std::size_t> order(train_groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<SeriesTargets> batch;
  std::size_t since_best = 0;
  const double sq = scale * scale;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sse = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      std::size_t n = 0;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(train_groups[order[k]]);
        n += batch.back().prefix_lengths.size();
      }
      double l = 0.0;
      try {
        l = series_loss_and_gradient(model.params, batch, &grad);
        adam_step(model.params, grad, adam);
      } catch (const NumericError& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      sse += l * static_cast<double>(n);
      count += n;
    }
    double val_loss = 0.0;
    try {
      val_loss = series_loss_and_gradient(model.params, val_groups, nullptr);
    } catch (const NumericError& e) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const double train_loss = sse / static_cast<double>(count);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    model.history.train_loss.push_back(train_loss * sq);
    model.history.val_loss.push_back(val_loss * sq);
    if (val_loss * sq < model.history.best_val_loss) {
      model.history.best_val_loss = val_loss * sq;
      model.history.best_epoch = epoch;
      best = model.params;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  model.params = std::move(best);
  return model;
}

// ---------------------------------------------------------------------------
// Bundles

inline constexpr int kBundleFormatVersion = 1;

struct TrainedBundle {
  int format_version = kBundleFormatVersion;
  ModelConfig model_config;
  BenefitSpec benefit;
  DecisionPolicy policy;
  TrainConfig train_config;
  std::vector<std::string> class_labels;
  std::optional<NormStats> norm;
  /// Largest spread between per-class targets over training ticks; the
  /// type-mode margin is delta_fraction times this.
  double target_spread = 0.0;
  std::vector<std::string> validation_ids;
  std::vector<RegressorModel> models;

  std::vector<int> active_classes() const {
    std::vector<int> out;
    for (const auto& m : models) out.push_back(m.model_class);
    return out;
  }

  bool operator==(const TrainedBundle&) const = default;
};

/// max over instances and ticks of (max_c b_c - min_c b_c) across active classes.
inline double max_target_spread(const LabeledDataset& ds, const BenefitSpec& spec) {
  const auto classes = spec.active_classes();
  double spread = 0.0;
  for (const auto& inst : ds.instances) {
    for (std::size_t t = 1; t <= inst.length(); ++t) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int c : classes) {
        const double b = benefit_value(spec, inst.label, c, t, inst.length());
        lo = std::min(lo, b);
        hi = std::max(hi, b);
      }
      spread = std::max(spread, hi - lo);
    }
  }
  return spread;
}

/// Trains one regressor per active class on a 90/10 sequence-level split of
/// `data`. Per-class seeds are derived from cfg.seed and the class index, so
/// class models are independent of training order.
inline TrainedBundle train_bundle(const LabeledDataset& data, const BenefitSpec& spec, const TrainConfig& cfg,
                                  std::size_t workers = 1) {
  cfg.validate();
  spec.validate();
  validate(data);
  if (spec.num_classes != data.num_classes) {
    throw ConfigError("benefit model has " + std::to_string(spec.num_classes) + " classes, data has " +
                      std::to_string(data.num_classes));
  }
  TrainedBundle bundle;
  bundle.benefit = spec;
  bundle.train_config = cfg;
  bundle.class_labels = data.class_labels;
  bundle.model_config.input_dim = data.dim;
  bundle.model_config.hidden_dim = cfg.hidden_dim;
  bundle.model_config.activation = cfg.activation;
  bundle.model_config.attention = cfg.attention;

  LabeledDataset prepared = data;
  if (cfg.normalize) {
    bundle.norm = fit_normalize(data);
    prepared = apply_normalize(data, *bundle.norm);
  }
  auto split = split_train_val(prepared, cfg.train_fraction, cfg.seed);
  for (const auto& inst : split.val.instances) bundle.validation_ids.push_back(inst.id);

  bundle.target_spread = max_target_spread(split.train, spec);
  bundle.policy.mode = spec.mode;
  bundle.policy.attention = cfg.attention;
  bundle.policy.delta_abs = spec.mode == TaskMode::type ? cfg.delta_fraction * bundle.target_spread : 0.0;

  const auto classes = spec.active_classes();
  bundle.models.resize(classes.size());
  parallel_for(classes.size(), workers, [&](std::size_t k) {
    const int c = classes[k];
    const auto train_samples = make_prefix_samples(split.train, spec, c, cfg.stride);
    const auto val_samples = make_prefix_samples(split.val, spec, c, cfg.stride);
    bundle.models[k] = train_regressor(train_samples, val_samples, bundle.model_config, cfg,
                                       derive_seed(cfg.seed, static_cast<std::uint64_t>(c) + 1));
    bundle.models[k].model_class = c;
  });
  return bundle;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["hidden_dim"] = c.hidden_dim;
  j["activation"] = to_string(c.activation);
  j["attention"] = to_string(c.attention);
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["stride"] = c.stride;
  j["patience"] = c.patience;
  j["train_fraction"] = c.train_fraction;
  j["delta_fraction"] = c.delta_fraction;
  j["normalize"] = c.normalize;
  j["seed"] = c.seed;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.attention = parse_attention_mode(j.at("attention").get<std::string>());
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.stride = j.at("stride").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.delta_fraction = j.at("delta_fraction").get<double>();
  c.normalize = j.at("normalize").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace detail {

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace detail

/// Payload field order is fixed, so identical bundles serialize to identical
/// bytes. Parameter arrays follow the ModelParams layout.
inline nlohmann::ordered_json bundle_payload(const TrainedBundle& b) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json mc;
  mc["input_dim"] = b.model_config.input_dim;
  mc["hidden_dim"] = b.model_config.hidden_dim;
  mc["activation"] = to_string(b.model_config.activation);
  mc["attention"] = to_string(b.model_config.attention);
  j["model_config"] = mc;
  j["class_labels"] = b.class_labels;
  nlohmann::ordered_json spec;
  const auto sj = to_json(b.benefit);
  spec["mode"] = sj["mode"];
  spec["savings"] = sj["savings"];
  spec["cost"] = sj["cost"];
  spec["default_class"] = sj["default_class"];
  j["benefit"] = spec;
  j["policy"] = to_json(b.policy);
  j["train_config"] = to_json(b.train_config);
  j["target_spread"] = b.target_spread;
  if (b.norm) {
    nlohmann::ordered_json n;
    n["min"] = b.norm->min;
    n["max"] = b.norm->max;
    n["constant_channels"] = b.norm->constant_channels;
    j["norm"] = n;
  } else {
    j["norm"] = nullptr;
  }
  j["validation_ids"] = b.validation_ids;
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto& m : b.models) {
    nlohmann::ordered_json mj;
    mj["class"] = m.model_class;
    mj["seed"] = m.seed;
    mj["target_scale"] = m.target_scale;
    mj["params"] = std::vector<double>(m.params.flat().begin(), m.params.flat().end());
    nlohmann::ordered_json h;
    h["train_loss"] = m.history.train_loss;
    h["val_loss"] = m.history.val_loss;
    h["best_epoch"] = m.history.best_epoch;
    h["best_val_loss"] = m.history.best_val_loss;
    mj["history"] = h;
    models.push_back(mj);
  }
  j["models"] = models;
  return j;
}

inline std::string serialize_bundle(const TrainedBundle& b) {
  const auto payload = bundle_payload(b);
  const std::string text = payload.dump();
  nlohmann::ordered_json doc;
  doc["format_version"] = b.format_version;
  doc["checksum"] = detail::fnv1a_hex(text);
  doc["payload"] = payload;
  return doc.dump(1) + "\n";
}

inline TrainedBundle deserialize_bundle(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError(std::string("bundle is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
    throw PersistenceError("bundle has no format_version");
  }
  const int version = doc["format_version"].get<int>();
  if (version != kBundleFormatVersion) {
    throw PersistenceError("bundle format_version " + std::to_string(version) + " is not supported (reader is " +
                           std::to_string(kBundleFormatVersion) + ")");
  }
  if (!doc.contains("payload") || !doc.contains("checksum")) throw PersistenceError("bundle is incomplete");
  const auto& j = doc["payload"];
  if (detail::fnv1a_hex(j.dump()) != doc["checksum"].get<std::string>()) {
    throw PersistenceError("bundle checksum mismatch (file corrupted)");
  }
  TrainedBundle b;
  try {
    b.format_version = version;
    b.model_config = model_config_from_json(j.at("model_config"));
    b.class_labels = j.at("class_labels").get<std::vector<std::string>>();
    b.benefit = benefit_spec_from_json(j.at("benefit"));
    b.policy = decision_policy_from_json(j.at("policy"));
    b.train_config = train_config_from_json(j.at("train_config"));
    b.target_spread = j.at("target_spread").get<double>();
    if (!j.at("norm").is_null()) b.norm = norm_stats_from_json(j.at("norm"));
    b.validation_ids = j.at("validation_ids").get<std::vector<std::string>>();
    for (const auto& mj : j.at("models")) {
      RegressorModel m;
      m.model_class = mj.at("class").get<int>();
      m.seed = mj.at("seed").get<std::uint64_t>();
      m.target_scale = mj.at("target_scale").get<double>();
      m.params = ModelParams(b.model_config);
      const auto flat = mj.at("params").get<std::vector<double>>();
      if (flat.size() != m.params.size()) throw PersistenceError("parameter array has the wrong length");
      std::copy(flat.begin(), flat.end(), m.params.flat().begin());
      const auto& h = mj.at("history");
      m.history.train_loss = h.at("train_loss").get<std::vector<double>>();
      m.history.val_loss = h.at("val_loss").get<std::vector<double>>();
      m.history.best_epoch = h.at("best_epoch").get<std::size_t>();
      m.history.best_val_loss = h.at("best_val_loss").get<double>();
      b.models.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError(std::string("bundle is malformed: ") + e.what());
  } catch (const Error& e) {
    throw PersistenceError(std::string("bundle is malformed: ") + e.what());
  }
  return b;
}

inline void save_bundle(const TrainedBundle& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError("cannot write bundle '" + path + "'");
  out << serialize_bundle(b);
  if (!out) throw PersistenceError("failed writing bundle '" + path + "'");
}

inline TrainedBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open bundle '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_bundle(ss.str());
}

}  // namespace earlyben
