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

// Command-line front end. Requires CLI11.hpp on the include path.

#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "earlyben/benefit.hpp"
#include "earlyben/dataio.hpp"
#include "earlyben/error.hpp"
#include "earlyben/evalbench.hpp"
#include "earlyben/streamdecide.hpp"
#include "earlyben/sweep.hpp"
#include "earlyben/synth.hpp"
#include "earlyben/training.hpp"

#ifndef EARLYBEN_VERSION
#define EARLYBEN_VERSION "0.0.0"
#endif

namespace earlyben::cli {

namespace fs = std::filesystem;

inline constexpr const char* kWorkersEnv = "EARLYBEN_WORKERS";

/// Structured record written next to every run's primary output.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> args;
  std::string cwd;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::optional<std::uint64_t> seed;
  double wall_seconds = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["args"] = args;
    j["cwd"] = cwd;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
    j["tool_version"] = EARLYBEN_VERSION;
    j["wall_seconds"] = wall_seconds;
    return j;
  }
};

inline void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PersistenceError("cannot write manifest '" + path + "'");
  out << m.to_json().dump(2) << '\n';
}

/// Worker count: the flag when positive, else EARLYBEN_WORKERS, else 1.
inline std::size_t resolve_workers(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv(kWorkersEnv)) {
    auto v = detail::parse_double(env);
    if (!v || *v < 1.0 || *v != std::floor(*v)) {
      throw ArgumentError(std::string(kWorkersEnv) + " must be a positive integer");
    }
    return static_cast<std::size_t>(*v);
  }
  return 1;
}

inline std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

namespace detail {

inline void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

inline std::string strip_csv(const std::string& path) {
  const fs::path p(path);
  return p.extension() == ".csv" ? (p.parent_path() / p.stem()).string() : path;
}

inline std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = earlyben::detail::parse_double(item);
    if (!v) throw ArgumentError(std::string("cannot parse ") + what + " value '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw ArgumentError(std::string(what) + " list is empty");
  return out;
}

/// Benefit model from --benefit, or --ms-ratio with mode and class count.
struct BenefitFlags {
  std::string path;
  double ms_ratio = 0.0;
  std::string mode = "type";
  int default_class = 0;

  void add_to(CLI::App* app) {
    app->add_option("--benefit", path, "Benefit config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--ms-ratio", ms_ratio, "Symmetric cost M with savings rate s = 1");
    app->add_option("--mode", mode, "Task mode")->check(CLI::IsMember({"outcome", "type"}));
    app->add_option("--default-class", default_class, "Default class index (outcome mode)");
  }

  BenefitSpec resolve(std::size_t num_classes) const {
    if (!path.empty()) return load_benefit_spec(path);
    if (!(ms_ratio > 0.0)) throw ArgumentError("one of --benefit or a positive --ms-ratio is required");
    return ms_ratio_spec(ms_ratio, num_classes, parse_task_mode(mode), default_class);
  }
};

struct Context {
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
  std::size_t workers_flag = 0;
};

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline RunManifest start_manifest(const Context& ctx, const std::string& sub) {
  RunManifest m;
  m.subcommand = sub;
  m.args = ctx.args;
  m.cwd = fs::current_path().string();
  return m;
}

}  // namespace detail

/// Result of argument parsing: the action to run once all flags are known.
using Action = std::function<void(detail::Context&)>;

namespace detail {

// ---------------------------------------------------------------------------
// preprocess

inline Action add_preprocess(CLI::App& app) {
  auto* sub = app.add_subcommand("preprocess", "Interpolate, trim, downsample and normalize a dataset");
  struct Flags {
    std::string in, out, trim, normalize_with;
    bool interpolate = false;
    long window = 0;
  };
  auto f = std::make_shared<Flags>();
  sub->add_option("--in", f->in, "Input dataset")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f->out, "Output dataset")->required();
  auto* o_interp = sub->add_flag("--interpolate", f->interpolate, "Fill missing values");
  auto* o_trim = sub->add_option("--trim", f->trim, "Artifact trimming: lead_sigma,trail_eps");
  auto* o_down = sub->add_option("--downsample", f->window, "Median downsampling window");
  auto* o_norm = sub->add_option("--normalize-with", f->normalize_with, "Fit [0,1] scaling on this training file")
                     ->check(CLI::ExistingFile);
  return [=](Context& ctx) {
    const auto start = Clock::now();
    auto m = start_manifest(ctx, "preprocess");
    auto ds = load_dataset(f->in);
    const bool multivariate = looks_multivariate(f->in);
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    std::set<const CLI::Option*> done;
    for (const CLI::Option* opt : sub->parse_order()) {
      if (!done.insert(opt).second) continue;
      if (opt == o_interp) {
        for (auto& inst : ds.instances) inst = interpolate_missing(inst);
        steps.push_back({{"op", "interpolate"}});
      } else if (opt == o_trim) {
        const auto v = parse_list(f->trim, "trim");
        if (v.size() != 2) throw ArgumentError("--trim expects lead_sigma,trail_eps");
        for (auto& inst : ds.instances) inst = trim_artifacts(inst, v[0], v[1]);
        steps.push_back({{"op", "trim"}, {"lead_sigma", v[0]}, {"trail_eps", v[1]}});
      } else if (opt == o_down) {
        for (auto& inst : ds.instances) inst = median_downsample(inst, f->window);
        steps.push_back({{"op", "downsample"}, {"window", f->window}});
      } else if (opt == o_norm) {
        const auto train = load_dataset(f->normalize_with);
        const auto stats = fit_normalize(train);
        ds = apply_normalize(ds, stats);
        steps.push_back({{"op", "normalize"}, {"fit_on", f->normalize_with}, {"stats", to_json(stats)}});
        m.inputs.push_back(f->normalize_with);
      }
    }
    ensure_parent(f->out);
    if (multivariate) {
      save_multivariate(ds, f->out);
    } else {
      save_ucr(ds, f->out);
    }
    ctx.out << "preprocess: " << ds.size() << " series written to " << f->out << '\n';
    m.config["steps"] = steps;
    m.inputs.insert(m.inputs.begin(), f->in);
    m.outputs.push_back(f->out);
    m.wall_seconds = seconds_since(start);
    write_manifest(m, f->out + ".manifest.json");
  };
}

// ---------------------------------------------------------------------------
// train

inline Action add_train(CLI::App& app) {
  auto* sub = app.add_subcommand("train", "Train per-class benefit regressors");
  struct Flags {
    std::string data, out, attention = "full", activation = "tanh";
    BenefitFlags benefit;
    TrainConfig cfg;
    bool no_normalize = false;
  };
  auto f = std::make_shared<Flags>();
  sub->add_option("--data", f->data, "Training dataset")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f->out, "Bundle path")->required();
  f->benefit.add_to(sub);
  sub->add_option("--hidden", f->cfg.hidden_dim, "Hidden size")->capture_default_str();
  sub->add_option("--lr", f->cfg.learning_rate, "Learning rate")->capture_default_str();
  sub->add_option("--epochs", f->cfg.epochs, "Epochs")->capture_default_str();
  sub->add_option("--batch-size", f->cfg.batch_size, "Series per minibatch")->capture_default_str();
  sub->add_option("--stride", f->cfg.stride, "Prefix stride")->capture_default_str();
  sub->add_option("--patience", f->cfg.patience, "Early-stopping patience (0 disables)")->capture_default_str();
  sub->add_option("--train-fraction", f->cfg.train_fraction, "Training share of the split")->capture_default_str();
  sub->add_option("--delta-fraction", f->cfg.delta_fraction, "Type-mode margin fraction")->capture_default_str();
  sub->add_option("--seed", f->cfg.seed, "Seed")->capture_default_str();
  sub->add_option("--attention", f->attention, "full or last-state")->check(CLI::IsMember({"full", "last-state"}));
  sub->add_option("--activation", f->activation, "tanh or sigmoid")->check(CLI::IsMember({"tanh", "sigmoid"}));
  sub->add_flag("--no-normalize", f->no_normalize, "Skip [0,1] scaling");
  return [=](Context& ctx) {
    const auto start = Clock::now();
    auto m = start_manifest(ctx, "train");
    const auto data = load_dataset(f->data);
    const auto spec = f->benefit.resolve(data.num_classes);
    TrainConfig cfg = f->cfg;
    cfg.attention = parse_attention_mode(f->attention);
    cfg.activation = parse_activation(f->activation);
    cfg.normalize = !f->no_normalize;
    const auto bundle = train_bundle(data, spec, cfg, resolve_workers(ctx.workers_flag));
    ensure_parent(f->out);
    save_bundle(bundle, f->out);
    for (const auto& model : bundle.models) {
      ctx.out << "train: class " << bundle.class_labels[static_cast<std::size_t>(model.model_class)]
              << " best epoch " << model.history.best_epoch << " val loss "
              << earlyben::detail::format_double(model.history.best_val_loss) << '\n';
    }
    m.config["train"] = to_json(cfg);
    m.config["benefit"] = to_json(spec);
    m.config["policy"] = to_json(bundle.policy);
    m.seed = cfg.seed;
    m.inputs.push_back(f->data);
    if (!f->benefit.path.empty()) m.inputs.push_back(f->benefit.path);
    m.outputs.push_back(f->out);
    m.wall_seconds = seconds_since(start);
    write_manifest(m, f->out + ".manifest.json");
  };
}

// ---------------------------------------------------------------------------
// sweep

inline std::string resolve_beside(const std::string& path, const fs::path& base) {
  const fs::path p(path);
  if (p.is_absolute() || fs::exists(p)) return path;
  return (base / p).string();
}

inline Action add_sweep(CLI::App& app) {
  auto* sub = app.add_subcommand("sweep", "Train and rank a hyperparameter grid");
  struct Flags {
    std::string grids, out, data, test;
  };
  auto f = std::make_shared<Flags>();
  sub->add_option("--grids", f->grids, "Grid config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f->out, "Output directory")->required();
  sub->add_option("--data", f->data, "Training dataset (overrides the grid file)")->check(CLI::ExistingFile);
  sub->add_option("--test", f->test, "Test dataset (overrides the grid file)")->check(CLI::ExistingFile);
  return [=](Context& ctx) {
    const auto start = Clock::now();
    auto m = start_manifest(ctx, "sweep");
    nlohmann::json gj;
    {
      std::ifstream in(f->grids);
      try {
        in >> gj;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("grid file '" + f->grids + "': " + e.what());
      }
    }
    const auto grid = sweep_grid_from_json(gj);
    const auto base = fs::path(f->grids).parent_path();
    std::string data_path = f->data, test_path = f->test;
    if (data_path.empty() && gj.contains("data")) data_path = resolve_beside(gj.at("data").get<std::string>(), base);
    if (test_path.empty() && gj.contains("test")) test_path = resolve_beside(gj.at("test").get<std::string>(), base);
    if (data_path.empty()) throw ArgumentError("sweep needs training data (--data or \"data\" in the grid file)");
    const auto train = load_dataset(data_path);
    std::optional<LabeledDataset> test;
    if (!test_path.empty()) test = load_dataset(test_path, SplitRole::test, &train.class_labels);

    const auto results = grid_search(train, test ? &*test : nullptr, grid, resolve_workers(ctx.workers_flag));
    fs::create_directories(fs::path(f->out) / "bundles");
    std::vector<std::string> names(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (!results[i].bundle) continue;
      names[i] = "bundles/" + std::to_string(i) + "_" + results[i].config.id() + ".json";
      save_bundle(*results[i].bundle, (fs::path(f->out) / names[i]).string());
      m.outputs.push_back((fs::path(f->out) / names[i]).string());
    }
    const auto ranked = (fs::path(f->out) / "ranked.csv").string();
    write_sweep_manifest(ranked, results, names);
    for (const auto& r : results) {
      if (r.best) {
        ctx.out << "sweep: best " << r.config.id() << " val accuracy " << earlyben::detail::format_double(r.val->accuracy)
                << " tardiness " << earlyben::detail::format_double(r.val->tardiness) << '\n';
      }
      if (!r.error.empty()) ctx.err << "sweep: " << r.config.id() << " failed: " << one_line(r.error) << '\n';
    }
    m.config["grid"] = to_json(grid);
    m.config["ms_ratios"] = resolve_ms_ratios(grid, train);
    m.seed = grid.base.seed;
    m.inputs = {f->grids, data_path};
    if (!test_path.empty()) m.inputs.push_back(test_path);
    m.outputs.insert(m.outputs.begin(), ranked);
    m.wall_seconds = seconds_since(start);
    write_manifest(m, (fs::path(f->out) / "manifest.json").string());
  };
}

// ---------------------------------------------------------------------------
// stream

inline Action add_stream(CLI::App& app) {
  auto* sub = app.add_subcommand("stream", "Replay series through a bundle one tick at a time");
  struct Flags {
    std::string bundle, data, out, attention;
    bool trace = false;
    std::optional<double> delta_fraction;
  };
  auto f = std::make_shared<Flags>();
  sub->add_option("--bundle", f->bundle, "Trained bundle")->required()->check(CLI::ExistingFile);
  sub->add_option("--data", f->data, "Preprocessed series to stream")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f->out, "Decisions CSV")->required();
  sub->add_option("--attention-export", f->attention, "Attention weights CSV");
  sub->add_flag("--trace", f->trace, "Add per-tick benefit estimates to the decisions CSV");
  sub->add_option("--delta-fraction", f->delta_fraction, "Override the type-mode margin fraction");
  return [=](Context& ctx) {
    const auto start = Clock::now();
    auto m = start_manifest(ctx, "stream");
    auto loaded = std::make_shared<TrainedBundle>(load_bundle(f->bundle));
    if (f->delta_fraction) {
      if (!(*f->delta_fraction >= 0.0)) throw ArgumentError("--delta-fraction must be >= 0");
      if (loaded->policy.mode == TaskMode::type) loaded->policy.delta_abs = *f->delta_fraction * loaded->target_spread;
    }
    const std::shared_ptr<const TrainedBundle> bundle = loaded;
    const auto data = load_dataset(f->data, SplitRole::test, &bundle->class_labels);
    const auto replays = replay_dataset(bundle, bundle->policy, data, !f->attention.empty());
    ensure_parent(f->out);
    write_decisions_csv(f->out, replays, bundle->class_labels, f->trace);
    m.outputs.push_back(f->out);
    if (!f->attention.empty()) {
      ensure_parent(f->attention);
      write_attention_csv(f->attention, replays, bundle->active_classes());
      m.outputs.push_back(f->attention);
    }
    std::size_t fired = 0;
    for (const auto& r : replays) fired += r.outcome.status == DecisionStatus::decided;
    ctx.out << "stream: " << replays.size() << " series, " << fired << " decided before the end\n";
    m.config["policy"] = to_json(bundle->policy);
    m.config["trace"] = f->trace;
    m.inputs = {f->bundle, f->data};
    m.wall_seconds = seconds_since(start);
    write_manifest(m, f->out + ".manifest.json");
  };
}

// ---------------------------------------------------------------------------
// evaluate

inline Action add_evaluate(CLI::App& app) {
  auto* sub = app.add_subcommand("evaluate", "Score a decisions CSV");
  struct Flags {
    std::string decisions, out, bundle;
    BenefitFlags benefit;
    std::size_t classes = 2;
    std::optional<int> positive;
  };
  auto f = std::make_shared<Flags>();
  sub->add_option("--decisions", f->decisions, "Decisions CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f->out, "Report CSV (default: <decisions>.report.csv)");
  f->benefit.add_to(sub);
  sub->add_option("--bundle", f->bundle, "Take the benefit model from a bundle")->check(CLI::ExistingFile);
  sub->add_option("--classes", f->classes, "Class count for --ms-ratio")->capture_default_str();
  sub->add_option("--positive-class", f->positive, "Class index scored by precision/recall");
  return [=](Context& ctx) {
    const auto start = Clock::now();
    auto m = start_manifest(ctx, "evaluate");
    const auto spec = f->bundle.empty() ? f->benefit.resolve(f->classes) : load_bundle(f->bundle).benefit;
    const auto records = read_decisions_csv(f->decisions);
    for (const auto& r : records) {
      if (r.truth < 0 || static_cast<std::size_t>(r.truth) >= spec.num_classes ||
          (r.predicted && (*r.predicted < 0 || static_cast<std::size_t>(*r.predicted) >= spec.num_classes))) {
        throw FormatError("record '" + r.id + "' names a class outside the benefit model");
      }
    }
    const int positive = f->positive.value_or(default_positive_class(spec));
    const auto report = evaluate(records, spec, positive);
    const std::string out = f->out.empty() ? strip_csv(f->decisions) + ".report.csv" : f->out;
    ensure_parent(out);
    write_report_csv(out, report);
    ctx.out << "evaluate: accuracy " << earlyben::detail::format_double(report.accuracy) << " tardiness "
            << earlyben::detail::format_double(report.tardiness) << " benefit "
            << earlyben::detail::format_double(report.total_benefit) << '\n';
    m.config["benefit"] = to_json(spec);
    m.config["positive_class"] = positive;
    m.inputs.push_back(f->decisions);
    if (!f->bundle.empty()) m.inputs.push_back(f->bundle);
    if (!f->benefit.path.empty()) m.inputs.push_back(f->benefit.path);
    m.outputs.push_back(out);
    m.wall_seconds = seconds_since(start);
    write_manifest(m, out + ".manifest.json");
  };
}

// ---------------------------------------------------------------------------
// pareto

inline Action add_pareto(CLI::App& app) {
  auto* sub = app.add_subcommand("pareto", "Metrics, Pareto front and tolerance table from a ranked sweep");
  struct Flags {
    std::string manifest, out, split = "auto", name, tolerances = "0.5,0.75,1";
  };
  auto f = std::make_shared<Flags>();
  sub->add_option("--manifest", f->manifest, "Ranked sweep CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f->out, "Output directory")->required();
  sub->add_option("--split", f->split, "Metrics to use: val, test or auto")
      ->check(CLI::IsMember({"val", "test", "auto"}))
      ->capture_default_str();
  sub->add_option("--name", f->name, "Row label of the tolerance table");
  sub->add_option("--tolerances", f->tolerances, "Comma-separated tardiness tolerances")->capture_default_str();
  return [=](Context& ctx) {
    const auto start = Clock::now();
    auto m = start_manifest(ctx, "pareto");
    bool use_test = f->split == "test";
    if (f->split == "auto") use_test = csv::read(f->manifest).has_column("test_accuracy");
    const auto points = read_sweep_points(f->manifest, use_test);
    if (points.empty()) throw ArgumentError("manifest has no scored points");
    const auto tols = parse_list(f->tolerances, "tolerance");
    for (double t : tols) {
      if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("tolerances must lie in (0, 1]");
    }
    const auto front = pareto_front(points);
    std::set<std::string> on_front;
    for (const auto& p : front) on_front.insert(p.config_id);

    const fs::path dir(f->out);
    fs::create_directories(dir);
    const auto metrics_path = (dir / "metrics.csv").string();
    const auto pareto_path = (dir / "pareto.csv").string();
    const auto tol_path = (dir / "tolerance.csv").string();
    {
      std::ofstream out(metrics_path);
      out << "config_id";
      for (const auto& c : report_columns()) out << ',' << c;
      out << '\n';
      for (const auto& p : points) {
        out << csv::quote(p.config_id);
        for (const auto& cell : report_cells(p.report)) out << ',' << cell;
        out << '\n';
      }
    }
    {
      // Front membership is by coordinates: duplicate points share the flag.
      std::set<std::pair<double, double>> coords;
      for (const auto& p : front) coords.insert({p.tardiness, p.accuracy});
      std::ofstream out(pareto_path);
      out << "config_id,tardiness,accuracy,on_front\n";
      for (const auto& p : points) {
        out << csv::quote(p.config_id) << ',' << csv::fmt(p.tardiness) << ',' << csv::fmt(p.accuracy) << ','
            << (coords.count({p.tardiness, p.accuracy}) ? 1 : 0) << '\n';
      }
    }
    {
      std::ofstream out(tol_path);
      out << "name";
      for (double t : tols) out << ",tol_" << csv::fmt(t);
      out << '\n';
      const std::string name = f->name.empty() ? fs::path(f->manifest).parent_path().filename().string() : f->name;
      out << csv::quote(name.empty() ? "sweep" : name);
      for (double t : tols) {
        const auto a = accuracy_at_tolerance(points, t);
        out << ',' << (a ? csv::fmt(*a) : "-");
      }
      out << '\n';
    }
    ctx.out << "pareto: " << front.size() << " of " << points.size() << " points on the front\n";
    m.config["split"] = use_test ? "test" : "val";
    m.config["tolerances"] = tols;
    m.inputs.push_back(f->manifest);
    m.outputs = {metrics_path, pareto_path, tol_path};
    m.wall_seconds = seconds_since(start);
    write_manifest(m, (dir / "pareto.manifest.json").string());
  };
}

// ---------------------------------------------------------------------------
// bench

inline Action add_bench(CLI::App& app) {
  auto* sub = app.add_subcommand("bench", "Training-scaling and per-tick latency benchmarks");
  sub->require_subcommand(1);
  auto* scaling = sub->add_subcommand("scaling", "Training wall time over nested data fractions");
  auto* latency = sub->add_subcommand("latency", "Per-tick streaming latency");
  struct Flags {
    std::string data, out, fractions = "0.2,0.4,0.6,0.8,1", attention = "full", bundle;
    BenefitFlags benefit;
    TrainConfig cfg;
    std::size_t dim = 107, hidden = 32, classes = 2, length = 500, repeats = 5, index = 0;
    std::size_t fits = 1;
    std::uint64_t seed = 0;
  };
  auto f = std::make_shared<Flags>();
  f->cfg.epochs = 5;
  scaling->add_option("--data", f->data, "Training dataset")->required()->check(CLI::ExistingFile);
  scaling->add_option("--out", f->out, "Timing CSV")->required();
  scaling->add_option("--fractions", f->fractions, "Sorted fractions in (0, 1]")->capture_default_str();
  f->benefit.add_to(scaling);
  scaling->add_option("--hidden", f->cfg.hidden_dim, "Hidden size")->capture_default_str();
  scaling->add_option("--lr", f->cfg.learning_rate, "Learning rate")->capture_default_str();
  scaling->add_option("--epochs", f->cfg.epochs, "Epochs")->capture_default_str();
  scaling->add_option("--batch-size", f->cfg.batch_size, "Series per minibatch")->capture_default_str();
  scaling->add_option("--seed", f->cfg.seed, "Seed")->capture_default_str();
  scaling->add_option("--repeats", f->fits, "Timed fits per fraction; the fastest is kept")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  latency->add_option("--out", f->out, "Timing CSV")->required();
  latency->add_option("--bundle", f->bundle, "Trained bundle (default: seeded untrained model)")
      ->check(CLI::ExistingFile);
  latency->add_option("--data", f->data, "Series source (default: seeded random series)")->check(CLI::ExistingFile);
  latency->add_option("--index", f->index, "Series index in --data")->capture_default_str();
  latency->add_option("--dim", f->dim, "Input dimension of the untrained model")->capture_default_str();
  latency->add_option("--hidden", f->hidden, "Hidden size of the untrained model")->capture_default_str();
  latency->add_option("--classes", f->classes, "Regressors in the untrained model")->capture_default_str();
  latency->add_option("--attention", f->attention, "full or last-state")
      ->check(CLI::IsMember({"full", "last-state"}))
      ->capture_default_str();
  latency->add_option("--length", f->length, "Random series length")->capture_default_str();
  latency->add_option("--repeats", f->repeats, "Timed replays per tick (>= 5)")->capture_default_str();
  latency->add_option("--seed", f->seed, "Seed")->capture_default_str();

  return [=](Context& ctx) {
    const auto start = Clock::now();
    auto m = start_manifest(ctx, "bench");
    ensure_parent(f->out);
    if (scaling->parsed()) {
      const auto data = load_dataset(f->data);
      const auto spec = f->benefit.resolve(data.num_classes);
      const auto fractions = parse_list(f->fractions, "fraction");
      const auto rep = bench_training_scaling(data, fractions, spec, f->cfg, f->fits);
      std::ofstream out(f->out);
      out << "fraction,n,seconds\n";
      for (const auto& p : rep.points) out << csv::fmt(p.fraction) << ',' << p.n << ',' << csv::fmt(p.seconds) << '\n';
      ctx.out << "bench scaling: r2 " << (rep.r2 ? earlyben::detail::format_double(*rep.r2) : "none") << '\n';
      m.config["kind"] = "scaling";
      m.config["train"] = to_json(f->cfg);
      m.config["benefit"] = to_json(spec);
      m.config["fractions"] = fractions;
      m.config["repeats"] = f->fits;
      m.config["r2"] = rep.r2 ? nlohmann::ordered_json(*rep.r2) : nlohmann::ordered_json(nullptr);
      m.seed = f->cfg.seed;
      m.inputs.push_back(f->data);
    } else {
      std::shared_ptr<const TrainedBundle> bundle =
          f->bundle.empty()
              ? untrained_bundle(f->dim, f->hidden, parse_attention_mode(f->attention), f->classes, f->seed)
              : std::make_shared<const TrainedBundle>(load_bundle(f->bundle));
      Sequence series;
      if (!f->data.empty()) {
        const auto data = load_dataset(f->data, SplitRole::test, &bundle->class_labels);
        if (f->index >= data.size()) throw ArgumentError("--index is past the end of the dataset");
        series = data.instances[f->index].series;
      } else {
        std::mt19937_64 rng(derive_seed(f->seed, "latency-series"));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        series = Sequence(bundle->model_config.input_dim,
                          std::vector<double>(f->length * bundle->model_config.input_dim));
        for (double& v : series.values) v = u(rng);
      }
      const auto lat = bench_step_latency(bundle, bundle->policy, series, f->repeats);
      std::ofstream out(f->out);
      out << "tick,median_seconds\n";
      std::vector<double> ticks;
      for (std::size_t t = 0; t < lat.size(); ++t) {
        out << t + 1 << ',' << csv::fmt(lat[t]) << '\n';
        ticks.push_back(static_cast<double>(t + 1));
      }
      const double slope = lat.size() >= 2 ? linear_fit_slope(ticks, lat) : 0.0;
      ctx.out << "bench latency: " << lat.size() << " ticks, slope " << earlyben::detail::format_double(slope)
              << " s/tick\n";
      m.config["kind"] = "latency";
      m.config["attention"] = to_string(bundle->model_config.attention);
      m.config["input_dim"] = bundle->model_config.input_dim;
      m.config["hidden_dim"] = bundle->model_config.hidden_dim;
      m.config["repeats"] = f->repeats;
      m.config["slope_seconds_per_tick"] = slope;
      m.seed = f->seed;
      if (!f->bundle.empty()) m.inputs.push_back(f->bundle);
      if (!f->data.empty()) m.inputs.push_back(f->data);
    }
    m.outputs.push_back(f->out);
    m.wall_seconds = seconds_since(start);
    write_manifest(m, f->out + ".manifest.json");
  };
}

// ---------------------------------------------------------------------------
// synth

inline Action add_synth(CLI::App& app) {
  auto* sub = app.add_subcommand("synth", "Write a synthetic two-outcome multivariate dataset");
  struct Flags {
    SynthConfig cfg;
    std::string out, truth;
  };
  auto f = std::make_shared<Flags>();
  sub->add_option("--out", f->out, "Dataset path (JSON lines)")->required();
  sub->add_option("--truth", f->truth, "Ground-truth sidecar (default: <out>.truth.jsonl)");
  sub->add_option("--n", f->cfg.n, "Series count")->capture_default_str();
  sub->add_option("--dim", f->cfg.dim, "Channels")->capture_default_str();
  sub->add_option("--min-length", f->cfg.min_length, "Shortest series")->capture_default_str();
  sub->add_option("--max-length", f->cfg.max_length, "Longest series")->capture_default_str();
  sub->add_option("--drift", f->cfg.drift, "Final drift of unfavourable series")->capture_default_str();
  sub->add_option("--noise", f->cfg.noise, "Noise standard deviation")->capture_default_str();
  sub->add_option("--seed", f->cfg.seed, "Seed")->capture_default_str();
  return [=](Context& ctx) {
    const auto start = Clock::now();
    auto m = start_manifest(ctx, "synth");
    const auto data = synth_outcome_dataset(f->cfg);
    const std::string truth = f->truth.empty() ? f->out + ".truth.jsonl" : f->truth;
    ensure_parent(f->out);
    ensure_parent(truth);
    save_multivariate(data.dataset, f->out);
    save_synth_truth(data.truth, truth);
    ctx.out << "synth: " << data.dataset.size() << " series written to " << f->out << '\n';
    m.config = {{"n", f->cfg.n},         {"dim", f->cfg.dim},     {"min_length", f->cfg.min_length},
                {"max_length", f->cfg.max_length}, {"drift", f->cfg.drift}, {"noise", f->cfg.noise}};
    m.seed = f->cfg.seed;
    m.outputs = {f->out, truth};
    m.wall_seconds = seconds_since(start);
    write_manifest(m, f->out + ".manifest.json");
  };
}

}  // namespace detail

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

namespace detail {

inline Action add_replay(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* sub = app.add_subcommand("replay", "Re-run the command recorded in a run manifest");
  auto path = std::make_shared<std::string>();
  sub->add_option("--manifest", *path, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
  return [=, &out, &err](Context&) {
    nlohmann::json j;
    {
      std::ifstream in(*path);
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest '" + *path + "': " + e.what());
      }
    }
    if (!j.contains("args") || !j["args"].is_array()) throw FormatError("manifest '" + *path + "' has no args");
    const auto args = j["args"].get<std::vector<std::string>>();
    if (!args.empty() && args.front() == "replay") throw ArgumentError("refusing to replay a replay manifest");
    const auto here = fs::current_path();
    if (j.contains("cwd") && j["cwd"].is_string()) fs::current_path(j["cwd"].get<std::string>());
    const int code = dispatch(args, out, err);
    fs::current_path(here);
    if (code != 0) throw Error(static_cast<ErrorCategory>(code), "replayed command failed");
  };
}

}  // namespace detail

/// Parses args (without the program name), runs the subcommand and maps
/// failures to exit codes: 0 ok, 1 runtime, 2 usage, 3 data format,
/// 4 persistence. Errors are printed to err as one "category: detail" line.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Benefit-driven early classification of time series", "earlyben"};
  app.set_version_flag("--version", EARLYBEN_VERSION);
  app.require_subcommand(1);
  detail::Context ctx{args, out, err};
  app.add_option("--workers", ctx.workers_flag, "Worker threads (default: $EARLYBEN_WORKERS or 1)");
  std::map<std::string, Action> actions;
  actions["preprocess"] = detail::add_preprocess(app);
  actions["train"] = detail::add_train(app);
  actions["sweep"] = detail::add_sweep(app);
  actions["stream"] = detail::add_stream(app);
  actions["evaluate"] = detail::add_evaluate(app);
  actions["pareto"] = detail::add_pareto(app);
  actions["bench"] = detail::add_bench(app);
  actions["synth"] = detail::add_synth(app);
  actions["replay"] = detail::add_replay(app, out, err);
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << EARLYBEN_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage: " << one_line(e.what()) << '\n';
    return static_cast<int>(ErrorCategory::usage);
  }

  try {
    for (auto* sub : app.get_subcommands()) actions.at(sub->get_name())(ctx);
    return 0;
  } catch (const Error& e) {
    err << category_name(e.category()) << ": " << one_line(e.what()) << '\n';
    return static_cast<int>(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "persistence: " << one_line(e.what()) << '\n';
    return static_cast<int>(ErrorCategory::persistence);
  } catch (const nlohmann::json::exception& e) {
    err << "format: " << one_line(e.what()) << '\n';
    return static_cast<int>(ErrorCategory::format);
  } catch (const std::exception& e) {
    err << "runtime: " << one_line(e.what()) << '\n';
    return static_cast<int>(ErrorCategory::runtime);
  }
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace earlyben::cli
