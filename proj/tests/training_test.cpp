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

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "earlyben/training.hpp"
#include "test_util.hpp"

namespace earlyben {
namespace {

LabeledDataset toy_dataset(std::size_t n, std::size_t len, std::size_t d, std::uint64_t seed, double signal = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  LabeledDataset ds;
  ds.dim = d;
  ds.num_classes = 2;
  ds.class_labels = {"0", "1"};
  for (std::size_t i = 0; i < n; ++i) {
    SeriesInstance inst;
    inst.id = "s" + std::to_string(i);
    inst.label = static_cast<int>(i % 2);
    inst.series.dim = d;
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < d; ++c) {
        const double level = inst.label == 1 ? signal : -signal;
        inst.series.values.push_back(level * static_cast<double>(t + 1) / static_cast<double>(len) + noise(rng));
      }
    }
    ds.instances.push_back(inst);
  }
  return ds;
}

BenefitSpec outcome_spec(double m) {
  auto spec = ms_ratio_spec(m, 2, TaskMode::outcome, 0);
  return spec;
}

TEST(PrefixSamplesTest, SingleSeriesTargets) {
  auto ds = toy_dataset(1, 3, 1, 1);
  ds.instances[0].label = 1;
  const auto s = make_prefix_samples(ds, outcome_spec(2.0), 1, 1);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.items[0].target, 2.0);
  EXPECT_EQ(s.items[1].target, 1.0);
  EXPECT_EQ(s.items[2].target, 0.0);
  EXPECT_EQ(s.prefix(s.items[1]).size(), 2u);
}

TEST(PrefixSamplesTest, StrideKeepsFinalTick) {
  EXPECT_EQ(prefix_lengths(5, 2), (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_EQ(prefix_lengths(6, 2), (std::vector<std::size_t>{1, 3, 5, 6}));
  EXPECT_EQ(prefix_lengths(1, 4), (std::vector<std::size_t>{1}));
  EXPECT_THROW(prefix_lengths(5, 0), ArgumentError);
}

TEST(PrefixSamplesTest, CountIsNTimesL) {
  const auto ds = toy_dataset(7, 9, 2, 2);
  EXPECT_EQ(make_prefix_samples(ds, outcome_spec(2.0), 1, 1).size(), 63u);
  EXPECT_THROW(make_prefix_samples(ds, outcome_spec(2.0), 0, 1), ArgumentError);
}

TEST(SplitTest, TenSeriesGiveOneValidation) {
  const auto ds = toy_dataset(10, 4, 1, 3);
  const auto sp = split_train_val(ds, 0.9, 5);
  EXPECT_EQ(sp.train.size(), 9u);
  EXPECT_EQ(sp.val.size(), 1u);
}

TEST(SplitTest, SameSeedSameSplit) {
  const auto ds = toy_dataset(30, 4, 1, 3);
  const auto a = split_train_val(ds, 0.9, 17);
  const auto b = split_train_val(ds, 0.9, 17);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
}

TEST(SplitTest, StratifiedValidationCoversClasses) {
  const auto ds = toy_dataset(20, 4, 1, 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sp = split_train_val(ds, 0.9, seed);
    EXPECT_TRUE(sp.stratified);
    EXPECT_EQ(sp.val.size(), 2u);
    const auto counts = sp.val.class_counts();
    EXPECT_GE(counts[0], 1u);
    EXPECT_GE(counts[1], 1u);
  }
}

TEST(SplitTest, SequenceLevelDisjoint) {
  const auto ds = toy_dataset(41, 4, 1, 3);
  const auto sp = split_train_val(ds, 0.9, 1);
  std::set<std::string> ids;
  for (const auto& i : sp.train.instances) ids.insert(i.id);
  for (const auto& i : sp.val.instances) EXPECT_EQ(ids.count(i.id), 0u);
  EXPECT_EQ(sp.train.size() + sp.val.size(), ds.size());
}

TEST(SplitTest, SingletonClassFallsBackWithWarning) {
  auto ds = toy_dataset(10, 4, 1, 3);
  for (auto& inst : ds.instances) inst.label = 0;
  ds.instances[3].label = 1;
  const auto sp = split_train_val(ds, 0.9, 2);
  EXPECT_FALSE(sp.stratified);
  EXPECT_FALSE(sp.warnings.empty());
  EXPECT_EQ(sp.val.size(), 1u);
}

TEST(SplitTest, TooSmall) {
  const auto ds = toy_dataset(1, 4, 1, 3);
  EXPECT_THROW(split_train_val(ds), ArgumentError);
}

PrefixSamples constant_samples(double value, std::size_t n, std::uint64_t seed) {
  auto ds = toy_dataset(n, 6, 2, seed);
  PrefixSamples s;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    s.series.push_back(ds.instances[i].series);
    s.ids.push_back(ds.instances[i].id);
    for (std::size_t t = 1; t <= 6; ++t) s.items.push_back({i, t, value});
  }
  return s;
}

TEST(TrainRegressorTest, ConstantTargetConverges) {
  const auto train = constant_samples(3.0, 12, 1);
  const auto val = constant_samples(3.0, 4, 2);
  ModelConfig mc;
  mc.input_dim = 2;
  mc.hidden_dim = 4;
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 1;
  cfg.learning_rate = 0.02;
  cfg.patience = 0;
  for (std::uint64_t seed : {9u, 10u, 11u}) {
    const auto m = train_regressor(train, val, mc, cfg, seed);
    EXPECT_LE(m.history.best_val_loss, 1e-3) << "seed " << seed;
    for (const auto& item : val.items) EXPECT_NEAR(m.estimate(val.prefix(item)), 3.0, 0.1);
  }
}

TEST(TrainRegressorTest, SeededRunIsRepeatable) {
  const auto ds = toy_dataset(12, 8, 1, 4);
  const auto spec = outcome_spec(8.0);
  const auto s = make_prefix_samples(ds, spec, 1, 1);
  ModelConfig mc;
  mc.input_dim = 1;
  mc.hidden_dim = 4;
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto a = train_regressor(s, s, mc, cfg, 3);
  const auto b = train_regressor(s, s, mc, cfg, 3);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.params, b.params);
}

TEST(TrainRegressorTest, SeparableTargetsReduceValidationLoss) {
  const auto ds = toy_dataset(40, 10, 1, 5);
  const auto spec = outcome_spec(10.0);
  const auto sp = split_train_val(ds, 0.8, 1);
  const auto tr = make_prefix_samples(sp.train, spec, 1, 1);
  const auto va = make_prefix_samples(sp.val, spec, 1, 1);
  ModelConfig mc;
  mc.input_dim = 1;
  mc.hidden_dim = 8;
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 0.01;
  cfg.patience = 0;
  const auto m = train_regressor(tr, va, mc, cfg, 2);
  EXPECT_LT(m.history.best_val_loss, 0.5 * m.history.val_loss.front());
}

TEST(TrainRegressorTest, DivergenceIsTrainingError) {
  const auto train = constant_samples(1e300, 4, 1);
  ModelConfig mc;
  mc.input_dim = 2;
  mc.hidden_dim = 2;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e6;
  try {
    auto bad = train;
    for (auto& it : bad.items) it.target = std::numeric_limits<double>::infinity();
    train_regressor(bad, bad, mc, cfg, 1);
    FAIL() << "expected a training error";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(TrainBundleTest, ModelCountMatchesMode) {
  const auto ds = toy_dataset(12, 6, 2, 6);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden_dim = 3;
  const auto outcome = train_bundle(ds, outcome_spec(6.0), cfg);
  EXPECT_EQ(outcome.models.size(), 1u);
  EXPECT_EQ(outcome.models[0].model_class, 1);
  EXPECT_EQ(outcome.policy.delta_abs, 0.0);
  const auto type = train_bundle(ds, ms_ratio_spec(6.0, 2, TaskMode::type), cfg);
  EXPECT_EQ(type.models.size(), 2u);
  EXPECT_DOUBLE_EQ(type.target_spread, 6.0);
  EXPECT_DOUBLE_EQ(type.policy.delta_abs, 0.5 * 6.0);
  EXPECT_EQ(type.validation_ids.size(), 1u);
}

TEST(TrainBundleTest, WorkerCountDoesNotChangeResult) {
  const auto ds = toy_dataset(12, 6, 2, 6);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.hidden_dim = 3;
  const auto spec = ms_ratio_spec(6.0, 2, TaskMode::type);
  EXPECT_EQ(train_bundle(ds, spec, cfg, 1), train_bundle(ds, spec, cfg, 2));
}

TEST(TrainBundleTest, ClassCountMismatchIsConfigError) {
  const auto ds = toy_dataset(12, 6, 2, 6);
  EXPECT_THROW(train_bundle(ds, ms_ratio_spec(6.0, 3, TaskMode::type), TrainConfig{}), ConfigError);
}

TrainedBundle small_bundle() {
  const auto ds = toy_dataset(10, 5, 2, 8);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden_dim = 3;
  return train_bundle(ds, ms_ratio_spec(5.0, 2, TaskMode::type), cfg);
}

TEST(PersistenceTest, RoundTripIsExactAndByteStable) {
  testing::TempDir dir;
  const auto b = small_bundle();
  save_bundle(b, dir.file("a.json"));
  const auto back = load_bundle(dir.file("a.json"));
  EXPECT_EQ(back, b);
  save_bundle(back, dir.file("b.json"));
  EXPECT_EQ(testing::read_file(dir.file("a.json")), testing::read_file(dir.file("b.json")));
}

TEST(PersistenceTest, CorruptionIsDetected) {
  const auto text = serialize_bundle(small_bundle());
  auto pos = text.find("\"params\"");
  ASSERT_NE(pos, std::string::npos);
  pos = text.find_first_of("0123456789", pos + 12);
  auto tampered = text;
  tampered[pos] = tampered[pos] == '1' ? '2' : '1';
  EXPECT_THROW(deserialize_bundle(tampered), PersistenceError);
  EXPECT_THROW(deserialize_bundle(text.substr(0, text.size() / 2)), PersistenceError);
}

TEST(PersistenceTest, FutureVersionIsRejected) {
  auto b = small_bundle();
  b.format_version = kBundleFormatVersion + 1;
  try {
    deserialize_bundle(serialize_bundle(b));
    FAIL() << "expected a persistence error";
  } catch (const PersistenceError& e) {
    EXPECT_NE(std::string(e.what()).find(std::to_string(kBundleFormatVersion + 1)), std::string::npos);
  }
}

TEST(PersistenceTest, MissingFile) {
  EXPECT_THROW(load_bundle("/nonexistent/bundle.json"), PersistenceError);
}

}  // namespace
}  // namespace earlyben
