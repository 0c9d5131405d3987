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

#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "earlyben/benefit.hpp"
#include "test_util.hpp"

namespace earlyben {
namespace {

constexpr int kSurvival = 0;
constexpr int kDeath = 1;

BenefitSpec outcome_spec(double s, double m) {
  BenefitSpec spec;
  spec.mode = TaskMode::outcome;
  spec.savings = s;
  spec.num_classes = 2;
  spec.default_class = kSurvival;
  spec.cost = {0.0, m, m, 0.0};
  return spec;
}

TEST(BenefitValueTest, OutcomeCorrectUnfavourable) {
  EXPECT_EQ(benefit_value(outcome_spec(1, 2), kDeath, kDeath, 1, 3), 2.0);
}

TEST(BenefitValueTest, OutcomeDefaultIsZero) {
  const auto spec = outcome_spec(1, 2);
  for (std::size_t t = 1; t <= 3; ++t) {
    EXPECT_EQ(benefit_value(spec, kSurvival, kSurvival, t, 3), 0.0);
    EXPECT_EQ(benefit_value(spec, kDeath, kSurvival, t, 3), 0.0);
  }
}

TEST(BenefitValueTest, OutcomeFalseAlarm) {
  EXPECT_EQ(benefit_value(outcome_spec(1, 2), kSurvival, kDeath, 2, 3), -1.0);
}

TEST(BenefitValueTest, TickOutOfRange) {
  const auto spec = outcome_spec(1, 2);
  EXPECT_THROW(benefit_value(spec, kDeath, kDeath, 0, 3), ArgumentError);
  EXPECT_THROW(benefit_value(spec, kDeath, kDeath, 4, 3), ArgumentError);
}

TEST(BuildTargetsTest, TableExamples) {
  const auto spec = outcome_spec(1, 2);
  EXPECT_EQ(build_targets(spec, kDeath, kDeath, 3), (std::vector<double>{2, 1, 0}));
  EXPECT_EQ(build_targets(spec, kSurvival, kDeath, 3), (std::vector<double>{0, -1, -2}));

  BenefitSpec type;
  type.mode = TaskMode::type;
  type.num_classes = 2;
  type.cost = {0.0, 7.0, 2.0, 0.0};  // asymmetric: truth class2 predicted class1 costs 2
  EXPECT_EQ(build_targets(type, 1, 0, 3), (std::vector<double>{0, -1, -2}));
  EXPECT_EQ(build_targets(type, 0, 1, 3), (std::vector<double>{-5, -6, -7}));
}

TEST(BuildTargetsTest, DefaultClassHasNoRegressor) {
  EXPECT_THROW(build_targets(outcome_spec(1, 2), kDeath, kSurvival, 3), ArgumentError);
}

BenefitSpec random_spec(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> classes(2, 4);
  std::uniform_real_distribution<double> s(0.01, 10.0), m(0.0, 50.0);
  BenefitSpec spec;
  spec.mode = std::bernoulli_distribution(0.5)(rng) ? TaskMode::outcome : TaskMode::type;
  spec.num_classes = static_cast<std::size_t>(classes(rng));
  spec.savings = s(rng);
  spec.default_class = std::uniform_int_distribution<int>(0, static_cast<int>(spec.num_classes) - 1)(rng);
  spec.cost.assign(spec.num_classes * spec.num_classes, 0.0);
  for (std::size_t l = 0; l < spec.num_classes; ++l) {
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      if (l != c) spec.cost[l * spec.num_classes + c] = m(rng);
    }
  }
  spec.validate();
  return spec;
}

TEST(BuildTargetsTest, SlopeIsSavingsRate) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    const auto spec = random_spec(rng);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
    const int truth = std::uniform_int_distribution<int>(0, static_cast<int>(spec.num_classes) - 1)(rng);
    for (int c : spec.active_classes()) {
      const auto v = build_targets(spec, truth, c, len);
      ASSERT_EQ(v.size(), len);
      for (std::size_t t = 0; t + 1 < len; ++t) EXPECT_NEAR(v[t] - v[t + 1], spec.savings, 1e-9);
      if (c == truth) {
        EXPECT_EQ(v.back(), 0.0);
      }
    }
  }
}

TEST(BenefitSpecTest, ActiveClassCounts) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const auto spec = random_spec(rng);
    const auto active = spec.active_classes();
    if (spec.mode == TaskMode::type) {
      EXPECT_EQ(active.size(), spec.num_classes);
    } else {
      EXPECT_EQ(active.size(), spec.num_classes - 1);
      EXPECT_EQ(std::count(active.begin(), active.end(), spec.default_class), 0);
    }
  }
}

TEST(BenefitSpecTest, ValidationRejectsBadCosts) {
  auto spec = outcome_spec(1, 2);
  spec.cost[0] = 1.0;
  EXPECT_THROW(spec.validate(), ArgumentError);
  spec = outcome_spec(1, 2);
  spec.cost[1] = -1.0;
  EXPECT_THROW(spec.validate(), ArgumentError);
  spec = outcome_spec(0, 2);
  EXPECT_THROW(spec.validate(), ArgumentError);
  spec = outcome_spec(1, 2);
  spec.cost.pop_back();
  EXPECT_THROW(spec.validate(), ArgumentError);
}

TEST(TotalBenefitTest, MixedDecisions) {
  const auto spec = outcome_spec(1, 2);
  const std::vector<DecisionTuple> d = {
      {kDeath, kDeath, 1, 3}, {kSurvival, kDeath, 2, 3}, {kSurvival, std::nullopt, 0, 3}};
  EXPECT_EQ(total_benefit(spec, d), 1.0);
}

TEST(TotalBenefitTest, EmptyIsZero) { EXPECT_EQ(total_benefit(outcome_spec(1, 2), {}), 0.0); }

TEST(TotalBenefitTest, AllCorrectAtFirstTick) {
  const std::vector<DecisionTuple> d(5, DecisionTuple{kDeath, kDeath, 1, 3});
  EXPECT_EQ(total_benefit(outcome_spec(1, 2), d), 10.0);
}

TEST(TotalBenefitTest, MonotoneInCostAndSavings) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    auto spec = random_spec(rng);
    std::vector<DecisionTuple> d;
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    for (int i = 0; i < n; ++i) {
      const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
      const int truth = std::uniform_int_distribution<int>(0, static_cast<int>(spec.num_classes) - 1)(rng);
      std::optional<int> pred;
      if (std::bernoulli_distribution(0.8)(rng)) {
        pred = std::uniform_int_distribution<int>(0, static_cast<int>(spec.num_classes) - 1)(rng);
      }
      d.push_back({truth, pred, std::uniform_int_distribution<std::size_t>(1, len)(rng), len});
    }
    const double base = total_benefit(spec, d);
    auto costlier = spec;
    const std::size_t entry = std::uniform_int_distribution<std::size_t>(0, spec.cost.size() - 1)(rng);
    if (entry / spec.num_classes != entry % spec.num_classes) costlier.cost[entry] += 3.5;
    EXPECT_LE(total_benefit(costlier, d), base);
    auto richer = spec;
    richer.savings *= 1.5;
    EXPECT_GE(total_benefit(richer, d), base);
  }
}

TEST(BenefitSpecTest, MsRatioSpec) {
  const auto spec = ms_ratio_spec(96.0, 2, TaskMode::type);
  EXPECT_EQ(spec.savings, 1.0);
  EXPECT_EQ(spec.cost, (std::vector<double>{0, 96, 96, 0}));
}

TEST(BenefitSpecTest, JsonRoundTrip) {
  testing::TempDir dir;
  BenefitSpec spec;
  spec.mode = TaskMode::type;
  spec.savings = 2.5;
  spec.num_classes = 3;
  spec.cost = {0, 1, 2, 3, 0, 4, 5, 6, 0};
  save_benefit_spec(spec, dir.file("b.json"));
  EXPECT_EQ(load_benefit_spec(dir.file("b.json")), spec);
  EXPECT_THROW(load_benefit_spec(dir.write("bad.json", "{\"mode\":\"type\"}")), FormatError);
  EXPECT_THROW(load_benefit_spec(dir.write("bad2.json", "{\"mode\":\"type\",\"savings\":1,\"cost\":[[0,1],[1]]}")),
               ArgumentError);
}

}  // namespace
}  // namespace earlyben
