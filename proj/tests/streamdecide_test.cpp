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
#include <vector>

#include <gtest/gtest.h>

#include "earlyben/streamdecide.hpp"
#include "fixtures.hpp"

namespace earlyben {
namespace {

using testing::random_bundle;
using testing::random_instance;

TEST(ApplyRuleTest, OutcomeFiresOnFirstPositive) {
  DecisionPolicy p;
  p.mode = TaskMode::outcome;
  const std::vector<int> cls = {1};
  const std::vector<double> traj = {-5, -1, 0.2};
  std::optional<int> fired;
  std::size_t tick = 0;
  for (std::size_t t = 0; t < traj.size() && !fired; ++t) {
    fired = apply_rule(p, cls, std::span<const double>(&traj[t], 1));
    tick = t + 1;
  }
  EXPECT_EQ(fired, 1);
  EXPECT_EQ(tick, 3u);
  const double zero = 0.0;
  EXPECT_FALSE(apply_rule(p, cls, std::span<const double>(&zero, 1)));
}

TEST(ApplyRuleTest, TypeMargin) {
  DecisionPolicy p;
  p.mode = TaskMode::type;
  p.delta_abs = 1.5;
  const std::vector<int> cls = {0, 1};
  EXPECT_EQ(apply_rule(p, cls, std::vector<double>{1, 3}), 1);
  EXPECT_FALSE(apply_rule(p, cls, std::vector<double>{2.5, 3}));
  EXPECT_EQ(apply_rule(p, cls, std::vector<double>{3, 1.5}), 0);  // margin exactly delta fires
  EXPECT_FALSE(apply_rule(p, cls, std::vector<double>{-3, -1}));
  p.delta_abs = 0.0;
  EXPECT_EQ(apply_rule(p, cls, std::vector<double>{2, 2}), 0);  // tie goes to the lowest index
  EXPECT_THROW(apply_rule(p, cls, std::vector<double>{1}), ShapeError);
}

TEST(StreamStateTest, FreshStateIsUndecided) {
  auto b = random_bundle(TaskMode::outcome, 2, 4, AttentionMode::full, 1);
  StreamState st = init_stream(b, b->policy);
  EXPECT_EQ(st.tick(), 0u);
  EXPECT_EQ(st.current().status, DecisionStatus::undecided);
}

TEST(StreamStateTest, ModeMismatchIsConfigError) {
  auto b = random_bundle(TaskMode::outcome, 2, 4, AttentionMode::full, 1);
  DecisionPolicy p = b->policy;
  p.mode = TaskMode::type;
  EXPECT_THROW(init_stream(b, p), ConfigError);
  p = b->policy;
  p.attention = AttentionMode::last_state;
  EXPECT_THROW(init_stream(b, p), ConfigError);
}

TEST(StreamStateTest, StatesAreIndependent) {
  auto b = random_bundle(TaskMode::type, 2, 4, AttentionMode::full, 2);
  std::mt19937_64 rng(2);
  const auto inst = random_instance(rng, 6, 2);
  StreamState a(b, b->policy), c(b, b->policy);
  for (std::size_t t = 0; t < 3; ++t) a.observe(inst.series.row(t));
  EXPECT_EQ(c.tick(), 0u);
  const auto first_a = StreamState(b, b->policy).observe(inst.series.row(0)).estimates;
  EXPECT_EQ(c.observe(inst.series.row(0)).estimates, first_a);
}

TEST(StreamStateTest, ShapeAndStateErrors) {
  auto b = random_bundle(TaskMode::outcome, 2, 4, AttentionMode::full, 3);
  StreamState st(b, b->policy);
  const std::vector<double> bad(3, 0.0), ok(2, 0.0);
  EXPECT_THROW(st.observe(bad), ShapeError);
  st.observe(ok);
  EXPECT_THROW(st.finalize(2), StateError);
  st.finalize(1);
  EXPECT_THROW(st.observe(ok), StateError);
}

TEST(StreamStateTest, FinalizeOutcomeDefaultsAtL) {
  auto b = std::make_shared<TrainedBundle>(*random_bundle(TaskMode::outcome, 1, 3, AttentionMode::full, 4));
  b->models[0].params.head_bias() = -100.0;  // never positive
  StreamState st(b, b->policy);
  for (int t = 0; t < 24; ++t) st.observe(std::vector<double>{0.1});
  const auto out = st.finalize(24);
  EXPECT_EQ(out.status, DecisionStatus::finalized);
  EXPECT_EQ(out.predicted, 0);
  EXPECT_EQ(out.tick, 24u);
}

TEST(StreamStateTest, FinalizeTypeUnclassifiedAtL) {
  auto b = std::make_shared<TrainedBundle>(*random_bundle(TaskMode::type, 1, 3, AttentionMode::full, 4));
  for (auto& m : b->models) m.params.head_bias() = -100.0;
  StreamState st(b, b->policy);
  for (int t = 0; t < 7; ++t) st.observe(std::vector<double>{0.1});
  const auto out = st.finalize(7);
  EXPECT_EQ(out.status, DecisionStatus::unclassified);
  EXPECT_FALSE(out.predicted);
  EXPECT_EQ(out.tick, 7u);
}

TEST(StreamStateTest, AttentionSnapshot) {
  auto b = random_bundle(TaskMode::type, 2, 4, AttentionMode::full, 5);
  StreamState st(b, b->policy);
  EXPECT_THROW(st.attention_snapshot(), StateError);
  std::mt19937_64 rng(5);
  const auto inst = random_instance(rng, 30, 2);
  st.observe(inst.series.row(0));
  for (const auto& a : st.attention_snapshot()) EXPECT_EQ(a, std::vector<double>{1.0});
  for (std::size_t t = 1; t < 30; ++t) {
    st.observe(inst.series.row(t));
    for (const auto& a : st.attention_snapshot()) {
      ASSERT_EQ(a.size(), t + 1);
      double sum = 0.0;
      for (double v : a) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
  auto ls = random_bundle(TaskMode::type, 2, 4, AttentionMode::last_state, 5);
  StreamState st2(ls, ls->policy);
  st2.observe(inst.series.row(0));
  EXPECT_THROW(st2.attention_snapshot(), ConfigError);
}

TEST(StreamStateTest, IdenticalObservationsGiveUniformAttention) {
  auto b = random_bundle(TaskMode::type, 2, 4, AttentionMode::full, 6);
  auto zeroed = std::make_shared<TrainedBundle>(*b);
  for (auto& m : zeroed->models) {
    // No recurrent input: the hidden state depends on the current observation only.
    for (double& v : m.params.group(ParamGroup::recurrent_weights)) v = 0.0;
    for (std::size_t j = 4; j < 8; ++j) m.params.group(ParamGroup::gate_bias)[j] = -50.0;  // forget gate closed
  }
  StreamState st(zeroed, zeroed->policy);
  const std::vector<double> x = {0.3, -0.7};
  for (int t = 0; t < 4; ++t) st.observe(x);
  for (const auto& a : st.attention_snapshot()) {
    for (double v : a) EXPECT_NEAR(v, 0.25, 1e-12);
  }
}

// Streamed estimates equal batch predictions on each normalized prefix, bit for bit.
TEST(StreamPropertyTest, StreamingMatchesBatch) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto mode = rep % 2 ? TaskMode::type : TaskMode::outcome;
    const auto att = rep % 3 ? AttentionMode::full : AttentionMode::last_state;
    auto b = random_bundle(mode, 1 + rep % 3, 3 + rep % 4, att, 100 + rep, 2 + rep % 2);
    const auto inst = random_instance(rng, 5 + rep, b->model_config.input_dim);
    LabeledDataset one;
    one.dim = inst.dim();
    one.num_classes = 2;
    one.instances = {inst};
    const auto norm = apply_normalize(one, *b->norm).instances[0];
    StreamState st(b, b->policy);
    for (std::size_t t = 0; t < inst.length(); ++t) {
      const auto out = st.observe(inst.series.row(t));
      for (std::size_t k = 0; k < b->models.size(); ++k) {
        const double batch = b->models[k].estimate(norm.series.prefix(t + 1));
        ASSERT_EQ(out.estimates[k], batch) << "rep " << rep << " tick " << t + 1;
      }
    }
  }
}

TEST(StreamPropertyTest, SealingAndMinimality) {
  std::mt19937_64 rng(8);
  int decided = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const auto mode = rep % 2 ? TaskMode::type : TaskMode::outcome;
    auto b = random_bundle(mode, 2, 4, AttentionMode::full, 200 + rep, 2, 0.3);
    const auto inst = random_instance(rng, 25, 2);
    const auto r = replay_series(b, b->policy, inst);
    const auto cls = b->active_classes();
    std::size_t first = 0;
    for (std::size_t t = 0; t < r.estimates.size(); ++t) {
      if (apply_rule(b->policy, cls, r.estimates[t])) {
        first = t + 1;
        break;
      }
    }
    if (first == 0) {
      EXPECT_NE(r.outcome.status, DecisionStatus::decided);
      continue;
    }
    ++decided;
    EXPECT_EQ(r.outcome.status, DecisionStatus::decided);
    EXPECT_EQ(r.outcome.tick, first);
    StreamState st(b, b->policy);
    DecisionOutcome sealed;
    for (std::size_t t = 0; t < inst.length(); ++t) {
      const auto o = st.observe(inst.series.row(t));
      if (t + 1 >= first) {
        if (t + 1 == first) sealed = o;
        EXPECT_EQ(o.predicted, sealed.predicted);
        EXPECT_EQ(o.tick, first);
      }
    }
    const auto fin = st.finalize(inst.length());
    EXPECT_EQ(fin.predicted, sealed.predicted);
    EXPECT_EQ(fin.tick, first);
  }
  EXPECT_GT(decided, 0);
}

TEST(StreamPropertyTest, MarginMonotonicity) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 30; ++rep) {
    auto b = random_bundle(TaskMode::type, 2, 4, AttentionMode::full, 300 + rep, 2 + rep % 2);
    const auto r = replay_series(b, b->policy, random_instance(rng, 20, 2));
    const auto cls = b->active_classes();
    std::size_t prev_tick = 0;
    bool prev_decided = true;
    for (double delta : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0}) {
      DecisionPolicy p = b->policy;
      p.delta_abs = delta;
      const auto o = decide_from_trajectory(p, b->benefit, cls, r.estimates);
      const bool dec = o.status == DecisionStatus::decided;
      EXPECT_FALSE(dec && !prev_decided);
      if (dec) {
        EXPECT_GE(o.tick, prev_tick);
      }
      prev_decided = dec;
      if (dec) prev_tick = o.tick;
    }
  }
}

TEST(StreamPropertyTest, TrajectoryReplayMatchesLiveStream) {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    const auto mode = rep % 2 ? TaskMode::type : TaskMode::outcome;
    auto b = random_bundle(mode, 2, 4, AttentionMode::full, 400 + rep, 2, 0.2);
    const auto r = replay_series(b, b->policy, random_instance(rng, 15, 2));
    const auto o = decide_from_trajectory(b->policy, b->benefit, b->active_classes(), r.estimates);
    EXPECT_EQ(o.status, r.outcome.status);
    EXPECT_EQ(o.predicted, r.outcome.predicted);
    EXPECT_EQ(o.tick, r.outcome.tick);
  }
}

}  // namespace
}  // namespace earlyben
