// Copyright 2026 The mboe Authors.
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

#include "mboe/boe_model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"

namespace mboe {
namespace {

BagOfEntities bag_of(std::initializer_list<std::pair<const char*, double>> items) {
  BagOfEntities bag;
  for (const auto& [q, p] : items) bag.items.push_back({q, p, 0, 0, {}});
  return bag;
}

TEST(Features, RowsFollowMask) {
  EntityEmbeddingStore store(2);
  store.set_base("Q1", {2, 0});
  store.set_base("Q2", {1 / std::sqrt(2.0), 1 / std::sqrt(2.0)});
  const Vector h{1, 0};
  auto phi = features(h, bag_of({{"Q1", 1.0}}), store, FeatureMask::kBoth);
  EXPECT_EQ(phi, (std::vector<Vector>{{1.0, 1.0}}));
  phi = features(h, bag_of({{"Q2", 0.25}}), store, FeatureMask::kBoth);
  // cos 45 degrees
  EXPECT_NEAR(phi[0][0], 0.707107, 1e-6);
  EXPECT_DOUBLE_EQ(phi[0][1], 0.25);
  phi = features(h, bag_of({{"Q1", 0.3}, {"Q2", 0.25}}), store, FeatureMask::kCosineOnly);
  ASSERT_EQ(phi.size(), 2u);
  EXPECT_EQ(phi[0].size(), 1u);
  EXPECT_DOUBLE_EQ(phi[0][0], 1.0);
  phi = features(h, bag_of({{"Q1", 0.3}}), store, FeatureMask::kCommonnessOnly);
  EXPECT_EQ(phi, (std::vector<Vector>{{0.3}}));
  EXPECT_TRUE(features(h, BagOfEntities{}, store, FeatureMask::kBoth).empty());
}

TEST(Attention, KnownValues) {
  EXPECT_EQ(attention_weights({{0.3, 0.9}}, Vector{2, -1}), (Vector{1.0}));
  const auto uniform = attention_weights({{1, 2}, {3, 4}, {5, 6}, {7, 8}}, Vector{0, 0});
  for (double a : uniform) EXPECT_DOUBLE_EQ(a, 0.25);
  // e / (e + 1), 1 / (e + 1)
  const auto a = attention_weights({{1}, {0}}, Vector{1});
  EXPECT_NEAR(a[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(a[0], 0.731059, 1e-6);
  EXPECT_NEAR(a[1], 0.268941, 1e-6);
  EXPECT_TRUE(attention_weights({}, Vector{1, 1}).empty());
}

TEST(AttentionProperty, DistributionShiftInvariantAndEquivariant) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + rng() % 8;
    std::vector<double> logits(k);
    for (auto& x : logits) x = n(rng);
    const auto a = softmax(logits);
    double sum = 0.0;
    for (double x : a) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    auto shifted = logits;
    const double c = n(rng) * 100;
    for (auto& x : shifted) x += c;
    const auto b = softmax(shifted);
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
  // Extreme logits stay finite.
  const auto big = softmax(std::vector<double>{1000, 999});
  EXPECT_NEAR(big[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(EntityRepresentation, WeightedSum) {
  EntityEmbeddingStore store(2);
  store.set_base("Q1", {2, 0});
  store.set_base("Q2", {0, 2});
  EXPECT_EQ(entity_representation(bag_of({{"Q1", 1}, {"Q2", 1}}), Vector{0.5, 0.5}, store), (Vector{1, 1}));
  EXPECT_EQ(entity_representation(bag_of({{"Q2", 1}}), Vector{1.0}, store), (Vector{0, 2}));
  EXPECT_EQ(entity_representation(BagOfEntities{}, Vector{}, store), (Vector{0, 0}));
  EXPECT_THROW(entity_representation(bag_of({{"Q1", 1}}), Vector{0.5, 0.5}, store), std::logic_error);
}

TEST(Forward, ZeroHeadIsUniform) {
  const EntityEmbeddingStore store(3);
  const auto model = BoEModel::zeros(3, 4, HeadMode::kMulticlass);
  const auto p = forward(Vector{1, 2, 3}, bag_of({{"Q1", 0.5}}), model, store);
  for (double x : p) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Forward, DimensionMismatchIsConfigError) {
  const EntityEmbeddingStore store(3);
  const auto model = BoEModel::zeros(3, 2, HeadMode::kMulticlass);
  EXPECT_THROW(forward(Vector{1, 2}, BagOfEntities{}, model, store), ConfigError);
  const EntityEmbeddingStore other(4);
  EXPECT_THROW(forward(Vector{1, 2, 3}, BagOfEntities{}, model, other), ConfigError);
}

TEST(Forward, HandComputedTinyInstance) {
  // d=2, C=2, K=2, multiclass.
  EntityEmbeddingStore store(2);
  store.set_base("Q1", {1, 0});
  store.set_base("Q2", {0, 1});
  BoEModel m = BoEModel::zeros(2, 2, HeadMode::kMulticlass);
  m.attention.weights = {1.0, 2.0};
  m.head.weights = {1, 0, 0, 1};
  m.head.bias = {0.5, -0.5};
  const Vector h{1, 0};
  const auto bag = bag_of({{"Q1", 0.5}, {"Q2", 0.25}});
  // phi1 = [1, .5] -> s1 = 2; phi2 = [0, .25] -> s2 = 0.5
  const double a1 = 1.0 / (1.0 + std::exp(0.5 - 2.0));
  const double a2 = 1.0 - a1;
  // x = h + z = (1 + a1, a2); logits = (1 + a1 + .5, a2 - .5)
  const double l1 = 1.5 + a1, l2 = a2 - 0.5;
  const double p1 = 1.0 / (1.0 + std::exp(l2 - l1));
  const auto p = forward(h, bag, m, store);
  EXPECT_NEAR(p[0], p1, 1e-15);
  EXPECT_NEAR(p[1], 1.0 - p1, 1e-15);
}

TEST(ForwardProperty, MatchesStepwiseOracle) {
  std::mt19937_64 rng(99);
  const FeatureMask masks[] = {FeatureMask::kBoth, FeatureMask::kCosineOnly, FeatureMask::kCommonnessOnly,
                               FeatureMask::kNone};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng() % 8;
    const std::size_t k = rng() % 6;
    const std::size_t c = 1 + rng() % 4;
    const auto mode = trial % 2 ? HeadMode::kMultilabel : HeadMode::kMulticlass;
    auto inst = oracle::random_instance(rng, d, k, c, mode, masks[trial % 4], true, 1);
    const auto& ex = inst.batch[0];
    const auto got = forward(ex.h, ex.bag, inst.model, inst.store);
    const auto want = oracle::stepwise_forward(ex.h, ex.bag, inst.model, inst.store);
    for (std::size_t i = 0; i < c; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(ForwardProperty, EmptyBagEqualsTextOnlyLinear) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = oracle::random_instance(rng, 6, 0, 3, HeadMode::kMulticlass, FeatureMask::kBoth, true, 1);
    auto text_only = inst.model;
    const auto& h = inst.batch[0].h;
    Vector logits(3);
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < 6; ++j) s += text_only.head.weight(c, j) * h[j];
      logits[c] = s + text_only.head.bias[c];
    }
    EXPECT_EQ(forward(h, BagOfEntities{}, inst.model, inst.store), softmax(logits));
  }
}

TEST(ForwardProperty, PermutationLeavesZUnchanged) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = oracle::random_instance(rng, 5, 5, 3, HeadMode::kMulticlass, FeatureMask::kBoth, true, 1);
    const auto& ex = inst.batch[0];
    const auto t = forward_trace(ex.h, ex.bag, inst.model, inst.store);
    std::vector<std::size_t> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    BagOfEntities shuffled;
    for (auto i : perm) shuffled.items.push_back(ex.bag.items[i]);
    const auto u = forward_trace(ex.h, shuffled, inst.model, inst.store);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_NEAR(u.attention[i], t.attention[perm[i]], 1e-14);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(u.z[j], t.z[j], 1e-12);
  }
}

TEST(ForwardProperty, NoAttentionMaskIsUniformAverage) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = oracle::random_instance(rng, 4, 1 + rng() % 5, 2, HeadMode::kMultilabel, FeatureMask::kNone, true, 1);
    const auto& ex = inst.batch[0];
    const auto z = entity_representation(ex.bag, uniform_weights(ex.bag.size()), inst.store);
    const auto t = forward_trace(ex.h, ex.bag, inst.model, inst.store);
    EXPECT_EQ(t.z, z);
  }
}

TEST(Predict, ArgmaxAndThreshold) {
  EXPECT_EQ(predict_class(Vector{0.1, 0.7, 0.2}), 1u);
  EXPECT_EQ(predict_class(Vector{0.4, 0.4, 0.2}), 0u);
  EXPECT_EQ(predict_labels(Vector{0.6, 0.5, 0.9}), (std::vector<std::size_t>{0, 2}));
  EXPECT_TRUE(predict_labels(Vector{0.4, 0.4}).empty());
}

}  // namespace
}  // namespace mboe
