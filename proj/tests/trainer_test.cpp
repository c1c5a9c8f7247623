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

#include "mboe/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mboe/encoder.hpp"
#include "oracles.hpp"

namespace mboe {
namespace {

TEST(Loss, KnownValues) {
  EXPECT_DOUBLE_EQ(loss(Vector{0, 1, 0}, {1}, HeadMode::kMulticlass), 0.0);
  EXPECT_NEAR(loss(Vector{0.25, 0.25, 0.25, 0.25}, {2}, HeadMode::kMulticlass), std::log(4.0), 1e-15);
  // mean of -ln(0.5) and -ln(1 - 0.5)
  EXPECT_NEAR(loss(Vector{0.5, 0.5}, {0}, HeadMode::kMultilabel), std::log(2.0), 1e-15);
  EXPECT_THROW(loss(Vector{0.5, 0.5}, {2}, HeadMode::kMulticlass), std::out_of_range);
  EXPECT_THROW(loss(Vector{0.5, 0.5}, {2}, HeadMode::kMultilabel), std::out_of_range);
  // Clamped, so a confident wrong answer is finite.
  EXPECT_TRUE(std::isfinite(loss(Vector{1, 0}, {1}, HeadMode::kMulticlass)));
}

TEST(Gradients, SingletonBagHasNoAttentionGradient) {
  std::mt19937_64 rng(1);
  auto inst = oracle::random_instance(rng, 4, 1, 3, HeadMode::kMulticlass, FeatureMask::kBoth, true);
  const auto g = gradients(inst.batch, inst.model, inst.store, true).grad;
  for (double x : g.attention) EXPECT_DOUBLE_EQ(x, 0.0);
}

TEST(Gradients, FrozenEmbeddingsHaveNoDeltaGradient) {
  std::mt19937_64 rng(2);
  auto inst = oracle::random_instance(rng, 4, 3, 3, HeadMode::kMulticlass, FeatureMask::kBoth, false);
  EXPECT_FALSE(gradients(inst.batch, inst.model, inst.store, false).grad.deltas.has_value());
}

TEST(Gradients, OnlyBatchEntitiesGetDeltaGradients) {
  std::mt19937_64 rng(3);
  auto inst = oracle::random_instance(rng, 4, 2, 2, HeadMode::kMultilabel, FeatureMask::kBoth, true, 1);
  const auto g = gradients(inst.batch, inst.model, inst.store, true).grad;
  for (const auto& [q, v] : *g.deltas) {
    const bool in_batch = std::any_of(inst.batch[0].bag.items.begin(), inst.batch[0].bag.items.end(),
                                      [&](const auto& it) { return it.qid == q; });
    EXPECT_TRUE(in_batch) << q;
  }
}

TEST(GradientsProperty, MatchFiniteDifferences) {
  std::mt19937_64 rng(31337);
  const FeatureMask masks[] = {FeatureMask::kBoth, FeatureMask::kCosineOnly, FeatureMask::kCommonnessOnly,
                               FeatureMask::kNone};
  for (int trial = 0; trial < 64; ++trial) {
    const auto mode = trial % 2 ? HeadMode::kMultilabel : HeadMode::kMulticlass;
    const auto mask = masks[(trial / 2) % 4];
    const bool trainable = (trial / 8) % 2 == 0;
    const std::size_t k = static_cast<std::size_t>(trial % 6);
    auto inst = oracle::random_instance(rng, 4, k, 2 + rng() % 3, mode, mask, trainable, 3);
    const auto check = oracle::check_gradients(inst);
    EXPECT_LT(check.max_relative_error, 1e-4) << "trial " << trial;
  }
}

TEST(Clipping, RescalesToMaxNorm) {
  GradientRecord g;
  g.attention = {6, 0};
  g.weights = {0, 8};
  g.bias = {};
  EXPECT_DOUBLE_EQ(g.global_norm(), 10.0);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 10.0);
  EXPECT_NEAR(g.global_norm(), 1.0, 1e-15);
  EXPECT_NEAR(g.attention[0], 0.6, 1e-15);
  GradientRecord small;
  small.attention = {0.3};
  clip_global_norm(small, 1.0);
  EXPECT_DOUBLE_EQ(small.attention[0], 0.3);
}

TEST(ClippingProperty, NormNeverExceedsBound) {
  std::mt19937_64 rng(17);
  std::lognormal_distribution<double> scale(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = oracle::random_instance(rng, 4, 3, 3, HeadMode::kMulticlass, FeatureMask::kBoth, true);
    auto g = gradients(inst.batch, inst.model, inst.store, true).grad;
    g.scale(scale(rng));
    const double bound = 0.01 + scale(rng);
    clip_global_norm(g, bound);
    EXPECT_LE(g.global_norm(), bound + 1e-9);
  }
}

TEST(AdamW, ZeroGradientWithoutDecayIsNoOp) {
  std::mt19937_64 rng(4);
  auto inst = oracle::random_instance(rng, 4, 2, 2, HeadMode::kMulticlass, FeatureMask::kBoth, true);
  auto g = GradientRecord::zeros_like(inst.model, true);
  (*g.deltas)["Q1"] = Vector(4, 0.0);
  const auto before_model = inst.model;
  const auto before_deltas = inst.store.deltas();
  AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 3; ++i) opt.step(inst.model, inst.store, g);
  EXPECT_EQ(inst.model, before_model);
  EXPECT_EQ(inst.store.deltas(), before_deltas);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  BoEModel m = BoEModel::zeros(1, 1, HeadMode::kMultilabel);
  EntityEmbeddingStore store(1);
  GradientRecord g = GradientRecord::zeros_like(m, false);
  g.bias = {0.3};
  AdamW opt({0.01, 0.9, 0.999, 0.0, 0.0});
  opt.step(m, store, g);
  // m_hat / sqrt(v_hat) = sign(g) on the first step
  EXPECT_NEAR(m.head.bias[0], -0.01, 1e-15);
}

// Two Gaussian blobs, linearly separable through the origin-free margin.
std::vector<Example> separable_task(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    Example ex;
    ex.h.resize(d);
    for (auto& x : ex.h) x = noise(rng);
    ex.h[0] += label ? 1.0 : -1.0;
    ex.bag.items.push_back({"Q" + std::to_string(rng() % 5), 0.5, 0, 0, {}});
    ex.gold = {label};
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(Train, LearnsSeparableTask) {
  const auto data = separable_task(1, 50, 8);
  EntityEmbeddingStore store(8, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 10;
  cfg.max_epochs = 200;
  const double before = mean_loss(data, initial_model(8, 2, cfg), store);
  TrainConfig one_epoch = cfg;
  one_epoch.max_epochs = 1;
  EntityEmbeddingStore s1 = store;
  const auto after_one = train(data, {}, 2, one_epoch, s1);
  EXPECT_LT(mean_loss(data, after_one.model, s1), before);

  const auto result = train(data, {}, 2, cfg, store);
  EXPECT_DOUBLE_EQ(evaluate(data, result.model, store), 1.0);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto data = separable_task(2, 20, 4);
  EntityEmbeddingStore store(4, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 5;
  const auto result = train(data, {}, 2, cfg, store);
  EXPECT_EQ(result.model, initial_model(4, 2, cfg));
  for (const auto& [q, v] : store.deltas()) {
    for (double x : v) EXPECT_EQ(x, 0.0);
  }
  EXPECT_EQ(result.history.steps, 5u);  // 20 examples fit in one batch
}

TEST(Train, DeterministicGivenSeed) {
  const auto data = separable_task(3, 40, 6);
  const auto val = separable_task(4, 10, 6);
  TrainConfig cfg;
  cfg.learning_rate = 0.02;
  cfg.batch_size = 7;
  cfg.max_epochs = 10;
  cfg.seed = 11;
  EntityEmbeddingStore a(6, 2), b(6, 2);
  const auto ra = train(data, val, 2, cfg, a);
  const auto rb = train(data, val, 2, cfg, b);
  EXPECT_EQ(ra.model, rb.model);
  EXPECT_EQ(a.deltas(), b.deltas());
  EXPECT_EQ(ra.history.train_loss, rb.history.train_loss);
  cfg.seed = 12;
  EntityEmbeddingStore c(6, 2);
  EXPECT_NE(train(data, val, 2, cfg, c).model, ra.model);
}

TEST(Train, EarlyStoppingHonoursPatience) {
  const auto data = separable_task(5, 30, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 100;
  cfg.patience = 3;
  EntityEmbeddingStore store(4);
  const auto r = train(data, data, 2, cfg, store);
  EXPECT_LE(r.history.val_metric.size(), r.history.best_epoch + cfg.patience);
  EXPECT_DOUBLE_EQ(evaluate(data, r.model, store),
                   *std::max_element(r.history.val_metric.begin(), r.history.val_metric.end()));
}

TEST(Train, RejectsBadConfig) {
  EntityEmbeddingStore store(4);
  TrainConfig cfg;
  EXPECT_THROW(train({}, {}, 2, cfg, store), std::invalid_argument);
  const auto data = separable_task(1, 4, 4);
  cfg.batch_size = 0;
  EXPECT_THROW(train(data, {}, 2, cfg, store), ConfigError);
  cfg.batch_size = 1;
  cfg.clip_norm = 0;
  EXPECT_THROW(train(data, {}, 2, cfg, store), ConfigError);
}

TEST(ModelFile, RoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  auto inst = oracle::random_instance(rng, 6, 4, 3, HeadMode::kMultilabel, FeatureMask::kCosineOnly, true, 4);
  ModelBundle b;
  b.model = inst.model;
  b.labels = {"a", "b", "c"};
  b.deltas = inst.store.deltas();
  b.embedding_checksum = 0xdeadbeef;
  b.init_seed = inst.store.init_seed();
  b.init_scale = inst.store.init_scale();
  b.metadata = {{"note", "probe"}};
  std::stringstream buf;
  save_model(buf, b);
  const auto back = load_model(buf, 6);
  EXPECT_EQ(back, b);

  EntityEmbeddingStore restored(6, back.init_seed, back.init_scale);
  for (const auto& [q, v] : inst.store.base()) restored.set_base(q, v);
  restored.set_deltas(back.deltas);
  for (const auto& ex : inst.batch) {
    EXPECT_EQ(forward(ex.h, ex.bag, back.model, restored), forward(ex.h, ex.bag, inst.model, inst.store));
  }
}

TEST(ModelFile, Errors) {
  ModelBundle b;
  b.model = BoEModel::zeros(4, 2, HeadMode::kMulticlass);
  std::stringstream buf;
  save_model(buf, b);
  const std::string bytes = buf.str();
  std::stringstream wrong_dim(bytes);
  EXPECT_THROW(load_model(wrong_dim, 8), ConfigError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_model(truncated), CorruptFileError);
  std::string v2 = bytes;
  v2[4] = 9;
  std::stringstream bad_version(v2);
  EXPECT_THROW(load_model(bad_version), CorruptFileError);
}

TEST(HashingEncoder, DeterministicSaltedNormalized) {
  HashingEncoder enc;
  enc.dim = 64;
  const auto a = enc.encode("the quick brown fox", "en");
  EXPECT_EQ(enc.encode("the quick brown fox", "en"), a);
  EXPECT_NE(enc.encode("the quick brown fox", "de"), a);
  EXPECT_NEAR(norm2(a), 1.0, 1e-9);
  EXPECT_NEAR(norm2(enc.encode("x", "en")), 1.0, 1e-9);
  EXPECT_NEAR(norm2(enc.encode("東", "ja")), 1.0, 1e-9);
  EXPECT_EQ(enc.encode("", "en"), Vector(64, 0.0));
  HashingEncoder other = enc;
  other.seed = 1;
  EXPECT_NE(other.encode("the quick brown fox", "en"), a);
}

TEST(HashingEncoder, PassesThroughPrecomputedVectors) {
  HashingEncoder enc;
  enc.dim = 3;
  Document doc{"d", "en", "ignored", {}, Vector{1, 2, 3}, {}};
  EXPECT_EQ(enc.encode(doc), (Vector{1, 2, 3}));
  doc.encoder_vector = Vector{1, 2};
  EXPECT_THROW(enc.encode(doc), ConfigError);
}

}  // namespace
}  // namespace mboe
