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

#include "mboe/embedding_store.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace mboe {
namespace {

TEST(Cosine, KnownValues) {
  const Vector e1{1, 0}, e2{0, 1};
  EXPECT_DOUBLE_EQ(cosine(e1, e1), 1.0);
  EXPECT_DOUBLE_EQ(cosine(e1, e2), 0.0);
  // 32 / (sqrt(14) * sqrt(77))
  EXPECT_NEAR(cosine(Vector{1, 2, 3}, Vector{4, 5, 6}), 32.0 / std::sqrt(14.0 * 77.0), 1e-15);
  EXPECT_NEAR(cosine(Vector{1, 2, 3}, Vector{4, 5, 6}), 0.974631846, 1e-9);
  EXPECT_DOUBLE_EQ(cosine(Vector{0, 0}, e1), 0.0);
  EXPECT_THROW(cosine(e1, Vector{1, 2, 3}), ConfigError);
}

TEST(CosineProperty, SymmetricAndScaleInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> alpha(0.01, 100.0);
  for (int i = 0; i < 500; ++i) {
    Vector u(8), v(8);
    for (auto& x : u) x = n(rng);
    for (auto& x : v) x = n(rng);
    EXPECT_DOUBLE_EQ(cosine(u, v), cosine(v, u));
    Vector su = u;
    const double a = alpha(rng);
    for (auto& x : su) x *= a;
    EXPECT_NEAR(cosine(su, v), cosine(u, v), 1e-12);
    EXPECT_LE(std::abs(cosine(u, v)), 1.0 + 1e-12);
  }
}

TEST(EmbeddingStore, LoadsWord2VecText) {
  std::istringstream in("2 4\nQ1 0.1 0.2 0.3 0.4\nQ2 1 2 3 4\n");
  const auto store = load_embeddings(in, 4);
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.get("Q2"), (Vector{1, 2, 3, 4}));
}

TEST(EmbeddingStore, RejectsBadRows) {
  std::istringstream short_row("2 4\nQ1 0.1 0.2 0.3 0.4\nQ2 1 2 3\n");
  try {
    load_embeddings(short_row, 4, 0, 0.02, "e.txt");
    FAIL();
  } catch (const IngestError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream bad_number("1 2\nQ1 0.1 x\n");
  EXPECT_THROW(load_embeddings(bad_number), IngestError);
  std::istringstream wrong_count("3 2\nQ1 0.1 0.2\n");
  EXPECT_THROW(load_embeddings(wrong_count), IngestError);
  std::istringstream bad_header("two 2\n");
  EXPECT_THROW(load_embeddings(bad_header), IngestError);
  std::istringstream other_dim("1 2\nQ1 0.1 0.2\n");
  EXPECT_THROW(load_embeddings(other_dim, 4), ConfigError);
}

TEST(EmbeddingStore, FallbackIsDeterministicAndBounded) {
  const EntityEmbeddingStore a(16, 7, 0.02);
  const EntityEmbeddingStore b(16, 7, 0.02);
  const Vector v = a.get("Q42");
  EXPECT_EQ(a.get("Q42"), v);
  EXPECT_EQ(b.get("Q42"), v);
  EXPECT_EQ(a.fallback("Q42"), v);
  for (double x : v) {
    EXPECT_LT(std::abs(x), 0.02);
  }
  EXPECT_NE(EntityEmbeddingStore(16, 8, 0.02).get("Q42"), v);
}

TEST(EmbeddingStore, FallbacksDoNotCollide) {
  const EntityEmbeddingStore store(8, 1);
  std::set<Vector> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(store.get("Q" + std::to_string(i)));
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(EmbeddingStore, DeltasAddAndRevert) {
  EntityEmbeddingStore store(3);
  store.set_base("Q1", {1, 2, 3});
  EXPECT_EQ(store.get("Q1"), (Vector{1, 2, 3}));
  store.delta("Q1") = {0.5, -1, 0};
  EXPECT_EQ(store.get("Q1"), (Vector{1.5, 1, 3}));
  store.delta("Q1") = {0, 0, 0};
  EXPECT_EQ(store.get("Q1"), (Vector{1, 2, 3}));
  store.delta("Q9") = {1, 1, 1};
  const Vector fb = store.fallback("Q9");
  EXPECT_DOUBLE_EQ(store.get("Q9")[0], fb[0] + 1.0);
  store.clear_deltas();
  EXPECT_EQ(store.get("Q9"), fb);
}

TEST(EmbeddingStore, ConcurrentFirstAccessAgrees) {
  const EntityEmbeddingStore store(32, 5);
  std::vector<Vector> results(8);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < results.size(); ++t) {
      pool.emplace_back([&, t] {
        for (int i = 0; i < 200; ++i) store.get("Q" + std::to_string(i));
        results[t] = store.get("Q77");
      });
    }
  }
  for (const auto& r : results) EXPECT_EQ(r, store.fallback("Q77"));
}

TEST(EmbeddingStore, SaveLoadRoundTripIsExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  EntityEmbeddingStore store(5);
  for (int i = 0; i < 20; ++i) {
    Vector v(5);
    for (auto& x : v) x = n(rng);
    store.set_base("Q" + std::to_string(i), v);
  }
  std::stringstream buf;
  save_embeddings(buf, store);
  const auto back = load_embeddings(buf, 5);
  EXPECT_EQ(back.base(), store.base());
}

}  // namespace
}  // namespace mboe
