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

#pragma once

// Independent reference implementations used only by tests: brute-force
// substring detection, a loop-by-loop forward pass, finite differences,
// and random instance generators.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "mboe/boe_model.hpp"
#include "mboe/embedding_store.hpp"
#include "mboe/entity_detection.hpp"
#include "mboe/kb_dictionary.hpp"
#include "mboe/trainer.hpp"
#include "mboe/unicode.hpp"

namespace mboe::oracle {

using ItemKey = std::tuple<std::string, double, std::size_t, std::size_t>;

inline std::vector<ItemKey> keys_of(const BagOfEntities& bag) {
  std::vector<ItemKey> out;
  for (const auto& it : bag.items) out.emplace_back(it.qid, it.commonness, it.begin, it.end);
  std::sort(out.begin(), out.end());
  return out;
}

// Tests every code-point-aligned substring of the normalized text against
// the dictionary map directly.
inline std::vector<ItemKey> naive_detect(const std::string& text, const MentionEntityDictionary& dict,
                                         const InterLanguageMap& links, bool boundary_aware = false) {
  const unicode::NormalizedText norm(text);
  const std::string& t = norm.text();
  std::vector<std::size_t> cuts;
  for (std::size_t i = 0; i <= t.size(); ++i) {
    if (i == t.size() || unicode::is_lead_byte(static_cast<unsigned char>(t[i]))) cuts.push_back(i);
  }
  auto letter_at = [&](std::size_t pos) {
    std::size_t q = pos;
    return unicode::is_letter(unicode::next_code_point(t, q));
  };
  std::vector<ItemKey> out;
  for (std::size_t a = 0; a < cuts.size(); ++a) {
    for (std::size_t b = a + 1; b < cuts.size(); ++b) {
      const std::string sub = t.substr(cuts[a], cuts[b] - cuts[a]);
      auto it = dict.entries().find(sub);
      if (it == dict.entries().end()) continue;
      if (boundary_aware) {
        if (a > 0 && letter_at(cuts[a - 1])) continue;
        if (b + 1 < cuts.size() && letter_at(cuts[b])) continue;
      }
      double total = 0.0;
      for (const auto& c : it->second.candidates) total += static_cast<double>(c.count);
      for (const auto& c : it->second.candidates) {
        auto q = links.lookup(dict.language(), c.title);
        if (!q) continue;
        out.emplace_back(std::string(*q), static_cast<double>(c.count) / total,
                         norm.original_begin(cuts[a]), norm.original_end(cuts[b]));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Plain loop evaluation of the bag-of-entities forward pass.
inline std::vector<double> stepwise_forward(const std::vector<double>& h, const BagOfEntities& bag,
                                            const BoEModel& model, const EntityEmbeddingStore& store) {
  const std::size_t d = h.size();
  const std::size_t k = bag.items.size();
  std::vector<std::vector<double>> v;
  for (const auto& it : bag.items) v.push_back(store.get(it.qid));

  std::vector<double> score(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double hv = 0.0, hh = 0.0, vv = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      hv += h[j] * v[i][j];
      hh += h[j] * h[j];
      vv += v[i][j] * v[i][j];
    }
    const double cos = (hh == 0.0 || vv == 0.0) ? 0.0 : hv / std::sqrt(hh * vv);
    const double p = bag.items[i].commonness;
    const auto& w = model.attention.weights;
    switch (model.attention.mask) {
      case FeatureMask::kBoth: score[i] = w[0] * cos + w[1] * p; break;
      case FeatureMask::kCosineOnly: score[i] = w[0] * cos; break;
      case FeatureMask::kCommonnessOnly: score[i] = w[0] * p; break;
      case FeatureMask::kNone: score[i] = 0.0; break;
    }
  }
  std::vector<double> a(k, 0.0);
  double denom = 0.0;
  for (std::size_t i = 0; i < k; ++i) denom += std::exp(score[i]);
  for (std::size_t i = 0; i < k; ++i) a[i] = std::exp(score[i]) / denom;

  std::vector<double> x(h);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[j] += a[i] * v[i][j];
  }
  const std::size_t classes = model.head.classes;
  std::vector<double> logit(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    logit[c] = model.head.bias[c];
    for (std::size_t j = 0; j < d; ++j) logit[c] += model.head.weights[c * d + j] * x[j];
  }
  std::vector<double> p(classes);
  if (model.head.mode == HeadMode::kMulticlass) {
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(logit[c]);
    for (std::size_t c = 0; c < classes; ++c) p[c] = std::exp(logit[c]) / s;
  } else {
    for (std::size_t c = 0; c < classes; ++c) p[c] = 1.0 / (1.0 + std::exp(-logit[c]));
  }
  return p;
}

struct Instance {
  EntityEmbeddingStore store{1};
  BoEModel model;
  std::vector<Example> batch;
  bool trainable = true;
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t d, std::size_t k, std::size_t classes,
                                HeadMode mode, FeatureMask mask, bool trainable,
                                std::size_t batch_size = 2) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  Instance inst;
  inst.trainable = trainable;
  inst.store = EntityEmbeddingStore(d, rng(), 0.5);
  const std::vector<std::string> qids{"Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7"};
  // Q6 and Q7 stay out of the base table and use fallback vectors.
  for (std::size_t q = 0; q < 5; ++q) {
    Vector v(d);
    for (auto& x : v) x = normal(rng);
    inst.store.set_base(qids[q], v);
  }
  for (std::size_t q = 0; q < qids.size(); q += 2) {
    auto& delta = inst.store.delta(qids[q]);
    for (auto& x : delta) x = 0.1 * normal(rng);
  }
  inst.model = BoEModel::zeros(d, classes, mode, mask);
  for (auto& w : inst.model.attention.weights) w = normal(rng);
  for (auto& w : inst.model.head.weights) w = 0.5 * normal(rng);
  for (auto& b : inst.model.head.bias) b = 0.5 * normal(rng);
  for (std::size_t n = 0; n < batch_size; ++n) {
    Example ex;
    ex.h.resize(d);
    for (auto& x : ex.h) x = normal(rng);
    for (std::size_t i = 0; i < k; ++i) {
      ex.bag.items.push_back({qids[rng() % qids.size()], unit(rng), 0, 0, {}});
    }
    if (mode == HeadMode::kMulticlass) {
      ex.gold = {static_cast<std::size_t>(rng() % classes)};
    } else {
      for (std::size_t c = 0; c < classes; ++c) {
        if (rng() % 2) ex.gold.push_back(c);
      }
    }
    inst.batch.push_back(std::move(ex));
  }
  return inst;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t components = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Central differences of the mean batch loss for every trainable scalar.
inline GradientCheck check_gradients(Instance inst, double eps = 1e-5) {
  const auto analytic = gradients(inst.batch, inst.model, inst.store, inst.trainable).grad;
  GradientCheck out;
  auto probe = [&](double& param, double expected) {
    const double saved = param;
    param = saved + eps;
    const double up = mean_loss(inst.batch, inst.model, inst.store);
    param = saved - eps;
    const double down = mean_loss(inst.batch, inst.model, inst.store);
    param = saved;
    const double numeric = (up - down) / (2.0 * eps);
    out.max_relative_error = std::max(out.max_relative_error, relative_error(expected, numeric));
    ++out.components;
  };
  for (std::size_t i = 0; i < inst.model.attention.weights.size(); ++i) {
    probe(inst.model.attention.weights[i], analytic.attention[i]);
  }
  for (std::size_t i = 0; i < inst.model.head.weights.size(); ++i) {
    probe(inst.model.head.weights[i], analytic.weights[i]);
  }
  for (std::size_t i = 0; i < inst.model.head.bias.size(); ++i) {
    probe(inst.model.head.bias[i], analytic.bias[i]);
  }
  if (inst.trainable) {
    // Every entity, including ones absent from the batch (expected 0).
    for (const std::string q : {"Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7"}) {
      const Vector zero(inst.store.dim(), 0.0);
      const auto it = analytic.deltas->find(q);
      const Vector& g = it == analytic.deltas->end() ? zero : it->second;
      auto& delta = inst.store.delta(q);
      for (std::size_t j = 0; j < delta.size(); ++j) probe(delta[j], g[j]);
    }
  }
  return out;
}

}  // namespace mboe::oracle
