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

// Bag-of-entities forward model.
//
//   phi_i  = [cos(h, v_i), p_i]        (or the single active feature)
//   a      = softmax_i(w_att . phi_i)  (uniform when attention is disabled)
//   z      = sum_i a_i v_i             (zero vector for an empty bag)
//   logits = W (h + z) + b
//   p      = softmax(logits) or sigmoid(logits)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mboe/embedding_store.hpp"
#include "mboe/entity_detection.hpp"
#include "mboe/errors.hpp"

namespace mboe {

enum class FeatureMask { kBoth, kCosineOnly, kCommonnessOnly, kNone };
enum class HeadMode { kMulticlass, kMultilabel };

inline std::size_t feature_count(FeatureMask mask) {
  switch (mask) {
    case FeatureMask::kBoth: return 2;
    case FeatureMask::kCosineOnly:
    case FeatureMask::kCommonnessOnly: return 1;
    case FeatureMask::kNone: return 0;
  }
  return 0;
}

inline std::string_view to_string(FeatureMask mask) {
  switch (mask) {
    case FeatureMask::kBoth: return "both";
    case FeatureMask::kCosineOnly: return "cosine_only";
    case FeatureMask::kCommonnessOnly: return "commonness_only";
    case FeatureMask::kNone: return "none";
  }
  return "?";
}

inline FeatureMask parse_feature_mask(std::string_view s) {
  if (s == "both") return FeatureMask::kBoth;
  if (s == "cosine_only" || s == "cosine") return FeatureMask::kCosineOnly;
  if (s == "commonness_only" || s == "commonness") return FeatureMask::kCommonnessOnly;
  if (s == "none") return FeatureMask::kNone;
  throw ConfigError("unknown feature mask '" + std::string(s) + "'");
}

inline std::string_view to_string(HeadMode mode) {
  return mode == HeadMode::kMulticlass ? "multiclass" : "multilabel";
}

inline HeadMode parse_head_mode(std::string_view s) {
  if (s == "multiclass") return HeadMode::kMulticlass;
  if (s == "multilabel") return HeadMode::kMultilabel;
  throw ConfigError("unknown head mode '" + std::string(s) + "'");
}

struct AttentionConfig {
  FeatureMask mask = FeatureMask::kBoth;
  Vector weights;  // one per active feature, no bias

  bool operator==(const AttentionConfig&) const = default;
};

struct ClassifierHead {
  std::size_t classes = 0;
  std::size_t dim = 0;
  Vector weights;  // classes x dim, row-major
  Vector bias;     // classes
  HeadMode mode = HeadMode::kMulticlass;
  double threshold = 0.5;

  double weight(std::size_t c, std::size_t j) const { return weights[c * dim + j]; }
  bool operator==(const ClassifierHead&) const = default;
};

struct BoEModel {
  AttentionConfig attention;
  ClassifierHead head;

  static BoEModel zeros(std::size_t dim, std::size_t classes, HeadMode mode,
                        FeatureMask mask = FeatureMask::kBoth) {
    BoEModel m;
    m.attention.mask = mask;
    m.attention.weights.assign(feature_count(mask), 0.0);
    m.head.classes = classes;
    m.head.dim = dim;
    m.head.weights.assign(classes * dim, 0.0);
    m.head.bias.assign(classes, 0.0);
    m.head.mode = mode;
    return m;
  }

  void validate(std::size_t store_dim) const {
    if (attention.weights.size() != feature_count(attention.mask)) {
      throw ConfigError("attention weight count does not match feature mask");
    }
    if (head.dim != store_dim) {
      throw ConfigError("model dimension " + std::to_string(head.dim) +
                        " does not match embedding dimension " + std::to_string(store_dim));
    }
    if (head.weights.size() != head.classes * head.dim || head.bias.size() != head.classes) {
      throw ConfigError("classifier shape is inconsistent");
    }
  }

  bool operator==(const BoEModel&) const = default;
};

inline Vector feature_row(FeatureMask mask, double cos, double commonness) {
  switch (mask) {
    case FeatureMask::kBoth: return {cos, commonness};
    case FeatureMask::kCosineOnly: return {cos};
    case FeatureMask::kCommonnessOnly: return {commonness};
    case FeatureMask::kNone: return {};
  }
  return {};
}

// K x F feature matrix.
inline std::vector<Vector> features(std::span<const double> h, const BagOfEntities& bag,
                                    const EntityEmbeddingStore& store, FeatureMask mask) {
  std::vector<Vector> phi;
  phi.reserve(bag.size());
  for (const auto& item : bag.items) {
    const double cos = mask == FeatureMask::kCommonnessOnly ? 0.0 : cosine(h, store.get(item.qid));
    phi.push_back(feature_row(mask, cos, item.commonness));
  }
  return phi;
}

// Max-subtracted softmax.
inline Vector softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - m);
  for (auto& x : out) x /= sum;
  return out;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vector attention_weights(const std::vector<Vector>& phi, std::span<const double> w) {
  Vector logits(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (phi[i].size() != w.size()) throw ConfigError("feature width does not match attention weights");
    logits[i] = dot(phi[i], w);
  }
  return softmax(logits);
}

inline Vector uniform_weights(std::size_t k) {
  return Vector(k, k == 0 ? 0.0 : 1.0 / static_cast<double>(k));
}

inline Vector entity_representation(const BagOfEntities& bag, std::span<const double> a,
                                    const EntityEmbeddingStore& store) {
  if (a.size() != bag.size()) throw std::logic_error("attention length does not match bag");
  Vector z(store.dim(), 0.0);
  for (std::size_t i = 0; i < bag.size(); ++i) {
    const Vector v = store.get(bag.items[i].qid);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += a[i] * v[j];
  }
  return z;
}

// Intermediate values of one forward pass, reused by backprop.
struct ForwardTrace {
  std::vector<Vector> entity_vectors;
  std::vector<Vector> phi;
  Vector attention;
  Vector z;
  Vector fused;  // h + z
  Vector logits;
  Vector probs;
};

inline ForwardTrace forward_trace(std::span<const double> h, const BagOfEntities& bag,
                                  const BoEModel& model, const EntityEmbeddingStore& store) {
  const std::size_t d = model.head.dim;
  if (h.size() != d) {
    throw ConfigError("encoder vector has dimension " + std::to_string(h.size()) +
                      ", model expects " + std::to_string(d));
  }
  if (store.dim() != d) throw ConfigError("embedding dimension does not match model");
  const FeatureMask mask = model.attention.mask;
  ForwardTrace t;
  t.entity_vectors.reserve(bag.size());
  for (const auto& item : bag.items) {
    t.entity_vectors.push_back(store.get(item.qid));
    const double cos = mask == FeatureMask::kCommonnessOnly ? 0.0 : cosine(h, t.entity_vectors.back());
    t.phi.push_back(feature_row(mask, cos, item.commonness));
  }
  t.attention = mask == FeatureMask::kNone ? uniform_weights(bag.size())
                                           : attention_weights(t.phi, model.attention.weights);
  t.z.assign(d, 0.0);
  for (std::size_t i = 0; i < bag.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) t.z[j] += t.attention[i] * t.entity_vectors[i][j];
  }
  t.fused.resize(d);
  for (std::size_t j = 0; j < d; ++j) t.fused[j] = h[j] + t.z[j];
  const std::size_t c_count = model.head.classes;
  t.logits.resize(c_count);
  for (std::size_t c = 0; c < c_count; ++c) {
    t.logits[c] = model.head.bias[c] +
                  dot(std::span(model.head.weights).subspan(c * d, d), t.fused);
  }
  if (model.head.mode == HeadMode::kMulticlass) {
    t.probs = softmax(t.logits);
  } else {
    t.probs.resize(c_count);
    for (std::size_t c = 0; c < c_count; ++c) t.probs[c] = sigmoid(t.logits[c]);
  }
  return t;
}

inline Vector forward(std::span<const double> h, const BagOfEntities& bag, const BoEModel& model,
                      const EntityEmbeddingStore& store) {
  return forward_trace(h, bag, model, store).probs;
}

// Multiclass: argmax with the lowest index winning ties.
inline std::size_t predict_class(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("empty probability vector");
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

// Multilabel: every label with probability strictly above the threshold.
inline std::vector<std::size_t> predict_labels(std::span<const double> probs,
                                               double threshold = 0.5) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (probs[c] > threshold) out.push_back(c);
  }
  return out;
}

inline std::vector<std::size_t> predict(std::span<const double> probs, const ClassifierHead& head) {
  if (head.mode == HeadMode::kMulticlass) return {predict_class(probs)};
  return predict_labels(probs, head.threshold);
}

}  // namespace mboe
