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

// Losses, analytic gradients, AdamW with global-norm clipping, the seeded
// training loop, and model persistence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mboe/binary_io.hpp"
#include "mboe/boe_model.hpp"
#include "mboe/embedding_store.hpp"
#include "mboe/entity_detection.hpp"
#include "mboe/errors.hpp"
#include "mboe/hash.hpp"
#include "mboe/metrics.hpp"

namespace mboe {

// One training or evaluation instance: text vector, entity bag, gold labels
// (exactly one index for multiclass).
struct Example {
  Vector h;
  BagOfEntities bag;
  LabelSet gold;
};

inline constexpr double kProbClamp = 1e-12;

inline double loss(std::span<const double> probs, const LabelSet& gold, HeadMode mode) {
  const auto clamp = [](double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); };
  for (auto g : gold) {
    if (g >= probs.size()) throw std::out_of_range("gold label outside vocabulary");
  }
  if (mode == HeadMode::kMulticlass) {
    if (gold.size() != 1) throw std::invalid_argument("multiclass gold must hold one label");
    // Clamping at 1 - 1e-12 would make a perfect prediction cost 1e-12.
    const double p = probs[gold[0]];
    return p >= 1.0 ? 0.0 : -std::log(clamp(p));
  }
  std::vector<bool> target(probs.size(), false);
  for (auto g : gold) target[g] = true;
  double total = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double p = clamp(probs[c]);
    total += target[c] ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

struct GradientRecord {
  Vector attention;
  Vector weights;
  Vector bias;
  std::optional<std::map<std::string, Vector>> deltas;

  static GradientRecord zeros_like(const BoEModel& m, bool with_deltas) {
    GradientRecord g;
    g.attention.assign(m.attention.weights.size(), 0.0);
    g.weights.assign(m.head.weights.size(), 0.0);
    g.bias.assign(m.head.bias.size(), 0.0);
    if (with_deltas) g.deltas.emplace();
    return g;
  }

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn(attention);
    fn(weights);
    fn(bias);
    if (deltas) {
      for (auto& [q, v] : *deltas) fn(v);
    }
  }

  double global_norm() const {
    double ss = 0.0;
    auto acc = [&ss](const Vector& v) {
      for (double x : v) ss += x * x;
    };
    acc(attention);
    acc(weights);
    acc(bias);
    if (deltas) {
      for (const auto& [q, v] : *deltas) acc(v);
    }
    return std::sqrt(ss);
  }

  void scale(double s) {
    for_each_tensor([s](Vector& v) {
      for (auto& x : v) x *= s;
    });
  }
};

// Rescales so the global L2 norm is at most max_norm. Returns the
// pre-clipping norm.
inline double clip_global_norm(GradientRecord& g, double max_norm) {
  const double n = g.global_norm();
  if (n > max_norm && n > 0.0) g.scale(max_norm / n);
  return n;
}

// Accumulates d(loss)/d(params) of a single example into `grad`, weighted
// by `weight`. Returns the example loss.
inline double accumulate_gradient(const Example& ex, const BoEModel& model,
                                  const EntityEmbeddingStore& store, double weight,
                                  GradientRecord& grad) {
  const ForwardTrace t = forward_trace(ex.h, ex.bag, model, store);
  const double value = loss(t.probs, ex.gold, model.head.mode);
  const std::size_t d = model.head.dim;
  const std::size_t classes = model.head.classes;
  const std::size_t k = ex.bag.size();
  const FeatureMask mask = model.attention.mask;

  // d loss / d logits
  Vector dlogits(t.probs);
  if (model.head.mode == HeadMode::kMulticlass) {
    dlogits[ex.gold[0]] -= 1.0;
  } else {
    for (auto g : ex.gold) dlogits[g] -= 1.0;
    for (auto& x : dlogits) x /= static_cast<double>(classes);
  }

  Vector dfused(d, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    const double gc = weight * dlogits[c];
    grad.bias[c] += gc;
    for (std::size_t j = 0; j < d; ++j) {
      grad.weights[c * d + j] += gc * t.fused[j];
      dfused[j] += dlogits[c] * model.head.weight(c, j);
    }
  }
  if (k == 0) return value;

  // dz = dfused; d loss / d a_i = dz . v_i
  Vector da(k);
  for (std::size_t i = 0; i < k; ++i) da[i] = dot(dfused, t.entity_vectors[i]);

  // softmax Jacobian: ds_i = a_i (da_i - sum_j a_j da_j)
  Vector ds(k, 0.0);
  if (mask != FeatureMask::kNone) {
    const double avg = dot(t.attention, da);
    for (std::size_t i = 0; i < k; ++i) ds[i] = t.attention[i] * (da[i] - avg);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t f = 0; f < grad.attention.size(); ++f) {
        grad.attention[f] += weight * ds[i] * t.phi[i][f];
      }
    }
  }

  if (!grad.deltas) return value;
  const bool cosine_path = mask == FeatureMask::kBoth || mask == FeatureMask::kCosineOnly;
  const double h_norm = norm2(ex.h);
  for (std::size_t i = 0; i < k; ++i) {
    auto [it, inserted] = grad.deltas->try_emplace(ex.bag.items[i].qid);
    if (inserted) it->second.assign(d, 0.0);
    Vector& dv = it->second;
    const Vector& v = t.entity_vectors[i];
    // weighted-sum path
    for (std::size_t j = 0; j < d; ++j) dv[j] += weight * t.attention[i] * dfused[j];
    // cosine path (cosine is the first feature whenever it is active)
    const double v_norm = norm2(v);
    if (cosine_path && h_norm > 0.0 && v_norm > 0.0) {
      const double dcos = ds[i] * model.attention.weights[0];
      const double cos = t.phi[i][0];
      for (std::size_t j = 0; j < d; ++j) {
        const double dcos_dv = ex.h[j] / (h_norm * v_norm) - cos * v[j] / (v_norm * v_norm);
        dv[j] += weight * dcos * dcos_dv;
      }
    }
  }
  return value;
}

struct BatchResult {
  GradientRecord grad;
  double mean_loss = 0.0;
};

// Gradient of the mean batch loss. Delta gradients are present only when
// `embeddings_trainable` and cover exactly the entities seen in the batch.
inline BatchResult gradients(std::span<const Example> batch, const BoEModel& model,
                             const EntityEmbeddingStore& store, bool embeddings_trainable) {
  if (batch.empty()) throw std::invalid_argument("gradients: empty batch");
  BatchResult r{GradientRecord::zeros_like(model, embeddings_trainable), 0.0};
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) r.mean_loss += w * accumulate_gradient(ex, model, store, w, r.grad);
  return r;
}

inline double mean_loss(std::span<const Example> batch, const BoEModel& model,
                        const EntityEmbeddingStore& store) {
  double total = 0.0;
  for (const auto& ex : batch) {
    total += loss(forward(ex.h, ex.bag, model, store), ex.gold, model.head.mode);
  }
  return total / static_cast<double>(batch.size());
}

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay Adam. Weight decay applies to attention weights,
// classifier weights and entity deltas, not to the bias. Delta moments are
// updated lazily: only entities with a gradient in the step move.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : cfg_(config) {}

  void step(BoEModel& model, EntityEmbeddingStore& store, const GradientRecord& g) {
    ++t_;
    update(model.attention.weights, g.attention, attention_, t_, true);
    update(model.head.weights, g.weights, weights_, t_, true);
    update(model.head.bias, g.bias, bias_, t_, false);
    if (g.deltas) {
      for (const auto& [qid, grad] : *g.deltas) {
        auto& state = deltas_[qid];
        ++state.t;
        update(store.delta(qid), grad, state, state.t, true);
      }
    }
  }

  const AdamWConfig& config() const { return cfg_; }

 private:
  struct Moments {
    Vector m;
    Vector v;
    std::uint64_t t = 0;
  };

  void update(Vector& param, const Vector& grad, Moments& s, std::uint64_t t, bool decay) {
    if (s.m.empty()) {
      s.m.assign(param.size(), 0.0);
      s.v.assign(param.size(), 0.0);
    }
    const double lr = cfg_.learning_rate;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
      if (decay) param[i] -= lr * cfg_.weight_decay * param[i];
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * grad[i];
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      param[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + cfg_.epsilon);
    }
  }

  AdamWConfig cfg_;
  std::uint64_t t_ = 0;
  Moments attention_, weights_, bias_;
  std::map<std::string, Moments> deltas_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  bool embeddings_trainable = true;
  HeadMode loss_mode = HeadMode::kMulticlass;
  FeatureMask feature_mask = FeatureMask::kBoth;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double init_scale = 0.01;  // classifier weights ~ uniform(-s, s)

  void validate() const {
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"embeddings_trainable", c.embeddings_trainable},
          {"loss_mode", std::string(to_string(c.loss_mode))},
          {"feature_mask", std::string(to_string(c.feature_mask))},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"init_scale", c.init_scale}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.embeddings_trainable = j.value("embeddings_trainable", c.embeddings_trainable);
  c.loss_mode = parse_head_mode(j.value("loss_mode", std::string("multiclass")));
  c.feature_mask = parse_feature_mask(j.value("feature_mask", std::string("both")));
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.init_scale = j.value("init_scale", c.init_scale);
  return c;
}

// Accuracy for multiclass, micro-F1 for multilabel.
inline double evaluate(std::span<const Example> examples, const BoEModel& model,
                       const EntityEmbeddingStore& store) {
  if (model.head.mode == HeadMode::kMulticlass) {
    std::vector<std::size_t> preds, golds;
    for (const auto& ex : examples) {
      preds.push_back(predict_class(forward(ex.h, ex.bag, model, store)));
      golds.push_back(ex.gold.at(0));
    }
    return accuracy(preds, golds);
  }
  std::vector<LabelSet> preds, golds;
  for (const auto& ex : examples) {
    preds.push_back(predict_labels(forward(ex.h, ex.bag, model, store), model.head.threshold));
    golds.push_back(ex.gold);
  }
  return micro_f1(preds, golds);
}

struct TrainHistory {
  std::vector<double> train_loss;     // mean batch loss per epoch
  std::vector<double> val_metric;     // per epoch, empty without validation data
  std::size_t best_epoch = 0;         // 1-based; 0 if no epoch ran
  std::size_t steps = 0;
};

struct TrainResult {
  BoEModel model;
  TrainHistory history;
};

inline BoEModel initial_model(std::size_t dim, std::size_t classes, const TrainConfig& cfg) {
  BoEModel m = BoEModel::zeros(dim, classes, cfg.loss_mode, cfg.feature_mask);
  std::uint64_t state = cfg.seed ^ 0x5bd1e995ULL;
  for (auto& w : m.head.weights) w = cfg.init_scale * (2.0 * unit_double(splitmix64(state)) - 1.0);
  return m;
}

// Trains attention, classifier and (optionally) entity deltas held in
// `store`. Stops early once the validation metric has not improved for
// `patience` epochs and restores the best parameters.
inline TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                         std::size_t classes, const TrainConfig& cfg,
                         EntityEmbeddingStore& store) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  TrainResult r{initial_model(store.dim(), classes, cfg), {}};
  AdamW opt({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay});

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::uint64_t shuffle_state = cfg.seed;

  double best = -1.0;
  BoEModel best_model = r.model;
  std::map<std::string, Vector> best_deltas = store.deltas();
  std::size_t stale = 0;
  std::vector<Example> batch;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(splitmix64(shuffle_state) % i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        batch.push_back(train_set[order[i]]);
      }
      auto [grad, batch_loss] = gradients(batch, r.model, store, cfg.embeddings_trainable);
      clip_global_norm(grad, cfg.clip_norm);
      opt.step(r.model, store, grad);
      epoch_loss += batch_loss;
      ++batches;
      ++r.history.steps;
    }
    r.history.train_loss.push_back(epoch_loss / static_cast<double>(batches));

    if (val_set.empty()) {
      r.history.best_epoch = epoch;
      continue;
    }
    const double metric = evaluate(val_set, r.model, store);
    r.history.val_metric.push_back(metric);
    if (metric > best) {
      best = metric;
      best_model = r.model;
      best_deltas = store.deltas();
      r.history.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (!val_set.empty()) {
    r.model = std::move(best_model);
    store.set_deltas(std::move(best_deltas));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Model container, little-endian:
//
//   "MBOM" u32 version=1
//   str   metadata (JSON: train config, encoder settings)
//   u8    head mode (0 multiclass, 1 multilabel)
//   u8    feature mask (0 both, 1 cosine_only, 2 commonness_only, 3 none)
//   f64   threshold
//   u64   dim, u64 classes
//   u64   attention count, f64 x count
//   f64   classifier weights (classes x dim, row-major), f64 bias x classes
//   u64   embedding file checksum (FNV-1a 64 of the file bytes, 0 if none)
//   u64   fallback init seed, f64 fallback init scale
//   u64   label count, str x count
//   u64   delta count, then per delta (sorted by QID): str qid, f64 x dim

inline constexpr std::string_view kModelMagic = "MBOM";
inline constexpr std::uint32_t kModelVersion = 1;

struct ModelBundle {
  BoEModel model;
  std::vector<std::string> labels;
  std::map<std::string, Vector> deltas;
  std::uint64_t embedding_checksum = 0;
  std::uint64_t init_seed = 0;
  double init_scale = EntityEmbeddingStore::kDefaultInitScale;
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const ModelBundle&) const = default;
};

inline void save_model(std::ostream& out, const ModelBundle& b) {
  const auto& m = b.model;
  binary::write_magic(out, kModelMagic, kModelVersion);
  binary::write_string(out, b.metadata.dump());
  binary::write_uint<std::uint8_t>(out, static_cast<std::uint8_t>(m.head.mode));
  binary::write_uint<std::uint8_t>(out, static_cast<std::uint8_t>(m.attention.mask));
  binary::write_f64(out, m.head.threshold);
  binary::write_uint<std::uint64_t>(out, m.head.dim);
  binary::write_uint<std::uint64_t>(out, m.head.classes);
  binary::write_uint<std::uint64_t>(out, m.attention.weights.size());
  for (double x : m.attention.weights) binary::write_f64(out, x);
  for (double x : m.head.weights) binary::write_f64(out, x);
  for (double x : m.head.bias) binary::write_f64(out, x);
  binary::write_uint<std::uint64_t>(out, b.embedding_checksum);
  binary::write_uint<std::uint64_t>(out, b.init_seed);
  binary::write_f64(out, b.init_scale);
  binary::write_uint<std::uint64_t>(out, b.labels.size());
  for (const auto& l : b.labels) binary::write_string(out, l);
  binary::write_uint<std::uint64_t>(out, b.deltas.size());
  for (const auto& [q, v] : b.deltas) {
    binary::write_string(out, q);
    for (double x : v) binary::write_f64(out, x);
  }
}

// `expected_dim` = 0 skips the dimension check.
inline ModelBundle load_model(std::istream& in, std::size_t expected_dim = 0) {
  binary::read_magic(in, kModelMagic, kModelVersion);
  ModelBundle b;
  auto& m = b.model;
  try {
    b.metadata = nlohmann::json::parse(binary::read_string(in));
  } catch (const nlohmann::json::exception&) {
    throw CorruptFileError("model metadata is not valid JSON");
  }
  const auto mode = binary::read_uint<std::uint8_t>(in);
  const auto mask = binary::read_uint<std::uint8_t>(in);
  if (mode > 1 || mask > 3) throw CorruptFileError("bad model enum");
  m.head.mode = static_cast<HeadMode>(mode);
  m.attention.mask = static_cast<FeatureMask>(mask);
  m.head.threshold = binary::read_f64(in);
  m.head.dim = binary::read_count(in, 1 << 24);
  m.head.classes = binary::read_count(in, 1 << 24);
  if (expected_dim != 0 && m.head.dim != expected_dim) {
    throw ConfigError("model dimension " + std::to_string(m.head.dim) +
                      " does not match expected " + std::to_string(expected_dim));
  }
  const auto n_att = binary::read_count(in, 2);
  if (n_att != feature_count(m.attention.mask)) throw CorruptFileError("attention size mismatch");
  m.attention.weights.resize(n_att);
  for (auto& x : m.attention.weights) x = binary::read_f64(in);
  m.head.weights.resize(m.head.classes * m.head.dim);
  for (auto& x : m.head.weights) x = binary::read_f64(in);
  m.head.bias.resize(m.head.classes);
  for (auto& x : m.head.bias) x = binary::read_f64(in);
  b.embedding_checksum = binary::read_uint<std::uint64_t>(in);
  b.init_seed = binary::read_uint<std::uint64_t>(in);
  b.init_scale = binary::read_f64(in);
  const auto n_labels = binary::read_count(in, 1 << 24);
  for (std::uint64_t i = 0; i < n_labels; ++i) b.labels.push_back(binary::read_string(in));
  const auto n_deltas = binary::read_count(in);
  for (std::uint64_t i = 0; i < n_deltas; ++i) {
    std::string q = binary::read_string(in);
    Vector v(m.head.dim);
    for (auto& x : v) x = binary::read_f64(in);
    b.deltas.emplace(std::move(q), std::move(v));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CorruptFileError("trailing bytes in model");
  return b;
}

inline void save_model(const std::string& path, const ModelBundle& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_model(out, b);
}

inline ModelBundle load_model(const std::string& path, std::size_t expected_dim = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_model(in, expected_dim);
}

inline std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t state = kFnvOffset;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    state = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), state);
  }
  return state;
}

}  // namespace mboe
