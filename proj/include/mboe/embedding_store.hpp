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

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mboe/errors.hpp"
#include "mboe/hash.hpp"

namespace mboe {

using Vector = std::vector<double>;

inline double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm2(std::span<const double> u) { return std::sqrt(dot(u, u)); }

// Cosine similarity; 0 when either vector is zero.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ConfigError("cosine: dimension mismatch");
  const double nu = norm2(u);
  const double nv = norm2(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot(u, v) / (nu * nv);
}

// QID -> vector, with seeded uniform(-scale, scale) fallbacks for entities
// missing from the base table and additive trainable deltas.
class EntityEmbeddingStore {
 public:
  static constexpr double kDefaultInitScale = 0.02;

  explicit EntityEmbeddingStore(std::size_t dim, std::uint64_t init_seed = 0,
                                double init_scale = kDefaultInitScale)
      : dim_(dim), init_seed_(init_seed), init_scale_(init_scale) {
    if (dim == 0) throw ConfigError("embedding dimension must be positive");
    if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
  }

  EntityEmbeddingStore(const EntityEmbeddingStore& other)
      : dim_(other.dim_),
        init_seed_(other.init_seed_),
        init_scale_(other.init_scale_),
        base_(other.base_),
        deltas_(other.deltas_) {
    std::shared_lock lock(other.mutex_);
    fallbacks_ = other.fallbacks_;
  }

  EntityEmbeddingStore& operator=(const EntityEmbeddingStore& other) {
    if (this != &other) {
      EntityEmbeddingStore copy(other);
      dim_ = copy.dim_;
      init_seed_ = copy.init_seed_;
      init_scale_ = copy.init_scale_;
      base_ = std::move(copy.base_);
      deltas_ = std::move(copy.deltas_);
      fallbacks_ = std::move(copy.fallbacks_);
    }
    return *this;
  }

  std::size_t dim() const { return dim_; }
  std::uint64_t init_seed() const { return init_seed_; }
  double init_scale() const { return init_scale_; }
  std::size_t size() const { return base_.size(); }
  bool contains(std::string_view qid) const { return base_.contains(std::string(qid)); }
  const std::unordered_map<std::string, Vector>& base() const { return base_; }

  void set_base(std::string qid, Vector v) {
    if (v.size() != dim_) throw ConfigError("embedding for " + qid + " has wrong dimension");
    base_.insert_or_assign(std::move(qid), std::move(v));
  }

  // The deterministic fallback vector for `qid` (independent of the table).
  Vector fallback(std::string_view qid) const {
    std::uint64_t state = fnv1a(qid) ^ (init_seed_ * 0x9e3779b97f4a7c15ULL);
    Vector v(dim_);
    for (auto& x : v) x = init_scale_ * (2.0 * unit_double(splitmix64(state)) - 1.0);
    return v;
  }

  // Base vector or memoized fallback, without deltas.
  Vector base_vector(std::string_view qid) const {
    if (auto it = base_.find(std::string(qid)); it != base_.end()) return it->second;
    const std::string key(qid);
    {
      std::shared_lock lock(mutex_);
      if (auto it = fallbacks_.find(key); it != fallbacks_.end()) return it->second;
    }
    std::unique_lock lock(mutex_);
    auto [it, inserted] = fallbacks_.try_emplace(key);
    if (inserted) it->second = fallback(qid);
    return it->second;
  }

  // Effective vector: base (or fallback) plus delta.
  Vector get(std::string_view qid) const {
    Vector v = base_vector(qid);
    if (auto it = deltas_.find(std::string(qid)); it != deltas_.end()) {
      for (std::size_t i = 0; i < dim_; ++i) v[i] += it->second[i];
    }
    return v;
  }

  const std::map<std::string, Vector>& deltas() const { return deltas_; }

  // Mutable delta, created as zeros on first access. Single writer only.
  Vector& delta(const std::string& qid) {
    auto [it, inserted] = deltas_.try_emplace(qid);
    if (inserted) it->second.assign(dim_, 0.0);
    return it->second;
  }

  void set_deltas(std::map<std::string, Vector> deltas) {
    for (const auto& [q, v] : deltas) {
      if (v.size() != dim_) throw ConfigError("delta for " + q + " has wrong dimension");
    }
    deltas_ = std::move(deltas);
  }

  void clear_deltas() { deltas_.clear(); }

 private:
  std::size_t dim_;
  std::uint64_t init_seed_;
  double init_scale_;
  std::unordered_map<std::string, Vector> base_;
  std::map<std::string, Vector> deltas_;
  mutable std::unordered_map<std::string, Vector> fallbacks_;
  mutable std::shared_mutex mutex_;
};

// word2vec text format: header "N d", then "qid v1 ... vd" per line.
// Pass dim = 0 to accept the header's dimension.
inline EntityEmbeddingStore load_embeddings(std::istream& in, std::size_t dim = 0,
                                            std::uint64_t init_seed = 0,
                                            double init_scale = EntityEmbeddingStore::kDefaultInitScale,
                                            const std::string& source = "<embeddings>") {
  std::string line;
  if (!std::getline(in, line)) throw IngestError(source, 1, "missing header");
  std::istringstream header(line);
  std::size_t count = 0;
  std::size_t file_dim = 0;
  std::string extra;
  if (!(header >> count >> file_dim) || (header >> extra) || file_dim == 0) {
    throw IngestError(source, 1, "header must be 'N d'");
  }
  if (dim != 0 && dim != file_dim) {
    throw ConfigError(source + ": file dimension " + std::to_string(file_dim) +
                      " does not match configured " + std::to_string(dim));
  }
  EntityEmbeddingStore store(file_dim, init_seed, init_scale);
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);
    if (rest.find_first_not_of(' ') == std::string_view::npos) continue;
    auto next_token = [&rest]() -> std::string_view {
      const auto b = rest.find_first_not_of(' ');
      if (b == std::string_view::npos) {
        rest = {};
        return {};
      }
      rest.remove_prefix(b);
      const auto e = rest.find(' ');
      auto tok = rest.substr(0, e);
      rest.remove_prefix(e == std::string_view::npos ? rest.size() : e);
      return tok;
    };
    std::string qid(next_token());
    Vector v;
    v.reserve(file_dim);
    for (auto tok = next_token(); !tok.empty(); tok = next_token()) {
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw IngestError(source, line_no, "bad number '" + std::string(tok) + "'");
      }
      v.push_back(x);
    }
    if (v.size() != file_dim) {
      throw IngestError(source, line_no,
                        "expected " + std::to_string(file_dim) + " values, got " +
                            std::to_string(v.size()));
    }
    store.set_base(std::move(qid), std::move(v));
    ++rows;
  }
  if (rows != count) {
    throw IngestError(source, line_no,
                      "header declares " + std::to_string(count) + " rows, found " +
                          std::to_string(rows));
  }
  return store;
}

inline EntityEmbeddingStore load_embeddings(const std::string& path, std::size_t dim = 0,
                                            std::uint64_t init_seed = 0,
                                            double init_scale = EntityEmbeddingStore::kDefaultInitScale) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_embeddings(in, dim, init_seed, init_scale, path);
}

// Writes base vectors sorted by QID with round-trip precision.
inline void save_embeddings(std::ostream& out, const EntityEmbeddingStore& store) {
  std::map<std::string_view, const Vector*> sorted;
  for (const auto& [q, v] : store.base()) sorted.emplace(q, &v);
  out << sorted.size() << ' ' << store.dim() << '\n';
  char buf[32];
  for (const auto& [q, v] : sorted) {
    out << q;
    for (double x : *v) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

inline void save_embeddings(const std::string& path, const EntityEmbeddingStore& store) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_embeddings(out, store);
}

}  // namespace mboe
