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

// Stand-in text encoder: hashed character n-gram counts, salted per
// language, L2-normalized. The salt makes surface features of different
// languages land in unrelated buckets.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "mboe/documents.hpp"
#include "mboe/embedding_store.hpp"
#include "mboe/errors.hpp"
#include "mboe/hash.hpp"
#include "mboe/unicode.hpp"

namespace mboe {

struct HashingEncoder {
  std::size_t dim = 768;
  std::size_t min_n = 3;
  std::size_t max_n = 5;
  std::uint64_t seed = 0;

  Vector encode(std::string_view text, std::string_view language) const {
    Vector h(dim, 0.0);
    if (text.empty()) return h;
    // Padding gives every nonempty text at least one n-gram.
    std::string padded = " ";
    padded += unicode::normalize(text);
    padded += ' ';
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < padded.size();) {
      starts.push_back(i);
      unicode::next_code_point(padded, i);
    }
    starts.push_back(padded.size());
    const std::size_t chars = starts.size() - 1;

    std::uint64_t salt_state = seed;
    const std::uint64_t salt = fnv1a(language, splitmix64(salt_state));
    for (std::size_t n = min_n; n <= max_n; ++n) {
      for (std::size_t i = 0; i + n <= chars; ++i) {
        const std::string_view gram(padded.data() + starts[i], starts[i + n] - starts[i]);
        h[fnv1a(gram, salt) % dim] += 1.0;
      }
    }
    if (chars < min_n) {
      h[fnv1a(padded, salt) % dim] += 1.0;
    }
    const double n = norm2(h);
    for (auto& x : h) x /= n;
    return h;
  }

  // Precomputed vectors pass through unchanged.
  Vector encode(const Document& doc) const {
    if (doc.encoder_vector) {
      if (doc.encoder_vector->size() != dim) {
        throw ConfigError("document " + doc.id + " vector has dimension " +
                          std::to_string(doc.encoder_vector->size()) + ", expected " +
                          std::to_string(dim));
      }
      return *doc.encoder_vector;
    }
    return encode(doc.text, doc.language);
  }
};

}  // namespace mboe
