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

// All-candidate entity detection. Every occurrence of every dictionary
// mention in the normalized text contributes one item per candidate entity
// that has a QID; no disambiguation is attempted. Overlapping and nested
// matches are all kept.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "mboe/documents.hpp"
#include "mboe/errors.hpp"
#include "mboe/hash.hpp"
#include "mboe/kb_dictionary.hpp"
#include "mboe/unicode.hpp"

namespace mboe {

struct DetectedEntity {
  std::string qid;
  double commonness = 0.0;
  // Byte offsets into the original document text, [begin, end).
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string mention;

  bool operator==(const DetectedEntity&) const = default;
};

struct BagOfEntities {
  std::vector<DetectedEntity> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  bool operator==(const BagOfEntities&) const = default;
};

struct DetectOptions {
  // Require matches to start and end next to non-letters (or text edges).
  bool boundary_aware = false;
  // 0 means unlimited. When exceeded, lowest-commonness items are dropped.
  std::size_t max_entities = 0;
};

// Byte-level Aho-Corasick automaton over normalized mention keys.
class MentionMatcher {
 public:
  struct Match {
    std::size_t begin;  // normalized byte offsets
    std::size_t end;
    std::size_t pattern;
  };

  MentionMatcher() { nodes_.push_back({}); }

  std::size_t add(std::string_view pattern) {
    if (pattern.empty()) throw std::invalid_argument("empty pattern");
    std::int32_t node = 0;
    for (unsigned char b : pattern) {
      const auto key = edge_key(node, b);
      auto it = edges_.find(key);
      if (it == edges_.end()) {
        nodes_.push_back({});
        it = edges_.emplace(key, static_cast<std::int32_t>(nodes_.size() - 1)).first;
        nodes_[node].children.push_back(b);
      }
      node = it->second;
    }
    const std::size_t id = lengths_.size();
    nodes_[node].pattern = static_cast<std::int32_t>(id);
    lengths_.push_back(pattern.size());
    compiled_ = false;
    return id;
  }

  void compile() {
    std::vector<std::int32_t> queue;
    for (unsigned char b : nodes_[0].children) {
      const auto child = edges_.at(edge_key(0, b));
      nodes_[child].fail = 0;
      queue.push_back(child);
    }
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const std::int32_t node = queue[qi];
      const std::int32_t f = nodes_[node].fail;
      nodes_[node].output = nodes_[f].pattern >= 0 ? f : nodes_[f].output;
      for (unsigned char b : nodes_[node].children) {
        const auto child = edges_.at(edge_key(node, b));
        nodes_[child].fail = step(f, b);
        queue.push_back(child);
      }
    }
    compiled_ = true;
  }

  std::vector<Match> find_all(std::string_view text) const {
    if (!compiled_) throw std::logic_error("MentionMatcher::compile() not called");
    std::vector<Match> out;
    std::int32_t node = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      node = step(node, static_cast<unsigned char>(text[i]));
      for (std::int32_t n = nodes_[node].pattern >= 0 ? node : nodes_[node].output;
           n > 0; n = nodes_[n].output) {
        const auto p = static_cast<std::size_t>(nodes_[n].pattern);
        out.push_back({i + 1 - lengths_[p], i + 1, p});
      }
    }
    return out;
  }

  std::size_t pattern_count() const { return lengths_.size(); }

 private:
  struct Node {
    std::int32_t fail = 0;
    std::int32_t pattern = -1;
    std::int32_t output = -1;  // nearest proper suffix node that ends a pattern
    std::vector<unsigned char> children;
  };

  static std::uint64_t edge_key(std::int32_t node, unsigned char b) {
    return (static_cast<std::uint64_t>(node) << 8) | b;
  }

  std::int32_t step(std::int32_t node, unsigned char b) const {
    while (true) {
      auto it = edges_.find(edge_key(node, b));
      if (it != edges_.end()) return it->second;
      if (node == 0) return 0;
      node = nodes_[node].fail;
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, std::int32_t> edges_;
  std::vector<std::size_t> lengths_;
  bool compiled_ = false;
};

// Keeps the `cap` highest-commonness items, preserving their order.
inline void cap_entities(BagOfEntities& bag, std::size_t cap) {
  if (cap == 0 || bag.items.size() <= cap) return;
  std::vector<std::size_t> order(bag.items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return bag.items[a].commonness > bag.items[b].commonness;
  });
  order.resize(cap);
  std::sort(order.begin(), order.end());
  std::vector<DetectedEntity> kept;
  kept.reserve(cap);
  for (auto i : order) kept.push_back(std::move(bag.items[i]));
  bag.items = std::move(kept);
}

// Detector for one language, compiled once and shared read-only.
class EntityDetector {
 public:
  EntityDetector(const MentionEntityDictionary& dict, const InterLanguageMap& sitelinks,
                 DetectOptions options = {})
      : language_(dict.language()), options_(options) {
    for (const auto& [key, entry] : dict.entries()) {
      std::vector<Resolved> resolved;
      for (const auto& c : entry.candidates) {
        auto qid = sitelinks.lookup(dict.language(), c.title);
        if (!qid) continue;
        resolved.push_back({std::string(*qid), static_cast<double>(c.count) /
                                                   static_cast<double>(entry.total)});
      }
      if (resolved.empty()) continue;
      matcher_.add(key);
      candidates_.push_back(std::move(resolved));
    }
    matcher_.compile();
  }

  const std::string& language() const { return language_; }
  const DetectOptions& options() const { return options_; }

  BagOfEntities detect(std::string_view text) const {
    const unicode::NormalizedText norm(text);
    const std::string_view ntext = norm.text();
    auto matches = matcher_.find_all(ntext);
    std::sort(matches.begin(), matches.end(), [](const auto& a, const auto& b) {
      return std::tie(a.begin, a.end) < std::tie(b.begin, b.end);
    });
    BagOfEntities bag;
    for (const auto& m : matches) {
      if (options_.boundary_aware && !on_boundaries(ntext, m.begin, m.end)) continue;
      const std::size_t ob = norm.original_begin(m.begin);
      const std::size_t oe = norm.original_end(m.end);
      for (const auto& c : candidates_[m.pattern]) {
        bag.items.push_back({c.qid, c.commonness, ob, oe, std::string(text.substr(ob, oe - ob))});
      }
    }
    cap_entities(bag, options_.max_entities);
    return bag;
  }

  BagOfEntities detect(const Document& doc) const {
    if (doc.language != language_) {
      throw ConfigError("document " + doc.id + " is '" + doc.language +
                        "' but the dictionary is '" + language_ + "'");
    }
    return detect(doc.text);
  }

 private:
  struct Resolved {
    std::string qid;
    double commonness;
  };

  static bool on_boundaries(std::string_view text, std::size_t begin, std::size_t end) {
    if (begin > 0) {
      std::size_t p = begin - 1;
      while (p > 0 && !unicode::is_lead_byte(static_cast<unsigned char>(text[p]))) --p;
      std::size_t q = p;
      if (unicode::is_letter(unicode::next_code_point(text, q))) return false;
    }
    if (end < text.size()) {
      std::size_t q = end;
      if (unicode::is_letter(unicode::next_code_point(text, q))) return false;
    }
    return true;
  }

  std::string language_;
  DetectOptions options_;
  MentionMatcher matcher_;
  std::vector<std::vector<Resolved>> candidates_;
};

inline BagOfEntities detect(const Document& doc, const MentionEntityDictionary& dict,
                            const InterLanguageMap& sitelinks, DetectOptions options = {}) {
  return EntityDetector(dict, sitelinks, options).detect(doc);
}

// Keeps each item independently with probability keep_rate.
inline BagOfEntities subsample(const BagOfEntities& bag, double keep_rate,
                               std::uint64_t seed) {
  if (!(keep_rate >= 0.0 && keep_rate <= 1.0)) {
    throw std::invalid_argument("keep_rate must lie in [0, 1]");
  }
  BagOfEntities out;
  std::uint64_t state = seed;
  for (const auto& item : bag.items) {
    if (unit_double(splitmix64(state)) < keep_rate) out.items.push_back(item);
  }
  return out;
}

// Oracle bag from gold annotations: one item per listed QID, commonness 1.
inline BagOfEntities from_gold(const Document& doc) {
  if (!doc.gold_entities) {
    throw ConfigError("document " + doc.id +
                      " has no gold_entities; use detect() for automatic bags");
  }
  BagOfEntities bag;
  for (const auto& q : *doc.gold_entities) bag.items.push_back({q, 1.0, 0, 0, {}});
  return bag;
}

// Mean number of detected entities per document, per language.
inline std::map<std::string, double> detection_stats(std::span<const Document> docs,
                                                     std::span<const BagOfEntities> bags) {
  if (docs.empty()) throw std::invalid_argument("detection_stats: empty corpus");
  if (docs.size() != bags.size()) throw std::invalid_argument("detection_stats: size mismatch");
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto& [sum, n] = acc[docs[i].language];
    sum += static_cast<double>(bags[i].size());
    ++n;
  }
  std::map<std::string, double> means;
  for (const auto& [lang, v] : acc) means[lang] = v.first / static_cast<double>(v.second);
  return means;
}

// Runs detection over a corpus on `threads` workers. Output order matches
// input order; documents whose language has no dictionary yield nullopt.
inline std::vector<std::optional<BagOfEntities>> detect_corpus(
    std::span<const Document> docs, const KnowledgeBase& kb, DetectOptions options = {},
    unsigned threads = 1) {
  std::map<std::string, EntityDetector, std::less<>> detectors;
  for (const auto& d : docs) {
    if (detectors.contains(d.language)) continue;
    if (const auto* dict = kb.dictionary(d.language)) {
      detectors.emplace(d.language, EntityDetector(*dict, kb.sitelinks, options));
    }
  }
  std::vector<std::optional<BagOfEntities>> out(docs.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < docs.size(); i += stride) {
      auto it = detectors.find(docs[i].language);
      if (it != detectors.end()) out[i] = it->second.detect(docs[i].text);
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return out;
}

}  // namespace mboe
