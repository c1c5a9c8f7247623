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

// Turns raw documents into training/evaluation instances: encoder vector,
// detected (and optionally gold) entity bags, and label indices.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mboe/boe_model.hpp"
#include "mboe/documents.hpp"
#include "mboe/encoder.hpp"
#include "mboe/entity_detection.hpp"
#include "mboe/errors.hpp"
#include "mboe/kb_dictionary.hpp"
#include "mboe/metrics.hpp"

namespace mboe {

class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  }

  static LabelVocabulary from_documents(std::span<const Document> docs) {
    std::vector<std::string> all;
    for (const auto& d : docs) all.insert(all.end(), d.labels.begin(), d.labels.end());
    return LabelVocabulary(std::move(all));
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& name(std::size_t i) const { return labels_.at(i); }

  std::optional<std::size_t> index(const std::string& label) const {
    auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
  }

  LabelSet encode(const Document& doc, HeadMode mode) const {
    LabelSet out;
    for (const auto& l : doc.labels) {
      auto i = index(l);
      if (!i) throw ConfigError("document " + doc.id + " has label '" + l + "' outside the vocabulary");
      out.push_back(*i);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (mode == HeadMode::kMulticlass && out.size() != 1) {
      throw ConfigError("document " + doc.id + " needs exactly one label for multiclass");
    }
    return out;
  }

 private:
  std::vector<std::string> labels_;
};

struct PreparedDoc {
  std::string id;
  std::string language;
  Vector h;
  BagOfEntities detected;
  std::optional<BagOfEntities> gold;
  LabelSet labels;
};

struct PrepareOptions {
  DetectOptions detect;
  unsigned threads = 1;
  bool require_labels = true;
};

struct PrepareResult {
  std::vector<PreparedDoc> docs;
  std::vector<std::string> skipped;  // ids whose language had no dictionary
};

inline PrepareResult prepare_documents(std::span<const Document> docs, const KnowledgeBase& kb,
                                       const HashingEncoder& encoder,
                                       const LabelVocabulary& vocab, HeadMode mode,
                                       const PrepareOptions& options = {}) {
  auto bags = detect_corpus(docs, kb, options.detect, options.threads);
  PrepareResult r;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const Document& d = docs[i];
    if (!bags[i]) {
      r.skipped.push_back(d.id);
      continue;
    }
    PreparedDoc p;
    p.id = d.id;
    p.language = d.language;
    p.h = encoder.encode(d);
    p.detected = std::move(*bags[i]);
    if (d.gold_entities) p.gold = from_gold(d);
    if (options.require_labels || !d.labels.empty()) p.labels = vocab.encode(d, mode);
    r.docs.push_back(std::move(p));
  }
  return r;
}

}  // namespace mboe
