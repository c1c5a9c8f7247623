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

// Generator for a two-language topic-classification corpus whose labels are
// determined by the entities mentioned in each document. Surface forms are
// pseudo-words, Latin-script for the source language and Cyrillic for the
// target, so text features cannot transfer but entity identities do.

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mboe/documents.hpp"
#include "mboe/embedding_store.hpp"
#include "mboe/hash.hpp"
#include "mboe/kb_dictionary.hpp"

namespace mboe::synthetic {

struct Config {
  std::string source_language = "en";
  std::string target_language = "ru";
  std::size_t topics = 4;
  std::size_t entities_per_topic = 12;
  std::size_t distractor_pool = 0;  // label-uninformative entities
  std::size_t train_docs = 500;
  std::size_t val_docs = 100;
  std::size_t test_docs = 500;      // per language
  std::size_t label_mentions = 3;   // mentions of the label topic per doc
  std::size_t minority_mentions = 1;  // each from a distinct other topic
  std::size_t distractor_mentions = 0;
  std::size_t filler_words = 20;
  // Probability that a topic mention is ambiguous: a second candidate from
  // the same topic is attached with the remaining anchor share.
  double ambiguity = 0.3;
  std::uint64_t primary_anchor_count = 6;
  std::uint64_t secondary_anchor_count = 4;
  std::size_t dim = 32;
  double centroid_norm = 1.0;
  double entity_noise = 0.3;
  double distractor_norm = 1.0;
  std::uint64_t seed = 7;
};

struct Corpus {
  std::map<std::string, std::vector<AnchorRecord>> anchors;  // per language
  std::vector<SitelinkRecord> sitelinks;
  EntityEmbeddingStore embeddings{1};
  std::vector<Document> train;  // source language
  std::vector<Document> val;    // source language
  std::vector<Document> test;   // both languages
  std::vector<std::string> labels;
  std::set<std::string> distractor_qids;

  KnowledgeBase knowledge_base() const {
    KnowledgeBase kb;
    for (const auto& [lang, records] : anchors) {
      kb.dictionaries.emplace(lang, build_mention_dictionary(records, lang));
    }
    kb.sitelinks = build_interlanguage_map(sitelinks);
    return kb;
  }
};

class Generator {
 public:
  explicit Generator(Config cfg) : cfg_(std::move(cfg)), state_(cfg_.seed) {}

  Corpus generate() {
    Corpus c;
    c.embeddings = EntityEmbeddingStore(cfg_.dim, cfg_.seed);
    for (std::size_t t = 0; t < cfg_.topics; ++t) c.labels.push_back("topic" + std::to_string(t));

    // Entities: topic members first, then distractors.
    std::vector<Vector> centroids;
    for (std::size_t t = 0; t < cfg_.topics; ++t) centroids.push_back(random_direction(cfg_.centroid_norm));
    topic_entities_.assign(cfg_.topics, {});
    for (std::size_t t = 0; t < cfg_.topics; ++t) {
      for (std::size_t e = 0; e < cfg_.entities_per_topic; ++e) {
        Vector v = centroids[t];
        const Vector noise = random_direction(cfg_.entity_noise);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] += noise[j];
        topic_entities_[t].push_back(add_entity(c, std::move(v)));
      }
    }
    for (std::size_t e = 0; e < cfg_.distractor_pool; ++e) {
      distractors_.push_back(add_entity(c, random_direction(cfg_.distractor_norm)));
      c.distractor_qids.insert(entities_[distractors_.back()].qid);
    }

    // Dictionaries: one surface form per entity and language.
    for (const auto& lang : {cfg_.source_language, cfg_.target_language}) {
      auto& records = c.anchors[lang];
      for (std::size_t t = 0; t < cfg_.topics; ++t) {
        const auto& members = topic_entities_[t];
        for (std::size_t e = 0; e < members.size(); ++e) {
          const Entity& ent = entities_[members[e]];
          const std::string& mention = surface(lang, members[e]);
          records.push_back({mention, title(lang, ent), cfg_.primary_anchor_count});
          if (uniform() < cfg_.ambiguity && members.size() > 1) {
            const Entity& other = entities_[members[(e + 1 + below(members.size() - 1)) % members.size()]];
            records.push_back({mention, title(lang, other), cfg_.secondary_anchor_count});
          }
        }
      }
      for (auto d : distractors_) {
        records.push_back({surface(lang, d), title(lang, entities_[d]),
                           cfg_.primary_anchor_count + cfg_.secondary_anchor_count});
      }
      for (const auto& ent : entities_) c.sitelinks.push_back({lang, title(lang, ent), ent.qid});
      for (std::size_t i = 0; i < 400; ++i) filler_[lang].push_back(fresh_word(lang));
    }

    for (std::size_t i = 0; i < cfg_.train_docs; ++i) c.train.push_back(document("train", i, cfg_.source_language));
    for (std::size_t i = 0; i < cfg_.val_docs; ++i) c.val.push_back(document("val", i, cfg_.source_language));
    for (const auto& lang : {cfg_.source_language, cfg_.target_language}) {
      for (std::size_t i = 0; i < cfg_.test_docs; ++i) c.test.push_back(document("test", i, lang));
    }
    return c;
  }

 private:
  struct Entity {
    std::string qid;
    std::size_t index;
  };

  std::size_t add_entity(Corpus& c, Vector v) {
    const std::size_t i = entities_.size();
    entities_.push_back({"Q" + std::to_string(100000 + i), i});
    c.embeddings.set_base(entities_.back().qid, std::move(v));
    return i;
  }

  static std::string title(const std::string& lang, const Entity& e) {
    return lang + ":Title" + std::to_string(e.index);
  }

  const std::string& surface(const std::string& lang, std::size_t entity) {
    auto& forms = surfaces_[lang];
    if (forms.size() <= entity) forms.resize(entity + 1);
    if (forms[entity].empty()) forms[entity] = fresh_word(lang);
    return forms[entity];
  }

  std::string fresh_word(const std::string& lang) {
    static const std::vector<std::string> latin{"ka", "ro", "mi", "tu", "se", "la", "no", "vi", "da",
                                                "pe", "zo", "ri", "gu", "fa", "le", "bo", "xi", "wa"};
    static const std::vector<std::string> cyrillic{"ка", "ро", "ми", "ту", "се", "ла", "но", "ви", "да",
                                                   "пе", "зо", "ри", "гу", "фа", "ле", "бо", "жи", "ша"};
    const auto& syllables = lang == cfg_.source_language ? latin : cyrillic;
    while (true) {
      std::string w;
      const std::size_t n = 3 + below(3);
      for (std::size_t i = 0; i < n; ++i) w += syllables[below(syllables.size())];
      if (used_.insert(w).second) return w;
    }
  }

  Document document(const std::string& split, std::size_t i, const std::string& lang) {
    Document d;
    d.id = split + "-" + lang + "-" + std::to_string(i);
    d.language = lang;
    const std::size_t label = below(cfg_.topics);
    d.labels = {"topic" + std::to_string(label)};
    std::vector<std::string> words;
    std::vector<std::string> gold;
    auto mention = [&](std::size_t entity) {
      words.push_back(surface(lang, entity));
      gold.push_back(entities_[entity].qid);
    };
    for (std::size_t m = 0; m < cfg_.label_mentions; ++m) mention(pick(topic_entities_[label]));
    std::vector<std::size_t> others;
    for (std::size_t t = 0; t < cfg_.topics; ++t) {
      if (t != label) others.push_back(t);
    }
    for (std::size_t m = 0; m < cfg_.minority_mentions && !others.empty(); ++m) {
      const std::size_t k = below(others.size());
      mention(pick(topic_entities_[others[k]]));
      others.erase(others.begin() + static_cast<std::ptrdiff_t>(k));
    }
    for (std::size_t m = 0; m < cfg_.distractor_mentions && !distractors_.empty(); ++m) {
      mention(pick(distractors_));
    }
    for (std::size_t m = 0; m < cfg_.filler_words; ++m) words.push_back(filler_[lang][below(filler_[lang].size())]);
    // Fisher-Yates so mentions land anywhere in the text.
    for (std::size_t k = words.size(); k > 1; --k) std::swap(words[k - 1], words[below(k)]);
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (k) d.text += ' ';
      d.text += words[k];
    }
    d.gold_entities = std::move(gold);
    return d;
  }

  std::size_t pick(const std::vector<std::size_t>& pool) { return pool[below(pool.size())]; }
  double uniform() { return unit_double(splitmix64(state_)); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(splitmix64(state_) % n); }

  double gaussian() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vector random_direction(double length) {
    Vector v(cfg_.dim);
    for (auto& x : v) x = gaussian();
    const double n = norm2(v);
    for (auto& x : v) x *= length / n;
    return v;
  }

  Config cfg_;
  std::uint64_t state_;
  std::vector<Entity> entities_;
  std::vector<std::vector<std::size_t>> topic_entities_;
  std::vector<std::size_t> distractors_;
  std::map<std::string, std::vector<std::string>> surfaces_;
  std::map<std::string, std::vector<std::string>> filler_;
  std::set<std::string> used_;
};

inline Corpus generate(const Config& cfg) { return Generator(cfg).generate(); }

}  // namespace mboe::synthetic
