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

// Multi-seed zero-shot experiments, ablations, detection-rate sweeps,
// attention attribution, and report formatting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mboe/boe_model.hpp"
#include "mboe/embedding_store.hpp"
#include "mboe/entity_detection.hpp"
#include "mboe/hash.hpp"
#include "mboe/metrics.hpp"
#include "mboe/pipeline.hpp"
#include "mboe/trainer.hpp"

namespace mboe {

struct LabeledCorpus {
  std::string source_language;
  HeadMode mode = HeadMode::kMulticlass;
  std::size_t classes = 0;
  std::vector<PreparedDoc> train;
  std::vector<PreparedDoc> val;
  std::vector<PreparedDoc> test;  // any mix of languages
};

struct ExperimentConfig {
  std::string name = "full";
  TrainConfig train;
  bool use_entities = true;
  bool random_embeddings = false;
  bool use_gold = false;
  double keep_rate = 1.0;  // applied to training and test bags alike

  nlohmann::json to_json() const {
    return {{"name", name},
            {"train", mboe::to_json(train)},
            {"use_entities", use_entities},
            {"random_embeddings", random_embeddings},
            {"use_gold", use_gold},
            {"keep_rate", keep_rate}};
  }
};

struct ScoreSummary {
  std::vector<double> per_seed;
  double mean = 0.0;
  double ci95 = std::nan("");

  static ScoreSummary of(std::vector<double> values) {
    ScoreSummary s;
    s.per_seed = std::move(values);
    if (!s.per_seed.empty()) s.mean = mboe::mean(s.per_seed);
    s.ci95 = ci95_half_width(s.per_seed);
    return s;
  }
};

struct EvalReport {
  std::string name;
  std::string source_language;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, ScoreSummary> languages;
  ScoreSummary target_avg;
  std::string config_fingerprint;
  // Hash of the seed list and corpus shape; equal across paired variants.
  std::string pairing_fingerprint;
};

// Encodes, detects and label-indexes the three splits. The label vocabulary
// comes from the training split unless given.
inline LabeledCorpus make_labeled_corpus(std::span<const Document> train_docs,
                                         std::span<const Document> val_docs,
                                         std::span<const Document> test_docs, const KnowledgeBase& kb,
                                         const HashingEncoder& encoder, HeadMode mode,
                                         std::string source_language,
                                         const PrepareOptions& options = {},
                                         std::optional<LabelVocabulary> vocab = std::nullopt,
                                         std::vector<std::string>* skipped = nullptr) {
  if (!vocab) vocab = LabelVocabulary::from_documents(train_docs);
  LabeledCorpus c;
  c.source_language = std::move(source_language);
  c.mode = mode;
  c.classes = vocab->size();
  auto run = [&](std::span<const Document> docs, std::vector<PreparedDoc>& out) {
    auto r = prepare_documents(docs, kb, encoder, *vocab, mode, options);
    out = std::move(r.docs);
    if (skipped) skipped->insert(skipped->end(), r.skipped.begin(), r.skipped.end());
  };
  run(train_docs, c.train);
  run(val_docs, c.val);
  run(test_docs, c.test);
  return c;
}

// Scores of one trained model: per language, plus the mean over every
// language other than the source.
struct ZeroShotScores {
  std::map<std::string, double> languages;
  double target_avg = std::nan("");
};

inline ZeroShotScores zero_shot_eval(const BoEModel& model, const EntityEmbeddingStore& store,
                                     const std::map<std::string, std::vector<Example>>& by_language,
                                     const std::string& source_language) {
  ZeroShotScores s;
  double sum = 0.0;
  std::size_t targets = 0;
  for (const auto& [lang, examples] : by_language) {
    if (examples.empty()) continue;
    const double v = evaluate(examples, model, store);
    s.languages[lang] = v;
    if (lang != source_language) {
      sum += v;
      ++targets;
    }
  }
  if (targets > 0) s.target_avg = sum / static_cast<double>(targets);
  return s;
}

namespace detail {

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b * 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

inline BagOfEntities select_bag(const PreparedDoc& doc, const ExperimentConfig& cfg,
                                std::uint64_t seed) {
  if (!cfg.use_entities) return {};
  if (cfg.use_gold && !doc.gold) throw ConfigError("document " + doc.id + " has no gold entities");
  const BagOfEntities& bag = cfg.use_gold ? *doc.gold : doc.detected;
  if (cfg.keep_rate >= 1.0) return bag;
  return subsample(bag, cfg.keep_rate, mix_seed(seed, fnv1a(doc.id)));
}

inline std::vector<Example> make_examples(std::span<const PreparedDoc> docs,
                                          const ExperimentConfig& cfg, std::uint64_t seed) {
  std::vector<Example> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back({d.h, select_bag(d, cfg, seed), d.labels});
  return out;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
}

}  // namespace detail

inline std::string pairing_fingerprint(const LabeledCorpus& corpus,
                                       std::span<const std::uint64_t> seeds) {
  std::uint64_t h = kFnvOffset;
  for (auto s : seeds) h = fnv1a(std::to_string(s) + ",", h);
  for (const auto* split : {&corpus.train, &corpus.val, &corpus.test}) {
    h = fnv1a("|" + std::to_string(split->size()), h);
    for (const auto& d : *split) h = fnv1a(d.id + "\n", h);
  }
  return detail::hex64(h);
}

// Result of a single seeded run, kept for callers that need the model.
struct SeedRun {
  std::uint64_t seed = 0;
  BoEModel model;
  ZeroShotScores scores;
  TrainHistory history;
};

inline SeedRun run_seed(const LabeledCorpus& corpus, const EntityEmbeddingStore& embeddings,
                        const ExperimentConfig& cfg, std::uint64_t seed) {
  EntityEmbeddingStore store = cfg.random_embeddings
                                   ? EntityEmbeddingStore(embeddings.dim(), embeddings.init_seed(),
                                                          embeddings.init_scale())
                                   : embeddings;
  store.clear_deltas();
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.loss_mode = corpus.mode;
  const auto train_ex = detail::make_examples(corpus.train, cfg, seed);
  const auto val_ex = detail::make_examples(corpus.val, cfg, seed);
  auto result = train(train_ex, val_ex, corpus.classes, tc, store);

  std::map<std::string, std::vector<Example>> by_lang;
  const auto test_ex = detail::make_examples(corpus.test, cfg, seed);
  for (std::size_t i = 0; i < corpus.test.size(); ++i) {
    by_lang[corpus.test[i].language].push_back(test_ex[i]);
  }
  SeedRun run;
  run.seed = seed;
  run.scores = zero_shot_eval(result.model, store, by_lang, corpus.source_language);
  run.model = std::move(result.model);
  run.history = std::move(result.history);
  return run;
}

inline EvalReport run_experiment(const LabeledCorpus& corpus, const EntityEmbeddingStore& embeddings,
                                 const ExperimentConfig& cfg, std::span<const std::uint64_t> seeds,
                                 unsigned threads = 1) {
  if (corpus.train.empty()) throw std::invalid_argument("run_experiment: empty training split");
  std::vector<std::uint64_t> sorted(seeds.begin(), seeds.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<ZeroShotScores> scores(sorted.size());
  detail::parallel_for(sorted.size(), threads, [&](std::size_t i) {
    scores[i] = run_seed(corpus, embeddings, cfg, sorted[i]).scores;
  });

  EvalReport report;
  report.name = cfg.name;
  report.source_language = corpus.source_language;
  report.seeds = sorted;
  std::map<std::string, std::vector<double>> per_lang;
  std::vector<double> target;
  for (const auto& s : scores) {
    for (const auto& [lang, v] : s.languages) per_lang[lang].push_back(v);
    if (!std::isnan(s.target_avg)) target.push_back(s.target_avg);
  }
  for (auto& [lang, vs] : per_lang) report.languages[lang] = ScoreSummary::of(std::move(vs));
  report.target_avg = ScoreSummary::of(std::move(target));
  report.config_fingerprint = detail::hex64(fnv1a(cfg.to_json().dump()));
  report.pairing_fingerprint = pairing_fingerprint(corpus, sorted);
  return report;
}

enum class Ablation {
  kWithoutAttention,
  kCommonnessOnly,
  kCosineOnly,
  kRandomVectors,
  kGoldEntities,
  kTextOnly,
};

inline std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kWithoutAttention: return "without_attention";
    case Ablation::kCommonnessOnly: return "commonness_only";
    case Ablation::kCosineOnly: return "cosine_only";
    case Ablation::kRandomVectors: return "random_vectors";
    case Ablation::kGoldEntities: return "gold_entities";
    case Ablation::kTextOnly: return "text_only";
  }
  return "?";
}

inline Ablation parse_ablation(std::string_view s) {
  for (auto a : {Ablation::kWithoutAttention, Ablation::kCommonnessOnly, Ablation::kCosineOnly,
                 Ablation::kRandomVectors, Ablation::kGoldEntities, Ablation::kTextOnly}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown ablation '" + std::string(s) + "'");
}

inline ExperimentConfig apply_ablation(ExperimentConfig cfg, Ablation a) {
  cfg.name = std::string(to_string(a));
  switch (a) {
    case Ablation::kWithoutAttention: cfg.train.feature_mask = FeatureMask::kNone; break;
    case Ablation::kCommonnessOnly: cfg.train.feature_mask = FeatureMask::kCommonnessOnly; break;
    case Ablation::kCosineOnly: cfg.train.feature_mask = FeatureMask::kCosineOnly; break;
    case Ablation::kRandomVectors: cfg.random_embeddings = true; break;
    case Ablation::kGoldEntities: cfg.use_gold = true; break;
    case Ablation::kTextOnly: cfg.use_entities = false; break;
  }
  return cfg;
}

// Full model first, then one report per variant, all on the same seeds.
inline std::vector<EvalReport> ablation_run(const LabeledCorpus& corpus,
                                            const EntityEmbeddingStore& embeddings,
                                            const ExperimentConfig& base,
                                            std::span<const Ablation> variants,
                                            std::span<const std::uint64_t> seeds,
                                            unsigned threads = 1) {
  std::vector<EvalReport> out;
  out.push_back(run_experiment(corpus, embeddings, base, seeds, threads));
  for (auto v : variants) {
    out.push_back(run_experiment(corpus, embeddings, apply_ablation(base, v), seeds, threads));
  }
  return out;
}

struct SweepPoint {
  double rate = 0.0;
  double mean = 0.0;
  double ci95 = std::nan("");
};

// Target-average metric per detection (keep) rate. Entities are removed
// from training and test bags alike.
inline std::vector<SweepPoint> detection_rate_sweep(const LabeledCorpus& corpus,
                                                    const EntityEmbeddingStore& embeddings,
                                                    const ExperimentConfig& base,
                                                    std::span<const double> rates,
                                                    std::span<const std::uint64_t> seeds,
                                                    unsigned threads = 1) {
  std::vector<SweepPoint> curve;
  for (double rate : rates) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("detection rate outside [0, 1]");
    ExperimentConfig cfg = base;
    cfg.keep_rate = rate;
    cfg.name = "rate=" + std::to_string(rate);
    const auto r = run_experiment(corpus, embeddings, cfg, seeds, threads);
    curve.push_back({rate, r.target_avg.mean, r.target_avg.ci95});
  }
  return curve;
}

struct Attribution {
  std::string qid;
  double weight = 0.0;
  std::string mention;
};

// Top-k bag items by attention weight; ties go to the lexically smaller QID.
inline std::vector<Attribution> top_entities(const BoEModel& model, const EntityEmbeddingStore& store,
                                             std::span<const double> h, const BagOfEntities& bag,
                                             std::size_t k) {
  if (k == 0) throw std::invalid_argument("top_entities: k must be at least 1");
  if (bag.empty()) return {};
  const auto trace = forward_trace(h, bag, model, store);
  std::vector<Attribution> all;
  for (std::size_t i = 0; i < bag.size(); ++i) {
    all.push_back({bag.items[i].qid, trace.attention[i], bag.items[i].mention});
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.qid < b.qid;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

enum class RateMode { kAbsolute, kRelative };

// Improvement of `model` over `baseline`: metric points, or percent of the
// baseline score.
inline double rate_of_improvement(double model, double baseline, RateMode mode = RateMode::kAbsolute) {
  if (mode == RateMode::kAbsolute) return model - baseline;
  if (baseline == 0.0) throw std::domain_error("relative improvement over a zero baseline");
  return 100.0 * (model - baseline) / baseline;
}

// ---- report formatting ----------------------------------------------------

inline nlohmann::json to_json(const ScoreSummary& s) {
  nlohmann::json j = {{"per_seed", s.per_seed}, {"mean", s.mean}};
  j["ci95"] = std::isnan(s.ci95) ? nlohmann::json(nullptr) : nlohmann::json(s.ci95);
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json langs = nlohmann::json::object();
  for (const auto& [l, s] : r.languages) langs[l] = to_json(s);
  return {{"name", r.name},
          {"source_language", r.source_language},
          {"seeds", r.seeds},
          {"languages", langs},
          {"target_avg", to_json(r.target_avg)},
          {"config_fingerprint", r.config_fingerprint},
          {"pairing_fingerprint", r.pairing_fingerprint}};
}

// Aligned plain-text table: one row per report, one column per language
// plus the target average, cells "mean ± ci".
inline std::string format_table(std::span<const EvalReport> reports) {
  std::vector<std::string> langs;
  for (const auto& r : reports) {
    for (const auto& [l, s] : r.languages) {
      if (std::find(langs.begin(), langs.end(), l) == langs.end()) langs.push_back(l);
    }
  }
  std::sort(langs.begin(), langs.end());
  auto cell = [](const ScoreSummary& s) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * s.mean;
    if (!std::isnan(s.ci95)) os << " ± " << std::setprecision(1) << 100.0 * s.ci95;
    return os.str();
  };
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"model"};
  header.insert(header.end(), langs.begin(), langs.end());
  header.push_back("target avg.");
  rows.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.name};
    for (const auto& l : langs) {
      auto it = r.languages.find(l);
      row.push_back(it == r.languages.end() ? "-" : cell(it->second));
    }
    row.push_back(r.target_avg.per_seed.empty() ? "-" : cell(r.target_avg));
    rows.push_back(row);
  }
  // Column widths in code points so "±" does not skew alignment.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
      return unicode::is_lead_byte(static_cast<unsigned char>(c));
    }));
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t pad = widths[c] - width(row[c]);
      if (c == 0) {
        os << row[c] << std::string(pad, ' ');
      } else {
        os << "  " << std::string(pad, ' ') << row[c];
      }
    }
    os << '\n';
  }
  return os.str();
}

inline std::string sweep_csv(std::span<const SweepPoint> curve) {
  std::ostringstream os;
  os << "rate,mean,ci\n";
  for (const auto& p : curve) {
    os << p.rate << ',' << p.mean << ',';
    if (!std::isnan(p.ci95)) os << p.ci95;
    os << '\n';
  }
  return os.str();
}

}  // namespace mboe
