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

// mboe: command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <set>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mboe/mboe.hpp"
#include "mboe/synthetic.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (path.empty()) return;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw UsageError("no such file: " + path);
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::vector<std::uint64_t> seed_list(std::size_t n, std::uint64_t first) {
  if (n == 0) throw UsageError("--seeds must be at least 1");
  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = first + i;
  return seeds;
}

// Side file `<out>.manifest.json`. The artifact itself stays free of
// timestamps so reruns are byte-identical.
void write_manifest(const std::string& out, const std::string& command, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::uint64_t>& seeds,
                    std::chrono::steady_clock::time_point started) {
  json checksums = json::object();
  for (const auto& p : inputs) {
    if (!p.empty()) checksums[p] = hex(mboe::file_checksum(p));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json m = {{"command", command},
            {"config", config},
            {"inputs", checksums},
            {"seeds", seeds},
            {"tool_version", std::string(mboe::kVersion)},
            {"wall_clock_seconds", secs},
            {"output", out}};
  std::ofstream f(out + ".manifest.json");
  if (!f) throw std::runtime_error("cannot write " + out + ".manifest.json");
  f << m.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

std::vector<mboe::Document> load_docs(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return mboe::read_documents(in, path);
}

mboe::HeadMode parse_mode(const std::string& s) {
  try {
    return mboe::parse_head_mode(s);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

// Options shared by every command that encodes and detects documents.
struct CorpusFlags {
  std::string kb;
  std::string embeddings;
  std::size_t encoder_dim = 0;  // 0: embedding dimension
  std::uint64_t encoder_seed = 0;
  std::uint64_t fallback_seed = 0;
  double fallback_scale = mboe::EntityEmbeddingStore::kDefaultInitScale;
  bool boundary_aware = false;
  std::size_t max_entities = 0;

  void add(CLI::App* app, bool need_embeddings = true) {
    app->add_option("--kb", kb, "dictionary file from build-dict")->required();
    if (need_embeddings) {
      app->add_option("--embeddings", embeddings, "word2vec text file keyed by QID")->required();
      app->add_option("--fallback-seed", fallback_seed, "seed for vectors of unknown QIDs");
      app->add_option("--fallback-scale", fallback_scale, "range of fallback vectors");
      app->add_option("--encoder-dim", encoder_dim, "hashing encoder width (default: embedding dim)");
      app->add_option("--encoder-seed", encoder_seed, "hashing encoder salt");
    }
    app->add_flag("--boundary-aware", boundary_aware, "only match mentions at word boundaries");
    app->add_option("--max-entities", max_entities, "cap per document, 0 for none");
  }

  mboe::DetectOptions detect() const { return {boundary_aware, max_entities}; }

  json to_json() const {
    return {{"kb", kb},
            {"embeddings", embeddings},
            {"encoder_dim", encoder_dim},
            {"encoder_seed", encoder_seed},
            {"fallback_seed", fallback_seed},
            {"fallback_scale", fallback_scale},
            {"boundary_aware", boundary_aware},
            {"max_entities", max_entities}};
  }
};

struct TrainFlags {
  mboe::TrainConfig cfg;
  std::string mask = "both";
  bool freeze = false;

  void add(CLI::App* app) {
    app->add_option("--lr", cfg.learning_rate, "learning rate");
    app->add_option("--batch-size", cfg.batch_size, "minibatch size");
    app->add_option("--clip", cfg.clip_norm, "global gradient-norm clip");
    app->add_option("--epochs", cfg.max_epochs, "maximum epochs");
    app->add_option("--patience", cfg.patience, "early-stop patience in epochs");
    app->add_option("--weight-decay", cfg.weight_decay, "AdamW weight decay");
    app->add_option("--init-scale", cfg.init_scale, "classifier init range");
    app->add_option("--features", mask, "attention features: both|cosine|commonness|none");
    app->add_flag("--freeze-embeddings", freeze, "keep entity vectors fixed");
  }

  mboe::TrainConfig resolve() const {
    mboe::TrainConfig c = cfg;
    try {
      c.feature_mask = mboe::parse_feature_mask(mask);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    c.embeddings_trainable = !freeze;
    c.validate();
    return c;
  }
};

struct Resources {
  mboe::KnowledgeBase kb;
  mboe::EntityEmbeddingStore store{1};
  mboe::HashingEncoder encoder;
};

Resources load_resources(const CorpusFlags& f) {
  require_file(f.kb);
  require_file(f.embeddings);
  Resources r;
  r.kb = mboe::load_knowledge_base(f.kb);
  r.store = mboe::load_embeddings(f.embeddings, 0, f.fallback_seed, f.fallback_scale);
  r.encoder.dim = f.encoder_dim == 0 ? r.store.dim() : f.encoder_dim;
  r.encoder.seed = f.encoder_seed;
  if (r.encoder.dim != r.store.dim()) {
    throw mboe::ConfigError("encoder dimension " + std::to_string(r.encoder.dim) +
                            " differs from embedding dimension " + std::to_string(r.store.dim()));
  }
  return r;
}

void report_skipped(const std::vector<std::string>& skipped) {
  for (const auto& id : skipped) {
    std::cerr << "warning: document " << id << " skipped: no dictionary for its language\n";
  }
  if (!skipped.empty()) std::cerr << "warnings: " << skipped.size() << '\n';
}

std::string source_of(const std::string& given, const std::vector<mboe::Document>& train) {
  if (!given.empty()) return given;
  if (train.empty()) throw UsageError("empty training file");
  return train.front().language;
}

// ---- build-dict -------------------------------------------------------------

struct BuildDictCmd {
  std::vector<std::string> mentions;
  std::string sitelinks;
  std::uint64_t min_count = 1;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--mentions", mentions, "LANG:PATH anchor TSV, repeatable")->required();
    app->add_option("--sitelinks", sitelinks, "LANG<TAB>TITLE<TAB>QID TSV")->required();
    app->add_option("--min-count", min_count, "drop candidates seen fewer times");
    app->add_option("--out", out, "output dictionary file")->required();
  }

  int run(std::chrono::steady_clock::time_point t0) const {
    std::vector<std::pair<std::string, std::string>> specs;
    for (const auto& m : mentions) {
      const auto colon = m.find(':');
      if (colon == std::string::npos || colon == 0) {
        throw UsageError("--mentions expects LANG:PATH, got '" + m + "'");
      }
      specs.emplace_back(m.substr(0, colon), m.substr(colon + 1));
      require_file(specs.back().second);
    }
    require_file(sitelinks);

    mboe::KnowledgeBase kb;
    std::vector<std::string> inputs;
    for (const auto& [lang, path] : specs) {
      if (kb.dictionaries.contains(lang)) throw UsageError("language " + lang + " given twice");
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open " + path);
      kb.dictionaries.emplace(lang, mboe::build_mention_dictionary(in, lang, min_count, path));
      inputs.push_back(path);
    }
    std::size_t conflicts = 0;
    {
      std::ifstream in(sitelinks);
      if (!in) throw std::runtime_error("cannot open " + sitelinks);
      kb.sitelinks = mboe::build_interlanguage_map(
          in,
          [&](const std::string& msg) {
            ++conflicts;
            std::cerr << "warning: " << msg << '\n';
          },
          sitelinks);
      inputs.push_back(sitelinks);
    }
    mboe::save_knowledge_base(out, kb);

    std::cout << "language\tmentions\n";
    for (const auto& [lang, dict] : kb.dictionaries) std::cout << lang << '\t' << dict.size() << '\n';
    std::cout << "sitelinks\t" << kb.sitelinks.size() << '\n';
    if (conflicts) std::cout << "sitelink conflicts\t" << conflicts << '\n';

    write_manifest(out, "build-dict", {{"mentions", mentions}, {"sitelinks", sitelinks},
                                       {"min_count", min_count}},
                   inputs, {}, t0);
    return 0;
  }
};

// ---- detect -----------------------------------------------------------------

struct DetectCmd {
  CorpusFlags corpus;
  std::string docs;
  std::string out;

  void add(CLI::App* app) {
    corpus.add(app, false);
    app->add_option("--docs", docs, "JSONL documents")->required();
    app->add_option("--out", out, "JSONL detections")->required();
  }

  int run(unsigned threads, std::chrono::steady_clock::time_point t0) const {
    require_file(corpus.kb);
    require_file(docs);
    const auto kb = mboe::load_knowledge_base(corpus.kb);
    const auto documents = load_docs(docs);
    const auto bags = mboe::detect_corpus(documents, kb, corpus.detect(), threads);

    auto f = open_out(out);
    std::vector<mboe::Document> kept_docs;
    std::vector<mboe::BagOfEntities> kept_bags;
    std::vector<std::string> skipped;
    for (std::size_t i = 0; i < documents.size(); ++i) {
      if (!bags[i]) {
        skipped.push_back(documents[i].id);
        continue;
      }
      json ents = json::array();
      for (const auto& e : bags[i]->items) {
        ents.push_back({{"qid", e.qid}, {"p", e.commonness}, {"start", e.begin},
                        {"end", e.end}, {"mention", e.mention}});
      }
      f << json{{"id", documents[i].id}, {"lang", documents[i].language}, {"entities", ents}}.dump()
        << '\n';
      kept_docs.push_back(documents[i]);
      kept_bags.push_back(*bags[i]);
    }
    report_skipped(skipped);
    if (!kept_docs.empty()) {
      std::map<std::string, std::size_t> counts;
      for (const auto& d : kept_docs) ++counts[d.language];
      std::cout << "language\tdocs\tmean_entities\n";
      for (const auto& [lang, k] : mboe::detection_stats(kept_docs, kept_bags)) {
        std::cout << lang << '\t' << counts[lang] << '\t' << std::fixed << std::setprecision(2) << k
                  << '\n';
      }
    }
    std::cout << "warnings\t" << skipped.size() << '\n';
    write_manifest(out, "detect", {{"corpus", corpus.to_json()}, {"docs", docs}},
                   {corpus.kb, docs}, {}, t0);
    return 0;
  }
};

// ---- train ------------------------------------------------------------------

struct TrainCmd {
  CorpusFlags corpus;
  TrainFlags tf;
  std::string train_path, val_path, source, mode = "multiclass", entities = "detected", out;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    corpus.add(app);
    tf.add(app);
    app->add_option("--train", train_path, "JSONL training documents")->required();
    app->add_option("--val", val_path, "JSONL validation documents");
    app->add_option("--source", source, "source language (default: first training doc)");
    app->add_option("--mode", mode, "multiclass|multilabel");
    app->add_option("--entities", entities, "detected|gold|none")
        ->check(CLI::IsMember({"detected", "gold", "none"}));
    app->add_option("--seed", seed, "training seed");
    app->add_option("--out", out, "output model file")->required();
  }

  int run(unsigned threads, std::chrono::steady_clock::time_point t0) const {
    const auto head = parse_mode(mode);
    auto tc = tf.resolve();
    tc.seed = seed;
    tc.loss_mode = head;
    require_file(train_path);
    require_file(val_path);
    auto res = load_resources(corpus);
    const auto train_docs = load_docs(train_path);
    const auto val_docs = load_docs(val_path);
    const auto src = source_of(source, train_docs);

    std::vector<std::string> skipped;
    const auto vocab = mboe::LabelVocabulary::from_documents(train_docs);
    const auto c = mboe::make_labeled_corpus(train_docs, val_docs, {}, res.kb, res.encoder, head, src,
                                             {corpus.detect(), threads, true}, vocab, &skipped);
    report_skipped(skipped);
    if (c.train.empty()) throw mboe::ConfigError("no usable training documents");

    mboe::ExperimentConfig ec;
    ec.use_entities = entities != "none";
    ec.use_gold = entities == "gold";
    const auto train_ex = mboe::detail::make_examples(c.train, ec, seed);
    const auto val_ex = mboe::detail::make_examples(c.val, ec, seed);
    auto result = mboe::train(train_ex, val_ex, c.classes, tc, res.store);

    mboe::ModelBundle b;
    b.model = result.model;
    b.labels = vocab.labels();
    b.deltas = res.store.deltas();
    b.embedding_checksum = mboe::file_checksum(corpus.embeddings);
    b.init_seed = corpus.fallback_seed;
    b.init_scale = corpus.fallback_scale;
    b.metadata = {{"source_language", src},
                  {"entities", entities},
                  {"encoder", {{"dim", res.encoder.dim},
                               {"min_n", res.encoder.min_n},
                               {"max_n", res.encoder.max_n},
                               {"seed", res.encoder.seed}}},
                  {"detect", {{"boundary_aware", corpus.boundary_aware},
                              {"max_entities", corpus.max_entities}}},
                  {"train", mboe::to_json(tc)},
                  {"best_epoch", result.history.best_epoch},
                  {"steps", result.history.steps}};
    mboe::save_model(out, b);

    std::cout << "epochs\t" << result.history.train_loss.size() << '\n'
              << "best_epoch\t" << result.history.best_epoch << '\n';
    if (!result.history.val_metric.empty()) {
      std::cout << "best_val\t"
                << *std::max_element(result.history.val_metric.begin(),
                                     result.history.val_metric.end())
                << '\n';
    }
    std::cout << "checksum\t" << hex(mboe::file_checksum(out)) << '\n';
    write_manifest(out, "train",
                   {{"corpus", corpus.to_json()}, {"train", mboe::to_json(tc)}, {"source", src},
                    {"mode", mode}, {"entities", entities}},
                   {corpus.kb, corpus.embeddings, train_path, val_path}, {seed}, t0);
    return 0;
  }
};

// ---- model loading shared by eval and attribute -------------------------------

struct LoadedModel {
  mboe::ModelBundle bundle;
  Resources res;
  mboe::DetectOptions detect;
  std::string source;
  bool use_entities = true;
  bool use_gold = false;
};

LoadedModel load_trained(const std::string& model_path, const std::string& kb,
                         const std::string& embeddings) {
  require_file(model_path);
  require_file(kb);
  require_file(embeddings);
  LoadedModel m;
  m.bundle = mboe::load_model(model_path);
  if (mboe::file_checksum(embeddings) != m.bundle.embedding_checksum) {
    throw mboe::ConfigError("embeddings file " + embeddings +
                            " differs from the one the model was trained with");
  }
  const auto& md = m.bundle.metadata;
  m.res.kb = mboe::load_knowledge_base(kb);
  m.res.store = mboe::load_embeddings(embeddings, m.bundle.model.head.dim, m.bundle.init_seed,
                                      m.bundle.init_scale);
  m.res.store.set_deltas(m.bundle.deltas);
  m.res.encoder.dim = md.at("encoder").at("dim").get<std::size_t>();
  m.res.encoder.min_n = md.at("encoder").at("min_n").get<std::size_t>();
  m.res.encoder.max_n = md.at("encoder").at("max_n").get<std::size_t>();
  m.res.encoder.seed = md.at("encoder").at("seed").get<std::uint64_t>();
  m.detect.boundary_aware = md.at("detect").at("boundary_aware").get<bool>();
  m.detect.max_entities = md.at("detect").at("max_entities").get<std::size_t>();
  m.source = md.at("source_language").get<std::string>();
  const auto ents = md.at("entities").get<std::string>();
  m.use_entities = ents != "none";
  m.use_gold = ents == "gold";
  return m;
}

// ---- eval -------------------------------------------------------------------

struct EvalCmd {
  std::string model, kb, embeddings, test, metric = "auto", out;

  void add(CLI::App* app) {
    app->add_option("--model", model, "model file from train")->required();
    app->add_option("--kb", kb, "dictionary file")->required();
    app->add_option("--embeddings", embeddings, "embeddings the model was trained with")->required();
    app->add_option("--test", test, "JSONL test documents, any languages")->required();
    app->add_option("--metric", metric, "auto|accuracy|micro-f1")
        ->check(CLI::IsMember({"auto", "accuracy", "micro-f1"}));
    app->add_option("--out", out, "JSON report");
  }

  int run(unsigned threads, std::chrono::steady_clock::time_point t0) const {
    auto m = load_trained(model, kb, embeddings);
    const auto mode = m.bundle.model.head.mode;
    if ((metric == "accuracy" && mode != mboe::HeadMode::kMulticlass) ||
        (metric == "micro-f1" && mode != mboe::HeadMode::kMultilabel)) {
      throw UsageError("metric " + metric + " does not fit a " +
                       std::string(mboe::to_string(mode)) + " model");
    }
    require_file(test);
    const auto docs = load_docs(test);
    const mboe::LabelVocabulary vocab(m.bundle.labels);
    std::vector<std::string> skipped;
    const auto c = mboe::make_labeled_corpus({}, {}, docs, m.res.kb, m.res.encoder, mode, m.source,
                                             {m.detect, threads, true}, vocab, &skipped);
    report_skipped(skipped);
    mboe::ExperimentConfig ec;
    ec.use_entities = m.use_entities;
    ec.use_gold = m.use_gold;
    const auto seed = m.bundle.metadata.at("train").at("seed").get<std::uint64_t>();
    const auto ex = mboe::detail::make_examples(c.test, ec, seed);
    std::map<std::string, std::vector<mboe::Example>> by_lang;
    for (std::size_t i = 0; i < c.test.size(); ++i) by_lang[c.test[i].language].push_back(ex[i]);
    const auto scores = mboe::zero_shot_eval(m.bundle.model, m.res.store, by_lang, m.source);

    mboe::EvalReport r;
    r.name = fs::path(model).filename().string();
    r.source_language = m.source;
    r.seeds = {seed};
    for (const auto& [lang, v] : scores.languages) r.languages[lang] = mboe::ScoreSummary::of({v});
    r.target_avg = std::isnan(scores.target_avg) ? mboe::ScoreSummary::of({})
                                                 : mboe::ScoreSummary::of({scores.target_avg});
    r.config_fingerprint = hex(mboe::fnv1a(m.bundle.metadata.dump()));
    r.pairing_fingerprint = mboe::pairing_fingerprint(c, r.seeds);
    const std::vector<mboe::EvalReport> reports{r};
    std::cout << mboe::format_table(reports);
    if (!out.empty()) {
      open_out(out) << mboe::to_json(r).dump(2) << '\n';
      write_manifest(out, "eval", {{"model", model}, {"metric", metric}},
                     {model, kb, embeddings, test}, r.seeds, t0);
    }
    return 0;
  }
};

// ---- analyze ----------------------------------------------------------------

struct ExperimentFlags {
  CorpusFlags corpus;
  TrainFlags tf;
  std::string train_path, val_path, test_path, source, mode = "multiclass", entities = "detected";
  std::size_t seeds = 10;
  std::uint64_t first_seed = 1;

  void add(CLI::App* app) {
    corpus.add(app);
    tf.add(app);
    app->add_option("--train", train_path, "JSONL training documents")->required();
    app->add_option("--val", val_path, "JSONL validation documents");
    app->add_option("--test", test_path, "JSONL test documents")->required();
    app->add_option("--source", source, "source language (default: first training doc)");
    app->add_option("--mode", mode, "multiclass|multilabel");
    app->add_option("--entities", entities, "detected|gold")
        ->check(CLI::IsMember({"detected", "gold"}));
    app->add_option("--seeds", seeds, "number of seeded runs");
    app->add_option("--first-seed", first_seed, "first seed of the run list");
  }

  struct Loaded {
    Resources res;
    mboe::LabeledCorpus corpus;
    mboe::ExperimentConfig base;
    std::vector<std::uint64_t> seeds;
  };

  Loaded load(unsigned threads) const {
    const auto head = parse_mode(mode);
    Loaded l;
    l.base.train = tf.resolve();
    l.base.use_gold = entities == "gold";
    l.seeds = seed_list(seeds, first_seed);
    require_file(train_path);
    require_file(val_path);
    require_file(test_path);
    l.res = load_resources(corpus);
    const auto tr = load_docs(train_path);
    const auto va = load_docs(val_path);
    const auto te = load_docs(test_path);
    std::vector<std::string> skipped;
    l.corpus = mboe::make_labeled_corpus(tr, va, te, l.res.kb, l.res.encoder, head,
                                         source_of(source, tr), {corpus.detect(), threads, true},
                                         std::nullopt, &skipped);
    report_skipped(skipped);
    if (l.corpus.train.empty()) throw mboe::ConfigError("no usable training documents");
    return l;
  }

  std::vector<std::string> inputs() const {
    return {corpus.kb, corpus.embeddings, train_path, val_path, test_path};
  }

  json to_json() const {
    return {{"corpus", corpus.to_json()}, {"train", mboe::to_json(tf.resolve())},
            {"mode", mode}, {"entities", entities}, {"source", source}};
  }
};

struct AblationCmd {
  ExperimentFlags ex;
  std::vector<std::string> variants{"without_attention", "commonness_only", "cosine_only",
                                    "random_vectors", "gold_entities", "text_only"};
  std::string out;

  void add(CLI::App* app) {
    ex.add(app);
    app->add_option("--variants", variants, "ablations to run after the full model")->delimiter(',');
    app->add_option("--out", out, "JSON reports");
  }

  int run(unsigned threads, std::chrono::steady_clock::time_point t0) const {
    std::vector<mboe::Ablation> abl;
    for (const auto& v : variants) {
      try {
        abl.push_back(mboe::parse_ablation(v));
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
    }
    const auto l = ex.load(threads);
    const auto reports = mboe::ablation_run(l.corpus, l.res.store, l.base, abl, l.seeds, threads);
    std::cout << mboe::format_table(reports);
    if (!out.empty()) {
      json arr = json::array();
      for (const auto& r : reports) arr.push_back(mboe::to_json(r));
      open_out(out) << arr.dump(2) << '\n';
      auto cfg = ex.to_json();
      cfg["variants"] = variants;
      write_manifest(out, "analyze ablation", cfg, ex.inputs(), l.seeds, t0);
    }
    return 0;
  }
};

struct SweepCmd {
  ExperimentFlags ex;
  std::vector<double> rates{0.25, 0.5, 0.75, 1.0};
  std::string out;

  void add(CLI::App* app) {
    ex.add(app);
    app->add_option("--rates", rates, "detection keep rates in [0, 1]")->delimiter(',');
    app->add_option("--out", out, "CSV curve (rate,mean,ci)");
  }

  int run(unsigned threads, std::chrono::steady_clock::time_point t0) const {
    for (double r : rates) {
      if (!(r >= 0.0 && r <= 1.0)) throw UsageError("rate outside [0, 1]: " + std::to_string(r));
    }
    const auto l = ex.load(threads);
    const auto curve = mboe::detection_rate_sweep(l.corpus, l.res.store, l.base, rates, l.seeds, threads);
    const auto csv = mboe::sweep_csv(curve);
    if (out.empty()) {
      std::cout << csv;
    } else {
      open_out(out) << csv;
      auto cfg = ex.to_json();
      cfg["rates"] = rates;
      write_manifest(out, "analyze sweep", cfg, ex.inputs(), l.seeds, t0);
      std::cout << csv;
    }
    return 0;
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

struct PearsonCmd {
  std::string input, x = "ent", y = "rate";

  void add(CLI::App* app) {
    app->add_option("--input", input, "CSV with a header row")->required();
    app->add_option("--x", x, "first column");
    app->add_option("--y", y, "second column");
  }

  int run() const {
    require_file(input);
    std::ifstream in(input);
    std::string line;
    if (!std::getline(in, line)) throw mboe::IngestError(input, 1, "missing header");
    const auto header = split_csv(line);
    auto col = [&](const std::string& name) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw UsageError("column '" + name + "' not in " + input);
      return static_cast<std::size_t>(it - header.begin());
    };
    const auto xi = col(x), yi = col(y);
    std::vector<double> xs, ys;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto cells = split_csv(line);
      if (cells.size() <= std::max(xi, yi)) throw mboe::IngestError(input, line_no, "short row");
      // "-" marks a language absent from the row.
      if (cells[xi].empty() || cells[xi] == "-" || cells[yi].empty() || cells[yi] == "-") continue;
      try {
        std::size_t px = 0, py = 0;
        xs.push_back(std::stod(cells[xi], &px));
        ys.push_back(std::stod(cells[yi], &py));
        if (px != cells[xi].size() || py != cells[yi].size()) throw std::invalid_argument("");
      } catch (const std::logic_error&) {
        throw mboe::IngestError(input, line_no, "non-numeric value");
      }
    }
    const double r = mboe::pearson(xs, ys);
    std::cout << "n\t" << xs.size() << "\npearson\t" << std::fixed << std::setprecision(4) << r
              << '\n';
    return 0;
  }
};

struct StatsCmd {
  CorpusFlags corpus;
  std::string docs, out;

  void add(CLI::App* app) {
    corpus.add(app, false);
    app->add_option("--docs", docs, "JSONL documents")->required();
    app->add_option("--out", out, "JSON summary");
  }

  int run(unsigned threads, std::chrono::steady_clock::time_point t0) const {
    require_file(corpus.kb);
    require_file(docs);
    const auto kb = mboe::load_knowledge_base(corpus.kb);
    const auto documents = load_docs(docs);
    const auto bags = mboe::detect_corpus(documents, kb, corpus.detect(), threads);
    struct Acc {
      std::size_t docs = 0, with_entities = 0, total = 0;
      std::set<std::string> distinct;
    };
    std::map<std::string, Acc> acc;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < documents.size(); ++i) {
      if (!bags[i]) {
        ++skipped;
        continue;
      }
      auto& a = acc[documents[i].language];
      ++a.docs;
      a.total += bags[i]->size();
      if (!bags[i]->empty()) ++a.with_entities;
      for (const auto& e : bags[i]->items) a.distinct.insert(e.qid);
    }
    json j = json::object();
    std::cout << "language\tdocs\tmean_entities\tcoverage\tdistinct_qids\n";
    for (const auto& [lang, a] : acc) {
      const double mean_k = static_cast<double>(a.total) / static_cast<double>(a.docs);
      const double cov = static_cast<double>(a.with_entities) / static_cast<double>(a.docs);
      std::cout << lang << '\t' << a.docs << '\t' << std::fixed << std::setprecision(2) << mean_k
                << '\t' << cov << '\t' << a.distinct.size() << '\n';
      j[lang] = {{"docs", a.docs}, {"mean_entities", mean_k}, {"coverage", cov},
                 {"distinct_qids", a.distinct.size()}};
    }
    std::cout << "warnings\t" << skipped << '\n';
    if (!out.empty()) {
      open_out(out) << json{{"languages", j}, {"skipped", skipped}}.dump(2) << '\n';
      write_manifest(out, "analyze stats", {{"corpus", corpus.to_json()}, {"docs", docs}},
                     {corpus.kb, docs}, {}, t0);
    }
    return 0;
  }
};

// ---- attribute --------------------------------------------------------------

struct AttributeCmd {
  std::string model, kb, embeddings, docs, out;
  std::size_t k = 5;

  void add(CLI::App* app) {
    app->add_option("--model", model, "model file from train")->required();
    app->add_option("--kb", kb, "dictionary file")->required();
    app->add_option("--embeddings", embeddings, "embeddings the model was trained with")->required();
    app->add_option("--docs", docs, "JSONL documents")->required();
    app->add_option("-k,--top", k, "entities per document");
    app->add_option("--out", out, "JSONL listing (default: stdout)");
  }

  int run(unsigned threads, std::chrono::steady_clock::time_point t0) const {
    if (k == 0) throw UsageError("--top must be at least 1");
    auto m = load_trained(model, kb, embeddings);
    if (!m.use_entities) throw UsageError("model was trained without entities");
    require_file(docs);
    const auto documents = load_docs(docs);
    const mboe::LabelVocabulary vocab(m.bundle.labels);
    const auto mode = m.bundle.model.head.mode;
    mboe::PrepareOptions po{m.detect, threads, false};
    const auto prepared = mboe::prepare_documents(documents, m.res.kb, m.res.encoder, vocab, mode, po);
    report_skipped(prepared.skipped);

    std::ofstream file;
    if (!out.empty()) file = open_out(out);
    std::ostream& os = out.empty() ? std::cout : file;
    for (const auto& d : prepared.docs) {
      const auto& bag = m.use_gold && d.gold ? *d.gold : d.detected;
      const auto probs = mboe::forward(d.h, bag, m.bundle.model, m.res.store);
      json predicted = json::array();
      for (auto i : mboe::predict(probs, m.bundle.model.head)) predicted.push_back(vocab.name(i));
      json top = json::array();
      if (!bag.empty()) {
        for (const auto& a : mboe::top_entities(m.bundle.model, m.res.store, d.h, bag, k)) {
          top.push_back({{"qid", a.qid}, {"weight", a.weight}, {"mention", a.mention}});
        }
      }
      os << json{{"id", d.id}, {"lang", d.language}, {"predicted", predicted}, {"top", top}}.dump()
         << '\n';
    }
    if (!out.empty()) {
      write_manifest(out, "attribute", {{"model", model}, {"k", k}}, {model, kb, embeddings, docs},
                     {}, t0);
    }
    return 0;
  }
};

// ---- synth ------------------------------------------------------------------

struct SynthCmd {
  mboe::synthetic::Config cfg;
  std::string dir;

  void add(CLI::App* app) {
    app->add_option("--out-dir", dir, "output directory")->required();
    app->add_option("--seed", cfg.seed, "generator seed");
    app->add_option("--source", cfg.source_language, "source language code");
    app->add_option("--target", cfg.target_language, "target language code");
    app->add_option("--dim", cfg.dim, "embedding dimension");
    app->add_option("--topics", cfg.topics, "number of labels");
    app->add_option("--train-docs", cfg.train_docs, "training documents");
    app->add_option("--val-docs", cfg.val_docs, "validation documents");
    app->add_option("--test-docs", cfg.test_docs, "test documents per language");
    app->add_option("--distractor-pool", cfg.distractor_pool, "label-free entities");
    app->add_option("--distractor-mentions", cfg.distractor_mentions, "distractors per document");
    app->add_option("--distractor-norm", cfg.distractor_norm, "distractor vector norm");
    app->add_option("--label-mentions", cfg.label_mentions, "label-topic mentions per document");
    app->add_option("--minority-mentions", cfg.minority_mentions, "other-topic mentions per document");
    app->add_option("--ambiguity", cfg.ambiguity, "chance a mention has two candidates");
  }

  int run() const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
    const auto corpus = mboe::synthetic::generate(cfg);
    const fs::path root(dir);
    for (const auto& [lang, records] : corpus.anchors) {
      auto f = open_out((root / ("mentions_" + lang + ".tsv")).string());
      for (const auto& r : records) f << r.mention << '\t' << r.title << '\t' << r.count << '\n';
    }
    {
      auto f = open_out((root / "sitelinks.tsv").string());
      for (const auto& s : corpus.sitelinks) f << s.language << '\t' << s.title << '\t' << s.qid << '\n';
    }
    mboe::save_embeddings((root / "embeddings.txt").string(), corpus.embeddings);
    auto write = [&](const char* name, const std::vector<mboe::Document>& docs) {
      auto f = open_out((root / name).string());
      mboe::write_documents(f, docs);
    };
    write("train.jsonl", corpus.train);
    write("val.jsonl", corpus.val);
    write("test.jsonl", corpus.test);
    std::cout << "wrote " << corpus.train.size() << " train, " << corpus.val.size() << " val, "
              << corpus.test.size() << " test documents to " << dir << '\n';
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();
  CLI::App app{"Multilingual bag-of-entities text classification"};
  app.set_version_flag("--version", std::string(mboe::kVersion));
  app.set_config("--config", "", "TOML/INI file of option values; flags override it");
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", threads, "worker threads for corpus-parallel stages")
      ->check(CLI::PositiveNumber);

  BuildDictCmd build_dict;
  build_dict.add(app.add_subcommand("build-dict", "build the mention and sitelink dictionaries"));
  DetectCmd detect;
  detect.add(app.add_subcommand("detect", "detect entities in documents"));
  TrainCmd train;
  train.add(app.add_subcommand("train", "train a classifier"));
  EvalCmd eval;
  eval.add(app.add_subcommand("eval", "score a trained model per language"));
  auto* analyze = app.add_subcommand("analyze", "ablations, sweeps and statistics");
  analyze->require_subcommand(1);
  AblationCmd ablation;
  ablation.add(analyze->add_subcommand("ablation", "full model against its ablations"));
  SweepCmd sweep;
  sweep.add(analyze->add_subcommand("sweep", "accuracy as a function of detection rate"));
  PearsonCmd pearson;
  pearson.add(analyze->add_subcommand("pearson", "Pearson correlation of two CSV columns"));
  StatsCmd stats;
  stats.add(analyze->add_subcommand("stats", "per-language detection statistics"));
  AttributeCmd attribute;
  attribute.add(app.add_subcommand("attribute", "top entities by attention weight"));
  SynthCmd synth;
  synth.add(app.add_subcommand("synth", "write a synthetic two-language corpus"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    auto on = [&](const char* name) { return app.got_subcommand(name); };
    if (on("build-dict")) return build_dict.run(t0);
    if (on("detect")) return detect.run(threads, t0);
    if (on("train")) return train.run(threads, t0);
    if (on("eval")) return eval.run(threads, t0);
    if (on("attribute")) return attribute.run(threads, t0);
    if (on("synth")) return synth.run();
    if (analyze->got_subcommand("ablation")) return ablation.run(threads, t0);
    if (analyze->got_subcommand("sweep")) return sweep.run(threads, t0);
    if (analyze->got_subcommand("pearson")) return pearson.run();
    if (analyze->got_subcommand("stats")) return stats.run(threads, t0);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mboe::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
