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

// Trains on a generated source-language corpus and scores the target
// language, with and without entities.

#include <iostream>

#include "mboe/mboe.hpp"
#include "mboe/synthetic.hpp"

int main() {
  using namespace mboe;
  synthetic::Config sc;
  const auto corpus = synthetic::generate(sc);
  HashingEncoder encoder;
  encoder.dim = sc.dim;
  PrepareOptions options;
  options.detect.boundary_aware = true;
  const auto labeled = make_labeled_corpus(corpus.train, corpus.val, corpus.test,
                                           corpus.knowledge_base(), encoder, HeadMode::kMulticlass,
                                           sc.source_language, options, LabelVocabulary(corpus.labels));

  ExperimentConfig cfg;
  cfg.train.learning_rate = 0.01;
  cfg.train.max_epochs = 40;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const std::vector<Ablation> variants{Ablation::kWithoutAttention, Ablation::kTextOnly};
  const auto reports = ablation_run(labeled, corpus.embeddings, cfg, variants, seeds);
  std::cout << format_table(reports);
}
