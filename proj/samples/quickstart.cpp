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

// Builds a two-entry knowledge base in memory, detects entities in a short
// document and prints the class probabilities of an untrained model.

#include <iostream>

#include "mboe/mboe.hpp"

int main() {
  using namespace mboe;
  const std::vector<AnchorRecord> anchors{{"apple", "Apple Inc.", 3}, {"apple", "Apple (food)", 1}};
  const std::vector<SitelinkRecord> links{{"en", "Apple Inc.", "Q312"}, {"en", "Apple (food)", "Q89"}};
  const auto dict = build_mention_dictionary(anchors, "en");
  const auto map = build_interlanguage_map(links);

  const Document doc{"d1", "en", "Apple pie", {}, {}, {}};
  const auto bag = detect(doc, dict, map);
  for (const auto& e : bag.items) {
    std::cout << e.qid << "\tp=" << e.commonness << "\t[" << e.begin << ", " << e.end << ")\t"
              << e.mention << '\n';
  }

  const std::size_t dim = 8;
  EntityEmbeddingStore store(dim, /*init_seed=*/1, /*init_scale=*/0.5);
  HashingEncoder encoder;
  encoder.dim = dim;
  TrainConfig cfg;
  const auto model = initial_model(dim, 2, cfg);
  const auto probs = forward(encoder.encode(doc), bag, model, store);
  std::cout << "p(class 0) = " << probs[0] << ", p(class 1) = " << probs[1] << '\n';
}
