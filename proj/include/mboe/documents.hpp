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

// Document records and their JSONL encoding:
//   {"id": "...", "lang": "en", "text": "...", "labels": ["..."],
//    "vector": [0.1, ...], "gold_entities": ["Q312", ...]}
// `labels`, `vector`, and `gold_entities` are optional.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mboe/errors.hpp"
#include "mboe/kb_dictionary.hpp"

namespace mboe {

struct Document {
  std::string id;
  std::string language;
  std::string text;
  std::vector<std::string> labels;
  std::optional<std::vector<double>> encoder_vector;
  std::optional<std::vector<std::string>> gold_entities;
};

inline Document document_from_json(const nlohmann::json& j) {
  Document doc;
  doc.id = j.at("id").get<std::string>();
  doc.language = j.at("lang").get<std::string>();
  doc.text = j.value("text", std::string());
  if (j.contains("labels")) doc.labels = j.at("labels").get<std::vector<std::string>>();
  if (j.contains("vector")) doc.encoder_vector = j.at("vector").get<std::vector<double>>();
  if (j.contains("gold_entities")) {
    auto gold = j.at("gold_entities").get<std::vector<std::string>>();
    for (const auto& q : gold) {
      if (!is_qid(q)) throw ConfigError("malformed gold QID '" + q + "'");
    }
    doc.gold_entities = std::move(gold);
  }
  return doc;
}

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  j["lang"] = doc.language;
  j["text"] = doc.text;
  if (!doc.labels.empty()) j["labels"] = doc.labels;
  if (doc.encoder_vector) j["vector"] = *doc.encoder_vector;
  if (doc.gold_entities) j["gold_entities"] = *doc.gold_entities;
  return j;
}

inline std::vector<Document> read_documents(std::istream& in,
                                            const std::string& source = "<documents>") {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(document_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw IngestError(source, line_no, e.what());
    }
  }
  return docs;
}

inline void write_documents(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& d : docs) out << document_to_json(d).dump() << '\n';
}

}  // namespace mboe
