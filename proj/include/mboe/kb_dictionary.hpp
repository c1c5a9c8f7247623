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

// Mention-entity dictionary (surface form -> candidate Wikipedia titles with
// anchor counts, from which commonness is derived) and the inter-language
// map (language, title) -> Wikidata QID.
//
// Persisted container layout, all integers little-endian:
//
//   "MBOE"                      4 bytes magic
//   u32 version                 = 1
//   u64 dictionary_count
//   repeat dictionary_count:    (sorted by language)
//     str language
//     u64 mention_count
//     repeat mention_count:     (sorted by normalized mention, bytewise)
//       str mention
//       u64 candidate_count
//       repeat candidate_count: (count descending, then title ascending)
//         str title
//         u64 anchor_count
//   u64 sitelink_count
//   repeat sitelink_count:      (sorted by language, then title)
//     str language
//     str title
//     str qid
//
// where str = u32 byte length + UTF-8 bytes.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mboe/binary_io.hpp"
#include "mboe/errors.hpp"
#include "mboe/unicode.hpp"

namespace mboe {

inline constexpr std::string_view kDictionaryMagic = "MBOE";
inline constexpr std::uint32_t kDictionaryVersion = 1;

inline bool is_qid(std::string_view s) {
  return s.size() >= 2 && s[0] == 'Q' &&
         std::all_of(s.begin() + 1, s.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

struct AnchorRecord {
  std::string mention;
  std::string title;
  std::uint64_t count = 0;
};

struct SitelinkRecord {
  std::string language;
  std::string title;
  std::string qid;
};

class MentionEntityDictionary {
 public:
  struct Candidate {
    std::string title;
    std::uint64_t count = 0;

    bool operator==(const Candidate&) const = default;
  };

  struct Entry {
    std::vector<Candidate> candidates;
    std::uint64_t total = 0;

    bool operator==(const Entry&) const = default;
  };

  MentionEntityDictionary() = default;
  explicit MentionEntityDictionary(std::string language)
      : language_(std::move(language)) {}

  const std::string& language() const { return language_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, Entry, std::less<>>& entries() const { return entries_; }

  // Lookup by an already-normalized key.
  const Entry* find_normalized(std::string_view key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const Entry* find(std::string_view mention) const {
    return find_normalized(unicode::normalize(mention));
  }

  // anchor_count(mention, title) / total anchors of mention; 0 when the
  // title is not a candidate; nullopt when the mention is unknown.
  std::optional<double> commonness(std::string_view mention,
                                   std::string_view title) const {
    const Entry* e = find(mention);
    if (e == nullptr) return std::nullopt;
    for (const auto& c : e->candidates) {
      if (c.title == title) {
        return static_cast<double>(c.count) / static_cast<double>(e->total);
      }
    }
    return 0.0;
  }

  bool operator==(const MentionEntityDictionary&) const = default;

 private:
  friend class MentionDictionaryBuilder;
  friend MentionEntityDictionary read_mention_dictionary(std::istream&);

  std::string language_;
  std::map<std::string, Entry, std::less<>> entries_;
};

// Streaming single-writer builder. Records may arrive in any order; the
// result does not depend on it.
class MentionDictionaryBuilder {
 public:
  explicit MentionDictionaryBuilder(std::string language)
      : language_(std::move(language)) {}

  void add(std::string_view mention, std::string_view title, std::uint64_t count) {
    std::string key = unicode::normalize(mention);
    if (key.empty() || count == 0) return;
    counts_[std::move(key)][std::string(title)] += count;
  }

  MentionEntityDictionary build(std::uint64_t min_count = 1) && {
    MentionEntityDictionary dict(language_);
    for (auto& [key, titles] : counts_) {
      MentionEntityDictionary::Entry entry;
      for (auto& [title, count] : titles) {
        if (count < std::max<std::uint64_t>(min_count, 1)) continue;
        entry.candidates.push_back({title, count});
        entry.total += count;
      }
      if (entry.candidates.empty()) continue;
      std::stable_sort(entry.candidates.begin(), entry.candidates.end(),
                       [](const auto& a, const auto& b) { return a.count > b.count; });
      dict.entries_.emplace(key, std::move(entry));
    }
    counts_.clear();
    return dict;
  }

 private:
  std::string language_;
  // title maps are ordered so ties in count keep title order after the
  // stable sort above.
  std::map<std::string, std::map<std::string, std::uint64_t>> counts_;
};

inline MentionEntityDictionary build_mention_dictionary(
    std::span<const AnchorRecord> records, std::string language,
    std::uint64_t min_count = 1) {
  MentionDictionaryBuilder builder(std::move(language));
  for (const auto& r : records) builder.add(r.mention, r.title, r.count);
  return std::move(builder).build(min_count);
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

inline std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace detail

// Reads `mention<TAB>title<TAB>count` lines. Blank lines are skipped.
inline MentionEntityDictionary build_mention_dictionary(
    std::istream& in, std::string language, std::uint64_t min_count = 1,
    const std::string& source = "<mentions>") {
  MentionDictionaryBuilder builder(std::move(language));
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::chomp(raw);
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3) {
      throw IngestError(source, line_no,
                        "expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    std::uint64_t count = 0;
    const auto c = fields[2];
    auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), count);
    if (ec != std::errc() || ptr != c.data() + c.size() || c.empty()) {
      throw IngestError(source, line_no, "non-numeric count '" + std::string(c) + "'");
    }
    if (count == 0) throw IngestError(source, line_no, "count must be positive");
    builder.add(fields[0], fields[1], count);
  }
  return std::move(builder).build(min_count);
}

class InterLanguageMap {
 public:
  using Warning = std::function<void(const std::string&)>;
  using TitleMap = std::map<std::string, std::string, std::less<>>;

  // Returns true when an existing mapping was overwritten with a different
  // QID (last write wins).
  bool insert(std::string language, std::string title, std::string qid,
              const Warning& warn = {}) {
    if (!is_qid(qid)) throw ConfigError("malformed QID '" + qid + "'");
    auto& titles = entries_[language];
    auto it = titles.find(title);
    if (it != titles.end()) {
      if (it->second == qid) return false;
      if (warn) {
        warn("conflicting sitelink for (" + language + ", " + title + "): " +
             it->second + " replaced by " + qid);
      }
      it->second = std::move(qid);
      return true;
    }
    titles.emplace(std::move(title), std::move(qid));
    ++size_;
    return false;
  }

  std::optional<std::string_view> lookup(std::string_view language,
                                         std::string_view title) const {
    auto lang = entries_.find(language);
    if (lang == entries_.end()) return std::nullopt;
    auto it = lang->second.find(title);
    if (it == lang->second.end()) return std::nullopt;
    return std::string_view(it->second);
  }

  std::size_t size() const { return size_; }

  // language -> (title -> qid), both levels sorted.
  const std::map<std::string, TitleMap, std::less<>>& entries() const { return entries_; }

  bool operator==(const InterLanguageMap&) const = default;

 private:
  std::map<std::string, TitleMap, std::less<>> entries_;
  std::size_t size_ = 0;
};

inline InterLanguageMap build_interlanguage_map(
    std::span<const SitelinkRecord> records,
    const InterLanguageMap::Warning& warn = {}) {
  InterLanguageMap map;
  for (const auto& r : records) map.insert(r.language, r.title, r.qid, warn);
  return map;
}

// Reads `language<TAB>title<TAB>qid` lines.
inline InterLanguageMap build_interlanguage_map(
    std::istream& in, const InterLanguageMap::Warning& warn = {},
    const std::string& source = "<sitelinks>") {
  InterLanguageMap map;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::chomp(raw);
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3) {
      throw IngestError(source, line_no,
                        "expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    if (!is_qid(fields[2])) {
      throw IngestError(source, line_no, "malformed QID '" + std::string(fields[2]) + "'");
    }
    map.insert(std::string(fields[0]), std::string(fields[1]), std::string(fields[2]), warn);
  }
  return map;
}

// Everything needed for detection: one dictionary per language plus the
// shared sitelink map.
struct KnowledgeBase {
  std::map<std::string, MentionEntityDictionary, std::less<>> dictionaries;
  InterLanguageMap sitelinks;

  const MentionEntityDictionary* dictionary(std::string_view language) const {
    auto it = dictionaries.find(language);
    return it == dictionaries.end() ? nullptr : &it->second;
  }

  bool operator==(const KnowledgeBase&) const = default;
};

inline void write_mention_dictionary(std::ostream& out,
                                     const MentionEntityDictionary& dict) {
  binary::write_string(out, dict.language());
  binary::write_uint<std::uint64_t>(out, dict.size());
  for (const auto& [key, entry] : dict.entries()) {
    binary::write_string(out, key);
    binary::write_uint<std::uint64_t>(out, entry.candidates.size());
    for (const auto& c : entry.candidates) {
      binary::write_string(out, c.title);
      binary::write_uint<std::uint64_t>(out, c.count);
    }
  }
}

inline MentionEntityDictionary read_mention_dictionary(std::istream& in) {
  MentionEntityDictionary dict(binary::read_string(in));
  const auto n = binary::read_count(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string key = binary::read_string(in);
    MentionEntityDictionary::Entry entry;
    const auto m = binary::read_count(in);
    if (m == 0) throw CorruptFileError("mention without candidates");
    for (std::uint64_t j = 0; j < m; ++j) {
      std::string title = binary::read_string(in);
      const auto count = binary::read_uint<std::uint64_t>(in);
      if (count == 0) throw CorruptFileError("zero anchor count");
      entry.total += count;
      entry.candidates.push_back({std::move(title), count});
    }
    if (!dict.entries_.emplace(std::move(key), std::move(entry)).second) {
      throw CorruptFileError("duplicate mention key");
    }
  }
  return dict;
}

inline void save_knowledge_base(std::ostream& out, const KnowledgeBase& kb) {
  binary::write_magic(out, kDictionaryMagic, kDictionaryVersion);
  binary::write_uint<std::uint64_t>(out, kb.dictionaries.size());
  for (const auto& [lang, dict] : kb.dictionaries) write_mention_dictionary(out, dict);
  binary::write_uint<std::uint64_t>(out, kb.sitelinks.size());
  for (const auto& [lang, titles] : kb.sitelinks.entries()) {
    for (const auto& [title, qid] : titles) {
      binary::write_string(out, lang);
      binary::write_string(out, title);
      binary::write_string(out, qid);
    }
  }
}

inline KnowledgeBase load_knowledge_base(std::istream& in) {
  binary::read_magic(in, kDictionaryMagic, kDictionaryVersion);
  KnowledgeBase kb;
  const auto n = binary::read_count(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto dict = read_mention_dictionary(in);
    std::string lang = dict.language();
    kb.dictionaries.emplace(std::move(lang), std::move(dict));
  }
  const auto links = binary::read_count(in);
  for (std::uint64_t i = 0; i < links; ++i) {
    std::string lang = binary::read_string(in);
    std::string title = binary::read_string(in);
    std::string qid = binary::read_string(in);
    if (!is_qid(qid)) throw CorruptFileError("malformed QID in container");
    kb.sitelinks.insert(std::move(lang), std::move(title), std::move(qid));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CorruptFileError("trailing bytes after dictionary container");
  }
  return kb;
}

inline void save_knowledge_base(const std::string& path, const KnowledgeBase& kb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_knowledge_base(out, kb);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline KnowledgeBase load_knowledge_base(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_knowledge_base(in);
}

}  // namespace mboe
