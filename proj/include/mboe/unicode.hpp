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

// Mention-key normalization: NFKC followed by default case folding, using
// ICU's NFKC_Casefold normalizer (which is closed under re-application).
//
// Document text is normalized in boundary-delimited segments so that every
// byte of the normalized text can be mapped back to a code-point-aligned
// byte range of the original text.

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mboe::unicode {

inline const icu::Normalizer2& folding_normalizer() {
  static const icu::Normalizer2* instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCCasefoldInstance(status);
    if (U_FAILURE(status)) {
      throw std::runtime_error(std::string("ICU NFKC_Casefold unavailable: ") +
                               u_errorName(status));
    }
    return n;
  }();
  return *instance;
}

// Decodes the code point starting at byte `i`, advancing `i`. Ill-formed
// sequences decode to U+FFFD and consume at least one byte.
inline UChar32 next_code_point(std::string_view s, std::size_t& i) {
  int32_t pos = static_cast<int32_t>(i);
  UChar32 c;
  U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), pos,
          static_cast<int32_t>(s.size()), c);
  i = static_cast<std::size_t>(pos);
  return c < 0 ? 0xFFFD : c;
}

inline std::vector<UChar32> code_points(std::string_view s) {
  std::vector<UChar32> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) out.push_back(next_code_point(s, i));
  return out;
}

inline void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

inline bool is_lead_byte(unsigned char b) { return (b & 0xC0) != 0x80; }

inline bool is_letter(UChar32 c) {
  return u_hasBinaryProperty(c, UCHAR_ALPHABETIC) || u_isdigit(c);
}

inline std::string normalize(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  const icu::UnicodeString out = folding_normalizer().normalize(in, status);
  if (U_FAILURE(status)) {
    throw std::runtime_error(std::string("normalization failed: ") +
                             u_errorName(status));
  }
  std::string result;
  out.toUTF8String(result);
  return result;
}

// Normalized view of a document with a map back to original byte offsets.
class NormalizedText {
 public:
  NormalizedText() = default;

  explicit NormalizedText(std::string_view original) {
    const icu::Normalizer2& norm = folding_normalizer();
    std::size_t seg_begin = 0;
    std::size_t i = 0;
    while (i < original.size()) {
      const std::size_t at = i;
      const UChar32 c = next_code_point(original, i);
      if (at > seg_begin && norm.hasBoundaryBefore(c)) {
        push_segment(original, seg_begin, at);
        seg_begin = at;
      }
    }
    if (seg_begin < original.size()) push_segment(original, seg_begin, original.size());
  }

  const std::string& text() const { return text_; }

  // Original byte offset for a match starting at normalized offset `begin`.
  std::size_t original_begin(std::size_t begin) const {
    return segment_for(begin).orig_begin;
  }

  // Original byte offset (exclusive) for a match ending at normalized
  // offset `end` (exclusive, > 0).
  std::size_t original_end(std::size_t end) const {
    return segment_for(end - 1).orig_end;
  }

 private:
  struct Segment {
    std::size_t norm_begin;
    std::size_t orig_begin;
    std::size_t orig_end;
  };

  void push_segment(std::string_view original, std::size_t b, std::size_t e) {
    std::string piece = normalize(original.substr(b, e - b));
    if (piece.empty()) return;
    segments_.push_back({text_.size(), b, e});
    text_ += piece;
  }

  const Segment& segment_for(std::size_t norm_offset) const {
    auto it = std::upper_bound(
        segments_.begin(), segments_.end(), norm_offset,
        [](std::size_t off, const Segment& s) { return off < s.norm_begin; });
    if (it == segments_.begin()) throw std::out_of_range("offset before text");
    return *std::prev(it);
  }

  std::string text_;
  std::vector<Segment> segments_;
};

}  // namespace mboe::unicode
