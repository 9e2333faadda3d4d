#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace roomforge::unicode {

struct CodePointRange {
  char32_t first;
  char32_t last;
};

struct LowerMapping {
  char32_t code_point;
  int length;
  char32_t lower[3];
};

#include "unicode_tables.inc"

inline bool in_ranges(std::span<const CodePointRange> ranges, char32_t cp) {
  auto it = std::upper_bound(ranges.begin(), ranges.end(), cp,
                             [](char32_t v, const CodePointRange& r) { return v < r.first; });
  return it != ranges.begin() && cp <= std::prev(it)->last;
}

// Classes as the CLIP pre-tokenizer pattern sees them (case-insensitive).
inline bool is_letter(char32_t cp) { return in_ranges(kLetterRanges, cp); }
inline bool is_number(char32_t cp) { return in_ranges(kNumberRanges, cp); }
inline bool is_other(char32_t cp) { return in_ranges(kOtherRanges, cp); }
inline bool is_space(char32_t cp) { return in_ranges(kSpaceRanges, cp); }
inline bool is_cased(char32_t cp) { return in_ranges(kCasedRanges, cp); }
inline bool is_case_ignorable(char32_t cp) { return in_ranges(kCaseIgnorableRanges, cp); }

inline const LowerMapping* lower_mapping(char32_t cp) {
  auto it = std::lower_bound(std::begin(kLowerMappings), std::end(kLowerMappings), cp,
                             [](const LowerMapping& m, char32_t v) { return m.code_point < v; });
  return (it != std::end(kLowerMappings) && it->code_point == cp) ? &*it : nullptr;
}

/// Decoded code point with its byte offset in the source.
struct Decoded {
  char32_t cp;
  std::size_t offset;
};

/// Returns false on invalid UTF-8 (overlong forms, surrogates, truncation).
inline bool decode_utf8(std::string_view s, std::vector<Decoded>& out) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    out.push_back({cp, i});
    i += len;
  }
  return true;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace roomforge::unicode
