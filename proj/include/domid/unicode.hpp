#pragma once

// Small UTF-8 / script-classification layer for the preprocessing stages.
// Decoding follows the replacement policy: malformed byte sequences become
// U+FFFD, so downstream noise filtering can key off that one codepoint.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace domid::uni {

inline constexpr char32_t kReplacement = 0xFFFD;

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp <= 0x7F) {
    out.push_back(static_cast<char>(cp));
  } else if (cp <= 0x7FF) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp <= 0xFFFF) {
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

inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  const auto cont = [&](std::size_t j) {
    return j < s.size() && (static_cast<unsigned char>(s[j]) & 0xC0) == 0x80;
  };
  while (i < s.size()) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
    } else if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
      const char32_t cp = ((b0 & 0x1Fu) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
      out.push_back(cp >= 0x80 ? cp : kReplacement);
      i += 2;
    } else if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
      const char32_t cp = ((b0 & 0x0Fu) << 12) |
                          ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6) |
                          (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
      const bool surrogate = cp >= 0xD800 && cp <= 0xDFFF;
      out.push_back(cp >= 0x800 && !surrogate ? cp : kReplacement);
      i += 3;
    } else if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
      const char32_t cp = ((b0 & 0x07u) << 18) |
                          ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12) |
                          ((static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6) |
                          (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
      out.push_back(cp >= 0x10000 && cp <= 0x10FFFF ? cp : kReplacement);
      i += 4;
    } else {
      out.push_back(kReplacement);
      ++i;
    }
  }
  return out;
}

inline std::string encode_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

inline bool is_whitespace(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case 0x0B: case 0x0C:
    case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

inline bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  if (cp >= 0x00A1 && cp <= 0x00BF) return true;   // Latin-1 punctuation/symbols
  if (cp == 0x0964 || cp == 0x0965) return true;   // danda / double danda
  if (cp >= 0x2010 && cp <= 0x205E) return true;   // general punctuation
  if (cp >= 0x2E00 && cp <= 0x2E7F) return true;   // supplemental punctuation
  if (cp >= 0x3001 && cp <= 0x303F) return true;   // CJK symbols
  if (cp >= 0xFF01 && cp <= 0xFF0F) return true;   // fullwidth ASCII punctuation
  if (cp >= 0xFF1A && cp <= 0xFF20) return true;
  return false;
}

inline bool is_latin_letter(char32_t cp) {
  if ((cp >= U'A' && cp <= U'Z') || (cp >= U'a' && cp <= U'z')) return true;
  if (cp >= 0x00C0 && cp <= 0x024F) return cp != 0x00D7 && cp != 0x00F7;
  if (cp >= 0x1E00 && cp <= 0x1EFF) return true;  // Latin extended additional
  return false;
}

inline bool is_telugu(char32_t cp) { return cp >= 0x0C00 && cp <= 0x0C7F; }

inline bool is_devanagari(char32_t cp) { return cp >= 0x0900 && cp <= 0x097F; }

// Split on Unicode whitespace; empty fields never emitted.
inline std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  const std::u32string cps = decode_utf8(text);
  std::string cur;
  for (char32_t cp : cps) {
    if (is_whitespace(cp)) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      append_utf8(cur, cp);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace domid::uni
