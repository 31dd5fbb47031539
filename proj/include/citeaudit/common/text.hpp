#pragma once

// UTF-8 helpers and the normalization shared by title/author matching.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace citeaudit::text {

inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      len = 4;
    } else {
      // stray continuation byte: keep as replacement
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
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
  return out;
}

/// Maps precomposed Latin letters to their unaccented base. Returns the input
/// when no mapping is known. Sharp s is expanded by normalize().
inline char32_t strip_accent(char32_t c) {
  struct Range {
    char32_t lo;
    const char* bases;  // one base letter per code point from lo
  };
  // Latin-1 Supplement, uppercase and lowercase letters.
  static constexpr Range kLatin1Upper{0xC0, "AAAAAAACEEEEIIIIDNOOOOO*OUUUUYTs"};
  static constexpr Range kLatin1Lower{0xE0, "aaaaaaaceeeeiiiidnooooo/ouuuuyty"};
  // Latin Extended-A (U+0100..U+017F), pairs upper/lower.
  static constexpr const char* kExtA =
      "AaAaAaCcCcCcCcDdDdEeEeEeEeEeGgGgGgGgHhHhIiIiIiIiIiIiJjKkkLlLlLlLlLlNnNnNnnNnOoOoOoOoRrRrRrSsSsSsSsTtTtTtUuUuUuUuUuUuWwYyYZzZzZzs";
  if (c >= kLatin1Upper.lo && c < kLatin1Upper.lo + 32) {
    const char b = kLatin1Upper.bases[c - kLatin1Upper.lo];
    if (b != '*') return static_cast<char32_t>(b);
    return c;
  }
  if (c >= kLatin1Lower.lo && c < kLatin1Lower.lo + 32) {
    const char b = kLatin1Lower.bases[c - kLatin1Lower.lo];
    if (b != '/') return static_cast<char32_t>(b);
    return c;
  }
  if (c >= 0x100 && c <= 0x17F) {
    return static_cast<char32_t>(kExtA[c - 0x100]);
  }
  return c;
}

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v' || c == 0xA0;
}

inline bool is_punct(char32_t c) {
  if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
  // General punctuation block, quotes and dashes.
  return (c >= 0x2010 && c <= 0x2027) || c == 0xAB || c == 0xBB || c == 0xB7;
}

inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  return c;
}

/// Lowercase, strip accents, collapse whitespace, strip leading/trailing
/// punctuation and whitespace.
inline std::u32string normalize(std::string_view s) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : decode_utf8(s)) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (c == 0xDF) {  // sharp s
      if (pending_space) out.push_back(U' ');
      pending_space = false;
      out += U"ss";
      continue;
    }
    c = to_lower(strip_accent(c));
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  auto strip = [](char32_t c) { return is_space(c) || is_punct(c); };
  while (!out.empty() && strip(out.back())) out.pop_back();
  std::size_t start = 0;
  while (start < out.size() && strip(out[start])) ++start;
  return out.substr(start);
}

inline std::string normalize_utf8(std::string_view s) {
  return encode_utf8(normalize(s));
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool icontains(std::string_view haystack, std::string_view needle) {
  return to_lower_ascii(haystack).find(to_lower_ascii(needle)) != std::string::npos;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return to_lower_ascii(s.substr(0, prefix.size())) == to_lower_ascii(prefix);
}

}  // namespace citeaudit::text
