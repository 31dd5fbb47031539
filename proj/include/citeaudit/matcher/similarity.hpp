#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "citeaudit/common/ratio.hpp"
#include "citeaudit/common/text.hpp"

namespace citeaudit::matcher {

/// Length of the longest common contiguous substring.
inline std::size_t longest_common_substring(std::u32string_view a, std::u32string_view b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  std::size_t best = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

/// Best-matching-substring ratio on already-normalized strings: the longest
/// common substring relative to the shorter string. Equals 1 exactly when the
/// shorter string occurs verbatim inside the longer one.
inline Ratio substring_ratio(std::u32string_view a, std::u32string_view b) {
  const auto shorter = std::min(a.size(), b.size());
  if (shorter == 0) return Ratio(0);
  return Ratio(static_cast<std::int64_t>(longest_common_substring(a, b)),
               static_cast<std::int64_t>(shorter));
}

inline Ratio title_similarity(std::string_view a, std::string_view b) {
  return substring_ratio(text::normalize(a), text::normalize(b));
}

/// Normalized word tokens of one author string ("J. Smith" -> {j, smith}).
inline std::vector<std::u32string> author_tokens(std::string_view author) {
  std::vector<std::u32string> out;
  std::u32string cur;
  for (char32_t c : text::normalize(author)) {
    if (text::is_space(c) || text::is_punct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// True for author lists that end in "et al." or "others".
inline bool has_et_al(const std::vector<std::string>& authors) {
  for (const auto& a : authors) {
    const auto n = text::normalize_utf8(a);
    if (n == "others" || n.find("et al") != std::string::npos) return true;
  }
  return false;
}

/// Token-set partial match: duplicates removed on both sides, then the mean
/// over generated tokens of the best substring ratio against any candidate
/// token. With `et_al`, only the first author of each list is compared.
inline Ratio author_similarity(const std::vector<std::string>& generated,
                               const std::vector<std::string>& candidate, bool et_al = false) {
  auto collect = [](const std::vector<std::string>& names, bool first_only) {
    std::set<std::u32string> tokens;
    for (const auto& name : names) {
      const auto norm = text::normalize_utf8(name);
      if (norm == "others" || norm == "et al" || norm == "et al.") continue;
      for (auto& t : author_tokens(name)) {
        if (t == U"et" || t == U"al") continue;
        tokens.insert(std::move(t));
      }
      if (first_only && !tokens.empty()) break;
    }
    return tokens;
  };
  const bool first_only = et_al || has_et_al(generated);
  const auto gen = collect(generated, first_only);
  const auto cand = collect(candidate, first_only);
  if (gen.empty() || cand.empty()) return Ratio(0);
  Ratio sum(0);
  for (const auto& g : gen) {
    Ratio best(0);
    for (const auto& c : cand) best = std::max(best, substring_ratio(g, c));
    sum = sum + best;
  }
  return sum / Ratio(static_cast<std::int64_t>(gen.size()));
}

}  // namespace citeaudit::matcher
