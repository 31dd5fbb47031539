#pragma once

// Bracketed numeric citations: "[1]", "[2,5]", "[4-8]", "[4--8]", "[4–8]".

#include <algorithm>
#include <charconv>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "citeaudit/common/text.hpp"
#include "citeaudit/corpus/types.hpp"

namespace citeaudit::docprep {

struct BracketGroup {
  std::string raw;
  std::set<int> numbers;

  /// Slot-to-reference correspondence is unambiguous.
  bool uniquely_identifying() const { return numbers.size() == 1; }

  friend bool operator==(const BracketGroup&, const BracketGroup&) = default;
};

struct RawReference {
  int number = 0;
  std::string text;

  friend bool operator==(const RawReference&, const RawReference&) = default;
};

/// Upper bound on the span of a single range token; wider ranges are treated
/// as non-citations.
inline constexpr int kMaxRangeSpan = 500;

namespace detail {

inline std::optional<int> parse_positive(std::string_view s) {
  if (s.empty() || s.size() > 6) return std::nullopt;
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1) return std::nullopt;
  return v;
}

/// Replaces en/em dashes and "--" with a single '-'.
inline std::string unify_dashes(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.compare(i, 3, "\xE2\x80\x93") == 0 || s.compare(i, 3, "\xE2\x80\x94") == 0) {
      out.push_back('-');
      i += 2;
    } else if (s[i] == '-' && !out.empty() && out.back() == '-') {
      continue;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Expands the inside of a bracket group. Returns nullopt when any token is
/// not a number or a well-formed ascending range.
inline std::optional<std::set<int>> expand_group(std::string_view inner) {
  const std::string unified = detail::unify_dashes(inner);
  std::set<int> numbers;
  for (const auto& token_raw : text::split(unified, ',')) {
    const std::string token = text::trim(token_raw);
    if (token.empty()) return std::nullopt;
    const auto dash = token.find('-');
    if (dash == std::string::npos) {
      const auto n = detail::parse_positive(token);
      if (!n) return std::nullopt;
      numbers.insert(*n);
      continue;
    }
    const auto lo = detail::parse_positive(text::trim(std::string_view(token).substr(0, dash)));
    const auto hi = detail::parse_positive(text::trim(std::string_view(token).substr(dash + 1)));
    if (!lo || !hi || *hi < *lo || *hi - *lo > kMaxRangeSpan) return std::nullopt;
    for (int k = *lo; k <= *hi; ++k) numbers.insert(k);
  }
  if (numbers.empty()) return std::nullopt;
  return numbers;
}

/// Every numeric bracket group in reading order. Groups with a non-numeric
/// token are dropped whole. When `reference_count` is given, groups citing a
/// number beyond it are dropped too.
inline std::vector<BracketGroup> extract_citations(std::string_view text,
                                                   std::optional<int> reference_count = {}) {
  std::vector<BracketGroup> groups;
  std::size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    const auto close = text.find_first_of("[]", pos + 1);
    if (close == std::string_view::npos) break;
    if (text[close] == '[') {  // nested or unclosed: restart at the inner bracket
      pos = close;
      continue;
    }
    const auto inner = text.substr(pos + 1, close - pos - 1);
    if (auto numbers = expand_group(inner)) {
      if (!reference_count || *numbers->rbegin() <= *reference_count) {
        groups.push_back({std::string(text.substr(pos, close - pos + 1)), std::move(*numbers)});
      }
    }
    pos = close + 1;
  }
  return groups;
}

/// n is uniquely identifiable iff some single-number group contains it.
inline std::set<int> uniquely_identifiable_numbers(const std::vector<BracketGroup>& groups) {
  std::set<int> out;
  for (const auto& g : groups) {
    if (g.uniquely_identifying()) out.insert(*g.numbers.begin());
  }
  return out;
}

inline std::set<int> cited_numbers(const std::vector<BracketGroup>& groups) {
  std::set<int> out;
  for (const auto& g : groups) out.insert(g.numbers.begin(), g.numbers.end());
  return out;
}

struct IntroSelection {
  std::vector<RawReference> references;  // bibliography order
  std::vector<int> dangling;             // cited numbers with no entry
};

/// Keeps the bibliography entries cited by any group. References are assumed
/// numbered 1..N; cited numbers above N are reported, not fatal.
inline IntroSelection select_intro_references(const std::vector<BracketGroup>& groups,
                                              const std::vector<RawReference>& references) {
  const auto cited = cited_numbers(groups);
  IntroSelection sel;
  std::set<int> known;
  for (const auto& r : references) {
    known.insert(r.number);
    if (cited.count(r.number)) sel.references.push_back(r);
  }
  for (int n : cited) {
    if (!known.count(n)) sel.dangling.push_back(n);
  }
  return sel;
}

}  // namespace citeaudit::docprep
