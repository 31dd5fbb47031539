#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstring>
#include <optional>
#include <set>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/text.hpp"
#include "citeaudit/corpus/types.hpp"
#include "citeaudit/corpus/venue.hpp"

namespace citeaudit::llmgate {

enum class Strategy { Vanilla, Iterative };

inline std::string to_string(Strategy s) { return s == Strategy::Vanilla ? "vanilla" : "iterative"; }

inline Strategy strategy_from_string(const std::string& s) {
  if (s == "vanilla") return Strategy::Vanilla;
  if (s == "iterative") return Strategy::Iterative;
  throw ConfigError("unknown strategy '" + s + "'");
}

struct GeneratedReference {
  int citation_number = 0;
  std::string raw_text;
  std::string title;
  std::vector<std::string> authors;
  std::optional<int> author_count;  // unknown when "et al." hides it
  std::optional<int> year;
  Venue venue;
  Strategy source_strategy = Strategy::Vanilla;
  /// Produced by splitting a row labelled with a range or list ("4-8").
  bool range_derived = false;
  /// The author list was truncated with "et al.".
  bool et_al = false;
};

/// A row that could not be attached to a citation number.
struct QuarantinedRow {
  std::string raw;
  std::string reason;
};

struct TableParse {
  std::vector<GeneratedReference> rows;
  std::vector<QuarantinedRow> quarantined;
  std::vector<std::string> anomalies;
};

namespace detail {

inline std::vector<std::string> split_cells(const std::string& line) {
  std::string s = text::trim(line);
  if (!s.empty() && s.front() == '|') s.erase(0, 1);
  if (!s.empty() && s.back() == '|' && (s.size() < 2 || s[s.size() - 2] != '\\')) s.pop_back();
  std::vector<std::string> cells;
  std::string cur;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == '|') {
      cur.push_back('|');
      ++i;
    } else if (s[i] == '|') {
      cells.push_back(text::trim(cur));
      cur.clear();
    } else {
      cur.push_back(s[i]);
    }
  }
  cells.push_back(text::trim(cur));
  return cells;
}

inline bool is_separator_row(const std::vector<std::string>& cells) {
  static const std::regex kSep(R"(^:?-{2,}:?$)");
  bool any = false;
  for (const auto& c : cells) {
    if (c.empty()) continue;
    if (!std::regex_match(c, kSep)) return false;
    any = true;
  }
  return any;
}

enum class Column { Number, Authors, AuthorCount, Title, Year, Venue, Other };

inline Column classify_header(const std::string& raw) {
  const auto h = text::to_lower_ascii(text::trim(raw));
  auto has = [&](const char* k) { return h.find(k) != std::string::npos; };
  if ((has("number") || has("no.") || has("#") || has("count") || has("num")) && has("author")) {
    return Column::AuthorCount;
  }
  if (has("author")) return Column::Authors;
  if (has("title")) return Column::Title;
  if (has("year") || h == "date") return Column::Year;
  if (has("venue") || has("journal") || has("conference") || has("booktitle") || has("published in")) {
    return Column::Venue;
  }
  if (has("citation") || has("number") || has("ref") || h == "#" || h == "no" || h == "no." ||
      h == "n" || h == "id" || h == "index") {
    return Column::Number;
  }
  return Column::Other;
}

inline std::string strip_markup(std::string s) {
  for (const char* m : {"**", "__", "`"}) {
    std::string::size_type pos;
    while ((pos = s.find(m)) != std::string::npos) s.erase(pos, std::strlen(m));
  }
  s = text::trim(s);
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '*' && s.back() == '*') ||
                        (s.front() == '_' && s.back() == '_'))) {
    s = text::trim(s.substr(1, s.size() - 2));
  }
  return s;
}

inline bool is_ellipsis(const std::string& cell) {
  const auto t = text::trim(cell);
  return t.empty() || t == "..." || t == "\xE2\x80\xA6" || t == "-" || t == "\xE2\x80\x94";
}

/// "7", "[7]", "4-8", "4–8", "2, 5". Empty result means not a citation label.
inline std::vector<int> parse_number_label(const std::string& cell, bool& ranged) {
  std::string s = cell;
  for (const char* dash : {"\xE2\x80\x93", "\xE2\x80\x94", "--"}) {
    std::string::size_type pos;
    while ((pos = s.find(dash)) != std::string::npos) s.replace(pos, std::strlen(dash), "-");
  }
  s = text::trim(s);
  if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  static const std::regex kSingle(R"(^\s*(\d+)\s*\.?\s*$)");
  static const std::regex kRange(R"(^\s*(\d+)\s*-\s*(\d+)\s*$)");
  std::smatch m;
  ranged = false;
  if (std::regex_match(s, m, kSingle)) return {std::stoi(m[1])};
  if (std::regex_match(s, m, kRange)) {
    const int a = std::stoi(m[1]), b = std::stoi(m[2]);
    if (a < 1 || b < a || b - a > 500) return {};
    ranged = true;
    std::vector<int> out;
    for (int i = a; i <= b; ++i) out.push_back(i);
    return out;
  }
  if (s.find(',') != std::string::npos) {
    std::vector<int> out;
    for (const auto& part : text::split(s, ',')) {
      if (!std::regex_match(part, m, kSingle)) return {};
      out.push_back(std::stoi(m[1]));
    }
    ranged = out.size() > 1;
    return out;
  }
  return {};
}

inline bool looks_like_initials(const std::string& part) {
  static const std::regex kInitials(R"(^(?:[A-Z][a-z]?\.?[\s-]*)+$)");
  return std::regex_match(text::trim(part), kInitials);
}

}  // namespace detail

/// Splits an author cell into names. ';' separates names when present;
/// otherwise ',' and " and " do, with "Smith, J." style initials merged back
/// onto their surname. Returns whether the list ended in "et al.".
inline std::vector<std::string> split_authors(const std::string& cell, bool& et_al) {
  std::string s = cell;
  static const std::regex kEtAl(R"(,?\s*\bet\.?\s*al\.?|,?\s*\band\s+others\b)", std::regex::icase);
  et_al = std::regex_search(s, kEtAl);
  s = std::regex_replace(s, kEtAl, "");
  static const std::regex kAnd(R"(\s*(?:,\s*)?\band\b\s*|\s*&\s*)", std::regex::icase);
  const bool semicolons = s.find(';') != std::string::npos;
  s = std::regex_replace(s, kAnd, semicolons ? ";" : ",");
  std::vector<std::string> parts;
  for (auto& p : text::split(s, semicolons ? ';' : ',')) {
    auto t = text::trim(p);
    if (t.empty()) continue;
    if (!semicolons && !parts.empty() && detail::looks_like_initials(t) &&
        !detail::looks_like_initials(parts.back()) && parts.back().find(' ') == std::string::npos) {
      parts.back() = t + " " + parts.back();
      continue;
    }
    parts.push_back(std::move(t));
  }
  return parts;
}

/// Parses the first markdown table that has a title column. Rows without a
/// usable citation number are quarantined; "..." and other filler rows are
/// skipped as anomalies. Throws ParseError when no table is present.
inline TableParse parse_reference_table(const std::string& markdown, const VenueTable& venues,
                                        Strategy strategy = Strategy::Vanilla) {
  std::vector<std::vector<std::vector<std::string>>> blocks;
  std::vector<std::vector<std::string>> raw_lines;
  {
    std::vector<std::vector<std::string>> block;
    std::vector<std::string> raw;
    auto flush = [&] {
      if (block.size() >= 2) {
        blocks.push_back(block);
        raw_lines.push_back(raw);
      }
      block.clear();
      raw.clear();
    };
    for (const auto& line : text::split(markdown, '\n')) {
      const auto t = text::trim(line);
      if (!t.empty() && t.front() == '|') {
        block.push_back(detail::split_cells(t));
        raw.push_back(t);
      } else {
        flush();
      }
    }
    flush();
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    std::vector<detail::Column> cols;
    for (const auto& h : block[0]) cols.push_back(detail::classify_header(detail::strip_markup(h)));
    auto col_of = [&](detail::Column c) -> std::optional<std::size_t> {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == c) return i;
      }
      return std::nullopt;
    };
    const auto title_col = col_of(detail::Column::Title);
    if (!title_col) continue;
    auto number_col = col_of(detail::Column::Number);
    if (!number_col && cols.size() > 0 && cols[0] == detail::Column::Other) number_col = 0;

    TableParse out;
    std::set<int> seen;
    for (std::size_t r = 1; r < block.size(); ++r) {
      auto cells = block[r];
      const auto& raw = raw_lines[b][r];
      if (detail::is_separator_row(cells)) continue;
      const bool filler = std::all_of(cells.begin(), cells.end(), detail::is_ellipsis);
      if (filler) {
        out.anomalies.push_back("skipped filler row: " + raw);
        continue;
      }
      if (cells.size() != cols.size()) {
        out.anomalies.push_back("row has " + std::to_string(cells.size()) + " cells, header " +
                                std::to_string(cols.size()) + ": " + raw);
        cells.resize(cols.size());
      }
      auto cell = [&](detail::Column c) -> std::string {
        const auto i = col_of(c);
        return i ? detail::strip_markup(cells[*i]) : std::string();
      };
      bool ranged = false;
      const auto numbers = number_col ? detail::parse_number_label(detail::strip_markup(cells[*number_col]), ranged)
                                      : std::vector<int>{};
      if (numbers.empty()) {
        out.quarantined.push_back({raw, number_col ? "non-numeric citation label" : "no citation column"});
        continue;
      }
      GeneratedReference g;
      g.raw_text = raw;
      g.title = cell(detail::Column::Title);
      g.source_strategy = strategy;
      g.authors = split_authors(cell(detail::Column::Authors), g.et_al);
      if (g.et_al && g.authors.size() > 1) g.authors.resize(1);
      if (!g.et_al) {
        static const std::regex kInt(R"(\d+)");
        std::smatch m;
        const auto count_cell = cell(detail::Column::AuthorCount);
        if (std::regex_search(count_cell, m, kInt) && !text::icontains(count_cell, "+")) {
          g.author_count = std::stoi(m[0]);
        } else if (!g.authors.empty() && !col_of(detail::Column::AuthorCount)) {
          g.author_count = static_cast<int>(g.authors.size());
        }
      }
      static const std::regex kYear(R"(\b(1[5-9]\d\d|20\d\d)\b)");
      std::smatch ym;
      const auto year_cell = cell(detail::Column::Year);
      if (std::regex_search(year_cell, ym, kYear)) g.year = std::stoi(ym[1]);
      g.venue = venues.canonicalize(cell(detail::Column::Venue));
      if (detail::is_ellipsis(g.title)) {
        out.anomalies.push_back("row without title: " + raw);
        continue;
      }
      for (int n : numbers) {
        if (!seen.insert(n).second) {
          out.quarantined.push_back({raw, "duplicate citation number " + std::to_string(n)});
          continue;
        }
        GeneratedReference copy = g;
        copy.citation_number = n;
        copy.range_derived = ranged;
        out.rows.push_back(std::move(copy));
      }
    }
    for (const auto& a : out.anomalies) spdlog::debug("table anomaly: {}", a);
    return out;
  }
  throw ParseError("no markdown table with a title column in response");
}

inline nlohmann::json to_json(const GeneratedReference& g) {
  return {{"citation_number", g.citation_number},
          {"raw_text", g.raw_text},
          {"title", g.title},
          {"authors", g.authors},
          {"author_count", g.author_count ? nlohmann::json(*g.author_count) : nlohmann::json(nullptr)},
          {"year", g.year ? nlohmann::json(*g.year) : nlohmann::json(nullptr)},
          {"venue", citeaudit::to_json(g.venue)},
          {"source_strategy", to_string(g.source_strategy)},
          {"range_derived", g.range_derived},
          {"et_al", g.et_al}};
}

inline GeneratedReference generated_from_json(const nlohmann::json& j) {
  GeneratedReference g;
  g.citation_number = j.at("citation_number").get<int>();
  g.raw_text = j.value("raw_text", "");
  g.title = j.value("title", "");
  g.authors = j.value("authors", std::vector<std::string>{});
  if (j.contains("author_count") && !j["author_count"].is_null()) g.author_count = j["author_count"].get<int>();
  if (j.contains("year") && !j["year"].is_null()) g.year = j["year"].get<int>();
  g.venue = j.contains("venue") ? venue_from_json(j["venue"]) : Venue{};
  g.source_strategy = strategy_from_string(j.value("source_strategy", "vanilla"));
  g.range_derived = j.value("range_derived", false);
  g.et_al = j.value("et_al", false);
  return g;
}

}  // namespace citeaudit::llmgate
