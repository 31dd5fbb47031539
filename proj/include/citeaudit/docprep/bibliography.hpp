#pragma once

// Compiled-bibliography order: \bibitem order from a .bbl / thebibliography
// environment, or a small bibtex emulation over .bib files.

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/common/text.hpp"
#include "citeaudit/docprep/latex.hpp"

namespace citeaudit::docprep {

struct BibItem {
  std::string key;
  std::string text;  // flattened entry text as it would print

  friend bool operator==(const BibItem&, const BibItem&) = default;
};

/// Entries in compiled (printed) order; entry i prints as [i+1].
struct Bibliography {
  enum class Source { Inline, Bbl, Bib };
  Source source = Source::Bbl;
  std::vector<BibItem> items;

  std::map<std::string, int> numbering() const {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < items.size(); ++i) out.emplace(items[i].key, static_cast<int>(i) + 1);
    return out;
  }
};

inline bool is_cite_command(std::string_view cmd) {
  static const std::set<std::string, std::less<>> kCites = {
      "cite",     "cite*",     "citep",     "citep*",    "citet",      "citet*",
      "citealp",  "citealp*",  "citealt",   "citealt*",  "citenum",    "parencite",
      "textcite", "autocite",  "supercite", "Cite",      "Citep",      "Citet",
      "nocite",   "citeauthor", "citeauthor*", "citeyear", "citeyearpar"};
  return kCites.count(cmd) > 0;
}

/// Every citation command in the document: (command, keys, begin, end).
struct CiteCommand {
  std::string command;
  std::vector<std::string> keys;
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline std::vector<CiteCommand> find_cite_commands(std::string_view tex) {
  std::vector<CiteCommand> out;
  std::size_t pos = 0;
  while ((pos = tex.find('\\', pos)) != std::string_view::npos) {
    if (pos > 0 && tex[pos - 1] == '\\') {
      ++pos;
      continue;
    }
    const auto [cmd, after] = latex::read_command(tex, pos);
    if (!is_cite_command(cmd)) {
      pos = after;
      continue;
    }
    const auto args = latex::skip_optional_args(tex, after);
    const auto arg = latex::read_arg(tex, args);
    if (!arg) {
      pos = after;
      continue;
    }
    CiteCommand c{cmd, {}, pos, arg->second};
    for (const auto& k : text::split(arg->first, ',')) {
      auto key = text::trim(k);
      if (!key.empty()) c.keys.push_back(std::move(key));
    }
    out.push_back(std::move(c));
    pos = arg->second;
  }
  return out;
}

/// Parses the \bibitem list of a thebibliography environment (or a whole
/// .bbl file).
inline std::vector<BibItem> parse_bibitems(std::string_view bbl) {
  std::vector<BibItem> items;
  std::string_view body = bbl;
  std::string holder;
  if (auto env = latex::find_environment(bbl, "thebibliography")) {
    std::size_t start = latex::skip_optional_args(bbl, env->body);
    if (auto widest = latex::read_arg(bbl, start)) start = widest->second;
    holder = std::string(bbl.substr(start, env->body_end - start));
    body = holder;
  }
  std::vector<std::size_t> starts;
  for (std::size_t p = 0; (p = latex::find_command(body, "bibitem", p)) != std::string_view::npos;
       p += 8) {
    starts.push_back(p);
  }
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto after = latex::skip_optional_args(body, starts[i] + 8);
    const auto key = latex::read_arg(body, after);
    if (!key) continue;
    const auto stop = i + 1 < starts.size() ? starts[i + 1] : body.size();
    std::string_view entry = body.substr(key->second, stop - key->second);
    items.push_back({text::trim(key->first), latex::flatten_inline(entry)});
  }
  return items;
}

struct BibRecord {
  std::string type;
  std::string key;
  std::map<std::string, std::string> fields;  // lowercase field names, raw values
};

/// Minimal .bib reader: @type{key, field = {..} | ".." | number, ...}.
/// @comment, @preamble and @string blocks are skipped.
inline std::vector<BibRecord> parse_bib(std::string_view bib) {
  std::vector<BibRecord> out;
  std::size_t pos = 0;
  while ((pos = bib.find('@', pos)) != std::string_view::npos) {
    std::size_t p = pos + 1;
    while (p < bib.size() && std::isalpha(static_cast<unsigned char>(bib[p]))) ++p;
    const std::string type = text::to_lower_ascii(bib.substr(pos + 1, p - pos - 1));
    p = latex::skip_spaces(bib, p);
    if (p >= bib.size() || (bib[p] != '{' && bib[p] != '(')) {
      pos = p;
      continue;
    }
    const char open = bib[p];
    const auto end = latex::match_brace(bib, p, open, open == '{' ? '}' : ')');
    if (end == std::string_view::npos) throw ParseError("unbalanced @" + type + " entry in .bib");
    std::string_view body = bib.substr(p + 1, end - p - 2);
    pos = end;
    if (type == "comment" || type == "preamble" || type == "string") continue;
    const auto comma = body.find(',');
    BibRecord rec{type, text::trim(body.substr(0, comma)), {}};
    if (comma == std::string_view::npos) {
      out.push_back(std::move(rec));
      continue;
    }
    std::size_t q = comma + 1;
    while (q < body.size()) {
      q = latex::skip_spaces(body, q);
      const auto eq = body.find('=', q);
      if (eq == std::string_view::npos) break;
      const std::string name = text::to_lower_ascii(text::trim(body.substr(q, eq - q)));
      q = latex::skip_spaces(body, eq + 1);
      std::string value;
      if (q < body.size() && body[q] == '{') {
        const auto close = latex::match_brace(body, q);
        if (close == std::string_view::npos) throw ParseError("unbalanced field " + name);
        value = std::string(body.substr(q + 1, close - q - 2));
        q = close;
      } else if (q < body.size() && body[q] == '"') {
        auto close = q + 1;
        int depth = 0;
        while (close < body.size() && !(body[close] == '"' && depth == 0)) {
          if (body[close] == '{') ++depth;
          if (body[close] == '}') --depth;
          ++close;
        }
        value = std::string(body.substr(q + 1, close - q - 1));
        q = close + 1;
      } else {
        auto close = body.find(',', q);
        if (close == std::string_view::npos) close = body.size();
        value = text::trim(body.substr(q, close - q));
        q = close;
      }
      rec.fields[name] = value;
      q = latex::skip_spaces(body, q);
      if (q < body.size() && body[q] == ',') ++q;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// Splits a bibtex author field on top-level " and ".
inline std::vector<std::string> split_bib_names(std::string_view field) {
  std::vector<std::string> names;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] == '{') ++depth;
    if (field[i] == '}') --depth;
    if (depth == 0 && i + 5 <= field.size() && std::isspace(static_cast<unsigned char>(field[i])) &&
        text::to_lower_ascii(field.substr(i + 1, 3)) == "and" &&
        (i + 4 >= field.size() || std::isspace(static_cast<unsigned char>(field[i + 4])))) {
      names.push_back(text::trim(field.substr(start, i - start)));
      start = i + 4;
      i += 3;
    }
  }
  names.push_back(text::trim(field.substr(start)));
  std::erase_if(names, [](const std::string& n) { return n.empty(); });
  return names;
}

/// "Last, First" -> "First Last"; display names pass through.
inline std::string display_name(std::string_view name) {
  const auto flat = latex::flatten_inline(name);
  const auto comma = flat.find(',');
  if (comma == std::string::npos) return flat;
  return text::trim(flat.substr(comma + 1)) + " " + text::trim(flat.substr(0, comma));
}

inline std::string surname(std::string_view name) {
  const auto flat = latex::flatten_inline(name);
  const auto comma = flat.find(',');
  if (comma != std::string::npos) return text::trim(flat.substr(0, comma));
  const auto space = flat.rfind(' ');
  return space == std::string::npos ? flat : flat.substr(space + 1);
}

/// Renders a .bib record the way a plain numeric style prints it.
inline std::string format_bib_record(const BibRecord& r) {
  auto field = [&](const char* name) -> std::string {
    const auto it = r.fields.find(name);
    return it == r.fields.end() ? std::string() : latex::flatten_inline(it->second);
  };
  std::vector<std::string> names;
  bool others = false;
  if (const auto it = r.fields.find("author"); it != r.fields.end()) {
    for (const auto& n : split_bib_names(it->second)) {
      if (text::to_lower_ascii(n) == "others") {
        others = true;
      } else {
        names.push_back(display_name(n));
      }
    }
  }
  std::string authors;
  if (names.size() == 1) {
    authors = names[0];
  } else if (names.size() == 2 && !others) {
    authors = names[0] + " and " + names[1];
  } else if (!names.empty()) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i) authors += (i + 1 == names.size() && !others) ? ", and " : ", ";
      authors += names[i];
    }
  }
  if (others) authors += " et al.";
  std::string out = authors.empty() ? "" : authors + ". ";
  if (auto t = field("title"); !t.empty()) out += t + ". ";
  std::string venue = field("booktitle");
  if (venue.empty()) venue = field("journal");
  if (venue.empty()) venue = field("howpublished");
  if (venue.empty()) venue = field("publisher");
  if (!venue.empty()) out += (r.fields.count("booktitle") ? "In " : "") + venue;
  if (auto y = field("year"); !y.empty()) out += (venue.empty() ? "" : ", ") + y;
  out = text::trim(out);
  if (!out.empty() && out.back() != '.') out.push_back('.');
  return out;
}

/// Emulates bibtex: cited keys (first-cite order, \nocite{*} adds all) are
/// looked up in the .bib records; "unsrt"-family styles keep citation order,
/// everything else sorts by (surname, year, title) like "plain".
inline Bibliography bibtex_emulate(const std::vector<BibRecord>& records,
                                   const std::vector<std::string>& cited_keys,
                                   std::string_view style) {
  std::map<std::string, const BibRecord*> by_key;
  for (const auto& r : records) by_key.emplace(r.key, &r);
  std::vector<const BibRecord*> chosen;
  std::set<std::string> seen;
  const bool all = std::find(cited_keys.begin(), cited_keys.end(), "*") != cited_keys.end();
  for (const auto& k : cited_keys) {
    if (k == "*" || seen.count(k)) continue;
    if (auto it = by_key.find(k); it != by_key.end()) {
      chosen.push_back(it->second);
      seen.insert(k);
    }
  }
  if (all) {
    for (const auto& r : records) {
      if (seen.insert(r.key).second) chosen.push_back(&r);
    }
  }
  const bool keep_order = text::icontains(style, "unsrt") || text::icontains(style, "ieee");
  if (!keep_order) {
    auto sort_key = [](const BibRecord* r) {
      std::string s;
      if (auto it = r->fields.find("author"); it != r->fields.end()) {
        for (const auto& n : split_bib_names(it->second)) s += text::normalize_utf8(surname(n)) + " ";
      }
      s += "|";
      if (auto it = r->fields.find("year"); it != r->fields.end()) s += it->second;
      s += "|";
      if (auto it = r->fields.find("title"); it != r->fields.end()) {
        s += text::normalize_utf8(latex::flatten_inline(it->second));
      }
      return s;
    };
    std::stable_sort(chosen.begin(), chosen.end(), [&](const BibRecord* a, const BibRecord* b) {
      return sort_key(a) < sort_key(b);
    });
  }
  Bibliography bib;
  bib.source = Bibliography::Source::Bib;
  for (const auto* r : chosen) bib.items.push_back({r->key, format_bib_record(*r)});
  return bib;
}

}  // namespace citeaudit::docprep
