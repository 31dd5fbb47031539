#pragma once

// Source-bundle handling and LaTeX cleaning.

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/exclusion.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/common/text.hpp"
#include "citeaudit/docprep/bibliography.hpp"
#include "citeaudit/docprep/latex.hpp"

namespace citeaudit::docprep {

namespace fs = std::filesystem;

/// Raised when the document cannot be compiled; maps to reason::kCompileError.
class CompileError : public Error {
 public:
  using Error::Error;
};

/// Neither .bbl nor .bib (nor an inline thebibliography) is available.
class NoBibliographyError : public Error {
 public:
  using Error::Error;
};

using MainTexResult = std::variant<fs::path, Exclusion>;

/// The unique .tex file holding both \begin{document} and \end{document}.
inline MainTexResult locate_main_tex(const fs::path& source_dir) {
  if (!fs::is_directory(source_dir)) {
    throw IoError("source directory " + source_dir.string() + " does not exist");
  }
  std::vector<fs::path> candidates;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(source_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tex") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string content = latex::strip_comments(io::read_file(f));
    if (latex::find_command(content, "begin") == std::string::npos) continue;
    if (content.find("\\begin{document}") != std::string::npos &&
        content.find("\\end{document}") != std::string::npos) {
      candidates.push_back(f);
    }
  }
  if (candidates.empty()) return Exclusion{reason::kNoMain, source_dir.string()};
  if (candidates.size() > 1) {
    std::string names;
    for (const auto& c : candidates) {
      if (!names.empty()) names += ", ";
      names += fs::relative(c, source_dir).string();
    }
    return Exclusion{reason::kMultipleMains, names};
  }
  return candidates.front();
}

/// Inlines \input{..} and \include{..} relative to `base_dir`.
inline std::string expand_inputs(std::string_view tex, const fs::path& base_dir, int depth = 0) {
  if (depth > 16) throw CompileError("\\input nesting too deep");
  const std::string stripped = latex::strip_comments(tex);
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto a = latex::find_command(stripped, "input", pos);
    const auto b = latex::find_command(stripped, "include", pos);
    const auto at = std::min(a, b);
    if (at == std::string::npos) break;
    const auto cmd_len = at == a ? 6 : 8;
    const auto arg = latex::read_arg(stripped, at + cmd_len);
    if (!arg) {
      out += stripped.substr(pos, at + cmd_len - pos);
      pos = at + cmd_len;
      continue;
    }
    out += stripped.substr(pos, at - pos);
    fs::path target = base_dir / text::trim(arg->first);
    if (!fs::exists(target) && target.extension() != ".tex") target += ".tex";
    if (!fs::exists(target)) {
      throw CompileError("line " + std::to_string(latex::line_of(stripped, at)) +
                         ": missing input file " + arg->first);
    }
    out += expand_inputs(io::read_file(target), base_dir, depth + 1);
    pos = arg->second;
  }
  out += stripped.substr(pos);
  return out;
}

namespace detail {

inline bool is_float_env(const std::string& name) {
  static const std::set<std::string> kFloats = {
      "figure", "figure*", "table", "table*", "wrapfigure", "wraptable", "algorithm",
      "algorithm*", "sidewaystable", "sidewaysfigure", "subfigure", "tabular", "tabular*"};
  return kFloats.count(name) > 0;
}

inline std::string collapse_blank_lines(std::string_view s) {
  std::string out;
  int newlines = 0;
  for (char c : s) {
    if (c == '\n') {
      while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
      if (++newlines > 2) continue;
    } else {
      newlines = 0;
    }
    out.push_back(c);
  }
  return out;
}

inline void erase_environments(std::string& body, bool (*pred)(const std::string&)) {
  while (auto env = latex::find_environment_if(body, [&](const std::string& n) { return pred(n); })) {
    body.erase(env->begin, env->end - env->begin);
  }
}

/// Removes cross-references (with a leading "Section~"-style word) and labels.
inline std::string strip_cross_references(std::string_view s) {
  static const std::set<std::string> kRefs = {"ref",    "autoref", "cref",  "Cref",
                                              "eqref",  "pageref", "nameref", "label",
                                              "Autoref", "vref"};
  static const std::vector<std::string> kLead = {
      "sections", "section", "sec.", "appendices", "appendix", "app.", "figures", "figure",
      "fig.",     "tables",  "table", "tab.", "equation", "eq.", "algorithm", "alg.", "theorem",
      "lemma",    "definition"};
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto bs = s.find('\\', pos);
    if (bs == std::string_view::npos) break;
    const auto [cmd, after] = latex::read_command(s, bs);
    if (!kRefs.count(cmd)) {
      out += s.substr(pos, after - pos);
      pos = after;
      continue;
    }
    const auto arg = latex::read_arg(s, after);
    if (!arg) {
      out += s.substr(pos, after - pos);
      pos = after;
      continue;
    }
    out += s.substr(pos, bs - pos);
    if (cmd != "label") {
      // drop "Section~" / "Sec. " immediately before the reference
      std::size_t end = out.size();
      while (end > 0 && (out[end - 1] == '~' || out[end - 1] == ' ')) --end;
      const std::string lower = text::to_lower_ascii(out.substr(0, end));
      for (const auto& lead : kLead) {
        if (lower.size() >= lead.size() && lower.compare(lower.size() - lead.size(), lead.size(), lead) == 0) {
          const auto start = lower.size() - lead.size();
          if (start == 0 || !std::isalpha(static_cast<unsigned char>(lower[start - 1]))) {
            out.erase(start);
            break;
          }
        }
      }
    }
    pos = arg->second;
  }
  out += s.substr(pos);
  return out;
}

struct Section {
  std::string title;
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline std::vector<Section> top_sections(std::string_view body) {
  std::vector<Section> out;
  std::size_t pos = 0;
  while ((pos = latex::find_command(body, "section", pos)) != std::string_view::npos) {
    std::size_t after = pos + 8;
    if (after < body.size() && body[after] == '*') ++after;
    after = latex::skip_optional_args(body, after);
    const auto arg = latex::read_arg(body, after);
    if (!out.empty()) out.back().end = pos;
    out.push_back({arg ? arg->first : std::string(), pos, body.size()});
    pos = arg ? arg->second : after;
  }
  return out;
}

}  // namespace detail

/// Bibliography commands found in the document, in order of appearance.
inline std::vector<std::string> bibliography_machinery(std::string_view tex) {
  std::vector<std::pair<std::size_t, std::string>> found;
  for (const char* cmd : {"bibliography", "bibliographystyle", "addbibresource"}) {
    std::size_t pos = 0;
    while ((pos = latex::find_command(tex, cmd, pos)) != std::string_view::npos) {
      const auto arg = latex::read_arg(tex, pos + std::char_traits<char>::length(cmd) + 1);
      if (!arg) {
        ++pos;
        continue;
      }
      found.emplace_back(pos, "\\" + std::string(cmd) + "{" + arg->first + "}");
      pos = arg->second;
    }
  }
  if (auto p = latex::find_command(tex, "printbibliography"); p != std::string_view::npos) {
    found.emplace_back(p, "\\printbibliography");
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> out;
  for (auto& [_, s] : found) out.push_back(std::move(s));
  return out;
}

/// Keeps front matter (title, authors, abstract), the introduction and the
/// bibliography machinery. Floats, other sections and cross-references are
/// removed; citation commands are left in place.
inline std::string structural_clean(std::string_view tex) {
  const std::string src = latex::strip_comments(tex);
  const auto begin_doc = src.find("\\begin{document}");
  const auto end_doc = src.rfind("\\end{document}");
  if (begin_doc == std::string::npos || end_doc == std::string::npos || end_doc < begin_doc) {
    throw PreconditionError("document markers missing");
  }
  std::string preamble = src.substr(0, begin_doc);
  while (!preamble.empty() && std::isspace(static_cast<unsigned char>(preamble.back()))) {
    preamble.pop_back();
  }
  std::string body = src.substr(begin_doc + 16, end_doc - begin_doc - 16);
  try {
    latex::check_environments(body);
  } catch (const ParseError& e) {
    // report lines relative to the whole file
    const int offset = latex::line_of(src, begin_doc + 16) - 1;
    std::string msg = e.what();
    if (msg.rfind("line ", 0) == 0) {
      const auto colon = msg.find(':');
      const int line = std::stoi(msg.substr(5, colon - 5)) + offset;
      msg = "line " + std::to_string(line) + msg.substr(colon);
    }
    throw ParseError(msg);
  }

  // Pull out bibliography machinery first so section slicing cannot lose it.
  std::string inline_bib;
  if (auto env = latex::find_environment(body, "thebibliography")) {
    inline_bib = body.substr(env->begin, env->end - env->begin);
    body.erase(env->begin, env->end - env->begin);
  }
  auto machinery = bibliography_machinery(body);
  for (const char* cmd : {"bibliography", "bibliographystyle", "addbibresource", "printbibliography"}) {
    std::size_t pos;
    while ((pos = latex::find_command(body, cmd)) != std::string::npos) {
      auto after = pos + std::char_traits<char>::length(cmd) + 1;
      if (std::string_view(cmd) != "printbibliography") {
        if (auto arg = latex::read_arg(body, after)) after = arg->second;
      }
      body.erase(pos, after - pos);
    }
  }
  if (auto app = latex::find_command(body, "appendix"); app != std::string::npos) body.erase(app);

  detail::erase_environments(body, &detail::is_float_env);

  const auto sections = detail::top_sections(body);
  std::string kept;
  if (sections.empty()) {
    kept = body;
  } else {
    kept = body.substr(0, sections.front().begin);
    const detail::Section* intro = &sections.front();
    for (const auto& s : sections) {
      if (text::icontains(s.title, "introduction")) {
        intro = &s;
        break;
      }
    }
    kept += body.substr(intro->begin, intro->end - intro->begin);
  }
  kept = detail::collapse_blank_lines(text::trim(detail::strip_cross_references(kept)));

  std::string out = preamble;
  out += "\n\\begin{document}\n\n";
  out += kept;
  out += "\n\n";
  if (!inline_bib.empty()) out += inline_bib + "\n";
  for (const auto& m : machinery) out += m + "\n";
  out += "\\end{document}\n";
  return out;
}

/// Keys cited by the (structurally cleaned) document, in first-cite order.
inline std::vector<std::string> cited_keys(std::string_view tex) {
  std::vector<std::string> keys;
  std::set<std::string> seen;
  for (const auto& c : find_cite_commands(tex)) {
    for (const auto& k : c.keys) {
      if (seen.insert(k).second) keys.push_back(k);
    }
  }
  return keys;
}

/// Replaces each citation command with "[n,m,...]" using the compiled
/// bibliography numbering. Unresolvable citations print as "[?]", like LaTeX.
inline std::string replace_citations(std::string_view tex, const Bibliography& bib) {
  const auto numbering = bib.numbering();
  std::string out;
  std::size_t pos = 0;
  for (const auto& c : find_cite_commands(tex)) {
    out += tex.substr(pos, c.begin - pos);
    pos = c.end;
    if (c.command == "nocite" || c.command.rfind("citeauthor", 0) == 0 ||
        c.command.rfind("citeyear", 0) == 0) {
      continue;
    }
    std::vector<int> numbers;
    for (const auto& k : c.keys) {
      if (auto it = numbering.find(k); it != numbering.end()) {
        if (std::find(numbers.begin(), numbers.end(), it->second) == numbers.end()) {
          numbers.push_back(it->second);
        }
      }
    }
    if (numbers.empty()) {
      out += "[?]";
      continue;
    }
    out += "[";
    for (std::size_t i = 0; i < numbers.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(numbers[i]);
    }
    out += "]";
  }
  out += tex.substr(pos);
  return out;
}

/// Full cleaning: structural_clean followed by citation numbering.
inline std::string clean_tex(std::string_view tex, const Bibliography& bib) {
  return replace_citations(structural_clean(tex), bib);
}

}  // namespace citeaudit::docprep
