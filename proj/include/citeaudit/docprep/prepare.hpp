#pragma once

// Source bundle -> main content + introduction references.

#include <filesystem>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "citeaudit/common/exclusion.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/docprep/citations.hpp"
#include "citeaudit/docprep/split.hpp"
#include "citeaudit/docprep/tex_source.hpp"
#include "citeaudit/docprep/toolchain.hpp"

namespace citeaudit::docprep {

struct PreparedPaper {
  std::string cleaned_tex;
  MainContent main;
  std::vector<RawReference> references;        // whole compiled bibliography
  std::vector<RawReference> intro_references;  // cited in main content
  std::vector<BracketGroup> groups;            // groups within 1..N
  std::set<int> uniquely_identifiable;
  std::vector<int> dangling;                   // cited numbers > N
  std::string bibliography_source;             // inline | bbl | bib
};

using PrepareResult = std::variant<PreparedPaper, Exclusion>;

inline std::string format_reference_list(const std::vector<RawReference>& refs) {
  std::string out;
  for (const auto& r : refs) out += "[" + std::to_string(r.number) + "] " + r.text + "\n";
  return out;
}

/// Parses "[n] text" lines back into references (inverse of
/// format_reference_list).
inline std::vector<RawReference> parse_reference_list(std::string_view s) {
  std::vector<RawReference> out;
  for (const auto& line : text::split(s, '\n')) {
    if (line.size() < 3 || line[0] != '[') continue;
    const auto close = line.find(']');
    if (close == std::string::npos) continue;
    try {
      out.push_back({std::stoi(line.substr(1, close - 1)), text::trim(line.substr(close + 1))});
    } catch (const std::exception&) {
    }
  }
  return out;
}

inline PrepareResult prepare_paper(const fs::path& source_dir, const LatexToolchain& toolchain) {
  const auto located = locate_main_tex(source_dir);
  if (const auto* ex = std::get_if<Exclusion>(&located)) return *ex;
  const auto& main_path = std::get<fs::path>(located);

  PreparedPaper out;
  Bibliography bib;
  try {
    const std::string tex = expand_inputs(io::read_file(main_path), main_path.parent_path());
    const std::string structural = structural_clean(tex);
    bib = toolchain.resolve_bibliography(structural, main_path.parent_path(),
                                         main_path.stem().string());
    out.cleaned_tex = replace_citations(structural, bib);
  } catch (const NoBibliographyError& e) {
    return Exclusion{reason::kNoBib, e.what()};
  } catch (const CompileError& e) {
    return Exclusion{reason::kCompileError, e.what()};
  } catch (const ParseError& e) {
    return Exclusion{reason::kTexParseError, e.what()};
  }
  switch (bib.source) {
    case Bibliography::Source::Inline: out.bibliography_source = "inline"; break;
    case Bibliography::Source::Bbl: out.bibliography_source = "bbl"; break;
    case Bibliography::Source::Bib: out.bibliography_source = "bib"; break;
  }

  std::string rendered;
  try {
    rendered = toolchain.render(out.cleaned_tex, bib, main_path.parent_path());
  } catch (const CompileError& e) {
    return Exclusion{reason::kCompileError, e.what()};
  }
  try {
    auto [main, refs] = split_document(rendered);
    out.main = std::move(main);
    out.references = std::move(refs);
  } catch (const StructureError& e) {
    return Exclusion{reason::kNoBibliographyHeading, e.what()};
  }

  const auto selection = select_intro_references(out.main.citation_occurrences, out.references);
  out.intro_references = selection.references;
  out.dangling = selection.dangling;
  const int n = static_cast<int>(out.references.size());
  for (const auto& g : out.main.citation_occurrences) {
    if (*g.numbers.rbegin() <= n) out.groups.push_back(g);
  }
  out.uniquely_identifiable = uniquely_identifiable_numbers(out.groups);
  return out;
}

}  // namespace citeaudit::docprep
