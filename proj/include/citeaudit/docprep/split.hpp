#pragma once

#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/text.hpp"
#include "citeaudit/docprep/citations.hpp"

namespace citeaudit::docprep {

/// Front matter, abstract and introduction as plain text, with the bracket
/// groups found in it.
struct MainContent {
  std::string text;
  std::vector<BracketGroup> citation_occurrences;
};

class StructureError : public ParseError {
 public:
  using ParseError::ParseError;
};

inline bool is_bibliography_heading(std::string_view line) {
  static const std::regex kHeading(R"(^\s*(\d+\s+)?(references|bibliography|literature cited)\s*$)",
                                   std::regex::icase);
  return std::regex_match(std::string(line), kHeading);
}

/// Splits flattened document text at the last bibliography heading. Entries
/// start with "[n]"; continuation lines are joined (a trailing hyphen joins
/// without a space).
inline std::pair<MainContent, std::vector<RawReference>> split_document(std::string_view text) {
  const auto lines = text::split(text, '\n');
  std::size_t heading = lines.size();
  for (std::size_t i = lines.size(); i-- > 0;) {
    if (is_bibliography_heading(lines[i])) {
      heading = i;
      break;
    }
  }
  if (heading == lines.size()) throw StructureError("no bibliography heading found");

  MainContent main;
  for (std::size_t i = 0; i < heading; ++i) {
    main.text += lines[i];
    main.text += '\n';
  }
  while (!main.text.empty() && std::isspace(static_cast<unsigned char>(main.text.back()))) {
    main.text.pop_back();
  }
  main.text += '\n';
  main.citation_occurrences = extract_citations(main.text);

  static const std::regex kEntry(R"(^\s*\[(\d+)\]\s*(.*)$)");
  std::vector<RawReference> refs;
  for (std::size_t i = heading + 1; i < lines.size(); ++i) {
    std::string line = lines[i];
    std::erase(line, '\f');
    const std::string trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    std::smatch m;
    if (std::regex_match(line, m, kEntry)) {
      refs.push_back({std::stoi(m[1].str()), text::trim(m[2].str())});
      continue;
    }
    if (refs.empty()) continue;  // running headers before the first entry
    auto& last = refs.back().text;
    if (!last.empty() && last.back() == '-') {
      last += trimmed;
    } else {
      last += (last.empty() ? "" : " ") + trimmed;
    }
  }
  return {std::move(main), std::move(refs)};
}

}  // namespace citeaudit::docprep
