#pragma once

#include <string>

#include <json.hpp>

namespace citeaudit {

/// A paper or reference dropped from the analysis, with a machine-readable
/// reason code so attrition can be reported.
struct Exclusion {
  std::string reason;
  std::string detail;

  friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

namespace reason {
inline constexpr const char* kNoMain = "no-main";
inline constexpr const char* kMultipleMains = "multiple-mains";
inline constexpr const char* kNoBib = "no-bib";
inline constexpr const char* kCompileError = "compile-error";
inline constexpr const char* kTexParseError = "tex-parse-error";
inline constexpr const char* kNoBibliographyHeading = "no-bibliography-heading";
inline constexpr const char* kNoSource = "no-source";
inline constexpr const char* kBlacklisted = "blacklisted";
inline constexpr const char* kNotInIndex = "not-in-index";
inline constexpr const char* kAmbiguousTitle = "ambiguous-title";
inline constexpr const char* kIndexError = "index-error";
inline constexpr const char* kNoIntroCitations = "no-intro-citations";
inline constexpr const char* kLlmFailure = "llm-failure";
inline constexpr const char* kRefusal = "refusal";
inline constexpr const char* kUnparseable = "unparseable-response";
inline constexpr const char* kNotResolved = "not-resolved";
}  // namespace reason

inline nlohmann::json to_json(const Exclusion& e) {
  return {{"reason", e.reason}, {"detail", e.detail}};
}

inline Exclusion exclusion_from_json(const nlohmann::json& j) {
  return {j.at("reason").get<std::string>(), j.value("detail", "")};
}

}  // namespace citeaudit
