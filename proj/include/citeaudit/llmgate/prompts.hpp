#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/io.hpp"

namespace citeaudit::llmgate {

struct Message {
  std::string role;  // system | user | assistant
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

using Messages = std::vector<Message>;

// Canonical prompt templates, version 1. The same text ships under
// templates/*.v1.txt; a golden test keeps the two identical.
namespace templates {

inline constexpr std::string_view kVersion = "v1";

inline constexpr std::string_view kSystem = "You are a helpful assistant";

inline constexpr std::string_view kVanilla =
    "Below, we share with you a written introduction to a paper and have omitted the references. "
    "Numbers between square brackets indicate citations. Can you give us a suggestion for an "
    "explicit reference associated with each number? Do not return anything except the citation "
    "number between square brackets and the corresponding reference.\n===\n";

inline constexpr std::string_view kPostprocess =
    "Below, we share with you a list of references with their corresponding citation number "
    "between square brackets. Could you for each reference extract the authors, the number of "
    "authors, title, publication year, and publication venue? Please only return the extracted "
    "information in a markdown table with the citation number (without brackets), authors, number "
    "of authors, title, publication year, and publication venue as columns.\n===\n";

/// `{numbers}` is replaced by the bracketed list, e.g. "[3], [7]".
inline constexpr std::string_view kIterative =
    "The following references associated with these citation numbers:\n{numbers}\ndo not exist. "
    "Can you replace all these non-existent references with existing ones? Keep the other "
    "references as they are. Do not return anything except the citation number between square "
    "brackets and the corresponding reference.\n===\n";

inline constexpr std::string_view kReask =
    "Your previous answer could not be read as a markdown table. Please return only a markdown "
    "table with the columns citation number, authors, number of authors, title, publication year, "
    "and publication venue, and nothing else.";

struct Named {
  std::string_view name;
  std::string_view text;
};

inline constexpr Named kAll[] = {{"system", kSystem},
                                 {"vanilla", kVanilla},
                                 {"postprocess", kPostprocess},
                                 {"iterative", kIterative},
                                 {"reask", kReask}};

/// name -> sha256 of the template text, recorded in run manifests.
inline nlohmann::json hashes() {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& t : kAll) {
    out[std::string(t.name) + "." + std::string(kVersion)] = io::sha256_hex(t.text);
  }
  return out;
}

}  // namespace templates

inline Messages render_with(std::string_view tmpl, const std::string& content, const char* what) {
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw PreconditionError(std::string(what) + " prompt needs non-empty content");
  }
  return {{"system", std::string(templates::kSystem)}, {"user", std::string(tmpl) + content}};
}

inline Messages render_vanilla_prompt(const std::string& main_content) {
  return render_with(templates::kVanilla, main_content, "vanilla");
}

inline Messages render_postprocess_prompt(const std::string& reference_list) {
  return render_with(templates::kPostprocess, reference_list, "postprocess");
}

inline std::string bracket_list(const std::set<int>& numbers) {
  std::string out;
  for (int n : numbers) {
    if (!out.empty()) out += ", ";
    out += "[" + std::to_string(n) + "]";
  }
  return out;
}

/// Parent vanilla conversation plus the follow-up asking to replace the
/// non-existent references. Nothing to ask when every reference exists.
inline std::optional<Messages> render_iterative_prompt(const Messages& parent,
                                                       const std::set<int>& nonexistent,
                                                       const std::string& main_content) {
  if (nonexistent.empty()) return std::nullopt;
  if (parent.size() < 3 || parent.back().role != "assistant") {
    throw PreconditionError("iterative prompt needs a completed parent transcript");
  }
  if (main_content.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw PreconditionError("iterative prompt needs non-empty content");
  }
  std::string follow(templates::kIterative);
  follow.replace(follow.find("{numbers}"), 9, bracket_list(nonexistent));
  Messages out = parent;
  out.push_back({"user", follow + main_content});
  return out;
}

/// Compact JSON of the role/content pairs; the mock store is keyed by its hash.
inline std::string canonical_json(const Messages& messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) arr.push_back({{"content", m.content}, {"role", m.role}});
  return arr.dump();
}

inline std::string prompt_hash(const Messages& messages) { return io::sha256_hex(canonical_json(messages)); }

inline nlohmann::json to_json(const Messages& messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

inline Messages messages_from_json(const nlohmann::json& j) {
  Messages out;
  for (const auto& m : j) out.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  return out;
}

}  // namespace citeaudit::llmgate
