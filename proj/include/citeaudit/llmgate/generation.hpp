#pragma once

#include <spdlog/spdlog.h>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/io.hpp"
#include "citeaudit/llmgate/prompts.hpp"
#include "citeaudit/llmgate/provider.hpp"
#include "citeaudit/llmgate/table.hpp"

namespace citeaudit::llmgate {

struct GenerationRun {
  std::string model_id;
  Strategy strategy = Strategy::Vanilla;
  int run_index = 1;
  SamplingParams sampling_params = nlohmann::json::object();
  Messages transcript;
  /// Iterative runs name their vanilla parent ("<model>/vanilla/<k>").
  std::optional<std::string> parent;
};

inline nlohmann::json to_json(const GenerationRun& r) {
  return {{"model_id", r.model_id},
          {"strategy", to_string(r.strategy)},
          {"run_index", r.run_index},
          {"sampling_params", r.sampling_params},
          {"transcript", to_json(r.transcript)},
          {"parent", r.parent ? nlohmann::json(*r.parent) : nlohmann::json(nullptr)}};
}

inline GenerationRun generation_run_from_json(const nlohmann::json& j) {
  GenerationRun r;
  r.model_id = j.at("model_id").get<std::string>();
  r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  r.run_index = j.at("run_index").get<int>();
  r.sampling_params = j.value("sampling_params", nlohmann::json::object());
  r.transcript = messages_from_json(j.at("transcript"));
  if (j.contains("parent") && !j["parent"].is_null()) r.parent = j["parent"].get<std::string>();
  return r;
}

enum class OutcomeKind { Ok, Refusal };

struct GenerateOutcome {
  OutcomeKind kind = OutcomeKind::Ok;
  std::string text;
  std::string detail;
};

/// Sends `messages`, records them and the response in the run transcript and
/// writes the raw response to `raw_path` before anything parses it. Empty
/// answers and provider refusals come back as a Refusal outcome; transport
/// failures propagate after the provider's own retries.
inline GenerateOutcome generate(GenerationRun& run, const Messages& messages, Provider& provider,
                                const std::filesystem::path& raw_path) {
  if (messages.empty()) throw PreconditionError("generate needs at least one message");
  GenerateOutcome out;
  try {
    out.text = provider.send(messages, run.sampling_params);
  } catch (const RefusalError& e) {
    out.kind = OutcomeKind::Refusal;
    out.detail = e.what();
  }
  io::write_if_changed(raw_path, out.text);
  if (out.kind == OutcomeKind::Ok && out.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    out.kind = OutcomeKind::Refusal;
    out.detail = "empty response";
  }
  run.transcript = messages;
  run.transcript.push_back({"assistant", out.text});
  return out;
}

struct StructuredResult {
  TableParse table;
  Messages transcript;
  bool reasked = false;
};

/// Structuring: the reference list goes through the postprocess
/// prompt and the markdown table in the answer is parsed. An unparseable
/// answer gets exactly one re-ask; a second failure is a ParseError.
/// Raw answers are written to `<raw_stem>.md` and `<raw_stem>.reask.md`.
inline StructuredResult structure_references(Provider& provider, const SamplingParams& params,
                                             const std::string& reference_list, const VenueTable& venues,
                                             Strategy strategy, const std::filesystem::path& raw_stem) {
  StructuredResult out;
  out.transcript = render_postprocess_prompt(reference_list);
  auto answer = provider.send(out.transcript, params);
  io::write_if_changed(raw_stem.string() + ".md", answer);
  out.transcript.push_back({"assistant", answer});
  try {
    out.table = parse_reference_table(answer, venues, strategy);
    return out;
  } catch (const ParseError& e) {
    spdlog::info("re-asking after unparseable table ({})", e.what());
  }
  out.reasked = true;
  out.transcript.push_back({"user", std::string(templates::kReask)});
  answer = provider.send(out.transcript, params);
  io::write_if_changed(raw_stem.string() + ".reask.md", answer);
  out.transcript.push_back({"assistant", answer});
  out.table = parse_reference_table(answer, venues, strategy);
  return out;
}

template <typename T>
struct MergeResult {
  std::map<int, T> merged;
  /// Requested numbers the iterative answer did not supply.
  std::set<int> gaps;
  /// Numbers taken from the iterative answer.
  std::set<int> replaced;
};

/// Numbers outside `requested` (the parent's verified-existing entries) are
/// kept untouched. Each requested number takes the iterative entry when one
/// was supplied; otherwise the parent entry, if any, stays and the number is
/// recorded as a gap. Iterative entries for numbers not requested are ignored.
template <typename T>
MergeResult<T> merge_iterative(const std::map<int, T>& parent, const std::set<int>& requested,
                               const std::map<int, T>& iterative) {
  MergeResult<T> out;
  out.merged = parent;
  for (int n : requested) {
    auto it = iterative.find(n);
    if (it == iterative.end()) {
      out.gaps.insert(n);
      continue;
    }
    out.merged.insert_or_assign(n, it->second);
    out.replaced.insert(n);
  }
  for (int n : out.gaps) spdlog::info("iterative answer omitted requested citation [{}]", n);
  return out;
}

}  // namespace citeaudit::llmgate
