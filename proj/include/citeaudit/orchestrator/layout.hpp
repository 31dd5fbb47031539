#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/llmgate/table.hpp"

namespace citeaudit::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;

/// One generation run: a model, a strategy and a 1-based run index.
struct RunId {
  std::string model;
  llmgate::Strategy strategy = llmgate::Strategy::Vanilla;
  int index = 1;

  std::string label() const { return model + "/" + llmgate::to_string(strategy) + "/" + std::to_string(index); }
  /// Runs of one model and strategy form a group for overlap and pooling.
  std::string group() const { return model + "/" + llmgate::to_string(strategy); }
  RunId parent() const { return {model, llmgate::Strategy::Vanilla, index}; }

  friend auto operator<=>(const RunId&, const RunId&) = default;
};

/// Paths of every artifact below the output and cache roots.
struct Layout {
  fs::path out;
  fs::path cache;

  fs::path manifest() const { return out / "manifest.json"; }
  fs::path lockfile() const { return out / ".citeaudit.lock"; }

  fs::path candidates() const { return out / "corpus" / "candidates.json"; }
  fs::path papers() const { return out / "corpus" / "papers.json"; }

  fs::path source_dir(const std::string& pid) const { return cache / "sources" / io::safe_key(pid); }

  fs::path prepared(const std::string& pid) const { return out / "prepared" / io::safe_key(pid); }

  fs::path run_dir(const RunId& r) const {
    return out / "runs" / r.model / llmgate::to_string(r.strategy) / std::to_string(r.index);
  }
  fs::path run_paper(const RunId& r, const std::string& pid) const { return run_dir(r) / io::safe_key(pid); }

  fs::path llm_cache(const std::string& model, const std::string& scope) const {
    return cache / "llm" / model / scope;
  }

  fs::path analysis() const { return out / "analysis" / "analysis.json"; }
  fs::path graph_dir(const RunId& r, const std::string& pid) const {
    return out / "graphs" / r.model / llmgate::to_string(r.strategy) / std::to_string(r.index) / io::safe_key(pid);
  }
  fs::path graph_metrics() const { return out / "graphs" / "metrics.json"; }
  fs::path reports() const { return out / "reports"; }
};

/// Deterministic JSON text: sorted keys, two-space indent, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_json(const fs::path& path, const json& j) { io::write_if_changed(path, dump(j)); }

/// nullopt when the file is missing or unreadable as JSON; a corrupt stage
/// artifact is recomputed rather than trusted.
inline std::optional<json> read_json(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  try {
    return json::parse(io::read_file(path));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline json require_json(const fs::path& path, const std::string& hint) {
  auto j = read_json(path);
  if (!j) throw PreconditionError("missing or unreadable " + path.string() + " (" + hint + ")");
  return *j;
}

/// sha256 over relative paths and contents of every regular file below dir.
inline std::string tree_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::exists(dir, ec)) return io::sha256_hex("");
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) {
    acc += fs::relative(f, dir).generic_string() + "\n" + io::sha256_hex(io::read_file(f)) + "\n";
  }
  return io::sha256_hex(acc);
}

}  // namespace citeaudit::orchestrator
