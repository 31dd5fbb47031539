#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/concurrency.hpp"
#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/corpus/corpus.hpp"
#include "citeaudit/corpus/types.hpp"
#include "citeaudit/matcher/matcher.hpp"

namespace citeaudit::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;

struct SourceConfig {
  std::string kind = "directory";  // preprint: arxiv | directory; scholarly: semanticscholar | directory
  std::string path;
  std::string base_url;
  std::string eprint_url;
  std::string api_key_env;
  double requests_per_second = 0;
};

struct ModelConfig {
  std::string id;
  std::string provider;  // openai | anthropic | mock
  std::string model;
  std::string base_url;
  std::string api_key_env;
  std::string mock_dir;
  json sampling = json::object();
  int vanilla_runs = 1;
  int iterative_runs = 0;
  double requests_per_second = 0;
};

struct MatcherConfig {
  std::optional<json> thresholds;
  std::string thresholds_file;
  std::string calibration_labels;
  std::string min_accuracy = "0.95";
  int search_limit = 3;
  /// Ground-truth titles are matched against the focal paper's reference
  /// titles alone, without an author check, so the bar is higher.
  std::string ground_truth_title = "0.9";
};

struct PipelineConfig {
  /// Directory relative paths in the file are resolved against.
  fs::path base_dir = ".";

  DateRange window;
  std::string category;
  std::vector<std::string> keywords;
  std::vector<std::string> blacklist = default_blacklist();

  SourceConfig preprint;
  SourceConfig scholarly;
  std::string toolchain = "auto";
  std::vector<ModelConfig> models;
  std::string postprocess_model;
  MatcherConfig matcher;
  std::vector<std::int64_t> subperiod_interior{1989, 2000};
  std::string venue_aliases;
  std::string cache_dir = "cache";
  std::string out_dir = "out";
  int jobs = 1;
  int max_attempts = 4;
  int initial_backoff_ms = 500;

  fs::path resolve(const std::string& p) const {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  }

  RetryPolicy retry() const {
    RetryPolicy r;
    r.max_attempts = max_attempts;
    r.initial_backoff = std::chrono::milliseconds(initial_backoff_ms);
    return r;
  }

  const ModelConfig& model(const std::string& id) const {
    for (const auto& m : models) {
      if (m.id == id) return m;
    }
    throw ConfigError("unknown model '" + id + "'");
  }

  const ModelConfig& postprocess() const { return model(postprocess_model); }
};

namespace detail {

inline void expect_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

inline SourceConfig parse_source(const json& j, const std::string& where, const std::set<std::string>& kinds) {
  expect_keys(j, where, {"kind", "path", "base_url", "eprint_url", "api_key_env", "requests_per_second"});
  SourceConfig s;
  s.kind = get_or<std::string>(j, "kind", where, "");
  if (!kinds.count(s.kind)) throw ConfigError(where + ".kind '" + s.kind + "' is not supported");
  s.path = get_or<std::string>(j, "path", where, "");
  s.base_url = get_or<std::string>(j, "base_url", where, "");
  s.eprint_url = get_or<std::string>(j, "eprint_url", where, "");
  s.api_key_env = get_or<std::string>(j, "api_key_env", where, "");
  s.requests_per_second = get_or<double>(j, "requests_per_second", where, 0.0);
  if (s.kind == "directory" && s.path.empty()) throw ConfigError(where + " of kind directory needs a path");
  return s;
}

inline json source_json(const SourceConfig& s) {
  return {{"kind", s.kind},         {"path", s.path},       {"base_url", s.base_url},
          {"eprint_url", s.eprint_url}, {"api_key_env", s.api_key_env},
          {"requests_per_second", s.requests_per_second}};
}

inline bool safe_id(const std::string& id) { return !id.empty() && io::safe_key(id) == id; }

}  // namespace detail

/// Validates and loads a configuration document. Unknown keys are errors so
/// typos do not silently fall back to defaults.
inline PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  using detail::get_or;
  detail::expect_keys(j, "config", {"$schema", "corpus", "sources", "latex", "models", "postprocess_model", "matcher",
                                    "stats", "venue_aliases", "cache_dir", "out_dir", "jobs", "retry"});
  PipelineConfig c;
  c.base_dir = base_dir;

  const json corpus = j.value("corpus", json::object());
  detail::expect_keys(corpus, "corpus", {"window", "category", "keywords", "blacklist"});
  const json window = corpus.value("window", json::object());
  detail::expect_keys(window, "corpus.window", {"first", "last"});
  try {
    c.window.first = Date::parse(get_or<std::string>(window, "first", "corpus.window", ""));
    c.window.last = Date::parse(get_or<std::string>(window, "last", "corpus.window", ""));
  } catch (const ParseError& e) {
    throw ConfigError(std::string("corpus.window: ") + e.what());
  }
  c.category = get_or<std::string>(corpus, "category", "corpus", "");
  if (c.category.empty()) throw ConfigError("corpus.category is required");
  c.keywords = get_or<std::vector<std::string>>(corpus, "keywords", "corpus", {});
  if (c.keywords.empty()) throw ConfigError("corpus.keywords must list at least one venue keyword");
  c.blacklist = get_or<std::vector<std::string>>(corpus, "blacklist", "corpus", default_blacklist());

  const json sources = j.value("sources", json::object());
  detail::expect_keys(sources, "sources", {"preprint", "scholarly"});
  if (!sources.contains("preprint") || !sources.contains("scholarly")) {
    throw ConfigError("sources.preprint and sources.scholarly are required");
  }
  c.preprint = detail::parse_source(sources["preprint"], "sources.preprint", {"arxiv", "directory"});
  c.scholarly = detail::parse_source(sources["scholarly"], "sources.scholarly", {"semanticscholar", "directory"});

  const json latex = j.value("latex", json::object());
  detail::expect_keys(latex, "latex", {"toolchain"});
  c.toolchain = get_or<std::string>(latex, "toolchain", "latex", "auto");
  if (c.toolchain != "auto" && c.toolchain != "internal" && c.toolchain != "system") {
    throw ConfigError("latex.toolchain must be auto, internal or system");
  }

  if (!j.contains("models") || !j["models"].is_array() || j["models"].empty()) {
    throw ConfigError("models must be a non-empty array");
  }
  std::set<std::string> ids;
  for (const auto& m : j["models"]) {
    const std::string where = "models[" + std::to_string(c.models.size()) + "]";
    detail::expect_keys(m, where, {"id", "provider", "model", "base_url", "api_key_env", "mock_dir", "sampling",
                                   "runs", "requests_per_second"});
    ModelConfig mc;
    mc.id = get_or<std::string>(m, "id", where, "");
    if (!detail::safe_id(mc.id)) throw ConfigError(where + ".id must be non-empty and use [A-Za-z0-9._-]");
    if (!ids.insert(mc.id).second) throw ConfigError("duplicate model id '" + mc.id + "'");
    mc.provider = get_or<std::string>(m, "provider", where, "");
    if (mc.provider != "openai" && mc.provider != "anthropic" && mc.provider != "mock") {
      throw ConfigError(where + ".provider must be openai, anthropic or mock");
    }
    mc.model = get_or<std::string>(m, "model", where, mc.id);
    mc.base_url = get_or<std::string>(m, "base_url", where,
                                      mc.provider == "openai"      ? "https://api.openai.com/v1"
                                      : mc.provider == "anthropic" ? "https://api.anthropic.com"
                                                                   : "");
    mc.api_key_env = get_or<std::string>(m, "api_key_env", where,
                                         mc.provider == "openai"      ? "OPENAI_API_KEY"
                                         : mc.provider == "anthropic" ? "ANTHROPIC_API_KEY"
                                                                      : "");
    mc.mock_dir = get_or<std::string>(m, "mock_dir", where, "");
    if (mc.provider == "mock" && mc.mock_dir.empty()) throw ConfigError(where + " uses the mock provider without mock_dir");
    mc.sampling = m.value("sampling", json::object());
    if (!mc.sampling.is_object()) throw ConfigError(where + ".sampling must be an object");
    const json runs = m.value("runs", json::object());
    detail::expect_keys(runs, where + ".runs", {"vanilla", "iterative"});
    mc.vanilla_runs = get_or<int>(runs, "vanilla", where + ".runs", 1);
    mc.iterative_runs = get_or<int>(runs, "iterative", where + ".runs", 0);
    if (mc.vanilla_runs < 0 || mc.iterative_runs < 0 || mc.iterative_runs > mc.vanilla_runs) {
      throw ConfigError(where + ".runs: need 0 <= iterative <= vanilla (each iterative run extends a vanilla run)");
    }
    mc.requests_per_second = get_or<double>(m, "requests_per_second", where, 0.0);
    c.models.push_back(std::move(mc));
  }
  c.postprocess_model = get_or<std::string>(j, "postprocess_model", "config", c.models.front().id);
  (void)c.postprocess();

  const json matcher = j.value("matcher", json::object());
  detail::expect_keys(matcher, "matcher",
                      {"thresholds", "thresholds_file", "calibration_labels", "min_accuracy", "search_limit",
                       "ground_truth_title_threshold"});
  if (matcher.contains("thresholds")) c.matcher.thresholds = matcher["thresholds"];
  c.matcher.thresholds_file = get_or<std::string>(matcher, "thresholds_file", "matcher", "");
  c.matcher.calibration_labels = get_or<std::string>(matcher, "calibration_labels", "matcher", "");
  c.matcher.min_accuracy = get_or<std::string>(matcher, "min_accuracy", "matcher", "0.95");
  c.matcher.search_limit = get_or<int>(matcher, "search_limit", "matcher", 3);
  c.matcher.ground_truth_title = get_or<std::string>(matcher, "ground_truth_title_threshold", "matcher", "0.9");
  try {
    if (matcher::parse_decimal(c.matcher.ground_truth_title) > Ratio(1) ||
        matcher::parse_decimal(c.matcher.min_accuracy) > Ratio(1)) {
      throw ConfigError("matcher ratios must lie in [0,1]");
    }
  } catch (const ParseError& e) {
    throw ConfigError(std::string("matcher: ") + e.what());
  }
  const int sources_given = c.matcher.thresholds.has_value() + !c.matcher.thresholds_file.empty() +
                            !c.matcher.calibration_labels.empty();
  if (sources_given != 1) {
    throw ConfigError("matcher needs exactly one of thresholds, thresholds_file or calibration_labels");
  }
  if (c.matcher.search_limit < 1) throw ConfigError("matcher.search_limit must be positive");

  const json stats = j.value("stats", json::object());
  detail::expect_keys(stats, "stats", {"subperiod_interior"});
  c.subperiod_interior = get_or<std::vector<std::int64_t>>(stats, "subperiod_interior", "stats", {1989, 2000});

  c.venue_aliases = get_or<std::string>(j, "venue_aliases", "config", "");
  c.cache_dir = get_or<std::string>(j, "cache_dir", "config", "cache");
  c.out_dir = get_or<std::string>(j, "out_dir", "config", "out");
  c.jobs = get_or<int>(j, "jobs", "config", 1);
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  const json retry = j.value("retry", json::object());
  detail::expect_keys(retry, "retry", {"max_attempts", "initial_backoff_ms"});
  c.max_attempts = get_or<int>(retry, "max_attempts", "retry", 4);
  c.initial_backoff_ms = get_or<int>(retry, "initial_backoff_ms", "retry", 500);
  if (c.max_attempts < 1 || c.initial_backoff_ms < 0) throw ConfigError("retry settings out of range");
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

/// Normalized snapshot with every default filled in, recorded in manifests.
/// Paths appear as written, never resolved, so snapshots do not depend on the
/// working directory.
inline json to_json(const PipelineConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) {
    models.push_back({{"id", m.id},
                      {"provider", m.provider},
                      {"model", m.model},
                      {"base_url", m.base_url},
                      {"api_key_env", m.api_key_env},
                      {"mock_dir", m.mock_dir},
                      {"sampling", m.sampling},
                      {"runs", {{"vanilla", m.vanilla_runs}, {"iterative", m.iterative_runs}}},
                      {"requests_per_second", m.requests_per_second}});
  }
  json matcher = {{"thresholds_file", c.matcher.thresholds_file},
                  {"calibration_labels", c.matcher.calibration_labels},
                  {"min_accuracy", c.matcher.min_accuracy},
                  {"search_limit", c.matcher.search_limit},
                  {"ground_truth_title_threshold", c.matcher.ground_truth_title}};
  matcher["thresholds"] = c.matcher.thresholds ? *c.matcher.thresholds : json(nullptr);
  return {{"corpus",
           {{"window", {{"first", c.window.first.str()}, {"last", c.window.last.str()}}},
            {"category", c.category},
            {"keywords", c.keywords},
            {"blacklist", c.blacklist}}},
          {"sources", {{"preprint", detail::source_json(c.preprint)}, {"scholarly", detail::source_json(c.scholarly)}}},
          {"latex", {{"toolchain", c.toolchain}}},
          {"models", models},
          {"postprocess_model", c.postprocess_model},
          {"matcher", matcher},
          {"stats", {{"subperiod_interior", c.subperiod_interior}}},
          {"venue_aliases", c.venue_aliases},
          {"cache_dir", c.cache_dir},
          {"out_dir", c.out_dir},
          {"jobs", c.jobs},
          {"retry", {{"max_attempts", c.max_attempts}, {"initial_backoff_ms", c.initial_backoff_ms}}}};
}

}  // namespace citeaudit::orchestrator
