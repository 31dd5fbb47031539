#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "citeaudit/orchestrator/report.hpp"

namespace citeaudit::orchestrator {

enum ExitCode : int { kOk = 0, kStageFailed = 1, kConfigInvalid = 2, kLocked = 3 };

struct StageRequest {
  std::set<std::string> stages;
  RunSelection runs;
  /// `generate --strategy iterative` maps onto the iterate stage.
  std::optional<llmgate::Strategy> strategy;
};

inline StageRequest all_stages() {
  StageRequest r;
  for (const char* s : kStageOrder) r.stages.insert(s);
  return r;
}

inline bool known_stage(const std::string& s) {
  return std::find_if(std::begin(kStageOrder), std::end(kStageOrder), [&](const char* k) { return s == k; }) !=
         std::end(kStageOrder);
}

inline void run_stage(Context& ctx, const std::string& name, const StageRequest& req) {
  if (name == "ingest") {
    stage_ingest(ctx);
  } else if (name == "prepare") {
    stage_prepare(ctx);
  } else if (name == "generate") {
    if (req.strategy == llmgate::Strategy::Iterative) {
      stage_iterate(ctx, req.runs);
    } else {
      stage_generate(ctx, req.runs);
    }
  } else if (name == "verify") {
    stage_verify(ctx, req.runs);
  } else if (name == "iterate") {
    stage_iterate(ctx, req.runs);
  } else if (name == "analyze") {
    stage_analyze(ctx);
  } else if (name == "graph") {
    stage_graph(ctx);
  } else if (name == "report") {
    stage_report(ctx);
  }
}

/// Hash of the corpus the later stages see; empty before ingest ran.
inline std::string corpus_hash(const Layout& layout) {
  std::error_code ec;
  if (!fs::exists(layout.papers(), ec)) return "";
  return io::sha256_hex(io::read_file(layout.papers()));
}

inline void refresh_manifest_inputs(Context& ctx) {
  auto& m = ctx.manifest();
  if (auto h = corpus_hash(ctx.layout()); !h.empty()) m.corpus_hash = h;
  if (ctx.thresholds_loaded()) m.thresholds = matcher::to_json(ctx.thresholds());
}

/// Runs the requested stages in dependency order against an existing
/// context. The manifest is rewritten after every stage, including the one
/// that failed.
inline int run_stages(Context& ctx, const StageRequest& req, const json& overrides = json::object()) {
  const auto& layout = ctx.layout();
  for (const auto& s : req.stages) {
    if (!known_stage(s)) {
      spdlog::error("unknown stage '{}'", s);
      return kConfigInvalid;
    }
  }
  std::optional<Lockfile> lock;
  try {
    lock.emplace(layout.lockfile());
  } catch (const LockHeldError& e) {
    spdlog::error("{}", e.what());
    return kLocked;
  }
  auto& m = ctx.manifest();
  if (auto prev = read_json(layout.manifest())) m.merge_previous(*prev);
  m.config = to_json(ctx.config());
  if (!overrides.empty()) m.config["overrides"] = overrides;
  m.templates = llmgate::templates::hashes();
  m.started_at = io::iso8601(io::now_epoch_seconds());
  m.finished_at.clear();
  m.failed_stage.clear();
  refresh_manifest_inputs(ctx);

  for (const char* name : kStageOrder) {
    if (!req.stages.count(name)) continue;
    spdlog::info("stage {}", name);
    m.stage(name) = StageRecord{};
    int code = kOk;
    try {
      run_stage(ctx, name, req);
      m.stage(name).status = "ok";
    } catch (const ConfigError& e) {
      m.stage(name).error = e.what();
      code = kConfigInvalid;
    } catch (const std::exception& e) {
      m.stage(name).error = e.what();
      code = kStageFailed;
    }
    refresh_manifest_inputs(ctx);
    if (code != kOk) {
      m.stage(name).status = "failed";
      m.failed_stage = name;
      m.finished_at = io::iso8601(io::now_epoch_seconds());
      spdlog::error("stage {} failed: {}", name, m.stage(name).error);
      m.write(layout);
      return code;
    }
    m.write(layout);
  }
  m.finished_at = io::iso8601(io::now_epoch_seconds());
  m.write(layout);
  return kOk;
}

inline json overrides_json(const Overrides& ov) {
  json j = json::object();
  if (ov.mock_dir) j["mock"] = ov.mock_dir->generic_string();
  return j;
}

inline int run_pipeline(const PipelineConfig& cfg, const StageRequest& req, const Overrides& ov = {}) {
  try {
    Context ctx(cfg, ov);
    return run_stages(ctx, req, overrides_json(ov));
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfigInvalid;
  }
}

}  // namespace citeaudit::orchestrator
