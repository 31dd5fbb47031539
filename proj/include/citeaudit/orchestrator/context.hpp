#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "citeaudit/corpus/cache.hpp"
#include "citeaudit/corpus/http_clients.hpp"
#include "citeaudit/corpus/index_client.hpp"
#include "citeaudit/corpus/venue.hpp"
#include "citeaudit/docprep/toolchain.hpp"
#include "citeaudit/llmgate/provider.hpp"
#include "citeaudit/matcher/matcher.hpp"
#include "citeaudit/orchestrator/config.hpp"
#include "citeaudit/orchestrator/layout.hpp"
#include "citeaudit/orchestrator/manifest.hpp"

namespace citeaudit::orchestrator {

/// Replays responses stored under the prompt hash and records new ones. One
/// instance per (model, run) scope keeps repeated runs independent samples.
class CachingProvider : public llmgate::Provider {
 public:
  CachingProvider(std::shared_ptr<llmgate::Provider> inner, fs::path dir, bool refresh)
      : inner_(std::move(inner)), dir_(std::move(dir)), refresh_(refresh) {}

  std::string name() const override { return inner_->name(); }

  std::string send(const llmgate::Messages& messages, const llmgate::SamplingParams& params) override {
    const auto path = dir_ / (llmgate::prompt_hash(messages) + ".txt");
    std::error_code ec;
    if (!refresh_ && fs::exists(path, ec)) {
      ++hits_;
      return io::read_file(path);
    }
    auto out = inner_->send(messages, params);
    io::write_if_changed(path, out);
    return out;
  }

  int hits() const { return hits_.load(); }

 private:
  std::shared_ptr<llmgate::Provider> inner_;
  fs::path dir_;
  bool refresh_;
  std::atomic<int> hits_{0};
};

struct Overrides {
  std::optional<std::string> cache_dir;
  std::optional<std::string> out_dir;
  std::optional<fs::path> mock_dir;
  bool refresh = false;
};

/// Services shared by the stages. Everything that talks to the outside world
/// is built on first use, so stages that only read artifacts never need
/// credentials or network access.
class Context {
 public:
  Context(PipelineConfig cfg, const Overrides& ov) : cfg_(std::move(cfg)), refresh_(ov.refresh), mock_(ov.mock_dir) {
    if (ov.cache_dir) cfg_.cache_dir = *ov.cache_dir;
    if (ov.out_dir) cfg_.out_dir = *ov.out_dir;
    // CLI directories are relative to the working directory, config ones to the file
    layout_.out = ov.out_dir ? fs::path(*ov.out_dir) : cfg_.resolve(cfg_.out_dir);
    layout_.cache = ov.cache_dir ? fs::path(*ov.cache_dir) : cfg_.resolve(cfg_.cache_dir);
    venues_ = cfg_.venue_aliases.empty() ? VenueTable::defaults() : VenueTable::load(cfg_.resolve(cfg_.venue_aliases));
  }

  const PipelineConfig& config() const { return cfg_; }
  const Layout& layout() const { return layout_; }
  const VenueTable& venues() const { return venues_; }
  bool refresh() const { return refresh_; }
  Manifest& manifest() { return manifest_; }

  const matcher::Thresholds& thresholds() {
    std::lock_guard lock(mutex_);
    if (!thresholds_) thresholds_ = load_thresholds();
    return *thresholds_;
  }

  bool thresholds_loaded() {
    std::lock_guard lock(mutex_);
    return thresholds_.has_value();
  }

  const docprep::LatexToolchain& toolchain() {
    std::lock_guard lock(mutex_);
    if (!toolchain_) toolchain_ = docprep::make_toolchain(cfg_.toolchain);
    return *toolchain_;
  }

  PreprintIndex& preprints() {
    std::lock_guard lock(mutex_);
    if (!preprints_) {
      const auto& s = cfg_.preprint;
      if (s.kind == "directory") {
        preprints_ = std::make_shared<DirectoryPreprintIndex>(cfg_.resolve(s.path));
      } else {
        preprints_ = std::make_shared<ArxivClient>(
            s.base_url.empty() ? "https://export.arxiv.org/api" : s.base_url,
            s.eprint_url.empty() ? "https://arxiv.org/e-print" : s.eprint_url,
            std::make_shared<RateLimiter>(s.requests_per_second > 0 ? s.requests_per_second : 1.0 / 3.0),
            cfg_.retry());
      }
    }
    return *preprints_;
  }

  ScholarlyIndex& index() {
    std::lock_guard lock(mutex_);
    if (!index_) {
      const auto& s = cfg_.scholarly;
      std::shared_ptr<ScholarlyIndex> inner;
      if (s.kind == "directory") {
        inner = std::make_shared<DirectoryScholarlyIndex>(cfg_.resolve(s.path));
      } else {
        inner = std::make_shared<SemanticScholarClient>(
            s.base_url.empty() ? "https://api.semanticscholar.org/graph/v1" : s.base_url,
            std::make_shared<RateLimiter>(s.requests_per_second > 0 ? s.requests_per_second : 1.0), cfg_.retry(),
            s.api_key_env.empty() ? "S2_API_KEY" : s.api_key_env);
      }
      raw_index_ = inner;
      index_ = std::make_shared<CachedScholarlyIndex>(inner, DiskCache(layout_.cache / "index", refresh_));
    }
    return *index_;
  }

  /// Provider for one model, wrapped in a response cache for `scope`
  /// ("ground_truth", "vanilla-1", ...).
  llmgate::Provider& provider(const std::string& model_id, const std::string& scope) {
    std::lock_guard lock(mutex_);
    const auto key = model_id + "\n" + scope;
    auto it = cached_.find(key);
    if (it != cached_.end()) return *it->second;
    auto inner = raw_provider_locked(model_id);
    auto p = std::make_shared<CachingProvider>(inner, layout_.llm_cache(model_id, scope), refresh_);
    cached_[key] = p;
    return *p;
  }

  /// Test hook: substitute a provider for a model.
  void set_provider(const std::string& model_id, std::shared_ptr<llmgate::Provider> p) {
    std::lock_guard lock(mutex_);
    raw_[model_id] = std::move(p);
  }
  void set_index(std::shared_ptr<ScholarlyIndex> idx) {
    std::lock_guard lock(mutex_);
    raw_index_ = idx;
    index_ = std::make_shared<CachedScholarlyIndex>(std::move(idx), DiskCache(layout_.cache / "index", refresh_));
  }

 private:
  std::shared_ptr<llmgate::Provider> raw_provider_locked(const std::string& model_id) {
    auto it = raw_.find(model_id);
    if (it != raw_.end()) return it->second;
    const auto& m = cfg_.model(model_id);
    std::shared_ptr<llmgate::Provider> p;
    if (mock_) {
      p = std::make_shared<llmgate::MockProvider>(*mock_);
    } else if (m.provider == "mock") {
      p = std::make_shared<llmgate::MockProvider>(cfg_.resolve(m.mock_dir));
    } else {
      auto limiter = std::make_shared<RateLimiter>(m.requests_per_second);
      if (m.provider == "openai") {
        p = std::make_shared<llmgate::OpenAIProvider>(m.base_url, m.model, m.api_key_env, limiter, cfg_.retry());
      } else {
        p = std::make_shared<llmgate::AnthropicProvider>(m.base_url, m.model, m.api_key_env, limiter, cfg_.retry());
      }
    }
    raw_[model_id] = p;
    return p;
  }

  matcher::Thresholds load_thresholds() const {
    const auto& mc = cfg_.matcher;
    if (mc.thresholds) return matcher::thresholds_from_json(*mc.thresholds);
    if (!mc.thresholds_file.empty()) {
      const auto path = cfg_.resolve(mc.thresholds_file);
      try {
        auto t = matcher::thresholds_from_json(json::parse(io::read_file(path)));
        t.provenance = "calibrated:" + mc.thresholds_file;
        return t;
      } catch (const json::exception& e) {
        throw ConfigError("bad thresholds file " + path.string() + ": " + e.what());
      } catch (const IoError& e) {
        throw ConfigError(e.what());
      }
    }
    matcher::CalibrationObjective obj;
    obj.min_accuracy = matcher::parse_decimal(mc.min_accuracy);
    auto r = matcher::calibrate(matcher::load_labelled_pairs(cfg_.resolve(mc.calibration_labels)), obj);
    r.thresholds.provenance = "calibrated:" + mc.calibration_labels;
    return r.thresholds;
  }

  PipelineConfig cfg_;
  bool refresh_;
  std::optional<fs::path> mock_;
  Layout layout_;
  VenueTable venues_;
  Manifest manifest_;
  std::mutex mutex_;
  std::optional<matcher::Thresholds> thresholds_;
  std::unique_ptr<docprep::LatexToolchain> toolchain_;
  std::shared_ptr<PreprintIndex> preprints_;
  std::shared_ptr<ScholarlyIndex> raw_index_;
  std::shared_ptr<ScholarlyIndex> index_;
  std::map<std::string, std::shared_ptr<llmgate::Provider>> raw_;
  std::map<std::string, std::shared_ptr<CachingProvider>> cached_;
};

}  // namespace citeaudit::orchestrator
