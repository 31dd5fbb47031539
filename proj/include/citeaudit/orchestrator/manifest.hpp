#pragma once

#include <signal.h>
#include <sys/types.h>
#include <unistd.h>

#include <fcntl.h>

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/exclusion.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/orchestrator/layout.hpp"

namespace citeaudit::orchestrator {

inline constexpr const char* kStageOrder[] = {"ingest", "prepare", "generate", "verify",
                                              "iterate", "analyze", "graph", "report"};

struct ExclusionRecord {
  std::string id;  // paper id, or "<run label>:<paper id>"
  Exclusion exclusion;
};

struct StageRecord {
  std::string status = "pending";  // ok | failed
  std::map<std::string, std::int64_t> counts;
  std::vector<ExclusionRecord> exclusions;
  std::string error;
};

/// Run manifest. Updated after every stage so a failure still leaves a record
/// of what completed and where it stopped.
class Manifest {
 public:
  json config;
  json templates;
  std::string corpus_hash;
  json thresholds;
  std::string started_at;
  std::string finished_at;
  std::map<std::string, StageRecord> stages;
  std::string failed_stage;

  /// Hash over everything that determines results; operational settings
  /// (directories, parallelism, retries) and timestamps are left out.
  std::string hash() const {
    json cfg = config;
    for (const char* k : {"cache_dir", "out_dir", "jobs", "retry"}) cfg.erase(k);
    const json basis = {{"config", cfg}, {"templates", templates}, {"corpus_hash", corpus_hash},
                        {"thresholds", thresholds}};
    return io::sha256_hex(basis.dump());
  }

  StageRecord& stage(const std::string& name) {
    std::lock_guard lock(mutex_);
    return stages[name];
  }

  void add_exclusion(const std::string& stage_name, const std::string& id, const Exclusion& e) {
    std::lock_guard lock(mutex_);
    auto& s = stages[stage_name];
    s.exclusions.push_back({id, e});
    ++s.counts["quarantined"];
  }

  void count(const std::string& stage_name, const std::string& key, std::int64_t n = 1) {
    std::lock_guard lock(mutex_);
    stages[stage_name].counts[key] += n;
  }

  json to_json() const {
    json st = json::object();
    for (const auto& [name, s] : stages) {
      auto ex = s.exclusions;
      std::sort(ex.begin(), ex.end(), [](const auto& a, const auto& b) {
        return std::tie(a.id, a.exclusion.reason) < std::tie(b.id, b.exclusion.reason);
      });
      json exj = json::array();
      for (const auto& e : ex) {
        exj.push_back({{"id", e.id}, {"reason", e.exclusion.reason}, {"detail", e.exclusion.detail}});
      }
      st[name] = {{"status", s.status}, {"counts", s.counts}, {"exclusions", exj}};
      if (!s.error.empty()) st[name]["error"] = s.error;
    }
    return {{"manifest_version", 1},
            {"manifest_hash", hash()},
            {"config", config},
            {"templates", templates},
            {"corpus_hash", corpus_hash},
            {"thresholds", thresholds},
            {"started_at", started_at},
            {"finished_at", finished_at},
            {"stages", st},
            {"failed_stage", failed_stage.empty() ? json(nullptr) : json(failed_stage)}};
  }

  /// Keeps records of stages run earlier into the same output directory.
  void merge_previous(const json& j) {
    if (!j.contains("stages") || !j["stages"].is_object()) return;
    for (const auto& [name, s] : j["stages"].items()) {
      StageRecord r;
      r.status = s.value("status", "pending");
      r.counts = s.value("counts", std::map<std::string, std::int64_t>{});
      r.error = s.value("error", "");
      for (const auto& e : s.value("exclusions", json::array())) {
        r.exclusions.push_back({e.value("id", ""), {e.value("reason", ""), e.value("detail", "")}});
      }
      stages[name] = std::move(r);
    }
    if (corpus_hash.empty()) corpus_hash = j.value("corpus_hash", "");
    if (thresholds.is_null() && j.contains("thresholds")) thresholds = j["thresholds"];
  }

  void write(const Layout& layout) const { write_json(layout.manifest(), to_json()); }

 private:
  mutable std::mutex mutex_;
};

class LockHeldError : public Error {
 public:
  using Error::Error;
};

/// Exclusive ownership of an output directory. A lock left by a dead process
/// is taken over.
class Lockfile {
 public:
  explicit Lockfile(fs::path path) : path_(std::move(path)) {
    fs::create_directories(path_.parent_path());
    for (int attempt = 0; attempt < 2; ++attempt) {
      const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
      if (fd >= 0) {
        const std::string pid = std::to_string(::getpid()) + "\n";
        const auto written = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        if (written != static_cast<ssize_t>(pid.size())) throw IoError("cannot write lockfile " + path_.string());
        held_ = true;
        return;
      }
      long owner = 0;
      try {
        owner = std::stol(io::read_file(path_));
      } catch (...) {
      }
      if (owner > 0 && ::kill(static_cast<pid_t>(owner), 0) == 0) {
        throw LockHeldError("output directory is locked by process " + std::to_string(owner) + " (" +
                            path_.string() + ")");
      }
      std::error_code ec;
      fs::remove(path_, ec);
    }
    throw LockHeldError("cannot acquire lock " + path_.string());
  }
  ~Lockfile() {
    if (held_) {
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  Lockfile(const Lockfile&) = delete;
  Lockfile& operator=(const Lockfile&) = delete;

 private:
  fs::path path_;
  bool held_ = false;
};

}  // namespace citeaudit::orchestrator
