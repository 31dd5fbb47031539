#pragma once

#include <spdlog/spdlog.h>

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "citeaudit/common/io.hpp"

namespace citeaudit {

/// On-disk response cache, `<root>/<service>/<key>.json`. Entries are keyed by
/// (endpoint, id, schema version); an entry whose header does not match, or
/// that fails to parse, is a miss and gets rewritten on the next put.
class DiskCache {
 public:
  static constexpr int kSchemaVersion = 1;

  explicit DiskCache(std::filesystem::path root, bool refresh = false)
      : root_(std::move(root)), refresh_(refresh) {}

  std::filesystem::path path_for(const std::string& service, const std::string& id) const {
    return root_ / service / (io::safe_key(id) + ".json");
  }

  std::optional<nlohmann::json> get(const std::string& service, const std::string& endpoint,
                                    const std::string& id) const {
    if (refresh_) return std::nullopt;
    const auto path = path_for(service, id);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      auto j = nlohmann::json::parse(io::read_file(path));
      if (j.value("schema_version", 0) != kSchemaVersion || j.value("endpoint", "") != endpoint ||
          j.value("id", "") != id || !j.contains("payload")) {
        return std::nullopt;
      }
      return std::move(j["payload"]);
    } catch (const std::exception& e) {
      spdlog::warn("ignoring corrupt cache entry {}: {}", path.string(), e.what());
      return std::nullopt;
    }
  }

  void put(const std::string& service, const std::string& endpoint, const std::string& id,
           const nlohmann::json& payload) const {
    const nlohmann::json entry = {{"schema_version", kSchemaVersion},
                                  {"endpoint", endpoint},
                                  {"id", id},
                                  {"payload", payload}};
    io::write_if_changed(path_for(service, id), entry.dump(2) + "\n");
  }

  const std::filesystem::path& root() const { return root_; }
  bool refresh() const { return refresh_; }

 private:
  std::filesystem::path root_;
  bool refresh_;
};

}  // namespace citeaudit
