#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/common/text.hpp"
#include "citeaudit/corpus/cache.hpp"
#include "citeaudit/corpus/types.hpp"

namespace citeaudit {

namespace fs = std::filesystem;

/// Scholarly index (Semantic Scholar or a stand-in). search() returns hits in
/// the index's own relevance order; hits may omit reference lists.
class ScholarlyIndex {
 public:
  virtual ~ScholarlyIndex() = default;
  virtual std::string service() const = 0;
  virtual std::vector<IndexRecord> search(const std::string& title, int limit) = 0;
  virtual std::optional<IndexRecord> fetch(const std::string& index_id) = 0;
};

/// Preprint index (arXiv or a stand-in).
class PreprintIndex {
 public:
  virtual ~PreprintIndex() = default;
  virtual std::string service() const = 0;
  virtual std::vector<CandidateStub> query(const std::string& category,
                                           const DateRange& window) = 0;
  /// Unpacks the source bundle of `preprint_id` into `dest`. False when the
  /// index has no source for it.
  virtual bool fetch_source(const std::string& preprint_id, const fs::path& dest) = 0;
};

/// Projects a Semantic Scholar Graph API paper object onto IndexRecord.
/// References without a paperId are dropped: they cannot be enriched.
inline IndexRecord index_record_from_s2(const nlohmann::json& j) {
  auto int_field = [&](const char* key) -> std::optional<int> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_number_integer()) throw ParseError(std::string("field ") + key + " is not an integer");
    return j[key].get<int>();
  };
  if (!j.is_object() || !j.contains("paperId") || !j["paperId"].is_string()) {
    throw ParseError("index record without paperId: " + j.dump().substr(0, 200));
  }
  IndexRecord r;
  r.index_id = j["paperId"].get<std::string>();
  if (j.contains("title") && j["title"].is_string()) r.title = j["title"].get<std::string>();
  r.year = int_field("year");
  if (j.contains("venue") && j["venue"].is_string()) r.venue = j["venue"].get<std::string>();
  if (r.venue.empty() && j.contains("journal") && j["journal"].is_object() &&
      j["journal"].contains("name") && j["journal"]["name"].is_string()) {
    r.venue = j["journal"]["name"].get<std::string>();
  }
  if (j.contains("authors") && j["authors"].is_array()) {
    for (const auto& a : j["authors"]) {
      if (a.contains("name") && a["name"].is_string()) r.authors.push_back(a["name"].get<std::string>());
    }
  }
  r.citation_count = int_field("citationCount");
  r.influential_citation_count = int_field("influentialCitationCount");
  r.reference_count = int_field("referenceCount");
  if (j.contains("references") && j["references"].is_array()) {
    for (const auto& ref : j["references"]) {
      if (!ref.contains("paperId") || !ref["paperId"].is_string()) continue;
      r.reference_ids.push_back(ref["paperId"].get<std::string>());
      r.reference_titles.push_back(ref.contains("title") && ref["title"].is_string()
                                       ? ref["title"].get<std::string>()
                                       : std::string());
    }
  }
  if (j.contains("externalIds") && j["externalIds"].is_object() &&
      j["externalIds"].contains("ArXiv") && j["externalIds"]["ArXiv"].is_string()) {
    r.preprint_id = j["externalIds"]["ArXiv"].get<std::string>();
  }
  return r;
}

namespace detail {

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> kWords = {"a",  "an", "and", "as",   "at",   "by",  "for",
                                               "from", "in", "into", "is", "of", "on", "or",
                                               "the", "to", "via", "with"};
  return kWords;
}

inline std::set<std::string> title_terms(const std::string& title) {
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stopwords().count(cur)) out.insert(cur);
    cur.clear();
  };
  for (char32_t c : text::normalize(title)) {
    if (text::is_space(c) || text::is_punct(c)) {
      flush();
    } else {
      cur += text::encode_utf8(std::u32string(1, c));
    }
  }
  flush();
  return out;
}

}  // namespace detail

/// Directory of canned Semantic Scholar responses: `<root>/papers/<id>.json`.
/// Search ranks by the share of query terms found in the title and returns
/// nothing below `min_overlap`, so unrelated queries come back empty as they
/// would from a real relevance engine.
class DirectoryScholarlyIndex : public ScholarlyIndex {
 public:
  explicit DirectoryScholarlyIndex(fs::path root, double min_overlap = 0.5)
      : root_(std::move(root)), min_overlap_(min_overlap) {
    const auto dir = root_ / "papers";
    if (!fs::is_directory(dir)) throw IoError("scholarly index directory missing: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      IndexRecord rec;
      try {
        rec = index_record_from_s2(nlohmann::json::parse(io::read_file(f)));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(f.string() + ": " + e.what());
      } catch (const ParseError& e) {
        throw ParseError(f.string() + ": " + e.what());
      }
      const std::string id = rec.index_id;
      records_.emplace(id, std::move(rec));
    }
  }

  std::string service() const override { return "scholarly"; }

  std::vector<IndexRecord> search(const std::string& title, int limit) override {
    ++calls_;
    const auto query = detail::title_terms(title);
    if (query.empty() || limit <= 0) return {};
    struct Hit {
      std::size_t shared;
      const IndexRecord* rec;
    };
    std::vector<Hit> hits;
    for (const auto& [id, rec] : records_) {
      const auto terms = detail::title_terms(rec.title);
      std::size_t shared = 0;
      for (const auto& t : query) shared += terms.count(t);
      if (static_cast<double>(shared) >= min_overlap_ * static_cast<double>(query.size()) &&
          shared > 0) {
        hits.push_back({shared, &rec});
      }
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const Hit& a, const Hit& b) { return a.shared > b.shared; });
    std::vector<IndexRecord> out;
    for (const auto& h : hits) {
      if (static_cast<int>(out.size()) == limit) break;
      IndexRecord r = *h.rec;
      r.reference_ids.clear();
      r.reference_titles.clear();
      out.push_back(std::move(r));
    }
    return out;
  }

  std::optional<IndexRecord> fetch(const std::string& index_id) override {
    ++calls_;
    auto it = records_.find(index_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  /// Number of search/fetch calls served; tests use it to observe cache hits.
  int calls() const { return calls_.load(); }

 private:
  fs::path root_;
  double min_overlap_;
  std::map<std::string, IndexRecord> records_;
  std::atomic<int> calls_{0};
};

/// Read-through disk cache in front of any ScholarlyIndex. Not-found answers
/// are cached too, as explicit markers.
class CachedScholarlyIndex : public ScholarlyIndex {
 public:
  CachedScholarlyIndex(std::shared_ptr<ScholarlyIndex> inner, DiskCache cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  std::string service() const override { return inner_->service(); }

  std::vector<IndexRecord> search(const std::string& title, int limit) override {
    const std::string key = "search:" + std::to_string(limit) + ":" + text::normalize_utf8(title);
    if (auto hit = cache_.get(service(), "search", key)) {
      try {
        std::vector<IndexRecord> out;
        for (const auto& r : *hit) out.push_back(index_record_from_json(r));
        return out;
      } catch (const std::exception& e) {
        spdlog::warn("recomputing malformed cached search '{}': {}", title, e.what());
      }
    }
    auto results = inner_->search(title, limit);
    nlohmann::json payload = nlohmann::json::array();
    for (const auto& r : results) payload.push_back(to_json(r));
    cache_.put(service(), "search", key, payload);
    return results;
  }

  std::optional<IndexRecord> fetch(const std::string& index_id) override {
    if (auto hit = cache_.get(service(), "paper", index_id)) {
      try {
        if (hit->contains("not_found")) return std::nullopt;
        return index_record_from_json(*hit);
      } catch (const std::exception& e) {
        spdlog::warn("recomputing malformed cached record {}: {}", index_id, e.what());
      }
    }
    auto rec = inner_->fetch(index_id);
    cache_.put(service(), "paper", index_id,
               rec ? to_json(*rec) : nlohmann::json{{"not_found", true}});
    return rec;
  }

  const DiskCache& cache() const { return cache_; }

 private:
  std::shared_ptr<ScholarlyIndex> inner_;
  DiskCache cache_;
};

/// Directory-backed preprint index: `<root>/preprints.json` holds an array of
/// stubs, `<root>/sources/<id>/` the unpacked source bundles.
class DirectoryPreprintIndex : public PreprintIndex {
 public:
  explicit DirectoryPreprintIndex(fs::path root) : root_(std::move(root)) {}

  std::string service() const override { return "preprint"; }

  std::vector<CandidateStub> query(const std::string& category, const DateRange& window) override {
    nlohmann::json all;
    try {
      all = nlohmann::json::parse(io::read_file(root_ / "preprints.json"));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError((root_ / "preprints.json").string() + ": " + e.what());
    }
    if (!all.is_array()) throw ParseError("preprints.json must hold an array");
    std::vector<CandidateStub> out;
    for (std::size_t i = 0; i < all.size(); ++i) {
      CandidateStub s;
      try {
        s = stub_from_json(all[i]);
      } catch (const std::exception& e) {
        const std::string id = all[i].is_object() ? all[i].value("preprint_id", "?") : "?";
        throw ParseError("preprint record #" + std::to_string(i) + " (" + id + "): " + e.what());
      }
      if (s.category == category && window.contains(s.posted_date)) out.push_back(std::move(s));
    }
    return out;
  }

  bool fetch_source(const std::string& preprint_id, const fs::path& dest) override {
    const auto src = root_ / "sources" / preprint_id;
    if (!fs::is_directory(src)) return false;
    fs::create_directories(dest);
    fs::copy(src, dest, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    return true;
  }

 private:
  fs::path root_;
};

}  // namespace citeaudit
