#pragma once

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/http.hpp"
#include "citeaudit/corpus/index_client.hpp"

namespace citeaudit {

/// Semantic Scholar Graph API client. The API key, if any, comes from the
/// named environment variable.
class SemanticScholarClient : public ScholarlyIndex {
 public:
  static constexpr const char* kSearchFields =
      "title,year,venue,journal,authors,citationCount,influentialCitationCount,referenceCount,"
      "externalIds";
  static constexpr const char* kPaperFields =
      "title,year,venue,journal,authors,citationCount,influentialCitationCount,referenceCount,"
      "externalIds,references.paperId,references.title";

  SemanticScholarClient(std::string base_url, std::shared_ptr<RateLimiter> limiter,
                        RetryPolicy retry, std::string api_key_env = "S2_API_KEY")
      : http_(std::move(base_url), std::move(limiter), retry) {
    if (const char* key = std::getenv(api_key_env.c_str()); key && *key) {
      headers_.emplace("x-api-key", key);
    }
  }

  std::string service() const override { return "semanticscholar"; }

  std::vector<IndexRecord> search(const std::string& title, int limit) override {
    if (limit <= 0) return {};
    const auto res = http_.get("/paper/search",
                               {{"query", title},
                                {"limit", std::to_string(limit)},
                                {"fields", kSearchFields}},
                               headers_);
    if (res.status == 404) return {};
    expect_ok(res, "search");
    const auto body = parse(res.body, "search");
    std::vector<IndexRecord> out;
    if (!body.contains("data") || body["data"].is_null()) return out;
    if (!body["data"].is_array()) throw ParseError("search response 'data' is not an array");
    for (const auto& item : body["data"]) {
      out.push_back(index_record_from_s2(item));
      if (static_cast<int>(out.size()) == limit) break;
    }
    return out;
  }

  std::optional<IndexRecord> fetch(const std::string& index_id) override {
    const auto res = http_.get("/paper/" + index_id, {{"fields", kPaperFields}}, headers_);
    if (res.status == 404) return std::nullopt;
    expect_ok(res, "paper " + index_id);
    return index_record_from_s2(parse(res.body, "paper " + index_id));
  }

 private:
  static void expect_ok(const HttpResponse& res, const std::string& what) {
    if (res.status != 200) {
      throw TransportError("scholarly index " + what + ": HTTP " + std::to_string(res.status),
                           res.status);
    }
  }
  static nlohmann::json parse(const std::string& body, const std::string& what) {
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("scholarly index " + what + ": malformed JSON: " + e.what());
    }
  }

  HttpClient http_;
  httplib::Headers headers_;
};

namespace detail {

inline std::string xml_unescape(std::string s) {
  static const std::pair<const char*, const char*> kEntities[] = {
      {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}, {"&amp;", "&"}};
  for (const auto& [from, to] : kEntities) {
    std::string::size_type pos = 0;
    const std::string f(from);
    while ((pos = s.find(f, pos)) != std::string::npos) {
      s.replace(pos, f.size(), to);
      pos += std::strlen(to);
    }
  }
  return s;
}

inline std::optional<std::string> xml_element(const std::string& xml, const std::string& tag) {
  const std::regex re("<" + tag + R"((?:\s[^>]*)?>([\s\S]*?)</)" + tag + ">");
  std::smatch m;
  if (!std::regex_search(xml, m, re)) return std::nullopt;
  return xml_unescape(m[1].str());
}

inline std::string collapse_ws(const std::string& s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

/// Parses one page of an arXiv Atom feed. Entries lacking an id or a
/// published date raise a ParseError naming the entry.
inline std::vector<CandidateStub> parse_arxiv_feed(const std::string& xml) {
  std::vector<CandidateStub> out;
  static const std::regex kEntry(R"(<entry>([\s\S]*?)</entry>)");
  static const std::regex kCategory(R"re(<arxiv:primary_category[^>]*term="([^"]+)")re");
  static const std::regex kLicense(R"re(<link[^>]*rel="license"[^>]*href="([^"]+)")re");
  static const std::regex kLicenseAlt(R"re(<link[^>]*href="([^"]+)"[^>]*rel="license")re");
  std::size_t n = 0;
  for (auto it = std::sregex_iterator(xml.begin(), xml.end(), kEntry); it != std::sregex_iterator();
       ++it, ++n) {
    const std::string entry = (*it)[1].str();
    const auto id_url = detail::xml_element(entry, "id");
    const auto published = detail::xml_element(entry, "published");
    if (!id_url || !published) {
      throw ParseError("arXiv feed entry #" + std::to_string(n) + " lacks id or published date" +
                       (id_url ? " (" + *id_url + ")" : ""));
    }
    CandidateStub s;
    std::string id = detail::collapse_ws(*id_url);
    if (auto slash = id.find("/abs/"); slash != std::string::npos) id = id.substr(slash + 5);
    static const std::regex kVersion(R"(v\d+$)");
    s.preprint_id = std::regex_replace(id, kVersion, "");
    s.title = detail::collapse_ws(detail::xml_element(entry, "title").value_or(""));
    try {
      s.posted_date = Date::parse(detail::collapse_ws(*published));
    } catch (const ParseError& e) {
      throw ParseError("arXiv feed entry " + s.preprint_id + ": " + e.what());
    }
    s.journal_ref = detail::collapse_ws(detail::xml_element(entry, "arxiv:journal_ref").value_or(""));
    std::smatch m;
    if (std::regex_search(entry, m, kCategory)) s.category = m[1].str();
    if (std::regex_search(entry, m, kLicense) || std::regex_search(entry, m, kLicenseAlt)) {
      s.license = m[1].str();
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// arXiv export API client. Queries page through results in submission order;
/// sources come from the e-print endpoint and are unpacked with `tar`.
class ArxivClient : public PreprintIndex {
 public:
  ArxivClient(std::string api_url, std::string eprint_url, std::shared_ptr<RateLimiter> limiter,
              RetryPolicy retry, int page_size = 200)
      : api_(std::move(api_url), limiter, retry), eprint_(std::move(eprint_url), limiter, retry),
        page_size_(page_size) {}

  std::string service() const override { return "arxiv"; }

  std::vector<CandidateStub> query(const std::string& category, const DateRange& window) override {
    if (window.empty()) return {};
    auto stamp = [](const Date& d, const char* hhmm) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%04d%02d%02d%s", d.year, d.month, d.day, hhmm);
      return std::string(buf);
    };
    const std::string q = "cat:" + category + " AND submittedDate:[" + stamp(window.first, "0000") +
                          " TO " + stamp(window.last, "2359") + "]";
    std::vector<CandidateStub> out;
    for (int start = 0;; start += page_size_) {
      const auto res = api_.get("/query", {{"search_query", q},
                                           {"start", std::to_string(start)},
                                           {"max_results", std::to_string(page_size_)},
                                           {"sortBy", "submittedDate"},
                                           {"sortOrder", "ascending"}});
      if (res.status != 200) {
        throw TransportError("arXiv query: HTTP " + std::to_string(res.status), res.status);
      }
      auto page = parse_arxiv_feed(res.body);
      const bool last = static_cast<int>(page.size()) < page_size_;
      for (auto& s : page) {
        if (window.contains(s.posted_date)) out.push_back(std::move(s));
      }
      if (last) break;
    }
    return out;
  }

  bool fetch_source(const std::string& preprint_id, const fs::path& dest) override {
    const auto res = eprint_.get("/" + preprint_id);
    if (res.status == 404) return false;
    if (res.status != 200) {
      throw TransportError("arXiv e-print " + preprint_id + ": HTTP " + std::to_string(res.status),
                           res.status);
    }
    fs::create_directories(dest);
    const auto archive = dest / ".eprint.tar.gz";
    io::write_file_atomic(archive, res.body);
    const std::string quoted_dest = "'" + dest.string() + "'";
    const std::string quoted_archive = "'" + archive.string() + "'";
    int rc = std::system(("tar -xzf " + quoted_archive + " -C " + quoted_dest + " 2>/dev/null").c_str());
    if (rc != 0) {
      // Single-file submissions are served as a bare gzip of the tex file.
      rc = std::system(("gunzip -c " + quoted_archive + " > " + quoted_dest + "/main.tex 2>/dev/null").c_str());
    }
    std::error_code ec;
    fs::remove(archive, ec);
    if (rc != 0) throw IoError("cannot unpack e-print for " + preprint_id);
    return true;
  }

 private:
  HttpClient api_;
  HttpClient eprint_;
  int page_size_;
};

}  // namespace citeaudit
