#pragma once

#include <compare>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/corpus/venue.hpp"

namespace citeaudit {

/// Calendar date, ordered chronologically.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  /// Accepts YYYY-MM-DD with an optional time suffix ("2023-03-01T17:00:00Z").
  static Date parse(std::string_view s) {
    Date d;
    if (s.size() < 10 || std::sscanf(std::string(s.substr(0, 10)).c_str(), "%4d-%2d-%2d", &d.year,
                                     &d.month, &d.day) != 3 ||
        d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) {
      throw ParseError("malformed date '" + std::string(s) + "'");
    }
    return d;
  }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }

  friend auto operator<=>(const Date&, const Date&) = default;
};

struct DateRange {
  Date first;
  Date last;  // inclusive

  bool empty() const { return last < first; }
  bool contains(const Date& d) const { return !(d < first) && !(last < d); }
};

/// One preprint-index hit before resolution in the scholarly index.
struct CandidateStub {
  std::string preprint_id;
  std::string title;
  Date posted_date;
  std::string journal_ref;
  std::string category;
  std::string license;

  friend bool operator==(const CandidateStub&, const CandidateStub&) = default;
};

/// A scholarly-index record as returned by the index, before it is projected
/// onto PaperRecord or ReferenceEntry.
struct IndexRecord {
  std::string index_id;
  std::string title;
  std::optional<int> year;
  std::string venue;
  std::vector<std::string> authors;
  std::optional<int> citation_count;
  std::optional<int> influential_citation_count;
  std::optional<int> reference_count;
  std::vector<std::string> reference_ids;
  std::vector<std::string> reference_titles;
  std::optional<std::string> preprint_id;
};

struct PaperRecord {
  std::string preprint_id;
  std::string index_id;
  std::string title;
  Venue venue;
  int year = 0;
  Date posted_date;
  std::vector<std::string> authors;
  std::vector<std::string> reference_ids;
  std::vector<std::string> reference_titles;  // parallel to reference_ids
  std::set<int> intro_reference_numbers;
  std::string license;
  std::string journal_ref;
};

struct ReferenceEntry {
  int citation_number = 0;
  std::string raw_text;
  std::string title;
  std::vector<std::string> authors;
  std::optional<int> author_count;
  std::optional<int> year;
  Venue venue;
  std::optional<std::string> index_id;
  std::optional<int> citation_count;
  std::optional<int> influential_citation_count;
  std::optional<int> reference_count;
  std::vector<std::string> outgoing_reference_ids;
  /// Reason code when the index could not supply a record.
  std::optional<std::string> not_found_reason;
};

// JSON (de)serialization. Unknown values are written as null.

namespace detail {
template <typename T>
nlohmann::json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
template <typename T>
std::optional<T> opt_get(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}
}  // namespace detail

inline nlohmann::json to_json(const Venue& v) {
  return {{"canonical", std::string(to_string(v.canonical))}, {"raw", v.raw}};
}
inline Venue venue_from_json(const nlohmann::json& j) {
  return {venue_from_string(j.at("canonical").get<std::string>()), j.value("raw", "")};
}

inline nlohmann::json to_json(const CandidateStub& s) {
  return {{"preprint_id", s.preprint_id}, {"title", s.title},
          {"posted_date", s.posted_date.str()}, {"journal_ref", s.journal_ref},
          {"category", s.category}, {"license", s.license}};
}
inline CandidateStub stub_from_json(const nlohmann::json& j) {
  CandidateStub s;
  s.preprint_id = j.at("preprint_id").get<std::string>();
  s.title = j.at("title").get<std::string>();
  s.posted_date = Date::parse(j.at("posted_date").get<std::string>());
  s.journal_ref = j.value("journal_ref", "");
  s.category = j.value("category", "");
  s.license = j.value("license", "");
  return s;
}

inline nlohmann::json to_json(const IndexRecord& r) {
  return {{"index_id", r.index_id},
          {"title", r.title},
          {"year", detail::opt_json(r.year)},
          {"venue", r.venue},
          {"authors", r.authors},
          {"citation_count", detail::opt_json(r.citation_count)},
          {"influential_citation_count", detail::opt_json(r.influential_citation_count)},
          {"reference_count", detail::opt_json(r.reference_count)},
          {"reference_ids", r.reference_ids},
          {"reference_titles", r.reference_titles},
          {"preprint_id", detail::opt_json(r.preprint_id)}};
}
inline IndexRecord index_record_from_json(const nlohmann::json& j) {
  IndexRecord r;
  r.index_id = j.at("index_id").get<std::string>();
  r.title = j.value("title", "");
  r.year = detail::opt_get<int>(j, "year");
  r.venue = j.value("venue", "");
  r.authors = j.value("authors", std::vector<std::string>{});
  r.citation_count = detail::opt_get<int>(j, "citation_count");
  r.influential_citation_count = detail::opt_get<int>(j, "influential_citation_count");
  r.reference_count = detail::opt_get<int>(j, "reference_count");
  r.reference_ids = j.value("reference_ids", std::vector<std::string>{});
  r.reference_titles = j.value("reference_titles", std::vector<std::string>{});
  r.preprint_id = detail::opt_get<std::string>(j, "preprint_id");
  return r;
}

inline nlohmann::json to_json(const PaperRecord& p) {
  return {{"preprint_id", p.preprint_id},
          {"index_id", p.index_id},
          {"title", p.title},
          {"venue", to_json(p.venue)},
          {"year", p.year},
          {"posted_date", p.posted_date.str()},
          {"authors", p.authors},
          {"reference_ids", p.reference_ids},
          {"reference_titles", p.reference_titles},
          {"intro_reference_numbers", p.intro_reference_numbers},
          {"license", p.license},
          {"journal_ref", p.journal_ref}};
}
inline PaperRecord paper_from_json(const nlohmann::json& j) {
  PaperRecord p;
  p.preprint_id = j.at("preprint_id").get<std::string>();
  p.index_id = j.at("index_id").get<std::string>();
  p.title = j.value("title", "");
  p.venue = venue_from_json(j.at("venue"));
  p.year = j.value("year", 0);
  p.posted_date = Date::parse(j.at("posted_date").get<std::string>());
  p.authors = j.value("authors", std::vector<std::string>{});
  p.reference_ids = j.value("reference_ids", std::vector<std::string>{});
  p.reference_titles = j.value("reference_titles", std::vector<std::string>{});
  p.intro_reference_numbers = j.value("intro_reference_numbers", std::set<int>{});
  p.license = j.value("license", "");
  p.journal_ref = j.value("journal_ref", "");
  return p;
}

inline nlohmann::json to_json(const ReferenceEntry& r) {
  return {{"citation_number", r.citation_number},
          {"raw_text", r.raw_text},
          {"title", r.title},
          {"authors", r.authors},
          {"author_count", detail::opt_json(r.author_count)},
          {"year", detail::opt_json(r.year)},
          {"venue", to_json(r.venue)},
          {"index_id", detail::opt_json(r.index_id)},
          {"citation_count", detail::opt_json(r.citation_count)},
          {"influential_citation_count", detail::opt_json(r.influential_citation_count)},
          {"reference_count", detail::opt_json(r.reference_count)},
          {"outgoing_reference_ids", r.outgoing_reference_ids},
          {"not_found_reason", detail::opt_json(r.not_found_reason)}};
}
inline ReferenceEntry reference_from_json(const nlohmann::json& j) {
  ReferenceEntry r;
  r.citation_number = j.at("citation_number").get<int>();
  r.raw_text = j.value("raw_text", "");
  r.title = j.value("title", "");
  r.authors = j.value("authors", std::vector<std::string>{});
  r.author_count = detail::opt_get<int>(j, "author_count");
  r.year = detail::opt_get<int>(j, "year");
  r.venue = j.contains("venue") ? venue_from_json(j["venue"]) : Venue{};
  r.index_id = detail::opt_get<std::string>(j, "index_id");
  r.citation_count = detail::opt_get<int>(j, "citation_count");
  r.influential_citation_count = detail::opt_get<int>(j, "influential_citation_count");
  r.reference_count = detail::opt_get<int>(j, "reference_count");
  r.outgoing_reference_ids = j.value("outgoing_reference_ids", std::vector<std::string>{});
  r.not_found_reason = detail::opt_get<std::string>(j, "not_found_reason");
  return r;
}

}  // namespace citeaudit
