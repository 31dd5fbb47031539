#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "citeaudit/common/exclusion.hpp"
#include "citeaudit/common/text.hpp"
#include "citeaudit/corpus/index_client.hpp"
#include "citeaudit/corpus/types.hpp"
#include "citeaudit/corpus/venue.hpp"
#include "citeaudit/matcher/similarity.hpp"

namespace citeaudit {

/// Several index records matched one title equally well.
class AmbiguityError : public Error {
 public:
  AmbiguityError(const std::string& title, std::vector<std::string> candidates)
      : Error("ambiguous title '" + title + "': " + text::join(candidates, ", ")),
        candidates_(std::move(candidates)) {}
  const std::vector<std::string>& candidates() const { return candidates_; }

 private:
  std::vector<std::string> candidates_;
};

inline const std::vector<std::string>& default_blacklist() {
  static const std::vector<std::string> kList = {
      "workshop", "tiny paper", "2020", "2021", "track on datasets and benchmarks", "bridge"};
  return kList;
}

/// Candidates in `window` whose journal reference mentions any keyword
/// (case-insensitive), ordered by posted date then id.
inline std::vector<CandidateStub> harvest_candidates(PreprintIndex& index, const DateRange& window,
                                                     const std::string& category,
                                                     const std::vector<std::string>& keywords) {
  if (category.empty()) throw PreconditionError("harvest needs a category");
  if (window.empty()) return {};
  std::vector<CandidateStub> out;
  for (auto& stub : index.query(category, window)) {
    const bool hit = std::any_of(keywords.begin(), keywords.end(), [&](const std::string& k) {
      return !k.empty() && text::icontains(stub.journal_ref, k);
    });
    if (hit) out.push_back(std::move(stub));
  }
  std::stable_sort(out.begin(), out.end(), [](const CandidateStub& a, const CandidateStub& b) {
    if (a.posted_date != b.posted_date) return a.posted_date < b.posted_date;
    return a.preprint_id < b.preprint_id;
  });
  return out;
}

/// The first blacklist keyword found in the stub's journal reference.
inline std::optional<std::string> blacklist_hit(const CandidateStub& stub,
                                                const std::vector<std::string>& blacklist) {
  for (const auto& k : blacklist) {
    if (!k.empty() && text::icontains(stub.journal_ref, k)) return k;
  }
  return std::nullopt;
}

inline std::vector<CandidateStub> filter_candidates(std::vector<CandidateStub> stubs,
                                                    const std::vector<std::string>& blacklist) {
  std::erase_if(stubs, [&](const CandidateStub& s) { return blacklist_hit(s, blacklist).has_value(); });
  return stubs;
}

struct ResolveOptions {
  /// 1 demands equal titles after normalization; lower values accept the
  /// best-matching-substring score at or above it.
  Ratio title_threshold{1};
  int search_limit = 10;
};

using ResolveResult = std::variant<PaperRecord, Exclusion>;

/// Resolves a preprint stub to its scholarly-index record by title.
inline ResolveResult resolve_paper(ScholarlyIndex& index, const CandidateStub& stub,
                                   const VenueTable& venues, const ResolveOptions& opts = {}) {
  if (text::trim(stub.title).empty()) throw PreconditionError("stub " + stub.preprint_id + " has no title");
  const auto want = text::normalize(stub.title);
  std::vector<std::string> matches;
  for (const auto& hit : index.search(stub.title, opts.search_limit)) {
    const bool ok = opts.title_threshold == Ratio(1)
                        ? text::normalize(hit.title) == want
                        : matcher::title_similarity(hit.title, stub.title) >= opts.title_threshold;
    if (ok && std::find(matches.begin(), matches.end(), hit.index_id) == matches.end()) {
      matches.push_back(hit.index_id);
    }
  }
  if (matches.empty()) return Exclusion{reason::kNotInIndex, "no index record titled '" + stub.title + "'"};
  if (matches.size() > 1) {
    std::sort(matches.begin(), matches.end());
    throw AmbiguityError(stub.title, matches);
  }
  const auto rec = index.fetch(matches.front());
  if (!rec) return Exclusion{reason::kNotInIndex, "index record " + matches.front() + " vanished"};

  PaperRecord p;
  p.preprint_id = stub.preprint_id;
  p.index_id = rec->index_id;
  p.title = stub.title;
  p.venue = venues.canonicalize(rec->venue.empty() ? stub.journal_ref : rec->venue);
  p.year = rec->year.value_or(stub.posted_date.year);
  p.posted_date = stub.posted_date;
  p.authors = rec->authors;
  p.reference_ids = rec->reference_ids;
  p.reference_titles = rec->reference_titles;
  p.license = stub.license;
  p.journal_ref = stub.journal_ref;
  return p;
}

/// Index metadata for one reference. Counts are copied from the index as-is,
/// so a zero stays zero and a missing value stays unknown.
inline ReferenceEntry enrich_reference(ScholarlyIndex& index, const std::string& index_id,
                                       const VenueTable& venues) {
  const auto rec = index.fetch(index_id);
  if (!rec) throw NotFoundError("index id " + index_id + " not found");
  ReferenceEntry e;
  e.index_id = rec->index_id;
  e.title = rec->title;
  e.authors = rec->authors;
  e.author_count = rec->authors.empty() ? std::nullopt
                                         : std::optional<int>(static_cast<int>(rec->authors.size()));
  e.year = rec->year;
  e.venue = venues.canonicalize(rec->venue);
  e.citation_count = rec->citation_count;
  e.influential_citation_count = rec->influential_citation_count;
  e.reference_count = rec->reference_count;
  e.outgoing_reference_ids = rec->reference_ids;
  return e;
}

/// Overlays index metadata onto an entry parsed from text. Title and raw text
/// stay as extracted; everything the index knows replaces the parsed guess.
inline void apply_enrichment(ReferenceEntry& entry, const ReferenceEntry& meta) {
  entry.index_id = meta.index_id;
  if (!meta.authors.empty()) {
    entry.authors = meta.authors;
    entry.author_count = meta.author_count;
  }
  if (meta.year) entry.year = meta.year;
  if (!meta.venue.raw.empty()) entry.venue = meta.venue;
  entry.citation_count = meta.citation_count;
  entry.influential_citation_count = meta.influential_citation_count;
  entry.reference_count = meta.reference_count;
  entry.outgoing_reference_ids = meta.outgoing_reference_ids;
  entry.not_found_reason.reset();
}

}  // namespace citeaudit
