#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/ratio.hpp"
#include "citeaudit/common/text.hpp"
#include "citeaudit/corpus/types.hpp"
#include "citeaudit/stats/binning.hpp"

namespace citeaudit::stats {

/// One citation slot: a bracketed number in a focal paper's introduction.
struct SlotKey {
  std::string paper;
  int number = 0;

  friend auto operator<=>(const SlotKey&, const SlotKey&) = default;
  friend bool operator==(const SlotKey&, const SlotKey&) = default;
};

struct Flags {
  bool existing = false;
  bool cited_in_paper = false;
  bool cited_in_intro = false;
  bool pm = false;

  friend bool operator==(const Flags&, const Flags&) = default;
};

/// Each flag implies the previous one.
inline bool consistent(const Flags& f) {
  return (!f.cited_in_paper || f.existing) && (!f.cited_in_intro || f.cited_in_paper) &&
         (!f.pm || f.cited_in_intro);
}

/// `matched_id` is the verified index id (nullopt when the generated reference
/// does not exist). `intro_ids` maps the focal paper's intro citation numbers
/// to the index ids of their ground-truth references.
inline Flags classify_generated(const std::optional<std::string>& matched_id, int slot, const PaperRecord& focal,
                                const std::map<int, std::string>& intro_ids) {
  Flags f;
  if (!matched_id || matched_id->empty()) return f;
  f.existing = true;
  const auto& refs = focal.reference_ids;
  f.cited_in_paper = std::find(refs.begin(), refs.end(), *matched_id) != refs.end();
  if (!f.cited_in_paper) return f;
  for (const auto& [n, id] : intro_ids) {
    if (id == *matched_id) f.cited_in_intro = true;
  }
  if (!f.cited_in_intro) return f;
  const auto it = intro_ids.find(slot);
  f.pm = it != intro_ids.end() && it->second == *matched_id;
  return f;
}

struct SlotRecord {
  SlotKey key;
  Flags flags;
  bool uniquely_identifiable = false;
};

struct RunSummary {
  std::int64_t total_refs = 0;
  std::int64_t unique_refs = 0;
  std::int64_t existing = 0;
  std::int64_t cited_in_paper = 0;
  std::int64_t cited_in_intro = 0;
  std::int64_t pm_all = 0;
  std::int64_t pm_unique = 0;

  MaybeRatio existence_pct() const { return pct(existing, total_refs); }
  MaybeRatio cited_in_paper_pct() const { return pct(cited_in_paper, total_refs); }
  MaybeRatio cited_in_intro_pct() const { return pct(cited_in_intro, total_refs); }
  MaybeRatio pm_all_pct() const { return pct(pm_all, total_refs); }
  MaybeRatio pm_unique_pct() const { return pct(pm_unique, unique_refs); }

  static MaybeRatio pct(std::int64_t n, std::int64_t d) {
    auto r = safe_ratio(n, d);
    if (r) r = *r * Ratio(100);
    return r;
  }
};

/// Row labels in report order.
inline const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> m{"Existence", "Cited in paper", "Cited in introduction", "PM all",
                                          "PM unique"};
  return m;
}

inline MaybeRatio metric_pct(const RunSummary& s, std::size_t i) {
  switch (i) {
    case 0: return s.existence_pct();
    case 1: return s.cited_in_paper_pct();
    case 2: return s.cited_in_intro_pct();
    case 3: return s.pm_all_pct();
    default: return s.pm_unique_pct();
  }
}

inline std::pair<std::int64_t, std::int64_t> metric_counts(const RunSummary& s, std::size_t i) {
  switch (i) {
    case 0: return {s.existing, s.total_refs};
    case 1: return {s.cited_in_paper, s.total_refs};
    case 2: return {s.cited_in_intro, s.total_refs};
    case 3: return {s.pm_all, s.total_refs};
    default: return {s.pm_unique, s.unique_refs};
  }
}

inline RunSummary summarize_run(const std::vector<SlotRecord>& slots) {
  RunSummary s;
  std::set<SlotKey> seen;
  for (const auto& r : slots) {
    if (!seen.insert(r.key).second) {
      throw PreconditionError("duplicate slot " + r.key.paper + "[" + std::to_string(r.key.number) + "]");
    }
    if (!consistent(r.flags)) {
      throw PreconditionError("inconsistent flags for " + r.key.paper + "[" + std::to_string(r.key.number) + "]");
    }
    ++s.total_refs;
    s.existing += r.flags.existing;
    s.cited_in_paper += r.flags.cited_in_paper;
    s.cited_in_intro += r.flags.cited_in_intro;
    s.pm_all += r.flags.pm;
    if (r.uniquely_identifiable) {
      ++s.unique_refs;
      s.pm_unique += r.flags.pm;
    }
  }
  return s;
}

inline nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json j = {{"total_refs", s.total_refs}, {"unique_refs", s.unique_refs}};
  const char* keys[] = {"existence", "cited_in_paper", "cited_in_intro", "pm_all", "pm_unique"};
  for (std::size_t i = 0; i < 5; ++i) {
    const auto [n, d] = metric_counts(s, i);
    j[keys[i]] = {{"count", n}, {"denominator", d}, {"pct", format_maybe(metric_pct(s, i), 1)}};
  }
  return j;
}

/// Identity used to compare generated references across runs: the matched
/// index id when the reference exists, else its normalized title. Empty when
/// there is nothing to compare (no generation, blank title).
inline std::string generated_identity(const std::optional<std::string>& matched_id, const std::string& title) {
  if (matched_id && !matched_id->empty()) return "id:" + *matched_id;
  const auto norm = text::normalize_utf8(title);
  return norm.empty() ? std::string() : "title:" + norm;
}

/// Percentage of slots whose identities agree, over the slots of the corpus.
/// Empty identities never agree. Both runs must cover the same slots.
inline MaybeRatio run_overlap(const std::map<SlotKey, std::string>& a, const std::map<SlotKey, std::string>& b) {
  if (a.size() != b.size()) throw PreconditionError("runs cover different slot sets");
  std::int64_t same = 0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (!(ia->first == ib->first)) {
      throw PreconditionError("runs cover different slot sets (" + ia->first.paper + "[" +
                              std::to_string(ia->first.number) + "])");
    }
    if (!ia->second.empty() && ia->second == ib->second) ++same;
  }
  return RunSummary::pct(same, static_cast<std::int64_t>(a.size()));
}

// Characteristics ---------------------------------------------------------

enum class Cohort { GroundTruth, GeneratedAll, GeneratedExisting, GeneratedNonexistent };

inline std::string to_string(Cohort c) {
  switch (c) {
    case Cohort::GroundTruth: return "ground_truth";
    case Cohort::GeneratedAll: return "generated_all";
    case Cohort::GeneratedExisting: return "generated_existing";
    case Cohort::GeneratedNonexistent: return "generated_nonexistent";
  }
  return "ground_truth";
}

struct CharacteristicsRow {
  std::int64_t title_chars = 0;
  std::optional<std::int64_t> year;
  std::optional<std::int64_t> author_count;
  Venue venue;
  std::optional<std::int64_t> citation_count;
  std::optional<std::int64_t> influential_citation_count;
  std::optional<std::int64_t> reference_count;
};

/// Projects a reference onto the analysed properties. Index counts are only
/// meaningful with index metadata, so callers pass `with_index_counts=false`
/// for non-existent generations.
inline CharacteristicsRow characteristics_row(const ReferenceEntry& r, bool with_index_counts) {
  CharacteristicsRow row;
  row.title_chars = static_cast<std::int64_t>(text::decode_utf8(text::trim(r.title)).size());
  if (r.year) row.year = *r.year;
  if (r.author_count) row.author_count = *r.author_count;
  row.venue = r.venue;
  if (with_index_counts) {
    if (r.citation_count) row.citation_count = *r.citation_count;
    if (r.influential_citation_count) row.influential_citation_count = *r.influential_citation_count;
    if (r.reference_count) row.reference_count = *r.reference_count;
  }
  return row;
}

struct CharacteristicsBins {
  Binning title_chars = Binning::from_starts({0, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200});
  Binning year = Binning::from_starts({0, 1950, 1960, 1970, 1980, 1990, 2000, 2010, 2020}, true);
  Binning author_count = Binning::from_starts({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  Binning citations = Binning::log10();
  Binning reference_count = Binning::from_starts({0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100});
};

struct CohortProfile {
  std::int64_t size = 0;
  Distribution title_chars;
  Distribution year;
  Distribution author_count;
  Distribution citation_count;
  Distribution influential_citation_count;
  Distribution reference_count;
  std::map<CanonicalVenue, std::int64_t> venues;
};

inline CohortProfile characteristics(const std::vector<CharacteristicsRow>& rows,
                                     const CharacteristicsBins& bins = {}) {
  CohortProfile p;
  p.size = static_cast<std::int64_t>(rows.size());
  std::vector<std::optional<std::int64_t>> title, year, authors, cites, infl, refs;
  for (auto v : kAllVenues) p.venues[v] = 0;
  for (const auto& r : rows) {
    title.push_back(r.title_chars);
    year.push_back(r.year);
    authors.push_back(r.author_count);
    cites.push_back(r.citation_count);
    infl.push_back(r.influential_citation_count);
    refs.push_back(r.reference_count);
    ++p.venues[r.venue.canonical];
  }
  p.title_chars = distribute(title, bins.title_chars);
  p.year = distribute(year, bins.year);
  p.author_count = distribute(authors, bins.author_count);
  p.citation_count = distribute(cites, bins.citations);
  p.influential_citation_count = distribute(infl, bins.citations);
  p.reference_count = distribute(refs, bins.reference_count);
  return p;
}

inline nlohmann::json to_json(const CohortProfile& p) {
  nlohmann::json venues = nlohmann::json::object();
  for (const auto& [v, n] : p.venues) venues[std::string(to_string(v))] = n;
  return {{"size", p.size},
          {"title_chars", to_json(p.title_chars)},
          {"year", to_json(p.year)},
          {"author_count", to_json(p.author_count)},
          {"citation_count", to_json(p.citation_count)},
          {"influential_citation_count", to_json(p.influential_citation_count)},
          {"reference_count", to_json(p.reference_count)},
          {"venues", venues}};
}

// Bias breakdown ------------------------------------------------------------

enum class Facet { Subperiod, TitleLength, AuthorCount, Venue };
enum class CountMetric { Citations, InfluentialCitations };

inline std::string to_string(Facet f) {
  switch (f) {
    case Facet::Subperiod: return "subperiod";
    case Facet::TitleLength: return "title_length";
    case Facet::AuthorCount: return "author_count";
    case Facet::Venue: return "venue";
  }
  return "subperiod";
}

inline std::string to_string(CountMetric m) {
  return m == CountMetric::Citations ? "citation_count" : "influential_citation_count";
}

/// An existing generated reference and the ground-truth reference of the
/// same slot.
struct BiasPair {
  SlotKey slot;
  CharacteristicsRow generated;
  CharacteristicsRow ground_truth;
};

/// Pairs by slot. Generated slots without a ground-truth partner are skipped.
inline std::vector<BiasPair> pair_by_slot(const std::map<SlotKey, CharacteristicsRow>& existing_generated,
                                          const std::map<SlotKey, CharacteristicsRow>& ground_truth) {
  std::vector<BiasPair> out;
  for (const auto& [k, g] : existing_generated) {
    const auto it = ground_truth.find(k);
    if (it != ground_truth.end()) out.push_back({k, g, it->second});
  }
  return out;
}

struct BiasBinRow {
  std::string bin;
  std::int64_t pairs = 0;
  MaybeRatio median_generated;
  MaybeRatio median_ground_truth;
  MaybeRatio difference;  // generated minus ground truth
};

struct BiasTable {
  Facet facet = Facet::Subperiod;
  CountMetric metric = CountMetric::Citations;
  std::vector<BiasBinRow> rows;
  /// Pairs left out because a count or the facet value was unknown.
  std::int64_t excluded = 0;
};

struct BiasBins {
  Binning subperiod = subperiod_binning();
  Binning title_length = Binning::from_starts({0, 40, 60, 80, 100, 120});
  Binning author_count = Binning::from_starts({0, 1, 2, 3, 4, 6, 10});
};

/// Pairs are binned by the ground-truth partner's facet value so both cohorts
/// in a bin describe the same slots.
inline BiasTable bias_breakdown(const std::vector<BiasPair>& pairs, Facet facet, CountMetric metric,
                                const BiasBins& bins = {}) {
  BiasTable t{facet, metric, {}, 0};
  std::vector<std::string> labels;
  const Binning* binning = nullptr;
  switch (facet) {
    case Facet::Subperiod: binning = &bins.subperiod; break;
    case Facet::TitleLength: binning = &bins.title_length; break;
    case Facet::AuthorCount: binning = &bins.author_count; break;
    case Facet::Venue: break;
  }
  if (binning) {
    for (const auto& b : binning->bins()) labels.push_back(b.label);
  } else {
    for (auto v : kAllVenues) labels.emplace_back(to_string(v));
  }
  std::vector<std::vector<std::int64_t>> gen(labels.size()), gt(labels.size());
  const auto count = [&](const CharacteristicsRow& r) {
    return metric == CountMetric::Citations ? r.citation_count : r.influential_citation_count;
  };
  for (const auto& p : pairs) {
    const auto g = count(p.generated);
    const auto h = count(p.ground_truth);
    std::optional<std::size_t> idx;
    switch (facet) {
      case Facet::Subperiod:
        if (p.ground_truth.year) idx = binning->find(*p.ground_truth.year);
        break;
      case Facet::TitleLength: idx = binning->find(p.ground_truth.title_chars); break;
      case Facet::AuthorCount:
        if (p.ground_truth.author_count) idx = binning->find(*p.ground_truth.author_count);
        break;
      case Facet::Venue:
        idx = static_cast<std::size_t>(std::find(kAllVenues.begin(), kAllVenues.end(), p.ground_truth.venue.canonical) -
                                       kAllVenues.begin());
        break;
    }
    if (!g || !h || !idx) {
      ++t.excluded;
      continue;
    }
    gen[*idx].push_back(*g);
    gt[*idx].push_back(*h);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    BiasBinRow row;
    row.bin = labels[i];
    row.pairs = static_cast<std::int64_t>(gen[i].size());
    row.median_generated = median(gen[i]);
    row.median_ground_truth = median(gt[i]);
    if (row.median_generated && row.median_ground_truth) {
      row.difference = *row.median_generated - *row.median_ground_truth;
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Ground truth split by the fate of the generation in its slot -------------

enum class Counterpart { InPaper, Existing, Nonexistent };

inline std::string to_string(Counterpart c) {
  switch (c) {
    case Counterpart::InPaper: return "counterpart_of_in_paper";
    case Counterpart::Existing: return "counterpart_of_existing";
    case Counterpart::Nonexistent: return "counterpart_of_nonexistent";
  }
  return "counterpart_of_nonexistent";
}

/// The cohorts are exclusive: a slot whose generation is cited in the paper
/// lands in InPaper only. Slots with no flag record count as non-existent.
inline std::map<Counterpart, std::vector<CharacteristicsRow>> cohort_split_by_counterpart(
    const std::map<SlotKey, CharacteristicsRow>& ground_truth, const std::map<SlotKey, Flags>& flags) {
  std::map<Counterpart, std::vector<CharacteristicsRow>> out;
  for (const auto& [k, row] : ground_truth) {
    const auto it = flags.find(k);
    const Flags f = it == flags.end() ? Flags{} : it->second;
    const auto c = f.cited_in_paper ? Counterpart::InPaper
                   : f.existing     ? Counterpart::Existing
                                    : Counterpart::Nonexistent;
    out[c].push_back(row);
  }
  return out;
}

}  // namespace citeaudit::stats
