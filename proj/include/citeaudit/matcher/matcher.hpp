#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/csv.hpp"
#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/common/ratio.hpp"
#include "citeaudit/corpus/index_client.hpp"
#include "citeaudit/matcher/similarity.hpp"

namespace citeaudit::matcher {

struct MatchCandidate {
  std::string index_id;
  std::string title;
  Ratio title_score;
  Ratio author_score;
};

struct Thresholds {
  Ratio title{1};
  Ratio author{1};
  /// Where the values came from: "calibrated:<file>" or "config".
  std::string provenance = "config";
};

struct MatchVerdict {
  bool exists = false;
  std::optional<std::string> matched_index_id;
  std::optional<MatchCandidate> best_candidate;
  Thresholds thresholds_used;
};

/// Exact decimal parse ("0.875" -> 7/8). Scores and thresholds stay rational
/// so applying a calibrated pair reproduces its verdicts exactly.
inline Ratio parse_decimal(const std::string& s) {
  const std::string t = text::trim(s);
  std::int64_t num = 0, den = 1;
  bool dot = false, digits = false;
  for (char c : t) {
    if (c == '.' && !dot) {
      dot = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      if (den > 100000000000LL) throw ParseError("too many decimals in '" + s + "'");
      num = num * 10 + (c - '0');
      if (dot) den *= 10;
      digits = true;
    } else {
      throw ParseError("not a non-negative decimal: '" + s + "'");
    }
  }
  if (!digits) throw ParseError("not a non-negative decimal: '" + s + "'");
  return Ratio(num, den);
}

inline Ratio ratio_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_decimal(j.get<std::string>());
  if (j.is_number_integer()) return Ratio(j.get<std::int64_t>());
  if (j.is_number()) {
    // Round-trip through the shortest decimal representation.
    std::string s = j.dump();
    if (s.find_first_of("eE") != std::string::npos) throw ParseError("threshold in exponent form: " + s);
    return parse_decimal(s);
  }
  throw ParseError("threshold must be a number or decimal string");
}

inline nlohmann::json to_json(const Thresholds& t) {
  return {{"title_threshold", format_fixed(t.title, 6)},
          {"author_threshold", format_fixed(t.author, 6)},
          {"title_threshold_exact", t.title.str()},
          {"author_threshold_exact", t.author.str()},
          {"provenance", t.provenance}};
}

inline Thresholds thresholds_from_json(const nlohmann::json& j) {
  Thresholds t;
  auto exact = [&](const char* exact_key, const char* key) {
    if (j.contains(exact_key)) {
      const auto parts = text::split(j[exact_key].get<std::string>(), '/');
      return parts.size() == 2 ? Ratio(std::stoll(parts[0]), std::stoll(parts[1]))
                               : Ratio(std::stoll(parts[0]));
    }
    return ratio_from_json(j.at(key));
  };
  t.title = exact("title_threshold_exact", "title_threshold");
  t.author = exact("author_threshold_exact", "author_threshold");
  t.provenance = j.value("provenance", "config");
  if (t.title > Ratio(1) || t.author > Ratio(1)) throw ConfigError("thresholds must lie in [0,1]");
  return t;
}

inline MatchCandidate score_candidate(const std::string& title, const std::vector<std::string>& authors,
                                      bool et_al, const IndexRecord& rec) {
  return {rec.index_id, rec.title, title_similarity(title, rec.title),
          author_similarity(authors, rec.authors, et_al)};
}

/// Up to three index hits for `title`, in the index's relevance order, each
/// scored locally.
inline std::vector<MatchCandidate> search_candidates(ScholarlyIndex& index, const std::string& title,
                                                     const std::vector<std::string>& authors,
                                                     bool et_al = false, int limit = 3) {
  if (text::trim(title).empty()) throw PreconditionError("search_candidates needs a title");
  std::vector<MatchCandidate> out;
  for (const auto& rec : index.search(title, limit)) {
    out.push_back(score_candidate(title, authors, et_al, rec));
    if (static_cast<int>(out.size()) == limit) break;
  }
  return out;
}

/// Preference among candidates: higher title score, then higher author score,
/// then smaller index id. Total, so the result ignores input order.
inline bool better_candidate(const MatchCandidate& a, const MatchCandidate& b) {
  if (a.title_score != b.title_score) return a.title_score > b.title_score;
  if (a.author_score != b.author_score) return a.author_score > b.author_score;
  return a.index_id < b.index_id;
}

inline bool qualifies(const MatchCandidate& c, const Thresholds& t) {
  return c.title_score >= t.title && c.author_score >= t.author;
}

/// Exists iff some candidate clears both thresholds. The preferred qualifying
/// candidate is matched; without one, the preferred candidate overall is kept
/// for diagnostics.
inline MatchVerdict decide_existence(const std::vector<MatchCandidate>& candidates,
                                     const Thresholds& thresholds) {
  MatchVerdict v;
  v.thresholds_used = thresholds;
  const MatchCandidate* best_q = nullptr;
  const MatchCandidate* best_any = nullptr;
  for (const auto& c : candidates) {
    if (!best_any || better_candidate(c, *best_any)) best_any = &c;
    if (qualifies(c, thresholds) && (!best_q || better_candidate(c, *best_q))) best_q = &c;
  }
  if (best_q) {
    v.exists = true;
    v.matched_index_id = best_q->index_id;
    v.best_candidate = *best_q;
  } else if (best_any) {
    v.best_candidate = *best_any;
  }
  return v;
}

inline nlohmann::json to_json(const MatchCandidate& c) {
  return {{"index_id", c.index_id},
          {"title", c.title},
          {"title_score", format_fixed(c.title_score, 4)},
          {"author_score", format_fixed(c.author_score, 4)}};
}

inline nlohmann::json to_json(const MatchVerdict& v) {
  return {{"exists", v.exists},
          {"matched_index_id", v.matched_index_id ? nlohmann::json(*v.matched_index_id) : nlohmann::json(nullptr)},
          {"best_candidate", v.best_candidate ? to_json(*v.best_candidate) : nlohmann::json(nullptr)},
          {"title_threshold", format_fixed(v.thresholds_used.title, 4)},
          {"author_threshold", format_fixed(v.thresholds_used.author, 4)}};
}

// ---------------------------------------------------------------------------
// Calibration

struct LabelledPair {
  std::string generated_title;
  std::vector<std::string> generated_authors;
  std::string candidate_id;
  std::string candidate_title;
  std::vector<std::string> candidate_authors;
  bool label = false;  // true: the generated reference is this candidate
};

struct ConfusionMatrix {
  int true_existent = 0;       // label true, predicted existent
  int false_nonexistent = 0;   // label true, predicted non-existent
  int true_nonexistent = 0;    // label false, predicted non-existent
  int false_existent = 0;      // label false, predicted existent

  int total() const { return true_existent + false_nonexistent + true_nonexistent + false_existent; }
  int correct() const { return true_existent + true_nonexistent; }
  Ratio accuracy() const { return total() ? Ratio(correct(), total()) : Ratio(0); }
  /// Real references wrongly flagged as non-existent: the error the
  /// calibration minimizes.
  int false_positives() const { return false_nonexistent; }
};

struct CalibrationObjective {
  /// Pairs below this accuracy are only considered when none reaches it.
  /// Without a floor, minimizing false positives alone always selects the
  /// all-zero thresholds that accept everything.
  Ratio min_accuracy{19, 20};
};

struct CalibrationResult {
  Thresholds thresholds;
  ConfusionMatrix confusion;
  std::size_t grid_size = 0;
  bool floor_reached = false;
};

/// Splits "A; B; C" (or a single name) into author names.
inline std::vector<std::string> split_author_field(const std::string& field) {
  std::vector<std::string> out;
  for (auto& part : text::split(field, ';')) {
    auto t = text::trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline bool parse_bool_label(const std::string& raw) {
  const auto s = text::to_lower_ascii(text::trim(raw));
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParseError("label must be true/false, got '" + raw + "'");
}

/// Reads the labelled calibration CSV (generated_title, generated_authors,
/// candidate_id, candidate_title, candidate_authors, label). Author fields are
/// ';'-separated.
inline std::vector<LabelledPair> load_labelled_pairs(const std::filesystem::path& path) {
  const auto rows = csv::parse(io::read_file(path));
  if (rows.empty()) throw ParseError(path.string() + ": empty calibration file");
  const std::vector<std::string> want = {"generated_title",   "generated_authors", "candidate_id",
                                         "candidate_title",   "candidate_authors", "label"};
  std::vector<std::size_t> col(want.size());
  for (std::size_t w = 0; w < want.size(); ++w) {
    auto it = std::find(rows[0].begin(), rows[0].end(), want[w]);
    if (it == rows[0].end()) throw ParseError(path.string() + ": missing column " + want[w]);
    col[w] = static_cast<std::size_t>(it - rows[0].begin());
  }
  std::vector<LabelledPair> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && text::trim(row[0]).empty()) continue;
    if (row.size() < rows[0].size()) {
      throw ParseError(path.string() + ": row " + std::to_string(r + 1) + " has too few fields");
    }
    LabelledPair p;
    p.generated_title = row[col[0]];
    p.generated_authors = split_author_field(row[col[1]]);
    p.candidate_id = row[col[2]];
    p.candidate_title = row[col[3]];
    p.candidate_authors = split_author_field(row[col[4]]);
    p.label = parse_bool_label(row[col[5]]);
    out.push_back(std::move(p));
  }
  return out;
}

inline MatchCandidate score_pair(const LabelledPair& p) {
  return {p.candidate_id, p.candidate_title, title_similarity(p.generated_title, p.candidate_title),
          author_similarity(p.generated_authors, p.candidate_authors)};
}

inline ConfusionMatrix confusion_at(const std::vector<MatchCandidate>& scored,
                                    const std::vector<LabelledPair>& pairs, const Thresholds& t) {
  ConfusionMatrix m;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool predicted = decide_existence({scored[i]}, t).exists;
    if (pairs[i].label) {
      (predicted ? m.true_existent : m.false_nonexistent)++;
    } else {
      (predicted ? m.false_existent : m.true_nonexistent)++;
    }
  }
  return m;
}

/// Grid search over every observed (title, author) score pair plus zero.
/// Among pairs reaching the accuracy floor: fewest false positives, then
/// highest accuracy, then lowest title and author thresholds.
inline CalibrationResult calibrate(const std::vector<LabelledPair>& pairs,
                                   const CalibrationObjective& objective = {}) {
  if (pairs.empty()) throw PreconditionError("calibration set is empty");
  const auto positives = std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.label; });
  if (positives == 0 || positives == static_cast<long>(pairs.size())) {
    throw PreconditionError("calibration set needs both true and false labels");
  }
  std::vector<MatchCandidate> scored;
  std::vector<Ratio> titles = {Ratio(0)}, authors = {Ratio(0)};
  for (const auto& p : pairs) {
    scored.push_back(score_pair(p));
    titles.push_back(scored.back().title_score);
    authors.push_back(scored.back().author_score);
  }
  auto uniq = [](std::vector<Ratio>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(titles);
  uniq(authors);

  struct Best {
    Thresholds t;
    ConfusionMatrix m;
    bool floor = false;
  };
  std::optional<Best> best;
  auto better = [](const Best& a, const Best& b) {
    if (a.floor != b.floor) return a.floor;
    if (a.floor) {
      if (a.m.false_positives() != b.m.false_positives()) return a.m.false_positives() < b.m.false_positives();
      if (a.m.correct() != b.m.correct()) return a.m.correct() > b.m.correct();
    } else {
      if (a.m.correct() != b.m.correct()) return a.m.correct() > b.m.correct();
      if (a.m.false_positives() != b.m.false_positives()) return a.m.false_positives() < b.m.false_positives();
    }
    if (a.t.title != b.t.title) return a.t.title < b.t.title;
    return a.t.author < b.t.author;
  };
  for (const auto& tt : titles) {
    for (const auto& at : authors) {
      Best cand{{tt, at, "calibrated"}, {}, false};
      cand.m = confusion_at(scored, pairs, cand.t);
      cand.floor = cand.m.accuracy() >= objective.min_accuracy;
      if (!best || better(cand, *best)) best = cand;
    }
  }
  return {best->t, best->m, titles.size() * authors.size(), best->floor};
}

inline nlohmann::json to_json(const ConfusionMatrix& m) {
  return {{"true_existent", m.true_existent},
          {"false_nonexistent", m.false_nonexistent},
          {"true_nonexistent", m.true_nonexistent},
          {"false_existent", m.false_existent},
          {"accuracy", format_fixed(m.accuracy(), 4)},
          {"false_positives", m.false_positives()}};
}

}  // namespace citeaudit::matcher
