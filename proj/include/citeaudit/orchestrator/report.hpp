#pragma once

// Report emission: CSV/JSON/markdown views of analysis.json and the graph
// metrics. Every file names the manifest hash it was produced under. All
// files are rendered in memory first so an unwritable destination fails
// before anything is written.

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "citeaudit/common/csv.hpp"
#include "citeaudit/orchestrator/analysis.hpp"

namespace citeaudit::orchestrator {

using ReportFiles = std::map<fs::path, std::string>;  // relative path -> content

inline MaybeRatio ratio_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  const auto s = j.at("exact").get<std::string>();
  const auto slash = s.find('/');
  if (slash == std::string::npos) return Ratio(std::stoll(s));
  return Ratio(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
}

/// Whole numbers print as integers, anything else with one decimal.
inline std::string format_median(const MaybeRatio& r) {
  if (!r) return "NA";
  if (r->den() == 1) return std::to_string(r->num());
  return format_fixed(*r, 1);
}

inline std::string format_pct(const json& j) { return format_maybe(ratio_from_json(j), 1); }

class CsvWriter {
 public:
  CsvWriter(const std::string& manifest_hash, const csv::Row& header)
      : text_("# manifest " + manifest_hash + "\n" + csv::format_row(header)) {}
  void row(const csv::Row& r) { text_ += csv::format_row(r); }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

inline const std::vector<std::string>& cohort_names() {
  static const std::vector<std::string> c{"ground_truth",
                                          "generated_all",
                                          "generated_existing",
                                          "generated_nonexistent",
                                          "counterpart_of_in_paper",
                                          "counterpart_of_existing",
                                          "counterpart_of_nonexistent"};
  return c;
}

inline const std::vector<std::string>& profile_properties() {
  static const std::vector<std::string> p{"title_chars",    "year",
                                          "author_count",   "citation_count",
                                          "influential_citation_count", "reference_count"};
  return p;
}

inline void summary_reports(ReportFiles& files, const std::string& hash, const json& analysis) {
  const auto& runs = analysis.at("runs");
  csv::Row header{"metric"};
  for (const auto& r : runs) header.push_back(r.at("label").get<std::string>());
  CsvWriter summary(hash, header);
  CsvWriter counts(hash, {"metric", "run", "count", "denominator", "pct"});
  const char* keys[] = {"existence", "cited_in_paper", "cited_in_intro", "pm_all", "pm_unique"};
  if (!runs.empty()) {
    for (std::size_t i = 0; i < stats::summary_metrics().size(); ++i) {
      csv::Row row{stats::summary_metrics()[i]};
      for (const auto& r : runs) {
        const auto& m = r.at("summary").at(keys[i]);
        row.push_back(m.at("pct").get<std::string>());
        counts.row({stats::summary_metrics()[i], r.at("label").get<std::string>(),
                    std::to_string(m.at("count").get<std::int64_t>()),
                    std::to_string(m.at("denominator").get<std::int64_t>()), m.at("pct").get<std::string>()});
      }
      summary.row(row);
    }
  }
  files["summary.csv"] = summary.str();
  files["summary_counts.csv"] = counts.str();

  CsvWriter overlap(hash, {"group", "run_a", "run_b", "overlap_pct"});
  for (const auto& o : analysis.at("overlap")) {
    overlap.row({o.at("group").get<std::string>(), o.at("a").get<std::string>(), o.at("b").get<std::string>(),
                 format_pct(o.at("pct"))});
  }
  files["overlap.csv"] = overlap.str();
}

inline void characteristics_reports(ReportFiles& files, const std::string& hash, const json& analysis) {
  std::map<std::string, CsvWriter> cohorts;
  for (const auto& c : cohort_names()) cohorts.emplace(c, CsvWriter(hash, {"group", "property", "bin", "count"}));
  CsvWriter medians(hash, {"cohort", "group", "property", "size", "known", "unknown", "median"});
  for (const auto& entry : analysis.at("characteristics")) {
    const auto cohort = entry.at("cohort").get<std::string>();
    const auto group = entry.at("group").get<std::string>();
    const auto& p = entry.at("profile");
    const auto size = p.at("size").get<std::int64_t>();
    if (size == 0) continue;
    auto& w = cohorts.at(cohort);
    for (const auto& prop : profile_properties()) {
      const auto& d = p.at(prop);
      for (const auto& b : d.at("bins")) {
        w.row({group, prop, b.at("bin").get<std::string>(), std::to_string(b.at("count").get<std::int64_t>())});
      }
      w.row({group, prop, "unknown", std::to_string(d.at("unknown").get<std::int64_t>())});
      medians.row({cohort, group, prop, std::to_string(size), std::to_string(d.at("known").get<std::int64_t>()),
                   std::to_string(d.at("unknown").get<std::int64_t>()), format_median(ratio_from_json(d.at("median")))});
    }
    for (const auto& [venue, n] : p.at("venues").items()) {
      w.row({group, "venue", venue, std::to_string(n.get<std::int64_t>())});
    }
  }
  for (const auto& [c, w] : cohorts) files[fs::path("characteristics") / (c + ".csv")] = w.str();
  files[fs::path("characteristics") / "medians.csv"] = medians.str();
}

inline void bias_reports(ReportFiles& files, const std::string& hash, const json& analysis) {
  std::map<std::string, CsvWriter> facets;
  for (auto f : all_facets()) {
    facets.emplace(stats::to_string(f), CsvWriter(hash, {"group", "metric", "bin", "pairs", "median_generated",
                                                         "median_ground_truth", "difference", "excluded"}));
  }
  for (const auto& g : analysis.at("bias")) {
    const auto group = g.at("group").get<std::string>();
    for (const auto& t : g.at("tables")) {
      auto& w = facets.at(t.at("facet").get<std::string>());
      const auto excluded = std::to_string(t.at("excluded").get<std::int64_t>());
      for (const auto& r : t.at("rows")) {
        w.row({group, t.at("metric").get<std::string>(), r.at("bin").get<std::string>(),
               std::to_string(r.at("pairs").get<std::int64_t>()),
               format_median(ratio_from_json(r.at("median_generated"))),
               format_median(ratio_from_json(r.at("median_ground_truth"))),
               format_median(ratio_from_json(r.at("difference"))), excluded});
      }
    }
  }
  for (const auto& [f, w] : facets) files[fs::path("bias") / (f + ".csv")] = w.str();
}

inline csv::Row graph_count_columns() {
  csv::Row cols;
  for (auto c : graph::kGeneratedCategories) cols.push_back(graph::to_string(c));
  cols.push_back(graph::to_string(graph::NodeCategory::GroundTruthUncited));
  return cols;
}

inline void graph_reports(ReportFiles& files, const std::string& hash, const json& metrics) {
  csv::Row header{"run", "paper_id", "bed", "expansion", "avg_clust_gt", "avg_clust_gen"};
  const auto cols = graph_count_columns();
  header.insert(header.end(), cols.begin(), cols.end());
  header.push_back("unknown_adjacency");
  CsvWriter w(hash, header);
  for (const auto& run : metrics.at("runs")) {
    for (const auto& p : run.at("papers")) {
      csv::Row row{run.at("label").get<std::string>(), p.at("paper_id").get<std::string>()};
      for (const char* k : {"bed", "expansion", "avg_clust_gt", "avg_clust_gen"}) {
        row.push_back(format_maybe(ratio_from_json(p.at(k)), 4));
      }
      for (const auto& c : cols) row.push_back(std::to_string(p.at("counts").value(c, std::int64_t{0})));
      row.push_back(std::to_string(p.at("unknown_adjacency").get<std::int64_t>()));
      w.row(row);
    }
  }
  files["graph_metrics.csv"] = w.str();

  CsvWriter prof(hash, {"group", "category", "property", "bin", "count"});
  CsvWriter med(hash, {"group", "category", "property", "size", "known", "unknown", "median"});
  for (const auto& p : metrics.at("profiles")) {
    const auto group = p.at("group").get<std::string>();
    const auto cat = p.at("category").get<std::string>();
    for (const char* prop : {"citation_count", "reference_count"}) {
      const auto& d = p.at(prop);
      for (const auto& b : d.at("bins")) {
        prof.row({group, cat, prop, b.at("bin").get<std::string>(), std::to_string(b.at("count").get<std::int64_t>())});
      }
      prof.row({group, cat, prop, "unknown", std::to_string(d.at("unknown").get<std::int64_t>())});
      med.row({group, cat, prop, std::to_string(p.at("size").get<std::int64_t>()),
               std::to_string(d.at("known").get<std::int64_t>()), std::to_string(d.at("unknown").get<std::int64_t>()),
               format_median(ratio_from_json(d.at("median")))});
    }
  }
  files["graph_profiles.csv"] = prof.str();
  files["graph_medians.csv"] = med.str();
}

inline std::string markdown_summary(const std::string& hash, const json& analysis, const json& metrics) {
  std::string md = "# Citation audit summary\n\nManifest: `" + hash + "`\n\n";
  md += "Papers analysed: " + std::to_string(analysis.at("papers").size()) + "\n";
  md += "Papers dropped: " + std::to_string(analysis.at("dropped").size()) + "\n\n";
  const auto& runs = analysis.at("runs");
  if (runs.empty()) return md + "No run produced verdicts.\n";
  md += "| Metric |";
  std::string rule = "|---|";
  for (const auto& r : runs) {
    md += " " + r.at("label").get<std::string>() + " |";
    rule += "---|";
  }
  md += "\n" + rule + "\n";
  const char* keys[] = {"existence", "cited_in_paper", "cited_in_intro", "pm_all", "pm_unique"};
  for (std::size_t i = 0; i < stats::summary_metrics().size(); ++i) {
    md += "| " + stats::summary_metrics()[i] + " |";
    for (const auto& r : runs) {
      const auto& m = r.at("summary").at(keys[i]);
      md += " " + m.at("pct").get<std::string>() + "% (" + std::to_string(m.at("count").get<std::int64_t>()) + "/" +
            std::to_string(m.at("denominator").get<std::int64_t>()) + ") |";
    }
    md += "\n";
  }
  if (!analysis.at("overlap").empty()) {
    md += "\n## Run overlap\n\n";
    for (const auto& o : analysis.at("overlap")) {
      md += "- " + o.at("a").get<std::string>() + " vs " + o.at("b").get<std::string>() + ": " +
            format_pct(o.at("pct")) + "%\n";
    }
  }
  md += "\n## Citation graphs\n\n";
  for (const auto& run : metrics.at("runs")) {
    std::int64_t n = 0, linked = 0, isolated = 0;
    for (const auto& p : run.at("papers")) {
      ++n;
      linked += p.at("counts").value("generated_linked", std::int64_t{0});
      isolated += p.at("counts").value("generated_isolated", std::int64_t{0});
    }
    md += "- " + run.at("label").get<std::string>() + ": " + std::to_string(n) + " graphs, " +
          std::to_string(linked) + " linked and " + std::to_string(isolated) + " isolated generated nodes\n";
  }
  return md;
}

inline ReportFiles render_reports(const std::string& hash, const json& analysis, const json& metrics) {
  ReportFiles files;
  summary_reports(files, hash, analysis);
  characteristics_reports(files, hash, analysis);
  bias_reports(files, hash, analysis);
  graph_reports(files, hash, metrics);
  files["histograms.json"] = dump({{"manifest_hash", hash},
                                   {"characteristics", analysis.at("characteristics")},
                                   {"graph_profiles", metrics.at("profiles")}});
  files["summary.md"] = markdown_summary(hash, analysis, metrics);
  return files;
}

/// Checks the destination is writable, then writes every file.
inline void write_reports(const fs::path& dir, const ReportFiles& files) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".write-probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("report directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
  for (const auto& [rel, content] : files) io::write_if_changed(dir / rel, content);
}

inline void stage_report(Context& ctx) {
  const auto& layout = ctx.layout();
  const auto analysis = require_json(layout.analysis(), "run the analyze stage first");
  const auto metrics = require_json(layout.graph_metrics(), "run the graph stage first");
  const auto files = render_reports(ctx.manifest().hash(), analysis, metrics);
  write_reports(layout.reports(), files);
  ctx.manifest().count("report", "files", static_cast<std::int64_t>(files.size()));
}

}  // namespace citeaudit::orchestrator
