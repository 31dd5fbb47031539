#pragma once

// Corpus-level aggregation over the per-paper run artifacts: summary
// statistics, run overlap, characteristics, citation bias and the citation
// graphs of every focal paper.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "citeaudit/graph/graph.hpp"
#include "citeaudit/orchestrator/stages.hpp"
#include "citeaudit/stats/stats.hpp"

namespace citeaudit::orchestrator {

struct PaperView {
  PreparedArtifacts prepared;
  /// Intro citation number -> index id of its ground-truth reference.
  std::map<int, std::string> intro_ids;
  std::map<int, ReferenceEntry> ground_truth;
};

struct RunView {
  RunId id;
  std::map<std::string, std::map<int, VerifiedEntry>> entries;  // by paper id
};

/// The analysed corpus: prepared papers that have verdicts in every run that
/// produced any output. Dropped papers come back with the reason.
struct AnalysisInputs {
  std::vector<std::string> paper_ids;
  std::map<std::string, PaperView> papers;
  std::vector<RunView> runs;
  std::vector<ExclusionRecord> dropped;
};

inline std::vector<RunId> all_configured_runs(const PipelineConfig& cfg) {
  auto runs = configured_runs(cfg, llmgate::Strategy::Vanilla);
  for (auto& r : configured_runs(cfg, llmgate::Strategy::Iterative)) runs.push_back(std::move(r));
  return runs;
}

inline PaperView paper_view(const Layout& layout, const std::string& pid) {
  PaperView v;
  v.prepared = load_prepared(layout, pid);
  for (const auto& e : v.prepared.ground_truth) {
    v.ground_truth.emplace(e.citation_number, e);
    if (e.index_id && !e.index_id->empty()) v.intro_ids.emplace(e.citation_number, *e.index_id);
  }
  return v;
}

inline AnalysisInputs load_analysis_inputs(const Context& ctx) {
  const auto& layout = ctx.layout();
  AnalysisInputs in;
  const auto prepared = prepared_ids(layout);
  for (const auto& r : all_configured_runs(ctx.config())) {
    RunView rv{r, {}};
    for (const auto& pid : prepared) {
      if (auto j = read_json(layout.run_paper(r, pid) / "verdicts.json")) rv.entries.emplace(pid, load_entries(*j));
    }
    if (!rv.entries.empty()) in.runs.push_back(std::move(rv));
  }
  std::sort(in.runs.begin(), in.runs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& pid : prepared) {
    std::optional<ExclusionRecord> missing;
    for (const auto& rv : in.runs) {
      if (rv.entries.count(pid)) continue;
      const auto q = read_json(quarantine_file(layout.run_paper(rv.id, pid)));
      Exclusion ex = q ? exclusion_from_json(*q)
                       : Exclusion{reason::kLlmFailure, "no verdicts for run " + rv.id.label()};
      ex.detail = rv.id.label() + ": " + ex.detail;
      missing = ExclusionRecord{pid, ex};
      break;
    }
    if (missing) {
      in.dropped.push_back(*missing);
      continue;
    }
    in.paper_ids.push_back(pid);
    in.papers.emplace(pid, paper_view(layout, pid));
  }
  return in;
}

// ---------------------------------------------------------------------------
// Slots

struct RunSlots {
  std::vector<stats::SlotRecord> records;
  std::map<stats::SlotKey, stats::Flags> flags;
  std::map<stats::SlotKey, std::string> identities;
};

inline RunSlots run_slots(const AnalysisInputs& in, const RunView& run) {
  RunSlots out;
  for (const auto& pid : in.paper_ids) {
    const auto& pv = in.papers.at(pid);
    const auto& entries = run.entries.at(pid);
    for (int n : pv.prepared.paper.intro_reference_numbers) {
      const stats::SlotKey key{pid, n};
      const auto it = entries.find(n);
      stats::Flags f;
      std::string identity;
      if (it != entries.end()) {
        f = stats::classify_generated(it->second.exists ? it->second.matched_id : std::nullopt, n,
                                      pv.prepared.paper, pv.intro_ids);
        identity = stats::generated_identity(it->second.exists ? it->second.matched_id : std::nullopt,
                                             it->second.generated.title);
      }
      out.records.push_back({key, f, pv.prepared.uniquely_identifiable.count(n) > 0});
      out.flags.emplace(key, f);
      out.identities.emplace(key, identity);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON forms shared with the report emitter

inline json to_json(const stats::BiasTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"bin", r.bin},
                    {"pairs", r.pairs},
                    {"median_generated", stats::ratio_json(r.median_generated)},
                    {"median_ground_truth", stats::ratio_json(r.median_ground_truth)},
                    {"difference", stats::ratio_json(r.difference)}});
  }
  return {{"facet", stats::to_string(t.facet)},
          {"metric", stats::to_string(t.metric)},
          {"excluded", t.excluded},
          {"rows", rows}};
}

inline json cohort_entry(const std::string& cohort, const std::string& group, const stats::CohortProfile& p) {
  return {{"cohort", cohort}, {"group", group}, {"profile", stats::to_json(p)}};
}

inline const std::vector<stats::Facet>& all_facets() {
  static const std::vector<stats::Facet> f{stats::Facet::Subperiod, stats::Facet::TitleLength,
                                           stats::Facet::AuthorCount, stats::Facet::Venue};
  return f;
}

inline json bias_tables(const std::vector<stats::BiasPair>& pairs, const stats::BiasBins& bins) {
  json out = json::array();
  for (auto f : all_facets()) {
    for (auto m : {stats::CountMetric::Citations, stats::CountMetric::InfluentialCitations}) {
      out.push_back(to_json(stats::bias_breakdown(pairs, f, m, bins)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// analyze

inline json analyze(const AnalysisInputs& in, const stats::CharacteristicsBins& cbins, const stats::BiasBins& bbins) {
  json runs = json::array();
  std::map<std::string, std::vector<std::pair<std::string, RunSlots>>> groups;  // group -> (label, slots)
  std::map<std::string, const RunView*> by_label;
  for (const auto& rv : in.runs) {
    auto slots = run_slots(in, rv);
    runs.push_back({{"label", rv.id.label()},
                    {"group", rv.id.group()},
                    {"model", rv.id.model},
                    {"strategy", llmgate::to_string(rv.id.strategy)},
                    {"index", rv.id.index},
                    {"summary", stats::to_json(stats::summarize_run(slots.records))}});
    by_label.emplace(rv.id.label(), &rv);
    groups[rv.id.group()].emplace_back(rv.id.label(), std::move(slots));
  }

  json overlap = json::array();
  for (const auto& [group, members] : groups) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        overlap.push_back({{"group", group},
                           {"a", members[i].first},
                           {"b", members[j].first},
                           {"pct", stats::ratio_json(stats::run_overlap(members[i].second.identities,
                                                                        members[j].second.identities))}});
      }
    }
  }

  // Ground truth rows per slot; index counts only where the reference resolved.
  std::map<stats::SlotKey, stats::CharacteristicsRow> gt_rows;
  std::vector<stats::CharacteristicsRow> gt_list;
  for (const auto& pid : in.paper_ids) {
    for (const auto& [n, e] : in.papers.at(pid).ground_truth) {
      auto row = stats::characteristics_row(e, e.index_id.has_value());
      gt_rows.emplace(stats::SlotKey{pid, n}, row);
      gt_list.push_back(row);
    }
  }
  json characteristics = json::array();
  characteristics.push_back(cohort_entry("ground_truth", "all", stats::characteristics(gt_list, cbins)));

  json bias = json::array();
  for (const auto& [group, members] : groups) {
    std::vector<stats::CharacteristicsRow> all, existing, nonexistent;
    std::map<stats::SlotKey, stats::CharacteristicsRow> gen_existing, gt_pooled;
    std::map<stats::SlotKey, stats::Flags> flags_pooled;
    for (const auto& [label, slots] : members) {
      const auto& rv = *by_label.at(label);
      for (const auto& pid : in.paper_ids) {
        const auto& entries = rv.entries.at(pid);
        for (int n : in.papers.at(pid).prepared.paper.intro_reference_numbers) {
          // Slots are pooled across the group's runs, so keys carry the run.
          const stats::SlotKey pooled{label + ":" + pid, n};
          if (auto g = gt_rows.find({pid, n}); g != gt_rows.end()) gt_pooled.emplace(pooled, g->second);
          flags_pooled.emplace(pooled, slots.flags.at({pid, n}));
          const auto it = entries.find(n);
          if (it == entries.end()) continue;
          const auto row = stats::characteristics_row(it->second.reference, it->second.exists);
          all.push_back(row);
          if (it->second.exists) {
            existing.push_back(row);
            gen_existing.emplace(pooled, row);
          } else {
            nonexistent.push_back(row);
          }
        }
      }
    }
    characteristics.push_back(cohort_entry("generated_all", group, stats::characteristics(all, cbins)));
    characteristics.push_back(cohort_entry("generated_existing", group, stats::characteristics(existing, cbins)));
    characteristics.push_back(
        cohort_entry("generated_nonexistent", group, stats::characteristics(nonexistent, cbins)));
    auto split = stats::cohort_split_by_counterpart(gt_pooled, flags_pooled);
    for (auto c : {stats::Counterpart::InPaper, stats::Counterpart::Existing, stats::Counterpart::Nonexistent}) {
      characteristics.push_back(cohort_entry(stats::to_string(c), group, stats::characteristics(split[c], cbins)));
    }
    bias.push_back({{"group", group}, {"tables", bias_tables(stats::pair_by_slot(gen_existing, gt_pooled), bbins)}});
  }

  json dropped = json::array();
  for (const auto& d : in.dropped) {
    dropped.push_back({{"id", d.id}, {"reason", d.exclusion.reason}, {"detail", d.exclusion.detail}});
  }
  return {{"papers", in.paper_ids},
          {"dropped", dropped},
          {"runs", runs},
          {"overlap", overlap},
          {"characteristics", characteristics},
          {"bias", bias}};
}

inline stats::BiasBins bias_bins(const PipelineConfig& cfg) {
  stats::BiasBins b;
  b.subperiod = stats::subperiod_binning(cfg.subperiod_interior);
  return b;
}

inline void stage_analyze(Context& ctx) {
  const auto in = load_analysis_inputs(ctx);
  for (const auto& d : in.dropped) ctx.manifest().add_exclusion("analyze", d.id, d.exclusion);
  ctx.manifest().count("analyze", "papers", static_cast<std::int64_t>(in.paper_ids.size()));
  ctx.manifest().count("analyze", "runs", static_cast<std::int64_t>(in.runs.size()));
  write_json(ctx.layout().analysis(), analyze(in, {}, bias_bins(ctx.config())));
}

// ---------------------------------------------------------------------------
// graph

struct PaperGraph {
  graph::CitationGraph graph;
  graph::Tags tags;
  graph::GraphMetrics metrics;
  std::map<std::string, stats::CharacteristicsRow> meta;
};

/// Builds one focal paper's graph for a run. Adjacency comes from the
/// enrichment of the ground-truth and matched generated references; nodes
/// without enrichment have unknown adjacency.
inline PaperGraph paper_graph(const std::string& pid, const PaperView& pv, const std::map<int, VerifiedEntry>& entries) {
  graph::Adjacency adjacency;
  std::map<std::string, stats::CharacteristicsRow> meta;
  std::set<std::string> intro;
  for (const auto& [n, id] : pv.intro_ids) {
    intro.insert(id);
    const auto& e = pv.ground_truth.at(n);
    adjacency[id] = e.outgoing_reference_ids;
    meta.emplace(id, stats::characteristics_row(e, true));
  }
  std::vector<std::string> generated;
  for (const auto& [n, v] : entries) {
    if (!v.exists || !v.matched_id) continue;
    generated.push_back(*v.matched_id);
    adjacency.emplace(*v.matched_id, v.reference.outgoing_reference_ids);
    meta.emplace(*v.matched_id, stats::characteristics_row(v.reference, true));
  }
  PaperGraph pg;
  pg.graph = graph::build_graph(pv.prepared.paper, intro, generated, adjacency);
  pg.tags = graph::categorize(pg.graph, pv.prepared.paper);
  pg.metrics = graph::compute_metrics(pid, pg.graph, pg.tags);
  pg.meta = std::move(meta);
  return pg;
}

inline json to_json(const graph::GraphMetrics& m) {
  json counts = json::object();
  for (auto c : graph::kGeneratedCategories) counts[graph::to_string(c)] = 0;
  counts[graph::to_string(graph::NodeCategory::GroundTruthUncited)] = 0;
  for (const auto& [c, n] : m.counts) counts[graph::to_string(c)] = n;
  return {{"paper_id", m.paper_id},
          {"bed", stats::ratio_json(m.bed)},
          {"expansion", stats::ratio_json(m.expansion)},
          {"avg_clust_gt", stats::ratio_json(m.avg_clust_gt)},
          {"avg_clust_gen", stats::ratio_json(m.avg_clust_gen)},
          {"counts", counts},
          {"unknown_adjacency", m.unknown_adjacency}};
}

inline json graph_all(const Layout& layout, const AnalysisInputs& in, const stats::CharacteristicsBins& bins) {
  json runs = json::array();
  json profiles = json::array();
  std::map<std::string, std::vector<std::pair<graph::Tags, std::map<std::string, stats::CharacteristicsRow>>>> by_group;
  for (const auto& rv : in.runs) {
    json papers = json::array();
    for (const auto& pid : in.paper_ids) {
      const auto pg = paper_graph(pid, in.papers.at(pid), rv.entries.at(pid));
      const auto dir = layout.graph_dir(rv.id, pid);
      io::write_if_changed(dir / "edges.tsv", graph::edges_tsv(pg.graph));
      io::write_if_changed(dir / "tags.tsv", graph::tags_tsv(pg.tags));
      papers.push_back(to_json(pg.metrics));
      by_group[rv.id.group()].emplace_back(pg.tags, pg.meta);
    }
    runs.push_back({{"label", rv.id.label()}, {"papers", papers}});
  }
  for (const auto& [group, graphs] : by_group) {
    for (const auto& [cat, p] : graph::category_profiles(graphs, bins)) {
      profiles.push_back({{"group", group},
                          {"category", graph::to_string(cat)},
                          {"size", p.size},
                          {"citation_count", stats::to_json(p.citation_count)},
                          {"reference_count", stats::to_json(p.reference_count)}});
    }
  }
  return {{"runs", runs}, {"profiles", profiles}};
}

inline void stage_graph(Context& ctx) {
  const auto in = load_analysis_inputs(ctx);
  const auto out = graph_all(ctx.layout(), in, {});
  std::int64_t graphs = 0;
  for (const auto& r : out["runs"]) graphs += static_cast<std::int64_t>(r["papers"].size());
  ctx.manifest().count("graph", "graphs", graphs);
  write_json(ctx.layout().graph_metrics(), out);
}

}  // namespace citeaudit::orchestrator
