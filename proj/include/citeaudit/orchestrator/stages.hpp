#pragma once

// Per-paper pipeline stages. Each unit of work writes its artifacts under the
// output layout together with the hash of its inputs; a unit whose artifact
// already carries the current input hash is reused instead of recomputed.
// Failures of a single paper are quarantined and never abort the stage.

#include <spdlog/spdlog.h>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "citeaudit/corpus/corpus.hpp"
#include "citeaudit/docprep/prepare.hpp"
#include "citeaudit/llmgate/generation.hpp"
#include "citeaudit/matcher/matcher.hpp"
#include "citeaudit/orchestrator/context.hpp"

namespace citeaudit::orchestrator {

// ---------------------------------------------------------------------------
// Shared helpers

/// Maps a per-paper failure onto an exclusion. Anything not listed here
/// (I/O, configuration) is a hard failure and propagates.
inline std::optional<Exclusion> quarantinable(const std::exception& e, const char* transport_reason) {
  if (dynamic_cast<const llmgate::RefusalError*>(&e)) return Exclusion{reason::kRefusal, e.what()};
  if (dynamic_cast<const llmgate::MockMissError*>(&e)) return Exclusion{reason::kLlmFailure, e.what()};
  if (dynamic_cast<const TransportError*>(&e)) return Exclusion{transport_reason, e.what()};
  if (dynamic_cast<const AmbiguityError*>(&e)) return Exclusion{reason::kAmbiguousTitle, e.what()};
  if (dynamic_cast<const NotFoundError*>(&e)) return Exclusion{reason::kNotInIndex, e.what()};
  if (dynamic_cast<const ParseError*>(&e)) return Exclusion{reason::kUnparseable, e.what()};
  if (dynamic_cast<const PreconditionError*>(&e)) return Exclusion{reason::kNotResolved, e.what()};
  return std::nullopt;
}

inline fs::path quarantine_file(const fs::path& dir) { return dir / "quarantine.json"; }

/// Records the exclusion next to the unit's artifacts and removes the primary
/// artifact so later stages cannot pick up stale results.
inline void quarantine(Context& ctx, const std::string& stage, const std::string& id, const fs::path& dir,
                       const fs::path& primary, const Exclusion& ex) {
  spdlog::warn("{}: quarantined {} ({}: {})", stage, id, ex.reason, ex.detail);
  std::error_code ec;
  fs::remove(primary, ec);
  write_json(quarantine_file(dir), to_json(ex));
  ctx.manifest().add_exclusion(stage, id, ex);
}

inline void clear_quarantine(const fs::path& dir) {
  std::error_code ec;
  fs::remove(quarantine_file(dir), ec);
}

/// True when `path` holds JSON stamped with `input_hash` and reuse is allowed.
inline std::optional<json> reusable(const Context& ctx, const fs::path& path, const std::string& input_hash) {
  if (ctx.refresh()) return std::nullopt;
  auto j = read_json(path);
  if (!j || !j->is_object() || j->value("input_hash", "") != input_hash) return std::nullopt;
  return j;
}

inline std::string hash_of(const json& j) { return io::sha256_hex(j.dump()); }

inline std::vector<PaperRecord> load_papers(const Layout& layout) {
  const auto j = require_json(layout.papers(), "run the ingest stage first");
  std::vector<PaperRecord> out;
  for (const auto& p : j) out.push_back(paper_from_json(p));
  return out;
}

// ---------------------------------------------------------------------------
// ingest

inline void stage_ingest(Context& ctx) {
  const auto& cfg = ctx.config();
  const auto& layout = ctx.layout();
  auto stubs = harvest_candidates(ctx.preprints(), cfg.window, cfg.category, cfg.keywords);
  ctx.manifest().count("ingest", "harvested", static_cast<std::int64_t>(stubs.size()));
  for (const auto& s : stubs) {
    if (const auto hit = blacklist_hit(s, cfg.blacklist)) {
      ctx.manifest().add_exclusion("ingest", s.preprint_id,
                                   {reason::kBlacklisted, "journal reference mentions '" + *hit + "'"});
    }
  }
  const auto kept = filter_candidates(stubs, cfg.blacklist);
  json cj = json::array();
  for (const auto& s : kept) cj.push_back(to_json(s));
  write_json(layout.candidates(), cj);

  std::vector<std::optional<PaperRecord>> resolved(kept.size());
  auto& index = ctx.index();
  auto& preprints = ctx.preprints();
  parallel_for(kept.size(), static_cast<std::size_t>(cfg.jobs), [&](std::size_t i) {
    const auto& stub = kept[i];
    std::optional<Exclusion> ex;
    try {
      auto r = resolve_paper(index, stub, ctx.venues());
      if (auto* e = std::get_if<Exclusion>(&r)) {
        ex = *e;
      } else {
        resolved[i] = std::get<PaperRecord>(r);
      }
    } catch (const Error& e) {
      ex = quarantinable(e, reason::kIndexError);
      if (!ex) throw;
    }
    if (!ex) {
      const auto dir = layout.source_dir(stub.preprint_id);
      std::error_code ec;
      if (ctx.refresh() || !fs::exists(dir, ec)) {
        auto tmp = dir;
        tmp += ".partial";
        fs::remove_all(tmp, ec);
        try {
          if (preprints.fetch_source(stub.preprint_id, tmp)) {
            fs::remove_all(dir, ec);
            fs::create_directories(dir.parent_path());
            fs::rename(tmp, dir);
          } else {
            ex = Exclusion{reason::kNoSource, "no source bundle for " + stub.preprint_id};
          }
        } catch (const TransportError& e) {
          ex = Exclusion{reason::kNoSource, e.what()};
        }
        fs::remove_all(tmp, ec);
      }
    }
    if (ex) {
      resolved[i].reset();
      ctx.manifest().add_exclusion("ingest", stub.preprint_id, *ex);
    }
  });

  std::vector<PaperRecord> papers;
  std::set<std::string> index_ids;
  for (auto& p : resolved) {
    if (!p) continue;
    if (!index_ids.insert(p->index_id).second) {
      ctx.manifest().add_exclusion("ingest", p->preprint_id,
                                   {reason::kAmbiguousTitle, "index id " + p->index_id + " already used"});
      continue;
    }
    papers.push_back(std::move(*p));
  }
  std::sort(papers.begin(), papers.end(),
            [](const auto& a, const auto& b) { return a.preprint_id < b.preprint_id; });
  json pj = json::array();
  for (const auto& p : papers) pj.push_back(to_json(p));
  write_json(layout.papers(), pj);
  ctx.manifest().count("ingest", "papers", static_cast<std::int64_t>(papers.size()));
  ctx.manifest().corpus_hash = io::sha256_hex(dump(pj));
}

// ---------------------------------------------------------------------------
// prepare: docprep plus ground-truth structuring and enrichment

struct PreparedArtifacts {
  PaperRecord paper;  // with intro_reference_numbers
  std::string main_text;
  std::set<int> uniquely_identifiable;
  std::vector<ReferenceEntry> ground_truth;  // one per intro reference, by number
};

/// Matches each structured intro reference to the focal paper's index
/// reference list by title and enriches the hits.
inline std::vector<ReferenceEntry> resolve_ground_truth(const std::vector<docprep::RawReference>& intro,
                                                        const llmgate::TableParse& table, const PaperRecord& focal,
                                                        ScholarlyIndex& index, const VenueTable& venues,
                                                        const Ratio& title_threshold) {
  std::map<int, const llmgate::GeneratedReference*> rows;
  for (const auto& r : table.rows) rows.emplace(r.citation_number, &r);
  std::vector<ReferenceEntry> out;
  for (const auto& raw : intro) {
    ReferenceEntry e;
    e.citation_number = raw.number;
    e.raw_text = raw.text;
    const auto it = rows.find(raw.number);
    if (it == rows.end() || text::trim(it->second->title).empty()) {
      e.not_found_reason = "not-structured";
      out.push_back(std::move(e));
      continue;
    }
    const auto& row = *it->second;
    e.title = row.title;
    e.authors = row.authors;
    e.author_count = row.author_count;
    e.year = row.year;
    e.venue = row.venue;
    std::optional<std::size_t> best;
    Ratio best_score(0);
    for (std::size_t i = 0; i < focal.reference_titles.size() && i < focal.reference_ids.size(); ++i) {
      const auto s = matcher::title_similarity(row.title, focal.reference_titles[i]);
      if (s >= title_threshold && (!best || s > best_score)) {
        best = i;
        best_score = s;
      }
    }
    if (!best) {
      e.not_found_reason = std::string(reason::kNotResolved);
    } else {
      try {
        apply_enrichment(e, enrich_reference(index, focal.reference_ids[*best], venues));
      } catch (const NotFoundError&) {
        e.not_found_reason = std::string(reason::kNotInIndex);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline json groups_json(const std::vector<docprep::BracketGroup>& groups) {
  json a = json::array();
  for (const auto& g : groups) a.push_back({{"raw", g.raw}, {"numbers", g.numbers}});
  return a;
}

inline PreparedArtifacts load_prepared(const Layout& layout, const std::string& pid) {
  const auto dir = layout.prepared(pid);
  const auto pj = require_json(dir / "prepared.json", "run the prepare stage first");
  const auto gj = require_json(dir / "ground_truth.json", "run the prepare stage first");
  PreparedArtifacts a;
  a.paper = paper_from_json(pj.at("paper"));
  a.uniquely_identifiable = pj.at("uniquely_identifiable").get<std::set<int>>();
  a.main_text = io::read_file(dir / "main_content.txt");
  for (const auto& r : gj.at("references")) a.ground_truth.push_back(reference_from_json(r));
  return a;
}

/// Papers whose prepare unit completed, in corpus order.
inline std::vector<std::string> prepared_ids(const Layout& layout) {
  std::vector<std::string> out;
  for (const auto& p : load_papers(layout)) {
    std::error_code ec;
    if (fs::exists(layout.prepared(p.preprint_id) / "ground_truth.json", ec)) out.push_back(p.preprint_id);
  }
  return out;
}

inline void prepare_one(Context& ctx, const PaperRecord& paper) {
  const auto& layout = ctx.layout();
  const auto& cfg = ctx.config();
  const auto dir = layout.prepared(paper.preprint_id);
  const auto src = layout.source_dir(paper.preprint_id);
  const auto gt_ratio = matcher::parse_decimal(cfg.matcher.ground_truth_title);
  const std::string input_hash =
      hash_of({{"paper", to_json(paper)},
               {"source", tree_hash(src)},
               {"toolchain", ctx.toolchain().name()},
               {"postprocess_model", to_json(cfg)["models"]},
               {"postprocess_id", cfg.postprocess_model},
               {"templates", llmgate::templates::hashes()},
               {"ground_truth_title_threshold", gt_ratio.str()},
               {"venues", ctx.venues().to_json()}});
  if (reusable(ctx, dir / "ground_truth.json", input_hash) && reusable(ctx, dir / "prepared.json", input_hash)) {
    ctx.manifest().count("prepare", "reused");
    return;
  }
  try {
    auto result = docprep::prepare_paper(src, ctx.toolchain());
    if (auto* ex = std::get_if<Exclusion>(&result)) {
      quarantine(ctx, "prepare", paper.preprint_id, dir, dir / "ground_truth.json", *ex);
      return;
    }
    const auto& prep = std::get<docprep::PreparedPaper>(result);
    if (prep.intro_references.empty()) {
      quarantine(ctx, "prepare", paper.preprint_id, dir, dir / "ground_truth.json",
                 {reason::kNoIntroCitations, "main content cites no bibliography entry"});
      return;
    }
    io::write_if_changed(dir / "main_content.txt", prep.main.text);
    io::write_if_changed(dir / "references.txt", docprep::format_reference_list(prep.references));
    const auto intro_list = docprep::format_reference_list(prep.intro_references);
    io::write_if_changed(dir / "intro_references.txt", intro_list);

    PaperRecord focal = paper;
    for (const auto& r : prep.intro_references) focal.intro_reference_numbers.insert(r.number);

    const auto& pm = cfg.postprocess();
    auto& provider = ctx.provider(pm.id, "ground_truth");
    const auto structured = llmgate::structure_references(provider, pm.sampling, intro_list, ctx.venues(),
                                                          llmgate::Strategy::Vanilla, dir / "ground_truth_table");
    const auto gt = resolve_ground_truth(prep.intro_references, structured.table, focal, ctx.index(), ctx.venues(),
                                         gt_ratio);
    json refs = json::array();
    std::int64_t resolved = 0;
    for (const auto& e : gt) {
      refs.push_back(to_json(e));
      resolved += e.index_id.has_value();
    }
    write_json(dir / "prepared.json", {{"input_hash", input_hash},
                                       {"paper", to_json(focal)},
                                       {"bibliography_source", prep.bibliography_source},
                                       {"reference_count", prep.references.size()},
                                       {"groups", groups_json(prep.groups)},
                                       {"uniquely_identifiable", prep.uniquely_identifiable},
                                       {"dangling", prep.dangling}});
    write_json(dir / "ground_truth.json", {{"input_hash", input_hash},
                                           {"references", refs},
                                           {"resolved", resolved},
                                           {"reasked", structured.reasked},
                                           {"anomalies", structured.table.anomalies},
                                           {"quarantined_rows", structured.table.quarantined.size()}});
    clear_quarantine(dir);
    ctx.manifest().count("prepare", "prepared");
    ctx.manifest().count("prepare", "intro_references", static_cast<std::int64_t>(gt.size()));
    ctx.manifest().count("prepare", "ground_truth_resolved", resolved);
  } catch (const Error& e) {
    auto ex = quarantinable(e, reason::kLlmFailure);
    if (!ex) throw;
    quarantine(ctx, "prepare", paper.preprint_id, dir, dir / "ground_truth.json", *ex);
  }
}

inline void stage_prepare(Context& ctx) {
  const auto papers = load_papers(ctx.layout());
  (void)ctx.toolchain();
  (void)ctx.index();
  parallel_for(papers.size(), static_cast<std::size_t>(ctx.config().jobs),
               [&](std::size_t i) { prepare_one(ctx, papers[i]); });
}

// ---------------------------------------------------------------------------
// Runs

/// Which runs a stage invocation covers.
struct RunSelection {
  std::optional<std::string> model;
  std::optional<int> runs;  // overrides the configured count

  bool includes(const std::string& id) const { return !model || *model == id; }
};

inline std::vector<RunId> configured_runs(const PipelineConfig& cfg, llmgate::Strategy s, const RunSelection& sel = {}) {
  std::vector<RunId> out;
  for (const auto& m : cfg.models) {
    if (!sel.includes(m.id)) continue;
    int n = s == llmgate::Strategy::Vanilla ? m.vanilla_runs : m.iterative_runs;
    if (sel.runs) n = *sel.runs;
    for (int k = 1; k <= n; ++k) out.push_back({m.id, s, k});
  }
  return out;
}

inline std::string run_scope(const RunId& r) { return llmgate::to_string(r.strategy) + "-" + std::to_string(r.index); }

// ---------------------------------------------------------------------------
// generate (vanilla)

inline json generated_json(const std::string& input_hash, const llmgate::StructuredResult& s) {
  json refs = json::array();
  for (const auto& r : s.table.rows) refs.push_back(llmgate::to_json(r));
  json quarantined = json::array();
  for (const auto& q : s.table.quarantined) quarantined.push_back({{"raw", q.raw}, {"reason", q.reason}});
  return {{"input_hash", input_hash},
          {"references", refs},
          {"quarantined_rows", quarantined},
          {"anomalies", s.table.anomalies},
          {"reasked", s.reasked}};
}

inline void generate_one(Context& ctx, const RunId& run, const std::string& pid) {
  const auto& layout = ctx.layout();
  const auto& model = ctx.config().model(run.model);
  const auto dir = layout.run_paper(run, pid);
  const auto id = run.label() + ":" + pid;
  const auto main = io::read_file(layout.prepared(pid) / "main_content.txt");
  const std::string input_hash = hash_of({{"main", io::sha256_hex(main)},
                                          {"model", model.model},
                                          {"provider", model.provider},
                                          {"sampling", model.sampling},
                                          {"run", run.label()},
                                          {"templates", llmgate::templates::hashes()},
                                          {"venues", ctx.venues().to_json()}});
  if (reusable(ctx, dir / "generated.json", input_hash)) {
    ctx.manifest().count("generate", "reused");
    return;
  }
  try {
    auto& provider = ctx.provider(run.model, run_scope(run));
    llmgate::GenerationRun gr{run.model, run.strategy, run.index, model.sampling, {}, std::nullopt};
    const auto out = llmgate::generate(gr, llmgate::render_vanilla_prompt(main), provider, dir / "response.txt");
    write_json(dir / "transcript.json", llmgate::to_json(gr));
    if (out.kind == llmgate::OutcomeKind::Refusal) {
      quarantine(ctx, "generate", id, dir, dir / "generated.json", {reason::kRefusal, out.detail});
      return;
    }
    const auto s = llmgate::structure_references(provider, model.sampling, out.text, ctx.venues(), run.strategy,
                                                 dir / "table");
    write_json(dir / "generated.json", generated_json(input_hash, s));
    clear_quarantine(dir);
    ctx.manifest().count("generate", "generated");
  } catch (const Error& e) {
    auto ex = quarantinable(e, reason::kLlmFailure);
    if (!ex) throw;
    quarantine(ctx, "generate", id, dir, dir / "generated.json", *ex);
  }
}

inline void stage_generate(Context& ctx, const RunSelection& sel = {}) {
  const auto ids = prepared_ids(ctx.layout());
  const auto runs = configured_runs(ctx.config(), llmgate::Strategy::Vanilla, sel);
  for (const auto& r : runs) (void)ctx.provider(r.model, run_scope(r));
  std::vector<std::pair<RunId, std::string>> units;
  for (const auto& r : runs) {
    for (const auto& id : ids) units.emplace_back(r, id);
  }
  parallel_for(units.size(), static_cast<std::size_t>(ctx.config().jobs),
               [&](std::size_t i) { generate_one(ctx, units[i].first, units[i].second); });
}

// ---------------------------------------------------------------------------
// verify

/// One generated reference with its existence verdict. `reference` carries
/// the parsed fields overlaid with index metadata when the match exists.
struct VerifiedEntry {
  llmgate::GeneratedReference generated;
  bool exists = false;
  std::optional<std::string> matched_id;
  json verdict = json::object();
  ReferenceEntry reference;
};

inline json to_json(const VerifiedEntry& v) {
  return {{"generated", llmgate::to_json(v.generated)},
          {"exists", v.exists},
          {"matched_index_id", v.matched_id ? json(*v.matched_id) : json(nullptr)},
          {"verdict", v.verdict},
          {"reference", citeaudit::to_json(v.reference)}};
}

inline VerifiedEntry verified_from_json(const json& j) {
  VerifiedEntry v;
  v.generated = llmgate::generated_from_json(j.at("generated"));
  v.exists = j.at("exists").get<bool>();
  if (!j.at("matched_index_id").is_null()) v.matched_id = j["matched_index_id"].get<std::string>();
  v.verdict = j.value("verdict", json::object());
  v.reference = reference_from_json(j.at("reference"));
  return v;
}

inline ReferenceEntry entry_from_generated(const llmgate::GeneratedReference& g) {
  ReferenceEntry e;
  e.citation_number = g.citation_number;
  e.raw_text = g.raw_text;
  e.title = g.title;
  e.authors = g.authors;
  e.author_count = g.author_count;
  e.year = g.year;
  e.venue = g.venue;
  return e;
}

/// Verifies the generated references whose numbers are in `numbers`.
inline std::map<int, VerifiedEntry> verify_references(const std::vector<llmgate::GeneratedReference>& generated,
                                                      const std::set<int>& numbers, ScholarlyIndex& index,
                                                      const VenueTable& venues, const matcher::Thresholds& thresholds,
                                                      int search_limit) {
  std::map<int, VerifiedEntry> out;
  for (const auto& g : generated) {
    if (!numbers.count(g.citation_number) || out.count(g.citation_number)) continue;
    VerifiedEntry v;
    v.generated = g;
    v.reference = entry_from_generated(g);
    if (text::trim(g.title).empty()) {
      v.verdict = {{"exists", false}, {"note", "no title"}};
    } else {
      const auto cands = matcher::search_candidates(index, g.title, g.authors, g.et_al, search_limit);
      const auto verdict = matcher::decide_existence(cands, thresholds);
      v.verdict = matcher::to_json(verdict);
      if (verdict.exists) {
        v.exists = true;
        v.matched_id = verdict.matched_index_id;
        apply_enrichment(v.reference, enrich_reference(index, *verdict.matched_index_id, venues));
      }
    }
    out.emplace(g.citation_number, std::move(v));
  }
  return out;
}

inline json entries_json(const std::map<int, VerifiedEntry>& entries) {
  json a = json::array();
  for (const auto& [n, v] : entries) a.push_back(to_json(v));
  return a;
}

inline std::map<int, VerifiedEntry> load_entries(const json& verdicts) {
  std::map<int, VerifiedEntry> out;
  for (const auto& e : verdicts.at("entries")) {
    auto v = verified_from_json(e);
    out.emplace(v.generated.citation_number, std::move(v));
  }
  return out;
}

inline std::vector<llmgate::GeneratedReference> load_generated(const json& j) {
  std::vector<llmgate::GeneratedReference> out;
  for (const auto& r : j.at("references")) out.push_back(llmgate::generated_from_json(r));
  return out;
}

inline json thresholds_basis(Context& ctx) {
  const auto& t = ctx.thresholds();
  return {{"title", t.title.str()}, {"author", t.author.str()}, {"search_limit", ctx.config().matcher.search_limit}};
}

inline void verify_one(Context& ctx, const RunId& run, const std::string& pid) {
  const auto& layout = ctx.layout();
  const auto dir = layout.run_paper(run, pid);
  const auto id = run.label() + ":" + pid;
  const auto generated = read_json(dir / "generated.json");
  if (!generated) {
    std::error_code ec;
    fs::remove(dir / "verdicts.json", ec);
    ctx.manifest().count("verify", "missing_generation");
    return;
  }
  const std::string input_hash = hash_of({{"generated", generated->value("input_hash", "")},
                                          {"references", generated->at("references")},
                                          {"thresholds", thresholds_basis(ctx)}});
  if (reusable(ctx, dir / "verdicts.json", input_hash)) {
    ctx.manifest().count("verify", "reused");
    return;
  }
  try {
    const auto prepared = load_prepared(layout, pid);
    const auto entries = verify_references(load_generated(*generated), prepared.paper.intro_reference_numbers,
                                           ctx.index(), ctx.venues(), ctx.thresholds(),
                                           ctx.config().matcher.search_limit);
    std::int64_t existing = 0;
    for (const auto& [n, v] : entries) existing += v.exists;
    write_json(dir / "verdicts.json", {{"input_hash", input_hash}, {"entries", entries_json(entries)}});
    clear_quarantine(dir);
    ctx.manifest().count("verify", "verified", static_cast<std::int64_t>(entries.size()));
    ctx.manifest().count("verify", "existing", existing);
  } catch (const Error& e) {
    auto ex = quarantinable(e, reason::kIndexError);
    if (!ex) throw;
    quarantine(ctx, "verify", id, dir, dir / "verdicts.json", *ex);
  }
}

inline void stage_verify(Context& ctx, const RunSelection& sel = {}) {
  const auto ids = prepared_ids(ctx.layout());
  (void)ctx.thresholds();
  (void)ctx.index();
  std::vector<std::pair<RunId, std::string>> units;
  for (const auto& r : configured_runs(ctx.config(), llmgate::Strategy::Vanilla, sel)) {
    for (const auto& id : ids) units.emplace_back(r, id);
  }
  parallel_for(units.size(), static_cast<std::size_t>(ctx.config().jobs),
               [&](std::size_t i) { verify_one(ctx, units[i].first, units[i].second); });
}

// ---------------------------------------------------------------------------
// iterate

struct IterateOutcome {
  std::map<int, VerifiedEntry> merged;
  std::set<int> requested;
  std::set<int> replaced;
  std::set<int> gaps;
  bool asked = false;
};

/// Asks for replacements of the parent's non-existent references, verifies
/// the answers and merges them. Nothing is sent when every parent reference
/// exists.
inline IterateOutcome iterate_references(llmgate::Provider& provider, const llmgate::SamplingParams& params,
                                         llmgate::GenerationRun& run, const llmgate::Messages& parent_transcript,
                                         const std::map<int, VerifiedEntry>& parent, const std::string& main_text,
                                         ScholarlyIndex& index, const VenueTable& venues,
                                         const matcher::Thresholds& thresholds, int search_limit,
                                         const fs::path& raw_dir) {
  IterateOutcome out;
  for (const auto& [n, v] : parent) {
    if (!v.exists) out.requested.insert(n);
  }
  out.merged = parent;
  const auto messages = llmgate::render_iterative_prompt(parent_transcript, out.requested, main_text);
  if (!messages) return out;
  out.asked = true;
  const auto answer = llmgate::generate(run, *messages, provider, raw_dir / "response.txt");
  if (answer.kind == llmgate::OutcomeKind::Refusal) throw llmgate::RefusalError(answer.detail);
  const auto s = llmgate::structure_references(provider, params, answer.text, venues, llmgate::Strategy::Iterative,
                                               raw_dir / "table");
  const auto fresh = verify_references(s.table.rows, out.requested, index, venues, thresholds, search_limit);
  auto merge = llmgate::merge_iterative(parent, out.requested, fresh);
  out.merged = std::move(merge.merged);
  out.replaced = std::move(merge.replaced);
  out.gaps = std::move(merge.gaps);
  return out;
}

inline void iterate_one(Context& ctx, const RunId& run, const std::string& pid) {
  const auto& layout = ctx.layout();
  const auto& model = ctx.config().model(run.model);
  const auto dir = layout.run_paper(run, pid);
  const auto parent_dir = layout.run_paper(run.parent(), pid);
  const auto id = run.label() + ":" + pid;
  const auto parent = read_json(parent_dir / "verdicts.json");
  const auto transcript = read_json(parent_dir / "transcript.json");
  if (!parent || !transcript) {
    std::error_code ec;
    fs::remove(dir / "verdicts.json", ec);
    ctx.manifest().count("iterate", "missing_parent");
    return;
  }
  const auto main = io::read_file(layout.prepared(pid) / "main_content.txt");
  const std::string input_hash = hash_of({{"parent", parent->value("input_hash", "")},
                                          {"parent_entries", parent->at("entries")},
                                          {"transcript", *transcript},
                                          {"main", io::sha256_hex(main)},
                                          {"thresholds", thresholds_basis(ctx)},
                                          {"run", run.label()},
                                          {"templates", llmgate::templates::hashes()}});
  if (reusable(ctx, dir / "verdicts.json", input_hash)) {
    ctx.manifest().count("iterate", "reused");
    return;
  }
  try {
    auto& provider = ctx.provider(run.model, run_scope(run));
    llmgate::GenerationRun gr{run.model, run.strategy, run.index, model.sampling, {}, run.parent().label()};
    const auto parent_run = llmgate::generation_run_from_json(*transcript);
    const auto out = iterate_references(provider, model.sampling, gr, parent_run.transcript, load_entries(*parent), main,
                                        ctx.index(), ctx.venues(), ctx.thresholds(), ctx.config().matcher.search_limit,
                                        dir);
    if (out.asked) write_json(dir / "transcript.json", llmgate::to_json(gr));
    write_json(dir / "merge.json", {{"requested", out.requested},
                                    {"replaced", out.replaced},
                                    {"gaps", out.gaps},
                                    {"asked", out.asked},
                                    {"parent", run.parent().label()}});
    write_json(dir / "verdicts.json", {{"input_hash", input_hash}, {"entries", entries_json(out.merged)}});
    clear_quarantine(dir);
    ctx.manifest().count("iterate", "merged");
    ctx.manifest().count("iterate", "requested", static_cast<std::int64_t>(out.requested.size()));
    ctx.manifest().count("iterate", "replaced", static_cast<std::int64_t>(out.replaced.size()));
    ctx.manifest().count("iterate", "gaps", static_cast<std::int64_t>(out.gaps.size()));
  } catch (const Error& e) {
    auto ex = quarantinable(e, reason::kLlmFailure);
    if (!ex) throw;
    quarantine(ctx, "iterate", id, dir, dir / "verdicts.json", *ex);
  }
}

inline void stage_iterate(Context& ctx, const RunSelection& sel = {}) {
  const auto ids = prepared_ids(ctx.layout());
  const auto runs = configured_runs(ctx.config(), llmgate::Strategy::Iterative, sel);
  for (const auto& r : runs) (void)ctx.provider(r.model, run_scope(r));
  (void)ctx.thresholds();
  (void)ctx.index();
  std::vector<std::pair<RunId, std::string>> units;
  for (const auto& r : runs) {
    for (const auto& id : ids) units.emplace_back(r, id);
  }
  parallel_for(units.size(), static_cast<std::size_t>(ctx.config().jobs),
               [&](std::size_t i) { iterate_one(ctx, units[i].first, units[i].second); });
}

}  // namespace citeaudit::orchestrator
