#include <gtest/gtest.h>

#include <sys/stat.h>

#include "citeaudit/common/csv.hpp"
#include "orchestrator_support.hpp"

namespace ca = citeaudit;
using namespace citeaudit::orchestrator;
using ca::testing::TempDir;

namespace {

json minimal_config() {
  return json::parse(R"({
    "corpus": {"window": {"first": "2022-07-01", "last": "2023-06-30"}, "category": "cs.LG",
               "keywords": ["ICML"]},
    "sources": {"preprint": {"kind": "directory", "path": "p"}, "scholarly": {"kind": "directory", "path": "s"}},
    "models": [{"id": "m", "provider": "mock", "mock_dir": "mock", "runs": {"vanilla": 2, "iterative": 1}}],
    "matcher": {"thresholds": {"title": "9/43", "author": "3/4"}}
  })");
}

std::map<std::string, std::map<std::string, std::string>> read_csv_table(const fs::path& file) {
  const auto rows = ca::csv::parse(ca::io::read_file(file));
  std::map<std::string, std::map<std::string, std::string>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    for (std::size_t c = 1; c < rows[r].size(); ++c) out[rows[r][0]][rows[0][c]] = rows[r][c];
  }
  return out;
}

StageRequest stages(std::initializer_list<const char*> names) {
  StageRequest r;
  for (const char* n : names) r.stages.insert(n);
  return r;
}

const char* kPaper = "2210.01001";

}  // namespace

TEST(RunIdTest, Label) {
  RunId r{"m", ca::llmgate::Strategy::Iterative, 2};
  EXPECT_EQ(r.label(), "m/iterative/2");
  EXPECT_EQ(r.parent().label(), "m/vanilla/2");
  EXPECT_EQ(r.group(), "m/iterative");
}

TEST(ConfigValidation, AcceptsMinimalDocumentAndFillsDefaults) {
  const auto c = config_from_json(minimal_config(), "/base");
  EXPECT_EQ(c.jobs, 1);
  EXPECT_EQ(c.models.at(0).iterative_runs, 1);
  EXPECT_EQ(c.postprocess_model, "m");
  EXPECT_EQ(c.resolve("mock"), fs::path("/base/mock"));
}

TEST(ConfigValidation, RejectsUnknownKeysAtAnyLevel) {
  auto j = minimal_config();
  j["colour"] = 1;
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
  j = minimal_config();
  j["models"][0]["temprature"] = 0;
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
  j = minimal_config();
  j["corpus"]["window"]["start"] = "2020-01-01";
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
}

TEST(ConfigValidation, IterativeRunsNeedVanillaParents) {
  auto j = minimal_config();
  j["models"][0]["runs"] = {{"vanilla", 1}, {"iterative", 2}};
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
}

TEST(ConfigValidation, ExactlyOneThresholdSource) {
  auto j = minimal_config();
  j["matcher"]["calibration_labels"] = "labels.csv";
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
  j["matcher"].erase("thresholds");
  EXPECT_NO_THROW(config_from_json(j, "."));
  j["matcher"].erase("calibration_labels");
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
}

TEST(ConfigValidation, RejectsBadValues) {
  auto j = minimal_config();
  j["jobs"] = 0;
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
  j = minimal_config();
  j["models"][0]["provider"] = "carrier-pigeon";
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
  j = minimal_config();
  j["models"][0]["id"] = "../escape";
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
  j = minimal_config();
  j["latex"] = {{"toolchain", "word"}};
  EXPECT_THROW(config_from_json(j, "."), ca::ConfigError);
}

TEST(ConfigValidation, RunPipelineMapsConfigErrorsToExitCode) {
  TempDir tmp;
  tmp.write("bad.json", "{not json");
  EXPECT_THROW(load_config(tmp / "bad.json"), ca::ConfigError);
  auto cfg = config_from_json(minimal_config(), tmp.path());
  Overrides ov;
  ov.out_dir = (tmp / "out").string();
  ov.cache_dir = (tmp / "cache").string();
  EXPECT_EQ(run_pipeline(cfg, stages({"bogus"}), ov), kConfigInvalid);
}

TEST(ManifestHash, IgnoresOperationalSettings) {
  Manifest a, b;
  a.config = to_json(config_from_json(minimal_config(), "."));
  auto j = minimal_config();
  j["jobs"] = 8;
  j["out_dir"] = "elsewhere";
  j["cache_dir"] = "/tmp/other";
  j["retry"] = {{"max_attempts", 9}};
  b.config = to_json(config_from_json(j, "."));
  b.started_at = "2030-01-01T00:00:00Z";
  EXPECT_EQ(a.hash(), b.hash());
  j["models"][0]["sampling"] = {{"temperature", 1}};
  b.config = to_json(config_from_json(j, "."));
  EXPECT_NE(a.hash(), b.hash());
  b.config = a.config;
  b.corpus_hash = "x";
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Lockfile, SecondHolderIsRefusedAndStaleLockIsTakenOver) {
  TempDir tmp;
  {
    Lockfile first(tmp / "lock");
    EXPECT_THROW(Lockfile(tmp / "lock"), LockHeldError);
  }
  EXPECT_FALSE(fs::exists(tmp / "lock"));
  // pid far above any pid_max: nobody owns it
  tmp.write("lock", "2147483000\n");
  EXPECT_NO_THROW(Lockfile(tmp / "lock"));
}

TEST(Pipeline, LockedOutputDirectoryGivesExitCode) {
  TempDir tmp;
  const auto staged = ca::testing::stage_e2e(tmp.path());
  const auto ov = ca::testing::scratch_overrides(tmp.path());
  Lockfile held(fs::path(*ov.out_dir) / ".citeaudit.lock");
  EXPECT_EQ(run_pipeline(ca::testing::e2e_config(staged), all_stages(), ov), kLocked);
}

// One full run on the three-paper fixture, shared by the tests below.
class EndToEnd : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new TempDir;
    clock_ = new ca::testing::FixedClock;
    staged_ = ca::testing::stage_e2e(tmp_->path());
    rc_ = run_pipeline(ca::testing::e2e_config(staged_), all_stages(), ca::testing::scratch_overrides(tmp_->path()));
  }
  static void TearDownTestSuite() {
    delete clock_;
    delete tmp_;
  }
  static fs::path out() { return tmp_->path() / "out"; }

  static TempDir* tmp_;
  static ca::testing::FixedClock* clock_;
  static fs::path staged_;
  static int rc_;
};
TempDir* EndToEnd::tmp_ = nullptr;
ca::testing::FixedClock* EndToEnd::clock_ = nullptr;
fs::path EndToEnd::staged_;
int EndToEnd::rc_ = -1;

TEST_F(EndToEnd, CompletesWithEveryStageOk) {
  ASSERT_EQ(rc_, kOk);
  const auto m = require_json(out() / "manifest.json", "");
  for (const char* s : kStageOrder) EXPECT_EQ(m["stages"][s]["status"], "ok") << s;
  EXPECT_TRUE(m["failed_stage"].is_null());
  EXPECT_EQ(m["stages"]["ingest"]["counts"]["papers"], 3);
  EXPECT_FALSE(fs::exists(out() / ".citeaudit.lock"));
  // no mock miss left a prompt behind
  for (const auto& e : fs::directory_iterator(staged_ / "mock")) {
    EXPECT_EQ(e.path().string().find(".prompt.txt"), std::string::npos) << e.path();
  }
}

TEST_F(EndToEnd, IngestRecordsExclusionReasons) {
  const auto m = require_json(out() / "manifest.json", "");
  std::map<std::string, std::string> reasons;
  for (const auto& e : m["stages"]["ingest"]["exclusions"]) reasons[e["id"]] = e["reason"];
  EXPECT_EQ(reasons["2304.04004"], ca::reason::kBlacklisted);
  EXPECT_EQ(reasons["2306.06006"], ca::reason::kNotInIndex);
}

TEST_F(EndToEnd, SummaryMatchesHandCountAndKeepsTheChain) {
  const auto summary = read_csv_table(out() / "reports" / "summary.csv");
  ASSERT_EQ(summary.size(), 5u);
  EXPECT_EQ(summary.at("Existence").at("mock-gpt/vanilla/1"), "66.7");
  EXPECT_EQ(summary.at("Existence").at("mock-gpt/iterative/1"), "83.3");
  EXPECT_EQ(summary.at("Cited in paper").at("mock-gpt/vanilla/1"), "50.0");
  EXPECT_EQ(summary.at("Cited in introduction").at("mock-gpt/vanilla/1"), "41.7");
  EXPECT_EQ(summary.at("PM all").at("mock-gpt/vanilla/1"), "33.3");
  EXPECT_EQ(summary.at("PM unique").at("mock-gpt/vanilla/1"), "50.0");

  const auto rows = ca::csv::parse(ca::io::read_file(out() / "reports" / "summary_counts.csv"));
  std::map<std::string, std::map<std::string, long>> counts;  // run -> metric -> count
  for (std::size_t i = 1; i < rows.size(); ++i) counts[rows[i][1]][rows[i][0]] = std::stol(rows[i][2]);
  ASSERT_EQ(counts.size(), 2u);
  for (const auto& [run, c] : counts) {
    EXPECT_GE(c.at("Existence"), c.at("Cited in paper")) << run;
    EXPECT_GE(c.at("Cited in paper"), c.at("Cited in introduction")) << run;
    EXPECT_GE(c.at("Cited in introduction"), c.at("PM all")) << run;
  }
}

TEST_F(EndToEnd, ReportsCarryTheManifestHash) {
  const auto m = require_json(out() / "manifest.json", "");
  const std::string first = "# manifest " + m["manifest_hash"].get<std::string>();
  for (const auto& e : fs::recursive_directory_iterator(out() / "reports")) {
    if (e.path().extension() != ".csv") continue;
    const auto text = ca::io::read_file(e.path());
    EXPECT_EQ(text.substr(0, first.size()), first) << e.path();
  }
}

TEST_F(EndToEnd, ReportStagesNeedNoProviderOrIndex) {
  auto cfg = ca::testing::e2e_config(staged_);
  Context ctx(cfg, ca::testing::scratch_overrides(tmp_->path()));
  auto provider = std::make_shared<ca::testing::ForbiddenProvider>();
  auto index = std::make_shared<ca::testing::ForbiddenIndex>();
  ctx.set_provider("mock-gpt", provider);
  ctx.set_index(index);
  const auto before = ca::testing::snapshot(out() / "reports");
  EXPECT_EQ(run_stages(ctx, stages({"analyze", "graph", "report"})), kOk);
  EXPECT_EQ(provider->calls, 0);
  EXPECT_EQ(index->calls, 0);
  EXPECT_EQ(ca::testing::snapshot(out() / "reports"), before);
}

TEST_F(EndToEnd, RerunReusesEveryArtifact) {
  auto cfg = ca::testing::e2e_config(staged_);
  Context ctx(cfg, ca::testing::scratch_overrides(tmp_->path()));
  ctx.set_provider("mock-gpt", std::make_shared<ca::testing::ForbiddenProvider>());
  const auto before = ca::testing::snapshot(out());
  EXPECT_EQ(run_stages(ctx, stages({"prepare", "generate", "verify", "iterate"})), kOk);
  const auto m = ctx.manifest().to_json();
  EXPECT_EQ(m["stages"]["generate"]["counts"]["reused"], 3);
  EXPECT_FALSE(m["stages"]["generate"]["counts"].contains("generated"));
  EXPECT_EQ(m["stages"]["iterate"]["counts"]["reused"], 3);
  auto after = ca::testing::snapshot(out());
  auto expected = before;
  after.erase("manifest.json");
  expected.erase("manifest.json");
  EXPECT_EQ(after, expected);
}

TEST_F(EndToEnd, CorruptArtifactIsRecomputedAlone) {
  const auto victim = out() / "runs" / "mock-gpt" / "vanilla" / "1" / kPaper / "generated.json";
  const auto good = ca::io::read_file(victim);
  ca::io::write_file_atomic(victim, "{ truncated");
  auto cfg = ca::testing::e2e_config(staged_);
  Context ctx(cfg, ca::testing::scratch_overrides(tmp_->path()));
  EXPECT_EQ(run_stages(ctx, stages({"generate"})), kOk);
  const auto m = ctx.manifest().to_json();
  EXPECT_EQ(m["stages"]["generate"]["counts"]["generated"], 1);
  EXPECT_EQ(m["stages"]["generate"]["counts"]["reused"], 2);
  EXPECT_EQ(ca::io::read_file(victim), good);
}

TEST(Pipeline, StagesRunInPiecesMatchOneFullRun) {
  ca::testing::FixedClock clock;
  TempDir a, b;
  const auto sa = ca::testing::stage_e2e(a.path());
  const auto sb = ca::testing::stage_e2e(b.path());
  ASSERT_EQ(run_pipeline(ca::testing::e2e_config(sa), all_stages(), ca::testing::scratch_overrides(a.path())), kOk);
  const auto ov = ca::testing::scratch_overrides(b.path());
  const auto cfg = ca::testing::e2e_config(sb);
  ASSERT_EQ(run_pipeline(cfg, stages({"ingest", "prepare", "generate"}), ov), kOk);
  ASSERT_EQ(run_pipeline(cfg, stages({"verify", "iterate", "analyze", "graph", "report"}), ov), kOk);
  EXPECT_EQ(tree_hash(a / "out" / "reports"), tree_hash(b / "out" / "reports"));
  EXPECT_EQ(tree_hash(a / "out" / "runs"), tree_hash(b / "out" / "runs"));
}

TEST(Pipeline, ReportWithoutAnalysisFailsAndRecordsTheStage) {
  TempDir tmp;
  const auto staged = ca::testing::stage_e2e(tmp.path());
  const auto ov = ca::testing::scratch_overrides(tmp.path());
  EXPECT_EQ(run_pipeline(ca::testing::e2e_config(staged), stages({"report"}), ov), kStageFailed);
  const auto m = require_json(tmp / "out" / "manifest.json", "");
  EXPECT_EQ(m["failed_stage"], "report");
  EXPECT_EQ(m["stages"]["report"]["status"], "failed");
  EXPECT_FALSE(m["stages"]["report"]["error"].get<std::string>().empty());
}

TEST(Pipeline, EmptyCorpusGivesHeaderOnlyReports) {
  ca::testing::FixedClock clock;
  TempDir tmp;
  const auto staged = ca::testing::stage_e2e(tmp.path());
  auto cfg = ca::testing::e2e_config(staged);
  cfg.keywords = {"NoSuchVenue"};
  ASSERT_EQ(run_pipeline(cfg, all_stages(), ca::testing::scratch_overrides(tmp.path())), kOk);
  const auto reports = tmp / "out" / "reports";
  for (const char* f : {"summary.csv", "overlap.csv", "graph_metrics.csv", "bias/subperiod.csv"}) {
    const auto rows = ca::csv::parse(ca::io::read_file(reports / f));
    EXPECT_EQ(rows.size(), 1u) << f;
  }
}

namespace {

/// Refuses the vanilla prompt for one paper and forwards everything else.
class RefuseOnePaper : public ca::llmgate::Provider {
 public:
  RefuseOnePaper(fs::path mock, std::string marker) : inner_(std::move(mock)), marker_(std::move(marker)) {}
  std::string name() const override { return "refuse-one"; }
  std::string send(const ca::llmgate::Messages& m, const ca::llmgate::SamplingParams& p) override {
    if (m.size() == 2 && m.back().content.find(marker_) != std::string::npos) {
      throw ca::llmgate::RefusalError("declined");
    }
    return inner_.send(m, p);
  }

 private:
  ca::llmgate::MockProvider inner_;
  std::string marker_;
};

}  // namespace

TEST(Pipeline, RefusalQuarantinesOnePaperAndTheRestContinue) {
  ca::testing::FixedClock clock;
  TempDir tmp;
  const auto staged = ca::testing::stage_e2e(tmp.path());
  const auto ov = ca::testing::scratch_overrides(tmp.path());
  const auto cfg = ca::testing::e2e_config(staged);
  ASSERT_EQ(run_pipeline(cfg, stages({"ingest", "prepare"}), ov), kOk);
  const auto main = ca::io::read_file(tmp / "out" / "prepared" / kPaper / "main_content.txt");

  Context ctx(cfg, ov);
  ctx.set_provider("mock-gpt", std::make_shared<RefuseOnePaper>(staged / "mock", main.substr(0, 200)));
  ASSERT_EQ(run_stages(ctx, stages({"generate", "verify", "iterate", "analyze", "graph", "report"})), kOk);
  const auto q = require_json(tmp / "out" / "runs" / "mock-gpt" / "vanilla" / "1" / kPaper / "quarantine.json", "");
  EXPECT_EQ(q["reason"], ca::reason::kRefusal);
  const auto analysis = require_json(tmp / "out" / "analysis" / "analysis.json", "");
  EXPECT_EQ(analysis["papers"].size(), 2u);
  bool dropped = false;
  for (const auto& d : analysis["dropped"]) dropped |= d.dump().find(kPaper) != std::string::npos;
  EXPECT_TRUE(dropped);
}

TEST(WriteReports, UnwritableDirectoryFailsBeforeAnyWrite) {
  if (::geteuid() == 0) GTEST_SKIP() << "permission bits do not bind root";
  TempDir tmp;
  fs::create_directories(tmp / "reports");
  fs::permissions(tmp / "reports", fs::perms::owner_read | fs::perms::owner_exec);
  EXPECT_THROW(write_reports(tmp / "reports", {{"a.csv", "x\n"}}), ca::IoError);
  fs::permissions(tmp / "reports", fs::perms::owner_all);
  EXPECT_TRUE(fs::is_empty(tmp / "reports"));
}

TEST(WriteReports, PathBlockedByAFileFailsBeforeAnyWrite) {
  TempDir tmp;
  tmp.write("reports", "a file, not a directory");
  EXPECT_THROW(write_reports(tmp / "reports", {{"a.csv", "x\n"}}), ca::IoError);
}

TEST(IterativeMerge, ReplacesOnlyMissingSlotsAndLogsGaps) {
  ca::testing::IterativeMergeFixture fx;
  ca::testing::QueueProvider provider({fx.iterative_answer, fx.iterative_table});
  const auto out = fx.run(provider);
  EXPECT_TRUE(out.asked);
  EXPECT_EQ(out.requested, (std::set<int>{7, 8, 9, 10}));
  EXPECT_EQ(out.replaced, (std::set<int>{7, 8, 9}));
  EXPECT_EQ(out.gaps, (std::set<int>{10}));
  EXPECT_EQ(ca::testing::existence_rate(fx.parent), ca::Ratio(6, 10));
  EXPECT_EQ(ca::testing::existence_rate(out.merged), ca::Ratio(9, 10));
  for (int n = 1; n <= 6; ++n) EXPECT_EQ(to_json(out.merged.at(n)), to_json(fx.parent.at(n))) << n;
  EXPECT_FALSE(out.merged.at(10).exists);
  // the follow-up names exactly the missing numbers
  const auto& follow = provider.seen.at(0).back().content;
  EXPECT_NE(follow.find("[7], [8], [9], [10]"), std::string::npos);
}

TEST(IterativeMerge, NothingIsSentWhenEverythingExists) {
  ca::testing::IterativeMergeFixture fx;
  for (auto& [n, v] : fx.parent) v.exists = true;
  ca::testing::QueueProvider provider({});
  const auto out = fx.run(provider);
  EXPECT_FALSE(out.asked);
  EXPECT_TRUE(provider.seen.empty());
  EXPECT_EQ(ca::testing::existence_rate(out.merged), ca::Ratio(1));
}

TEST(ConfigFiles, ShippedExampleAndAliasTableLoad) {
  const auto cfg = load_config(ca::testing::source_dir() / "config" / "example.json");
  EXPECT_EQ(cfg.models.size(), 2u);
  EXPECT_EQ(cfg.models[0].vanilla_runs, 5);
  const auto venues = ca::VenueTable::load(cfg.resolve(cfg.venue_aliases));
  EXPECT_EQ(venues.to_json(), ca::VenueTable::defaults().to_json());
}
