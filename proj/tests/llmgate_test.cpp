#include <gtest/gtest.h>

#include "citeaudit/llmgate/generation.hpp"
#include "citeaudit/llmgate/prompts.hpp"
#include "citeaudit/llmgate/provider.hpp"
#include "citeaudit/llmgate/table.hpp"
#include "test_support.hpp"

using namespace citeaudit;
using namespace citeaudit::llmgate;
using citeaudit::testing::source_dir;
using citeaudit::testing::TempDir;

namespace {

/// Scripted provider: answers from a queue and counts calls.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::vector<std::string> answers) : answers_(std::move(answers)) {}
  std::string name() const override { return "scripted"; }
  std::string send(const Messages& m, const SamplingParams&) override {
    seen.push_back(m);
    if (next_ >= answers_.size()) throw TransportError("script exhausted");
    return answers_[next_++];
  }
  std::vector<Messages> seen;

 private:
  std::vector<std::string> answers_;
  std::size_t next_ = 0;
};

const VenueTable& venues() {
  static const VenueTable t = VenueTable::defaults();
  return t;
}

}  // namespace

TEST(Templates, EmbeddedTextMatchesShippedFiles) {
  for (const auto& t : templates::kAll) {
    const auto file = source_dir() / "templates" / (std::string(t.name) + ".v1.txt");
    EXPECT_EQ(io::read_file(file), t.text) << file;
  }
}

TEST(VanillaPrompt, SystemMessageAndSeparator) {
  const std::string content = "Title\nAbstract ... as shown in [1].";
  const auto m = render_vanilla_prompt(content);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].role, "system");
  EXPECT_EQ(m[0].content, "You are a helpful assistant");
  EXPECT_EQ(m[1].role, "user");
  const auto sep = m[1].content.rfind("===\n");
  ASSERT_NE(sep, std::string::npos);
  EXPECT_EQ(m[1].content.substr(sep + 4), content);
  // Template minus content equals the stored canonical template.
  EXPECT_EQ(m[1].content.substr(0, m[1].content.size() - content.size()),
            io::read_file(source_dir() / "templates/vanilla.v1.txt"));
  EXPECT_THROW(render_vanilla_prompt(" \n"), PreconditionError);
}

TEST(PostprocessPrompt, CarriesEveryReferenceLine) {
  const std::string refs = "[1] A. Paper one.\n[2] B. Paper two.\n[3] C. Paper three.";
  const auto m = render_postprocess_prompt(refs);
  for (const char* line : {"[1] A. Paper one.", "[2] B. Paper two.", "[3] C. Paper three."}) {
    EXPECT_NE(m[1].content.find(line), std::string::npos);
  }
  EXPECT_EQ(m[1].content.substr(0, m[1].content.size() - refs.size()),
            io::read_file(source_dir() / "templates/postprocess.v1.txt"));
  EXPECT_THROW(render_postprocess_prompt(""), PreconditionError);
}

TEST(IterativePrompt, NumbersSlotAndParentPrefix) {
  Messages parent = render_vanilla_prompt("content [3] and [7]");
  parent.push_back({"assistant", "[3] X\n[7] Y"});
  const auto m = render_iterative_prompt(parent, {7, 3}, "content [3] and [7]");
  ASSERT_TRUE(m);
  ASSERT_EQ(m->size(), 4u);
  EXPECT_TRUE(std::equal(parent.begin(), parent.end(), m->begin()));
  EXPECT_NE(m->back().content.find("numbers:\n[3], [7]\ndo not exist"), std::string::npos);
  EXPECT_TRUE(m->back().content.ends_with("===\ncontent [3] and [7]"));
  EXPECT_FALSE(render_iterative_prompt(parent, {}, "content"));
  EXPECT_THROW(render_iterative_prompt({parent[0]}, {1}, "c"), PreconditionError);
}

TEST(PromptHash, StableAndContentSensitive) {
  const auto a = render_vanilla_prompt("x");
  EXPECT_EQ(prompt_hash(a), prompt_hash(render_vanilla_prompt("x")));
  EXPECT_NE(prompt_hash(a), prompt_hash(render_vanilla_prompt("y")));
  EXPECT_EQ(prompt_hash(a).size(), 64u);
}

TEST(MockProvider, ReturnsCannedResponseByHash) {
  TempDir dir;
  const auto m = render_vanilla_prompt("content");
  dir.write(prompt_hash(m) + ".txt", "[1] Canned.");
  MockProvider mock(dir.path());
  EXPECT_EQ(mock.send(m, {}), "[1] Canned.");
  EXPECT_EQ(mock.send(m, {}), "[1] Canned.");
}

TEST(MockProvider, MissWritesPromptHelper) {
  TempDir dir;
  MockProvider mock(dir.path());
  const auto m = render_vanilla_prompt("unseen");
  EXPECT_THROW(mock.send(m, {}), MockMissError);
  EXPECT_TRUE(std::filesystem::exists(dir / (prompt_hash(m) + ".prompt.txt")));
}

TEST(Generate, PersistsRawResponseAndTranscript) {
  TempDir dir;
  ScriptedProvider p({"[1] Some reference."});
  GenerationRun run{"mock-model", Strategy::Vanilla, 1, nlohmann::json::object(), {}, std::nullopt};
  const auto m = render_vanilla_prompt("c [1]");
  const auto out = generate(run, m, p, dir / "raw/vanilla.txt");
  EXPECT_EQ(out.kind, OutcomeKind::Ok);
  EXPECT_EQ(io::read_file(dir / "raw/vanilla.txt"), "[1] Some reference.");
  ASSERT_EQ(run.transcript.size(), 3u);
  EXPECT_EQ(run.transcript.back().content, "[1] Some reference.");
  EXPECT_THROW(generate(run, {}, p, dir / "x"), PreconditionError);
}

TEST(Generate, EmptyAnswerIsRefusal) {
  TempDir dir;
  ScriptedProvider p({"   \n"});
  GenerationRun run;
  const auto out = generate(run, render_vanilla_prompt("c"), p, dir / "raw.txt");
  EXPECT_EQ(out.kind, OutcomeKind::Refusal);
  EXPECT_TRUE(std::filesystem::exists(dir / "raw.txt"));
}

TEST(Generate, ProviderRefusalIsRecorded) {
  TempDir dir;
  const auto m = render_vanilla_prompt("c");
  dir.write("mock/" + prompt_hash(m) + ".txt", "!refusal\n");
  MockProvider mock(dir / "mock");
  GenerationRun run;
  EXPECT_EQ(generate(run, m, mock, dir / "raw.txt").kind, OutcomeKind::Refusal);
}

TEST(RecordReplay, RecordedStoreReplaysByteForByte) {
  TempDir dir;
  auto live = std::make_shared<ScriptedProvider>(std::vector<std::string>{"[1] A.\n", "| # | Title |\n|---|---|\n| 1 | A |\n"});
  RecordingProvider rec(live, dir / "store");
  const auto m1 = render_vanilla_prompt("c [1]");
  const auto r1 = rec.send(m1, {});
  const auto m2 = render_postprocess_prompt(r1);
  const auto r2 = rec.send(m2, {});
  MockProvider replay(dir / "store");
  EXPECT_EQ(replay.send(m1, {}), r1);
  EXPECT_EQ(replay.send(m2, {}), r2);
}

TEST(ReferenceTable, WellFormedTwoRows) {
  const std::string md =
      "Here is the table:\n\n"
      "| Citation Number | Authors | Number of Authors | Title | Publication Year | Publication Venue |\n"
      "|---|---|---|---|---|---|\n"
      "| 1 | Ashish Vaswani, Noam Shazeer, Niki Parmar | 3 | Attention Is All You Need | 2017 | NeurIPS |\n"
      "| 2 | Kaiming He; Xiangyu Zhang | 2 | Deep Residual Learning for Image Recognition | 2016 | CVPR |\n";
  const auto t = parse_reference_table(md, venues());
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].citation_number, 1);
  EXPECT_EQ(t.rows[0].authors, (std::vector<std::string>{"Ashish Vaswani", "Noam Shazeer", "Niki Parmar"}));
  EXPECT_EQ(t.rows[0].author_count, 3);
  EXPECT_EQ(t.rows[0].year, 2017);
  EXPECT_EQ(t.rows[0].venue.canonical, CanonicalVenue::NeurIPS);
  EXPECT_EQ(t.rows[1].authors.size(), 2u);
  EXPECT_EQ(t.rows[1].venue.canonical, CanonicalVenue::Others);
  EXPECT_TRUE(t.quarantined.empty());
}

TEST(ReferenceTable, TrailingEllipsisRowSkipped) {
  const std::string md =
      "| Number | Authors | Number of authors | Title | Year | Venue |\n"
      "|:--|:--|:--|:--|:--|:--|\n"
      "| 1 | A. Author | 1 | First | 2020 | ICML |\n"
      "| 2 | B. Author | 1 | Second | 2021 | ICLR |\n"
      "| ... | ... | ... | ... | ... | ... |\n";
  const auto t = parse_reference_table(md, venues());
  ASSERT_EQ(t.rows.size(), 2u);
  ASSERT_EQ(t.anomalies.size(), 1u);
  EXPECT_NE(t.anomalies[0].find("..."), std::string::npos);
}

TEST(ReferenceTable, AdversarialRows) {
  const std::string md =
      "| # | Authors | No. of Authors | Title | Year | Venue |\n"
      "|---|---|---|---|---|---|\n"
      "| [3] | Smith, J., Doe, A. B. | 2 | Undated Work | n.d. | arXiv preprint |\n"
      "| 4 | Y. LeCun et al. | - | Deep Learning | 2015 | Nature |\n"
      "| 5–7 | Someone | 1 | Survey Chapter | 2019 | AAAI |\n"
      "| see above | X | 1 | Orphan | 2020 | ICML |\n"
      "| 8 | **Bold Author** and Other Person | 2 | *Emphasised* | 2018 | Proc. of ICLR |\n";
  const auto t = parse_reference_table(md, venues());
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.rows[0].citation_number, 3);
  EXPECT_FALSE(t.rows[0].year.has_value());
  EXPECT_EQ(t.rows[0].authors, (std::vector<std::string>{"J. Smith", "A. B. Doe"}));
  EXPECT_EQ(t.rows[0].venue.canonical, CanonicalVenue::arXiv);
  EXPECT_EQ(t.rows[1].authors, (std::vector<std::string>{"Y. LeCun"}));
  EXPECT_TRUE(t.rows[1].et_al);
  EXPECT_FALSE(t.rows[1].author_count.has_value());
  EXPECT_EQ(t.rows[1].venue.canonical, CanonicalVenue::Nature);
  for (int i = 2; i < 5; ++i) {
    EXPECT_TRUE(t.rows[i].range_derived);
    EXPECT_EQ(t.rows[i].title, "Survey Chapter");
  }
  EXPECT_EQ(t.rows[4].citation_number, 7);
  EXPECT_EQ(t.rows[5].title, "Emphasised");
  EXPECT_EQ(t.rows[5].authors, (std::vector<std::string>{"Bold Author", "Other Person"}));
  EXPECT_EQ(t.rows[5].venue.canonical, CanonicalVenue::ICLR);
  ASSERT_EQ(t.quarantined.size(), 1u);
  EXPECT_NE(t.quarantined[0].raw.find("Orphan"), std::string::npos);
}

TEST(ReferenceTable, NoTableIsParseError) {
  EXPECT_THROW(parse_reference_table("[1] Just a list, no table.", venues()), ParseError);
}

TEST(StructureReferences, OneReaskThenSuccess) {
  TempDir dir;
  ScriptedProvider p({"Sorry, here are the refs: ...", "| n | Title |\n|---|---|\n| 1 | T |\n"});
  const auto r = structure_references(p, {}, "[1] T.", venues(), Strategy::Vanilla, dir / "pp");
  EXPECT_TRUE(r.reasked);
  ASSERT_EQ(r.table.rows.size(), 1u);
  ASSERT_EQ(p.seen.size(), 2u);
  EXPECT_EQ(p.seen[1].back().content, templates::kReask);
  EXPECT_TRUE(std::filesystem::exists(dir / "pp.md"));
  EXPECT_TRUE(std::filesystem::exists(dir / "pp.reask.md"));
}

TEST(StructureReferences, SecondFailureIsHard) {
  TempDir dir;
  ScriptedProvider p({"no table", "still no table"});
  EXPECT_THROW(structure_references(p, {}, "[1] T.", venues(), Strategy::Vanilla, dir / "pp"), ParseError);
  EXPECT_EQ(p.seen.size(), 2u);
}

TEST(MergeIterative, DisjointMerge) {
  const std::map<int, std::string> parent = {{1, "p1"}, {2, "p2"}, {3, "p3"}};
  const auto r = merge_iterative(parent, {3}, std::map<int, std::string>{{3, "i3"}});
  EXPECT_EQ(r.merged, (std::map<int, std::string>{{1, "p1"}, {2, "p2"}, {3, "i3"}}));
  EXPECT_TRUE(r.gaps.empty());
}

TEST(MergeIterative, ParentExistingWins) {
  const std::map<int, std::string> parent = {{1, "p1"}, {2, "p2"}};
  const auto r = merge_iterative(parent, {2}, std::map<int, std::string>{{1, "i1"}, {2, "i2"}});
  EXPECT_EQ(r.merged.at(1), "p1");
  EXPECT_EQ(r.merged.at(2), "i2");
}

TEST(MergeIterative, OmittedNumberIsGap) {
  const std::map<int, std::string> parent = {{4, "p4"}, {5, "p5"}};
  const auto r = merge_iterative(parent, {4, 5}, std::map<int, std::string>{{4, "i4"}});
  EXPECT_EQ(r.merged.at(5), "p5");
  EXPECT_EQ(r.gaps, (std::set<int>{5}));
  EXPECT_EQ(r.replaced, (std::set<int>{4}));
}

TEST(GenerationRun, JsonRoundTrip) {
  GenerationRun run{"m", Strategy::Iterative, 2, {{"temperature", 0.5}}, render_vanilla_prompt("c"), "m/vanilla/2"};
  const auto back = generation_run_from_json(to_json(run));
  EXPECT_EQ(back.transcript, run.transcript);
  EXPECT_EQ(back.parent, run.parent);
  EXPECT_EQ(back.strategy, Strategy::Iterative);
}
