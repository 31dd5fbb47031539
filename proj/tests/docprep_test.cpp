#include <gtest/gtest.h>

#include <random>
#include <regex>
#include <set>

#include "citeaudit/docprep/citations.hpp"
#include "citeaudit/docprep/prepare.hpp"
#include "citeaudit/docprep/split.hpp"
#include "citeaudit/docprep/tex_source.hpp"
#include "citeaudit/docprep/toolchain.hpp"
#include "test_support.hpp"

using namespace citeaudit;
using namespace citeaudit::docprep;
using citeaudit::testing::TempDir;

namespace {

std::set<int> numbers_of(const std::vector<BracketGroup>& groups, std::size_t i) {
  return groups.at(i).numbers;
}

}  // namespace

TEST(ExtractCitations, SingletonAndRange) {
  const auto groups = extract_citations("as shown in [1] and [4-8]");
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(numbers_of(groups, 0), (std::set<int>{1}));
  EXPECT_EQ(numbers_of(groups, 1), (std::set<int>{4, 5, 6, 7, 8}));
  EXPECT_EQ(groups[1].raw, "[4-8]");
}

TEST(ExtractCitations, NoBrackets) { EXPECT_TRUE(extract_citations("plain text, no cites").empty()); }

TEST(ExtractCitations, DuplicatesCollapse) {
  const auto groups = extract_citations("[2,2,3]");
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].numbers, (std::set<int>{2, 3}));
}

TEST(ExtractCitations, DashVariantsExpand) {
  for (const char* s : {"[4-6]", "[4--6]", "[4\xE2\x80\x93" "6]", "[4\xE2\x80\x94" "6]", "[4 - 6]"}) {
    const auto groups = extract_citations(s);
    ASSERT_EQ(groups.size(), 1u) << s;
    EXPECT_EQ(groups[0].numbers, (std::set<int>{4, 5, 6})) << s;
  }
}

TEST(ExtractCitations, NonNumericGroupsIgnoredWhole) {
  EXPECT_TRUE(extract_citations("[see 4]").empty());
  EXPECT_TRUE(extract_citations("[a]").empty());
  EXPECT_TRUE(extract_citations("[]").empty());
  EXPECT_TRUE(extract_citations("[3, x]").empty());
  EXPECT_TRUE(extract_citations("[8-4]").empty());
  EXPECT_TRUE(extract_citations("[0]").empty());
  EXPECT_TRUE(extract_citations("[?]").empty());
}

TEST(ExtractCitations, ReferenceCountBound) {
  const auto groups = extract_citations("[3] and [11] and [2,12]", 10);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].raw, "[3]");
}

TEST(ExtractCitations, NestedBracketsUseInnermost) {
  const auto groups = extract_citations("[foo [3] bar]");
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].numbers, (std::set<int>{3}));
}

// Property: random bracket expressions expand to the generator's set.
TEST(ExtractCitations, RoundTripAgainstGenerator) {
  std::mt19937 rng(1234);
  const char* dashes[] = {"-", "--", "\xE2\x80\x93", "\xE2\x80\x94"};
  for (int trial = 0; trial < 300; ++trial) {
    std::set<int> expected;
    std::string raw = "[";
    const int tokens = 1 + static_cast<int>(rng() % 4);
    for (int t = 0; t < tokens; ++t) {
      if (t) raw += (rng() % 2) ? "," : ", ";
      const int lo = 1 + static_cast<int>(rng() % 60);
      if (rng() % 3 == 0) {
        const int hi = lo + static_cast<int>(rng() % 6);
        raw += std::to_string(lo) + dashes[rng() % 4] + std::to_string(hi);
        for (int k = lo; k <= hi; ++k) expected.insert(k);
      } else {
        raw += std::to_string(lo);
        expected.insert(lo);
      }
    }
    raw += "]";
    const auto groups = extract_citations("text " + raw + " more");
    ASSERT_EQ(groups.size(), 1u) << raw;
    EXPECT_EQ(groups[0].numbers, expected) << raw;
    EXPECT_EQ(groups[0].raw, raw);
  }
}

TEST(UniquelyIdentifiable, Examples) {
  EXPECT_EQ(uniquely_identifiable_numbers(extract_citations("[1] and [4-8]")), (std::set<int>{1}));
  EXPECT_EQ(uniquely_identifiable_numbers(extract_citations("[3] then [3,7]")), (std::set<int>{3}));
  EXPECT_TRUE(uniquely_identifiable_numbers({}).empty());
}

TEST(SelectIntroReferences, UnionPreservesOrder) {
  std::vector<RawReference> refs;
  for (int i = 1; i <= 10; ++i) refs.push_back({i, "ref " + std::to_string(i)});
  const auto sel = select_intro_references(extract_citations("[1] and [4-8]"), refs);
  std::vector<int> got;
  for (const auto& r : sel.references) got.push_back(r.number);
  EXPECT_EQ(got, (std::vector<int>{1, 4, 5, 6, 7, 8}));
  EXPECT_TRUE(sel.dangling.empty());
}

TEST(SelectIntroReferences, EmptyGroups) {
  std::vector<RawReference> refs{{1, "a"}};
  EXPECT_TRUE(select_intro_references({}, refs).references.empty());
}

TEST(SelectIntroReferences, DanglingCitationWarns) {
  std::vector<RawReference> refs;
  for (int i = 1; i <= 10; ++i) refs.push_back({i, "r"});
  const auto sel = select_intro_references(extract_citations("[2] [11]"), refs);
  ASSERT_EQ(sel.references.size(), 1u);
  EXPECT_EQ(sel.dangling, (std::vector<int>{11}));
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kPaperTex = R"(\documentclass{article}
\usepackage{graphicx}
\title{A Study of Things}
\author{Ada Lovelace \and Alan Turing}
\begin{document}
\maketitle
\begin{abstract}
We study things~\cite{alpha}.
\end{abstract}
\section{Introduction}
Deep learning~\cite{alpha,beta} has changed everything. % a comment
See Section~\ref{sec:method} for details.
\begin{figure}[t]
\centering FIGURE BODY \cite{gamma}
\caption{A figure}
\end{figure}
Transformers~\citep{delta} are popular.
\section{Method}\label{sec:method}
Our method cites \cite{epsilon}.
\bibliographystyle{plain}
\bibliography{refs}
\end{document}
)";

constexpr const char* kBbl = R"(\begin{thebibliography}{10}
\bibitem{zeta} Z. Zed. \newblock Zeta paper. \newblock In {\em Venue}, 2001.
\bibitem{alpha} A. Alpha. \newblock Alpha paper. \newblock 2002.
\bibitem{gamma} G. Gamma. \newblock Gamma paper. \newblock 2003.
\bibitem{delta} D. Delta. \newblock Delta paper. \newblock 2004.
\bibitem{beta} B. Beta and C. Ceta. \newblock Beta paper
  spanning lines. \newblock 2005.
\bibitem{epsilon} E. Eps. \newblock Epsilon paper. \newblock 2006.
\end{thebibliography}
)";

// Independent oracle: \bibitem key order read with a regex.
std::vector<std::string> bbl_order_oracle(const std::string& bbl) {
  std::vector<std::string> keys;
  std::regex item(R"(\\bibitem(?:\[[^\]]*\])?\{([^}]*)\})");
  for (auto it = std::sregex_iterator(bbl.begin(), bbl.end(), item); it != std::sregex_iterator(); ++it) {
    keys.push_back((*it)[1].str());
  }
  return keys;
}

}  // namespace

TEST(LocateMainTex, SingleMain) {
  TempDir dir;
  dir.write("main.tex", kPaperTex);
  dir.write("sec.tex", "Some section text");
  const auto r = locate_main_tex(dir.path());
  ASSERT_TRUE(std::holds_alternative<fs::path>(r));
  EXPECT_EQ(std::get<fs::path>(r).filename(), "main.tex");
}

TEST(LocateMainTex, MultipleMainsExcluded) {
  TempDir dir;
  dir.write("a.tex", kPaperTex);
  dir.write("b.tex", kPaperTex);
  const auto r = locate_main_tex(dir.path());
  ASSERT_TRUE(std::holds_alternative<Exclusion>(r));
  EXPECT_EQ(std::get<Exclusion>(r).reason, reason::kMultipleMains);
}

TEST(LocateMainTex, NoMainExcluded) {
  TempDir dir;
  dir.write("a.tex", "\\section{x}");
  const auto r = locate_main_tex(dir.path());
  ASSERT_TRUE(std::holds_alternative<Exclusion>(r));
  EXPECT_EQ(std::get<Exclusion>(r).reason, reason::kNoMain);
}

TEST(LocateMainTex, CommentedMarkersDoNotCount) {
  TempDir dir;
  dir.write("main.tex", kPaperTex);
  dir.write("old.tex", "% \\begin{document}\n% \\end{document}\n");
  EXPECT_TRUE(std::holds_alternative<fs::path>(locate_main_tex(dir.path())));
}

TEST(LocateMainTex, MissingDirectoryIsIoError) {
  EXPECT_THROW(locate_main_tex("/nonexistent/citeaudit"), IoError);
}

TEST(CleanTex, StripsFiguresOtherSectionsAndRefs) {
  Bibliography bib{Bibliography::Source::Bbl, parse_bibitems(kBbl)};
  const auto cleaned = clean_tex(kPaperTex, bib);
  EXPECT_EQ(cleaned.find("FIGURE BODY"), std::string::npos);
  EXPECT_EQ(cleaned.find("Our method"), std::string::npos);
  EXPECT_EQ(cleaned.find("\\ref"), std::string::npos);
  EXPECT_EQ(cleaned.find("Section~"), std::string::npos);
  EXPECT_EQ(cleaned.find("a comment"), std::string::npos);
  EXPECT_NE(cleaned.find("\\bibliography{refs}"), std::string::npos);
  EXPECT_NE(cleaned.find("\\begin{abstract}"), std::string::npos);
}

TEST(CleanTex, CitationsFollowCompiledBibliographyOrder) {
  const auto order = bbl_order_oracle(kBbl);
  auto number = [&](const std::string& key) {
    return std::to_string(std::find(order.begin(), order.end(), key) - order.begin() + 1);
  };
  Bibliography bib{Bibliography::Source::Bbl, parse_bibitems(kBbl)};
  const auto cleaned = clean_tex(kPaperTex, bib);
  EXPECT_NE(cleaned.find("Deep learning~[" + number("alpha") + "," + number("beta") + "]"),
            std::string::npos)
      << cleaned;
  EXPECT_EQ(number("alpha"), "2");
  EXPECT_EQ(number("beta"), "5");
  EXPECT_NE(cleaned.find("Transformers~[" + number("delta") + "]"), std::string::npos);
  EXPECT_EQ(cleaned.find("\\cite"), std::string::npos);
}

TEST(CleanTex, Idempotent) {
  Bibliography bib{Bibliography::Source::Bbl, parse_bibitems(kBbl)};
  const auto once = clean_tex(kPaperTex, bib);
  EXPECT_EQ(clean_tex(once, bib), once);
}

TEST(CleanTex, UnbalancedEnvironmentReportsLine) {
  const std::string tex = "\\documentclass{article}\n\\begin{document}\n\\begin{abstract}\nx\n"
                          "\\section{Introduction}\ny\n\\end{document}\n";
  try {
    structural_clean(tex);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Bibtex, UnsrtKeepsCitationOrderPlainSorts) {
  const std::string bib = R"(
@inproceedings{b, author = {Zed, Zoe and Young, Yan}, title = {{Second} Cited}, booktitle = {ICML}, year = 2020}
@article{a, author = "Adams, Ann", title = {First Cited}, journal = {Nature}, year = {2019}}
@misc{unused, author = {Nobody}, title = {Never}, year = 2000}
)";
  const auto records = parse_bib(bib);
  ASSERT_EQ(records.size(), 3u);
  const std::vector<std::string> cited = {"b", "a"};
  const auto unsrt = bibtex_emulate(records, cited, "unsrt");
  ASSERT_EQ(unsrt.items.size(), 2u);
  EXPECT_EQ(unsrt.items[0].key, "b");
  EXPECT_EQ(unsrt.items[0].text, "Zoe Zed and Yan Young. Second Cited. In ICML, 2020.");
  const auto plain = bibtex_emulate(records, cited, "plain");
  EXPECT_EQ(plain.items[0].key, "a");
  EXPECT_EQ(plain.items[0].text, "Ann Adams. First Cited. Nature, 2019.");
}

TEST(InternalToolchain, MissingBibliographyIsNoBib) {
  TempDir dir;
  dir.write("main.tex", kPaperTex);
  const auto r = prepare_paper(dir.path(), InternalToolchain());
  ASSERT_TRUE(std::holds_alternative<Exclusion>(r));
  EXPECT_EQ(std::get<Exclusion>(r).reason, reason::kNoBib);
}

TEST(InternalToolchain, UnbalancedBracesAreCompileErrors) {
  TempDir dir;
  std::string tex = kPaperTex;
  tex.replace(tex.find("are popular."), 12, "are {popular.");
  dir.write("main.tex", tex);
  dir.write("main.bbl", kBbl);
  const auto r = prepare_paper(dir.path(), InternalToolchain());
  ASSERT_TRUE(std::holds_alternative<Exclusion>(r));
  EXPECT_EQ(std::get<Exclusion>(r).reason, reason::kCompileError);
}

TEST(PreparePaper, BblFixtureEndToEnd) {
  TempDir dir;
  dir.write("main.tex", kPaperTex);
  dir.write("main.bbl", kBbl);
  const auto r = prepare_paper(dir.path(), InternalToolchain());
  ASSERT_TRUE(std::holds_alternative<PreparedPaper>(r)) << std::get<Exclusion>(r).detail;
  const auto& p = std::get<PreparedPaper>(r);
  EXPECT_EQ(p.bibliography_source, "bbl");
  EXPECT_EQ(p.references.size(), 6u);
  // abstract cites alpha (2); intro cites alpha, beta (2,5) and delta (4)
  std::vector<int> intro;
  for (const auto& ref : p.intro_references) intro.push_back(ref.number);
  EXPECT_EQ(intro, (std::vector<int>{2, 4, 5}));
  EXPECT_EQ(p.uniquely_identifiable, (std::set<int>{2, 4}));
  EXPECT_NE(p.main.text.find("A Study of Things"), std::string::npos);
  EXPECT_NE(p.main.text.find("Ada Lovelace"), std::string::npos);
  EXPECT_EQ(p.main.text.find("Zeta paper"), std::string::npos);
  EXPECT_EQ(p.references[4].text, "B. Beta and C. Ceta. Beta paper spanning lines. 2005.");
  for (const auto& g : p.main.citation_occurrences) {
    EXPECT_NE(p.main.text.find(g.raw), std::string::npos);
  }
}

TEST(PreparePaper, BibFileRenumbersIntroOnly) {
  TempDir dir;
  dir.write("main.tex", kPaperTex);
  dir.write("refs.bib", R"(
@article{alpha, author={Alpha, Al}, title={Alpha}, journal={J}, year=2002}
@article{beta, author={Beta, Bo}, title={Beta}, journal={J}, year=2005}
@article{delta, author={Delta, Di}, title={Delta}, journal={J}, year=2004}
@article{epsilon, author={Eps, Ed}, title={Epsilon}, journal={J}, year=2006}
)");
  const auto r = prepare_paper(dir.path(), InternalToolchain());
  ASSERT_TRUE(std::holds_alternative<PreparedPaper>(r));
  const auto& p = std::get<PreparedPaper>(r);
  EXPECT_EQ(p.bibliography_source, "bib");
  // epsilon is only cited in the dropped Method section
  ASSERT_EQ(p.references.size(), 3u);
  EXPECT_EQ(p.references[0].text, "Al Alpha. Alpha. J, 2002.");
}

TEST(SplitDocument, CountsEntriesAndJoinsLines) {
  std::string text = "Title\n\nIntro text [1] and [2-3].\n\nReferences\n\n";
  for (int i = 1; i <= 12; ++i) {
    text += "[" + std::to_string(i) + "] Author " + std::to_string(i) + ". Title\n";
    if (i == 7) text += "  continued on a second line.\n";
  }
  text += "[8x] not an entry header\n";
  const auto [main, refs] = split_document(text);
  EXPECT_EQ(refs.size(), 12u);
  EXPECT_EQ(refs[6].text, "Author 7. Title continued on a second line.");
  EXPECT_EQ(refs[11].text, "Author 12. Title [8x] not an entry header");
  EXPECT_EQ(main.citation_occurrences.size(), 2u);
  EXPECT_EQ(main.text.find("Author 1."), std::string::npos);
}

TEST(SplitDocument, HyphenatedContinuation) {
  const auto [main, refs] = split_document("x\nReferences\n[1] A. Pre-\ntraining at scale.\n");
  ASSERT_EQ(refs.size(), 1u);
  EXPECT_EQ(refs[0].text, "A. Pre-training at scale.");
}

TEST(SplitDocument, EmptyIntroductionHasNoCitations) {
  const auto [main, refs] = split_document("Title\n1 Introduction\n\nReferences\n[1] A.\n");
  EXPECT_TRUE(main.citation_occurrences.empty());
}

TEST(SplitDocument, MissingHeadingIsStructureError) {
  EXPECT_THROW(split_document("no bibliography here\n[1] x"), StructureError);
}

TEST(ReferenceList, FormatParseRoundTrip) {
  const std::vector<RawReference> refs = {{1, "A. B. Title."}, {4, "C. D. [x] odd."}};
  EXPECT_EQ(parse_reference_list(format_reference_list(refs)), refs);
}
