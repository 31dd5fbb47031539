#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "citeaudit/corpus/corpus.hpp"
#include "citeaudit/corpus/http_clients.hpp"
#include "test_support.hpp"

using namespace citeaudit;
using citeaudit::testing::fixtures_dir;
using citeaudit::testing::TempDir;

namespace {

DateRange paper_window() { return {Date::parse("2022-03-01"), Date::parse("2023-10-31")}; }

CandidateStub stub(std::string id, std::string journal_ref) {
  CandidateStub s;
  s.preprint_id = std::move(id);
  s.title = "t";
  s.posted_date = Date::parse("2022-05-05");
  s.journal_ref = std::move(journal_ref);
  return s;
}

/// Local stand-in for a JSON index server on an ephemeral port.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& prefix = "") const {
    return "http://127.0.0.1:" + std::to_string(port_) + prefix;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RetryPolicy fast_retry() { return {3, std::chrono::milliseconds(1), 2.0}; }

}  // namespace

TEST(Harvest, KeywordMatchesInPostedOrder) {
  DirectoryPreprintIndex index(fixtures_dir() / "preprints");
  const auto stubs = harvest_candidates(index, paper_window(), "cs.LG", {"AAAI", "NeurIPS", "ICLR", "ICML"});
  // Brute-force scan of the fixture: cs.LG, in window, journal ref naming a venue.
  ASSERT_EQ(stubs.size(), 3u);
  EXPECT_EQ(stubs[0].preprint_id, "2203.00004");
  EXPECT_EQ(stubs[1].preprint_id, "2203.00001");
  EXPECT_EQ(stubs[2].preprint_id, "2204.00002");
}

TEST(Harvest, TwoKeywordMatches) {
  DirectoryPreprintIndex index(fixtures_dir() / "preprints");
  const auto stubs = harvest_candidates(index, paper_window(), "cs.LG", {"neurips", "aaai"});
  ASSERT_EQ(stubs.size(), 2u);
  EXPECT_EQ(stubs[0].preprint_id, "2203.00004");
  EXPECT_EQ(stubs[1].preprint_id, "2203.00001");
}

TEST(Harvest, EmptyWindowIsEmpty) {
  DirectoryPreprintIndex index(fixtures_dir() / "preprints");
  const DateRange empty{Date::parse("2023-01-02"), Date::parse("2023-01-01")};
  EXPECT_TRUE(harvest_candidates(index, empty, "cs.LG", {"AAAI"}).empty());
  EXPECT_THROW(harvest_candidates(index, paper_window(), "", {"AAAI"}), PreconditionError);
}

TEST(Harvest, MalformedRecordIsNamed) {
  TempDir dir;
  dir.write("preprints.json", R"([{"preprint_id": "2301.1", "title": "x", "posted_date": "soon"}])");
  DirectoryPreprintIndex index(dir.path());
  try {
    index.query("cs.LG", paper_window());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("2301.1"), std::string::npos);
  }
}

TEST(Filter, BlacklistIsCaseInsensitive) {
  const auto kept = filter_candidates({stub("a", "NeurIPS 2023 Workshop on X"), stub("b", "ICML 2023")},
                                      default_blacklist());
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].preprint_id, "b");
}

TEST(Filter, EmptyBlacklistKeepsAll) {
  const std::vector<CandidateStub> in = {stub("a", "Workshop"), stub("b", "2021")};
  EXPECT_EQ(filter_candidates(in, {}), in);
}

TEST(Filter, TenStubsThreeFrom2021) {
  std::vector<CandidateStub> in;
  for (int i = 0; i < 10; ++i) {
    in.push_back(stub(std::to_string(i), i % 3 == 0 && i < 9 ? "AAAI 2021" : "AAAI 2023"));
  }
  EXPECT_EQ(filter_candidates(in, {"2021"}).size(), 7u);
}

TEST(Resolve, ExactTitleHit) {
  DirectoryScholarlyIndex index(fixtures_dir() / "index");
  auto s = stub("2203.00001", "NeurIPS 2022");
  s.title = "attention is all you need.";
  const auto res = resolve_paper(index, s, VenueTable::defaults());
  ASSERT_TRUE(std::holds_alternative<PaperRecord>(res));
  const auto& p = std::get<PaperRecord>(res);
  EXPECT_EQ(p.index_id, "att001");
  // The unindexed fourth reference has no id and is not part of the list.
  EXPECT_EQ(p.reference_ids, (std::vector<std::string>{"lstm01", "seq001", "nmt001"}));
  EXPECT_EQ(p.venue.canonical, CanonicalVenue::NeurIPS);
  EXPECT_EQ(p.year, 2017);
}

TEST(Resolve, AbsentTitleIsNotFound) {
  DirectoryScholarlyIndex index(fixtures_dir() / "index");
  auto s = stub("x", "AAAI");
  s.title = "Quantum Origami for Hyperbolic Pastry";
  const auto res = resolve_paper(index, s, VenueTable::defaults());
  ASSERT_TRUE(std::holds_alternative<Exclusion>(res));
  EXPECT_EQ(std::get<Exclusion>(res).reason, reason::kNotInIndex);
}

TEST(Resolve, DuplicateTitlesAreAmbiguous) {
  DirectoryScholarlyIndex index(fixtures_dir() / "index");
  auto s = stub("x", "AAAI");
  s.title = "Deep Sets Revisited";
  try {
    resolve_paper(index, s, VenueTable::defaults());
    FAIL() << "expected AmbiguityError";
  } catch (const AmbiguityError& e) {
    EXPECT_EQ(e.candidates(), (std::vector<std::string>{"dup001", "dup002"}));
  }
}

TEST(Enrich, OutgoingReferencesFromFixture) {
  DirectoryScholarlyIndex index(fixtures_dir() / "index");
  const auto e = enrich_reference(index, "att001", VenueTable::defaults());
  EXPECT_EQ(e.outgoing_reference_ids.size(), 3u);
  EXPECT_EQ(e.citation_count, 98000);
  EXPECT_EQ(e.influential_citation_count, 12000);
  EXPECT_EQ(e.author_count, 3);
}

TEST(Enrich, ZeroCitationsStayZero) {
  DirectoryScholarlyIndex index(fixtures_dir() / "index");
  const auto e = enrich_reference(index, "zero01", VenueTable::defaults());
  ASSERT_TRUE(e.citation_count.has_value());
  EXPECT_EQ(*e.citation_count, 0);
  EXPECT_EQ(e.venue.canonical, CanonicalVenue::arXiv);
  EXPECT_THROW(enrich_reference(index, "missing", VenueTable::defaults()), NotFoundError);
}

TEST(Enrich, SecondCallServedFromCache) {
  TempDir cache_dir;
  auto inner = std::make_shared<DirectoryScholarlyIndex>(fixtures_dir() / "index");
  CachedScholarlyIndex cached(inner, DiskCache(cache_dir.path()));
  enrich_reference(cached, "seq001", VenueTable::defaults());
  EXPECT_EQ(inner->calls(), 1);
  const auto again = enrich_reference(cached, "seq001", VenueTable::defaults());
  EXPECT_EQ(inner->calls(), 1);
  EXPECT_EQ(again.outgoing_reference_ids, (std::vector<std::string>{"lstm01"}));
  EXPECT_TRUE(std::filesystem::exists(cache_dir / "scholarly/seq001.json"));

  // Not-found answers are cached as markers.
  EXPECT_FALSE(cached.fetch("nope").has_value());
  EXPECT_FALSE(cached.fetch("nope").has_value());
  EXPECT_EQ(inner->calls(), 2);
}

TEST(Cache, CorruptEntryIsRecomputed) {
  TempDir cache_dir;
  auto inner = std::make_shared<DirectoryScholarlyIndex>(fixtures_dir() / "index");
  CachedScholarlyIndex cached(inner, DiskCache(cache_dir.path()));
  cached.fetch("lstm01");
  cached.fetch("seq001");
  io::write_file_atomic(cache_dir / "scholarly/lstm01.json", "{ truncated");
  EXPECT_EQ(cached.fetch("lstm01")->title, "Long Short-Term Memory");
  cached.fetch("seq001");
  EXPECT_EQ(inner->calls(), 3);
}

TEST(Cache, RefreshBypassesEntries) {
  TempDir cache_dir;
  auto inner = std::make_shared<DirectoryScholarlyIndex>(fixtures_dir() / "index");
  CachedScholarlyIndex warm(inner, DiskCache(cache_dir.path()));
  warm.fetch("lstm01");
  CachedScholarlyIndex refreshing(inner, DiskCache(cache_dir.path(), /*refresh=*/true));
  refreshing.fetch("lstm01");
  EXPECT_EQ(inner->calls(), 2);
}

TEST(Cache, UnsafeIdsAreHashed) {
  DiskCache cache("/c");
  EXPECT_EQ(cache.path_for("s", "abc-1.2").filename(), "abc-1.2.json");
  EXPECT_EQ(cache.path_for("s", "../etc/passwd").filename().string().size(), 64u + 5u);
}

TEST(SemanticScholar, SearchFetchAndNotFound) {
  LocalServer srv;
  srv.server().Get("/graph/v1/paper/search", [](const httplib::Request& req, httplib::Response& res) {
    EXPECT_EQ(req.get_param_value("query"), "attention");
    EXPECT_EQ(req.get_param_value("limit"), "3");
    res.set_content(R"({"total": 1, "data": [{"paperId": "att001", "title": "Attention Is All You Need",
      "year": 2017, "authors": [{"name": "Ashish Vaswani"}], "citationCount": 5}]})",
                    "application/json");
  });
  srv.server().Get(R"(/graph/v1/paper/(\w+))", [](const httplib::Request& req, httplib::Response& res) {
    if (req.matches[1] != "att001") {
      res.status = 404;
      return;
    }
    res.set_content(R"({"paperId": "att001", "title": "Attention Is All You Need",
      "references": [{"paperId": "r1", "title": "R1"}, {"paperId": null, "title": "R2"}],
      "citationCount": 0, "influentialCitationCount": null})",
                    "application/json");
  });
  SemanticScholarClient client(srv.url("/graph/v1"), nullptr, fast_retry());
  const auto hits = client.search("attention", 3);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].authors, (std::vector<std::string>{"Ashish Vaswani"}));
  const auto rec = client.fetch("att001");
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->reference_ids, (std::vector<std::string>{"r1"}));
  EXPECT_EQ(rec->citation_count, 0);
  EXPECT_FALSE(rec->influential_citation_count.has_value());
  EXPECT_FALSE(client.fetch("missing").has_value());
}

TEST(SemanticScholar, RateLimitRetriesThenSucceeds) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Get(R"(/paper/(\w+))", [&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 3) {
      res.status = 429;
      return;
    }
    res.set_content(R"({"paperId": "x1", "title": "X"})", "application/json");
  });
  SemanticScholarClient client(srv.url(), std::make_shared<RateLimiter>(1000.0, 5.0), fast_retry());
  EXPECT_EQ(client.fetch("x1")->title, "X");
  EXPECT_EQ(hits.load(), 3);
}

TEST(SemanticScholar, PersistentRateLimitIsHardError) {
  LocalServer srv;
  srv.server().Get(R"(/paper/(\w+))", [](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  SemanticScholarClient client(srv.url(), nullptr, fast_retry());
  try {
    client.fetch("x1");
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_TRUE(e.rate_limited());
  }
}

TEST(SemanticScholar, MalformedResponseIsParseError) {
  LocalServer srv;
  srv.server().Get("/paper/search", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>oops</html>", "text/html");
  });
  SemanticScholarClient client(srv.url(), nullptr, fast_retry());
  EXPECT_THROW(client.search("q", 3), ParseError);
}

TEST(Arxiv, AtomFeedParsing) {
  const std::string feed = R"(<?xml version="1.0"?><feed xmlns="http://www.w3.org/2005/Atom">
<entry><id>http://arxiv.org/abs/2303.01234v2</id><published>2023-03-02T17:00:00Z</published>
<title>A Title
  Across Lines &amp; More</title><arxiv:journal_ref>NeurIPS 2023</arxiv:journal_ref>
<link title="doi" href="x"/><arxiv:primary_category term="cs.LG" scheme="s"/></entry>
<entry><id>http://arxiv.org/abs/2303.09999v1</id><published>2023-03-05T00:00:00Z</published>
<title>Other</title><arxiv:primary_category term="cs.LG"/></entry></feed>)";
  const auto stubs = parse_arxiv_feed(feed);
  ASSERT_EQ(stubs.size(), 2u);
  EXPECT_EQ(stubs[0].preprint_id, "2303.01234");
  EXPECT_EQ(stubs[0].title, "A Title Across Lines & More");
  EXPECT_EQ(stubs[0].journal_ref, "NeurIPS 2023");
  EXPECT_EQ(stubs[0].category, "cs.LG");
  EXPECT_EQ(stubs[0].posted_date, Date::parse("2023-03-02"));
  EXPECT_EQ(stubs[1].journal_ref, "");
  EXPECT_THROW(parse_arxiv_feed("<entry><title>x</title></entry>"), ParseError);
}

TEST(Arxiv, QueryPagesThroughServer) {
  LocalServer srv;
  srv.server().Get("/api/query", [](const httplib::Request& req, httplib::Response& res) {
    const int start = std::stoi(req.get_param_value("start"));
    EXPECT_NE(req.get_param_value("search_query").find("cat:cs.LG"), std::string::npos);
    std::string body = "<feed>";
    const int n = start == 0 ? 2 : 1;
    for (int i = 0; i < n; ++i) {
      body += "<entry><id>http://arxiv.org/abs/2301.0000" + std::to_string(start + i) +
              "v1</id><published>2023-01-0" + std::to_string(start + i + 1) +
              "T00:00:00Z</published><title>T</title><arxiv:journal_ref>ICML 2023</arxiv:journal_ref></entry>";
    }
    res.set_content(body + "</feed>", "application/atom+xml");
  });
  ArxivClient client(srv.url("/api"), srv.url("/e-print"), nullptr, fast_retry(), 2);
  const auto stubs = client.query("cs.LG", {Date::parse("2023-01-01"), Date::parse("2023-01-31")});
  ASSERT_EQ(stubs.size(), 3u);
  EXPECT_EQ(stubs[2].preprint_id, "2301.00002");
}

TEST(PreprintIndex, FetchSourceCopiesBundle) {
  DirectoryPreprintIndex index(fixtures_dir() / "preprints");
  TempDir dest;
  EXPECT_TRUE(index.fetch_source("2203.00001", dest / "src"));
  EXPECT_TRUE(std::filesystem::exists(dest / "src/main.tex"));
  EXPECT_FALSE(index.fetch_source("9999.99999", dest / "none"));
}

TEST(Corpus, HarvestAndResolveAreIdempotent) {
  auto run = [] {
    DirectoryPreprintIndex pre(fixtures_dir() / "preprints");
    DirectoryScholarlyIndex sch(fixtures_dir() / "index");
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : filter_candidates(harvest_candidates(pre, paper_window(), "cs.LG", {"AAAI", "NeurIPS"}),
                                           default_blacklist())) {
      const auto r = resolve_paper(sch, s, VenueTable::defaults());
      out.push_back(std::holds_alternative<PaperRecord>(r) ? to_json(std::get<PaperRecord>(r))
                                                           : to_json(std::get<Exclusion>(r)));
    }
    return out.dump(2);
  };
  EXPECT_EQ(run(), run());
}
