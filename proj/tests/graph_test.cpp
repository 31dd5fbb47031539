#include <gtest/gtest.h>

#include "citeaudit/graph/graph.hpp"
#include "graph_support.hpp"

using namespace citeaudit;
using namespace citeaudit::graph;
using citeaudit::testing::central_graph_case;
using citeaudit::testing::GraphCase;
using citeaudit::testing::MatrixGraph;
using citeaudit::testing::random_graph_case;

namespace {

CitationGraph from_edges(const std::vector<std::pair<std::string, std::string>>& edges) {
  CitationGraph g;
  g.focal = "F";
  g.nodes.insert("F");
  for (const auto& [a, b] : edges) {
    g.nodes.insert(a);
    g.nodes.insert(b);
    g.edges.insert({a, b});
  }
  return g;
}

}  // namespace

TEST(CentralGraph, DensityTwoThirdsExpansionSevenThirds) {
  const auto c = central_graph_case();
  const auto g = c.build();
  const auto tags = categorize(g, c.focal);
  EXPECT_EQ(with_category(tags, NodeCategory::GenLinked), (std::set<std::string>{"L1", "L2", "L3"}));
  EXPECT_EQ(tags.at("X"), NodeCategory::GenIsolated);
  EXPECT_EQ(*boolean_edge_density(g, tags), Ratio(2, 3));
  EXPECT_EQ(*edge_expansion(g, tags), Ratio(7, 3));
}

TEST(BuildGraph, StarWhenNothingGenerated) {
  GraphCase c;
  c.focal.index_id = "F";
  c.intro = {"a", "b", "c"};
  c.adjacency = {{"a", std::vector<std::string>{"b"}}};
  const auto g = c.build();
  EXPECT_EQ(g.edges, (std::set<std::pair<std::string, std::string>>{{"F", "a"}, {"F", "b"}, {"F", "c"}, {"a", "b"}}));
  EXPECT_EQ(g.unknown_adjacency, 2);
}

TEST(BuildGraph, GenerationEqualToGroundTruthIsOneNode) {
  GraphCase c;
  c.focal.index_id = "F";
  c.focal.reference_ids = {"a"};
  c.intro = {"a"};
  c.generated = {"a", "a"};
  const auto g = c.build();
  EXPECT_EQ(g.nodes.size(), 2u);
  const auto tags = categorize(g, c.focal);
  EXPECT_EQ(tags.at("a"), NodeCategory::GenInIntro);
  EXPECT_TRUE(with_category(tags, NodeCategory::GroundTruthUncited).empty());
}

TEST(BuildGraph, EdgesAreFilteredAdjacency) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_graph_case(rng);
    const auto g = c.build();
    std::set<std::pair<std::string, std::string>> want;
    for (const auto& id : c.intro) want.insert({"F", id});
    for (const auto& [id, out] : c.adjacency) {
      if (!out) continue;
      for (const auto& t : *out) {
        if (t != id && t != "F" && g.nodes.count(t)) want.insert({id, t});
      }
    }
    ASSERT_EQ(g.edges, want);
  }
}

TEST(Categorize, PrecedenceIntroOverPaperOverLinked) {
  GraphCase c;
  c.focal.index_id = "F";
  c.focal.reference_ids = {"g", "p"};
  c.intro = {"g"};
  c.generated = {"g", "p", "l", "i"};
  // every generation is linked to another one
  c.adjacency = {{"g", std::vector<std::string>{"p"}}, {"p", std::vector<std::string>{"l"}},
                 {"l", std::vector<std::string>{"g"}}, {"i", std::vector<std::string>{}}};
  const auto tags = categorize(c.build(), c.focal);
  EXPECT_EQ(tags.at("F"), NodeCategory::Focal);
  EXPECT_EQ(tags.at("g"), NodeCategory::GenInIntro);
  EXPECT_EQ(tags.at("p"), NodeCategory::GenInPaper);
  EXPECT_EQ(tags.at("l"), NodeCategory::GenLinked);
  EXPECT_EQ(tags.at("i"), NodeCategory::GenIsolated);
}

TEST(Categorize, PartitionsGeneratedNodes) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_graph_case(rng);
    const auto g = c.build();
    const auto tags = categorize(g, c.focal);
    ASSERT_EQ(tags.size(), g.nodes.size());
    ASSERT_EQ(generated_nodes(tags), g.generated);
    std::size_t total = 0;
    for (auto cat : kGeneratedCategories) total += with_category(tags, cat).size();
    ASSERT_EQ(total, g.generated.size());
  }
}

// With no known citations between references, every generation outside the
// focal reference list is isolated.
TEST(Categorize, EmptyAdjacencyIsolatesEverythingOutsideTheList) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_graph_case(rng);
    c.adjacency.clear();
    const auto g = c.build();
    const auto tags = categorize(g, c.focal);
    for (const auto& id : g.generated) {
      const bool listed = std::count(c.focal.reference_ids.begin(), c.focal.reference_ids.end(), id) > 0;
      if (!listed) {
        ASSERT_EQ(tags.at(id), NodeCategory::GenIsolated);
      }
    }
  }
}

TEST(Clustering, TriangleAndPath) {
  const auto k3 = from_edges({{"a", "b"}, {"b", "c"}, {"c", "a"}});
  for (const char* n : {"a", "b", "c"}) EXPECT_EQ(clustering_coefficient(k3, n), Ratio(1));
  EXPECT_EQ(*avg_clustering(k3, {"a", "b", "c"}), Ratio(1));
  const auto path = from_edges({{"a", "b"}, {"b", "c"}});
  EXPECT_EQ(clustering_coefficient(path, "b"), Ratio(0));
  EXPECT_EQ(clustering_coefficient(path, "a"), Ratio(0));
  EXPECT_FALSE(avg_clustering(path, {"a", "b", "c"}));
  EXPECT_FALSE(avg_clustering(path, {}));
  EXPECT_THROW(clustering_coefficient(path, "zz"), PreconditionError);
}

TEST(Clustering, MixedSubsetAveragesNonzeroOnly) {
  // a-b-c triangle with a pendant d on a: a = 1/3, b = c = 1, d = 0
  const auto g = from_edges({{"a", "b"}, {"b", "c"}, {"c", "a"}, {"d", "a"}});
  EXPECT_EQ(clustering_coefficient(g, "a"), Ratio(1, 3));
  EXPECT_EQ(*avg_clustering(g, {"a", "b", "d"}), Ratio(2, 3));
}

TEST(Clustering, ReversingEdgesChangesNothing) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_graph_case(rng, 20);
    const auto g = c.build();
    auto r = g;
    r.edges.clear();
    for (const auto& [a, b] : g.edges) {
      if (rng() % 2) {
        r.edges.insert({b, a});
      } else {
        r.edges.insert({a, b});
      }
    }
    const auto tags = categorize(g, c.focal);
    for (const auto& n : g.nodes) ASSERT_EQ(clustering_coefficient(g, n), clustering_coefficient(r, n));
    ASSERT_EQ(edge_expansion(g, tags), edge_expansion(r, tags));
    ASSERT_EQ(boolean_edge_density(g, tags), boolean_edge_density(r, tags));
  }
}

TEST(GraphMetrics, MatchBruteForceOnRandomGraphs) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = random_graph_case(rng);
    const auto g = c.build();
    const auto tags = categorize(g, c.focal);
    const MatrixGraph m(g);
    for (const auto& n : g.nodes) ASSERT_EQ(clustering_coefficient(g, n), m.clustering(n)) << n;
    ASSERT_EQ(avg_clustering(g, generated_nodes(tags)), m.avg(generated_nodes(tags)));
    ASSERT_EQ(avg_clustering(g, ground_truth_nodes(tags)), m.avg(ground_truth_nodes(tags)));
    const auto linked = with_category(tags, NodeCategory::GenLinked);
    ASSERT_EQ(boolean_edge_density(g, tags), m.bed(linked, ground_truth_nodes(tags)));
    ASSERT_EQ(edge_expansion(g, tags), m.expansion(linked, ground_truth_nodes(tags)));
  }
}

TEST(EdgeMetrics, TrivialCases) {
  GraphCase c;
  c.focal.index_id = "F";
  c.intro = {"g1", "g2"};
  c.generated = {"a", "b"};
  c.adjacency = {{"a", std::vector<std::string>{"b"}}, {"b", std::vector<std::string>{}},
                 {"g1", std::vector<std::string>{}}, {"g2", std::vector<std::string>{}}};
  auto g = c.build();
  auto tags = categorize(g, c.focal);
  EXPECT_EQ(*edge_expansion(g, tags), Ratio(0));
  EXPECT_EQ(*boolean_edge_density(g, tags), Ratio(0));
  c.adjacency["a"] = std::vector<std::string>{"g1"};
  c.adjacency["b"] = std::vector<std::string>{"g2", "g1"};
  g = c.build();
  tags = categorize(g, c.focal);
  EXPECT_EQ(*boolean_edge_density(g, tags), Ratio(1));
  EXPECT_EQ(*edge_expansion(g, tags), Ratio(3, 2));
  c.generated.clear();
  g = c.build();
  tags = categorize(g, c.focal);
  EXPECT_FALSE(boolean_edge_density(g, tags));
  EXPECT_FALSE(edge_expansion(g, tags));
}

TEST(CategoryProfiles, PartitionAndPlantedOrdering) {
  std::mt19937 rng(31);
  std::vector<std::pair<Tags, std::map<std::string, stats::CharacteristicsRow>>> graphs;
  std::size_t generated = 0;
  const std::map<NodeCategory, std::int64_t> base{{NodeCategory::GenInIntro, 50000},
                                                  {NodeCategory::GenInPaper, 5000},
                                                  {NodeCategory::GenLinked, 500},
                                                  {NodeCategory::GenIsolated, 5},
                                                  {NodeCategory::GroundTruthUncited, 100}};
  for (int p = 0; p < 20; ++p) {
    const auto c = random_graph_case(rng);
    const auto g = c.build();
    auto tags = categorize(g, c.focal);
    std::map<std::string, stats::CharacteristicsRow> meta;
    for (const auto& [id, t] : tags) {
      if (t == NodeCategory::Focal) continue;
      stats::CharacteristicsRow r;
      r.citation_count = base.at(t) + static_cast<std::int64_t>(rng() % 100);
      r.reference_count = static_cast<std::int64_t>(rng() % 60);
      meta[id] = r;
    }
    generated += g.generated.size();
    graphs.emplace_back(tags, meta);
  }
  const auto profiles = category_profiles(graphs);
  std::int64_t total = 0;
  for (auto cat : kGeneratedCategories) {
    if (profiles.count(cat)) total += profiles.at(cat).size;
  }
  EXPECT_EQ(total, static_cast<std::int64_t>(generated));
  const auto med = [&](NodeCategory c) { return *profiles.at(c).citation_count.median; };
  EXPECT_GT(med(NodeCategory::GenInIntro), med(NodeCategory::GenInPaper));
  EXPECT_GT(med(NodeCategory::GenInPaper), med(NodeCategory::GenLinked));
  EXPECT_GT(med(NodeCategory::GenLinked), med(NodeCategory::GenIsolated));
}

TEST(CategoryProfiles, SingleCategoryMatchesCohortProfile) {
  Tags tags{{"F", NodeCategory::Focal}, {"a", NodeCategory::GenLinked}, {"b", NodeCategory::GenLinked}};
  std::map<std::string, stats::CharacteristicsRow> meta;
  meta["a"].citation_count = 10;
  meta["b"].citation_count = 30;
  const auto profiles = category_profiles({{tags, meta}});
  ASSERT_EQ(profiles.size(), 1u);
  const auto direct = stats::characteristics({meta["a"], meta["b"]});
  EXPECT_EQ(to_json(profiles.at(NodeCategory::GenLinked)), to_json(direct));
}

TEST(GraphExport, EdgeListAndTags) {
  const auto c = central_graph_case();
  const auto g = c.build();
  const auto edges = edges_tsv(g);
  EXPECT_EQ(edges.rfind("citer\tcited\n", 0), 0u);
  EXPECT_NE(edges.find("L3\tL1\n"), std::string::npos);
  EXPECT_EQ(static_cast<std::size_t>(std::count(edges.begin(), edges.end(), '\n')), g.edges.size() + 1);
  EXPECT_NE(tags_tsv(categorize(g, c.focal)).find("X\tgenerated_isolated\n"), std::string::npos);
}
