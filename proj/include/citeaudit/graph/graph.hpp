#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/ratio.hpp"
#include "citeaudit/corpus/types.hpp"
#include "citeaudit/stats/stats.hpp"

namespace citeaudit::graph {

enum class NodeCategory { Focal, GenInIntro, GenInPaper, GenLinked, GenIsolated, GroundTruthUncited };

inline constexpr NodeCategory kGeneratedCategories[] = {NodeCategory::GenInIntro, NodeCategory::GenInPaper,
                                                        NodeCategory::GenLinked, NodeCategory::GenIsolated};

inline std::string to_string(NodeCategory c) {
  switch (c) {
    case NodeCategory::Focal: return "focal";
    case NodeCategory::GenInIntro: return "generated_in_intro";
    case NodeCategory::GenInPaper: return "generated_in_paper";
    case NodeCategory::GenLinked: return "generated_linked";
    case NodeCategory::GenIsolated: return "generated_isolated";
    case NodeCategory::GroundTruthUncited: return "ground_truth_uncited";
  }
  return "focal";
}

inline bool is_generated(NodeCategory c) {
  return c == NodeCategory::GenInIntro || c == NodeCategory::GenInPaper || c == NodeCategory::GenLinked ||
         c == NodeCategory::GenIsolated;
}

/// Outgoing reference ids per index id; nullopt marks unknown adjacency.
using Adjacency = std::map<std::string, std::optional<std::vector<std::string>>>;

/// Directed citation graph of one focal paper. An edge (a, b) means a cites b.
struct CitationGraph {
  std::string focal;
  std::set<std::string> nodes;  // includes the focal node
  std::set<std::pair<std::string, std::string>> edges;
  std::set<std::string> ground_truth;  // intro reference ids
  std::set<std::string> generated;     // matched ids of existing generations
  /// Nodes whose adjacency was unknown and contribute no outgoing edges.
  std::int64_t unknown_adjacency = 0;

  bool has_node(const std::string& id) const { return nodes.count(id) > 0; }
};

/// Node set: focal, intro ground truth and existing generated ids (a
/// generation equal to a ground-truth reference is one node). Edges: focal to
/// every intro reference plus every adjacency edge between two non-focal
/// nodes. Self-citations are dropped.
inline CitationGraph build_graph(const PaperRecord& focal, const std::set<std::string>& intro_ids,
                                 const std::vector<std::string>& generated_ids, const Adjacency& adjacency) {
  CitationGraph g;
  g.focal = focal.index_id.empty() ? "focal:" + focal.preprint_id : focal.index_id;
  g.nodes.insert(g.focal);
  for (const auto& id : intro_ids) {
    if (id.empty() || id == g.focal) continue;
    g.ground_truth.insert(id);
    g.nodes.insert(id);
    g.edges.insert({g.focal, id});
  }
  for (const auto& id : generated_ids) {
    if (id.empty() || id == g.focal) continue;
    g.generated.insert(id);
    g.nodes.insert(id);
  }
  for (const auto& id : g.nodes) {
    if (id == g.focal) continue;
    const auto it = adjacency.find(id);
    if (it == adjacency.end() || !it->second) {
      ++g.unknown_adjacency;
      continue;
    }
    for (const auto& cited : *it->second) {
      if (cited != id && cited != g.focal && g.has_node(cited)) g.edges.insert({id, cited});
    }
  }
  return g;
}

/// Undirected projection without self-loops or parallel edges.
inline std::map<std::string, std::set<std::string>> undirected(const CitationGraph& g) {
  std::map<std::string, std::set<std::string>> nb;
  for (const auto& n : g.nodes) nb[n];
  for (const auto& [a, b] : g.edges) {
    if (a == b) continue;
    nb[a].insert(b);
    nb[b].insert(a);
  }
  return nb;
}

using Tags = std::map<std::string, NodeCategory>;

/// Generated nodes take the first matching category of in-intro, in-paper,
/// linked (an edge to another ground-truth or generated node) and isolated.
inline Tags categorize(const CitationGraph& g, const PaperRecord& focal) {
  Tags tags;
  const std::set<std::string> in_paper(focal.reference_ids.begin(), focal.reference_ids.end());
  const auto nb = undirected(g);
  tags[g.focal] = NodeCategory::Focal;
  for (const auto& id : g.ground_truth) tags[id] = NodeCategory::GroundTruthUncited;
  for (const auto& id : g.generated) {
    if (g.ground_truth.count(id)) {
      tags[id] = NodeCategory::GenInIntro;
    } else if (in_paper.count(id)) {
      tags[id] = NodeCategory::GenInPaper;
    } else {
      bool linked = false;
      for (const auto& other : nb.at(id)) {
        linked |= other != g.focal && (g.ground_truth.count(other) || g.generated.count(other));
      }
      tags[id] = linked ? NodeCategory::GenLinked : NodeCategory::GenIsolated;
    }
  }
  return tags;
}

/// Triangles through the node over possible triangles, undirected. Degree
/// below two gives 0.
inline Ratio clustering_coefficient(const CitationGraph& g, const std::string& node) {
  if (!g.has_node(node)) throw PreconditionError("node " + node + " is not in the graph");
  const auto nb = undirected(g);
  const auto& mine = nb.at(node);
  const auto d = static_cast<std::int64_t>(mine.size());
  if (d < 2) return Ratio(0);
  std::int64_t links = 0;
  for (auto i = mine.begin(); i != mine.end(); ++i) {
    const auto& ni = nb.at(*i);
    for (auto j = std::next(i); j != mine.end(); ++j) links += ni.count(*j);
  }
  return Ratio(links, d * (d - 1) / 2);
}

/// Mean of the nonzero coefficients over the subset; undefined when the
/// subset is empty or all coefficients are zero.
inline MaybeRatio avg_clustering(const CitationGraph& g, const std::set<std::string>& subset) {
  Ratio sum(0);
  std::int64_t n = 0;
  for (const auto& node : subset) {
    const auto c = clustering_coefficient(g, node);
    if (c.num() == 0) continue;
    sum = sum + c;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / Ratio(n);
}

inline std::set<std::string> with_category(const Tags& tags, NodeCategory c) {
  std::set<std::string> out;
  for (const auto& [id, t] : tags) {
    if (t == c) out.insert(id);
  }
  return out;
}

/// Ground-truth intro nodes, generated or not.
inline std::set<std::string> ground_truth_nodes(const Tags& tags) {
  std::set<std::string> out;
  for (const auto& [id, t] : tags) {
    if (t == NodeCategory::GenInIntro || t == NodeCategory::GroundTruthUncited) out.insert(id);
  }
  return out;
}

inline std::set<std::string> generated_nodes(const Tags& tags) {
  std::set<std::string> out;
  for (const auto& [id, t] : tags) {
    if (is_generated(t)) out.insert(id);
  }
  return out;
}

/// Fraction of linked generations adjacent (either direction) to at least one
/// ground-truth intro node.
inline MaybeRatio boolean_edge_density(const CitationGraph& g, const Tags& tags) {
  const auto linked = with_category(tags, NodeCategory::GenLinked);
  const auto gt = ground_truth_nodes(tags);
  const auto nb = undirected(g);
  std::int64_t hit = 0;
  for (const auto& id : linked) {
    const auto& n = nb.at(id);
    hit += std::any_of(n.begin(), n.end(), [&](const std::string& o) { return gt.count(o) > 0; });
  }
  return safe_ratio(hit, static_cast<std::int64_t>(linked.size()));
}

/// Undirected edges between linked generations and ground-truth intro nodes,
/// divided by the smaller of the two set sizes.
inline MaybeRatio edge_expansion(const CitationGraph& g, const Tags& tags) {
  const auto a = with_category(tags, NodeCategory::GenLinked);
  const auto b = ground_truth_nodes(tags);
  const auto nb = undirected(g);
  std::int64_t cross = 0;
  for (const auto& id : a) {
    for (const auto& o : nb.at(id)) cross += b.count(o);
  }
  return safe_ratio(cross, static_cast<std::int64_t>(std::min(a.size(), b.size())));
}

struct GraphMetrics {
  std::string paper_id;
  MaybeRatio bed;
  MaybeRatio expansion;
  MaybeRatio avg_clust_gt;
  MaybeRatio avg_clust_gen;
  std::map<NodeCategory, std::int64_t> counts;
  std::int64_t unknown_adjacency = 0;
};

inline GraphMetrics compute_metrics(const std::string& paper_id, const CitationGraph& g, const Tags& tags) {
  GraphMetrics m;
  m.paper_id = paper_id;
  m.bed = boolean_edge_density(g, tags);
  m.expansion = edge_expansion(g, tags);
  m.avg_clust_gt = avg_clustering(g, ground_truth_nodes(tags));
  m.avg_clust_gen = avg_clustering(g, generated_nodes(tags));
  for (const auto& [id, t] : tags) {
    if (t != NodeCategory::Focal) ++m.counts[t];
  }
  m.unknown_adjacency = g.unknown_adjacency;
  return m;
}

/// Citation and reference count distributions per node category, pooled over
/// focal papers. Each graph contributes its tags and the metadata of its
/// nodes; nodes without metadata count as unknown.
inline std::map<NodeCategory, stats::CohortProfile> category_profiles(
    const std::vector<std::pair<Tags, std::map<std::string, stats::CharacteristicsRow>>>& graphs,
    const stats::CharacteristicsBins& bins = {}) {
  std::map<NodeCategory, std::vector<stats::CharacteristicsRow>> rows;
  for (const auto& [tags, meta] : graphs) {
    for (const auto& [id, t] : tags) {
      if (t == NodeCategory::Focal) continue;
      const auto it = meta.find(id);
      rows[t].push_back(it == meta.end() ? stats::CharacteristicsRow{} : it->second);
    }
  }
  std::map<NodeCategory, stats::CohortProfile> out;
  for (const auto& [t, r] : rows) out[t] = stats::characteristics(r, bins);
  return out;
}

/// `citer<TAB>cited` lines, sorted.
inline std::string edges_tsv(const CitationGraph& g) {
  std::string out = "citer\tcited\n";
  for (const auto& [a, b] : g.edges) out += a + "\t" + b + "\n";
  return out;
}

inline std::string tags_tsv(const Tags& tags) {
  std::string out = "node\tcategory\n";
  for (const auto& [id, t] : tags) out += id + "\t" + to_string(t) + "\n";
  return out;
}

}  // namespace citeaudit::graph
