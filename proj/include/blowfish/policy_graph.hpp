#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "blowfish/domain.hpp"

namespace blowfish {

// Sentinel vertex for the "tuple absent" value.  It compares greater than any
// cell index, so normalized edges naturally order it last.
inline constexpr std::size_t kBot = std::numeric_limits<std::size_t>::max();

struct Edge {
  std::size_t a = 0;  // always the smaller endpoint
  std::size_t b = 0;

  bool operator==(const Edge& other) const = default;
};

inline bool operator<(const Edge& lhs, const Edge& rhs) {
  if (lhs.a != rhs.a) return lhs.a < rhs.a;
  return lhs.b < rhs.b;
}

// Normalizes endpoint order; throws on self loops.
Edge make_edge(std::size_t u, std::size_t v);

// Undirected discriminative-pair graph over the cells of a domain, optionally
// including the bot vertex.  Edges are stored deduplicated in canonical order:
// lexicographic by (min endpoint, max endpoint), bot last.
class PolicyGraph {
 public:
  PolicyGraph(Domain domain, bool has_bot, std::vector<Edge> edges);

  const Domain& domain() const { return domain_; }
  bool has_bot() const { return has_bot_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::size_t cell_count() const { return domain_.total(); }
  std::size_t vertex_count() const { return domain_.total() + (has_bot_ ? 1 : 0); }

  // Internal vertex id for adjacency work: cells map to themselves, bot maps
  // to cell_count().
  std::size_t vertex_slot(std::size_t v) const;
  std::vector<std::vector<std::size_t>> adjacency() const;

 private:
  Domain domain_;
  bool has_bot_ = false;
  std::vector<Edge> edges_;
};

std::string policy_graph_to_json(const PolicyGraph& g);
PolicyGraph policy_graph_from_json(const std::string& text);

// G^theta: edges between cells at L1 distance <= theta, plus (u, bot) for
// every cell when include_bot is set.
PolicyGraph build_distance_threshold_graph(const Domain& domain, std::size_t theta,
                                           bool include_bot);

// Red vertices of the 1-d theta spanner: every theta-th cell (0-based indices
// theta-1, 2*theta-1, ...), with k-1 appended when k is not a multiple.
std::vector<std::size_t> theta_spanner_reds_1d(std::size_t k, std::size_t theta);

// Spanning tree over [k]: consecutive reds form a path and every non-red cell
// attaches to the next red to its right.
PolicyGraph build_theta_spanner_1d(std::size_t k, std::size_t theta);

// Block layout of the multi-d theta spanner: half-open blocks of side
// floor(theta/d) whose designated red is the block's maximal corner clamped to
// the domain.
struct GridSpannerLayout {
  std::size_t block_side = 1;
  std::vector<std::vector<std::size_t>> reds_per_dim;  // sorted red coordinates
  std::vector<std::size_t> red_of_cell;                // cell -> its block's red
  std::vector<bool> is_red;
};

GridSpannerLayout make_grid_spanner_layout(const Domain& domain, std::size_t theta);

// Subgraph of G^theta over a grid domain: every non-red cell connects to its
// block's red (internal edges) and the reds form a full lattice grid
// (external edges).  Not a tree for d >= 2.
PolicyGraph build_theta_spanner_grid(const Domain& domain, std::size_t theta);

// max over edges (u, v) of g of dist_h(u, v); throws if h leaves any such
// pair disconnected, naming the offending edge.
std::size_t spanner_stretch(const PolicyGraph& g, const PolicyGraph& h);

// BFS hop distance; throws if u, v are disconnected.
std::size_t graph_distance(const PolicyGraph& g, std::size_t u, std::size_t v);

// Vertex sets of the connected components (cells, plus bot mapped to
// cell_count()), each sorted, ordered by smallest member.
std::vector<std::vector<std::size_t>> connected_components(const PolicyGraph& g);

bool is_connected(const PolicyGraph& g);

}  // namespace blowfish
