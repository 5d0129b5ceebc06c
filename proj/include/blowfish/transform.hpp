#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "blowfish/linalg.hpp"
#include "blowfish/policy_graph.hpp"
#include "blowfish/workload.hpp"

namespace blowfish {

// Record of a bot-free reduction: the chosen vertex v was replaced by bot,
// columns reindexed around it.  Reconstruction adds total * correction_coeffs
// to the reduced answers:  W x = W' x_{-v} + n * W[:, v].
struct CaseIIReduction {
  std::size_t removed_vertex = 0;
  SparseMatrix d_matrix;            // k x (k-1), W' = W * d_matrix
  DenseVector correction_coeffs;    // column v of W, one entry per query
};

// Vertex-edge translation pair for a connected policy graph with bot.
// p_g has one row per cell and one column per edge in canonical order; the
// column for a cell-cell edge (u, v), u < v, holds +1 at u and -1 at v, and
// the column for (u, bot) holds a lone +1 at u.  p_g_inv is a right inverse
// (two-sided when the graph is a tree).
struct TransformPair {
  SparseMatrix p_g;
  SparseMatrix p_g_inv;
  std::vector<Edge> edge_order;
  std::optional<CaseIIReduction> reduction;
};

// Requires g connected with bot.  The inverse comes from a spanning tree, so
// it is exact in integer arithmetic and sparse even for dense graphs.
TransformPair build_transform(const PolicyGraph& g);

struct CaseIIResult {
  PolicyGraph graph;     // v replaced by bot, cells reindexed to k-1
  Workload workload;     // W' = W * D
  CaseIIReduction reduction;
};

// Requires g connected without bot and w column count matching the domain.
CaseIIResult reduce_without_bot(const PolicyGraph& g, const Workload& w,
                                std::size_t removed_vertex);

Workload transform_workload(const Workload& w, const TransformPair& t);

DenseVector transform_database(const HistogramDB& x, const TransformPair& t);

// max column L1 norm of the translated workload; equals the worst
// neighbor-pair L1 change of the exact answers under g.
double policy_sensitivity(const Workload& w, const PolicyGraph& g);

// Direct enumeration over the edges of g; guarded to domains of at most 64
// cells.
double brute_force_sensitivity(const Workload& w, const PolicyGraph& g);

// Uniform front door over any policy graph: connected graphs with bot pass
// straight through, bot-free graphs get the vertex replacement (highest cell
// index by default), and disconnected graphs are split per component with
// answers summed.
class PreparedTransform {
 public:
  struct Component {
    std::vector<std::size_t> cells;  // original cell ids covered, sorted
    // Reduced graph with bot; empty only for a lone bot-free cell, whose
    // answers are fully determined by its disclosed count.
    std::optional<PolicyGraph> graph;
    Workload reduced;                // workload over the component's cells
    TransformPair pair;
    Workload transformed;            // reduced * p_g
    std::optional<CaseIIReduction> reduction;
  };

  static PreparedTransform build(const PolicyGraph& g, const Workload& w);

  // Exact answers through the translated route (per-component
  // W_G x_G plus the reduction corrections).
  DenseVector answer_exact(const HistogramDB& x) const;

  // Per-component transformed databases, aligned with components().
  std::vector<DenseVector> transform_databases(const HistogramDB& x) const;

  double sensitivity() const;
  const std::vector<Component>& components() const { return components_; }
  std::size_t query_count() const { return query_count_; }

 private:
  std::vector<Component> components_;
  std::size_t query_count_ = 0;
};

}  // namespace blowfish
