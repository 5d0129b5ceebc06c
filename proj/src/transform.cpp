#include "blowfish/transform.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <utility>

namespace blowfish {
namespace {

// Vertex-edge matrix of the Case I construction: one row per cell, one column
// per canonical edge; +1 at the smaller endpoint, -1 at the larger, a lone +1
// for bot edges.  Well defined whether or not the graph carries bot.
SparseMatrix incidence_matrix(const PolicyGraph& g) {
  std::vector<Triplet> entries;
  const auto& edges = g.edges();
  entries.reserve(2 * edges.size());
  for (std::size_t j = 0; j < edges.size(); ++j) {
    entries.push_back({edges[j].a, j, 1.0});
    if (edges[j].b != kBot) entries.push_back({edges[j].b, j, -1.0});
  }
  return SparseMatrix::from_triplets(g.cell_count(), edges.size(), std::move(entries));
}

// Right inverse from a BFS spanning tree rooted at bot: the row of a tree
// edge carries +-1 over the cells of the subtree hanging below it, and rows
// of non-tree edges are zero.  Exact in integer arithmetic, and two-sided
// when the graph is itself a tree.
SparseMatrix spanning_tree_inverse(const PolicyGraph& g) {
  const std::size_t k = g.cell_count();
  const std::size_t bot_slot = k;
  const auto& edges = g.edges();

  // Adjacency annotated with canonical edge indices.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(k + 1);
  for (std::size_t j = 0; j < edges.size(); ++j) {
    const std::size_t a = g.vertex_slot(edges[j].a);
    const std::size_t b = g.vertex_slot(edges[j].b);
    adj[a].push_back({b, j});
    adj[b].push_back({a, j});
  }

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(k + 1, kNone);
  std::vector<std::size_t> parent_edge(k + 1, kNone);
  std::deque<std::size_t> queue{bot_slot};
  std::vector<bool> seen(k + 1, false);
  seen[bot_slot] = true;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (const auto& [w, j] : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        parent[w] = v;
        parent_edge[w] = j;
        queue.push_back(w);
      }
    }
  }

  std::vector<Triplet> entries;
  for (std::size_t cell = 0; cell < k; ++cell) {
    for (std::size_t v = cell; v != bot_slot; v = parent[v]) {
      const std::size_t j = parent_edge[v];
      // Child side of the edge is v; the +1 endpoint is the smaller one.
      const bool child_is_plus = (edges[j].a == v);
      entries.push_back({j, cell, child_is_plus ? 1.0 : -1.0});
    }
  }
  return SparseMatrix::from_triplets(edges.size(), k, std::move(entries));
}

double max_abs_entry(const SparseMatrix& m) {
  double worst = 0.0;
  for (const Triplet& t : m.entries()) worst = std::max(worst, std::abs(t.value));
  return worst;
}

SparseMatrix subtract(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> entries(a.entries().begin(), a.entries().end());
  for (const Triplet& t : b.entries()) entries.push_back({t.row, t.col, -t.value});
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(entries));
}

DenseVector column_of(const SparseMatrix& m, std::size_t col) {
  DenseVector out(m.rows(), 0.0);
  for (const Triplet& t : m.entries()) {
    if (t.col == col) out[t.row] = t.value;
  }
  return out;
}

}  // namespace

TransformPair build_transform(const PolicyGraph& g) {
  if (!g.has_bot()) {
    throw std::invalid_argument(
        "build_transform needs a graph with bot; reduce bot-free graphs first");
  }
  if (!is_connected(g)) {
    throw std::invalid_argument(
        "build_transform needs a connected graph; split disconnected policies by "
        "component");
  }
  TransformPair t;
  t.p_g = incidence_matrix(g);
  t.edge_order = g.edges();
  t.p_g_inv = spanning_tree_inverse(g);

  const SparseMatrix product = matmul(t.p_g, t.p_g_inv);
  const double defect = max_abs_entry(subtract(product, SparseMatrix::identity(g.cell_count())));
  if (defect > 1e-9) {
    throw std::runtime_error("translation pair failed the identity check (defect " +
                             std::to_string(defect) + ")");
  }
  return t;
}

CaseIIResult reduce_without_bot(const PolicyGraph& g, const Workload& w,
                                std::size_t removed_vertex) {
  if (g.has_bot()) {
    throw std::invalid_argument("reduce_without_bot expects a graph without bot");
  }
  const std::size_t k = g.cell_count();
  if (removed_vertex >= k) {
    throw std::invalid_argument("removed vertex " + std::to_string(removed_vertex) +
                                " outside the domain");
  }
  if (w.matrix.cols() != k) {
    throw std::invalid_argument("workload has " + std::to_string(w.matrix.cols()) +
                                " columns but the domain has " + std::to_string(k) +
                                " cells");
  }
  if (k < 2) {
    throw std::invalid_argument("reduction needs at least two cells");
  }
  if (!is_connected(g)) {
    throw std::invalid_argument("reduce_without_bot needs a connected graph");
  }

  // D drops the removed column and rewrites it as -1 across the remainder.
  std::vector<Triplet> d_entries;
  d_entries.reserve(2 * (k - 1));
  for (std::size_t j = 0; j + 1 < k; ++j) {
    const std::size_t orig = j < removed_vertex ? j : j + 1;
    d_entries.push_back({orig, j, 1.0});
    d_entries.push_back({removed_vertex, j, -1.0});
  }
  CaseIIReduction reduction;
  reduction.removed_vertex = removed_vertex;
  reduction.d_matrix = SparseMatrix::from_triplets(k, k - 1, std::move(d_entries));
  reduction.correction_coeffs = column_of(w.matrix, removed_vertex);

  auto map_vertex = [&](std::size_t v) -> std::size_t {
    if (v == removed_vertex) return kBot;
    return v < removed_vertex ? v : v - 1;
  };
  std::vector<Edge> edges;
  edges.reserve(g.edges().size());
  for (const Edge& e : g.edges()) {
    edges.push_back(make_edge(map_vertex(e.a), map_vertex(e.b)));
  }
  PolicyGraph reduced_graph(Domain({k - 1}), true, std::move(edges));

  Workload reduced{matmul(w.matrix, reduction.d_matrix), WorkloadKind::kCustom};
  return CaseIIResult{std::move(reduced_graph), std::move(reduced), std::move(reduction)};
}

Workload transform_workload(const Workload& w, const TransformPair& t) {
  return Workload{matmul(w.matrix, t.p_g), WorkloadKind::kCustom};
}

DenseVector transform_database(const HistogramDB& x, const TransformPair& t) {
  if (x.counts.size() != t.p_g_inv.cols()) {
    throw std::invalid_argument("histogram has " + std::to_string(x.counts.size()) +
                                " cells but the translation expects " +
                                std::to_string(t.p_g_inv.cols()));
  }
  return matmul(t.p_g_inv, x.counts);
}

namespace {

struct ComponentPlan {
  std::vector<std::size_t> cells;  // original ids, sorted
  bool has_bot = false;
};

std::vector<ComponentPlan> component_plans(const PolicyGraph& g) {
  std::vector<ComponentPlan> plans;
  const std::size_t bot_slot = g.cell_count();
  for (const auto& component : connected_components(g)) {
    ComponentPlan plan;
    for (std::size_t slot : component) {
      if (slot == bot_slot && g.has_bot()) {
        plan.has_bot = true;
      } else {
        plan.cells.push_back(slot);
      }
    }
    if (!plan.cells.empty()) plans.push_back(std::move(plan));
  }
  return plans;
}

Workload project_columns(const Workload& w, const std::vector<std::size_t>& cells,
                         const std::vector<std::size_t>& local_of) {
  std::vector<Triplet> entries;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  for (const Triplet& t : w.matrix.entries()) {
    if (local_of[t.col] != kNone) entries.push_back({t.row, local_of[t.col], t.value});
  }
  return Workload{
      SparseMatrix::from_triplets(w.matrix.rows(), cells.size(), std::move(entries)),
      WorkloadKind::kCustom};
}

}  // namespace

PreparedTransform PreparedTransform::build(const PolicyGraph& g, const Workload& w) {
  if (w.matrix.cols() != g.cell_count()) {
    throw std::invalid_argument("workload has " + std::to_string(w.matrix.cols()) +
                                " columns but the domain has " +
                                std::to_string(g.cell_count()) + " cells");
  }
  PreparedTransform prepared;
  prepared.query_count_ = w.matrix.rows();

  const std::vector<ComponentPlan> plans = component_plans(g);
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> local_of(g.cell_count(), kNone);

  for (const ComponentPlan& plan : plans) {
    std::fill(local_of.begin(), local_of.end(), kNone);
    for (std::size_t i = 0; i < plan.cells.size(); ++i) local_of[plan.cells[i]] = i;

    Component comp;
    comp.cells = plan.cells;
    Workload local = project_columns(w, plan.cells, local_of);

    std::vector<Edge> local_edges;
    for (const Edge& e : g.edges()) {
      const bool a_in = e.a != kBot && local_of[e.a] != kNone;
      if (!a_in) continue;
      const std::size_t b = e.b == kBot ? kBot : local_of[e.b];
      local_edges.push_back(make_edge(local_of[e.a], b));
    }

    if (plan.has_bot) {
      comp.graph.emplace(Domain({plan.cells.size()}), true, std::move(local_edges));
      comp.reduced = std::move(local);
    } else if (plan.cells.size() == 1) {
      // Lone bot-free cell: its count is disclosed outright, nothing to noise.
      CaseIIReduction reduction;
      reduction.removed_vertex = plan.cells.front();
      reduction.d_matrix = SparseMatrix(1, 0);
      reduction.correction_coeffs = column_of(w.matrix, plan.cells.front());
      comp.reduction = std::move(reduction);
      comp.reduced = Workload{SparseMatrix(w.matrix.rows(), 0), WorkloadKind::kCustom};
      comp.transformed = comp.reduced;
      prepared.components_.push_back(std::move(comp));
      continue;
    } else {
      PolicyGraph local_graph(Domain({plan.cells.size()}), false, std::move(local_edges));
      CaseIIResult result =
          reduce_without_bot(local_graph, local, plan.cells.size() - 1);
      // Report the removed vertex by its original id.
      result.reduction.removed_vertex = plan.cells.back();
      comp.graph.emplace(std::move(result.graph));
      comp.reduced = std::move(result.workload);
      comp.reduction = std::move(result.reduction);
    }

    comp.pair = build_transform(*comp.graph);
    comp.pair.reduction = comp.reduction;
    comp.transformed = transform_workload(comp.reduced, comp.pair);
    prepared.components_.push_back(std::move(comp));
  }
  return prepared;
}

std::vector<DenseVector> PreparedTransform::transform_databases(const HistogramDB& x) const {
  if (x.counts.size() == 0 || components_.empty()) return {};
  std::vector<DenseVector> out;
  for (const Component& comp : components_) {
    DenseVector local(comp.cells.size(), 0.0);
    for (std::size_t i = 0; i < comp.cells.size(); ++i) local[i] = x.counts[comp.cells[i]];
    if (comp.reduction) {
      // Drop the removed cell (always the highest local index).
      local.pop_back();
    }
    if (!comp.graph) {
      out.push_back(DenseVector{});
      continue;
    }
    out.push_back(matmul(comp.pair.p_g_inv, local));
  }
  return out;
}

DenseVector PreparedTransform::answer_exact(const HistogramDB& x) const {
  DenseVector answers(query_count_, 0.0);
  for (const Component& comp : components_) {
    DenseVector local(comp.cells.size(), 0.0);
    double local_total = 0.0;
    for (std::size_t i = 0; i < comp.cells.size(); ++i) {
      local[i] = x.counts[comp.cells[i]];
      local_total += local[i];
    }
    if (comp.reduction) local.pop_back();
    if (comp.graph) {
      const DenseVector x_g = matmul(comp.pair.p_g_inv, local);
      const DenseVector part = matmul(comp.transformed.matrix, x_g);
      for (std::size_t q = 0; q < answers.size(); ++q) answers[q] += part[q];
    }
    if (comp.reduction) {
      for (std::size_t q = 0; q < answers.size(); ++q) {
        answers[q] += local_total * comp.reduction->correction_coeffs[q];
      }
    }
  }
  return answers;
}

double PreparedTransform::sensitivity() const {
  double worst = 0.0;
  for (const Component& comp : components_) {
    worst = std::max(worst, max_column_l1(comp.transformed.matrix));
  }
  return worst;
}

double policy_sensitivity(const Workload& w, const PolicyGraph& g) {
  if (w.matrix.cols() != g.cell_count()) {
    throw std::invalid_argument("workload has " + std::to_string(w.matrix.cols()) +
                                " columns but the domain has " +
                                std::to_string(g.cell_count()) + " cells");
  }
  // Translated-workload route without the inverses: per component, the
  // columns of W' P are exactly the neighbor difference images.
  const std::vector<ComponentPlan> plans = component_plans(g);
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> local_of(g.cell_count(), kNone);
  double worst = 0.0;
  for (const ComponentPlan& plan : plans) {
    std::fill(local_of.begin(), local_of.end(), kNone);
    for (std::size_t i = 0; i < plan.cells.size(); ++i) local_of[plan.cells[i]] = i;
    Workload local = project_columns(w, plan.cells, local_of);
    std::vector<Edge> local_edges;
    for (const Edge& e : g.edges()) {
      const bool a_in = e.a != kBot && local_of[e.a] != kNone;
      if (!a_in) continue;
      const std::size_t b = e.b == kBot ? kBot : local_of[e.b];
      local_edges.push_back(make_edge(local_of[e.a], b));
    }
    SparseMatrix w_g;
    if (plan.has_bot) {
      PolicyGraph local_graph(Domain({plan.cells.size()}), true, std::move(local_edges));
      w_g = matmul(local.matrix, incidence_matrix(local_graph));
    } else if (plan.cells.size() == 1) {
      continue;  // no neighbors, no contribution
    } else {
      PolicyGraph local_graph(Domain({plan.cells.size()}), false, std::move(local_edges));
      CaseIIResult result = reduce_without_bot(local_graph, local, plan.cells.size() - 1);
      w_g = matmul(result.workload.matrix, incidence_matrix(result.graph));
    }
    worst = std::max(worst, max_column_l1(w_g));
  }
  return worst;
}

double brute_force_sensitivity(const Workload& w, const PolicyGraph& g) {
  constexpr std::size_t kMaxCells = 64;
  if (g.cell_count() > kMaxCells) {
    throw std::invalid_argument("brute-force sensitivity is capped at " +
                                std::to_string(kMaxCells) + " cells");
  }
  if (w.matrix.cols() != g.cell_count()) {
    throw std::invalid_argument("workload has " + std::to_string(w.matrix.cols()) +
                                " columns but the domain has " +
                                std::to_string(g.cell_count()) + " cells");
  }
  const std::vector<double> dense = w.matrix.to_dense_row_major();
  const std::size_t rows = w.matrix.rows();
  const std::size_t cols = w.matrix.cols();
  double worst = 0.0;
  for (const Edge& e : g.edges()) {
    double l1 = 0.0;
    for (std::size_t q = 0; q < rows; ++q) {
      const double u = dense[q * cols + e.a];
      const double v = e.b == kBot ? 0.0 : dense[q * cols + e.b];
      l1 += std::abs(u - v);
    }
    worst = std::max(worst, l1);
  }
  return worst;
}

}  // namespace blowfish
