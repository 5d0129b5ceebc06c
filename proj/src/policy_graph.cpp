#include "blowfish/policy_graph.hpp"

#include <algorithm>
#include <deque>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace blowfish {

using nlohmann::json;

Edge make_edge(std::size_t u, std::size_t v) {
  if (u == v) {
    throw std::invalid_argument("self loop at vertex " + std::to_string(u));
  }
  return u < v ? Edge{u, v} : Edge{v, u};
}

PolicyGraph::PolicyGraph(Domain domain, bool has_bot, std::vector<Edge> edges)
    : domain_(std::move(domain)), has_bot_(has_bot), edges_(std::move(edges)) {
  for (Edge& e : edges_) {
    if (e.a > e.b) std::swap(e.a, e.b);
    if (e.a == e.b) {
      throw std::invalid_argument("self loop at vertex " + std::to_string(e.a));
    }
    if (e.a >= domain_.total() && e.a != kBot) {
      throw std::invalid_argument("edge endpoint " + std::to_string(e.a) +
                                  " outside the domain");
    }
    if (e.b >= domain_.total() && e.b != kBot) {
      throw std::invalid_argument("edge endpoint " + std::to_string(e.b) +
                                  " outside the domain");
    }
    if (e.b == kBot && !has_bot_) {
      throw std::invalid_argument("bot edge in a graph without bot");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

std::size_t PolicyGraph::vertex_slot(std::size_t v) const {
  if (v == kBot) {
    if (!has_bot_) throw std::invalid_argument("graph has no bot vertex");
    return domain_.total();
  }
  if (v >= domain_.total()) {
    throw std::invalid_argument("vertex " + std::to_string(v) + " outside the domain");
  }
  return v;
}

std::vector<std::vector<std::size_t>> PolicyGraph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(vertex_count());
  for (const Edge& e : edges_) {
    const std::size_t a = vertex_slot(e.a);
    const std::size_t b = vertex_slot(e.b);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

std::string policy_graph_to_json(const PolicyGraph& g) {
  json doc;
  doc["dims"] = g.domain().dims();
  doc["has_bot"] = g.has_bot();
  json edges = json::array();
  for (const Edge& e : g.edges()) {
    json pair = json::array();
    pair.push_back(e.a);
    if (e.b == kBot) {
      pair.push_back("bot");
    } else {
      pair.push_back(e.b);
    }
    edges.push_back(std::move(pair));
  }
  doc["edges"] = std::move(edges);
  return doc.dump(2);
}

PolicyGraph policy_graph_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("graph json parse error: ") + e.what());
  }
  if (!doc.contains("dims") || !doc["dims"].is_array()) {
    throw std::invalid_argument("graph json: missing dims array");
  }
  std::vector<std::size_t> dims;
  for (const auto& d : doc["dims"]) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
      throw std::invalid_argument("graph json: dims must be positive integers");
    }
    dims.push_back(d.get<std::size_t>());
  }
  const bool has_bot = doc.value("has_bot", false);
  if (!doc.contains("edges") || !doc["edges"].is_array()) {
    throw std::invalid_argument("graph json: missing edges array");
  }
  auto vertex_of = [&](const json& v) -> std::size_t {
    if (v.is_string()) {
      if (v.get<std::string>() != "bot") {
        throw std::invalid_argument("graph json: unknown vertex label \"" +
                                    v.get<std::string>() + "\"");
      }
      return kBot;
    }
    if (!v.is_number_unsigned()) {
      throw std::invalid_argument("graph json: vertex must be an index or \"bot\"");
    }
    return v.get<std::size_t>();
  };
  std::vector<Edge> edges;
  for (const auto& pair : doc["edges"]) {
    if (!pair.is_array() || pair.size() != 2) {
      throw std::invalid_argument("graph json: each edge must be a 2-element array");
    }
    edges.push_back(make_edge(vertex_of(pair[0]), vertex_of(pair[1])));
  }
  return PolicyGraph(Domain(std::move(dims)), has_bot, std::move(edges));
}

PolicyGraph build_distance_threshold_graph(const Domain& domain, std::size_t theta,
                                           bool include_bot) {
  if (theta == 0) throw std::invalid_argument("theta must be at least 1");
  const std::size_t d = domain.ndims();
  // Offsets with L1 norm in [1, theta] whose first nonzero step is positive,
  // so each unordered pair is visited once.
  std::vector<std::vector<long long>> offsets;
  std::vector<long long> cur(d, 0);
  auto gen = [&](auto&& self, std::size_t dim, std::size_t budget) -> void {
    if (dim == d) {
      bool positive = false;
      for (long long c : cur) {
        if (c != 0) {
          positive = c > 0;
          break;
        }
      }
      if (positive) offsets.push_back(cur);
      return;
    }
    for (long long step = -static_cast<long long>(budget);
         step <= static_cast<long long>(budget); ++step) {
      cur[dim] = step;
      self(self, dim + 1, budget - static_cast<std::size_t>(std::abs(step)));
    }
    cur[dim] = 0;
  };
  gen(gen, 0, theta);

  std::vector<Edge> edges;
  for (std::size_t cell = 0; cell < domain.total(); ++cell) {
    const std::vector<std::size_t> coords = domain.coords_of(cell);
    for (const auto& off : offsets) {
      std::vector<std::size_t> other(d);
      bool ok = true;
      for (std::size_t i = 0; i < d; ++i) {
        const long long v = static_cast<long long>(coords[i]) + off[i];
        if (v < 0 || v >= static_cast<long long>(domain.dims()[i])) {
          ok = false;
          break;
        }
        other[i] = static_cast<std::size_t>(v);
      }
      if (ok) edges.push_back(make_edge(cell, domain.index_of(other)));
    }
    if (include_bot) edges.push_back(make_edge(cell, kBot));
  }
  return PolicyGraph(domain, include_bot, std::move(edges));
}

std::vector<std::size_t> theta_spanner_reds_1d(std::size_t k, std::size_t theta) {
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (theta == 0) throw std::invalid_argument("theta must be at least 1");
  std::vector<std::size_t> reds;
  for (std::size_t r = theta - 1; r < k; r += theta) reds.push_back(r);
  if (reds.empty() || reds.back() != k - 1) reds.push_back(k - 1);
  return reds;
}

PolicyGraph build_theta_spanner_1d(std::size_t k, std::size_t theta) {
  const std::vector<std::size_t> reds = theta_spanner_reds_1d(k, theta);
  std::vector<bool> is_red(k, false);
  for (std::size_t r : reds) is_red[r] = true;

  std::vector<Edge> edges;
  for (std::size_t i = 1; i < reds.size(); ++i) {
    edges.push_back(make_edge(reds[i - 1], reds[i]));
  }
  // Each non-red cell attaches to the next red to its right.
  std::size_t next = 0;
  for (std::size_t cell = 0; cell < k; ++cell) {
    if (is_red[cell]) continue;
    while (reds[next] < cell) ++next;
    edges.push_back(make_edge(cell, reds[next]));
  }
  return PolicyGraph(Domain({k}), false, std::move(edges));
}

GridSpannerLayout make_grid_spanner_layout(const Domain& domain, std::size_t theta) {
  const std::size_t d = domain.ndims();
  if (d < 2) throw std::invalid_argument("grid spanner needs at least 2 dimensions");
  if (theta < d) {
    throw std::invalid_argument("theta must be at least the dimension count");
  }
  GridSpannerLayout layout;
  layout.block_side = theta / d;

  layout.reds_per_dim.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t k = domain.dims()[i];
    for (std::size_t a = 0; a < k; a += layout.block_side) {
      layout.reds_per_dim[i].push_back(std::min(a + layout.block_side - 1, k - 1));
    }
    // Clamping can duplicate the last red when the final block is partial.
    auto& reds = layout.reds_per_dim[i];
    reds.erase(std::unique(reds.begin(), reds.end()), reds.end());
  }

  layout.red_of_cell.resize(domain.total());
  layout.is_red.assign(domain.total(), false);
  for (std::size_t cell = 0; cell < domain.total(); ++cell) {
    const std::vector<std::size_t> coords = domain.coords_of(cell);
    std::vector<std::size_t> red(d);
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t block = coords[i] / layout.block_side;
      red[i] = std::min((block + 1) * layout.block_side - 1, domain.dims()[i] - 1);
    }
    layout.red_of_cell[cell] = domain.index_of(red);
  }
  for (std::size_t cell = 0; cell < domain.total(); ++cell) {
    layout.is_red[layout.red_of_cell[cell]] = true;
  }
  return layout;
}

PolicyGraph build_theta_spanner_grid(const Domain& domain, std::size_t theta) {
  const GridSpannerLayout layout = make_grid_spanner_layout(domain, theta);
  const std::size_t d = domain.ndims();

  std::vector<Edge> edges;
  // Internal: one edge from each non-red cell to its block's red.
  for (std::size_t cell = 0; cell < domain.total(); ++cell) {
    if (!layout.is_red[cell]) edges.push_back(make_edge(cell, layout.red_of_cell[cell]));
  }
  // External: lattice grid over the red positions.
  std::vector<std::size_t> idx(d, 0);
  auto red_at = [&](const std::vector<std::size_t>& lattice) {
    std::vector<std::size_t> coords(d);
    for (std::size_t i = 0; i < d; ++i) coords[i] = layout.reds_per_dim[i][lattice[i]];
    return domain.index_of(coords);
  };
  while (true) {
    for (std::size_t i = 0; i < d; ++i) {
      if (idx[i] + 1 < layout.reds_per_dim[i].size()) {
        std::vector<std::size_t> next = idx;
        ++next[i];
        edges.push_back(make_edge(red_at(idx), red_at(next)));
      }
    }
    std::size_t dim = d;
    while (dim-- > 0) {
      if (++idx[dim] < layout.reds_per_dim[dim].size()) break;
      idx[dim] = 0;
      if (dim == 0) return PolicyGraph(domain, false, std::move(edges));
    }
  }
}

namespace {

// BFS distances from src over vertex slots; kUnreached for the rest.
constexpr std::size_t kUnreached = static_cast<std::size_t>(-1);

std::vector<std::size_t> bfs_distances(const std::vector<std::vector<std::size_t>>& adj,
                                       std::size_t src) {
  std::vector<std::size_t> dist(adj.size(), kUnreached);
  std::deque<std::size_t> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (std::size_t w : adj[v]) {
      if (dist[w] == kUnreached) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

std::string vertex_name(std::size_t v) {
  return v == kBot ? std::string("bot") : std::to_string(v);
}

}  // namespace

std::size_t spanner_stretch(const PolicyGraph& g, const PolicyGraph& h) {
  if (!(g.domain() == h.domain()) || g.has_bot() != h.has_bot()) {
    throw std::invalid_argument("spanner_stretch: graphs are over different vertex sets");
  }
  const auto adj = h.adjacency();
  std::size_t worst = 0;
  // One BFS per distinct source endpoint.
  std::vector<std::size_t> dist;
  std::size_t have_src = kUnreached;
  for (const Edge& e : g.edges()) {
    const std::size_t a = h.vertex_slot(e.a);
    const std::size_t b = h.vertex_slot(e.b);
    if (have_src != a) {
      dist = bfs_distances(adj, a);
      have_src = a;
    }
    if (dist[b] == kUnreached) {
      throw std::runtime_error("spanner_stretch: endpoints of edge (" + vertex_name(e.a) +
                               "," + vertex_name(e.b) + ") are disconnected in h");
    }
    worst = std::max(worst, dist[b]);
  }
  return worst;
}

std::size_t graph_distance(const PolicyGraph& g, std::size_t u, std::size_t v) {
  const auto adj = g.adjacency();
  const auto dist = bfs_distances(adj, g.vertex_slot(u));
  const std::size_t d = dist[g.vertex_slot(v)];
  if (d == kUnreached) {
    throw std::runtime_error("graph_distance: vertices " + vertex_name(u) + " and " +
                             vertex_name(v) + " are disconnected");
  }
  return d;
}

std::vector<std::vector<std::size_t>> connected_components(const PolicyGraph& g) {
  const auto adj = g.adjacency();
  std::vector<bool> seen(adj.size(), false);
  std::vector<std::vector<std::size_t>> components;
  for (std::size_t start = 0; start < adj.size(); ++start) {
    if (seen[start]) continue;
    std::vector<std::size_t> component;
    std::deque<std::size_t> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      component.push_back(v);
      for (std::size_t w : adj[v]) {
        if (!seen[w]) {
          seen[w] = true;
          queue.push_back(w);
        }
      }
    }
    std::sort(component.begin(), component.end());
    components.push_back(std::move(component));
  }
  return components;
}

bool is_connected(const PolicyGraph& g) { return connected_components(g).size() == 1; }

}  // namespace blowfish
