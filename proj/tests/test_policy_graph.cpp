#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <deque>
#include <set>

#include "blowfish/policy_graph.hpp"

using namespace blowfish;

namespace {

// BFS all-pairs oracle, independent of the library's traversal code.
std::size_t oracle_stretch(const PolicyGraph& g, const PolicyGraph& h) {
  const std::size_t n = g.vertex_count();
  auto dists = [n](const PolicyGraph& graph) {
    const auto adj = graph.adjacency();
    std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, SIZE_MAX));
    for (std::size_t s = 0; s < n; ++s) {
      d[s][s] = 0;
      std::deque<std::size_t> q{s};
      while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop_front();
        for (std::size_t v : adj[u]) {
          if (d[s][v] != SIZE_MAX) continue;
          d[s][v] = d[s][u] + 1;
          q.push_back(v);
        }
      }
    }
    return d;
  };
  const auto dg = dists(g);
  const auto dh = dists(h);
  std::size_t worst = 0;
  for (const Edge& e : g.edges()) {
    const std::size_t u = g.vertex_slot(e.a);
    const std::size_t v = g.vertex_slot(e.b);
    REQUIRE(dh[u][v] != SIZE_MAX);
    worst = std::max(worst, dh[u][v]);
  }
  (void)dg;
  return worst;
}

bool is_spanning_tree(const PolicyGraph& h) {
  return h.edges().size() + 1 == h.vertex_count() && is_connected(h);
}

}  // namespace

TEST_CASE("edges are canonicalized") {
  const Edge e = make_edge(5, 2);
  CHECK(e.a == 2);
  CHECK(e.b == 5);
  const Edge bot = make_edge(kBot, 3);
  CHECK(bot.a == 3);
  CHECK(bot.b == kBot);
  CHECK_THROWS_AS(make_edge(4, 4), std::invalid_argument);
  CHECK(make_edge(1, 2) < make_edge(1, kBot));
}

TEST_CASE("graph construction sorts, dedups, and validates") {
  const Domain d({4});
  PolicyGraph g(d, false, {make_edge(2, 3), make_edge(0, 1), make_edge(2, 3)});
  REQUIRE(g.edges().size() == 2);
  CHECK(g.edges()[0] == make_edge(0, 1));
  CHECK(g.edges()[1] == make_edge(2, 3));
  CHECK(g.vertex_count() == 4);

  CHECK_THROWS_AS(PolicyGraph(d, false, {make_edge(3, 4)}), std::invalid_argument);
  CHECK_THROWS_AS(PolicyGraph(d, false, {make_edge(0, kBot)}), std::invalid_argument);
  PolicyGraph with_bot(d, true, {make_edge(0, kBot)});
  CHECK(with_bot.vertex_count() == 5);
  CHECK(with_bot.vertex_slot(kBot) == 4);
}

TEST_CASE("distance threshold graphs over a line") {
  const PolicyGraph line = build_distance_threshold_graph(Domain({4}), 1, false);
  CHECK(line.edges() == std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}});

  const PolicyGraph g2 = build_distance_threshold_graph(Domain({4}), 2, false);
  CHECK(g2.edges().size() == 5);
  CHECK(std::count(g2.edges().begin(), g2.edges().end(), make_edge(0, 2)) == 1);
  CHECK(std::count(g2.edges().begin(), g2.edges().end(), make_edge(1, 3)) == 1);

  const PolicyGraph with_bot = build_distance_threshold_graph(Domain({4}), 1, true);
  CHECK(with_bot.edges().size() == 3 + 4);
  CHECK(with_bot.edges().back() == make_edge(3, kBot));
}

TEST_CASE("distance threshold graphs over a grid use L1 distance") {
  const PolicyGraph g = build_distance_threshold_graph(Domain({2, 2}), 1, false);
  // cells 0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1); no diagonals at theta=1
  CHECK(g.edges() == std::vector<Edge>{{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  const PolicyGraph diag = build_distance_threshold_graph(Domain({2, 2}), 2, false);
  CHECK(diag.edges().size() == 6);
}

TEST_CASE("json round trip") {
  const PolicyGraph g = build_distance_threshold_graph(Domain({3, 2}), 1, true);
  const PolicyGraph back = policy_graph_from_json(policy_graph_to_json(g));
  CHECK(back.domain() == g.domain());
  CHECK(back.has_bot() == g.has_bot());
  CHECK(back.edges() == g.edges());
}

TEST_CASE("red cells of the 1-d spanner") {
  CHECK(theta_spanner_reds_1d(10, 3) == std::vector<std::size_t>{2, 5, 8, 9});
  CHECK(theta_spanner_reds_1d(9, 3) == std::vector<std::size_t>{2, 5, 8});
  CHECK(theta_spanner_reds_1d(4, 8) == std::vector<std::size_t>{3});
  CHECK(theta_spanner_reds_1d(1, 2) == std::vector<std::size_t>{0});
}

TEST_CASE("1-d spanner is a spanning tree inside the threshold graph") {
  const PolicyGraph h = build_theta_spanner_1d(10, 3);
  CHECK(is_spanning_tree(h));
  const std::vector<Edge> expected = {{0, 2}, {1, 2}, {2, 5}, {3, 5}, {4, 5},
                                      {5, 8}, {6, 8}, {7, 8}, {8, 9}};
  CHECK(h.edges() == expected);

  for (std::size_t theta : {2, 3, 4, 8}) {
    for (std::size_t k : {2, 5, 17, 64}) {
      const PolicyGraph tree = build_theta_spanner_1d(k, theta);
      CHECK(is_spanning_tree(tree));
      const PolicyGraph g = build_distance_threshold_graph(Domain({k}), theta, false);
      const std::set<Edge> all(g.edges().begin(), g.edges().end());
      for (const Edge& e : tree.edges()) CHECK(all.count(e) == 1);
    }
  }
}

TEST_CASE("spanner stretch matches a BFS oracle") {
  const PolicyGraph g = build_distance_threshold_graph(Domain({10}), 3, false);
  const PolicyGraph h = build_theta_spanner_1d(10, 3);
  CHECK(spanner_stretch(g, h) == 3);
  CHECK(oracle_stretch(g, h) == 3);

  for (std::size_t theta : {2, 4}) {
    for (std::size_t k : {6, 13, 32}) {
      const PolicyGraph gk = build_distance_threshold_graph(Domain({k}), theta, false);
      const PolicyGraph hk = build_theta_spanner_1d(k, theta);
      CHECK(spanner_stretch(gk, hk) == oracle_stretch(gk, hk));
    }
  }
}

TEST_CASE("stretch input validation") {
  const PolicyGraph g = build_distance_threshold_graph(Domain({4}), 1, false);
  const PolicyGraph wrong = build_distance_threshold_graph(Domain({5}), 1, false);
  CHECK_THROWS_AS(spanner_stretch(g, wrong), std::invalid_argument);
  const PolicyGraph empty(Domain({4}), false, {});
  CHECK_THROWS_AS(spanner_stretch(g, empty), std::runtime_error);
}

TEST_CASE("grid spanner layout") {
  const GridSpannerLayout layout = make_grid_spanner_layout(Domain({4, 4}), 4);
  CHECK(layout.block_side == 2);
  REQUIRE(layout.reds_per_dim.size() == 2);
  CHECK(layout.reds_per_dim[0] == std::vector<std::size_t>{1, 3});
  CHECK(layout.reds_per_dim[1] == std::vector<std::size_t>{1, 3});
  const Domain d({4, 4});
  CHECK(layout.is_red[d.index_of({1, 1})]);
  CHECK(layout.is_red[d.index_of({3, 1})]);
  CHECK_FALSE(layout.is_red[d.index_of({0, 0})]);
  CHECK(layout.red_of_cell[d.index_of({0, 0})] == d.index_of({1, 1}));
  CHECK(layout.red_of_cell[d.index_of({2, 3})] == d.index_of({3, 3}));

  CHECK_THROWS_AS(make_grid_spanner_layout(Domain({4, 4}), 1), std::invalid_argument);
}

TEST_CASE("grid spanner stays inside the threshold graph and spans it") {
  for (std::size_t theta : {2, 4}) {
    const Domain d({4, 4});
    const PolicyGraph h = build_theta_spanner_grid(d, theta);
    CHECK(is_connected(h));
    const PolicyGraph g = build_distance_threshold_graph(d, theta, false);
    const std::set<Edge> all(g.edges().begin(), g.edges().end());
    for (const Edge& e : h.edges()) CHECK(all.count(e) == 1);
    CHECK(spanner_stretch(g, h) == oracle_stretch(g, h));
  }
}

TEST_CASE("components and distances") {
  const Domain d({5});
  const PolicyGraph g(d, false, {make_edge(0, 1), make_edge(3, 4)});
  const auto comps = connected_components(g);
  REQUIRE(comps.size() == 3);
  CHECK(comps[0] == std::vector<std::size_t>{0, 1});
  CHECK(comps[1] == std::vector<std::size_t>{2});
  CHECK(comps[2] == std::vector<std::size_t>{3, 4});
  CHECK_FALSE(is_connected(g));

  const PolicyGraph line = build_distance_threshold_graph(d, 1, false);
  CHECK(is_connected(line));
  CHECK(graph_distance(line, 0, 4) == 4);
  CHECK(graph_distance(line, 2, 2) == 0);

  const PolicyGraph star = PolicyGraph(
      d, true, {make_edge(0, kBot), make_edge(1, kBot), make_edge(2, kBot),
                make_edge(3, kBot), make_edge(4, kBot)});
  CHECK(is_connected(star));
  CHECK(graph_distance(star, 0, 4) == 2);
  CHECK(graph_distance(star, 0, kBot) == 1);
}
