// Acceptance suite: one line per criterion, exit code = number of failures.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "blowfish/evaluation.hpp"
#include "blowfish/mechanisms.hpp"
#include "blowfish/transform.hpp"

using namespace blowfish;

namespace {

int failures = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

void run_criterion(int number, double time_limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome outcome;
  try {
    outcome = body();
  } catch (const std::exception& e) {
    outcome = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = elapsed <= time_limit_s;
  const bool pass = outcome.pass && in_time;
  if (!pass) ++failures;
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(2);
  line << "criterion " << number << ": " << (pass ? "PASS" : "FAIL") << " — "
       << outcome.detail << " (" << elapsed << "s";
  if (!in_time) line << ", over the " << time_limit_s << "s limit";
  line << ")";
  std::cout << line.str() << std::endl;
}

Workload random_workload(const Domain& d, std::size_t queries, std::mt19937_64& rng,
                         bool integer_coeffs = false) {
  std::uniform_real_distribution<double> real(-2.0, 2.0);
  std::uniform_int_distribution<int> integer(-3, 3);
  std::vector<Triplet> entries;
  for (std::size_t q = 0; q < queries; ++q)
    for (std::size_t c = 0; c < d.total(); ++c) {
      const double v = integer_coeffs ? double(integer(rng)) : real(rng);
      if (v != 0.0) entries.push_back({q, c, v});
    }
  return Workload{SparseMatrix::from_triplets(queries, d.total(), entries),
                  WorkloadKind::kCustom};
}

HistogramDB random_histogram(const Domain& d, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 9);
  std::vector<double> counts(d.total());
  for (double& v : counts) v = count(rng);
  return make_histogram(d, counts);
}

double max_abs_diff(const DenseVector& a, const DenseVector& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

PolicyGraph random_tree_with_bot(const Domain& domain, std::mt19937_64& rng) {
  const std::size_t k = domain.total();
  std::vector<Edge> edges = {make_edge(0, kBot)};
  for (std::size_t i = 1; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);  // i means bot
    const std::size_t t = pick(rng);
    edges.push_back(t == i ? make_edge(i, kBot) : make_edge(i, t));
  }
  return PolicyGraph(domain, true, edges);
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  std::mt19937_64 rng(101);
  struct Family {
    std::string name;
    std::function<PolicyGraph(std::mt19937_64&)> make;
  };
  auto pick_k = [](std::mt19937_64& r) { return 2 + r() % 31; };
  const std::vector<Family> families = {
      {"line",
       [&](std::mt19937_64& r) {
         return build_policy(Domain({pick_k(r)}), {"line", 1, false});
       }},
      {"theta2",
       [&](std::mt19937_64& r) {
         return build_policy(Domain({pick_k(r)}), {"theta", 2, false});
       }},
      {"theta4",
       [&](std::mt19937_64& r) {
         return build_policy(Domain({pick_k(r)}), {"theta", 4, false});
       }},
      {"grid",
       [&](std::mt19937_64& r) {
         const std::size_t rows = 2 + r() % 4, cols = 2 + r() % 4;
         return build_policy(Domain({rows, cols}), {"grid", 1, false});
       }},
      {"star",
       [&](std::mt19937_64& r) {
         return build_policy(Domain({pick_k(r)}), {"star", 1, false});
       }},
      {"complete",
       [&](std::mt19937_64& r) {
         return build_policy(Domain({2 + r() % 15}), {"complete", 1, false});
       }},
  };
  double worst = 0.0;
  for (const Family& family : families) {
    for (int pair = 0; pair < 200; ++pair) {
      const PolicyGraph g = family.make(rng);
      const Domain& d = g.domain();
      const Workload w = random_workload(d, 5, rng);
      const HistogramDB x = random_histogram(d, rng);
      const PreparedTransform prep = PreparedTransform::build(g, w);
      worst = std::max(worst, max_abs_diff(prep.answer_exact(x), evaluate(w, x)));
    }
  }
  std::ostringstream detail;
  detail << "translated answers match direct answers over 1200 random pairs, max |diff| "
         << worst;
  return {worst <= 1e-9, detail.str()};
}

Outcome criterion_2() {
  std::mt19937_64 rng(202);
  std::size_t compared = 0;
  bool all_equal = true;
  const std::vector<PolicySpec> specs = {
      {"line", 1, false}, {"theta", 3, false}, {"star", 1, false},
      {"complete", 1, false}, {"line", 1, true},
  };
  for (const PolicySpec& spec : specs) {
    for (std::size_t k : {2, 5, 9, 16}) {
      const Domain d({k});
      const PolicyGraph g = build_policy(d, spec);
      for (int trial = 0; trial < 10; ++trial) {
        // integer coefficients keep both routes in exact arithmetic
        const Workload w = random_workload(d, 4, rng, true);
        all_equal &= policy_sensitivity(w, g) == brute_force_sensitivity(w, g);
        ++compared;
      }
    }
  }
  {
    const Domain d({8, 8});
    const PolicyGraph g = build_policy(d, {"grid", 1, false});
    for (int trial = 0; trial < 10; ++trial) {
      const Workload w = random_workload(d, 4, rng, true);
      all_equal &= policy_sensitivity(w, g) == brute_force_sensitivity(w, g);
      ++compared;
    }
  }
  bool closed_forms = true;
  for (std::size_t k : {4, 16, 64}) {
    const Domain d({k});
    const Workload cum = make_workload(WorkloadKind::kCumulative, d);
    const PolicyGraph star = build_policy(d, {"star", 1, false});
    const PolicyGraph line = build_policy(d, {"line", 1, false});
    closed_forms &= policy_sensitivity(cum, star) == double(k);
    closed_forms &= brute_force_sensitivity(cum, star) == double(k);
    closed_forms &= policy_sensitivity(cum, line) == 1.0;
    closed_forms &= brute_force_sensitivity(cum, line) == 1.0;
    compared += 2;
  }
  std::ostringstream detail;
  detail << "graph and brute-force sensitivity agree exactly on " << compared
         << " cases, cumulative closed forms " << (closed_forms ? "hold" : "broken");
  return {all_equal && closed_forms, detail.str()};
}

Outcome criterion_3() {
  const std::size_t samples = 1000000;
  const std::vector<std::pair<double, double>> configs = {{1, 1}, {2, 1}, {1, 0.1}};
  const Domain d({1});
  const Workload w = make_workload(WorkloadKind::kIdentity, d);
  const HistogramDB x = make_histogram(d, {5});
  double worst_rel = 0.0;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const auto [delta, epsilon] = configs[c];
    double sq = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const NoisyAnswer ans =
          laplace_mechanism(w, x, epsilon, delta, derive_seed(303 + c, s));
      const double err = ans.values[0] - 5.0;
      sq += err * err;
    }
    const double mse = sq / samples;
    const double expected = 2.0 * delta * delta / (epsilon * epsilon);
    worst_rel = std::max(worst_rel, std::abs(mse - expected) / expected);
  }
  std::ostringstream detail;
  detail << "per-query mse tracks 2*delta^2/eps^2 over three calibrations, worst rel err "
         << worst_rel;
  return {worst_rel <= 0.03, detail.str()};
}

Outcome criterion_4() {
  const std::size_t k = 1024, runs = 100000;
  const Domain d({k});
  const Workload w = workload_from_ranges(d, {{{200}, {700}}});
  std::vector<double> counts(k, 1.0);
  const HistogramDB x = make_histogram(d, counts);
  const auto mech = prepare_mechanism({"bf-line", 1, 2, {}}, w, x);
  const double exact = evaluate(w, x)[0];
  double sq = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    const NoisyAnswer ans = mech->answer(1.0, derive_seed(404, r));
    const double err = ans.values[0] - exact;
    sq += err * err;
  }
  const double mse = sq / runs;
  std::ostringstream detail;
  detail << "interior range mse " << mse << " vs 4/eps^2 = 4";
  return {std::abs(mse - 4.0) / 4.0 <= 0.05, detail.str()};
}

Outcome criterion_5() {
  struct Setup {
    MechanismConfig config;
    Domain domain;
  };
  const std::vector<Setup> setups = {
      {{"bf-line", 1, 2, {}}, Domain({16})},
      {{"bf-theta1d", 3, 2, {}}, Domain({10})},
      {{"bf-grid", 1, 2, {}}, Domain({5, 5})},
      {{"bf-thetamd", 4, 2, {}}, Domain({4, 4})},
  };
  std::mt19937_64 rng(505);
  double worst = 0.0;
  std::size_t queries = 0;
  for (const Setup& setup : setups) {
    const Workload w = make_workload(WorkloadKind::kAllRanges, setup.domain);
    const HistogramDB x = random_histogram(setup.domain, rng);
    const auto mech = prepare_mechanism(setup.config, w, x);
    const NoisyAnswer ans = mech->answer(1.0, 1, true);
    worst = std::max(worst, max_abs_diff(ans.values, evaluate(w, x)));
    queries += w.matrix.rows();
  }
  std::ostringstream detail;
  detail << "all four mechanisms noiselessly exact on " << queries
         << " range queries, max |diff| " << worst;
  return {worst == 0.0, detail.str()};
}

Outcome criterion_6() {
  std::size_t worst = 0;
  bool trees = true;
  for (std::size_t theta : {2, 3, 4, 8}) {
    for (std::size_t k = 2; k <= 64; ++k) {
      const PolicyGraph g = build_distance_threshold_graph(Domain({k}), theta, false);
      const PolicyGraph h = build_theta_spanner_1d(k, theta);
      trees &= h.edges().size() + 1 == h.vertex_count() && is_connected(h);
      worst = std::max(worst, spanner_stretch(g, h));
    }
  }
  std::ostringstream detail;
  detail << "1-d spanners are spanning trees with stretch <= " << worst
         << " for k <= 64, theta in {2,3,4,8}";
  return {worst <= 3 && trees, detail.str()};
}

Outcome criterion_7() {
  std::mt19937_64 rng(707);
  std::vector<PolicyGraph> trees;
  for (std::size_t k : {2, 7, 32}) {
    const Domain d({k});
    std::vector<Edge> star, line;
    for (std::size_t i = 0; i < k; ++i) star.push_back(make_edge(i, kBot));
    for (std::size_t i = 0; i + 1 < k; ++i) line.push_back(make_edge(i, i + 1));
    line.push_back(make_edge(k - 1, kBot));
    trees.push_back(PolicyGraph(d, true, star));
    trees.push_back(PolicyGraph(d, true, line));
  }
  for (int trial = 0; trial < 30; ++trial)
    trees.push_back(random_tree_with_bot(Domain({2 + rng() % 31}), rng));

  std::size_t checked = 0;
  for (const PolicyGraph& g : trees) {
    const TransformPair t = build_transform(g);
    const std::size_t k = g.cell_count();
    for (std::size_t j = 0; j < t.edge_order.size(); ++j) {
      const Edge& e = t.edge_order[j];
      DenseVector diff(k, 0.0);
      diff[e.a] += 1.0;
      if (e.b != kBot) diff[e.b] -= 1.0;

      // forward: the neighbor difference lands on exactly one coordinate
      const DenseVector image = matmul(t.p_g_inv, diff);
      std::size_t support = 0;
      bool unit = true;
      for (std::size_t i = 0; i < image.size(); ++i) {
        if (image[i] == 0.0) continue;
        ++support;
        unit &= std::abs(image[i]) == 1.0 && i == j;
      }
      if (!(support == 1 && unit)) return {false, "difference did not map to a unit vector"};

      // converse: the basis vector maps back to the same neighbor difference
      DenseVector basis(t.edge_order.size(), 0.0);
      basis[j] = 1.0;
      if (matmul(t.p_g, basis) != diff)
        return {false, "basis vector did not map back to the neighbor difference"};
      ++checked;
    }
  }
  std::ostringstream detail;
  detail << "tree translations are unit-vector bijections across " << trees.size()
         << " trees, " << checked << " edges";
  return {true, detail.str()};
}

Outcome criterion_8() {
  std::mt19937_64 rng(808);
  std::size_t checked = 0;
  for (std::size_t k = 2; k <= 16; ++k) {
    const Domain d({k});
    const PolicyGraph g = build_policy(d, {"complete", 1, false});
    const Workload w = random_workload(d, 5, rng, true);
    const std::size_t v = k - 1;
    const CaseIIResult res = reduce_without_bot(g, w, v);
    for (int trial = 0; trial < 100; ++trial) {
      const HistogramDB x = random_histogram(d, rng);
      DenseVector reduced;
      for (std::size_t i = 0; i < k; ++i)
        if (i != v) reduced.push_back(x.counts[i]);
      const DenseVector direct = evaluate(w, x);
      DenseVector rebuilt = matmul(res.workload.matrix, reduced);
      for (std::size_t q = 0; q < rebuilt.size(); ++q)
        rebuilt[q] += x.total * res.reduction.correction_coeffs[q];
      if (rebuilt != direct) return {false, "reconstruction differed"};
      ++checked;
    }
  }
  std::ostringstream detail;
  detail << "vertex-replacement reconstruction is bitwise exact on " << checked
         << " integer databases";
  return {true, detail.str()};
}

Outcome criterion_9() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> noise(-3.0, 3.0);

  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 64;
    DenseVector truth(n);
    double acc = 0.0;
    for (double& v : truth) v = (acc += double(rng() % 4));
    DenseVector noisy(n);
    for (std::size_t i = 0; i < n; ++i) noisy[i] = truth[i] + noise(rng);
    const DenseVector fixed = isotonic_postprocess(noisy);

    for (std::size_t i = 0; i + 1 < n; ++i)
      if (fixed[i] > fixed[i + 1]) return {false, "output not nondecreasing"};
    if (isotonic_postprocess(fixed) != fixed) return {false, "not idempotent"};
    double d_fixed = 0.0, d_noisy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d_fixed += (fixed[i] - truth[i]) * (fixed[i] - truth[i]);
      d_noisy += (noisy[i] - truth[i]) * (noisy[i] - truth[i]);
    }
    if (d_fixed > d_noisy + 1e-12) return {false, "projection moved away from the truth"};
  }

  // quadratic-minimization oracle on short vectors
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    DenseVector x(n);
    for (double& v : x) v = val(rng);
    double best_cost = 0.0;
    DenseVector best;
    for (std::size_t mask = 0; mask < (std::size_t(1) << (n - 1)); ++mask) {
      std::vector<std::size_t> cuts = {0};
      for (std::size_t i = 0; i + 1 < n; ++i)
        if (mask & (std::size_t(1) << i)) cuts.push_back(i + 1);
      cuts.push_back(n);
      DenseVector fit(n);
      double cost = 0.0, prev = -1e18;
      bool feasible = true;
      for (std::size_t b = 0; b + 1 < cuts.size() && feasible; ++b) {
        double mean = 0.0;
        for (std::size_t i = cuts[b]; i < cuts[b + 1]; ++i) mean += x[i];
        mean /= double(cuts[b + 1] - cuts[b]);
        feasible = mean >= prev;
        prev = mean;
        for (std::size_t i = cuts[b]; i < cuts[b + 1]; ++i) {
          fit[i] = mean;
          cost += (x[i] - mean) * (x[i] - mean);
        }
      }
      if (!feasible) continue;
      if (best.empty() || cost < best_cost) {
        best_cost = cost;
        best = fit;
      }
    }
    worst = std::max(worst, max_abs_diff(isotonic_postprocess(x), best));
  }
  std::ostringstream detail;
  detail << "projection properties hold over 1000 trials, oracle max |diff| " << worst;
  return {worst < 1e-12, detail.str()};
}

Outcome criterion_10() {
  const double epsilon = 1.0, delta = 0.001;
  const std::size_t runs = 10000;
  std::ostringstream detail;
  bool pass = true;
  for (std::size_t k : {8, 16}) {
    const Domain d({k});
    const Workload cum = make_workload(WorkloadKind::kCumulative, d);
    const PolicyGraph line = build_policy(d, {"line", 1, false});
    const PreparedTransform prep = PreparedTransform::build(line, cum);
    const Workload w_g{prep.components()[0].transformed.matrix, WorkloadKind::kCustom};
    const double bound = svd_lower_bound(w_g, epsilon, delta);

    const std::size_t cols = w_g.matrix.cols();
    std::vector<Triplet> eye;
    for (std::size_t i = 0; i < cols; ++i) eye.push_back({i, i, 1.0});
    Strategy identity;
    identity.matrix = SparseMatrix::from_triplets(cols, cols, eye);
    identity.pinv = identity.matrix;
    attach_workload(identity, w_g.matrix);

    std::vector<double> counts(cols);
    for (std::size_t i = 0; i < cols; ++i) counts[i] = double(i % 5);
    const HistogramDB x_g = make_histogram(Domain({cols}), counts);
    const DenseVector exact = evaluate(w_g, x_g);

    double sum = 0.0, sumsq = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      const NoisyAnswer ans =
          gaussian_matrix_mechanism(w_g, identity, x_g, epsilon, delta, derive_seed(1010, r));
      double total = 0.0;
      for (std::size_t q = 0; q < exact.size(); ++q) {
        const double err = ans.values[q] - exact[q];
        total += err * err;
      }
      sum += total;
      sumsq += total * total;
    }
    const double mean = sum / runs;
    const double se = std::sqrt((sumsq / runs - mean * mean) / runs);
    pass &= bound <= mean + 3.0 * se;
    detail << "k=" << k << ": bound " << bound << " vs empirical " << mean << " (se " << se
           << ")  ";
  }
  return {pass, detail.str()};
}

Outcome criterion_11() {
  const Domain d({4096});
  const HistogramDB x = synth_histogram(d, 100000, 0.9, 1111);
  const Workload w = sample_range_workload(d, 200, 1112).first;
  const double epsilon = 0.1;
  const std::size_t runs = 100;

  const ErrorStats line = monte_carlo_error({"bf-line", 1, 2, {}}, w, x, epsilon, runs, 7);
  const ErrorStats wavelet =
      monte_carlo_error({"mm-wavelet", 1, 2, {"star"}}, w, x, epsilon, runs, 7);
  const double ratio = wavelet.mean_per_query_mse / line.mean_per_query_mse;
  std::ostringstream detail;
  detail << "line mechanism mse " << line.mean_per_query_mse << " vs star baseline "
         << wavelet.mean_per_query_mse << ", ratio " << ratio;
  return {ratio >= 10.0, detail.str()};
}

}  // namespace

int main() {
  run_criterion(1, 10, criterion_1);
  run_criterion(2, 5, criterion_2);
  run_criterion(3, 30, criterion_3);
  run_criterion(4, 60, criterion_4);
  run_criterion(5, 30, criterion_5);
  run_criterion(6, 10, criterion_6);
  run_criterion(7, 5, criterion_7);
  run_criterion(8, 5, criterion_8);
  run_criterion(9, 10, criterion_9);
  run_criterion(10, 60, criterion_10);
  run_criterion(11, 120, criterion_11);
  return failures;
}
