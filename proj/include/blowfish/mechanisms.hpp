#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "blowfish/linalg.hpp"
#include "blowfish/policy_graph.hpp"
#include "blowfish/transform.hpp"
#include "blowfish/workload.hpp"

namespace blowfish {

// Inverse-CDF Laplace sampler:  u ~ U(-1/2, 1/2),
// x = -scale * sign(u) * ln(1 - 2|u|).  Deterministic for a fixed seed.
class LaplaceSampler {
 public:
  LaplaceSampler(double scale, std::uint64_t seed);

  double scale() const { return scale_; }
  double sample();
  DenseVector sample_vector(std::size_t n);

 private:
  double scale_;
  std::mt19937_64 engine_;
};

// Stable stream splitter for per-run and per-partition sub-seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Unit-variance Gaussian deviates (Box-Muller over the same engine family),
// used by the (epsilon, delta)-calibrated mechanism below.
class GaussianSampler {
 public:
  GaussianSampler(double sigma, std::uint64_t seed);
  double sample();
  DenseVector sample_vector(std::size_t n);

 private:
  double sigma_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// Observation matrix with its L1 sensitivity and a left pseudoinverse
// (pinv * matrix = I), so any query row reconstructs as row * pinv * y.
// decoder caches W * pinv once a workload is attached.
struct Strategy {
  SparseMatrix matrix;
  double sensitivity = 1.0;
  SparseMatrix pinv;
  std::optional<SparseMatrix> decoder;
};

// All branching-ary interval sums over [0, k), padded to the next power of
// branching.  Sensitivity is tree height + 1.
Strategy hierarchical_strategy(std::size_t k, std::size_t branching = 2);

// Unscaled Haar basis over [0, k) padded to the next power of two; entries
// are +-1 and the pseudoinverse is analytic.  Sensitivity 1 + log2(padded k).
Strategy wavelet_strategy(std::size_t k);

// Tensor (Kronecker) product of per-dimension Haar strategies, row-major.
Strategy tensor_wavelet_strategy(const std::vector<std::size_t>& dims);

// Padded length used by wavelet_strategy for a given k.
std::size_t wavelet_padded_size(std::size_t k);

// Builds W * pinv and verifies max |W pinv A - W| <= 1e-6 first.
void attach_workload(Strategy& strategy, const SparseMatrix& w);

// Branching-ary node intervals that tile [lo, hi] greedily from the top of
// the tree; returned as inclusive [start, end] pairs.
std::vector<std::pair<std::size_t, std::size_t>> dyadic_cover(std::size_t lo,
                                                              std::size_t hi,
                                                              std::size_t k,
                                                              std::size_t branching);

struct NoisyAnswer {
  DenseVector values;
  double epsilon = 0.0;
  std::string mechanism_id;
  std::uint64_t seed = 0;
  std::size_t stretch_factor = 1;
};

// Budget bookkeeping: which canonical edges a noisy release touched and at
// what budget.  Partitions labeled disjoint are checked by tests.
struct BudgetEntry {
  std::string partition;
  std::vector<std::size_t> edge_indices;
  double epsilon = 0.0;
};

// Hook for an externally supplied private estimator of a nonnegative vector
// (a drop-in for the per-entry Laplace release in the line mechanism).  No
// implementation ships with the library.
using PrivateEstimator =
    std::function<DenseVector(const DenseVector& data, double epsilon, std::uint64_t seed)>;

NoisyAnswer laplace_mechanism(const Workload& w, const HistogramDB& x, double epsilon,
                              double sensitivity, std::uint64_t seed,
                              bool noiseless = false);

// W x + W A+ Lap(sens(A)/epsilon); verifies the strategy reconstructs W
// before any noise is drawn.
NoisyAnswer matrix_mechanism(const Workload& w, Strategy& strategy, const HistogramDB& x,
                             double epsilon, std::uint64_t seed, bool noiseless = false);

// (epsilon, delta) variant with Gaussian noise at sigma =
// maxcol_l2(A) * sqrt(2 ln(2/delta)) / epsilon, the calibration the spectral
// lower bound is stated against.
NoisyAnswer gaussian_matrix_mechanism(const Workload& w, Strategy& strategy,
                                      const HistogramDB& x, double epsilon, double delta,
                                      std::uint64_t seed, bool noiseless = false);

// L2 projection onto nondecreasing vectors (pool adjacent violators).
DenseVector isotonic_postprocess(const DenseVector& noisy);

// Maximal contiguous runs, in canonical edge order, of the edges with exactly
// one endpoint inside the support of a 0/1 query row.  Their union is the
// support of the translated query.
struct EdgeRun {
  std::size_t begin = 0;  // canonical edge indices [begin, end)
  std::size_t end = 0;
};
std::vector<EdgeRun> decompose_transformed_query(const DenseVector& q, const PolicyGraph& g);

// Named policy families the mechanisms and CLI accept.
//   line | grid  -> G^1 over the domain (1-d path / lattice)
//   theta        -> G^theta
//   star         -> bot connected to every cell
//   complete     -> all cell pairs
//   theta-spanner-> H^theta (tree for 1-d, block lattice for grids)
// with_bot additionally attaches bot to every cell of a bot-free family.
struct PolicySpec {
  std::string family = "star";
  std::size_t theta = 1;
  bool with_bot = false;
};

PolicyGraph build_policy(const Domain& domain, const PolicySpec& spec);

struct MechanismConfig {
  std::string id;  // laplace | mm-hier | mm-wavelet | bf-line | bf-grid |
                   // bf-theta1d | bf-thetamd
  std::size_t theta = 1;
  std::size_t branching = 2;
  PolicySpec policy{};
};

// A mechanism prepared once for a fixed (workload, database): the exact
// pipeline output and the noise combiners are cached, so repeated draws only
// sample noise.  answer() is const and deterministic per seed.
class PreparedMechanism {
 public:
  virtual ~PreparedMechanism() = default;
  virtual NoisyAnswer answer(double epsilon, std::uint64_t seed,
                             bool noiseless = false) const = 0;
  virtual std::size_t stretch() const { return 1; }
  virtual std::vector<BudgetEntry> budget(double /*epsilon*/) const { return {}; }
  virtual const std::string& id() const = 0;
};

std::unique_ptr<PreparedMechanism> prepare_mechanism(const MechanismConfig& config,
                                                     const Workload& w,
                                                     const HistogramDB& x);

// Single-shot front doors over the prepared forms.
NoisyAnswer blowfish_1d_range_line(const HistogramDB& x, double epsilon,
                                   const Workload& queries, std::uint64_t seed,
                                   bool noiseless = false,
                                   PrivateEstimator estimator = nullptr);
NoisyAnswer blowfish_multid_range_grid(const HistogramDB& x, double epsilon,
                                       const Workload& queries, std::uint64_t seed,
                                       bool noiseless = false);
NoisyAnswer blowfish_1d_range_theta(const HistogramDB& x, std::size_t theta,
                                    double epsilon, const Workload& queries,
                                    std::uint64_t seed, bool noiseless = false);
NoisyAnswer blowfish_multid_range_theta(const HistogramDB& x, std::size_t theta,
                                        double epsilon, const Workload& queries,
                                        std::uint64_t seed, bool noiseless = false);

}  // namespace blowfish
