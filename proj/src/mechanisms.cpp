#include "blowfish/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>

#include "blowfish/transform.hpp"

namespace blowfish {
namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);
constexpr double kTwoPow53 = 9007199254740992.0;

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("epsilon must be positive, got " +
                                std::to_string(epsilon));
  }
}

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1), got " +
                                std::to_string(delta));
  }
}

double max_column_l2(const SparseMatrix& m) {
  std::vector<double> sq(m.cols(), 0.0);
  for (const Triplet& t : m.entries()) sq[t.col] += t.value * t.value;
  double worst = 0.0;
  for (double v : sq) worst = std::max(worst, v);
  return std::sqrt(worst);
}

double max_abs_diff(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> merged(a.entries().begin(), a.entries().end());
  for (const Triplet& t : b.entries()) merged.push_back({t.row, t.col, -t.value});
  const SparseMatrix diff = SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(merged));
  double worst = 0.0;
  for (const Triplet& t : diff.entries()) worst = std::max(worst, std::abs(t.value));
  return worst;
}

std::size_t padded_size(std::size_t k, std::size_t branching) {
  std::size_t p = 1;
  while (p < k) p *= branching;
  return p;
}

void add_vector(DenseVector& into, const DenseVector& v) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += v[i];
}

}  // namespace

LaplaceSampler::LaplaceSampler(double scale, std::uint64_t seed)
    : scale_(scale), engine_(seed) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("Laplace scale must be a finite nonnegative number");
  }
}

double LaplaceSampler::sample() {
  const double u =
      (static_cast<double>(engine_() >> 11) + 0.5) / kTwoPow53 - 0.5;
  const double magnitude = -std::log1p(-2.0 * std::abs(u));
  return u < 0.0 ? -scale_ * magnitude : scale_ * magnitude;
}

DenseVector LaplaceSampler::sample_vector(std::size_t n) {
  DenseVector out(n);
  for (double& v : out) v = sample();
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

GaussianSampler::GaussianSampler(double sigma, std::uint64_t seed)
    : sigma_(sigma), engine_(seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("Gaussian sigma must be a finite nonnegative number");
  }
}

double GaussianSampler::sample() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) / kTwoPow53;
  const double u2 = static_cast<double>(engine_() >> 11) / kTwoPow53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi_v<double> * u2;
  spare_ = sigma_ * r * std::sin(angle);
  return sigma_ * r * std::cos(angle);
}

DenseVector GaussianSampler::sample_vector(std::size_t n) {
  DenseVector out(n);
  for (double& v : out) v = sample();
  return out;
}

Strategy hierarchical_strategy(std::size_t k, std::size_t branching) {
  if (k == 0) throw std::invalid_argument("strategy domain must be nonempty");
  if (branching < 2) throw std::invalid_argument("branching must be at least 2");
  const std::size_t padded = padded_size(k, branching);

  std::vector<Triplet> entries;
  std::size_t row = 0;
  std::size_t levels = 0;
  for (std::size_t len = padded;; len /= branching) {
    ++levels;
    for (std::size_t start = 0; start < padded; start += len) {
      if (start >= k) continue;
      const std::size_t end = std::min(start + len, k);
      for (std::size_t c = start; c < end; ++c) entries.push_back({row, c, 1.0});
      ++row;
    }
    if (len == 1) break;
  }

  Strategy s;
  s.matrix = SparseMatrix::from_triplets(row, k, std::move(entries));
  s.sensitivity = static_cast<double>(levels);
  s.pinv = right_inverse(s.matrix.transposed()).transposed();
  return s;
}

std::size_t wavelet_padded_size(std::size_t k) { return padded_size(k, 2); }

Strategy wavelet_strategy(std::size_t k) {
  if (k == 0) throw std::invalid_argument("strategy domain must be nonempty");
  const std::size_t padded = wavelet_padded_size(k);

  // Unscaled Haar rows over the padded domain, truncated to the first k
  // columns.  The truncation keeps the analytic inverse: the pseudoinverse is
  // the first k rows of the scaled transpose, so pinv * matrix = I exactly.
  std::vector<Triplet> rows;
  std::vector<Triplet> pinv;
  auto emit = [&](std::size_t r, std::size_t c, double v, double norm_sq) {
    if (c >= k) return;
    rows.push_back({r, c, v});
    pinv.push_back({c, r, v / norm_sq});
  };
  std::size_t row = 0;
  std::size_t levels = 0;
  for (std::size_t c = 0; c < padded; ++c) emit(row, c, 1.0, static_cast<double>(padded));
  ++row;
  for (std::size_t len = padded; len >= 2; len /= 2) {
    ++levels;
    for (std::size_t start = 0; start < padded; start += len) {
      const double norm_sq = static_cast<double>(len);
      for (std::size_t c = start; c < start + len / 2; ++c) emit(row, c, 1.0, norm_sq);
      for (std::size_t c = start + len / 2; c < start + len; ++c) emit(row, c, -1.0, norm_sq);
      ++row;
    }
  }

  Strategy s;
  s.matrix = SparseMatrix::from_triplets(row, k, std::move(rows));
  s.sensitivity = static_cast<double>(1 + levels);
  s.pinv = SparseMatrix::from_triplets(k, row, std::move(pinv));
  return s;
}

Strategy tensor_wavelet_strategy(const std::vector<std::size_t>& dims) {
  if (dims.empty()) throw std::invalid_argument("tensor strategy needs dimensions");
  Strategy s = wavelet_strategy(dims[0]);
  for (std::size_t i = 1; i < dims.size(); ++i) {
    Strategy next = wavelet_strategy(dims[i]);
    s.matrix = kron(s.matrix, next.matrix);
    s.pinv = kron(s.pinv, next.pinv);
    s.sensitivity *= next.sensitivity;
  }
  return s;
}

void attach_workload(Strategy& strategy, const SparseMatrix& w) {
  if (w.cols() != strategy.matrix.cols()) {
    throw std::invalid_argument("workload has " + std::to_string(w.cols()) +
                                " columns but the strategy covers " +
                                std::to_string(strategy.matrix.cols()));
  }
  SparseMatrix wp = matmul(SparseMatrix(w), strategy.pinv);
  const double defect = max_abs_diff(matmul(wp, strategy.matrix), w);
  if (defect > 1e-6) {
    throw std::runtime_error(
        "strategy cannot reconstruct the workload (max deviation " +
        std::to_string(defect) + ")");
  }
  strategy.decoder = std::move(wp);
}

std::vector<std::pair<std::size_t, std::size_t>> dyadic_cover(std::size_t lo,
                                                              std::size_t hi,
                                                              std::size_t k,
                                                              std::size_t branching) {
  if (branching < 2) throw std::invalid_argument("branching must be at least 2");
  if (lo > hi || hi >= k) {
    throw std::invalid_argument("interval [" + std::to_string(lo) + "," +
                                std::to_string(hi) + "] outside [0," +
                                std::to_string(k) + ")");
  }
  std::vector<std::pair<std::size_t, std::size_t>> cover;
  auto walk = [&](auto&& self, std::size_t start, std::size_t len) -> void {
    if (start > hi || start + len <= lo) return;
    if (lo <= start && start + len - 1 <= hi) {
      cover.push_back({start, start + len - 1});
      return;
    }
    const std::size_t child = len / branching;
    for (std::size_t c = 0; c < branching; ++c) self(self, start + c * child, child);
  };
  walk(walk, 0, padded_size(k, branching));
  return cover;
}

NoisyAnswer laplace_mechanism(const Workload& w, const HistogramDB& x, double epsilon,
                              double sensitivity, std::uint64_t seed, bool noiseless) {
  check_epsilon(epsilon);
  if (!(sensitivity >= 0.0)) {
    throw std::invalid_argument("sensitivity must be nonnegative");
  }
  NoisyAnswer answer;
  answer.values = evaluate(w, x);
  answer.epsilon = epsilon;
  answer.mechanism_id = "laplace";
  answer.seed = seed;
  if (!noiseless) {
    LaplaceSampler noise(sensitivity / epsilon, seed);
    for (double& v : answer.values) v += noise.sample();
  }
  return answer;
}

NoisyAnswer matrix_mechanism(const Workload& w, Strategy& strategy, const HistogramDB& x,
                             double epsilon, std::uint64_t seed, bool noiseless) {
  check_epsilon(epsilon);
  if (!strategy.decoder) attach_workload(strategy, w.matrix);
  NoisyAnswer answer;
  answer.values = evaluate(w, x);
  answer.epsilon = epsilon;
  answer.mechanism_id = "matrix-mechanism";
  answer.seed = seed;
  if (!noiseless) {
    LaplaceSampler noise(strategy.sensitivity / epsilon, seed);
    add_vector(answer.values,
               matmul(*strategy.decoder, noise.sample_vector(strategy.matrix.rows())));
  }
  return answer;
}

NoisyAnswer gaussian_matrix_mechanism(const Workload& w, Strategy& strategy,
                                      const HistogramDB& x, double epsilon, double delta,
                                      std::uint64_t seed, bool noiseless) {
  check_epsilon(epsilon);
  check_delta(delta);
  if (!strategy.decoder) attach_workload(strategy, w.matrix);
  NoisyAnswer answer;
  answer.values = evaluate(w, x);
  answer.epsilon = epsilon;
  answer.mechanism_id = "mm-gaussian";
  answer.seed = seed;
  if (!noiseless) {
    const double sigma =
        max_column_l2(strategy.matrix) * std::sqrt(2.0 * std::log(2.0 / delta)) / epsilon;
    GaussianSampler noise(sigma, seed);
    add_vector(answer.values,
               matmul(*strategy.decoder, noise.sample_vector(strategy.matrix.rows())));
  }
  return answer;
}

DenseVector isotonic_postprocess(const DenseVector& noisy) {
  if (!all_finite(noisy)) {
    throw std::invalid_argument("isotonic projection needs finite input");
  }
  struct Block {
    double sum;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(noisy.size());
  for (double v : noisy) {
    blocks.push_back({v, 1});
    while (blocks.size() >= 2) {
      const Block& prev = blocks[blocks.size() - 2];
      const Block& cur = blocks.back();
      if (prev.sum * static_cast<double>(cur.count) <=
          cur.sum * static_cast<double>(prev.count)) {
        break;
      }
      Block merged{prev.sum + cur.sum, prev.count + cur.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  DenseVector out;
  out.reserve(noisy.size());
  for (const Block& b : blocks) {
    const double mean = b.sum / static_cast<double>(b.count);
    out.insert(out.end(), b.count, mean);
  }
  return out;
}

std::vector<EdgeRun> decompose_transformed_query(const DenseVector& q,
                                                 const PolicyGraph& g) {
  if (q.size() != g.cell_count()) {
    throw std::invalid_argument("query row has " + std::to_string(q.size()) +
                                " entries but the domain has " +
                                std::to_string(g.cell_count()) + " cells");
  }
  std::vector<bool> inside(q.size());
  for (std::size_t c = 0; c < q.size(); ++c) {
    if (std::abs(q[c]) < 1e-9) {
      inside[c] = false;
    } else if (std::abs(q[c] - 1.0) < 1e-9) {
      inside[c] = true;
    } else {
      throw std::invalid_argument("counting query expected: entry " + std::to_string(c) +
                                  " is " + std::to_string(q[c]));
    }
  }
  std::vector<EdgeRun> runs;
  const auto& edges = g.edges();
  for (std::size_t j = 0; j < edges.size(); ++j) {
    const bool a_in = inside[edges[j].a];
    const bool b_in = edges[j].b != kBot && inside[edges[j].b];
    if (a_in == b_in) continue;
    if (!runs.empty() && runs.back().end == j) {
      ++runs.back().end;
    } else {
      runs.push_back({j, j + 1});
    }
  }
  return runs;
}

PolicyGraph build_policy(const Domain& domain, const PolicySpec& spec) {
  const std::size_t k = domain.total();
  if (spec.family == "line") {
    if (domain.ndims() != 1) {
      throw std::invalid_argument("line policy needs a 1-d domain");
    }
    return build_distance_threshold_graph(domain, 1, spec.with_bot);
  }
  if (spec.family == "grid") {
    return build_distance_threshold_graph(domain, 1, spec.with_bot);
  }
  if (spec.family == "theta") {
    return build_distance_threshold_graph(domain, spec.theta, spec.with_bot);
  }
  if (spec.family == "star") {
    std::vector<Edge> edges;
    edges.reserve(k);
    for (std::size_t c = 0; c < k; ++c) edges.push_back(make_edge(c, kBot));
    return PolicyGraph(domain, true, std::move(edges));
  }
  if (spec.family == "complete") {
    constexpr std::size_t kMaxComplete = 5000;
    if (k > kMaxComplete) {
      throw std::invalid_argument("complete policy is capped at " +
                                  std::to_string(kMaxComplete) + " cells");
    }
    std::vector<Edge> edges;
    edges.reserve(k * (k - 1) / 2 + (spec.with_bot ? k : 0));
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = u + 1; v < k; ++v) edges.push_back(make_edge(u, v));
      if (spec.with_bot) edges.push_back(make_edge(u, kBot));
    }
    return PolicyGraph(domain, spec.with_bot, std::move(edges));
  }
  if (spec.family == "theta-spanner") {
    PolicyGraph h = domain.ndims() == 1 ? build_theta_spanner_1d(k, spec.theta)
                                        : build_theta_spanner_grid(domain, spec.theta);
    if (!spec.with_bot) return h;
    std::vector<Edge> edges = h.edges();
    for (std::size_t c = 0; c < k; ++c) edges.push_back(make_edge(c, kBot));
    return PolicyGraph(domain, true, std::move(edges));
  }
  throw std::invalid_argument(
      "unknown policy family \"" + spec.family +
      "\" (expected line|grid|theta|star|complete|theta-spanner)");
}

namespace {

// Per-row inclusive boxes of a 0/1 range workload; empty optional for an
// all-zero row.
std::vector<std::optional<RangeQuery>> require_box_rows(const Workload& w,
                                                        const Domain& domain,
                                                        const std::string& mechanism) {
  const std::size_t d = domain.ndims();
  std::vector<std::optional<RangeQuery>> boxes(w.matrix.rows());
  const auto& offsets = w.matrix.row_offsets();
  const auto& entries = w.matrix.entries();
  for (std::size_t r = 0; r < w.matrix.rows(); ++r) {
    if (offsets[r] == offsets[r + 1]) continue;
    RangeQuery box;
    box.lo.assign(d, 0);
    box.hi.assign(d, 0);
    std::size_t count = 0;
    for (std::size_t e = offsets[r]; e < offsets[r + 1]; ++e) {
      if (std::abs(entries[e].value - 1.0) > 1e-9) {
        throw std::invalid_argument(mechanism + " needs 0/1 range queries; row " +
                                    std::to_string(r) + " has coefficient " +
                                    std::to_string(entries[e].value));
      }
      const std::vector<std::size_t> coords = domain.coords_of(entries[e].col);
      for (std::size_t i = 0; i < d; ++i) {
        if (count == 0) {
          box.lo[i] = box.hi[i] = coords[i];
        } else {
          box.lo[i] = std::min(box.lo[i], coords[i]);
          box.hi[i] = std::max(box.hi[i], coords[i]);
        }
      }
      ++count;
    }
    std::size_t volume = 1;
    for (std::size_t i = 0; i < d; ++i) volume *= box.hi[i] - box.lo[i] + 1;
    if (volume != count) {
      throw std::invalid_argument(mechanism + " needs axis-aligned range queries; row " +
                                  std::to_string(r) + " is not a full box");
    }
    boxes[r] = std::move(box);
  }
  return boxes;
}

std::vector<std::size_t> box_strides(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * shape[i];
  }
  return strides;
}

// Visits an inclusive sub-box of a row-major box, yielding the row-major
// position within the enclosing box and the current coordinates.
template <typename Fn>
void for_subbox(const std::vector<std::size_t>& shape,
                const std::vector<std::size_t>& lo, const std::vector<std::size_t>& hi,
                Fn&& fn) {
  const std::size_t d = shape.size();
  for (std::size_t i = 0; i < d; ++i) {
    if (lo[i] > hi[i] || hi[i] >= shape[i]) return;
  }
  const std::vector<std::size_t> strides = box_strides(shape);
  std::vector<std::size_t> coords = lo;
  while (true) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < d; ++i) pos += coords[i] * strides[i];
    fn(pos, coords);
    std::size_t dim = d;
    bool done = true;
    while (dim-- > 0) {
      if (++coords[dim] <= hi[dim]) {
        done = false;
        break;
      }
      coords[dim] = lo[dim];
      if (dim == 0) break;
    }
    if (done) break;
  }
}

// One disjoint noise release: a strategy's rows over a slice of the
// transformed database, its decoder into query space, and the budget share.
struct NoisePart {
  std::string label;
  std::vector<std::size_t> edges;  // canonical edge indices of the slice
  double budget_share = 1.0;       // partition runs at epsilon * budget_share
  double sensitivity = 1.0;
  std::size_t draw_count = 0;
  SparseMatrix decoder;  // query_count x draw_count
};

class PartitionedMechanism : public PreparedMechanism {
 public:
  NoisyAnswer answer(double epsilon, std::uint64_t seed, bool noiseless) const override {
    check_epsilon(epsilon);
    NoisyAnswer out;
    out.values = base_;
    out.epsilon = epsilon;
    out.mechanism_id = id_;
    out.seed = seed;
    out.stretch_factor = stretch_;
    if (!noiseless) {
      for (std::size_t i = 0; i < parts_.size(); ++i) {
        const NoisePart& part = parts_[i];
        LaplaceSampler noise(part.sensitivity / (epsilon * part.budget_share),
                             derive_seed(seed, i));
        add_vector(out.values, matmul(part.decoder, noise.sample_vector(part.draw_count)));
      }
    }
    return out;
  }

  std::vector<BudgetEntry> budget(double epsilon) const override {
    check_epsilon(epsilon);
    std::vector<BudgetEntry> entries;
    entries.reserve(parts_.size());
    for (const NoisePart& part : parts_) {
      entries.push_back({part.label, part.edges, epsilon * part.budget_share});
    }
    return entries;
  }

  std::size_t stretch() const override { return stretch_; }
  const std::string& id() const override { return id_; }

 protected:
  std::string id_;
  std::size_t stretch_ = 1;
  DenseVector base_;
  std::vector<NoisePart> parts_;
};

class PreparedLaplace : public PreparedMechanism {
 public:
  PreparedLaplace(const MechanismConfig& config, const Workload& w, const HistogramDB& x)
      : exact_(evaluate(w, x)) {
    const PolicyGraph g = build_policy(x.domain, config.policy);
    delta_ = policy_sensitivity(w, g);
  }

  NoisyAnswer answer(double epsilon, std::uint64_t seed, bool noiseless) const override {
    check_epsilon(epsilon);
    NoisyAnswer out;
    out.values = exact_;
    out.epsilon = epsilon;
    out.mechanism_id = id_;
    out.seed = seed;
    if (!noiseless) {
      LaplaceSampler noise(delta_ / epsilon, seed);
      for (double& v : out.values) v += noise.sample();
    }
    return out;
  }

  const std::string& id() const override { return id_; }

 private:
  std::string id_ = "laplace";
  DenseVector exact_;
  double delta_ = 0.0;
};

class PreparedMatrix : public PreparedMechanism {
 public:
  PreparedMatrix(const MechanismConfig& config, const Workload& w, const HistogramDB& x)
      : id_(config.id), exact_(evaluate(w, x)) {
    Strategy strategy =
        config.id == "mm-hier"
            ? hierarchical_strategy(x.domain.total(), config.branching)
            : tensor_wavelet_strategy(x.domain.dims());
    const PolicyGraph g = build_policy(x.domain, config.policy);
    delta_ = policy_sensitivity(Workload{strategy.matrix, WorkloadKind::kCustom}, g);
    attach_workload(strategy, w.matrix);
    decoder_ = std::move(*strategy.decoder);
    draw_count_ = strategy.matrix.rows();
  }

  NoisyAnswer answer(double epsilon, std::uint64_t seed, bool noiseless) const override {
    check_epsilon(epsilon);
    NoisyAnswer out;
    out.values = exact_;
    out.epsilon = epsilon;
    out.mechanism_id = id_;
    out.seed = seed;
    if (!noiseless) {
      LaplaceSampler noise(delta_ / epsilon, seed);
      add_vector(out.values, matmul(decoder_, noise.sample_vector(draw_count_)));
    }
    return out;
  }

  const std::string& id() const override { return id_; }

 private:
  std::string id_;
  DenseVector exact_;
  SparseMatrix decoder_;
  std::size_t draw_count_ = 0;
  double delta_ = 0.0;
};

class PreparedBfLine : public PartitionedMechanism {
 public:
  PreparedBfLine(const Workload& w, const HistogramDB& x) {
    id_ = "bf-line";
    if (x.domain.ndims() != 1) {
      throw std::invalid_argument("bf-line needs a 1-d domain (use bf-grid instead)");
    }
    const std::size_t k = x.domain.total();
    const std::vector<std::optional<RangeQuery>> boxes =
        require_box_rows(w, x.domain, "bf-line");

    std::vector<Edge> edges;
    edges.reserve(k);
    for (std::size_t c = 0; c + 1 < k; ++c) edges.push_back(make_edge(c, c + 1));
    edges.push_back(make_edge(k - 1, kBot));
    const PolicyGraph line(x.domain, true, std::move(edges));
    const TransformPair t = build_transform(line);
    x_g_ = transform_database(x, t);

    plus_.assign(boxes.size(), kNone);
    minus_.assign(boxes.size(), kNone);
    std::vector<Triplet> decoder;
    for (std::size_t r = 0; r < boxes.size(); ++r) {
      if (!boxes[r]) continue;
      plus_[r] = boxes[r]->hi[0];
      decoder.push_back({r, plus_[r], 1.0});
      if (boxes[r]->lo[0] > 0) {
        minus_[r] = boxes[r]->lo[0] - 1;
        decoder.push_back({r, minus_[r], -1.0});
      }
    }

    NoisePart part;
    part.label = "prefix-release";
    part.edges.resize(k);
    for (std::size_t j = 0; j < k; ++j) part.edges[j] = j;
    part.sensitivity = 1.0;
    part.draw_count = k;
    part.decoder = SparseMatrix::from_triplets(boxes.size(), k, std::move(decoder));
    base_ = matmul(part.decoder, x_g_);
    parts_.push_back(std::move(part));
  }

  // Swaps the per-entry Laplace release for an externally supplied private
  // estimate of the transformed database.
  NoisyAnswer answer_with_estimator(double epsilon, std::uint64_t seed,
                                    const PrivateEstimator& estimator) const {
    check_epsilon(epsilon);
    const DenseVector estimate = estimator(x_g_, epsilon, seed);
    if (estimate.size() != x_g_.size()) {
      throw std::runtime_error("estimator returned " + std::to_string(estimate.size()) +
                               " entries for " + std::to_string(x_g_.size()) +
                               " transformed counts");
    }
    NoisyAnswer out;
    out.epsilon = epsilon;
    out.mechanism_id = id_;
    out.seed = seed;
    out.values.assign(plus_.size(), 0.0);
    for (std::size_t r = 0; r < plus_.size(); ++r) {
      if (plus_[r] != kNone) out.values[r] += estimate[plus_[r]];
      if (minus_[r] != kNone) out.values[r] -= estimate[minus_[r]];
    }
    return out;
  }

 private:
  DenseVector x_g_;
  std::vector<std::size_t> plus_;
  std::vector<std::size_t> minus_;
};

// Canonical-edge lookup over a reduced graph whose removed vertex was the
// highest cell, so original cell ids carry over unchanged.
class EdgeIndex {
 public:
  EdgeIndex(const std::vector<Edge>& order, std::size_t removed)
      : order_(order), removed_(removed) {}

  std::size_t at(std::size_t u, std::size_t v) const {
    Edge e = make_edge(u == removed_ ? kBot : u, v == removed_ ? kBot : v);
    const auto it = std::lower_bound(order_.begin(), order_.end(), e);
    if (it == order_.end() || !(*it == e)) {
      throw std::runtime_error("edge (" + std::to_string(u) + "," + std::to_string(v) +
                               ") missing from the transformed graph");
    }
    return static_cast<std::size_t>(it - order_.begin());
  }

 private:
  const std::vector<Edge>& order_;
  std::size_t removed_;
};

void append_face_decoder(std::vector<Triplet>& into, std::size_t query_row, double sign,
                         const SparseMatrix& pinv,
                         const std::vector<std::size_t>& shape,
                         const std::vector<std::size_t>& lo,
                         const std::vector<std::size_t>& hi) {
  const auto& offsets = pinv.row_offsets();
  const auto& entries = pinv.entries();
  for_subbox(shape, lo, hi, [&](std::size_t pos, const std::vector<std::size_t>&) {
    for (std::size_t e = offsets[pos]; e < offsets[pos + 1]; ++e) {
      into.push_back({query_row, entries[e].col, sign * entries[e].value});
    }
  });
}

class PreparedBfGrid : public PartitionedMechanism {
 public:
  PreparedBfGrid(const Workload& w, const HistogramDB& x) {
    id_ = "bf-grid";
    const Domain& domain = x.domain;
    const std::size_t d = domain.ndims();
    if (d < 2) {
      throw std::invalid_argument("bf-grid needs a multi-dimensional domain "
                                  "(use bf-line for 1-d)");
    }
    const std::vector<std::optional<RangeQuery>> boxes =
        require_box_rows(w, domain, "bf-grid");
    const std::vector<std::size_t>& dims = domain.dims();
    const std::vector<std::size_t> strides = box_strides(dims);

    const PolicyGraph grid = build_distance_threshold_graph(domain, 1, false);
    const PreparedTransform pt = PreparedTransform::build(grid, w);
    const auto& comp = pt.components().front();
    const DenseVector x_g = pt.transform_databases(x).front();
    const EdgeIndex index(comp.pair.edge_order, domain.total() - 1);

    base_.assign(w.matrix.rows(), 0.0);
    std::vector<Strategy> by_dim(d);
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<std::size_t> residual;
      for (std::size_t t = 0; t < d; ++t) {
        if (t != i) residual.push_back(dims[t]);
      }
      by_dim[i] = tensor_wavelet_strategy(residual);
    }

    for (std::size_t i = 0; i < d; ++i) {
      std::vector<std::size_t> shape;
      for (std::size_t t = 0; t < d; ++t) {
        if (t != i) shape.push_back(dims[t]);
      }
      const std::vector<std::size_t> zero(shape.size(), 0);
      std::vector<std::size_t> top(shape.size());
      for (std::size_t t = 0; t < shape.size(); ++t) top[t] = shape[t] - 1;

      for (std::size_t slab = 0; slab + 1 < dims[i]; ++slab) {
        NoisePart part;
        part.label = "dim-" + std::to_string(i) + "-slab-" + std::to_string(slab);
        part.sensitivity = by_dim[i].sensitivity;
        part.draw_count = by_dim[i].matrix.rows();

        DenseVector z(by_dim[i].matrix.cols(), 0.0);
        part.edges.resize(z.size());
        for_subbox(shape, zero, top,
                   [&](std::size_t pos, const std::vector<std::size_t>& coords) {
                     std::size_t cell = slab * strides[i];
                     std::size_t t = 0;
                     for (std::size_t dim = 0; dim < d; ++dim) {
                       if (dim == i) continue;
                       cell += coords[t++] * strides[dim];
                     }
                     const std::size_t edge = index.at(cell, cell + strides[i]);
                     part.edges[pos] = edge;
                     z[pos] = x_g[edge];
                   });

        std::vector<Triplet> decoder;
        for (std::size_t r = 0; r < boxes.size(); ++r) {
          if (!boxes[r]) continue;
          const RangeQuery& box = *boxes[r];
          std::vector<std::size_t> lo;
          std::vector<std::size_t> hi;
          for (std::size_t t = 0; t < d; ++t) {
            if (t == i) continue;
            lo.push_back(box.lo[t]);
            hi.push_back(box.hi[t]);
          }
          if (box.hi[i] == slab) {
            append_face_decoder(decoder, r, 1.0, by_dim[i].pinv, shape, lo, hi);
          }
          if (box.lo[i] == slab + 1) {
            append_face_decoder(decoder, r, -1.0, by_dim[i].pinv, shape, lo, hi);
          }
        }
        part.decoder =
            SparseMatrix::from_triplets(boxes.size(), part.draw_count, std::move(decoder));
        add_vector(base_, matmul(part.decoder, matmul(by_dim[i].matrix, z)));
        parts_.push_back(std::move(part));
      }
    }

    const DenseVector& correction = comp.reduction->correction_coeffs;
    for (std::size_t r = 0; r < base_.size(); ++r) {
      base_[r] += x.total * correction[r];
    }
  }
};

class PreparedBfTheta1d : public PartitionedMechanism {
 public:
  PreparedBfTheta1d(const Workload& w, const HistogramDB& x, std::size_t theta,
                    std::size_t branching) {
    id_ = "bf-theta1d";
    if (x.domain.ndims() != 1) {
      throw std::invalid_argument("bf-theta1d needs a 1-d domain "
                                  "(use bf-thetamd for grids)");
    }
    if (theta == 0) throw std::invalid_argument("theta must be at least 1");
    const std::size_t k = x.domain.total();
    const std::vector<std::optional<RangeQuery>> boxes =
        require_box_rows(w, x.domain, "bf-theta1d");

    const PolicyGraph h = build_theta_spanner_1d(k, theta);
    if (k > 1) {
      const PolicyGraph g = build_distance_threshold_graph(x.domain, theta, false);
      stretch_ = std::max<std::size_t>(1, spanner_stretch(g, h));
    }

    const PreparedTransform pt = PreparedTransform::build(h, w);
    const auto& comp = pt.components().front();
    const DenseVector x_g = pt.transform_databases(x).front();
    const std::vector<Edge>& order = comp.pair.edge_order;

    // Edges grouped by their red endpoint are contiguous in canonical order:
    // the group of red r holds the path edge entering r and the attachments
    // of the non-red cells below it.
    std::vector<std::size_t> group_red(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
      group_red[j] = order[j].b == kBot ? k - 1 : order[j].b;
    }
    std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end)
    for (std::size_t j = 0; j < order.size(); ++j) {
      if (j == 0 || group_red[j] != group_red[j - 1]) {
        groups.push_back({j, j + 1});
      } else {
        groups.back().second = j + 1;
      }
    }
    for (std::size_t gi = 1; gi < groups.size(); ++gi) {
      if (group_red[groups[gi].first] <= group_red[groups[gi - 1].first]) {
        throw std::runtime_error("transformed edge groups are not contiguous");
      }
    }

    base_.assign(w.matrix.rows(), 0.0);
    std::vector<std::vector<Triplet>> decoders(groups.size());
    std::vector<Strategy> strategies(groups.size());
    std::vector<std::map<std::pair<std::size_t, std::size_t>, std::size_t>> node_rows(
        groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const std::size_t size = groups[gi].second - groups[gi].first;
      if (size > theta) {
        throw std::runtime_error("transformed edge group exceeds the block size");
      }
      strategies[gi] = hierarchical_strategy(size, branching);
      const auto& offsets = strategies[gi].matrix.row_offsets();
      const auto& entries = strategies[gi].matrix.entries();
      for (std::size_t row = 0; row < strategies[gi].matrix.rows(); ++row) {
        const std::size_t first = entries[offsets[row]].col;
        const std::size_t last = entries[offsets[row + 1] - 1].col;
        node_rows[gi].emplace(std::make_pair(first, last), row);
      }
    }

    // Constant-sign runs of the transformed query, split at group borders,
    // each answered by the dyadic cover of its in-group span.
    for (std::size_t r = 0; r < boxes.size(); ++r) {
      if (!boxes[r]) continue;
      const std::size_t lo = boxes[r]->lo[0];
      const std::size_t hi = boxes[r]->hi[0];
      auto covered = [&](std::size_t cell) { return lo <= cell && cell <= hi; };
      std::size_t gi = 0;
      std::size_t run_start = kNone;
      int run_sign = 0;
      auto flush = [&](std::size_t run_end, std::size_t run_group) {
        if (run_start == kNone) return;
        const std::size_t begin = groups[run_group].first;
        for (const auto& [ns, ne] : dyadic_cover(run_start - begin, run_end - 1 - begin,
                                                 groups[run_group].second - begin,
                                                 branching)) {
          const std::size_t row = node_rows[run_group].at({ns, ne});
          decoders[run_group].push_back({r, row, static_cast<double>(run_sign)});
        }
        run_start = kNone;
        run_sign = 0;
      };
      for (std::size_t j = 0; j < order.size(); ++j) {
        while (j >= groups[gi].second) {
          flush(groups[gi].second, gi);
          ++gi;
        }
        const std::size_t a = order[j].a;
        const std::size_t b = order[j].b == kBot ? k - 1 : order[j].b;
        const int sign = static_cast<int>(covered(a)) - static_cast<int>(covered(b));
        if (sign != run_sign && run_start != kNone) flush(j, gi);
        if (sign != 0 && run_start == kNone) {
          run_start = j;
          run_sign = sign;
        }
      }
      if (run_start != kNone) flush(order.size(), groups.size() - 1);
    }

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      NoisePart part;
      part.label = "group-" + std::to_string(group_red[groups[gi].first]);
      part.budget_share = 1.0 / static_cast<double>(stretch_);
      part.sensitivity = strategies[gi].sensitivity;
      part.draw_count = strategies[gi].matrix.rows();
      DenseVector z(groups[gi].second - groups[gi].first);
      part.edges.resize(z.size());
      for (std::size_t j = 0; j < z.size(); ++j) {
        part.edges[j] = groups[gi].first + j;
        z[j] = x_g[groups[gi].first + j];
      }
      part.decoder = SparseMatrix::from_triplets(w.matrix.rows(), part.draw_count,
                                                 std::move(decoders[gi]));
      add_vector(base_, matmul(part.decoder, matmul(strategies[gi].matrix, z)));
      parts_.push_back(std::move(part));
    }

    if (comp.reduction) {
      const DenseVector& correction = comp.reduction->correction_coeffs;
      for (std::size_t r = 0; r < base_.size(); ++r) {
        base_[r] += x.total * correction[r];
      }
    }
  }
};

class PreparedBfThetaMd : public PartitionedMechanism {
 public:
  PreparedBfThetaMd(const Workload& w, const HistogramDB& x, std::size_t theta) {
    id_ = "bf-thetamd";
    const Domain& domain = x.domain;
    const std::size_t d = domain.ndims();
    if (d < 2) {
      throw std::invalid_argument("bf-thetamd needs a multi-dimensional domain "
                                  "(use bf-theta1d for 1-d)");
    }
    if (theta < d) {
      throw std::invalid_argument("theta must be at least the dimension count (" +
                                  std::to_string(theta) + " < " + std::to_string(d) +
                                  ")");
    }
    const std::vector<std::optional<RangeQuery>> boxes =
        require_box_rows(w, domain, "bf-thetamd");
    const std::vector<std::size_t>& dims = domain.dims();
    const GridSpannerLayout layout = make_grid_spanner_layout(domain, theta);
    const std::size_t side = layout.block_side;

    const PolicyGraph h = build_theta_spanner_grid(domain, theta);
    const PolicyGraph g = build_distance_threshold_graph(domain, theta, false);
    stretch_ = std::max<std::size_t>(1, spanner_stretch(g, h));

    const PreparedTransform pt = PreparedTransform::build(h, w);
    const auto& comp = pt.components().front();
    const DenseVector x_g = pt.transform_databases(x).front();
    const EdgeIndex index(comp.pair.edge_order, domain.total() - 1);

    base_.assign(w.matrix.rows(), 0.0);
    const double internal_share = 1.0 / (2.0 * static_cast<double>(d) *
                                         static_cast<double>(stretch_));
    const double external_share = 1.0 / (2.0 * static_cast<double>(stretch_));

    // Per-query, per-dimension membership intervals.
    //   inside[i]  = [lo_i, hi_i]
    //   pulled[i]  = the cells whose designated red coordinate lies inside;
    //                empty when no red coordinate falls in [lo_i, hi_i]
    struct DimSplit {
      bool has_red = false;
      std::size_t lat_lo = 0, lat_hi = 0;    // red-coordinate index range
      std::size_t pull_lo = 0, pull_hi = 0;  // cells with red(c) inside
    };
    std::vector<std::vector<DimSplit>> splits(boxes.size(), std::vector<DimSplit>(d));
    for (std::size_t r = 0; r < boxes.size(); ++r) {
      if (!boxes[r]) continue;
      for (std::size_t i = 0; i < d; ++i) {
        const auto& reds = layout.reds_per_dim[i];
        DimSplit& s = splits[r][i];
        const auto first =
            std::lower_bound(reds.begin(), reds.end(), boxes[r]->lo[i]);
        if (first == reds.end() || *first > boxes[r]->hi[i]) continue;
        const auto last = std::prev(std::upper_bound(first, reds.end(), boxes[r]->hi[i]));
        s.has_red = true;
        s.lat_lo = static_cast<std::size_t>(first - reds.begin());
        s.lat_hi = static_cast<std::size_t>(last - reds.begin());
        s.pull_lo = s.lat_lo == 0 ? 0 : reds[s.lat_lo - 1] + 1;
        s.pull_hi = *last;
      }
    }

    // Internal edges: for each dimension, disjoint layers of block-thick
    // slices, indexed by the non-red endpoint.
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t block = 0; block < layout.reds_per_dim[j].size(); ++block) {
        const std::size_t start = block * side;
        const std::size_t red_coord = layout.reds_per_dim[j][block];
        if (red_coord == start) continue;  // block holds only its red

        std::vector<std::size_t> shape = dims;
        shape[j] = red_coord - start;
        Strategy strategy = tensor_wavelet_strategy(shape);

        NoisePart part;
        part.label = "internal-dim-" + std::to_string(j) + "-block-" +
                     std::to_string(block);
        part.budget_share = internal_share;
        part.sensitivity = strategy.sensitivity;
        part.draw_count = strategy.matrix.rows();

        DenseVector z(strategy.matrix.cols(), 0.0);
        part.edges.resize(z.size());
        const std::vector<std::size_t> zero(d, 0);
        std::vector<std::size_t> top(d);
        for (std::size_t t = 0; t < d; ++t) top[t] = shape[t] - 1;
        for_subbox(shape, zero, top,
                   [&](std::size_t pos, const std::vector<std::size_t>& coords) {
                     std::vector<std::size_t> cell_coords = coords;
                     cell_coords[j] += start;
                     const std::size_t cell = domain.index_of(cell_coords);
                     const std::size_t edge = index.at(cell, layout.red_of_cell[cell]);
                     part.edges[pos] = edge;
                     z[pos] = x_g[edge];
                   });

        // A box query hits this layer in at most two thin slices along j:
        // the in-range cells above the last inside red (positive) and the
        // pulled-in cells below the range (negative).  Dimensions before j
        // match on the red coordinate, dimensions after j on the cell.
        std::vector<Triplet> decoder;
        for (std::size_t r = 0; r < boxes.size(); ++r) {
          if (!boxes[r]) continue;
          const RangeQuery& box = *boxes[r];
          const std::vector<DimSplit>& split = splits[r];

          std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> slices;
          if (!split[j].has_red) {
            slices.push_back({{box.lo[j], box.hi[j]}, 1.0});
          } else {
            if (split[j].pull_hi < box.hi[j]) {
              slices.push_back({{split[j].pull_hi + 1, box.hi[j]}, 1.0});
            }
            if (split[j].pull_lo < box.lo[j]) {
              slices.push_back({{split[j].pull_lo, box.lo[j] - 1}, -1.0});
            }
          }
          for (const auto& [span, sign] : slices) {
            if (span.first / side != block) continue;
            std::vector<std::size_t> lo(d);
            std::vector<std::size_t> hi(d);
            bool empty = false;
            for (std::size_t t = 0; t < d; ++t) {
              if (t < j) {
                if (!split[t].has_red) {
                  empty = true;
                  break;
                }
                lo[t] = split[t].pull_lo;
                hi[t] = split[t].pull_hi;
              } else if (t == j) {
                lo[t] = span.first - start;
                hi[t] = span.second - start;
              } else {
                lo[t] = box.lo[t];
                hi[t] = box.hi[t];
              }
            }
            if (empty) continue;
            append_face_decoder(decoder, r, sign, strategy.pinv, shape, lo, hi);
          }
        }
        part.decoder = SparseMatrix::from_triplets(w.matrix.rows(), part.draw_count,
                                                   std::move(decoder));
        add_vector(base_, matmul(part.decoder, matmul(strategy.matrix, z)));
        parts_.push_back(std::move(part));
      }
    }

    // External edges: the red positions form a lattice grid answered exactly
    // like the grid mechanism, one layer per lattice slab.
    std::vector<std::size_t> lattice(d);
    for (std::size_t i = 0; i < d; ++i) lattice[i] = layout.reds_per_dim[i].size();
    auto red_cell = [&](const std::vector<std::size_t>& pos) {
      std::vector<std::size_t> coords(d);
      for (std::size_t i = 0; i < d; ++i) coords[i] = layout.reds_per_dim[i][pos[i]];
      return domain.index_of(coords);
    };

    for (std::size_t i = 0; i < d; ++i) {
      if (lattice[i] < 2) continue;
      std::vector<std::size_t> shape;
      for (std::size_t t = 0; t < d; ++t) {
        if (t != i) shape.push_back(lattice[t]);
      }
      Strategy strategy = tensor_wavelet_strategy(shape);
      const std::vector<std::size_t> zero(shape.size(), 0);
      std::vector<std::size_t> top(shape.size());
      for (std::size_t t = 0; t < shape.size(); ++t) top[t] = shape[t] - 1;

      for (std::size_t slab = 0; slab + 1 < lattice[i]; ++slab) {
        NoisePart part;
        part.label = "external-dim-" + std::to_string(i) + "-slab-" +
                     std::to_string(slab);
        part.budget_share = external_share;
        part.sensitivity = strategy.sensitivity;
        part.draw_count = strategy.matrix.rows();

        DenseVector z(strategy.matrix.cols(), 0.0);
        part.edges.resize(z.size());
        for_subbox(shape, zero, top,
                   [&](std::size_t pos, const std::vector<std::size_t>& coords) {
                     std::vector<std::size_t> at(d);
                     std::size_t t = 0;
                     for (std::size_t dim = 0; dim < d; ++dim) {
                       at[dim] = dim == i ? slab : coords[t++];
                     }
                     const std::size_t a = red_cell(at);
                     ++at[i];
                     const std::size_t edge = index.at(a, red_cell(at));
                     part.edges[pos] = edge;
                     z[pos] = x_g[edge];
                   });

        std::vector<Triplet> decoder;
        for (std::size_t r = 0; r < boxes.size(); ++r) {
          if (!boxes[r]) continue;
          const std::vector<DimSplit>& split = splits[r];
          bool all_red = true;
          for (std::size_t t = 0; t < d; ++t) all_red = all_red && split[t].has_red;
          if (!all_red) continue;
          std::vector<std::size_t> lo;
          std::vector<std::size_t> hi;
          for (std::size_t t = 0; t < d; ++t) {
            if (t == i) continue;
            lo.push_back(split[t].lat_lo);
            hi.push_back(split[t].lat_hi);
          }
          if (split[i].lat_hi == slab) {
            append_face_decoder(decoder, r, 1.0, strategy.pinv, shape, lo, hi);
          }
          if (split[i].lat_lo == slab + 1) {
            append_face_decoder(decoder, r, -1.0, strategy.pinv, shape, lo, hi);
          }
        }
        part.decoder = SparseMatrix::from_triplets(w.matrix.rows(), part.draw_count,
                                                   std::move(decoder));
        add_vector(base_, matmul(part.decoder, matmul(strategy.matrix, z)));
        parts_.push_back(std::move(part));
      }
    }

    const DenseVector& correction = comp.reduction->correction_coeffs;
    for (std::size_t r = 0; r < base_.size(); ++r) {
      base_[r] += x.total * correction[r];
    }
  }
};

}  // namespace

std::unique_ptr<PreparedMechanism> prepare_mechanism(const MechanismConfig& config,
                                                     const Workload& w,
                                                     const HistogramDB& x) {
  if (w.matrix.cols() != x.counts.size()) {
    throw std::invalid_argument("workload has " + std::to_string(w.matrix.cols()) +
                                " columns but the database has " +
                                std::to_string(x.counts.size()) + " cells");
  }
  if (config.id == "laplace") {
    return std::make_unique<PreparedLaplace>(config, w, x);
  }
  if (config.id == "mm-hier" || config.id == "mm-wavelet") {
    return std::make_unique<PreparedMatrix>(config, w, x);
  }
  if (config.id == "bf-line") {
    return std::make_unique<PreparedBfLine>(w, x);
  }
  if (config.id == "bf-grid") {
    return std::make_unique<PreparedBfGrid>(w, x);
  }
  if (config.id == "bf-theta1d") {
    return std::make_unique<PreparedBfTheta1d>(w, x, config.theta, config.branching);
  }
  if (config.id == "bf-thetamd") {
    return std::make_unique<PreparedBfThetaMd>(w, x, config.theta);
  }
  throw std::invalid_argument(
      "unknown mechanism id \"" + config.id +
      "\" (expected laplace|mm-hier|mm-wavelet|bf-line|bf-grid|bf-theta1d|bf-thetamd)");
}

NoisyAnswer blowfish_1d_range_line(const HistogramDB& x, double epsilon,
                                   const Workload& queries, std::uint64_t seed,
                                   bool noiseless, PrivateEstimator estimator) {
  PreparedBfLine prepared(queries, x);
  if (estimator && !noiseless) {
    return prepared.answer_with_estimator(epsilon, seed, estimator);
  }
  return prepared.answer(epsilon, seed, noiseless);
}

NoisyAnswer blowfish_multid_range_grid(const HistogramDB& x, double epsilon,
                                       const Workload& queries, std::uint64_t seed,
                                       bool noiseless) {
  return PreparedBfGrid(queries, x).answer(epsilon, seed, noiseless);
}

NoisyAnswer blowfish_1d_range_theta(const HistogramDB& x, std::size_t theta,
                                    double epsilon, const Workload& queries,
                                    std::uint64_t seed, bool noiseless) {
  return PreparedBfTheta1d(queries, x, theta, 2).answer(epsilon, seed, noiseless);
}

NoisyAnswer blowfish_multid_range_theta(const HistogramDB& x, std::size_t theta,
                                        double epsilon, const Workload& queries,
                                        std::uint64_t seed, bool noiseless) {
  return PreparedBfThetaMd(queries, x, theta).answer(epsilon, seed, noiseless);
}

}  // namespace blowfish
