#include "blowfish/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace blowfish {
namespace {

// Bounded uniform draw over [0, n) via modulo on the raw 64-bit stream; the
// bias is negligible at domain scale and the result is platform-stable.
std::size_t uniform_index(std::mt19937_64& engine, std::size_t n) {
  return static_cast<std::size_t>(engine() % n);
}

void append_range_row(std::vector<Triplet>& entries, std::size_t row,
                      const Domain& domain, const RangeQuery& q) {
  const std::size_t d = domain.ndims();
  std::vector<std::size_t> coords = q.lo;
  while (true) {
    entries.push_back({row, domain.index_of(coords), 1.0});
    std::size_t dim = d;
    bool done = true;
    while (dim-- > 0) {
      if (coords[dim] < q.hi[dim]) {
        ++coords[dim];
        for (std::size_t j = dim + 1; j < d; ++j) coords[j] = q.lo[j];
        done = false;
        break;
      }
    }
    if (done) return;
  }
}

void check_range(const Domain& domain, const RangeQuery& q) {
  const std::size_t d = domain.ndims();
  if (q.lo.size() != d || q.hi.size() != d) {
    throw std::invalid_argument("range arity does not match the domain");
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (q.hi[i] >= domain.dims()[i] || q.lo[i] > q.hi[i]) {
      throw std::invalid_argument("range [" + std::to_string(q.lo[i]) + "," +
                                  std::to_string(q.hi[i]) +
                                  "] invalid for dimension of size " +
                                  std::to_string(domain.dims()[i]));
    }
  }
}

}  // namespace

HistogramDB make_histogram(Domain domain, DenseVector counts) {
  if (counts.size() != domain.total()) {
    throw std::invalid_argument("histogram length " + std::to_string(counts.size()) +
                                " does not match domain of " +
                                std::to_string(domain.total()) + " cells");
  }
  if (!all_finite(counts)) throw std::invalid_argument("histogram counts must be finite");
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw std::invalid_argument("histogram counts must be nonnegative");
    total += c;
  }
  return HistogramDB{std::move(domain), std::move(counts), total};
}

std::size_t all_ranges_count(const Domain& domain) {
  std::size_t count = 1;
  for (std::size_t k : domain.dims()) count *= k * (k + 1) / 2;
  return count;
}

Workload make_workload(WorkloadKind kind, const Domain& domain) {
  const std::size_t k = domain.total();
  switch (kind) {
    case WorkloadKind::kIdentity:
      return Workload{SparseMatrix::identity(k), kind};
    case WorkloadKind::kCumulative: {
      std::vector<Triplet> entries;
      entries.reserve(k * (k + 1) / 2);
      for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c <= r; ++c) entries.push_back({r, c, 1.0});
      }
      return Workload{SparseMatrix::from_triplets(k, k, std::move(entries)), kind};
    }
    case WorkloadKind::kAllRanges: {
      constexpr std::size_t kMaxRows = 1000000;
      const std::size_t rows = all_ranges_count(domain);
      if (rows > kMaxRows) {
        throw std::invalid_argument("all_ranges would emit " + std::to_string(rows) +
                                    " rows, above the " + std::to_string(kMaxRows) +
                                    " cap");
      }
      const std::size_t d = domain.ndims();
      std::vector<Triplet> entries;
      std::size_t row = 0;
      // Enumerate (lo, hi) pairs lexicographically.
      std::vector<std::size_t> lo(d, 0);
      auto next_multi = [&](std::vector<std::size_t>& v,
                            const std::vector<std::size_t>& base,
                            const std::vector<std::size_t>& limit) {
        std::size_t dim = d;
        while (dim-- > 0) {
          if (v[dim] + 1 < limit[dim]) {
            ++v[dim];
            for (std::size_t j = dim + 1; j < d; ++j) v[j] = base[j];
            return true;
          }
        }
        return false;
      };
      const std::vector<std::size_t>& dims = domain.dims();
      while (true) {
        std::vector<std::size_t> hi = lo;
        while (true) {
          append_range_row(entries, row++, domain, RangeQuery{lo, hi});
          if (!next_multi(hi, lo, dims)) break;
        }
        if (!next_multi(lo, std::vector<std::size_t>(d, 0), dims)) break;
      }
      return Workload{SparseMatrix::from_triplets(rows, k, std::move(entries)), kind};
    }
    default:
      throw std::invalid_argument("make_workload only builds named workload kinds");
  }
}

Workload workload_from_ranges(const Domain& domain,
                              const std::vector<RangeQuery>& ranges) {
  std::vector<Triplet> entries;
  for (std::size_t row = 0; row < ranges.size(); ++row) {
    check_range(domain, ranges[row]);
    append_range_row(entries, row, domain, ranges[row]);
  }
  return Workload{
      SparseMatrix::from_triplets(ranges.size(), domain.total(), std::move(entries)),
      WorkloadKind::kSampledRanges};
}

std::pair<Workload, std::vector<RangeQuery>> sample_range_workload(const Domain& domain,
                                                                   std::size_t count,
                                                                   std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  const std::size_t d = domain.ndims();
  std::vector<RangeQuery> ranges;
  ranges.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RangeQuery q;
    q.lo.resize(d);
    q.hi.resize(d);
    for (std::size_t dim = 0; dim < d; ++dim) {
      const std::size_t a = uniform_index(engine, domain.dims()[dim]);
      const std::size_t b = uniform_index(engine, domain.dims()[dim]);
      q.lo[dim] = std::min(a, b);
      q.hi[dim] = std::max(a, b);
    }
    ranges.push_back(std::move(q));
  }
  Workload w = workload_from_ranges(domain, ranges);
  w.kind = WorkloadKind::kSampledRanges;
  return {std::move(w), std::move(ranges)};
}

DenseVector evaluate(const Workload& w, const HistogramDB& x) {
  if (w.matrix.cols() != x.counts.size()) {
    throw std::invalid_argument("workload has " + std::to_string(w.matrix.cols()) +
                                " columns but the histogram has " +
                                std::to_string(x.counts.size()) + " cells");
  }
  return matmul(w.matrix, x.counts);
}

HistogramDB synth_histogram(const Domain& domain, double scale, double zero_fraction,
                            std::uint64_t seed) {
  if (scale < 0.0 || !std::isfinite(scale)) {
    throw std::invalid_argument("scale must be a nonnegative finite value");
  }
  if (zero_fraction < 0.0 || zero_fraction > 1.0) {
    throw std::invalid_argument("zero_fraction must lie in [0, 1]");
  }
  const std::size_t k = domain.total();
  std::size_t nonzero =
      static_cast<std::size_t>(std::llround((1.0 - zero_fraction) * static_cast<double>(k)));
  nonzero = std::clamp<std::size_t>(nonzero, 1, k);

  std::mt19937_64 engine(seed);
  // Partial Fisher-Yates for the nonzero support.
  std::vector<std::size_t> cells(k);
  std::iota(cells.begin(), cells.end(), 0);
  for (std::size_t i = 0; i < nonzero; ++i) {
    const std::size_t j = i + uniform_index(engine, k - i);
    std::swap(cells[i], cells[j]);
  }

  // Random weights, then an integer split of scale proportional to them.
  std::vector<double> weights(nonzero);
  double weight_sum = 0.0;
  for (double& w : weights) {
    w = 1.0 + static_cast<double>(engine() >> 11) * 0x1.0p-53;
    weight_sum += w;
  }
  const double total = std::floor(scale);
  DenseVector counts(k, 0.0);
  double assigned = 0.0;
  for (std::size_t i = 0; i < nonzero; ++i) {
    double c = std::floor(total * weights[i] / weight_sum);
    counts[cells[i]] = c;
    assigned += c;
  }
  // Distribute the rounding remainder one unit at a time.
  std::size_t i = 0;
  while (assigned + 0.5 < total) {
    counts[cells[i % nonzero]] += 1.0;
    assigned += 1.0;
    ++i;
  }
  return make_histogram(domain, std::move(counts));
}

HistogramDB load_histogram(const std::string& path, std::optional<Domain> dims) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open histogram file " + path);

  std::vector<std::string> lines;
  std::string line;
  std::optional<Domain> header_dims;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("dims:");
      if (pos != std::string::npos) {
        std::vector<std::size_t> parsed;
        std::stringstream ss(line.substr(pos + 5));
        std::string item;
        while (std::getline(ss, item, ',')) {
          try {
            parsed.push_back(std::stoull(item));
          } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed dims header");
          }
        }
        header_dims = Domain(std::move(parsed));
      }
      continue;
    }
    lines.push_back(line);
  }

  Domain domain = dims ? *dims
                : header_dims ? *header_dims
                              : Domain({lines.size()});
  const std::size_t d = domain.ndims();

  DenseVector counts(domain.total(), 0.0);
  if (d == 1 && lines.size() == domain.total() &&
      lines.front().find(',') == std::string::npos) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      try {
        counts[i] = std::stod(lines[i]);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(i + 1) +
                                 ": cannot parse count \"" + lines[i] + "\"");
      }
    }
  } else {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::stringstream ss(lines[i]);
      std::string item;
      std::vector<std::size_t> coords;
      double value = 0.0;
      std::size_t field = 0;
      try {
        while (std::getline(ss, item, ',')) {
          if (field < d) {
            coords.push_back(std::stoull(item));
          } else {
            value = std::stod(item);
          }
          ++field;
        }
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(i + 1) +
                                 ": malformed row \"" + lines[i] + "\"");
      }
      if (field != d + 1) {
        throw std::runtime_error(path + ":" + std::to_string(i + 1) + ": expected " +
                                 std::to_string(d) + " coordinates and a count");
      }
      counts.at(domain.index_of(coords)) = value;
    }
  }
  try {
    return make_histogram(std::move(domain), std::move(counts));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void save_workload_csv(const Workload& w, std::ostream& out) {
  out << "row,col,value\n";
  for (const Triplet& t : w.matrix.entries()) {
    out << t.row << "," << t.col << "," << t.value << "\n";
  }
}

std::vector<RangeQuery> load_ranges_csv(const std::string& path, const Domain& domain) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open range file " + path);
  const std::size_t d = domain.ndims();
  std::vector<RangeQuery> ranges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string item;
    std::vector<long long> fields;
    try {
      while (std::getline(ss, item, ',')) fields.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed range row \"" + line + "\"");
    }
    if (fields.size() != 2 * d) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(2 * d) + " endpoints");
    }
    RangeQuery q;
    for (std::size_t i = 0; i < 2 * d; ++i) {
      if (fields[i] < 1) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": endpoints are 1-based");
      }
      // 1-based inclusive on disk.
      const std::size_t v = static_cast<std::size_t>(fields[i] - 1);
      (i < d ? q.lo : q.hi).push_back(v);
    }
    try {
      check_range(domain, q);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ranges.push_back(std::move(q));
  }
  return ranges;
}

}  // namespace blowfish
