#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blowfish/domain.hpp"
#include "blowfish/linalg.hpp"

namespace blowfish {

enum class WorkloadKind { kIdentity, kCumulative, kAllRanges, kSampledRanges, kCustom };

// Linear query set over a domain: one matrix row per query, one column per
// cell in linearized order.
struct Workload {
  SparseMatrix matrix;
  WorkloadKind kind = WorkloadKind::kCustom;
};

// Axis-aligned inclusive hyperrectangle, 0-based per-dimension endpoints.
struct RangeQuery {
  std::vector<std::size_t> lo;
  std::vector<std::size_t> hi;
};

// Histogram database: nonnegative per-cell counts with their known total n.
struct HistogramDB {
  Domain domain;
  DenseVector counts;
  double total = 0.0;
};

// Validates shape, finiteness and nonnegativity.
HistogramDB make_histogram(Domain domain, DenseVector counts);

// identity -> I_k; cumulative -> lower-triangular ones over the linearized
// order; all_ranges -> one 0/1 row per hyperrectangle, enumerated
// lexicographically by (lo, hi).  all_ranges is rejected above 10^6 rows.
Workload make_workload(WorkloadKind kind, const Domain& domain);

std::size_t all_ranges_count(const Domain& domain);

Workload workload_from_ranges(const Domain& domain, const std::vector<RangeQuery>& ranges);

// count ranges with per-dimension endpoints drawn uniformly (unordered pair of
// draws, swapped into order).  Deterministic for a fixed seed.
std::pair<Workload, std::vector<RangeQuery>> sample_range_workload(const Domain& domain,
                                                                   std::size_t count,
                                                                   std::uint64_t seed);

DenseVector evaluate(const Workload& w, const HistogramDB& x);

// Sparse synthetic histogram: about zero_fraction of the cells are zero and
// the counts sum to scale exactly (integer split over the nonzero cells).
HistogramDB synth_histogram(const Domain& domain, double scale, double zero_fraction,
                            std::uint64_t seed);

// 1-d files hold one count per line; multi-d files are CSV rows of d
// 0-based cell coordinates followed by the count.  Dimensions come from the
// dims argument or from a leading "# dims: k1,k2,..." header.
HistogramDB load_histogram(const std::string& path, std::optional<Domain> dims = {});

// CSV of sparse triples: row,col,value with a header line.
void save_workload_csv(const Workload& w, std::ostream& out);

// CSV range file: per line, d lo coordinates then d hi coordinates.
// Endpoints are 1-based inclusive and converted internally.
std::vector<RangeQuery> load_ranges_csv(const std::string& path, const Domain& domain);

}  // namespace blowfish
