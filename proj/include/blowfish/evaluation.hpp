#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "blowfish/mechanisms.hpp"
#include "blowfish/workload.hpp"

namespace blowfish {

struct ErrorStats {
  DenseVector per_query_mse;
  double total_mse = 0.0;
  double mean_per_query_mse = 0.0;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
};

// Mean squared error against the exact answers over `runs` draws; run r uses
// derive_seed(seed, r).
ErrorStats monte_carlo_error(const MechanismConfig& config, const Workload& w,
                             const HistogramDB& x, double epsilon, std::size_t runs,
                             std::uint64_t seed);

ErrorStats monte_carlo_error(const PreparedMechanism& mechanism, const Workload& w,
                             const HistogramDB& x, double epsilon, std::size_t runs,
                             std::uint64_t seed);

// Spectral lower bound on the total squared error of any
// (epsilon, delta)-calibrated strategy for the translated workload:
//   2 ln(2/delta) / epsilon^2 * (sum of singular values)^2 / cols.
double svd_lower_bound(const Workload& w_g, double epsilon, double delta);

struct DatasetSpec {
  std::string file;          // path to a histogram file, or empty
  double scale = 10000.0;    // synthetic fallback
  double zero_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string label() const;
};

struct ExperimentConfig {
  Domain domain{std::vector<std::size_t>{1}};
  PolicySpec policy{};
  std::string workload_kind = "sampled_ranges";  // or identity|cumulative|all_ranges
  std::size_t workload_count = 1000;             // sampled_ranges only
  std::uint64_t workload_seed = 0;
  std::vector<MechanismConfig> mechanisms;
  bool baseline = false;  // adds mm-wavelet under the star policy
  std::vector<double> epsilons{0.001, 0.01, 0.1, 1.0};
  std::size_t runs = 5;
  std::uint64_t seed = 0;
  DatasetSpec dataset{};
};

ExperimentConfig parse_experiment_config(const std::string& json_text);

struct ResultRecord {
  std::string mechanism;
  double epsilon = 0.0;
  double mean_per_query_mse = 0.0;
  double total_mse = 0.0;
  std::size_t stretch = 1;
  double wall_ms = 0.0;
  std::size_t runs = 0;
};

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config);

std::string results_to_json(const ExperimentConfig& config,
                            const std::vector<ResultRecord>& records);
std::string results_to_csv(const ExperimentConfig& config,
                           const std::vector<ResultRecord>& records);

}  // namespace blowfish
