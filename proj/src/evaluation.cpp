#include "blowfish/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace blowfish {
namespace {

using nlohmann::json;

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  const auto now = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(now - start).count();
}

WorkloadKind parse_workload_kind(const std::string& name) {
  if (name == "identity") return WorkloadKind::kIdentity;
  if (name == "cumulative") return WorkloadKind::kCumulative;
  if (name == "all_ranges") return WorkloadKind::kAllRanges;
  if (name == "sampled_ranges") return WorkloadKind::kSampledRanges;
  throw std::invalid_argument(
      "unknown workload \"" + name +
      "\" (expected identity|cumulative|all_ranges|sampled_ranges)");
}

PolicySpec parse_policy_spec(const json& j, const std::string& field) {
  PolicySpec spec;
  if (!j.is_object()) {
    throw std::invalid_argument("\"" + field + "\" must be an object");
  }
  spec.family = j.value("family", spec.family);
  if (j.contains("theta")) {
    if (!j["theta"].is_number_unsigned() || j["theta"].get<std::size_t>() == 0) {
      throw std::invalid_argument("\"" + field + ".theta\" must be a positive integer");
    }
    spec.theta = j["theta"].get<std::size_t>();
  }
  spec.with_bot = j.value("with_bot", spec.with_bot);
  return spec;
}

}  // namespace

ErrorStats monte_carlo_error(const MechanismConfig& config, const Workload& w,
                             const HistogramDB& x, double epsilon, std::size_t runs,
                             std::uint64_t seed) {
  return monte_carlo_error(*prepare_mechanism(config, w, x), w, x, epsilon, runs, seed);
}

ErrorStats monte_carlo_error(const PreparedMechanism& mechanism, const Workload& w,
                             const HistogramDB& x, double epsilon, std::size_t runs,
                             std::uint64_t seed) {
  if (runs == 0) throw std::invalid_argument("runs must be at least 1");
  const DenseVector exact = evaluate(w, x);
  ErrorStats stats;
  stats.per_query_mse.assign(exact.size(), 0.0);
  stats.runs = runs;
  stats.seed = seed;
  for (std::size_t r = 0; r < runs; ++r) {
    const NoisyAnswer noisy = mechanism.answer(epsilon, derive_seed(seed, r));
    for (std::size_t q = 0; q < exact.size(); ++q) {
      const double diff = noisy.values[q] - exact[q];
      stats.per_query_mse[q] += diff * diff;
    }
  }
  for (double& v : stats.per_query_mse) v /= static_cast<double>(runs);
  for (double v : stats.per_query_mse) stats.total_mse += v;
  stats.mean_per_query_mse =
      exact.empty() ? 0.0 : stats.total_mse / static_cast<double>(exact.size());
  return stats;
}

double svd_lower_bound(const Workload& w_g, double epsilon, double delta) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  if (w_g.matrix.cols() == 0) return 0.0;
  double sum = 0.0;
  for (double s : singular_values(w_g.matrix)) sum += s;
  const double p = 2.0 * std::log(2.0 / delta) / (epsilon * epsilon);
  return p * sum * sum / static_cast<double>(w_g.matrix.cols());
}

std::string DatasetSpec::label() const {
  if (!file.empty()) return file;
  std::ostringstream out;
  out << "synthetic-n" << scale << "-z" << zero_fraction;
  return out.str();
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("experiment config is not valid JSON: ") +
                                e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("experiment config must be a JSON object");
  }

  ExperimentConfig config;
  if (!j.contains("domain") || !j["domain"].is_array() || j["domain"].empty()) {
    throw std::invalid_argument("\"domain\" must be a nonempty array of cell counts");
  }
  std::vector<std::size_t> dims;
  for (const json& v : j["domain"]) {
    if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
      throw std::invalid_argument("\"domain\" entries must be positive integers");
    }
    dims.push_back(v.get<std::size_t>());
  }
  config.domain = Domain(dims);

  if (j.contains("policy")) config.policy = parse_policy_spec(j["policy"], "policy");

  config.workload_kind = j.value("workload", config.workload_kind);
  parse_workload_kind(config.workload_kind);
  if (j.contains("workload_count")) {
    if (!j["workload_count"].is_number_unsigned() ||
        j["workload_count"].get<std::size_t>() == 0) {
      throw std::invalid_argument("\"workload_count\" must be a positive integer");
    }
    config.workload_count = j["workload_count"].get<std::size_t>();
  }
  config.workload_seed = j.value("workload_seed", config.workload_seed);

  if (j.contains("mechanisms")) {
    if (!j["mechanisms"].is_array()) {
      throw std::invalid_argument("\"mechanisms\" must be an array");
    }
    for (const json& m : j["mechanisms"]) {
      MechanismConfig mc;
      if (m.is_string()) {
        mc.id = m.get<std::string>();
      } else if (m.is_object()) {
        if (!m.contains("id") || !m["id"].is_string()) {
          throw std::invalid_argument("each mechanism needs a string \"id\"");
        }
        mc.id = m["id"].get<std::string>();
        if (m.contains("theta")) {
          if (!m["theta"].is_number_unsigned() || m["theta"].get<std::size_t>() == 0) {
            throw std::invalid_argument("\"mechanisms[].theta\" must be a positive integer");
          }
          mc.theta = m["theta"].get<std::size_t>();
        }
        if (m.contains("branching")) {
          if (!m["branching"].is_number_unsigned() ||
              m["branching"].get<std::size_t>() < 2) {
            throw std::invalid_argument("\"mechanisms[].branching\" must be at least 2");
          }
          mc.branching = m["branching"].get<std::size_t>();
        }
        if (m.contains("policy")) {
          mc.policy = parse_policy_spec(m["policy"], "mechanisms[].policy");
        }
      } else {
        throw std::invalid_argument("\"mechanisms\" entries must be ids or objects");
      }
      config.mechanisms.push_back(std::move(mc));
    }
  }
  config.baseline = j.value("baseline", config.baseline);
  if (config.mechanisms.empty() && !config.baseline) {
    throw std::invalid_argument("\"mechanisms\" is empty and no baseline was requested");
  }

  if (j.contains("epsilons")) {
    if (!j["epsilons"].is_array() || j["epsilons"].empty()) {
      throw std::invalid_argument("\"epsilons\" must be a nonempty array");
    }
    config.epsilons.clear();
    for (const json& v : j["epsilons"]) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) {
        throw std::invalid_argument("\"epsilons\" entries must be positive numbers");
      }
      config.epsilons.push_back(v.get<double>());
    }
  }
  if (j.contains("runs")) {
    if (!j["runs"].is_number_unsigned() || j["runs"].get<std::size_t>() == 0) {
      throw std::invalid_argument("\"runs\" must be a positive integer");
    }
    config.runs = j["runs"].get<std::size_t>();
  }
  config.seed = j.value("seed", config.seed);

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    if (!d.is_object()) throw std::invalid_argument("\"dataset\" must be an object");
    config.dataset.file = d.value("file", config.dataset.file);
    if (d.contains("scale")) {
      if (!d["scale"].is_number() || !(d["scale"].get<double>() > 0.0)) {
        throw std::invalid_argument("\"dataset.scale\" must be a positive number");
      }
      config.dataset.scale = d["scale"].get<double>();
    }
    if (d.contains("zero_fraction")) {
      const double z = d["zero_fraction"].is_number() ? d["zero_fraction"].get<double>() : -1.0;
      if (z < 0.0 || z >= 1.0) {
        throw std::invalid_argument("\"dataset.zero_fraction\" must lie in [0, 1)");
      }
      config.dataset.zero_fraction = z;
    }
    config.dataset.seed = d.value("seed", config.dataset.seed);
  }
  return config;
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config) {
  for (double epsilon : config.epsilons) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon values must be positive");
  }
  if (config.runs == 0) throw std::invalid_argument("runs must be at least 1");

  const HistogramDB x =
      config.dataset.file.empty()
          ? synth_histogram(config.domain, config.dataset.scale,
                            config.dataset.zero_fraction, config.dataset.seed)
          : load_histogram(config.dataset.file, config.domain);

  const WorkloadKind kind = parse_workload_kind(config.workload_kind);
  const Workload w =
      kind == WorkloadKind::kSampledRanges
          ? sample_range_workload(config.domain, config.workload_count,
                                  config.workload_seed)
                .first
          : make_workload(kind, config.domain);

  std::vector<MechanismConfig> mechanisms = config.mechanisms;
  if (config.baseline) {
    MechanismConfig baseline;
    baseline.id = "mm-wavelet";
    baseline.policy.family = "star";
    mechanisms.push_back(std::move(baseline));
  }

  std::vector<ResultRecord> records;
  for (const MechanismConfig& mc : mechanisms) {
    const auto prepared = prepare_mechanism(mc, w, x);
    for (double epsilon : config.epsilons) {
      const auto start = std::chrono::steady_clock::now();
      const ErrorStats stats =
          monte_carlo_error(*prepared, w, x, epsilon, config.runs, config.seed);
      ResultRecord record;
      record.mechanism = mc.id;
      record.epsilon = epsilon;
      record.mean_per_query_mse = stats.mean_per_query_mse;
      record.total_mse = stats.total_mse;
      record.stretch = prepared->stretch();
      record.wall_ms = elapsed_ms(start);
      record.runs = stats.runs;
      records.push_back(std::move(record));
    }
  }
  return records;
}

std::string results_to_json(const ExperimentConfig& config,
                            const std::vector<ResultRecord>& records) {
  json out;
  out["config"] = {
      {"domain", config.domain.dims()},
      {"policy",
       {{"family", config.policy.family},
        {"theta", config.policy.theta},
        {"with_bot", config.policy.with_bot}}},
      {"workload", config.workload_kind},
      {"workload_count", config.workload_count},
      {"workload_seed", config.workload_seed},
      {"baseline", config.baseline},
      {"epsilons", config.epsilons},
      {"runs", config.runs},
      {"seed", config.seed},
      {"dataset", config.dataset.label()},
  };
  out["results"] = json::array();
  for (const ResultRecord& r : records) {
    out["results"].push_back({
        {"mechanism", r.mechanism},
        {"epsilon", r.epsilon},
        {"mean_per_query_mse", r.mean_per_query_mse},
        {"total_mse", r.total_mse},
        {"stretch", r.stretch},
        {"wall_ms", r.wall_ms},
        {"runs", r.runs},
    });
  }
  return out.dump(2);
}

std::string results_to_csv(const ExperimentConfig& config,
                           const std::vector<ResultRecord>& records) {
  std::ostringstream out;
  out << "mechanism,epsilon,dataset,mse,total_mse,stretch,wall_ms,runs\n";
  const std::string dataset = config.dataset.label();
  for (const ResultRecord& r : records) {
    out << r.mechanism << ',' << r.epsilon << ',' << dataset << ','
        << r.mean_per_query_mse << ',' << r.total_mse << ',' << r.stretch << ','
        << r.wall_ms << ',' << r.runs << '\n';
  }
  return out.str();
}

}  // namespace blowfish
