#include "blowfish/cli.hpp"

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "blowfish/evaluation.hpp"
#include "blowfish/mechanisms.hpp"
#include "blowfish/transform.hpp"

namespace blowfish {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

PolicyGraph load_graph(const std::string& path) {
  return policy_graph_from_json(read_file(path));
}

// Transformed workloads of all components side by side, one column block per
// component.
SparseMatrix stack_transformed(const PreparedTransform& pt) {
  std::size_t cols = 0;
  for (const auto& comp : pt.components()) cols += comp.transformed.matrix.cols();
  std::vector<Triplet> entries;
  std::size_t offset = 0;
  for (const auto& comp : pt.components()) {
    for (const Triplet& t : comp.transformed.matrix.entries()) {
      entries.push_back({t.row, t.col + offset, t.value});
    }
    offset += comp.transformed.matrix.cols();
  }
  return SparseMatrix::from_triplets(pt.query_count(), cols, std::move(entries));
}

struct GraphBuildArgs {
  std::vector<std::size_t> dims;
  std::string family = "theta";
  std::size_t theta = 1;
  bool bot = false;
};

struct TransformShowArgs {
  std::string graph_file;
  std::string workload = "cumulative";
};

struct RunArgs {
  std::string mechanism;
  std::string data_file;
  std::vector<std::size_t> dims;
  std::string queries_file;
  std::string workload = "identity";
  double epsilon = 1.0;
  std::uint64_t seed = 0;
  std::size_t theta = 1;
  std::size_t branching = 2;
  std::string policy = "star";
  bool with_bot = false;
  bool noiseless = false;
};

struct ExperimentArgs {
  std::string config_file;
  bool csv = false;
};

struct SpannerArgs {
  std::string g_file;
  std::string h_file;
};

struct LowerBoundArgs {
  std::vector<std::size_t> dims;
  std::string workload = "cumulative";
  std::string graph = "line";
  std::size_t theta = 1;
  bool bot = false;
  double epsilon = 1.0;
  double delta = 0.001;
};

Workload named_workload(const std::string& name, const Domain& domain) {
  if (name == "identity") return make_workload(WorkloadKind::kIdentity, domain);
  if (name == "cumulative") return make_workload(WorkloadKind::kCumulative, domain);
  if (name == "all_ranges") return make_workload(WorkloadKind::kAllRanges, domain);
  throw std::invalid_argument("unknown workload \"" + name +
                              "\" (expected identity|cumulative|all_ranges)");
}

void do_graph_build(const GraphBuildArgs& args, std::ostream& out) {
  const Domain domain(args.dims);
  PolicySpec spec;
  spec.family = args.family;
  spec.theta = args.theta;
  spec.with_bot = args.bot;
  out << policy_graph_to_json(build_policy(domain, spec)) << "\n";
}

void do_transform_show(const TransformShowArgs& args, std::ostream& out) {
  const PolicyGraph g = load_graph(args.graph_file);
  const Workload w = named_workload(args.workload, g.domain());
  const PreparedTransform pt = PreparedTransform::build(g, w);

  std::size_t w_g_cols = 0;
  std::size_t p_rows = 0;
  std::size_t p_cols = 0;
  std::size_t p_nnz = 0;
  std::size_t p_inv_nnz = 0;
  std::size_t reductions = 0;
  for (const auto& comp : pt.components()) {
    w_g_cols += comp.transformed.matrix.cols();
    p_rows += comp.pair.p_g.rows();
    p_cols += comp.pair.p_g.cols();
    p_nnz += comp.pair.p_g.nnz();
    p_inv_nnz += comp.pair.p_g_inv.nnz();
    if (comp.reduction) ++reductions;
  }

  nlohmann::json report;
  report["sensitivity"] = pt.sensitivity();
  report["w_g"] = {{"rows", pt.query_count()}, {"cols", w_g_cols}};
  report["p_g"] = {{"rows", p_rows}, {"cols", p_cols}, {"nnz", p_nnz}};
  report["p_g_inv"] = {{"nnz", p_inv_nnz}};
  report["components"] = pt.components().size();
  report["vertex_replacements"] = reductions;
  out << report.dump(2) << "\n";
}

void do_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  std::optional<Domain> dims;
  if (!args.dims.empty()) dims = Domain(args.dims);
  const HistogramDB x = load_histogram(args.data_file, dims);

  Workload w;
  if (!args.queries_file.empty()) {
    w = workload_from_ranges(x.domain, load_ranges_csv(args.queries_file, x.domain));
  } else {
    w = named_workload(args.workload, x.domain);
  }

  MechanismConfig config;
  config.id = args.mechanism;
  config.theta = args.theta;
  config.branching = args.branching;
  config.policy.family = args.policy;
  config.policy.theta = args.theta;
  config.policy.with_bot = args.with_bot;

  const auto prepared = prepare_mechanism(config, w, x);
  err << "prepared " << prepared->id() << " over " << w.matrix.rows()
      << " queries, stretch " << prepared->stretch() << "\n";
  const NoisyAnswer answer = prepared->answer(args.epsilon, args.seed, args.noiseless);

  nlohmann::json report;
  report["mechanism"] = answer.mechanism_id;
  report["epsilon"] = answer.epsilon;
  report["seed"] = answer.seed;
  report["stretch"] = answer.stretch_factor;
  report["noiseless"] = args.noiseless;
  report["values"] = answer.values;
  out << report.dump(2) << "\n";
}

void do_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err) {
  const ExperimentConfig config = parse_experiment_config(read_file(args.config_file));
  err << "running " << config.mechanisms.size() + (config.baseline ? 1 : 0)
      << " mechanism(s) x " << config.epsilons.size() << " epsilon value(s), "
      << config.runs << " run(s) each\n";
  const std::vector<ResultRecord> records = run_experiment(config);
  out << (args.csv ? results_to_csv(config, records) : results_to_json(config, records));
  if (!args.csv) out << "\n";
}

void do_spanner_check(const SpannerArgs& args, std::ostream& out) {
  const PolicyGraph g = load_graph(args.g_file);
  const PolicyGraph h = load_graph(args.h_file);
  out << spanner_stretch(g, h) << "\n";
}

void do_lowerbound(const LowerBoundArgs& args, std::ostream& out, std::ostream& err) {
  const Domain domain(args.dims);
  const Workload w = named_workload(args.workload, domain);
  PolicySpec spec;
  spec.family = args.graph;
  spec.theta = args.theta;
  spec.with_bot = args.bot;
  const PolicyGraph g = build_policy(domain, spec);
  const PreparedTransform pt = PreparedTransform::build(g, w);
  const Workload w_g{stack_transformed(pt), WorkloadKind::kCustom};
  err << "translated workload: " << w_g.matrix.rows() << " x " << w_g.matrix.cols()
      << "\n";
  out << svd_lower_bound(w_g, args.epsilon, args.delta) << "\n";
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blowfish policy-aware private query answering"};
  app.require_subcommand(1);

  GraphBuildArgs graph_args;
  CLI::App* graph = app.add_subcommand("graph", "Policy graph tools");
  graph->require_subcommand(1);
  CLI::App* graph_build = graph->add_subcommand("build", "Emit a policy graph as JSON");
  graph_build->add_option("--dims", graph_args.dims, "Domain sizes per dimension")
      ->required()
      ->delimiter(',');
  graph_build
      ->add_option("--family", graph_args.family,
                   "line|grid|theta|star|complete|theta-spanner")
      ->capture_default_str();
  graph_build->add_option("--theta", graph_args.theta, "Distance threshold")
      ->capture_default_str();
  graph_build->add_flag("--bot", graph_args.bot, "Attach the open-world vertex");

  TransformShowArgs show_args;
  CLI::App* transform = app.add_subcommand("transform", "Workload translation tools");
  transform->require_subcommand(1);
  CLI::App* transform_show =
      transform->add_subcommand("show", "Summarize the translated workload");
  transform_show->add_option("--graph", show_args.graph_file, "Policy graph JSON file")
      ->required();
  transform_show
      ->add_option("--workload", show_args.workload, "identity|cumulative|all_ranges")
      ->capture_default_str();

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Answer queries with a mechanism");
  run->add_option("--mechanism", run_args.mechanism,
                  "laplace|mm-hier|mm-wavelet|bf-line|bf-grid|bf-theta1d|bf-thetamd")
      ->required();
  run->add_option("--data", run_args.data_file, "Histogram file")->required();
  run->add_option("--dims", run_args.dims, "Domain sizes (multi-dimensional data)")
      ->delimiter(',');
  run->add_option("--queries", run_args.queries_file, "Range CSV (1-based endpoints)");
  run->add_option("--workload", run_args.workload,
                  "Named workload when --queries is absent")
      ->capture_default_str();
  run->add_option("--epsilon", run_args.epsilon, "Privacy budget")->required();
  run->add_option("--seed", run_args.seed, "Noise seed")->envname("BLOWFISH_SEED");
  run->add_option("--theta", run_args.theta, "Distance threshold for bf-theta*")
      ->capture_default_str();
  run->add_option("--branching", run_args.branching, "Hierarchy fan-out")
      ->capture_default_str();
  run->add_option("--policy", run_args.policy,
                  "Policy family for laplace/mm-* sensitivity")
      ->capture_default_str();
  run->add_flag("--with-bot", run_args.with_bot, "Attach bot to the policy");
  run->add_flag("--noiseless", run_args.noiseless, "Skip noise, emit exact answers");

  ExperimentArgs experiment_args;
  CLI::App* experiment = app.add_subcommand("experiment", "Run an experiment config");
  experiment->add_option("--config", experiment_args.config_file, "JSON config file")
      ->required();
  experiment->add_flag("--csv", experiment_args.csv, "Emit tidy CSV instead of JSON");

  SpannerArgs spanner_args;
  CLI::App* spanner = app.add_subcommand("spanner", "Spanner tools");
  spanner->require_subcommand(1);
  CLI::App* spanner_check =
      spanner->add_subcommand("check", "Measure the stretch of h against g");
  spanner_check->set_help_flag("--help", "Print help");
  spanner_check->add_option("--g", spanner_args.g_file, "Policy graph JSON")->required();
  spanner_check->add_option("--h", spanner_args.h_file, "Subgraph JSON")->required();

  LowerBoundArgs lb_args;
  CLI::App* lowerbound =
      app.add_subcommand("lowerbound", "Spectral error bound for a translated workload");
  lowerbound->add_option("--dims", lb_args.dims, "Domain sizes per dimension")
      ->required()
      ->delimiter(',');
  lowerbound->add_option("--workload", lb_args.workload, "identity|cumulative|all_ranges")
      ->capture_default_str();
  lowerbound->add_option("--graph", lb_args.graph, "Policy family")
      ->capture_default_str();
  lowerbound->add_option("--theta", lb_args.theta, "Distance threshold")
      ->capture_default_str();
  lowerbound->add_flag("--bot", lb_args.bot, "Attach the open-world vertex");
  lowerbound->add_option("--epsilon", lb_args.epsilon, "Privacy budget")->required();
  lowerbound->add_option("--delta", lb_args.delta, "Failure probability")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    if (graph_build->parsed()) do_graph_build(graph_args, out);
    if (transform_show->parsed()) do_transform_show(show_args, out);
    if (run->parsed()) do_run(run_args, out, err);
    if (experiment->parsed()) do_experiment(experiment_args, out, err);
    if (spanner_check->parsed()) do_spanner_check(spanner_args, out);
    if (lowerbound->parsed()) do_lowerbound(lb_args, out, err);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e, out, err);
    }
    err << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace blowfish
