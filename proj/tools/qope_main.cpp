// Command-line front end: evaluate logged or simulated decision data, run the
// benchmark experiments, emit synthetic datasets, and summarize CSV inputs.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qope/core/csv.hpp"
#include "qope/core/error.hpp"
#include "qope/core/parallel.hpp"
#include "qope/core/stats.hpp"
#include "qope/inference/inference.hpp"
#include "qope/mean/mean.hpp"
#include "qope/quantile/solver.hpp"
#include "qope/simbench/dgp.hpp"
#include "qope/simbench/experiments.hpp"

namespace {

using namespace qope;
using core::format_double;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
  std::string data_path;
  std::string dgp;  // "single" or "two"
  double df = 3.0;
  bool normal_noise = false;
  int n = 2500;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = ".";
};

struct EstimatorOptions {
  int folds = 5;
  int mc_samples = 50;
  int grid = 99;
  std::string method = "dr";
  std::string solver = "auto";
  std::string aggregation = "pooled";
  std::string rollout = "observed";
  std::string propensity = "fit";
  double constant_propensity = 0.5;
  double clip = 0.01;
  double bandwidth = 0.15;
  std::string bandwidth_rule = "fixed";
  double alpha = 0.05;
  int gbdt_rounds = 100;
  int gbdt_depth = 3;
  double gbdt_learning_rate = 0.1;
  int gbdt_min_leaf = 10;
  int mdn_components = 4;
  int mdn_epochs = 200;
  int mdn_batch = 128;
  double mdn_learning_rate = 1e-2;
  std::vector<int> mdn_hidden{8, 8};
};

double resolved_df(const CommonOptions& opt) {
  return opt.normal_noise ? simbench::kNormalNoise : opt.df;
}

simbench::DgpSpec dgp_spec(const CommonOptions& opt) {
  simbench::DgpSpec spec;
  if (opt.dgp == "single")
    spec.kind = simbench::DgpSpec::Kind::single_stage;
  else if (opt.dgp == "two")
    spec.kind = simbench::DgpSpec::Kind::two_stage;
  else
    throw ConfigError("unknown dgp '" + opt.dgp + "' (expected single or two)");
  spec.df = resolved_df(opt);
  spec.n = opt.n;
  return spec;
}

quantile::Solver parse_solver(const std::string& name) {
  if (name == "auto") return quantile::Solver::automatic;
  if (name == "kink") return quantile::Solver::kink_scan;
  if (name == "subgradient") return quantile::Solver::subgradient;
  throw ConfigError("unknown solver '" + name + "'");
}

quantile::Aggregation parse_aggregation(const std::string& name) {
  if (name == "pooled") return quantile::Aggregation::pooled;
  if (name == "per-fold") return quantile::Aggregation::per_fold_average;
  throw ConfigError("unknown aggregation '" + name + "'");
}

quantile::EstimatorConfig estimator_config(const EstimatorOptions& opt) {
  quantile::EstimatorConfig cfg;
  cfg.num_folds = opt.folds;
  cfg.mc_samples = opt.mc_samples;
  cfg.solver = parse_solver(opt.solver);
  cfg.aggregation = parse_aggregation(opt.aggregation);
  return cfg;
}

quantile::NuisanceConfig nuisance_config(const EstimatorOptions& opt, const CommonOptions& common,
                                         bool have_dgp) {
  quantile::NuisanceConfig cfg;
  cfg.num_folds = opt.folds;
  cfg.mc_samples = opt.mc_samples;
  cfg.propensity.gbdt.rounds = opt.gbdt_rounds;
  cfg.propensity.gbdt.max_depth = opt.gbdt_depth;
  cfg.propensity.gbdt.learning_rate = opt.gbdt_learning_rate;
  cfg.propensity.gbdt.min_samples_leaf = opt.gbdt_min_leaf;
  cfg.propensity.gbdt.clip_floor = opt.clip;
  if (opt.propensity == "fit") {
    cfg.propensity.kind = quantile::PropensityKind::fit_gbdt;
  } else if (opt.propensity == "oracle") {
    if (!have_dgp)
      throw ConfigError("--propensity oracle needs a --dgp design (mechanism unknown otherwise)");
    cfg.propensity.kind = quantile::PropensityKind::oracle;
    cfg.propensity.oracle = simbench::oracle_behavior_policy(dgp_spec(common));
  } else if (opt.propensity == "constant") {
    cfg.propensity.kind = quantile::PropensityKind::constant;
    cfg.propensity.constant_value = opt.constant_propensity;
  } else {
    throw ConfigError("unknown propensity source '" + opt.propensity + "'");
  }
  cfg.reward.kind = quantile::RewardKind::fit_mdn;
  cfg.reward.mdn.hidden = opt.mdn_hidden;
  cfg.reward.mdn.components = opt.mdn_components;
  cfg.reward.mdn.epochs = opt.mdn_epochs;
  cfg.reward.mdn.batch_size = opt.mdn_batch;
  cfg.reward.mdn.learning_rate = opt.mdn_learning_rate;
  cfg.rollout_covariates = opt.rollout == "regenerate"
                               ? quantile::RolloutCovariates::regenerate
                               : quantile::RolloutCovariates::observed;
  return cfg;
}

inference::KernelSpec kernel_spec(const EstimatorOptions& opt) {
  inference::KernelSpec spec;
  spec.rule = opt.bandwidth_rule == "scott" ? inference::KernelSpec::Bandwidth::scott
                                            : inference::KernelSpec::Bandwidth::fixed;
  spec.bandwidth = opt.bandwidth;
  return spec;
}

std::vector<std::pair<std::string, std::string>> resolved_config(
    const std::string& command, const CommonOptions& common, const EstimatorOptions& est,
    const std::vector<double>& taus) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("command", command);
  if (!common.data_path.empty()) kv.emplace_back("data", common.data_path);
  if (!common.dgp.empty()) {
    kv.emplace_back("dgp", common.dgp);
    kv.emplace_back("df", simbench::format_df(resolved_df(common)));
    kv.emplace_back("n", std::to_string(common.n));
  }
  kv.emplace_back("seed", std::to_string(common.seed));
  kv.emplace_back("out", common.out_dir);
  std::ostringstream tau_list;
  for (std::size_t i = 0; i < taus.size(); ++i) tau_list << (i ? "," : "") << taus[i];
  kv.emplace_back("taus", tau_list.str());
  kv.emplace_back("method", est.method);
  kv.emplace_back("folds", std::to_string(est.folds));
  kv.emplace_back("mc_samples", std::to_string(est.mc_samples));
  kv.emplace_back("grid", std::to_string(est.grid));
  kv.emplace_back("solver", est.solver);
  kv.emplace_back("aggregation", est.aggregation);
  kv.emplace_back("rollout_covariates", est.rollout);
  kv.emplace_back("propensity", est.propensity);
  kv.emplace_back("clip_floor", format_double(est.clip));
  kv.emplace_back("bandwidth_rule", est.bandwidth_rule);
  kv.emplace_back("bandwidth", format_double(est.bandwidth));
  kv.emplace_back("alpha", format_double(est.alpha));
  kv.emplace_back("gbdt_rounds", std::to_string(est.gbdt_rounds));
  kv.emplace_back("gbdt_depth", std::to_string(est.gbdt_depth));
  kv.emplace_back("mdn_components", std::to_string(est.mdn_components));
  kv.emplace_back("mdn_epochs", std::to_string(est.mdn_epochs));
  return kv;
}

void write_header(std::ostream& out,
                  const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [key, value] : kv) out << "# " << key << "=" << value << "\n";
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Flat key=value config support: occurrences of `--config FILE` are expanded
// into `--key=value` tokens placed directly after the subcommand name, so
// anything typed on the command line takes precedence (options use a
// take-last policy).
std::vector<std::string> expand_config_args(std::vector<std::string> args) {
  std::vector<std::string> expanded;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file path");
      path = args[i + 1];
      ++i;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      expanded.push_back(args[i]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::vector<std::string> tokens;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string text = trim(line);
      if (text.empty() || text[0] == '#') continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                          ": expected key=value");
      const std::string key = trim(text.substr(0, eq));
      const std::string value = trim(text.substr(eq + 1));
      if (key.empty() || key == "config")
        throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                          ": bad key");
      tokens.push_back("--" + key + "=" + value);
    }
    // Insert after the subcommand name (the first bare token).
    std::size_t at = 0;
    while (at < expanded.size() && !expanded[at].empty() && expanded[at][0] == '-') ++at;
    if (at < expanded.size()) ++at;
    expanded.insert(expanded.begin() + static_cast<std::ptrdiff_t>(at), tokens.begin(),
                    tokens.end());
  }
  return expanded;
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file '" + path.string() + "'");
  return out;
}

int run_evaluate(const CommonOptions& common, const EstimatorOptions& est,
                 std::vector<double> taus) {
  if (common.data_path.empty() == common.dgp.empty())
    throw ConfigError("evaluate needs exactly one of --data or --dgp");
  if (taus.empty()) throw ConfigError("evaluate needs --tau or --taus");
  for (double tau : taus)
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("quantile levels must lie in (0, 1)");

  core::RngStream rng(common.seed);
  core::Dataset dataset;
  core::Policy target = simbench::target_policy();
  const bool have_dgp = !common.dgp.empty();
  if (have_dgp) {
    core::RngStream gen_rng = rng.fork("dgp");
    dataset = simbench::generate(dgp_spec(common), gen_rng);
  } else {
    dataset = core::read_dataset_csv_file(common.data_path);
  }

  const auto ncfg = nuisance_config(est, common, have_dgp);
  core::RngStream fit_rng = rng.fork("nuisance");
  const auto bundle = quantile::fit_nuisances(dataset, target, ncfg, fit_rng);
  const auto ecfg = estimator_config(est);
  const auto method = quantile::method_from_name(est.method);
  const auto kernel = kernel_spec(est);

  const auto config_kv = resolved_config("evaluate", common, est, taus);
  {
    auto out = open_output(common.out_dir, "quantiles.csv");
    write_header(out, config_kv);
    out << "tau,eta_hat,j0,sigma,ci_lo,ci_hi,method\n";
    const quantile::PreparedSolver solver(bundle, method, ecfg);
    for (double tau : taus) {
      auto estimate = solver.solve(tau);
      if (method == quantile::Method::dr) {
        inference::run_inference(bundle, estimate, kernel, est.alpha);
        out << format_double(tau) << ',' << format_double(estimate.eta_hat) << ','
            << format_double(estimate.j0) << ',' << format_double(std::sqrt(estimate.sigma2))
            << ',' << format_double(estimate.ci->lower) << ','
            << format_double(estimate.ci->upper) << ',' << est.method << "\n";
      } else {
        out << format_double(tau) << ',' << format_double(estimate.eta_hat) << ",,,,,"
            << est.method << "\n";
      }
    }
  }
  {
    auto out = open_output(common.out_dir, "mean.csv");
    write_header(out, config_kv);
    out << "rquantile,rmean\n";
    const auto grid = mean::QuantileGrid::midpoint(est.grid);
    const double rquantile = mean::tail_robust_mean(bundle, grid, ecfg, method).value;
    const double rmean = mean::classic_dr_mean(bundle);
    out << format_double(rquantile) << ',' << format_double(rmean) << "\n";
  }
  return kExitOk;
}

int run_simulate(const CommonOptions& common, const std::string& out_file) {
  if (common.dgp.empty()) throw ConfigError("simulate needs --dgp");
  core::RngStream rng(common.seed);
  core::RngStream gen_rng = rng.fork("dgp");
  const auto dataset = simbench::generate(dgp_spec(common), gen_rng);
  if (out_file == "-") {
    core::write_dataset_csv(std::cout, dataset);
  } else {
    core::write_dataset_csv_file(out_file, dataset);
  }
  return kExitOk;
}

int run_inspect(const std::string& data_path) {
  const auto dataset = core::read_dataset_csv_file(data_path);
  std::cout << "trajectories: " << dataset.size() << "\n";
  std::cout << "horizon: " << dataset.horizon << "\n";
  std::cout << "action_space: " << dataset.action_space << "\n";
  for (int k = 1; k <= dataset.horizon; ++k) {
    std::vector<int> counts(dataset.action_space, 0);
    double reward_sum = 0.0, reward_min = 0.0, reward_max = 0.0;
    bool first = true;
    for (const auto& traj : dataset.trajectories) {
      const auto& st = traj.stages[k - 1];
      ++counts[st.action];
      reward_sum += st.reward;
      if (first || st.reward < reward_min) reward_min = st.reward;
      if (first || st.reward > reward_max) reward_max = st.reward;
      first = false;
    }
    std::cout << "stage " << k << ": covariate_dim=" << dataset.covariate_dims[k - 1]
              << " action_counts=[";
    for (int a = 0; a < dataset.action_space; ++a) std::cout << (a ? "," : "") << counts[a];
    std::cout << "] reward_mean=" << reward_sum / dataset.size() << " reward_min=" << reward_min
              << " reward_max=" << reward_max << "\n";
  }
  std::vector<double> sums;
  sums.reserve(dataset.size());
  for (const auto& traj : dataset.trajectories) sums.push_back(core::cumulative_reward(traj));
  std::sort(sums.begin(), sums.end());
  std::cout << "cumulative reward quartiles: " << core::empirical_quantile(sums, 0.25) << " "
            << core::empirical_quantile(sums, 0.5) << " " << core::empirical_quantile(sums, 0.75)
            << "\n";
  return kExitOk;
}

void write_report(const simbench::ExperimentReport& report, const std::string& out_dir) {
  {
    auto out = open_output(out_dir, report.name + "_records.csv");
    report.records.write_csv(out, report.config);
  }
  {
    auto out = open_output(out_dir, report.name + "_aggregates.csv");
    report.aggregates.write_csv(out, report.config);
  }
  {
    auto out = open_output(out_dir, report.name + "_summary.txt");
    for (const auto& [key, value] : report.config) out << "# " << key << "=" << value << "\n";
    out << report.summary;
  }
  std::cout << report.summary;
}

int run_experiment(const std::string& preset, const CommonOptions& common,
                   const EstimatorOptions& est, int replicates, std::vector<double> dfs,
                   std::vector<double> taus, std::vector<double> bandwidths, int num_taus) {
  simbench::ExperimentConfig cfg;
  cfg.n = common.n;
  cfg.num_folds = est.folds;
  cfg.mc_samples = est.mc_samples;
  cfg.grid_size = est.grid;
  cfg.solver = parse_solver(est.solver);
  cfg.aggregation = parse_aggregation(est.aggregation);
  cfg.gbdt.rounds = est.gbdt_rounds;
  cfg.gbdt.max_depth = est.gbdt_depth;
  cfg.gbdt.learning_rate = est.gbdt_learning_rate;
  cfg.gbdt.min_samples_leaf = est.gbdt_min_leaf;
  cfg.gbdt.clip_floor = est.clip;
  cfg.mdn.hidden = est.mdn_hidden;
  cfg.mdn.components = est.mdn_components;
  cfg.mdn.epochs = est.mdn_epochs;
  cfg.mdn.batch_size = est.mdn_batch;
  cfg.mdn.learning_rate = est.mdn_learning_rate;
  cfg.kernel = kernel_spec(est);
  cfg.alpha = est.alpha;
  cfg.threads = common.threads > 0 ? common.threads : core::default_threads();
  cfg.seed = common.seed;

  const double df = resolved_df(common);
  if (taus.empty()) taus = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  simbench::ExperimentReport report;
  if (preset == "table1") {
    if (dfs.empty()) dfs = {1.2, 1.5, 1.8, 2.0, 2.5, 3.0, 3.5, 4.0};
    report =
        simbench::run_mse_experiment(simbench::DgpSpec::Kind::single_stage, dfs, replicates, cfg);
  } else if (preset == "table2") {
    if (dfs.empty()) dfs = {2.0, 4.0, 6.0, 8.0, simbench::kNormalNoise};
    report =
        simbench::run_mse_experiment(simbench::DgpSpec::Kind::two_stage, dfs, replicates, cfg);
  } else if (preset == "coverage") {
    report = simbench::run_coverage_experiment(df, taus, replicates, cfg);
  } else if (preset == "methods") {
    simbench::DgpSpec spec;
    spec.kind = simbench::DgpSpec::Kind::single_stage;
    spec.df = dfs.empty() ? df : dfs[0];
    spec.n = common.n;
    report = simbench::run_method_comparison(spec, taus, replicates, cfg);
  } else if (preset == "bandwidth") {
    if (bandwidths.empty()) bandwidths = {0.10, 0.15, 0.20};
    report = simbench::run_bandwidth_sweep(bandwidths, true, df, taus, replicates, cfg);
  } else if (preset == "fig3") {
    report = simbench::run_cdf_overlay(simbench::DgpSpec::Kind::single_stage, df, num_taus, cfg);
  } else {
    throw ConfigError("unknown experiment preset '" + preset +
                      "' (expected table1, table2, coverage, bandwidth, methods or fig3)");
  }
  write_report(report, common.out_dir);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"doubly-robust quantile off-policy evaluation"};
  app.require_subcommand(1);

  CommonOptions common;
  EstimatorOptions est;
  std::vector<double> taus;
  double single_tau = -1.0;

  std::string config_path_doc;  // consumed before parsing; registered for --help
  auto add_common = [&](CLI::App* cmd, bool with_data) {
    cmd->add_option("--config", config_path_doc, "flat key=value config file; flags win");
    if (with_data) cmd->add_option("--data", common.data_path, "dataset CSV path");
    cmd->add_option("--dgp", common.dgp, "synthetic design: single or two");
    cmd->add_option("--df", common.df, "noise degrees of freedom");
    cmd->add_flag("--normal", common.normal_noise, "Gaussian noise instead of Student-t");
    cmd->add_option("--n", common.n, "synthetic sample size");
    cmd->add_option("--seed", common.seed, "root seed");
    cmd->add_option("--threads", common.threads, "worker cap (0 = all cores)");
    cmd->add_option("--out", common.out_dir, "output directory");
  };
  auto add_estimator = [&](CLI::App* cmd) {
    cmd->add_option("--method", est.method, "dm, ipw or dr");
    cmd->add_option("--folds", est.folds, "cross-fitting folds");
    cmd->add_option("--mc-samples", est.mc_samples, "pseudo outcomes per subject/stage");
    cmd->add_option("--grid", est.grid, "midpoint grid size for the aggregated mean");
    cmd->add_option("--solver", est.solver, "auto, kink or subgradient");
    cmd->add_option("--aggregation", est.aggregation, "pooled or per-fold");
    cmd->add_option("--rollout-covariates", est.rollout, "observed or regenerate");
    cmd->add_option("--propensity", est.propensity, "fit, oracle or constant");
    cmd->add_option("--propensity-value", est.constant_propensity,
                    "value for --propensity constant");
    cmd->add_option("--clip", est.clip, "positivity floor (0 disables clipping)");
    cmd->add_option("--bandwidth", est.bandwidth, "kernel bandwidth");
    cmd->add_option("--bandwidth-rule", est.bandwidth_rule, "fixed or scott");
    cmd->add_option("--alpha", est.alpha, "confidence level alpha");
    cmd->add_option("--gbdt-rounds", est.gbdt_rounds, "boosting rounds");
    cmd->add_option("--gbdt-depth", est.gbdt_depth, "tree depth");
    cmd->add_option("--gbdt-learning-rate", est.gbdt_learning_rate, "boosting learning rate");
    cmd->add_option("--gbdt-min-leaf", est.gbdt_min_leaf, "minimum samples per leaf");
    cmd->add_option("--mdn-components", est.mdn_components, "mixture components");
    cmd->add_option("--mdn-epochs", est.mdn_epochs, "training epochs");
    cmd->add_option("--mdn-batch", est.mdn_batch, "batch size");
    cmd->add_option("--mdn-learning-rate", est.mdn_learning_rate, "optimizer step size");
    cmd->add_option("--mdn-hidden", est.mdn_hidden, "hidden layer sizes")->delimiter(',');
  };

  auto* evaluate = app.add_subcommand("evaluate", "estimate quantiles and means");
  add_common(evaluate, true);
  add_estimator(evaluate);
  evaluate->add_option("--tau", single_tau, "single quantile level");
  evaluate->add_option("--taus", taus, "comma-separated quantile levels")->delimiter(',');

  int replicates = 100;
  std::vector<double> dfs;
  std::vector<double> bandwidths;
  int num_taus = 20;
  std::string preset;
  auto* experiment = app.add_subcommand("experiment", "run a benchmark preset");
  experiment->add_option("preset", preset, "table1 table2 coverage bandwidth methods fig3")
      ->required();
  add_common(experiment, false);
  add_estimator(experiment);
  experiment->add_option("--replicates", replicates, "replicates per cell");
  experiment->add_option("--dfs", dfs, "tail-weight levels")->delimiter(',');
  experiment->add_option("--taus", taus, "quantile levels")->delimiter(',');
  experiment->add_option("--bandwidths", bandwidths, "fixed bandwidths")->delimiter(',');
  experiment->add_option("--num-taus", num_taus, "equally spaced levels (fig3)");

  std::string sim_out = "-";
  auto* simulate = app.add_subcommand("simulate", "emit a synthetic dataset as CSV");
  add_common(simulate, false);
  simulate->add_option("--out-file", sim_out, "output CSV path ('-' for stdout)");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "summarize a dataset CSV");
  inspect->add_option("--data", inspect_path, "dataset CSV path")->required();

  // Later occurrences win, so config-file values injected up front lose to
  // anything typed on the command line.
  for (auto* sub : {evaluate, experiment, simulate, inspect})
    for (CLI::Option* option : sub->get_options())
      option->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config_args(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (app.got_subcommand(evaluate)) {
      if (single_tau > 0.0) taus.push_back(single_tau);
      return run_evaluate(common, est, taus);
    }
    if (app.got_subcommand(experiment)) {
      if (experiment->count("--df") == 0 && !common.normal_noise && preset == "methods")
        common.df = 4.0;
      return run_experiment(preset, common, est, replicates, dfs, taus, bandwidths, num_taus);
    }
    if (app.got_subcommand(simulate)) return run_simulate(common, sim_out);
    if (app.got_subcommand(inspect)) return run_inspect(inspect_path);
    throw ConfigError("no subcommand");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
