#include "qope/simbench/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "qope/core/csv.hpp"
#include "qope/core/error.hpp"
#include "qope/core/parallel.hpp"
#include "qope/core/stats.hpp"

namespace qope::simbench {

using core::format_double;
using core::RngStream;
using quantile::Method;

quantile::EstimatorConfig ExperimentConfig::estimator_config() const {
  quantile::EstimatorConfig cfg;
  cfg.num_folds = num_folds;
  cfg.mc_samples = mc_samples;
  cfg.solver = solver;
  cfg.aggregation = aggregation;
  return cfg;
}

quantile::NuisanceConfig ExperimentConfig::nuisance_config() const {
  quantile::NuisanceConfig cfg;
  cfg.num_folds = num_folds;
  cfg.mc_samples = mc_samples;
  cfg.propensity.kind = quantile::PropensityKind::fit_gbdt;
  cfg.propensity.gbdt = gbdt;
  cfg.reward.kind = quantile::RewardKind::fit_mdn;
  cfg.reward.mdn = mdn;
  return cfg;
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw ContractError("report: row width mismatch");
  rows.push_back(std::move(row));
}

void Table::write_csv(std::ostream& out,
                      const std::vector<std::pair<std::string, std::string>>& header) const {
  for (const auto& [key, value] : header) out << "# " << key << "=" << value << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << "\n";
  }
}

const std::vector<ReferenceMse>& single_stage_reference() {
  static const std::vector<ReferenceMse> table = {
      {1.2, 0.005995, 0.594783}, {1.5, 0.001689, 0.031051}, {1.8, 0.000898, 0.002025},
      {2.0, 0.000993, 0.001863}, {2.5, 0.000545, 0.000620}, {3.0, 0.000432, 0.000445},
      {3.5, 0.000312, 0.000324}, {4.0, 0.000371, 0.000381}};
  return table;
}

const std::vector<ReferenceMse>& two_stage_reference() {
  static const std::vector<ReferenceMse> table = {{2.0, 0.006708, 0.027780},
                                                  {4.0, 0.002729, 0.003945},
                                                  {6.0, 0.002447, 0.003558},
                                                  {8.0, 0.002427, 0.003710},
                                                  {kNormalNoise, 0.001549, 0.002062}};
  return table;
}

std::string format_df(double df) {
  if (std::isinf(df)) return "normal";
  std::ostringstream os;
  os << df;
  return os.str();
}

namespace {

std::vector<std::pair<std::string, std::string>> base_config(const std::string& name,
                                                             const ExperimentConfig& cfg) {
  return {
      {"experiment", name},
      {"seed", std::to_string(cfg.seed)},
      {"n", std::to_string(cfg.n)},
      {"folds", std::to_string(cfg.num_folds)},
      {"mc_samples", std::to_string(cfg.mc_samples)},
      {"grid", std::to_string(cfg.grid_size)},
      {"aggregation",
       cfg.aggregation == quantile::Aggregation::per_fold_average ? "per-fold-average" : "pooled"},
      {"gbdt_rounds", std::to_string(cfg.gbdt.rounds)},
      {"gbdt_depth", std::to_string(cfg.gbdt.max_depth)},
      {"gbdt_learning_rate", format_double(cfg.gbdt.learning_rate)},
      {"clip_floor", format_double(cfg.gbdt.clip_floor)},
      {"mdn_components", std::to_string(cfg.mdn.components)},
      {"mdn_epochs", std::to_string(cfg.mdn.epochs)},
      {"mdn_batch", std::to_string(cfg.mdn.batch_size)},
      {"mdn_learning_rate", format_double(cfg.mdn.learning_rate)},
      {"kernel_bandwidth", format_double(cfg.kernel.bandwidth)},
      {"alpha", format_double(cfg.alpha)},
      {"oracle_draws", std::to_string(cfg.oracle_draws)},
  };
}

double mean_of(const std::vector<double>& xs) { return core::mean(xs); }

double sd_of(const std::vector<double>& xs) { return std::sqrt(core::variance(xs)); }

}  // namespace

ExperimentReport run_mse_experiment(DgpSpec::Kind kind, const std::vector<double>& dfs,
                                    int replicates, const ExperimentConfig& config) {
  if (replicates < 1) throw ConfigError("experiment: replicates must be >= 1");
  const std::string name = kind == DgpSpec::Kind::single_stage ? "table1" : "table2";
  ExperimentReport report;
  report.name = name;
  report.config = base_config(name, config);
  report.config.emplace_back("replicates", std::to_string(replicates));
  report.records.columns = {"experiment", "df",    "method", "replicate", "seed", "folds",
                            "n",          "grid",  "estimate", "truth",   "sq_error"};
  report.aggregates.columns = {"experiment", "cell", "metric", "value"};

  RngStream root(config.seed);
  std::ostringstream summary;
  summary << name << ": aggregated-quantile mean vs classical doubly-robust mean\n";

  for (std::size_t d = 0; d < dfs.size(); ++d) {
    DgpSpec spec;
    spec.kind = kind;
    spec.df = dfs[d];
    spec.n = config.n;
    if (!(spec.df > 1.0))
      throw ConfigError("experiment: mean comparisons need df > 1 for a finite mean");

    RngStream oracle_rng = root.fork("oracle").fork(d);
    const OracleTable oracle = OracleTable::generate(spec, config.oracle_draws, oracle_rng);
    const double truth = oracle.mean();

    // Point estimation only; the density models behind the variance
    // estimator are not needed here.
    quantile::NuisanceConfig ncfg = config.nuisance_config();
    ncfg.fit_remaining_models = false;

    std::vector<double> rq(replicates), rm(replicates);
    core::parallel_for(replicates, config.threads, [&](int rep) {
      RngStream rep_rng = root.fork(name).fork(d).fork(static_cast<std::uint64_t>(rep));
      const core::Dataset data = generate(spec, rep_rng);
      RngStream fit_rng = rep_rng.fork("nuisance");
      const auto bundle = quantile::fit_nuisances(data, target_policy(), ncfg, fit_rng);
      rq[rep] = mean::tail_robust_mean(bundle, mean::QuantileGrid::midpoint(config.grid_size),
                                       config.estimator_config())
                    .value;
      rm[rep] = mean::classic_dr_mean(bundle);
    });

    const std::string df_label = format_df(spec.df);
    std::vector<double> sq_rq(replicates), sq_rm(replicates);
    for (int rep = 0; rep < replicates; ++rep) {
      sq_rq[rep] = (rq[rep] - truth) * (rq[rep] - truth);
      sq_rm[rep] = (rm[rep] - truth) * (rm[rep] - truth);
      report.records.add_row({name, df_label, "rquantile", std::to_string(rep),
                              std::to_string(config.seed), std::to_string(config.num_folds),
                              std::to_string(spec.n), std::to_string(config.grid_size),
                              format_double(rq[rep]), format_double(truth),
                              format_double(sq_rq[rep])});
      report.records.add_row({name, df_label, "rmean", std::to_string(rep),
                              std::to_string(config.seed), std::to_string(config.num_folds),
                              std::to_string(spec.n), std::to_string(config.grid_size),
                              format_double(rm[rep]), format_double(truth),
                              format_double(sq_rm[rep])});
    }
    const std::string cell = "df=" + df_label;
    auto add_metric = [&](const std::string& method, const std::string& metric, double value) {
      report.aggregates.add_row({name, cell + ";method=" + method, metric, format_double(value)});
    };
    add_metric("rquantile", "mse", mean_of(sq_rq));
    add_metric("rmean", "mse", mean_of(sq_rm));
    add_metric("rquantile", "bias", mean_of(rq) - truth);
    add_metric("rmean", "bias", mean_of(rm) - truth);
    add_metric("rquantile", "sd", sd_of(rq));
    add_metric("rmean", "sd", sd_of(rm));
    add_metric("oracle", "truth", truth);

    const auto& reference =
        kind == DgpSpec::Kind::single_stage ? single_stage_reference() : two_stage_reference();
    for (const auto& ref : reference) {
      if (ref.df == spec.df || (std::isinf(ref.df) && std::isinf(spec.df))) {
        add_metric("rquantile", "reference_mse", ref.rquantile);
        add_metric("rmean", "reference_mse", ref.rmean);
      }
    }
    summary << "  df=" << df_label << ": mse(rquantile)=" << mean_of(sq_rq)
            << " mse(rmean)=" << mean_of(sq_rm) << " truth=" << truth << "\n";
  }
  report.summary = summary.str();
  return report;
}

ExperimentReport run_coverage_experiment(double df, const std::vector<double>& taus,
                                         int replicates, const ExperimentConfig& config,
                                         DgpSpec::Kind kind) {
  if (replicates < 1) throw ConfigError("experiment: replicates must be >= 1");
  ExperimentReport report;
  report.name = "coverage";
  report.config = base_config("coverage", config);
  report.config.emplace_back("replicates", std::to_string(replicates));
  report.config.emplace_back("df", format_df(df));
  report.records.columns = {"experiment", "df",   "tau",       "replicate", "seed",
                            "folds",      "n",    "h",         "eta_hat",   "sigma",
                            "ci_lo",      "ci_hi", "oracle_eta", "ci_hit"};
  report.aggregates.columns = {"experiment", "cell", "metric", "value"};

  DgpSpec spec;
  spec.kind = kind;
  spec.df = df;
  spec.n = config.n;

  RngStream root(config.seed);
  RngStream oracle_rng = root.fork("oracle");
  const OracleTable oracle = OracleTable::generate(spec, config.oracle_draws, oracle_rng);

  const std::size_t cells = taus.size();
  std::vector<std::vector<double>> eta(replicates, std::vector<double>(cells));
  std::vector<std::vector<double>> sigma(replicates, std::vector<double>(cells));
  std::vector<std::vector<double>> lo(replicates, std::vector<double>(cells));
  std::vector<std::vector<double>> hi(replicates, std::vector<double>(cells));

  core::parallel_for(replicates, config.threads, [&](int rep) {
    RngStream rep_rng = root.fork("coverage").fork(static_cast<std::uint64_t>(rep));
    const core::Dataset data = generate(spec, rep_rng);
    RngStream fit_rng = rep_rng.fork("nuisance");
    const auto bundle =
        quantile::fit_nuisances(data, target_policy(), config.nuisance_config(), fit_rng);
    const quantile::PreparedSolver solver(bundle, Method::dr, config.estimator_config());
    for (std::size_t t = 0; t < cells; ++t) {
      quantile::QuantileEstimate est = solver.solve(taus[t]);
      inference::run_inference(bundle, est, config.kernel, config.alpha);
      eta[rep][t] = est.eta_hat;
      sigma[rep][t] = std::sqrt(est.sigma2);
      lo[rep][t] = est.ci->lower;
      hi[rep][t] = est.ci->upper;
    }
  });

  std::ostringstream summary;
  summary << "coverage: nominal " << 1.0 - config.alpha << ", df=" << format_df(df) << "\n";
  for (std::size_t t = 0; t < cells; ++t) {
    const double truth = oracle.quantile(taus[t]);
    int hits = 0;
    for (int rep = 0; rep < replicates; ++rep) {
      const bool hit = lo[rep][t] <= truth && truth <= hi[rep][t];
      hits += hit ? 1 : 0;
      report.records.add_row(
          {"coverage", format_df(df), format_double(taus[t]), std::to_string(rep),
           std::to_string(config.seed), std::to_string(config.num_folds), std::to_string(spec.n),
           format_double(config.kernel.bandwidth), format_double(eta[rep][t]),
           format_double(sigma[rep][t]), format_double(lo[rep][t]), format_double(hi[rep][t]),
           format_double(truth), hit ? "1" : "0"});
    }
    const double coverage = static_cast<double>(hits) / replicates;
    const double nominal = 1.0 - config.alpha;
    const double band =
        2.5758293035489004 * std::sqrt(nominal * (1.0 - nominal) / replicates);
    const std::string cell = "tau=" + format_double(taus[t]);
    report.aggregates.add_row({"coverage", cell, "coverage", format_double(coverage)});
    report.aggregates.add_row({"coverage", cell, "band_lo", format_double(nominal - band)});
    report.aggregates.add_row({"coverage", cell, "band_hi", format_double(nominal + band)});
    report.aggregates.add_row({"coverage", cell, "oracle_eta", format_double(truth)});
    report.aggregates.add_row(
        {"coverage", cell, "oracle_se", format_double(oracle.quantile_se(taus[t]))});
    summary << "  tau=" << taus[t] << ": coverage=" << coverage << "\n";
  }
  report.summary = summary.str();
  return report;
}

ExperimentReport run_method_comparison(const DgpSpec& spec, const std::vector<double>& taus,
                                       int replicates, const ExperimentConfig& config) {
  if (replicates < 1) throw ConfigError("experiment: replicates must be >= 1");
  ExperimentReport report;
  report.name = "methods";
  report.config = base_config("methods", config);
  report.config.emplace_back("replicates", std::to_string(replicates));
  report.config.emplace_back("df", format_df(spec.df));
  
  report.records.columns = {"experiment", "df",       "method", "tau",
                            "replicate",  "seed",     "folds",  "n",
                            "estimate",   "oracle_eta", "sq_error"};
  report.aggregates.columns = {"experiment", "cell", "metric", "value"};

  RngStream root(config.seed);
  RngStream oracle_rng = root.fork("oracle");
  const OracleTable oracle = OracleTable::generate(spec, config.oracle_draws, oracle_rng);

  const std::vector<Method> methods = {Method::dm, Method::ipw, Method::dr};
  const std::size_t cells = taus.size();
  std::vector<std::vector<std::vector<double>>> est(
      methods.size(),
      std::vector<std::vector<double>>(replicates, std::vector<double>(cells)));

  core::parallel_for(replicates, config.threads, [&](int rep) {
    RngStream rep_rng = root.fork("methods").fork(static_cast<std::uint64_t>(rep));
    const core::Dataset data = generate(spec, rep_rng);
    RngStream fit_rng = rep_rng.fork("nuisance");
    const auto bundle =
        quantile::fit_nuisances(data, target_policy(), config.nuisance_config(), fit_rng);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const quantile::PreparedSolver solver(bundle, methods[m], config.estimator_config());
      for (std::size_t t = 0; t < cells; ++t) est[m][rep][t] = solver.solve(taus[t]).eta_hat;
    }
  });

  std::ostringstream summary;
  summary << "methods: per-level quantile MSE, df=" << format_df(spec.df) << "\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const std::string method = quantile::method_name(methods[m]);
    for (std::size_t t = 0; t < cells; ++t) {
      const double truth = oracle.quantile(taus[t]);
      std::vector<double> sq(replicates);
      for (int rep = 0; rep < replicates; ++rep) {
        sq[rep] = (est[m][rep][t] - truth) * (est[m][rep][t] - truth);
        report.records.add_row({"methods", format_df(spec.df), method, format_double(taus[t]),
                                std::to_string(rep), std::to_string(config.seed),
                                std::to_string(config.num_folds), std::to_string(spec.n),
                                format_double(est[m][rep][t]), format_double(truth),
                                format_double(sq[rep])});
      }
      const double mse = mean_of(sq);
      const std::string cell = "method=" + method + ";tau=" + format_double(taus[t]);
      report.aggregates.add_row({"methods", cell, "mse", format_double(mse)});
      report.aggregates.add_row(
          {"methods", cell, "log10_mse", format_double(std::log10(std::max(mse, 1e-300)))});
    }
    double total = 0.0;
    for (std::size_t t = 0; t < cells; ++t) {
      std::vector<double> sq(replicates);
      const double truth = oracle.quantile(taus[t]);
      for (int rep = 0; rep < replicates; ++rep)
        sq[rep] = (est[m][rep][t] - truth) * (est[m][rep][t] - truth);
      total += mean_of(sq);
    }
    summary << "  " << method << ": mean mse over levels = " << total / cells << "\n";
  }
  report.summary = summary.str();
  return report;
}

ExperimentReport run_bandwidth_sweep(const std::vector<double>& bandwidths, bool include_scott,
                                     double df, const std::vector<double>& taus, int replicates,
                                     const ExperimentConfig& config, DgpSpec::Kind kind) {
  if (replicates < 2) throw ConfigError("experiment: bandwidth sweep needs >= 2 replicates");
  ExperimentReport report;
  report.name = "bandwidth";
  report.config = base_config("bandwidth", config);
  report.config.emplace_back("replicates", std::to_string(replicates));
  report.config.emplace_back("df", format_df(df));
  report.records.columns = {"experiment", "df",    "tau",   "h_rule", "h",
                            "replicate",  "seed",  "folds", "n",      "eta_hat",
                            "se_hat"};
  report.aggregates.columns = {"experiment", "cell", "metric", "value"};

  DgpSpec spec;
  spec.kind = kind;
  spec.df = df;
  spec.n = config.n;

  struct Rule {
    std::string label;
    inference::KernelSpec kernel;
  };
  std::vector<Rule> rules;
  for (double h : bandwidths) {
    inference::KernelSpec ks;
    ks.rule = inference::KernelSpec::Bandwidth::fixed;
    ks.bandwidth = h;
    rules.push_back({"fixed", ks});
  }
  if (include_scott) {
    inference::KernelSpec ks;
    ks.rule = inference::KernelSpec::Bandwidth::scott;
    rules.push_back({"scott", ks});
  }

  RngStream root(config.seed);
  const std::size_t cells = taus.size();
  std::vector<std::vector<double>> eta(replicates, std::vector<double>(cells));
  std::vector<std::vector<std::vector<double>>> se(
      replicates,
      std::vector<std::vector<double>>(rules.size(), std::vector<double>(cells)));
  std::vector<std::vector<double>> resolved_h(replicates, std::vector<double>(rules.size()));

  core::parallel_for(replicates, config.threads, [&](int rep) {
    RngStream rep_rng = root.fork("bandwidth").fork(static_cast<std::uint64_t>(rep));
    const core::Dataset data = generate(spec, rep_rng);
    RngStream fit_rng = rep_rng.fork("nuisance");
    const auto bundle =
        quantile::fit_nuisances(data, target_policy(), config.nuisance_config(), fit_rng);
    const quantile::PreparedSolver solver(bundle, Method::dr, config.estimator_config());
    for (std::size_t t = 0; t < cells; ++t) {
      quantile::QuantileEstimate est = solver.solve(taus[t]);
      eta[rep][t] = est.eta_hat;
      for (std::size_t r = 0; r < rules.size(); ++r) {
        quantile::QuantileEstimate with_ci = est;
        const auto inf =
            inference::run_inference(bundle, with_ci, rules[r].kernel, config.alpha);
        se[rep][r][t] = std::sqrt(with_ci.sigma2 / spec.n);
        resolved_h[rep][r] = inf.bandwidth;
      }
    }
  });

  for (int rep = 0; rep < replicates; ++rep)
    for (std::size_t r = 0; r < rules.size(); ++r)
      for (std::size_t t = 0; t < cells; ++t)
        report.records.add_row({"bandwidth", format_df(df), format_double(taus[t]),
                                rules[r].label, format_double(resolved_h[rep][r]),
                                std::to_string(rep), std::to_string(config.seed),
                                std::to_string(config.num_folds), std::to_string(spec.n),
                                format_double(eta[rep][t]), format_double(se[rep][r][t])});

  std::ostringstream summary;
  summary << "bandwidth: standard-error quality, df=" << format_df(df) << "\n";
  for (std::size_t r = 0; r < rules.size(); ++r) {
    for (std::size_t t = 0; t < cells; ++t) {
      std::vector<double> etas(replicates), ses(replicates);
      for (int rep = 0; rep < replicates; ++rep) {
        etas[rep] = eta[rep][t];
        ses[rep] = se[rep][r][t];
      }
      const double sd_emp = sd_of(etas);
      double mse = 0.0;
      for (double s : ses) mse += (s - sd_emp) * (s - sd_emp);
      mse /= replicates;
      std::string label = rules[r].label;
      if (rules[r].label == "fixed") label += "(h=" + format_double(resolved_h[0][r]) + ")";
      const std::string cell = "rule=" + label + ";tau=" + format_double(taus[t]);
      report.aggregates.add_row({"bandwidth", cell, "se_mse", format_double(mse)});
      report.aggregates.add_row({"bandwidth", cell, "sd_emp", format_double(sd_emp)});
      report.aggregates.add_row(
          {"bandwidth", cell, "se_mean", format_double(mean_of(ses))});
      summary << "  " << cell << ": se_mse=" << mse << "\n";
    }
  }
  report.summary = summary.str();
  return report;
}

ExperimentReport run_cdf_overlay(DgpSpec::Kind kind, double df, int num_taus,
                                 const ExperimentConfig& config) {
  if (num_taus < 1) throw ConfigError("experiment: need at least one quantile level");
  ExperimentReport report;
  report.name = "fig3";
  report.config = base_config("fig3", config);
  report.config.emplace_back("df", format_df(df));
  report.config.emplace_back("num_taus", std::to_string(num_taus));
  report.records.columns = {"experiment", "df", "tau",        "eta_hat",
                            "oracle_eta", "f_oracle_at_eta", "seed",
                            "folds",      "n"};
  report.aggregates.columns = {"experiment", "cell", "metric", "value"};

  DgpSpec spec;
  spec.kind = kind;
  spec.df = df;
  spec.n = config.n;

  RngStream root(config.seed);
  RngStream oracle_rng = root.fork("oracle");
  const OracleTable oracle = OracleTable::generate(spec, config.oracle_draws, oracle_rng);
  RngStream rep_rng = root.fork("fig3");
  const core::Dataset data = generate(spec, rep_rng);
  RngStream fit_rng = rep_rng.fork("nuisance");
  const auto bundle =
      quantile::fit_nuisances(data, target_policy(), config.nuisance_config(), fit_rng);
  const quantile::PreparedSolver solver(bundle, Method::dr, config.estimator_config());

  double max_gap = 0.0;
  for (int g = 1; g <= num_taus; ++g) {
    const double tau = static_cast<double>(g) / (num_taus + 1);
    const double eta = solver.solve(tau).eta_hat;
    const double f_at = oracle.cdf(eta);
    max_gap = std::max(max_gap, std::fabs(f_at - tau));
    report.records.add_row({"fig3", format_df(df), format_double(tau), format_double(eta),
                            format_double(oracle.quantile(tau)), format_double(f_at),
                            std::to_string(config.seed), std::to_string(config.num_folds),
                            std::to_string(spec.n)});
  }
  report.aggregates.add_row({"fig3", "all", "max_abs_cdf_gap", format_double(max_gap)});
  std::ostringstream summary;
  summary << "fig3: max |F_oracle(eta_hat) - tau| = " << max_gap << "\n";
  report.summary = summary.str();
  return report;
}

}  // namespace qope::simbench
