#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qope/inference/inference.hpp"
#include "qope/mean/mean.hpp"
#include "qope/simbench/dgp.hpp"

namespace qope::simbench {

struct ExperimentConfig {
  int n = 2500;  // subjects per generated dataset
  int num_folds = 5;
  int mc_samples = 50;
  int grid_size = 99;  // midpoint quantile grid for the aggregated mean
  quantile::Solver solver = quantile::Solver::automatic;
  // Experiments solve per fold and average, matching the study design; the
  // library default elsewhere is pooled.
  quantile::Aggregation aggregation = quantile::Aggregation::per_fold_average;
  propensity::GbdtConfig gbdt;
  mdn::MdnConfig mdn;
  inference::KernelSpec kernel;
  double alpha = 0.05;
  int threads = 1;
  std::uint64_t seed = 1;
  long oracle_draws = 1'000'000;

  quantile::EstimatorConfig estimator_config() const;
  quantile::NuisanceConfig nuisance_config() const;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write_csv(std::ostream& out,
                 const std::vector<std::pair<std::string, std::string>>& header) const;
};

struct ExperimentReport {
  std::string name;
  // Resolved configuration, embedded as comment headers in every CSV.
  std::vector<std::pair<std::string, std::string>> config;
  Table records;     // one row per cell evaluation
  Table aggregates;  // experiment, cell, metric, value
  std::string summary;
};

// Reference MSE values from the benchmark study these designs replicate;
// recorded next to the measured aggregates for comparison.
struct ReferenceMse {
  double df;
  double rquantile;
  double rmean;
};
const std::vector<ReferenceMse>& single_stage_reference();
const std::vector<ReferenceMse>& two_stage_reference();

// Aggregated-mean (rquantile) vs classical doubly-robust mean (rmean): MSE
// against the oracle mean across replicates, per tail-weight level.
ExperimentReport run_mse_experiment(DgpSpec::Kind kind, const std::vector<double>& dfs,
                                    int replicates, const ExperimentConfig& config);

// Wald interval coverage of the oracle quantile per level.
ExperimentReport run_coverage_experiment(double df, const std::vector<double>& taus,
                                         int replicates, const ExperimentConfig& config,
                                         DgpSpec::Kind kind = DgpSpec::Kind::single_stage);

// Per-level MSE of the dm / ipw / dr point estimators.
ExperimentReport run_method_comparison(const DgpSpec& spec, const std::vector<double>& taus,
                                       int replicates, const ExperimentConfig& config);

// Standard-error quality across kernel bandwidths (fixed values plus Scott's
// rule): MSE of the estimated standard error against the replicate-empirical
// sd of the point estimate.
ExperimentReport run_bandwidth_sweep(const std::vector<double>& bandwidths, bool include_scott,
                                     double df, const std::vector<double>& taus, int replicates,
                                     const ExperimentConfig& config,
                                     DgpSpec::Kind kind = DgpSpec::Kind::single_stage);

// Estimated quantiles at equally spaced levels against the oracle cdf.
ExperimentReport run_cdf_overlay(DgpSpec::Kind kind, double df, int num_taus,
                                 const ExperimentConfig& config);

std::string format_df(double df);

}  // namespace qope::simbench
