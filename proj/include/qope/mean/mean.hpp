#pragma once

#include <vector>

#include "qope/quantile/solver.hpp"

namespace qope::mean {

// Quantile levels and quadrature weights approximating integral_0^1 eta_tau
// d tau. The grid stays inside the open interval, so extreme quantiles are
// excluded by construction; that truncation is the source of tail
// robustness.
struct QuantileGrid {
  enum class Rule { midpoint, trapezoid, simpson, explicit_levels };
  Rule rule = Rule::midpoint;
  std::vector<double> levels;

  // Levels (g - 0.5)/G with weight 1/G each.
  static QuantileGrid midpoint(int size);
  // Composite rules over user-chosen levels (simpson needs an odd count of
  // uniformly spaced levels).
  static QuantileGrid trapezoid(std::vector<double> levels);
  static QuantileGrid simpson(std::vector<double> levels);
  // Plain average of the estimates at the given levels.
  static QuantileGrid explicit_levels(std::vector<double> levels);

  std::vector<double> weights() const;
  void validate() const;
};

struct TailRobustMeanResult {
  double value = 0.0;
  std::vector<double> per_level_eta;
  // Adjacent levels whose raw estimates decrease; reported, never reordered.
  int non_monotone_pairs = 0;
};

// Quadrature-weighted aggregate of the per-level quantile estimates; the
// nuisance bundle (pseudo-sample caches included) is shared across all
// levels.
TailRobustMeanResult tail_robust_mean(const quantile::NuisanceBundle& bundle,
                                      const QuantileGrid& grid,
                                      const quantile::EstimatorConfig& config,
                                      quantile::Method method = quantile::Method::dr);

// The classical augmented inverse-propensity mean of the cumulative reward,
// with conditional means taken from the same cached pseudo roll-outs.
double classic_dr_mean(const quantile::NuisanceBundle& bundle);

}  // namespace qope::mean
