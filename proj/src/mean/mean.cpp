#include "qope/mean/mean.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "qope/core/error.hpp"

namespace qope::mean {

using quantile::NuisanceBundle;

QuantileGrid QuantileGrid::midpoint(int size) {
  if (size < 1) throw ConfigError("grid: size must be >= 1");
  QuantileGrid grid;
  grid.rule = Rule::midpoint;
  grid.levels.reserve(size);
  for (int g = 1; g <= size; ++g) grid.levels.push_back((g - 0.5) / size);
  return grid;
}

QuantileGrid QuantileGrid::trapezoid(std::vector<double> levels) {
  QuantileGrid grid;
  grid.rule = Rule::trapezoid;
  grid.levels = std::move(levels);
  grid.validate();
  return grid;
}

QuantileGrid QuantileGrid::simpson(std::vector<double> levels) {
  QuantileGrid grid;
  grid.rule = Rule::simpson;
  grid.levels = std::move(levels);
  grid.validate();
  return grid;
}

QuantileGrid QuantileGrid::explicit_levels(std::vector<double> levels) {
  QuantileGrid grid;
  grid.rule = Rule::explicit_levels;
  grid.levels = std::move(levels);
  grid.validate();
  return grid;
}

void QuantileGrid::validate() const {
  if (levels.empty()) throw ConfigError("grid: needs at least one level");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0))
      throw ConfigError("grid: levels must lie in (0, 1)");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw ConfigError("grid: levels must be strictly increasing");
  }
  if (rule == Rule::trapezoid && levels.size() < 2)
    throw ConfigError("grid: trapezoid rule needs at least two levels");
  if (rule == Rule::simpson) {
    if (levels.size() < 3 || levels.size() % 2 == 0)
      throw ConfigError("grid: simpson rule needs an odd number (>= 3) of levels");
    const double step = levels[1] - levels[0];
    for (std::size_t i = 1; i < levels.size(); ++i)
      if (std::fabs(levels[i] - levels[i - 1] - step) > 1e-9 * std::max(step, 1e-12))
        throw ConfigError("grid: simpson rule needs uniformly spaced levels");
  }
}

std::vector<double> QuantileGrid::weights() const {
  validate();
  const std::size_t n = levels.size();
  std::vector<double> w(n, 0.0);
  switch (rule) {
    case Rule::midpoint:
    case Rule::explicit_levels:
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
      break;
    case Rule::trapezoid:
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = levels[i + 1] - levels[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
      }
      break;
    case Rule::simpson: {
      const double h = levels[1] - levels[0];
      for (std::size_t i = 0; i < n; ++i)
        w[i] = h / 3.0 * (i == 0 || i + 1 == n ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0));
      break;
    }
  }
  return w;
}

TailRobustMeanResult tail_robust_mean(const NuisanceBundle& bundle, const QuantileGrid& grid,
                                      const quantile::EstimatorConfig& config,
                                      quantile::Method method) {
  const auto weights = grid.weights();
  std::optional<quantile::PreparedSolver> solver;
  try {
    solver.emplace(bundle, method, config);
  } catch (const std::exception& e) {
    throw NumericalError(std::string("tail_robust_mean: objective preparation failed: ") +
                         e.what());
  }
  TailRobustMeanResult result;
  result.per_level_eta.reserve(grid.levels.size());
  double weight_total = 0.0;
  double value = 0.0;
  for (std::size_t g = 0; g < grid.levels.size(); ++g) {
    const double tau = grid.levels[g];
    double eta;
    try {
      eta = solver->solve(tau).eta_hat;
    } catch (const std::exception& e) {
      throw NumericalError("tail_robust_mean: solve failed at tau=" + std::to_string(tau) + ": " +
                           e.what());
    }
    if (g > 0 && eta < result.per_level_eta.back()) ++result.non_monotone_pairs;
    result.per_level_eta.push_back(eta);
    value += weights[g] * eta;
    weight_total += weights[g];
  }
  // Composite rules cover [tau_1, tau_G] only; rescale so the aggregate is an
  // average over the covered range rather than a truncated integral.
  result.value = value / weight_total;
  return result;
}

double classic_dr_mean(const NuisanceBundle& bundle) {
  const int horizon = bundle.horizon();
  double total = 0.0;
  for (const auto& cache : bundle.subjects) {
    double value = cache.full_weight * cache.observed_sum;
    for (int k = 0; k < horizon; ++k) {
      const double coef = cache.aug_coef[k];
      if (coef == 0.0) continue;
      double roll_mean = 0.0;
      for (double roll : cache.rollouts[k]) roll_mean += roll;
      roll_mean /= static_cast<double>(cache.rollouts[k].size());
      value += coef * (cache.prefix[k] + roll_mean);
    }
    total += value;
  }
  return total / bundle.size();
}

}  // namespace qope::mean
