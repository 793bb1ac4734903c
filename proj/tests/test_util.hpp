#pragma once

// Shared independent oracles for the test suites: these deliberately avoid
// the library's own code paths wherever they are used as a second opinion.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "qope/core/rng.hpp"

namespace qope::testutil {

// Composite Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2 != 0) ++intervals;
  const double h = (b - a) / intervals;
  double total = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) total += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return total * h / 3.0;
}

// Kolmogorov-Smirnov distance between a sample and a reference cdf.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max(d, std::fabs(F - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(F - static_cast<double>(i + 1) / n));
  }
  return d;
}

// Single-feature logistic regression with intercept, fit by damped Newton
// iterations with a small ridge; the reference fit for the boosted
// classifier tests.
struct LogisticOracle {
  double intercept = 0.0;
  double slope = 0.0;

  static LogisticOracle fit(std::span<const double> x, std::span<const int> y,
                            int iterations = 200, double ridge = 1e-6) {
    LogisticOracle model;
    const std::size_t n = x.size();
    for (int it = 0; it < iterations; ++it) {
      double g0 = 0.0, g1 = 0.0, h00 = ridge, h01 = 0.0, h11 = ridge;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-(model.intercept + model.slope * x[i])));
        const double r = y[i] - p;
        const double w = std::max(p * (1.0 - p), 1e-12);
        g0 += r;
        g1 += r * x[i];
        h00 += w;
        h01 += w * x[i];
        h11 += w * x[i] * x[i];
      }
      const double det = h00 * h11 - h01 * h01;
      if (std::fabs(det) < 1e-12) break;
      const double d0 = (h11 * g0 - h01 * g1) / det;
      const double d1 = (h00 * g1 - h01 * g0) / det;
      model.intercept += d0;
      model.slope += d1;
      if (std::fabs(d0) + std::fabs(d1) < 1e-10) break;
    }
    return model;
  }

  double prob(double xi) const { return 1.0 / (1.0 + std::exp(-(intercept + slope * xi))); }
};

// Brute-force minimizer of mean_i w_i * pinball(v_i - eta, tau) over the
// candidate kinks, with the same smallest-eta tie rule (relative tolerance)
// as the production solver but computed by direct summation.
inline double brute_force_pinball_argmin(std::span<const double> values,
                                         std::span<const double> weights, double tau) {
  std::vector<double> kinks(values.begin(), values.end());
  std::sort(kinks.begin(), kinks.end());
  kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());
  auto objective = [&](double eta) {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double u = values[i] - eta;
      total += weights[i] * u * (tau - (u < 0.0 ? 1.0 : 0.0));
    }
    return total;
  };
  double best = objective(kinks.front());
  for (double k : kinks) best = std::min(best, objective(k));
  const double tol = 1e-12 * (1.0 + std::fabs(best));
  for (double k : kinks)
    if (objective(k) <= best + tol) return k;
  return kinks.front();
}

inline double sample_mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace qope::testutil
