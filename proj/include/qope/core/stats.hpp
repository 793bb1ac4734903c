#pragma once

#include <span>

namespace qope::core {

double normal_pdf(double x);
double normal_cdf(double x);

// Inverse standard normal cdf, accurate to ~1e-13 (Acklam initialization plus
// one Halley refinement).
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Student-t cdf with (possibly non-integer) df.
double student_t_cdf(double x, double df);

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // unbiased; 0 for size < 2

// Empirical quantile with the "smallest value whose pinball objective is
// minimal" convention shared by the kink-scan solver: the ceil(n*tau)-th
// order statistic.
double empirical_quantile(std::span<const double> sorted_xs, double tau);

// min(sd, IQR/1.349); falls back to sd, then to 1, when degenerate.
double robust_scale(std::span<const double> xs);

}  // namespace qope::core
