#pragma once

namespace qope::quantile {

// Quantile loss rho_tau(u) = u * (tau - 1{u < 0}).
inline double pinball(double u, double tau) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

// d/d_eta of pinball(value - eta, tau): the estimating-function kernel
// 1{value < eta} - tau.
inline double pinball_eta_derivative(double value, double eta, double tau) {
  return (value < eta ? 1.0 : 0.0) - tau;
}

}  // namespace qope::quantile
