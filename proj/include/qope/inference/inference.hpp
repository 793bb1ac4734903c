#pragma once

#include <optional>
#include <span>

#include "qope/quantile/solver.hpp"

namespace qope::inference {

struct KernelSpec {
  enum class Bandwidth { fixed, scott };
  Bandwidth rule = Bandwidth::fixed;
  double bandwidth = 0.15;

  void validate() const;
};

// Gaussian kernel (integrates to one, nonnegative).
double kernel(double u);

// Fixed h, or Scott's normal-reference rule h = scale * n^{-1/5} with the
// robust scale min(sd, IQR/1.349) of the cumulative rewards.
double resolve_bandwidth(const KernelSpec& spec, std::span<const double> cumulative_rewards);

// Per-subject estimating-function value psi(W; eta) = d/d_eta Psi: the
// importance-weighted indicator term plus the augmentation terms with
// cached-roll-out indicator means.
double psi_value(const quantile::NuisanceBundle& bundle, int subject, double eta, double tau);

// Density of the target-policy cumulative reward at eta: direct (model
// based), importance-weighted KDE, and the doubly-robust combination.
double j0_dm(const quantile::NuisanceBundle& bundle, double eta,
             double fallback_bandwidth = 0.15);
double j0_ipw(const quantile::NuisanceBundle& bundle, double eta, double bandwidth);
// Floored at j0_floor to keep the sandwich variance well-defined.
double j0_dr(const quantile::NuisanceBundle& bundle, double eta, double bandwidth,
             double j0_floor = 1e-4);

// sigma^2 = mean(psi^2) / j0^2 with j0 already floored.
double sandwich_variance(std::span<const double> psi_values, double j0);

// eta_hat +/- Phi^{-1}(1 - alpha/2) * sigma_hat / sqrt(n).
quantile::ConfidenceInterval wald_ci(double eta_hat, double sigma2, int n, double alpha);

struct InferenceResult {
  double j0_dm = 0.0;
  double j0_ipw = 0.0;
  double j0_dr = 0.0;
  double psi_sq_mean = 0.0;  // (1/S) sum_s mean_{i in fold s} psi^2(W_i; eta_s)
  double sigma2 = 0.0;
  bool unstable = false;  // j0 at or below the floor
  quantile::ConfidenceInterval ci;
  double bandwidth = 0.0;
};

// Fills j0/sigma2/ci of the estimate in place and returns the details.
// psi is evaluated at the per-fold solutions carried by the estimate.
InferenceResult run_inference(const quantile::NuisanceBundle& bundle,
                              quantile::QuantileEstimate& estimate, const KernelSpec& kernel,
                              double alpha = 0.05, double j0_floor = 1e-4);

}  // namespace qope::inference
