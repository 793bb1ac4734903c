#include "qope/inference/inference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qope/core/error.hpp"
#include "qope/core/stats.hpp"
#include "qope/quantile/pinball.hpp"

namespace qope::inference {

using quantile::NuisanceBundle;
using quantile::SubjectCache;

void KernelSpec::validate() const {
  if (rule == Bandwidth::fixed && !(bandwidth > 0.0))
    throw ConfigError("kernel: fixed bandwidth must be positive");
}

double kernel(double u) { return core::normal_pdf(u); }

double resolve_bandwidth(const KernelSpec& spec, std::span<const double> cumulative_rewards) {
  spec.validate();
  if (spec.rule == KernelSpec::Bandwidth::fixed) return spec.bandwidth;
  const double n = static_cast<double>(std::max<std::size_t>(cumulative_rewards.size(), 2));
  return core::robust_scale(cumulative_rewards) * std::pow(n, -0.2);
}

double psi_value(const NuisanceBundle& bundle, int subject, double eta, double tau) {
  if (subject < 0 || subject >= bundle.size()) throw ContractError("psi_value: bad subject");
  const SubjectCache& cache = bundle.subjects[subject];
  if (cache.rollouts.empty()) throw ContractError("psi_value: missing pseudo-sample cache");
  double psi = cache.full_weight * quantile::pinball_eta_derivative(cache.observed_sum, eta, tau);
  for (std::size_t k = 0; k < cache.aug_coef.size(); ++k) {
    const double coef = cache.aug_coef[k];
    if (coef == 0.0) continue;
    double indicator_mean = 0.0;
    for (double roll : cache.rollouts[k])
      indicator_mean += quantile::pinball_eta_derivative(cache.prefix[k] + roll, eta, tau);
    psi += coef * indicator_mean / static_cast<double>(cache.rollouts[k].size());
  }
  return psi;
}

namespace {

// Conditional density of the remaining reward sum (stages k..K under the
// target policy) plus the observed prefix, evaluated at eta, for one
// subject. Uses the remaining-sum model mixed over the target policy, or the
// subject's roll-out KDE when no model is available.
double augmentation_density(const NuisanceBundle& bundle, int subject, int stage_k, double eta,
                            double bandwidth) {
  const SubjectCache& cache = bundle.subjects[subject];
  const int fold = bundle.fold_of(subject);
  const auto& fm = bundle.fold_models[fold];
  const double point = eta - cache.prefix[stage_k - 1];
  const auto& model = fm.remaining[stage_k - 1];
  if (model) {
    const int m = bundle.action_space();
    const auto& probs = cache.target_probs[stage_k - 1];
    std::vector<double> feat = cache.flat_history[stage_k - 1];
    feat.resize(feat.size() + m, 0.0);
    double density = 0.0;
    for (int a = 0; a < m; ++a) {
      if (probs[a] == 0.0) continue;
      for (int b = 0; b < m; ++b) feat[feat.size() - m + b] = (a == b) ? 1.0 : 0.0;
      density += probs[a] * model->pdf(feat, point);
    }
    return density;
  }
  // Fallback: KDE over this subject's cached roll-outs.
  double density = 0.0;
  for (double roll : cache.rollouts[stage_k - 1])
    density += kernel((roll - point) / bandwidth) / bandwidth;
  return density / static_cast<double>(cache.rollouts[stage_k - 1].size());
}

}  // namespace

double j0_dm(const NuisanceBundle& bundle, double eta, double fallback_bandwidth) {
  double total = 0.0;
  for (int i = 0; i < bundle.size(); ++i)
    total += augmentation_density(bundle, i, 1, eta, fallback_bandwidth);
  return total / bundle.size();
}

double j0_ipw(const NuisanceBundle& bundle, double eta, double bandwidth) {
  if (!(bandwidth > 0.0)) throw ConfigError("j0_ipw: bandwidth must be positive");
  double total = 0.0;
  for (const auto& cache : bundle.subjects)
    total += cache.full_weight * kernel((cache.observed_sum - eta) / bandwidth) / bandwidth;
  return total / bundle.size();
}

double j0_dr(const NuisanceBundle& bundle, double eta, double bandwidth, double j0_floor) {
  if (!(bandwidth > 0.0)) throw ConfigError("j0_dr: bandwidth must be positive");
  const int horizon = bundle.horizon();
  double total = 0.0;
  for (int i = 0; i < bundle.size(); ++i) {
    const SubjectCache& cache = bundle.subjects[i];
    double value =
        cache.full_weight * kernel((cache.observed_sum - eta) / bandwidth) / bandwidth;
    for (int k = 1; k <= horizon; ++k)
      if (cache.aug_coef[k - 1] != 0.0)
        value += cache.aug_coef[k - 1] * augmentation_density(bundle, i, k, eta, bandwidth);
    total += value;
  }
  return std::max(total / bundle.size(), j0_floor);
}

double sandwich_variance(std::span<const double> psi_values, double j0) {
  if (!(j0 > 0.0)) throw ContractError("sandwich_variance: j0 must be positive (post-flooring)");
  double mean_sq = 0.0;
  for (double psi : psi_values) mean_sq += psi * psi;
  mean_sq /= static_cast<double>(psi_values.size());
  return mean_sq / (j0 * j0);
}

quantile::ConfidenceInterval wald_ci(double eta_hat, double sigma2, int n, double alpha) {
  if (sigma2 < 0.0) throw ContractError("wald_ci: sigma2 must be nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("wald_ci: alpha must be in (0, 1)");
  const double half_width = core::normal_quantile(1.0 - 0.5 * alpha) * std::sqrt(sigma2 / n);
  return {eta_hat - half_width, eta_hat + half_width};
}

InferenceResult run_inference(const NuisanceBundle& bundle, quantile::QuantileEstimate& estimate,
                              const KernelSpec& kernel_spec, double alpha, double j0_floor) {
  InferenceResult result;
  std::vector<double> sums(bundle.size());
  for (int i = 0; i < bundle.size(); ++i) sums[i] = bundle.subjects[i].observed_sum;
  result.bandwidth = resolve_bandwidth(kernel_spec, sums);

  result.j0_dm = j0_dm(bundle, estimate.eta_hat, result.bandwidth);
  result.j0_ipw = j0_ipw(bundle, estimate.eta_hat, result.bandwidth);
  result.j0_dr = j0_dr(bundle, estimate.eta_hat, result.bandwidth, j0_floor);
  result.unstable = result.j0_dr <= j0_floor;

  // (1/S) sum_s E_{n,s}[psi^2(W; eta_s)]
  const int S = bundle.folds.num_folds;
  double fold_mean_sum = 0.0;
  for (int s = 0; s < S; ++s) {
    const double eta_s =
        estimate.per_fold_eta.empty() ? estimate.eta_hat : estimate.per_fold_eta[s];
    double fold_sq = 0.0;
    for (int i : bundle.fold_members[s]) {
      const double psi = psi_value(bundle, i, eta_s, estimate.tau);
      fold_sq += psi * psi;
    }
    fold_mean_sum += fold_sq / std::max<std::size_t>(bundle.fold_members[s].size(), 1);
  }
  result.psi_sq_mean = fold_mean_sum / S;
  result.sigma2 = result.psi_sq_mean / (result.j0_dr * result.j0_dr);
  result.ci = wald_ci(estimate.eta_hat, result.sigma2, bundle.size(), alpha);

  estimate.j0 = result.j0_dr;
  estimate.sigma2 = result.sigma2;
  estimate.ci = result.ci;
  estimate.variance_unstable = result.unstable;
  return result;
}

}  // namespace qope::inference
