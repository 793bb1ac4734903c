#include "qope/quantile/solver.hpp"

#include <algorithm>
#include <cmath>

#include "qope/core/error.hpp"
#include "qope/quantile/pinball.hpp"

namespace qope::quantile {

std::string method_name(Method method) {
  switch (method) {
    case Method::dm: return "dm";
    case Method::ipw: return "ipw";
    case Method::dr: return "dr";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "dm") return Method::dm;
  if (name == "ipw") return Method::ipw;
  if (name == "dr") return Method::dr;
  throw ConfigError("unknown method '" + name + "' (expected dm, ipw or dr)");
}

void EstimatorConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("estimator: tau must be in (0, 1)");
  if (num_folds < 2) throw ConfigError("estimator: num_folds must be >= 2");
  if (mc_samples < 1) throw ConfigError("estimator: mc_samples must be >= 1");
  if (max_iter < 1) throw ConfigError("estimator: max_iter must be >= 1");
  if (!(rel_tol > 0.0)) throw ConfigError("estimator: rel_tol must be positive");
}

void collect_atoms(const NuisanceBundle& bundle, Method method, int fold,
                   std::vector<Atom>& atoms) {
  const int horizon = bundle.horizon();
  const double inv_m = 1.0 / bundle.mc_samples;
  auto add_subject = [&](const SubjectCache& cache) {
    if (static_cast<int>(cache.rollouts.size()) != horizon)
      throw ContractError("collect_atoms: missing pseudo-sample cache");
    switch (method) {
      case Method::dm:
        // Zero importance weight, full roll-out from stage 1.
        for (double roll : cache.rollouts[0]) atoms.push_back({roll, inv_m});
        return;
      case Method::ipw:
        if (cache.full_weight != 0.0) atoms.push_back({cache.observed_sum, cache.full_weight});
        return;
      case Method::dr:
        if (cache.full_weight != 0.0) atoms.push_back({cache.observed_sum, cache.full_weight});
        for (int k = 0; k < horizon; ++k) {
          const double coef = cache.aug_coef[k];
          if (coef == 0.0) continue;
          const double w = coef * inv_m;
          for (double roll : cache.rollouts[k]) atoms.push_back({cache.prefix[k] + roll, w});
        }
        return;
    }
  };
  if (fold < 0) {
    for (const auto& cache : bundle.subjects) add_subject(cache);
  } else {
    for (int i : bundle.fold_members[fold]) add_subject(bundle.subjects[i]);
  }
}

double atoms_objective(std::span<const Atom> atoms, double eta, double tau) {
  double total = 0.0;
  for (const Atom& a : atoms) total += a.weight * pinball(a.value - eta, tau);
  return total;
}

SortedAtomSet::SortedAtomSet(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw NumericalError("solver: empty kink set");
  std::sort(atoms_.begin(), atoms_.end(),
            [](const Atom& x, const Atom& y) { return x.value < y.value; });
  const std::size_t n = atoms_.size();
  suffix_w_.assign(n + 1, 0.0);
  suffix_wc_.assign(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    suffix_w_[i] = suffix_w_[i + 1] + atoms_[i].weight;
    suffix_wc_[i] = suffix_wc_[i + 1] + atoms_[i].weight * atoms_[i].value;
  }
  total_w_ = suffix_w_[0];
  total_wc_ = suffix_wc_[0];
}

double SortedAtomSet::objective_at_index(std::size_t i, double tau) const {
  const double eta = atoms_[i].value;
  const double above_w = suffix_w_[i], above_wc = suffix_wc_[i];
  const double below_w = total_w_ - above_w, below_wc = total_wc_ - above_wc;
  return tau * (above_wc - eta * above_w) + (tau - 1.0) * (below_wc - eta * below_w);
}

double SortedAtomSet::objective(double eta, double tau) const {
  const auto it = std::lower_bound(atoms_.begin(), atoms_.end(), eta,
                                   [](const Atom& a, double v) { return a.value < v; });
  const std::size_t i = static_cast<std::size_t>(it - atoms_.begin());
  // Atoms with value == eta contribute zero on either side of the split.
  const double above_w = suffix_w_[i], above_wc = suffix_wc_[i];
  const double below_w = total_w_ - above_w, below_wc = total_wc_ - above_wc;
  return tau * (above_wc - eta * above_w) + (tau - 1.0) * (below_wc - eta * below_w);
}

double SortedAtomSet::subgradient(double eta, double tau) const {
  const auto it = std::lower_bound(atoms_.begin(), atoms_.end(), eta,
                                   [](const Atom& a, double v) { return a.value < v; });
  const std::size_t i = static_cast<std::size_t>(it - atoms_.begin());
  const double below_w = total_w_ - suffix_w_[i];
  return below_w - tau * total_w_;
}

MinimizeResult SortedAtomSet::kink_scan(double tau) const {
  const std::size_t n = atoms_.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && atoms_[i].value == atoms_[i - 1].value) continue;
    best = std::min(best, objective_at_index(i, tau));
  }
  // Smallest eta among minimizers; flat segments of the objective produce
  // mathematically exact ties, so compare with a relative tolerance.
  const double tol = 1e-12 * (1.0 + std::fabs(best));
  MinimizeResult result;
  result.diagnostics.kink_count = static_cast<long long>(n);
  result.diagnostics.converged = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && atoms_[i].value == atoms_[i - 1].value) continue;
    const double obj = objective_at_index(i, tau);
    if (obj <= best + tol) {
      result.eta = atoms_[i].value;
      result.objective = obj;
      break;
    }
  }
  result.diagnostics.objective = result.objective;
  return result;
}

MinimizeResult SortedAtomSet::subgradient_solve(double tau, int max_iter, double rel_tol) const {
  MinimizeResult result;
  result.diagnostics.kink_count = static_cast<long long>(atoms_.size());
  double lo = atoms_.front().value;
  double hi = atoms_.back().value;
  if (lo == hi) {
    result.eta = lo;
    result.objective = objective(lo, tau);
    result.diagnostics.objective = result.objective;
    return result;
  }

  double eta = 0.5 * (lo + hi);
  bool converged = false;
  int iter = 0;
  while (iter < max_iter) {
    ++iter;
    if (subgradient(eta, tau) < 0.0)
      lo = eta;
    else
      hi = eta;
    const double next = 0.5 * (lo + hi);
    const double denom = std::max(std::fabs(eta), 1e-12);
    const bool small_step = std::fabs(next - eta) / denom <= rel_tol;
    eta = next;
    if (small_step) {
      converged = true;
      break;
    }
  }

  // The minimizer sits on a kink; refine over the kinks near the final
  // bracket (one extra kink on each side).
  const auto begin_it = std::lower_bound(atoms_.begin(), atoms_.end(), lo,
                                         [](const Atom& a, double v) { return a.value < v; });
  std::size_t first = static_cast<std::size_t>(begin_it - atoms_.begin());
  if (first > 0) --first;
  double best = std::numeric_limits<double>::infinity();
  double best_eta = eta;
  bool past_bracket = false;
  bool have_best = false;
  for (std::size_t i = first; i < atoms_.size(); ++i) {
    if (i > first && atoms_[i].value == atoms_[i - 1].value) continue;
    const double obj = objective_at_index(i, tau);
    if (!have_best || obj < best - 1e-12 * (1.0 + std::fabs(best))) {
      have_best = true;
      best = obj;
      best_eta = atoms_[i].value;
    }
    if (atoms_[i].value > hi) {
      if (past_bracket) break;
      past_bracket = true;
    }
  }
  result.eta = best_eta;
  result.objective = best;
  result.diagnostics.iterations = iter;
  result.diagnostics.converged = converged;
  result.diagnostics.objective = best;
  return result;
}

MinimizeResult kink_scan_minimize(std::vector<Atom> atoms, double tau) {
  return SortedAtomSet(std::move(atoms)).kink_scan(tau);
}

MinimizeResult subgradient_minimize(std::vector<Atom> atoms, double tau, int max_iter,
                                    double rel_tol) {
  return SortedAtomSet(std::move(atoms)).subgradient_solve(tau, max_iter, rel_tol);
}

double estimate_Lk(const NuisanceBundle& bundle, int subject, int stage, double eta, double tau) {
  if (subject < 0 || subject >= bundle.size())
    throw ContractError("estimate_Lk: subject out of range");
  if (stage < 1 || stage > bundle.horizon()) throw ContractError("estimate_Lk: stage out of range");
  const SubjectCache& cache = bundle.subjects[subject];
  if (cache.rollouts.empty()) throw ContractError("estimate_Lk: missing pseudo-sample cache");
  const double prefix = cache.prefix[stage - 1];
  double total = 0.0;
  for (double roll : cache.rollouts[stage - 1]) total += pinball(prefix + roll - eta, tau);
  return total / static_cast<double>(cache.rollouts[stage - 1].size());
}

double dr_objective(const NuisanceBundle& bundle, Method method, int fold, double eta,
                    double tau) {
  const int horizon = bundle.horizon();
  double total = 0.0;
  int count = 0;
  auto add_subject = [&](int i) {
    const SubjectCache& cache = bundle.subjects[i];
    if (cache.rollouts.empty()) throw ContractError("dr_objective: missing pseudo-sample cache");
    ++count;
    switch (method) {
      case Method::dm:
        total += estimate_Lk(bundle, i, 1, eta, tau);
        return;
      case Method::ipw:
        total += cache.full_weight * pinball(cache.observed_sum - eta, tau);
        return;
      case Method::dr: {
        double value = cache.full_weight * pinball(cache.observed_sum - eta, tau);
        for (int k = 1; k <= horizon; ++k)
          if (cache.aug_coef[k - 1] != 0.0)
            value += cache.aug_coef[k - 1] * estimate_Lk(bundle, i, k, eta, tau);
        total += value;
        return;
      }
    }
  };
  if (fold < 0) {
    for (int i = 0; i < bundle.size(); ++i) add_subject(i);
  } else {
    if (fold >= bundle.folds.num_folds) throw ContractError("dr_objective: fold out of range");
    for (int i : bundle.fold_members[fold]) add_subject(i);
  }
  if (count == 0) throw ContractError("dr_objective: empty fold");
  return total / count;
}

PreparedSolver::PreparedSolver(const NuisanceBundle& bundle, Method method,
                               const EstimatorConfig& config)
    : bundle_(&bundle), method_(method), config_(config) {
  if (config_.aggregation == Aggregation::pooled) {
    std::vector<Atom> atoms;
    collect_atoms(bundle, method, -1, atoms);
    sets_.emplace_back(std::move(atoms));
    subject_count_.push_back(static_cast<std::size_t>(bundle.size()));
  } else {
    for (int s = 0; s < bundle.folds.num_folds; ++s) {
      std::vector<Atom> atoms;
      collect_atoms(bundle, method, s, atoms);
      sets_.emplace_back(std::move(atoms));
      subject_count_.push_back(bundle.fold_members[s].size());
    }
  }
}

QuantileEstimate PreparedSolver::solve(double tau) const {
  EstimatorConfig cfg = config_;
  cfg.tau = tau;
  cfg.validate();

  QuantileEstimate estimate;
  estimate.tau = tau;
  estimate.method = method_;
  const int S = bundle_->folds.num_folds;
  estimate.per_fold_eta.resize(S);

  auto minimize = [&](const SortedAtomSet& set) {
    const bool use_kinks = cfg.solver == Solver::kink_scan ||
                           (cfg.solver == Solver::automatic &&
                            static_cast<long long>(set.size()) <= cfg.kink_scan_limit);
    return use_kinks ? set.kink_scan(tau)
                     : set.subgradient_solve(tau, cfg.max_iter, cfg.rel_tol);
  };

  if (cfg.aggregation == Aggregation::pooled) {
    const MinimizeResult res = minimize(sets_[0]);
    estimate.eta_hat = res.eta;
    estimate.diagnostics = res.diagnostics;
    estimate.diagnostics.objective = res.objective / subject_count_[0];
    std::fill(estimate.per_fold_eta.begin(), estimate.per_fold_eta.end(), res.eta);
    return estimate;
  }

  double eta_sum = 0.0;
  double objective_sum = 0.0;
  for (int s = 0; s < S; ++s) {
    const MinimizeResult res = minimize(sets_[s]);
    estimate.per_fold_eta[s] = res.eta;
    eta_sum += res.eta;
    objective_sum += res.objective / std::max<std::size_t>(subject_count_[s], 1);
    estimate.diagnostics.kink_count += res.diagnostics.kink_count;
    estimate.diagnostics.iterations += res.diagnostics.iterations;
    estimate.diagnostics.converged = estimate.diagnostics.converged && res.diagnostics.converged;
  }
  estimate.eta_hat = eta_sum / S;
  estimate.diagnostics.objective = objective_sum / S;
  return estimate;
}

QuantileEstimate solve_quantile(const NuisanceBundle& bundle, Method method, double tau,
                                const EstimatorConfig& config) {
  return PreparedSolver(bundle, method, config).solve(tau);
}

QuantileEstimate solve_quantile(const core::Dataset& dataset, const core::Policy& target,
                                Method method, const EstimatorConfig& config,
                                const NuisanceConfig& nuisance_config, core::RngStream& rng) {
  NuisanceConfig ncfg = nuisance_config;
  ncfg.num_folds = config.num_folds;
  ncfg.mc_samples = config.mc_samples;
  const NuisanceBundle bundle = fit_nuisances(dataset, target, ncfg, rng);
  return solve_quantile(bundle, method, config.tau, config);
}

}  // namespace qope::quantile
