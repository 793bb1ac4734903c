#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qope/quantile/nuisance.hpp"

namespace qope::quantile {

enum class Method { dm, ipw, dr };

std::string method_name(Method method);
Method method_from_name(const std::string& name);

enum class Solver { automatic, kink_scan, subgradient };
enum class Aggregation { pooled, per_fold_average };

struct EstimatorConfig {
  double tau = 0.5;
  int num_folds = 5;
  int mc_samples = 50;
  Solver solver = Solver::automatic;
  long long kink_scan_limit = 1'000'000;  // switch to subgradient above this
  int max_iter = 500;
  double rel_tol = 1e-6;
  Aggregation aggregation = Aggregation::pooled;

  void validate() const;
};

struct SolveDiagnostics {
  int iterations = 0;
  long long kink_count = 0;
  bool converged = true;
  double objective = 0.0;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct QuantileEstimate {
  double tau = 0.5;
  Method method = Method::dr;
  double eta_hat = 0.0;
  std::vector<double> per_fold_eta;  // eta_hat_s used inside the variance estimator
  double j0 = std::numeric_limits<double>::quiet_NaN();
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  std::optional<ConfidenceInterval> ci;
  bool variance_unstable = false;
  SolveDiagnostics diagnostics;
};

// One weighted pinball term of the piecewise-linear objective:
// weight * pinball(value - eta, tau).
struct Atom {
  double value = 0.0;
  double weight = 0.0;
};

// Objective atoms for the subjects of one fold (fold = -1 for all folds).
// DR: importance-weighted observed sums plus augmentation roll-outs; IPW:
// the weighted observed sums only; DM: the stage-1 roll-outs with unit mass.
void collect_atoms(const NuisanceBundle& bundle, Method method, int fold,
                   std::vector<Atom>& atoms);

// Sum of weighted pinball losses (not averaged).
double atoms_objective(std::span<const Atom> atoms, double eta, double tau);

struct MinimizeResult {
  double eta = 0.0;
  double objective = 0.0;  // sum over atoms at eta
  SolveDiagnostics diagnostics;
};

// Atoms sorted by value with cumulative sums: evaluates the piecewise-linear
// objective, its subgradient, and both minimizers; built once per (method,
// fold scope) and reused across quantile levels.
class SortedAtomSet {
public:
  explicit SortedAtomSet(std::vector<Atom> atoms);

  std::size_t size() const { return atoms_.size(); }
  double objective(double eta, double tau) const;
  double subgradient(double eta, double tau) const;

  // Exact minimization: the objective is piecewise linear in eta with kinks
  // at the atom values; evaluates every kink and returns the smallest eta
  // among the (tolerance-tied) minimizers.
  MinimizeResult kink_scan(double tau) const;

  // Iterative solver for the estimating equation (the objective
  // subgradient): bisection on the subgradient sign with the
  // relative-change stopping rule, then a local kink refinement. Returns the
  // best iterate with a convergence flag; exact only on convex
  // (nonnegative-weight) instances.
  MinimizeResult subgradient_solve(double tau, int max_iter, double rel_tol) const;

private:
  double objective_at_index(std::size_t i, double tau) const;

  std::vector<Atom> atoms_;
  std::vector<double> suffix_w_;   // sum of weights with index >= i
  std::vector<double> suffix_wc_;  // sum of weight*value with index >= i
  double total_w_ = 0.0;
  double total_wc_ = 0.0;
};

// One-shot wrappers.
MinimizeResult kink_scan_minimize(std::vector<Atom> atoms, double tau);
MinimizeResult subgradient_minimize(std::vector<Atom> atoms, double tau, int max_iter,
                                    double rel_tol);

// Objective value Psi averaged over the subjects of one fold (fold = -1 for
// all), evaluated directly from the per-subject caches.
double dr_objective(const NuisanceBundle& bundle, Method method, int fold, double eta, double tau);

// Monte-Carlo expected quantile loss for one subject's stage-k augmentation
// term: mean_j pinball(prefix_k + rollout_kj - eta, tau).
double estimate_Lk(const NuisanceBundle& bundle, int subject, int stage, double eta, double tau);

// Pre-sorted objective for repeated solves over many quantile levels against
// one nuisance bundle.
class PreparedSolver {
public:
  PreparedSolver(const NuisanceBundle& bundle, Method method, const EstimatorConfig& config);

  QuantileEstimate solve(double tau) const;

private:
  const NuisanceBundle* bundle_;
  Method method_;
  EstimatorConfig config_;
  std::vector<SortedAtomSet> sets_;        // pooled: one set; per-fold: S sets
  std::vector<std::size_t> subject_count_; // per set, for objective averaging
};

// Minimizes the pooled (or per-fold, then averaged) objective over eta.
QuantileEstimate solve_quantile(const NuisanceBundle& bundle, Method method, double tau,
                                const EstimatorConfig& config);

// Convenience: fits nuisances then solves.
QuantileEstimate solve_quantile(const core::Dataset& dataset, const core::Policy& target,
                                Method method, const EstimatorConfig& config,
                                const NuisanceConfig& nuisance_config, core::RngStream& rng);

}  // namespace qope::quantile
