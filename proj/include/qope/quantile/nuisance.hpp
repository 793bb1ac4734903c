#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "qope/core/folds.hpp"
#include "qope/core/policy.hpp"
#include "qope/core/rng.hpp"
#include "qope/core/types.hpp"
#include "qope/mdn/mdn.hpp"
#include "qope/propensity/propensity.hpp"

namespace qope::quantile {

enum class PropensityKind { fit_gbdt, oracle, constant };

struct PropensitySpec {
  PropensityKind kind = PropensityKind::fit_gbdt;
  propensity::GbdtConfig gbdt;
  std::optional<core::Policy> oracle;  // known behavior mechanism
  double oracle_clip_floor = 0.0;      // oracle probabilities are exact by default
  double constant_value = 0.5;         // deliberately misspecified source
};

enum class RewardKind { fit_mdn, oracle };

struct RewardSpec {
  RewardKind kind = RewardKind::fit_mdn;
  mdn::MdnConfig mdn;
  // stage (1-based) -> conditional law of R_k given flatten(H_k) + one-hot(A_k).
  std::function<std::shared_ptr<const mdn::RewardModel>(int)> oracle_factory;
  // Optional post-fit hook (e.g. corrupting a fitted model for
  // double-robustness experiments).
  std::function<std::shared_ptr<const mdn::RewardModel>(std::shared_ptr<const mdn::RewardModel>,
                                                        int)>
      transform;
};

// Roll-outs need the covariates of later stages. `observed` reuses the
// logged X_{k+1}; `regenerate` samples X_{k+1} from fitted per-dimension
// conditional models.
enum class RolloutCovariates { observed, regenerate };

struct NuisanceConfig {
  int num_folds = 5;
  int mc_samples = 50;  // M
  PropensitySpec propensity;
  RewardSpec reward;
  RolloutCovariates rollout_covariates = RolloutCovariates::observed;
  // Remaining-sum density models back the augmented density estimator; only
  // consulted for K >= 2 (stage K reuses the stage-K reward model).
  bool fit_remaining_models = true;
  int aligned_min_rows = 50;

  void validate() const;
};

// Everything the estimating equation needs about one evaluation subject,
// produced by models trained on that subject's out-of-fold complement.
struct SubjectCache {
  double observed_sum = 0.0;
  double full_weight = 1.0;           // prod_k pi_k / b_k at the logged actions
  std::vector<double> aug_coef;       // per stage k: (prod_{k'<k} pi/b) (1 - pi_k/b_k)
  std::vector<double> prefix;         // per stage k: observed R_1 + .. + R_{k-1}
  std::vector<std::vector<double>> rollouts;  // [K][M] simulated sums from stage k on
  std::vector<std::vector<double>> target_probs;  // [K][m] pi_k(. | H_k)
  std::vector<std::vector<double>> flat_history;  // [K] flatten(H_k)
};

struct FoldNuisance {
  std::vector<std::shared_ptr<const propensity::PropensitySource>> propensity;  // per stage
  std::vector<std::shared_ptr<const mdn::RewardModel>> reward;                  // per stage
  // Conditional density of sum_{k' >= k} R_{k'} under the target policy given
  // (flatten(H_k), one-hot A_k); null entries fall back to roll-out KDE.
  std::vector<std::shared_ptr<const mdn::RewardModel>> remaining;
  std::vector<bool> remaining_fallback;
  // Covariate transition models (regenerate roll-outs only): [k][dim].
  std::vector<std::vector<std::shared_ptr<const mdn::RewardModel>>> covariate;
};

struct NuisanceBundle {
  std::shared_ptr<const core::Dataset> dataset;
  core::Policy target;
  core::FoldAssignment folds;
  std::vector<std::vector<int>> fold_members;
  int mc_samples = 0;
  RolloutCovariates rollout_covariates = RolloutCovariates::observed;
  std::vector<FoldNuisance> fold_models;
  std::vector<SubjectCache> subjects;

  int size() const { return dataset->size(); }
  int horizon() const { return dataset->horizon; }
  int action_space() const { return dataset->action_space; }
  int fold_of(int subject) const { return folds.fold_of[subject]; }
};

// Cross-fitted nuisance estimation: per fold, fits the behavior-policy and
// reward models on the fold's complement, then builds per-subject caches
// (importance weights, augmentation coefficients, pseudo roll-outs drawn once
// and reused for every eta and tau).
NuisanceBundle fit_nuisances(const core::Dataset& dataset, const core::Policy& target,
                             const NuisanceConfig& config, core::RngStream& rng);

// Feature vector consumed by the stage-k reward model.
std::vector<double> reward_features(const core::History& history, int action, int action_space);

}  // namespace qope::quantile
