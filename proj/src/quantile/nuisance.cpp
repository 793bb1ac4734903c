#include "qope/quantile/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qope/core/error.hpp"
#include "qope/core/log.hpp"

namespace qope::quantile {

using core::Dataset;
using core::History;
using core::Matrix;
using core::Policy;
using core::RngStream;

void NuisanceConfig::validate() const {
  if (num_folds < 2) throw ConfigError("nuisance: num_folds must be >= 2");
  if (mc_samples < 1) throw ConfigError("nuisance: mc_samples must be >= 1");
  if (propensity.kind == PropensityKind::fit_gbdt) propensity.gbdt.validate();
  if (propensity.kind == PropensityKind::oracle && !propensity.oracle)
    throw ConfigError("nuisance: oracle propensity requested without a policy");
  if (propensity.kind == PropensityKind::constant &&
      !(propensity.constant_value > 0.0 && propensity.constant_value <= 1.0))
    throw ConfigError("nuisance: constant propensity must be in (0, 1]");
  if (reward.kind == RewardKind::fit_mdn) reward.mdn.validate();
  if (reward.kind == RewardKind::oracle && !reward.oracle_factory)
    throw ConfigError("nuisance: oracle reward requested without a factory");
  if (aligned_min_rows < 1) throw ConfigError("nuisance: aligned_min_rows must be >= 1");
}

std::vector<double> reward_features(const History& history, int action, int action_space) {
  std::vector<double> feat = history.flatten(action_space);
  feat.reserve(feat.size() + action_space);
  for (int a = 0; a < action_space; ++a) feat.push_back(action == a ? 1.0 : 0.0);
  return feat;
}

namespace {

std::shared_ptr<const propensity::PropensitySource> make_propensity(
    const Dataset& dataset, int stage, std::span<const int> train, const PropensitySpec& spec) {
  switch (spec.kind) {
    case PropensityKind::fit_gbdt:
      return propensity::fit_propensity(dataset, stage, train, spec.gbdt);
    case PropensityKind::oracle:
      return std::make_shared<propensity::OraclePropensity>(*spec.oracle, stage,
                                                            dataset.action_space,
                                                            spec.oracle_clip_floor);
    case PropensityKind::constant:
      return std::make_shared<propensity::ConstantPropensity>(spec.constant_value, stage,
                                                              dataset.action_space);
  }
  throw ConfigError("nuisance: unknown propensity kind");
}

std::shared_ptr<const mdn::RewardModel> fit_stage_reward(const Dataset& dataset, int stage,
                                                         std::span<const int> train,
                                                         const RewardSpec& spec,
                                                         RngStream& rng) {
  std::shared_ptr<const mdn::RewardModel> model;
  if (spec.kind == RewardKind::oracle) {
    model = spec.oracle_factory(stage);
  } else {
    const int m = dataset.action_space;
    const int dim = History::flat_dim(dataset.covariate_dims, stage, m) + m;
    Matrix features(static_cast<int>(train.size()), dim);
    std::vector<double> targets(train.size());
    for (std::size_t row = 0; row < train.size(); ++row) {
      const auto& traj = dataset.trajectories[train[row]];
      const auto feat =
          reward_features(core::history_prefix(traj, stage), traj.stages[stage - 1].action, m);
      std::copy(feat.begin(), feat.end(), features.row(static_cast<int>(row)).begin());
      targets[row] = traj.stages[stage - 1].reward;
    }
    model = std::make_shared<mdn::MdnModel>(mdn::MdnModel::fit(features, targets, spec.mdn, rng));
  }
  if (spec.transform) model = spec.transform(std::move(model), stage);
  return model;
}

// Subjects whose logged actions from `stage` onward match the target policy
// at their observed histories; only meaningful for (near-)deterministic
// policies.
std::vector<int> aligned_subjects(const Dataset& dataset, const Policy& target, int stage,
                                  std::span<const int> train) {
  std::vector<int> aligned;
  for (int i : train) {
    const auto& traj = dataset.trajectories[i];
    bool ok = true;
    for (int k = stage; k <= dataset.horizon && ok; ++k) {
      int action = -1;
      if (!target.is_deterministic_at(core::history_prefix(traj, k), dataset.action_space,
                                      &action) ||
          action != traj.stages[k - 1].action)
        ok = false;
    }
    if (ok) aligned.push_back(i);
  }
  return aligned;
}

std::shared_ptr<const mdn::RewardModel> fit_remaining_model(const Dataset& dataset,
                                                            const Policy& target, int stage,
                                                            std::span<const int> train,
                                                            const NuisanceConfig& config,
                                                            RngStream& rng) {
  const auto aligned = aligned_subjects(dataset, target, stage, train);
  if (static_cast<int>(aligned.size()) < config.aligned_min_rows) {
    core::warn("nuisance: stage " + std::to_string(stage) + " has only " +
               std::to_string(aligned.size()) +
               " target-aligned training subjects; falling back to roll-out KDE for the "
               "remaining-sum density");
    return nullptr;
  }
  const int m = dataset.action_space;
  const int dim = History::flat_dim(dataset.covariate_dims, stage, m) + m;
  Matrix features(static_cast<int>(aligned.size()), dim);
  std::vector<double> targets(aligned.size());
  for (std::size_t row = 0; row < aligned.size(); ++row) {
    const auto& traj = dataset.trajectories[aligned[row]];
    const auto feat =
        reward_features(core::history_prefix(traj, stage), traj.stages[stage - 1].action, m);
    std::copy(feat.begin(), feat.end(), features.row(static_cast<int>(row)).begin());
    double remaining = 0.0;
    for (int k = stage; k <= dataset.horizon; ++k) remaining += traj.stages[k - 1].reward;
    targets[row] = remaining;
  }
  mdn::MdnConfig cfg = config.reward.mdn;
  return std::make_shared<mdn::MdnModel>(mdn::MdnModel::fit(features, targets, cfg, rng));
}

std::vector<std::shared_ptr<const mdn::RewardModel>> fit_covariate_models(
    const Dataset& dataset, int stage, std::span<const int> train, const mdn::MdnConfig& mdn_cfg,
    RngStream& rng) {
  // Autoregressive per-dimension models for X_{stage+1} given
  // (flatten(H_stage), one-hot A_stage, R_stage, earlier dims of X_{stage+1}).
  const int m = dataset.action_space;
  const int next_dim = dataset.covariate_dims[stage];  // d_{k+1}
  const int base_dim = History::flat_dim(dataset.covariate_dims, stage, m) + m + 1;
  std::vector<std::shared_ptr<const mdn::RewardModel>> models;
  models.reserve(next_dim);
  for (int d = 0; d < next_dim; ++d) {
    Matrix features(static_cast<int>(train.size()), base_dim + d);
    std::vector<double> targets(train.size());
    for (std::size_t row = 0; row < train.size(); ++row) {
      const auto& traj = dataset.trajectories[train[row]];
      auto feat = reward_features(core::history_prefix(traj, stage),
                                  traj.stages[stage - 1].action, m);
      feat.push_back(traj.stages[stage - 1].reward);
      const auto& next_cov = traj.stages[stage].covariates;
      for (int d2 = 0; d2 < d; ++d2) feat.push_back(next_cov[d2]);
      std::copy(feat.begin(), feat.end(), features.row(static_cast<int>(row)).begin());
      targets[row] = next_cov[d];
    }
    core::RngStream dim_rng = rng.fork(static_cast<std::uint64_t>(d));
    models.push_back(
        std::make_shared<mdn::MdnModel>(mdn::MdnModel::fit(features, targets, mdn_cfg, dim_rng)));
  }
  return models;
}

}  // namespace

NuisanceBundle fit_nuisances(const Dataset& dataset, const Policy& target,
                             const NuisanceConfig& config, RngStream& rng) {
  config.validate();
  dataset.validate();
  const int n = dataset.size();
  const int horizon = dataset.horizon;
  const int m = dataset.action_space;

  NuisanceBundle bundle;
  bundle.dataset = std::make_shared<const Dataset>(dataset);
  bundle.target = target;
  bundle.mc_samples = config.mc_samples;
  bundle.rollout_covariates = config.rollout_covariates;
  {
    core::RngStream fold_rng = rng.fork("folds");
    bundle.folds = core::split_folds(n, config.num_folds, fold_rng);
  }
  bundle.fold_members = bundle.folds.members();
  bundle.fold_models.resize(config.num_folds);
  bundle.subjects.resize(n);

  const Dataset& data = *bundle.dataset;
  for (int s = 0; s < config.num_folds; ++s) {
    core::RngStream fold_rng = rng.fork("fold").fork(static_cast<std::uint64_t>(s));
    const std::vector<int> train = bundle.folds.complement(s);
    if (train.empty()) throw ConfigError("nuisance: a fold has an empty complement");

    FoldNuisance& fm = bundle.fold_models[s];
    fm.propensity.resize(horizon);
    fm.reward.resize(horizon);
    fm.remaining.assign(horizon, nullptr);
    fm.remaining_fallback.assign(horizon, false);
    for (int k = 1; k <= horizon; ++k) {
      fm.propensity[k - 1] = make_propensity(data, k, train, config.propensity);
      core::RngStream mdn_rng = fold_rng.fork("mdn").fork(static_cast<std::uint64_t>(k));
      fm.reward[k - 1] = fit_stage_reward(data, k, train, config.reward, mdn_rng);
    }
    // The remaining sum from the last stage is just R_K, whose conditional
    // law is the stage-K reward model.
    fm.remaining[horizon - 1] = fm.reward[horizon - 1];
    if (config.fit_remaining_models) {
      for (int k = 1; k < horizon; ++k) {
        core::RngStream rem_rng = fold_rng.fork("remaining").fork(static_cast<std::uint64_t>(k));
        fm.remaining[k - 1] = fit_remaining_model(data, target, k, train, config, rem_rng);
        fm.remaining_fallback[k - 1] = fm.remaining[k - 1] == nullptr;
      }
    } else {
      for (int k = 1; k < horizon; ++k) fm.remaining_fallback[k - 1] = true;
    }
    if (config.rollout_covariates == RolloutCovariates::regenerate && horizon > 1) {
      fm.covariate.resize(horizon - 1);
      for (int k = 1; k < horizon; ++k) {
        core::RngStream cov_rng = fold_rng.fork("covariate").fork(static_cast<std::uint64_t>(k));
        fm.covariate[k - 1] = fit_covariate_models(data, k, train, config.reward.mdn, cov_rng);
      }
    }
  }

  // Per-subject caches from the subject's own fold models.
  for (int s = 0; s < config.num_folds; ++s) {
    const FoldNuisance& fm = bundle.fold_models[s];
    core::RngStream roll_base =
        rng.fork("rollout").fork(static_cast<std::uint64_t>(s));
    for (int i : bundle.fold_members[s]) {
      const auto& traj = data.trajectories[i];
      SubjectCache& cache = bundle.subjects[i];
      cache.observed_sum = core::cumulative_reward(traj);
      cache.aug_coef.resize(horizon);
      cache.prefix.resize(horizon);
      cache.target_probs.resize(horizon);
      cache.flat_history.resize(horizon);
      cache.rollouts.assign(horizon, std::vector<double>(config.mc_samples));

      double ratio_prod = 1.0;
      double prefix_sum = 0.0;
      std::vector<History> prefixes;
      prefixes.reserve(horizon);
      for (int k = 1; k <= horizon; ++k) {
        const History h = core::history_prefix(traj, k);
        cache.flat_history[k - 1] = h.flatten(m);
        cache.target_probs[k - 1].resize(m);
        target.probs(h, cache.target_probs[k - 1]);
        const int logged = traj.stages[k - 1].action;
        const double pi_k = cache.target_probs[k - 1][logged];
        const double b_k = fm.propensity[k - 1]->prob(h, logged);
        if (!(b_k > 0.0))
          throw NumericalError("nuisance: zero propensity at a logged action (stage " +
                               std::to_string(k) + "); use a positive clip floor");
        cache.prefix[k - 1] = prefix_sum;
        cache.aug_coef[k - 1] = ratio_prod * (1.0 - pi_k / b_k);
        ratio_prod *= pi_k / b_k;
        prefix_sum += traj.stages[k - 1].reward;
        prefixes.push_back(h);
      }
      cache.full_weight = ratio_prod;

      core::RngStream roll_rng = roll_base.fork(static_cast<std::uint64_t>(i));
      for (int k = 1; k <= horizon; ++k) {
        for (int j = 0; j < config.mc_samples; ++j) {
          History sim = prefixes[k - 1];
          double total = 0.0;
          for (int kp = k; kp <= horizon; ++kp) {
            const int action = target.sample(sim, m, roll_rng);
            const auto feat = reward_features(sim, action, m);
            const double reward = fm.reward[kp - 1]->sample(feat, roll_rng);
            total += reward;
            if (kp < horizon) {
              std::vector<double> next_cov;
              if (bundle.rollout_covariates == RolloutCovariates::observed) {
                next_cov = traj.stages[kp].covariates;
              } else {
                next_cov.resize(data.covariate_dims[kp]);
                auto base_feat = feat;
                base_feat.push_back(reward);
                for (std::size_t d = 0; d < next_cov.size(); ++d) {
                  next_cov[d] = fm.covariate[kp - 1][d]->sample(base_feat, roll_rng);
                  base_feat.push_back(next_cov[d]);
                }
              }
              sim = sim.extended(action, reward, std::move(next_cov));
            }
          }
          cache.rollouts[k - 1][j] = total;
        }
      }
    }
  }
  return bundle;
}

}  // namespace qope::quantile
