#pragma once

#include <span>
#include <vector>

#include "qope/core/error.hpp"

namespace qope::core {

// One decision stage: covariates observed before the action, the logged
// action, and the reward that followed.
struct StageRecord {
  std::vector<double> covariates;
  int action = 0;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<StageRecord> stages;
};

// N trajectories sharing horizon K, action-space size m, and per-stage
// covariate dimensions.
struct Dataset {
  std::vector<Trajectory> trajectories;
  int horizon = 0;                 // K
  int action_space = 0;            // m
  std::vector<int> covariate_dims; // d_k, one per stage

  int size() const { return static_cast<int>(trajectories.size()); }

  // Throws DataError on any shape or range violation.
  void validate() const;

  // Infers K, m (as 1 + max action), and d_k from the trajectories.
  static Dataset from_trajectories(std::vector<Trajectory> trajectories, int action_space = 0);
};

double cumulative_reward(const Trajectory& trajectory);

// Observed data preceding the action at a stage: covariate blocks X_1..X_k,
// actions A_1..A_{k-1} and rewards R_1..R_{k-1}. `stage` is the 1-based k.
struct History {
  int stage = 1;
  std::vector<std::vector<double>> covariates;
  std::vector<int> actions;
  std::vector<double> rewards;

  void validate() const;

  // Fixed flattening used by every nuisance model: per past stage
  // [X_k | one-hot(A_k, m) | R_k], then the current covariate block.
  std::vector<double> flatten(int action_space) const;

  // Length of flatten(action_space) for given covariate dimensions.
  static int flat_dim(std::span<const int> covariate_dims, int stage, int action_space);

  // Extends this history with (action, reward, next covariates); used by the
  // roll-out simulator.
  History extended(int action, double reward, std::vector<double> next_covariates) const;
};

// Prefix of a logged trajectory up to (and excluding) the action at `stage`.
History history_prefix(const Trajectory& trajectory, int stage);

}  // namespace qope::core
