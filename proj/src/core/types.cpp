#include "qope/core/types.hpp"

#include <string>

namespace qope::core {

void Dataset::validate() const {
  if (trajectories.empty()) throw DataError("dataset: needs at least one trajectory");
  if (horizon < 1) throw DataError("dataset: horizon must be >= 1");
  if (action_space < 1) throw DataError("dataset: action space must be >= 1");
  if (static_cast<int>(covariate_dims.size()) != horizon)
    throw DataError("dataset: covariate_dims size must equal horizon");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& traj = trajectories[i];
    if (static_cast<int>(traj.stages.size()) != horizon)
      throw DataError("dataset: trajectory " + std::to_string(i) + " has " +
                      std::to_string(traj.stages.size()) + " stages, expected " +
                      std::to_string(horizon));
    for (int k = 0; k < horizon; ++k) {
      const auto& st = traj.stages[k];
      if (static_cast<int>(st.covariates.size()) != covariate_dims[k])
        throw DataError("dataset: trajectory " + std::to_string(i) + " stage " +
                        std::to_string(k + 1) + " covariate dim mismatch");
      if (st.action < 0 || st.action >= action_space)
        throw DataError("dataset: trajectory " + std::to_string(i) + " stage " +
                        std::to_string(k + 1) + " action out of range");
    }
  }
}

Dataset Dataset::from_trajectories(std::vector<Trajectory> trajectories, int action_space) {
  if (trajectories.empty()) throw DataError("dataset: needs at least one trajectory");
  Dataset ds;
  ds.horizon = static_cast<int>(trajectories.front().stages.size());
  ds.covariate_dims.resize(ds.horizon);
  for (int k = 0; k < ds.horizon; ++k)
    ds.covariate_dims[k] = static_cast<int>(trajectories.front().stages[k].covariates.size());
  int max_action = 0;
  for (const auto& traj : trajectories)
    for (const auto& st : traj.stages) max_action = std::max(max_action, st.action);
  ds.action_space = action_space > 0 ? action_space : max_action + 1;
  ds.trajectories = std::move(trajectories);
  ds.validate();
  return ds;
}

double cumulative_reward(const Trajectory& trajectory) {
  double total = 0.0;
  for (const auto& st : trajectory.stages) total += st.reward;
  return total;
}

void History::validate() const {
  if (stage < 1) throw ContractError("history: stage must be >= 1");
  if (static_cast<int>(covariates.size()) != stage)
    throw ContractError("history: expected exactly k covariate blocks");
  if (static_cast<int>(actions.size()) != stage - 1 ||
      static_cast<int>(rewards.size()) != stage - 1)
    throw ContractError("history: expected k-1 actions and rewards");
}

std::vector<double> History::flatten(int action_space) const {
  std::vector<double> out;
  std::size_t total = 0;
  for (const auto& block : covariates) total += block.size();
  total += static_cast<std::size_t>(stage - 1) * (action_space + 1);
  out.reserve(total);
  for (int k = 0; k < stage; ++k) {
    out.insert(out.end(), covariates[k].begin(), covariates[k].end());
    if (k < stage - 1) {
      for (int a = 0; a < action_space; ++a) out.push_back(actions[k] == a ? 1.0 : 0.0);
      out.push_back(rewards[k]);
    }
  }
  return out;
}

int History::flat_dim(std::span<const int> covariate_dims, int stage, int action_space) {
  int dim = 0;
  for (int k = 0; k < stage; ++k) dim += covariate_dims[k];
  dim += (stage - 1) * (action_space + 1);
  return dim;
}

History History::extended(int action, double reward, std::vector<double> next_covariates) const {
  History next = *this;
  next.stage = stage + 1;
  next.actions.push_back(action);
  next.rewards.push_back(reward);
  next.covariates.push_back(std::move(next_covariates));
  return next;
}

History history_prefix(const Trajectory& trajectory, int stage) {
  if (stage < 1 || stage > static_cast<int>(trajectory.stages.size()))
    throw ContractError("history_prefix: stage out of range");
  History h;
  h.stage = stage;
  h.covariates.reserve(stage);
  for (int k = 0; k < stage; ++k) {
    h.covariates.push_back(trajectory.stages[k].covariates);
    if (k < stage - 1) {
      h.actions.push_back(trajectory.stages[k].action);
      h.rewards.push_back(trajectory.stages[k].reward);
    }
  }
  return h;
}

}  // namespace qope::core
