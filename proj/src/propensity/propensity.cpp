#include "qope/propensity/propensity.hpp"

#include <algorithm>

#include "qope/core/error.hpp"

namespace qope::propensity {

std::shared_ptr<const FittedPropensity> fit_propensity(const core::Dataset& dataset, int stage,
                                                       std::span<const int> train_indices,
                                                       const GbdtConfig& config) {
  if (train_indices.empty()) throw ContractError("fit_propensity: empty training index set");
  if (stage < 1 || stage > dataset.horizon)
    throw ContractError("fit_propensity: stage out of range");

  const int dim =
      core::History::flat_dim(dataset.covariate_dims, stage, dataset.action_space);
  core::Matrix features(static_cast<int>(train_indices.size()), dim);
  std::vector<int> labels(train_indices.size());
  for (std::size_t row = 0; row < train_indices.size(); ++row) {
    const auto& traj = dataset.trajectories[train_indices[row]];
    const auto flat = core::history_prefix(traj, stage).flatten(dataset.action_space);
    std::copy(flat.begin(), flat.end(), features.row(static_cast<int>(row)).begin());
    labels[row] = traj.stages[stage - 1].action;
  }
  auto model = GbdtClassifier::fit(features, labels, dataset.action_space, config);
  return std::make_shared<FittedPropensity>(std::move(model), stage, dataset.action_space);
}

}  // namespace qope::propensity
