#pragma once

#include <memory>
#include <span>
#include <vector>

#include "qope/core/policy.hpp"
#include "qope/core/types.hpp"
#include "qope/propensity/gbdt.hpp"

namespace qope::propensity {

// Estimated (or known) behavior policy for one stage: probabilities over the
// m actions given the history prefix.
class PropensitySource {
public:
  virtual ~PropensitySource() = default;
  virtual std::vector<double> probs(const core::History& history) const = 0;
  virtual int stage() const = 0;

  double prob(const core::History& history, int action) const {
    if (history.stage != stage())
      throw ContractError("propensity: history stage does not match model stage");
    auto p = probs(history);
    if (action < 0 || action >= static_cast<int>(p.size()))
      throw ContractError("propensity: action out of range");
    return p[action];
  }
};

// GBDT fit on (flattened history, logged action) pairs.
class FittedPropensity : public PropensitySource {
public:
  FittedPropensity(GbdtClassifier model, int stage, int action_space)
      : model_(std::move(model)), stage_(stage), action_space_(action_space) {}

  std::vector<double> probs(const core::History& history) const override {
    return model_.predict_proba(history.flatten(action_space_));
  }
  std::vector<double> raw_probs(const core::History& history) const {
    return model_.predict_raw(history.flatten(action_space_));
  }
  int stage() const override { return stage_; }
  const GbdtClassifier& model() const { return model_; }

private:
  GbdtClassifier model_;
  int stage_;
  int action_space_;
};

// Passthrough of a known behavior mechanism; used for double-robustness
// experiments with the true b_k plugged in. Optionally clipped.
class OraclePropensity : public PropensitySource {
public:
  OraclePropensity(core::Policy behavior, int stage, int action_space, double clip_floor = 0.0)
      : behavior_(std::move(behavior)),
        stage_(stage),
        action_space_(action_space),
        clip_floor_(clip_floor) {}

  std::vector<double> probs(const core::History& history) const override {
    std::vector<double> p(action_space_);
    behavior_.probs(history, p);
    clip_renormalize(p, clip_floor_);
    return p;
  }
  int stage() const override { return stage_; }

private:
  core::Policy behavior_;
  int stage_;
  int action_space_;
  double clip_floor_;
};

// Deliberately misspecified source assigning every action the same value;
// the corrupted-propensity arm of the double-robustness experiments.
class ConstantPropensity : public PropensitySource {
public:
  ConstantPropensity(double value, int stage, int action_space)
      : value_(value), stage_(stage), action_space_(action_space) {}

  std::vector<double> probs(const core::History&) const override {
    return std::vector<double>(action_space_, value_);
  }
  int stage() const override { return stage_; }

private:
  double value_;
  int stage_;
  int action_space_;
};

// Fits the stage-k behavior model on the given trajectories.
std::shared_ptr<const FittedPropensity> fit_propensity(const core::Dataset& dataset, int stage,
                                                       std::span<const int> train_indices,
                                                       const GbdtConfig& config);

}  // namespace qope::propensity
