#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qope/core/rng.hpp"
#include "qope/core/types.hpp"

namespace qope::core {

// Deterministic rule: pick `above_action` when the indexed covariate of the
// current stage exceeds `cut`, otherwise `below_action`.
struct ThresholdRule {
  int feature = 0;
  double cut = 0.0;
  int above_action = 1;
  int below_action = 0;
};

// Probability mass over actions given a history prefix. Target and behavior
// policies share this type; `callback` supports oracle behavior mechanisms.
class Policy {
public:
  using Callback = std::function<void(const History&, std::span<double>)>;

  // Same threshold rule at every stage.
  static Policy threshold(ThresholdRule rule);
  // Per-stage threshold rules (index k-1 used at stage k; the last rule
  // repeats past the end).
  static Policy threshold(std::vector<ThresholdRule> rules);
  // History-independent mass per stage (single vector reused across stages).
  static Policy tabular(std::vector<double> probs);
  static Policy tabular(std::vector<std::vector<double>> per_stage_probs);
  static Policy uniform(int action_space);
  // Arbitrary probability mass; the callback fills `out` (size m) for the
  // given history. Runs on simulated histories during roll-outs too.
  static Policy callback(Callback fn);

  // Fills `out` (size = action space) with the action probabilities.
  void probs(const History& history, std::span<double> out) const;

  double prob(const History& history, int action, int action_space) const;

  int sample(const History& history, int action_space, RngStream& rng) const;

  // True when one action carries essentially all mass at this history; used
  // to find subjects whose logged actions agree with the policy.
  bool is_deterministic_at(const History& history, int action_space, int* action) const;

private:
  enum class Kind { threshold, tabular, callback };
  Kind kind_ = Kind::threshold;
  std::vector<ThresholdRule> rules_;
  std::vector<std::vector<double>> table_;
  Callback fn_;
};

}  // namespace qope::core
