#include "qope/core/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qope::core {

Policy Policy::threshold(ThresholdRule rule) { return threshold(std::vector<ThresholdRule>{rule}); }

Policy Policy::threshold(std::vector<ThresholdRule> rules) {
  if (rules.empty()) throw ConfigError("policy: threshold needs at least one rule");
  Policy p;
  p.kind_ = Kind::threshold;
  p.rules_ = std::move(rules);
  return p;
}

Policy Policy::tabular(std::vector<double> probs) {
  return tabular(std::vector<std::vector<double>>{std::move(probs)});
}

Policy Policy::tabular(std::vector<std::vector<double>> per_stage_probs) {
  if (per_stage_probs.empty()) throw ConfigError("policy: tabular needs at least one stage");
  for (const auto& row : per_stage_probs) {
    double total = 0.0;
    for (double v : row) {
      if (v < 0.0) throw ConfigError("policy: negative probability");
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-12)
      throw ConfigError("policy: probabilities must sum to 1, got " + std::to_string(total));
  }
  Policy p;
  p.kind_ = Kind::tabular;
  p.table_ = std::move(per_stage_probs);
  return p;
}

Policy Policy::uniform(int action_space) {
  if (action_space < 1) throw ConfigError("policy: action space must be >= 1");
  return tabular(std::vector<double>(action_space, 1.0 / action_space));
}

Policy Policy::callback(Callback fn) {
  if (!fn) throw ConfigError("policy: empty callback");
  Policy p;
  p.kind_ = Kind::callback;
  p.fn_ = std::move(fn);
  return p;
}

void Policy::probs(const History& history, std::span<double> out) const {
  const int m = static_cast<int>(out.size());
  switch (kind_) {
    case Kind::threshold: {
      const auto& rule = rules_[std::min<std::size_t>(history.stage - 1, rules_.size() - 1)];
      const auto& x = history.covariates.back();
      if (rule.feature < 0 || rule.feature >= static_cast<int>(x.size()))
        throw ContractError("policy: threshold feature index out of range");
      const int chosen = x[rule.feature] > rule.cut ? rule.above_action : rule.below_action;
      if (chosen < 0 || chosen >= m) throw ContractError("policy: threshold action out of range");
      std::fill(out.begin(), out.end(), 0.0);
      out[chosen] = 1.0;
      return;
    }
    case Kind::tabular: {
      const auto& row = table_[std::min<std::size_t>(history.stage - 1, table_.size() - 1)];
      if (static_cast<int>(row.size()) != m)
        throw ContractError("policy: tabular row size does not match action space");
      std::copy(row.begin(), row.end(), out.begin());
      return;
    }
    case Kind::callback: {
      fn_(history, out);
      double total = 0.0;
      for (double v : out) {
        if (v < -1e-12) throw ContractError("policy: callback produced negative probability");
        total += v;
      }
      if (std::fabs(total - 1.0) > 1e-9)
        throw ContractError("policy: callback probabilities sum to " + std::to_string(total));
      return;
    }
  }
}

double Policy::prob(const History& history, int action, int action_space) const {
  if (action < 0 || action >= action_space)
    throw ContractError("policy: action index out of range");
  std::vector<double> p(action_space);
  probs(history, p);
  return p[action];
}

int Policy::sample(const History& history, int action_space, RngStream& rng) const {
  std::vector<double> p(action_space);
  probs(history, p);
  return rng.categorical(p);
}

bool Policy::is_deterministic_at(const History& history, int action_space, int* action) const {
  std::vector<double> p(action_space);
  probs(history, p);
  for (int a = 0; a < action_space; ++a) {
    if (p[a] >= 1.0 - 1e-9) {
      if (action) *action = a;
      return true;
    }
  }
  return false;
}

}  // namespace qope::core
