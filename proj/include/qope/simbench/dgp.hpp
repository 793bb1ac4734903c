#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "qope/core/policy.hpp"
#include "qope/core/rng.hpp"
#include "qope/core/types.hpp"
#include "qope/mdn/reward_model.hpp"

namespace qope::simbench {

// Synthetic designs: threshold behavior/target policies with Student-t noise
// controlling the tail weight (df = infinity selects Gaussian noise).
struct DgpSpec {
  enum class Kind { single_stage, two_stage };
  Kind kind = Kind::single_stage;
  double df = 3.0;
  int n = 2500;

  void validate() const;
  int horizon() const { return kind == Kind::single_stage ? 1 : 2; }
};

constexpr double kNormalNoise = std::numeric_limits<double>::infinity();

// One draw of the noise distribution: t(df), or standard normal at df = inf.
double noise_draw(double df, core::RngStream& rng);
double noise_cdf(double x, double df);
double noise_pdf(double x, double df);

core::Dataset gen_single_stage(const DgpSpec& spec, core::RngStream& rng);
core::Dataset gen_two_stage(const DgpSpec& spec, core::RngStream& rng);
core::Dataset generate(const DgpSpec& spec, core::RngStream& rng);

// Threshold target policy acting on the current covariate.
core::Policy target_policy();

// The true action mechanism: P(A=1 | x) = F_noise(4x).
core::Policy oracle_behavior_policy(const DgpSpec& spec);

// Closed-form conditional reward law of the design at the given stage, in
// the same feature layout the fitted models consume.
std::shared_ptr<const mdn::RewardModel> oracle_reward_model(const DgpSpec& spec, int stage);

// Decorator translating another model's outcomes by delta; the deliberately
// misspecified arm of the double-robustness experiments.
class ShiftedRewardModel : public mdn::RewardModel {
public:
  ShiftedRewardModel(std::shared_ptr<const mdn::RewardModel> base, double delta)
      : base_(std::move(base)), delta_(delta) {}
  double pdf(std::span<const double> x, double r) const override {
    return base_->pdf(x, r - delta_);
  }
  double cdf(std::span<const double> x, double r) const override {
    return base_->cdf(x, r - delta_);
  }
  double sample(std::span<const double> x, core::RngStream& rng) const override {
    return base_->sample(x, rng) + delta_;
  }

private:
  std::shared_ptr<const mdn::RewardModel> base_;
  double delta_;
};

// Monte-Carlo ground truth: draws of the cumulative reward with every action
// forced to the target policy.
class OracleTable {
public:
  static OracleTable generate(const DgpSpec& spec, long draws, core::RngStream& rng);

  double quantile(double tau) const;
  double cdf(double value) const;
  double mean() const { return mean_; }
  long draws() const { return static_cast<long>(sorted_sums_.size()); }
  // Asymptotic Monte-Carlo standard error of the tau-quantile, using a
  // kernel density estimate at the quantile.
  double quantile_se(double tau) const;

private:
  std::vector<double> sorted_sums_;
  double mean_ = 0.0;
};

// One-shot oracle values (build an OracleTable to evaluate many levels on
// shared draws).
double oracle_quantile(const DgpSpec& spec, double tau, long draws, core::RngStream& rng);
double oracle_mean(const DgpSpec& spec, long draws, core::RngStream& rng);

// FNV-1a over the exact bit patterns of every field; the golden-file
// regression anchor for the generators.
std::uint64_t dataset_hash(const core::Dataset& dataset);

}  // namespace qope::simbench
