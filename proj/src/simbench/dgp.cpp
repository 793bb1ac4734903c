#include "qope/simbench/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "qope/core/error.hpp"
#include "qope/core/stats.hpp"

namespace qope::simbench {

using core::Dataset;
using core::Policy;
using core::RngStream;
using core::Trajectory;

void DgpSpec::validate() const {
  if (n < 1) throw ConfigError("dgp: n must be >= 1");
  if (!(df > 0.0)) throw ConfigError("dgp: df must be positive");
}

double noise_draw(double df, RngStream& rng) {
  return std::isinf(df) ? rng.normal() : rng.student_t(df);
}

double noise_cdf(double x, double df) {
  return std::isinf(df) ? core::normal_cdf(x) : core::student_t_cdf(x, df);
}

double noise_pdf(double x, double df) {
  if (std::isinf(df)) return core::normal_pdf(x);
  const double log_norm = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                          0.5 * std::log(df * 3.14159265358979323846);
  return std::exp(log_norm - 0.5 * (df + 1.0) * std::log1p(x * x / df));
}

Dataset gen_single_stage(const DgpSpec& spec, RngStream& rng) {
  spec.validate();
  std::vector<Trajectory> trajectories;
  trajectories.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const double x = rng.normal();
    const int a = x + 0.25 * noise_draw(spec.df, rng) > 0.0 ? 1 : 0;
    const double r = (1.0 - x + 2.0 * a * x) * (1.0 + 0.25 * noise_draw(spec.df, rng));
    Trajectory traj;
    traj.stages.push_back({{x}, a, r});
    trajectories.push_back(std::move(traj));
  }
  return Dataset::from_trajectories(std::move(trajectories), 2);
}

Dataset gen_two_stage(const DgpSpec& spec, RngStream& rng) {
  spec.validate();
  std::vector<Trajectory> trajectories;
  trajectories.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const double x1 = rng.normal();
    const int a1 = x1 + 0.25 * noise_draw(spec.df, rng) > 0.0 ? 1 : 0;
    const double r1 = (1.0 - x1 + 2.0 * a1 * x1) * (1.0 + 0.25 * noise_draw(spec.df, rng));
    const double x2 = 0.5 * x1 + 0.5 * noise_draw(spec.df, rng);
    const int a2 = x2 + 0.25 * noise_draw(spec.df, rng) > 0.0 ? 1 : 0;
    const double r2 = (1.0 + 0.5 * x1 + a1 * x1 - x2 + 3.0 * a2 * x2) *
                      (1.0 + 0.25 * noise_draw(spec.df, rng));
    Trajectory traj;
    traj.stages.push_back({{x1}, a1, r1});
    traj.stages.push_back({{x2}, a2, r2});
    trajectories.push_back(std::move(traj));
  }
  return Dataset::from_trajectories(std::move(trajectories), 2);
}

Dataset generate(const DgpSpec& spec, RngStream& rng) {
  return spec.kind == DgpSpec::Kind::single_stage ? gen_single_stage(spec, rng)
                                                  : gen_two_stage(spec, rng);
}

Policy target_policy() { return Policy::threshold(core::ThresholdRule{0, 0.0, 1, 0}); }

Policy oracle_behavior_policy(const DgpSpec& spec) {
  const double df = spec.df;
  return Policy::callback([df](const core::History& history, std::span<double> out) {
    const double x = history.covariates.back().at(0);
    const double p1 = noise_cdf(4.0 * x, df);
    out[0] = 1.0 - p1;
    out[1] = p1;
  });
}

namespace {

// Conditional law R = loc * (1 + noise/4) given the model features; the
// location is a function of the decoded covariates and action.
class ScaledNoiseReward : public mdn::RewardModel {
public:
  using LocationFn = std::function<double(std::span<const double>)>;

  ScaledNoiseReward(LocationFn loc, double df) : loc_(std::move(loc)), df_(df) {}

  double pdf(std::span<const double> x, double r) const override {
    const double loc = loc_(x);
    const double scale = std::fabs(loc) * 0.25;
    if (scale < 1e-12) {
      // Near-degenerate location: treat as a sharp Gaussian spike.
      constexpr double kSpike = 1e-6;
      return core::normal_pdf((r - loc) / kSpike) / kSpike;
    }
    return noise_pdf((r - loc) / scale, df_) / scale;
  }

  double cdf(std::span<const double> x, double r) const override {
    const double loc = loc_(x);
    const double scale = std::fabs(loc) * 0.25;
    if (scale < 1e-12) return r >= loc ? 1.0 : 0.0;
    return loc > 0.0 ? noise_cdf((r - loc) / scale, df_)
                     : 1.0 - noise_cdf((loc - r) / scale, df_);
  }

  double sample(std::span<const double> x, core::RngStream& rng) const override {
    const double loc = loc_(x);
    return loc * (1.0 + 0.25 * noise_draw(df_, rng));
  }

private:
  LocationFn loc_;
  double df_;
};

int decode_action(std::span<const double> onehot) {
  int best = 0;
  for (std::size_t a = 1; a < onehot.size(); ++a)
    if (onehot[a] > onehot[best]) best = static_cast<int>(a);
  return best;
}

}  // namespace

std::shared_ptr<const mdn::RewardModel> oracle_reward_model(const DgpSpec& spec, int stage) {
  const double df = spec.df;
  if (stage == 1) {
    // Features: [x1, onehot(a1)].
    return std::make_shared<ScaledNoiseReward>(
        [](std::span<const double> feat) {
          const double x = feat[0];
          const int a = decode_action(feat.subspan(1, 2));
          return 1.0 - x + 2.0 * a * x;
        },
        df);
  }
  if (stage == 2 && spec.kind == DgpSpec::Kind::two_stage) {
    // Features: [x1, onehot(a1), r1, x2, onehot(a2)].
    return std::make_shared<ScaledNoiseReward>(
        [](std::span<const double> feat) {
          const double x1 = feat[0];
          const int a1 = decode_action(feat.subspan(1, 2));
          const double x2 = feat[4];
          const int a2 = decode_action(feat.subspan(5, 2));
          return 1.0 + 0.5 * x1 + a1 * x1 - x2 + 3.0 * a2 * x2;
        },
        df);
  }
  throw ConfigError("dgp: no oracle reward model for this stage");
}

OracleTable OracleTable::generate(const DgpSpec& spec, long draws, RngStream& rng) {
  if (draws < 1) throw ConfigError("oracle: draws must be >= 1");
  OracleTable table;
  table.sorted_sums_.resize(draws);
  double total = 0.0;
  for (long i = 0; i < draws; ++i) {
    double sum = 0.0;
    if (spec.kind == DgpSpec::Kind::single_stage) {
      const double x = rng.normal();
      const int a = x > 0.0 ? 1 : 0;
      sum = (1.0 - x + 2.0 * a * x) * (1.0 + 0.25 * noise_draw(spec.df, rng));
    } else {
      const double x1 = rng.normal();
      const int a1 = x1 > 0.0 ? 1 : 0;
      sum = (1.0 - x1 + 2.0 * a1 * x1) * (1.0 + 0.25 * noise_draw(spec.df, rng));
      const double x2 = 0.5 * x1 + 0.5 * noise_draw(spec.df, rng);
      const int a2 = x2 > 0.0 ? 1 : 0;
      sum += (1.0 + 0.5 * x1 + a1 * x1 - x2 + 3.0 * a2 * x2) *
             (1.0 + 0.25 * noise_draw(spec.df, rng));
    }
    table.sorted_sums_[i] = sum;
    total += sum;
  }
  std::sort(table.sorted_sums_.begin(), table.sorted_sums_.end());
  table.mean_ = total / static_cast<double>(draws);
  return table;
}

double OracleTable::quantile(double tau) const {
  return core::empirical_quantile(sorted_sums_, tau);
}

double OracleTable::cdf(double value) const {
  const auto it = std::upper_bound(sorted_sums_.begin(), sorted_sums_.end(), value);
  return static_cast<double>(it - sorted_sums_.begin()) /
         static_cast<double>(sorted_sums_.size());
}

double OracleTable::quantile_se(double tau) const {
  const double q = quantile(tau);
  const double n = static_cast<double>(sorted_sums_.size());
  // Density at the quantile by a Gaussian KDE with a narrow fixed bandwidth.
  const double h = 0.05;
  double density = 0.0;
  const auto lo = std::lower_bound(sorted_sums_.begin(), sorted_sums_.end(), q - 8.0 * h);
  const auto hi = std::upper_bound(sorted_sums_.begin(), sorted_sums_.end(), q + 8.0 * h);
  for (auto it = lo; it != hi; ++it) density += core::normal_pdf((*it - q) / h) / h;
  density /= n;
  if (!(density > 1e-12)) return std::numeric_limits<double>::infinity();
  return std::sqrt(tau * (1.0 - tau) / n) / density;
}

double oracle_quantile(const DgpSpec& spec, double tau, long draws, RngStream& rng) {
  return OracleTable::generate(spec, draws, rng).quantile(tau);
}

double oracle_mean(const DgpSpec& spec, long draws, RngStream& rng) {
  return OracleTable::generate(spec, draws, rng).mean();
}

std::uint64_t dataset_hash(const core::Dataset& dataset) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto mix_bytes = [&h](const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ull;
    }
  };
  auto mix_double = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    mix_bytes(&bits, sizeof(bits));
  };
  mix_bytes(&dataset.horizon, sizeof(dataset.horizon));
  mix_bytes(&dataset.action_space, sizeof(dataset.action_space));
  for (const auto& traj : dataset.trajectories) {
    for (const auto& st : traj.stages) {
      for (double v : st.covariates) mix_double(v);
      mix_bytes(&st.action, sizeof(st.action));
      mix_double(st.reward);
    }
  }
  return h;
}

}  // namespace qope::simbench
