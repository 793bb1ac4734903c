#pragma once

#include <span>

#include "qope/core/rng.hpp"

namespace qope::mdn {

// Conditional law of a scalar outcome given a feature vector: density,
// distribution function, and sampler. Implemented by MdnModel and by the
// closed-form oracles used in tests and simulation studies.
class RewardModel {
public:
  virtual ~RewardModel() = default;

  virtual double pdf(std::span<const double> x, double r) const = 0;
  virtual double cdf(std::span<const double> x, double r) const = 0;
  virtual double sample(std::span<const double> x, core::RngStream& rng) const = 0;

  virtual void sample_many(std::span<const double> x, core::RngStream& rng,
                           std::span<double> out) const {
    for (double& v : out) v = sample(x, rng);
  }
};

}  // namespace qope::mdn
