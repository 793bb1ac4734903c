#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qope/core/matrix.hpp"
#include "qope/core/rng.hpp"
#include "qope/mdn/reward_model.hpp"

namespace qope::mdn {

struct MdnConfig {
  std::vector<int> hidden{8, 8};
  int components = 4;  // J
  int epochs = 200;
  int batch_size = 128;
  double learning_rate = 1e-2;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables
  double sigma_floor = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct MixtureParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sigmas;
};

// Feed-forward network with tanh hidden layers and a Gaussian-mixture head
// (per-component weight logits, means, log-scales), trained by Adam on the
// negative log-likelihood. Inputs and targets are standardized internally;
// all public methods take raw-scale values.
class MdnModel : public RewardModel {
public:
  static MdnModel fit(const core::Matrix& features, std::span<const double> targets,
                      const MdnConfig& config, core::RngStream& rng);

  // Hand-built feature-independent mixture; used by tests and as a building
  // block for closed-form reward models.
  static MdnModel constant_mixture(std::vector<double> weights, std::vector<double> means,
                                   std::vector<double> sigmas, int input_dim = 1,
                                   double sigma_floor = 1e-3);

  double pdf(std::span<const double> x, double r) const override;
  double cdf(std::span<const double> x, double r) const override;
  double sample(std::span<const double> x, core::RngStream& rng) const override;
  void sample_many(std::span<const double> x, core::RngStream& rng,
                   std::span<double> out) const override;

  // Mixture parameters on the raw outcome scale.
  MixtureParams mixture_params(std::span<const double> x) const;

  // Mean negative log-likelihood over the rows, with the gradient w.r.t. the
  // flat parameter vector; exposed for the finite-difference check.
  double nll(const core::Matrix& features, std::span<const double> targets,
             std::vector<double>* grad = nullptr) const;

  const std::vector<double>& params() const { return params_; }
  void set_params(std::vector<double> params);

  int input_dim() const { return input_dim_; }
  int components() const { return components_; }
  const std::vector<double>& train_loss() const { return train_loss_; }

  void save(std::ostream& out) const;
  static MdnModel load(std::istream& in);
  void save_file(const std::string& path) const;
  static MdnModel load_file(const std::string& path);

private:
  friend struct MdnWorkspace;

  int input_dim_ = 0;
  std::vector<int> hidden_;
  int components_ = 1;
  double sigma_floor_ = 1e-3;

  std::vector<int> dims_;        // [input, hidden..., 3J]
  std::vector<int> w_offset_;    // per layer, into params_
  std::vector<int> b_offset_;
  std::vector<double> params_;

  std::vector<double> feat_mean_, feat_scale_;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;

  std::vector<double> train_loss_;

  void set_architecture(int input_dim, std::vector<int> hidden, int components);
  int layer_count() const { return static_cast<int>(dims_.size()) - 1; }

  // Head values (logits, means, clamped log-scales) on the standardized
  // scale for a raw-scale input.
  void head_values(std::span<const double> x, std::vector<double>& out) const;
};

// Monte-Carlo estimate of E[pinball_tau(R - eta) | x] drawing `count` fresh
// pseudo outcomes. During estimation the draws are made once per
// (fold, subject, action) and reused for every eta via expected_pinball.
double mc_expected_pinball(const RewardModel& model, std::span<const double> x, double eta,
                           double tau, int count, core::RngStream& rng);

// Same expectation over an existing pseudo-sample cache.
double expected_pinball(std::span<const double> samples, double eta, double tau);

}  // namespace qope::mdn
