#include "qope/mdn/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "qope/core/csv.hpp"
#include "qope/core/error.hpp"
#include "qope/core/stats.hpp"
#include "qope/quantile/pinball.hpp"

namespace qope::mdn {

using core::Matrix;

namespace {
constexpr double kLog2Pi = 1.8378770664093453;

double log_sum_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}
}  // namespace

void MdnConfig::validate() const {
  if (components < 1) throw ConfigError("mdn: components must be >= 1");
  if (epochs < 1) throw ConfigError("mdn: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("mdn: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("mdn: learning_rate must be positive");
  if (!(sigma_floor > 0.0)) throw ConfigError("mdn: sigma_floor must be positive");
  for (int h : hidden)
    if (h < 1) throw ConfigError("mdn: hidden layer sizes must be >= 1");
}

void MdnModel::set_architecture(int input_dim, std::vector<int> hidden, int components) {
  input_dim_ = input_dim;
  hidden_ = std::move(hidden);
  components_ = components;
  dims_.clear();
  dims_.push_back(input_dim_);
  for (int h : hidden_) dims_.push_back(h);
  dims_.push_back(3 * components_);
  w_offset_.clear();
  b_offset_.clear();
  int offset = 0;
  for (int l = 0; l + 1 < static_cast<int>(dims_.size()); ++l) {
    w_offset_.push_back(offset);
    offset += dims_[l + 1] * dims_[l];
    b_offset_.push_back(offset);
    offset += dims_[l + 1];
  }
  params_.assign(offset, 0.0);
  feat_mean_.assign(input_dim_, 0.0);
  feat_scale_.assign(input_dim_, 1.0);
}

void MdnModel::set_params(std::vector<double> params) {
  if (params.size() != params_.size()) throw ContractError("mdn: parameter size mismatch");
  params_ = std::move(params);
}

// Per-sample forward/backward scratch shared by nll() and training.
struct MdnWorkspace {
  std::vector<std::vector<double>> act;    // activations per layer
  std::vector<std::vector<double>> delta;  // gradients w.r.t. pre-activations
  std::vector<double> head;                // 3J head values
  std::vector<double> gamma;               // posterior responsibilities
  std::vector<double> loga;                // scratch

  explicit MdnWorkspace(const MdnModel& model) {
    act.resize(model.dims_.size());
    delta.resize(model.dims_.size());
    for (std::size_t l = 0; l < model.dims_.size(); ++l) {
      act[l].resize(model.dims_[l]);
      delta[l].resize(model.dims_[l]);
    }
    head.resize(model.dims_.back());
    gamma.resize(model.components_);
    loga.resize(model.components_);
  }

  // Returns the NLL of one standardized (input, target) pair; when grad is
  // not null, accumulates the parameter gradient into it.
  double run(const MdnModel& model, std::span<const double> std_input, double std_target,
             std::vector<double>* grad) {
    const int layers = model.layer_count();
    const int J = model.components_;
    const double log_floor = std::log(model.sigma_floor_ / model.target_scale_);

    std::copy(std_input.begin(), std_input.end(), act[0].begin());
    for (int l = 0; l < layers; ++l) {
      const int in = model.dims_[l], out = model.dims_[l + 1];
      const double* w = model.params_.data() + model.w_offset_[l];
      const double* b = model.params_.data() + model.b_offset_[l];
      for (int o = 0; o < out; ++o) {
        double z = b[o];
        const double* wrow = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) z += wrow[i] * act[l][i];
        act[l + 1][o] = (l + 1 < layers) ? std::tanh(z) : z;
      }
    }

    std::copy(act[layers].begin(), act[layers].end(), head.begin());
    std::vector<bool> clamped(J, false);
    for (int j = 0; j < J; ++j) {
      if (head[2 * J + j] < log_floor) {
        head[2 * J + j] = log_floor;
        clamped[j] = true;
      }
    }

    const double lse_logits = log_sum_exp({head.data(), static_cast<std::size_t>(J)});
    double loss;
    {
      for (int j = 0; j < J; ++j) {
        const double s = head[2 * J + j];
        const double z = (std_target - head[J + j]) * std::exp(-s);
        loga[j] = head[j] - 0.5 * kLog2Pi - s - 0.5 * z * z;
      }
      const double lse_joint = log_sum_exp(loga);
      loss = lse_logits - lse_joint;
      for (int j = 0; j < J; ++j) gamma[j] = std::exp(loga[j] - lse_joint);
    }

    if (!grad) return loss;

    // Head gradient.
    auto& dhead = delta[layers];
    for (int j = 0; j < J; ++j) {
      const double alpha = std::exp(head[j] - lse_logits);
      const double s = head[2 * J + j];
      const double inv_sigma = std::exp(-s);
      const double z = (std_target - head[J + j]) * inv_sigma;
      dhead[j] = alpha - gamma[j];
      dhead[J + j] = -gamma[j] * z * inv_sigma;
      dhead[2 * J + j] = clamped[j] ? 0.0 : gamma[j] * (1.0 - z * z);
    }

    for (int l = layers - 1; l >= 0; --l) {
      const int in = model.dims_[l], out = model.dims_[l + 1];
      const double* w = model.params_.data() + model.w_offset_[l];
      double* gw = grad->data() + model.w_offset_[l];
      double* gb = grad->data() + model.b_offset_[l];
      std::fill(delta[l].begin(), delta[l].end(), 0.0);
      for (int o = 0; o < out; ++o) {
        const double d = delta[l + 1][o];
        gb[o] += d;
        double* gwrow = gw + static_cast<std::size_t>(o) * in;
        const double* wrow = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
          gwrow[i] += d * act[l][i];
          delta[l][i] += d * wrow[i];
        }
      }
      if (l > 0) {
        for (int i = 0; i < in; ++i) {
          const double a = act[l][i];
          delta[l][i] *= 1.0 - a * a;  // tanh'
        }
      }
    }
    return loss;
  }
};

double MdnModel::nll(const Matrix& features, std::span<const double> targets,
                     std::vector<double>* grad) const {
  if (features.rows != static_cast<int>(targets.size()))
    throw ContractError("mdn: features/targets size mismatch");
  if (features.cols != input_dim_) throw ContractError("mdn: feature dimension mismatch");
  if (grad) grad->assign(params_.size(), 0.0);
  MdnWorkspace ws(*this);
  std::vector<double> std_input(input_dim_);
  double total = 0.0;
  for (int i = 0; i < features.rows; ++i) {
    const auto row = features.row(i);
    for (int d = 0; d < input_dim_; ++d)
      std_input[d] = (row[d] - feat_mean_[d]) / feat_scale_[d];
    total += ws.run(*this, std_input, (targets[i] - target_mean_) / target_scale_, grad);
  }
  const double inv_n = 1.0 / features.rows;
  if (grad)
    for (double& g : *grad) g *= inv_n;
  return total * inv_n;
}

MdnModel MdnModel::fit(const Matrix& features, std::span<const double> targets,
                       const MdnConfig& config, core::RngStream& rng) {
  config.validate();
  const int n = features.rows;
  if (n != static_cast<int>(targets.size()))
    throw ContractError("mdn: features/targets size mismatch");
  if (n < config.components)
    throw DataError("mdn: need at least as many rows as mixture components");

  MdnModel model;
  model.set_architecture(features.cols, config.hidden, config.components);
  model.sigma_floor_ = config.sigma_floor;

  // Standardization statistics from the training rows.
  for (int d = 0; d < features.cols; ++d) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += features.at(i, d);
    m /= n;
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += (features.at(i, d) - m) * (features.at(i, d) - m);
    const double sd = std::sqrt(v / std::max(n - 1, 1));
    model.feat_mean_[d] = m;
    model.feat_scale_[d] = sd > 1e-12 ? sd : 1.0;
  }
  model.target_mean_ = core::mean(targets);
  {
    const double sd = std::sqrt(core::variance(targets));
    model.target_scale_ = sd > 1e-12 ? sd : 1.0;
  }

  // Xavier-uniform weights; head biases spread the component means over the
  // target quantiles so components start distinct.
  core::RngStream init_rng = rng.fork("init");
  for (int l = 0; l < model.layer_count(); ++l) {
    const int in = model.dims_[l], out = model.dims_[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    double* w = model.params_.data() + model.w_offset_[l];
    for (int i = 0; i < in * out; ++i) w[i] = bound * (2.0 * init_rng.uniform() - 1.0);
  }
  {
    std::vector<double> sorted_targets(targets.begin(), targets.end());
    std::sort(sorted_targets.begin(), sorted_targets.end());
    const int J = config.components;
    double* head_bias = model.params_.data() + model.b_offset_.back();
    for (int j = 0; j < J; ++j) {
      const double q = (j + 0.5) / J;
      const double raw = core::empirical_quantile(sorted_targets, std::clamp(q, 1e-9, 1.0 - 1e-9));
      head_bias[J + j] = (raw - model.target_mean_) / model.target_scale_;
      head_bias[2 * J + j] = 0.0;  // log sigma = 0 on the standardized scale
    }
  }

  // Pre-standardize once.
  Matrix std_features(n, features.cols);
  std::vector<double> std_targets(n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < features.cols; ++d)
      std_features.at(i, d) = (features.at(i, d) - model.feat_mean_[d]) / model.feat_scale_[d];
    std_targets[i] = (targets[i] - model.target_mean_) / model.target_scale_;
  }

  const std::size_t P = model.params_.size();
  std::vector<double> grad(P), m1(P, 0.0), m2(P, 0.0);
  MdnWorkspace ws(model);
  core::RngStream shuffle_rng = rng.fork("shuffle");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  long long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int end = std::min(n, start + config.batch_size);
      const int bs = end - start;
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (int pos = start; pos < end; ++pos) {
        const int i = order[pos];
        batch_loss += ws.run(model, std_features.row(i), std_targets[i], &grad);
      }
      if (!std::isfinite(batch_loss))
        throw NumericalError("mdn: non-finite training loss at epoch " + std::to_string(epoch) +
                             "; try a larger sigma_floor or a smaller learning rate");
      const double inv_bs = 1.0 / bs;
      for (double& g : grad) g *= inv_bs;
      if (config.grad_clip > 0.0) {
        double norm2 = 0.0;
        for (double g : grad) norm2 += g * g;
        const double norm = std::sqrt(norm2);
        if (norm > config.grad_clip) {
          const double scale = config.grad_clip / norm;
          for (double& g : grad) g *= scale;
        }
      }
      ++step;
      const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < P; ++p) {
        m1[p] = config.adam_beta1 * m1[p] + (1.0 - config.adam_beta1) * grad[p];
        m2[p] = config.adam_beta2 * m2[p] + (1.0 - config.adam_beta2) * grad[p] * grad[p];
        model.params_[p] -=
            config.learning_rate * (m1[p] / bc1) / (std::sqrt(m2[p] / bc2) + config.adam_eps);
      }
      epoch_loss += batch_loss;
    }
    model.train_loss_.push_back(epoch_loss / n);
  }
  return model;
}

MdnModel MdnModel::constant_mixture(std::vector<double> weights, std::vector<double> means,
                                    std::vector<double> sigmas, int input_dim,
                                    double sigma_floor) {
  const int J = static_cast<int>(weights.size());
  if (J < 1 || means.size() != weights.size() || sigmas.size() != weights.size())
    throw ConfigError("mdn: constant_mixture needs equal-sized weights/means/sigmas");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("mdn: negative mixture weight");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("mdn: mixture weights must not all vanish");

  MdnModel model;
  model.set_architecture(input_dim, {}, J);
  model.sigma_floor_ = sigma_floor;
  double* bias = model.params_.data() + model.b_offset_.back();
  for (int j = 0; j < J; ++j) {
    bias[j] = std::log(std::max(weights[j] / total, 1e-300));
    bias[J + j] = means[j];
    bias[2 * J + j] = std::log(std::max(sigmas[j], sigma_floor));
  }
  return model;
}

void MdnModel::head_values(std::span<const double> x, std::vector<double>& out) const {
  if (static_cast<int>(x.size()) != input_dim_)
    throw ContractError("mdn: feature dimension mismatch");
  const int layers = layer_count();
  std::vector<double> current(input_dim_);
  for (int d = 0; d < input_dim_; ++d) current[d] = (x[d] - feat_mean_[d]) / feat_scale_[d];
  std::vector<double> next;
  for (int l = 0; l < layers; ++l) {
    const int in = dims_[l], out_dim = dims_[l + 1];
    next.assign(out_dim, 0.0);
    const double* w = params_.data() + w_offset_[l];
    const double* b = params_.data() + b_offset_[l];
    for (int o = 0; o < out_dim; ++o) {
      double z = b[o];
      const double* wrow = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) z += wrow[i] * current[i];
      next[o] = (l + 1 < layers) ? std::tanh(z) : z;
    }
    current.swap(next);
  }
  out = std::move(current);
  const double log_floor = std::log(sigma_floor_ / target_scale_);
  for (int j = 0; j < components_; ++j)
    out[2 * components_ + j] = std::max(out[2 * components_ + j], log_floor);
}

MixtureParams MdnModel::mixture_params(std::span<const double> x) const {
  std::vector<double> head;
  head_values(x, head);
  const int J = components_;
  MixtureParams mp;
  mp.weights.resize(J);
  mp.means.resize(J);
  mp.sigmas.resize(J);
  const double lse = log_sum_exp({head.data(), static_cast<std::size_t>(J)});
  for (int j = 0; j < J; ++j) {
    mp.weights[j] = std::exp(head[j] - lse);
    mp.means[j] = target_mean_ + target_scale_ * head[J + j];
    mp.sigmas[j] = target_scale_ * std::exp(head[2 * J + j]);
  }
  return mp;
}

double MdnModel::pdf(std::span<const double> x, double r) const {
  const MixtureParams mp = mixture_params(x);
  double density = 0.0;
  for (int j = 0; j < components_; ++j)
    density += mp.weights[j] * core::normal_pdf((r - mp.means[j]) / mp.sigmas[j]) / mp.sigmas[j];
  return density;
}

double MdnModel::cdf(std::span<const double> x, double r) const {
  const MixtureParams mp = mixture_params(x);
  double prob = 0.0;
  for (int j = 0; j < components_; ++j)
    prob += mp.weights[j] * core::normal_cdf((r - mp.means[j]) / mp.sigmas[j]);
  return prob;
}

double MdnModel::sample(std::span<const double> x, core::RngStream& rng) const {
  const MixtureParams mp = mixture_params(x);
  const int u = rng.categorical(mp.weights);
  return mp.means[u] + mp.sigmas[u] * rng.normal();
}

void MdnModel::sample_many(std::span<const double> x, core::RngStream& rng,
                           std::span<double> out) const {
  const MixtureParams mp = mixture_params(x);
  for (double& v : out) {
    const int u = rng.categorical(mp.weights);
    v = mp.means[u] + mp.sigmas[u] * rng.normal();
  }
}

void MdnModel::save(std::ostream& out) const {
  out << "qope-mdn v1\n";
  out << input_dim_ << " " << components_ << " " << hidden_.size();
  for (int h : hidden_) out << " " << h;
  out << "\n" << core::format_double(sigma_floor_) << "\n";
  auto dump_vec = [&out](const std::vector<double>& v) {
    for (double x : v) out << core::format_double(x) << " ";
    out << "\n";
  };
  dump_vec(feat_mean_);
  dump_vec(feat_scale_);
  out << core::format_double(target_mean_) << " " << core::format_double(target_scale_) << "\n";
  out << params_.size() << "\n";
  dump_vec(params_);
}

MdnModel MdnModel::load(std::istream& in) {
  std::string magic, version;
  in >> magic >> version;
  if (magic != "qope-mdn" || version != "v1") throw DataError("mdn: bad model header");
  int input_dim = 0, components = 0;
  std::size_t hidden_count = 0;
  in >> input_dim >> components >> hidden_count;
  std::vector<int> hidden(hidden_count);
  for (auto& h : hidden) in >> h;
  MdnModel model;
  model.set_architecture(input_dim, std::move(hidden), components);
  in >> model.sigma_floor_;
  for (auto& v : model.feat_mean_) in >> v;
  for (auto& v : model.feat_scale_) in >> v;
  in >> model.target_mean_ >> model.target_scale_;
  std::size_t count = 0;
  in >> count;
  if (count != model.params_.size()) throw DataError("mdn: parameter count mismatch");
  for (auto& p : model.params_) in >> p;
  if (!in) throw DataError("mdn: truncated model file");
  return model;
}

void MdnModel::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("mdn: cannot open '" + path + "' for writing");
  save(out);
}

MdnModel MdnModel::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("mdn: cannot open '" + path + "'");
  return load(in);
}

double mc_expected_pinball(const RewardModel& model, std::span<const double> x, double eta,
                           double tau, int count, core::RngStream& rng) {
  if (count < 1) throw ConfigError("mc_expected_pinball: count must be >= 1");
  std::vector<double> samples(count);
  model.sample_many(x, rng, samples);
  return expected_pinball(samples, eta, tau);
}

double expected_pinball(std::span<const double> samples, double eta, double tau) {
  double total = 0.0;
  for (double r : samples) total += quantile::pinball(r - eta, tau);
  return total / static_cast<double>(samples.size());
}

}  // namespace qope::mdn
