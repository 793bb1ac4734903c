#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qope/core/matrix.hpp"

namespace qope::propensity {

struct GbdtConfig {
  int rounds = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 10;
  double clip_floor = 0.01;  // epsilon; 0 disables clipping

  void validate() const;
};

// Depth-limited CART regression tree fit by exact greedy squared-error
// splits; leaf values are Newton steps supplied by the boosting driver.
class RegressionTree {
public:
  struct Node {
    int feature = -1;      // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  // gradients/hessians are per-sample; leaf value =
  // scale * sum(grad) / max(sum(hess), tiny).
  static RegressionTree fit(const core::Matrix& features, std::span<const int> sample_indices,
                            std::span<const double> gradients, std::span<const double> hessians,
                            int max_depth, int min_samples_leaf, double scale);

  double predict(std::span<const double> x) const;

  const std::vector<Node>& nodes() const { return nodes_; }

  void dump(std::ostream& out) const;
  static RegressionTree parse(std::istream& in);

private:
  std::vector<Node> nodes_;
};

// Multiclass gradient-boosted trees with a softmax link (one ensemble per
// class per round); the binary case uses a single ensemble with a logistic
// link. Predictions are clipped to [eps, 1-eps] and renormalized so they
// stay on the probability simplex.
class GbdtClassifier {
public:
  static GbdtClassifier fit(const core::Matrix& features, std::span<const int> labels,
                            int num_classes, const GbdtConfig& config);

  // Softmax/logistic probabilities before clipping.
  std::vector<double> predict_raw(std::span<const double> x) const;
  // Clipped and renormalized probabilities.
  std::vector<double> predict_proba(std::span<const double> x) const;

  int num_classes() const { return num_classes_; }
  int num_features() const { return num_features_; }
  double clip_floor() const { return config_.clip_floor; }

  // Multinomial deviance on the training set after each round.
  const std::vector<double>& train_deviance() const { return train_deviance_; }

  void save(std::ostream& out) const;
  static GbdtClassifier load(std::istream& in);
  void save_file(const std::string& path) const;
  static GbdtClassifier load_file(const std::string& path);

private:
  GbdtConfig config_;
  int num_classes_ = 2;
  int num_features_ = 0;
  bool binary_ = true;
  std::vector<double> base_score_;               // per class (size 1 when binary)
  std::vector<std::vector<RegressionTree>> trees_;  // [round][class-ensemble]
  std::vector<double> train_deviance_;
};

// Projects a probability vector onto {p : sum=1, eps <= p_i <= 1-eps} by a
// uniform shift with coordinate clamping (monotone in the shift, solved by
// bisection). Identity when eps == 0.
void clip_renormalize(std::span<double> probs, double eps);

}  // namespace qope::propensity
