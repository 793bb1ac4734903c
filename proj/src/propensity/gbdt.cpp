#include "qope/propensity/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "qope/core/csv.hpp"
#include "qope/core/error.hpp"
#include "qope/core/log.hpp"

namespace qope::propensity {

using core::Matrix;

void GbdtConfig::validate() const {
  if (rounds < 1) throw ConfigError("gbdt: rounds must be >= 1");
  if (max_depth < 1) throw ConfigError("gbdt: max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw ConfigError("gbdt: learning_rate must be in (0, 1]");
  if (min_samples_leaf < 1) throw ConfigError("gbdt: min_samples_leaf must be >= 1");
  if (!(clip_floor >= 0.0 && clip_floor < 0.5))
    throw ConfigError("gbdt: clip_floor must be in [0, 0.5)");
}

namespace {

struct BuildNode {
  std::vector<int> indices;
  int depth;
  int slot;  // position in nodes_
};

}  // namespace

RegressionTree RegressionTree::fit(const Matrix& features, std::span<const int> sample_indices,
                                   std::span<const double> gradients,
                                   std::span<const double> hessians, int max_depth,
                                   int min_samples_leaf, double scale) {
  RegressionTree tree;
  auto leaf_value = [&](const std::vector<int>& idx) {
    double g = 0.0, h = 0.0;
    for (int i : idx) {
      g += gradients[i];
      h += hessians[i];
    }
    return scale * g / std::max(h, 1e-12);
  };

  std::vector<BuildNode> stack;
  tree.nodes_.push_back({});
  stack.push_back({{sample_indices.begin(), sample_indices.end()}, 0, 0});

  std::vector<std::pair<double, int>> order;  // (feature value, sample index)
  while (!stack.empty()) {
    BuildNode node = std::move(stack.back());
    stack.pop_back();

    const int n = static_cast<int>(node.indices.size());
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;

    if (node.depth < max_depth && n >= 2 * min_samples_leaf) {
      double total_sum = 0.0;
      for (int i : node.indices) total_sum += gradients[i];
      const double parent_score = total_sum * total_sum / n;

      for (int f = 0; f < features.cols; ++f) {
        order.clear();
        order.reserve(n);
        for (int i : node.indices) order.emplace_back(features.at(i, f), i);
        std::sort(order.begin(), order.end());
        double left_sum = 0.0;
        for (int pos = 0; pos < n - 1; ++pos) {
          left_sum += gradients[order[pos].second];
          if (order[pos].first == order[pos + 1].first) continue;
          const int n_left = pos + 1;
          const int n_right = n - n_left;
          if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;
          const double right_sum = total_sum - left_sum;
          const double gain =
              left_sum * left_sum / n_left + right_sum * right_sum / n_right - parent_score;
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best_feature = f;
            best_threshold = 0.5 * (order[pos].first + order[pos + 1].first);
          }
        }
      }
    }

    if (best_feature < 0) {
      tree.nodes_[node.slot].feature = -1;
      tree.nodes_[node.slot].value = leaf_value(node.indices);
      continue;
    }

    std::vector<int> left, right;
    left.reserve(node.indices.size());
    right.reserve(node.indices.size());
    for (int i : node.indices)
      (features.at(i, best_feature) <= best_threshold ? left : right).push_back(i);

    const int left_slot = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back({});
    const int right_slot = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back({});
    tree.nodes_[node.slot].feature = best_feature;
    tree.nodes_[node.slot].threshold = best_threshold;
    tree.nodes_[node.slot].left = left_slot;
    tree.nodes_[node.slot].right = right_slot;
    stack.push_back({std::move(right), node.depth + 1, right_slot});
    stack.push_back({std::move(left), node.depth + 1, left_slot});
  }
  return tree;
}

double RegressionTree::predict(std::span<const double> x) const {
  int at = 0;
  for (;;) {
    const Node& node = nodes_[at];
    if (node.feature < 0) return node.value;
    at = x[node.feature] <= node.threshold ? node.left : node.right;
  }
}

void RegressionTree::dump(std::ostream& out) const {
  out << "tree " << nodes_.size() << "\n";
  for (const Node& n : nodes_) {
    if (n.feature < 0)
      out << "L " << core::format_double(n.value) << "\n";
    else
      out << "S " << n.feature << " " << core::format_double(n.threshold) << " " << n.left << " "
          << n.right << "\n";
  }
}

RegressionTree RegressionTree::parse(std::istream& in) {
  std::string tag;
  std::size_t count = 0;
  in >> tag >> count;
  if (tag != "tree") throw DataError("gbdt: bad tree header");
  RegressionTree tree;
  tree.nodes_.resize(count);
  for (auto& n : tree.nodes_) {
    in >> tag;
    if (tag == "L") {
      n.feature = -1;
      in >> n.value;
    } else if (tag == "S") {
      in >> n.feature >> n.threshold >> n.left >> n.right;
    } else {
      throw DataError("gbdt: bad tree node tag '" + tag + "'");
    }
  }
  if (!in) throw DataError("gbdt: truncated tree");
  return tree;
}

void clip_renormalize(std::span<double> probs, double eps) {
  if (eps <= 0.0) return;
  const int m = static_cast<int>(probs.size());
  if (m * eps >= 1.0) throw ConfigError("gbdt: clip floor infeasible for this action count");
  auto shifted_sum = [&](double shift) {
    double s = 0.0;
    for (double p : probs) s += std::clamp(p + shift, eps, 1.0 - eps);
    return s;
  };
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 200 && shifted_sum(lo) > 1.0; ++it) lo *= 2.0;
  for (int it = 0; it < 200 && shifted_sum(hi) < 1.0; ++it) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (shifted_sum(mid) < 1.0 ? lo : hi) = mid;
  }
  const double shift = 0.5 * (lo + hi);
  for (double& p : probs) p = std::clamp(p + shift, eps, 1.0 - eps);
  double total = 0.0;
  for (double p : probs) total += p;
  // Residual off the simplex after clamping is at most a rounding error.
  for (double& p : probs) p /= total;
}

GbdtClassifier GbdtClassifier::fit(const Matrix& features, std::span<const int> labels,
                                   int num_classes, const GbdtConfig& config) {
  config.validate();
  const int n = features.rows;
  if (n < 1) throw DataError("gbdt: empty training set");
  if (static_cast<int>(labels.size()) != n) throw DataError("gbdt: labels/features size mismatch");
  if (num_classes < 2) throw ConfigError("gbdt: need at least two classes");
  for (int i = 0; i < n; ++i)
    if (labels[i] < 0 || labels[i] >= num_classes) throw DataError("gbdt: label out of range");

  GbdtClassifier model;
  model.config_ = config;
  model.num_classes_ = num_classes;
  model.num_features_ = features.cols;
  model.binary_ = num_classes == 2;

  std::vector<int> class_count(num_classes, 0);
  for (int i = 0; i < n; ++i) ++class_count[labels[i]];
  for (int c = 0; c < num_classes; ++c)
    if (class_count[c] == 0)
      core::warn("gbdt: action class " + std::to_string(c) +
                 " absent from training data; its probability comes from the clipped softmax");

  const double prior_floor = 1.0 / (2.0 * n);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);

  if (model.binary_) {
    const double p1 =
        std::clamp(static_cast<double>(class_count[1]) / n, prior_floor, 1.0 - prior_floor);
    model.base_score_ = {std::log(p1 / (1.0 - p1))};
    std::vector<double> score(n, model.base_score_[0]);
    std::vector<double> grad(n), hess(n);
    for (int round = 0; round < config.rounds; ++round) {
      for (int i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-score[i]));
        grad[i] = (labels[i] == 1 ? 1.0 : 0.0) - p;
        hess[i] = std::max(p * (1.0 - p), 1e-12);
      }
      auto tree = RegressionTree::fit(features, all, grad, hess, config.max_depth,
                                      config.min_samples_leaf, config.learning_rate);
      for (int i = 0; i < n; ++i) score[i] += tree.predict(features.row(i));
      model.trees_.push_back({std::move(tree)});
      double dev = 0.0;
      for (int i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-score[i]));
        const double p_true = labels[i] == 1 ? p : 1.0 - p;
        dev -= std::log(std::max(p_true, 1e-12));
      }
      model.train_deviance_.push_back(dev / n);
    }
    return model;
  }

  model.base_score_.resize(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const double p =
        std::clamp(static_cast<double>(class_count[c]) / n, prior_floor, 1.0 - prior_floor);
    model.base_score_[c] = std::log(p);
  }
  Matrix score(n, num_classes);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < num_classes; ++c) score.at(i, c) = model.base_score_[c];

  Matrix prob(n, num_classes);
  auto refresh_probs = [&]() {
    for (int i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < num_classes; ++c) mx = std::max(mx, score.at(i, c));
      double z = 0.0;
      for (int c = 0; c < num_classes; ++c) {
        prob.at(i, c) = std::exp(score.at(i, c) - mx);
        z += prob.at(i, c);
      }
      for (int c = 0; c < num_classes; ++c) prob.at(i, c) /= z;
    }
  };

  const double factor = static_cast<double>(num_classes - 1) / num_classes;
  std::vector<double> grad(n), hess(n);
  for (int round = 0; round < config.rounds; ++round) {
    refresh_probs();
    std::vector<RegressionTree> round_trees;
    round_trees.reserve(num_classes);
    for (int c = 0; c < num_classes; ++c) {
      for (int i = 0; i < n; ++i) {
        const double r = (labels[i] == c ? 1.0 : 0.0) - prob.at(i, c);
        grad[i] = r;
        hess[i] = std::max(std::fabs(r) * (1.0 - std::fabs(r)), 1e-12);
      }
      auto tree = RegressionTree::fit(features, all, grad, hess, config.max_depth,
                                      config.min_samples_leaf, config.learning_rate * factor);
      for (int i = 0; i < n; ++i) score.at(i, c) += tree.predict(features.row(i));
      round_trees.push_back(std::move(tree));
    }
    model.trees_.push_back(std::move(round_trees));
    refresh_probs();
    double dev = 0.0;
    for (int i = 0; i < n; ++i) dev -= std::log(std::max(prob.at(i, labels[i]), 1e-12));
    model.train_deviance_.push_back(dev / n);
  }
  return model;
}

std::vector<double> GbdtClassifier::predict_raw(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != num_features_)
    throw ContractError("gbdt: feature dimension mismatch");
  if (binary_) {
    double score = base_score_[0];
    for (const auto& round : trees_) score += round[0].predict(x);
    const double p1 = 1.0 / (1.0 + std::exp(-score));
    return {1.0 - p1, p1};
  }
  std::vector<double> score(base_score_);
  for (const auto& round : trees_)
    for (int c = 0; c < num_classes_; ++c) score[c] += round[c].predict(x);
  const double mx = *std::max_element(score.begin(), score.end());
  double z = 0.0;
  for (double& s : score) {
    s = std::exp(s - mx);
    z += s;
  }
  for (double& s : score) s /= z;
  return score;
}

std::vector<double> GbdtClassifier::predict_proba(std::span<const double> x) const {
  auto p = predict_raw(x);
  clip_renormalize(p, config_.clip_floor);
  return p;
}

void GbdtClassifier::save(std::ostream& out) const {
  out << "qope-gbdt v1\n";
  out << num_classes_ << " " << num_features_ << " " << (binary_ ? 1 : 0) << " " << trees_.size()
      << "\n";
  out << config_.rounds << " " << config_.max_depth << " "
      << core::format_double(config_.learning_rate) << " " << config_.min_samples_leaf << " "
      << core::format_double(config_.clip_floor) << "\n";
  for (double b : base_score_) out << core::format_double(b) << " ";
  out << "\n";
  for (const auto& round : trees_)
    for (const auto& tree : round) tree.dump(out);
}

GbdtClassifier GbdtClassifier::load(std::istream& in) {
  std::string magic, version;
  in >> magic >> version;
  if (magic != "qope-gbdt" || version != "v1") throw DataError("gbdt: bad model header");
  GbdtClassifier model;
  int binary_flag = 0;
  std::size_t rounds = 0;
  in >> model.num_classes_ >> model.num_features_ >> binary_flag >> rounds;
  model.binary_ = binary_flag != 0;
  in >> model.config_.rounds >> model.config_.max_depth >> model.config_.learning_rate >>
      model.config_.min_samples_leaf >> model.config_.clip_floor;
  model.base_score_.resize(model.binary_ ? 1 : model.num_classes_);
  for (double& b : model.base_score_) in >> b;
  if (!in) throw DataError("gbdt: truncated model");
  const int per_round = model.binary_ ? 1 : model.num_classes_;
  model.trees_.resize(rounds);
  for (auto& round : model.trees_) {
    round.reserve(per_round);
    for (int c = 0; c < per_round; ++c) round.push_back(RegressionTree::parse(in));
  }
  return model;
}

void GbdtClassifier::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("gbdt: cannot open '" + path + "' for writing");
  save(out);
}

GbdtClassifier GbdtClassifier::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("gbdt: cannot open '" + path + "'");
  return load(in);
}

}  // namespace qope::propensity
