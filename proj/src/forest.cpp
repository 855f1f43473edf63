#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "deepfeat/classifiers.hpp"
#include "deepfeat/error.hpp"

namespace deepfeat::classifiers {

DecisionTree DecisionTree::grow(const Matrix& x, std::span<const int> y, std::size_t num_classes,
                                std::span<const std::size_t> sample, std::size_t max_features,
                                Rng& rng, std::vector<double>& importance) {
  const std::size_t d = x.cols();
  max_features = std::clamp<std::size_t>(max_features, 1, d);

  DecisionTree tree;
  std::vector<std::size_t> idx(sample.begin(), sample.end());
  std::vector<std::size_t> features(d);
  std::iota(features.begin(), features.end(), 0);
  std::vector<std::pair<double, int>> column;
  std::vector<double> counts(num_classes);
  std::vector<double> left(num_classes);
  std::vector<double> right(num_classes);

  struct Task {
    std::size_t node;
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Task> stack{{0, 0, idx.size()}};
  tree.nodes_.emplace_back();

  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    const std::size_t n_node = task.end - task.begin;

    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t p = task.begin; p < task.end; ++p) counts[static_cast<std::size_t>(y[idx[p]])] += 1.0;
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    if (pure || n_node < 2) {
      tree.nodes_[task.node].counts = counts;
      continue;
    }

    double sum_sq = 0.0;
    for (double c : counts) sum_sq += c * c;
    const double nd = static_cast<double>(n_node);
    const double parent_w = nd - sum_sq / nd;  // n * gini

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_w = std::numeric_limits<double>::infinity();
    std::size_t seen = 0;
    for (std::size_t k = 0; k < d && seen < max_features; ++k) {
      const auto r = k + static_cast<std::size_t>(rng.below(d - k));
      std::swap(features[k], features[r]);
      const std::size_t f = features[k];

      column.clear();
      for (std::size_t p = task.begin; p < task.end; ++p) column.emplace_back(x(idx[p], f), y[idx[p]]);
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++seen;

      std::fill(left.begin(), left.end(), 0.0);
      right = counts;
      double sl = 0.0;
      double sr = sum_sq;
      for (std::size_t p = 0; p + 1 < n_node; ++p) {
        const auto c = static_cast<std::size_t>(column[p].second);
        sl += 2.0 * left[c] + 1.0;
        left[c] += 1.0;
        sr -= 2.0 * right[c] - 1.0;
        right[c] -= 1.0;
        if (!(column[p].first < column[p + 1].first)) continue;
        const double nl = static_cast<double>(p + 1);
        const double nr = nd - nl;
        const double w = (nl - sl / nl) + (nr - sr / nr);
        if (w < best_w) {
          best_w = w;
          best_feature = static_cast<int>(f);
          double mid = 0.5 * (column[p].first + column[p + 1].first);
          if (!(mid < column[p + 1].first)) mid = column[p].first;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) {
      tree.nodes_[task.node].counts = counts;
      continue;
    }

    importance[static_cast<std::size_t>(best_feature)] += parent_w - best_w;
    const auto f = static_cast<std::size_t>(best_feature);
    const auto mid_it = std::stable_partition(
        idx.begin() + static_cast<std::ptrdiff_t>(task.begin), idx.begin() + static_cast<std::ptrdiff_t>(task.end),
        [&](std::size_t row) { return x(row, f) <= best_threshold; });
    const auto split = static_cast<std::size_t>(mid_it - idx.begin());

    const std::size_t l = tree.nodes_.size();
    tree.nodes_.emplace_back();
    tree.nodes_.emplace_back();
    auto& node = tree.nodes_[task.node];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = static_cast<int>(l);
    node.right = static_cast<int>(l + 1);
    stack.push_back({l + 1, split, task.end});
    stack.push_back({l, task.begin, split});
  }
  return tree;
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  const TreeNode* node = &nodes_.front();
  while (node->feature >= 0)
    node = &nodes_[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold
                                                ? node->left
                                                : node->right)];
  return *node;
}

nlohmann::ordered_json DecisionTree::to_json() const {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  auto counts = nlohmann::ordered_json::array();
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    counts.push_back(n.counts);
  }
  nlohmann::ordered_json j;
  j["feature"] = feature;
  j["threshold"] = threshold;
  j["left"] = left;
  j["right"] = right;
  j["counts"] = std::move(counts);
  return j;
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j, std::size_t num_classes) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto& counts = j.at("counts");
  const std::size_t n = feature.size();
  if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || counts.size() != n)
    throw DataError("tree document: node arrays disagree in length");
  DecisionTree t;
  t.nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes_[i];
    node.feature = feature[i];
    node.threshold = threshold[i];
    node.left = left[i];
    node.right = right[i];
    node.counts = counts[i].get<std::vector<double>>();
    if (node.feature >= 0) {
      if (node.left <= 0 || node.right <= 0 || static_cast<std::size_t>(node.left) >= n ||
          static_cast<std::size_t>(node.right) >= n)
        throw DataError("tree document: child index out of range at node " + std::to_string(i));
    } else {
      double total = 0.0;
      for (double c : node.counts) {
        if (c < 0) throw DataError("tree document: negative leaf count");
        total += c;
      }
      if (node.counts.size() != num_classes || total < 1.0)
        throw DataError("tree document: malformed leaf at node " + std::to_string(i));
    }
  }
  return t;
}

ForestModel ForestModel::fit(const data::LabeledDataset& train, const ForestParams& params) {
  train.validate();
  if (train.n() < 2) throw std::invalid_argument("random forest: need at least 2 training samples");
  if (params.n_trees == 0) throw std::invalid_argument("random forest: n_trees must be positive");
  const std::size_t n = train.n();
  const std::size_t d = train.d();
  const std::size_t mtry =
      params.max_features > 0
          ? std::min(params.max_features, d)
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));

  ForestModel model;
  model.params_ = params;
  model.params_.max_features = mtry;
  model.num_classes_ = train.num_classes();
  model.num_features_ = d;
  model.trees_.resize(params.n_trees);
  std::vector<std::vector<double>> per_tree(params.n_trees, std::vector<double>(d, 0.0));

  const auto trees = static_cast<std::ptrdiff_t>(params.n_trees);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t tt = 0; tt < trees; ++tt) {
    const auto t = static_cast<std::size_t>(tt);
    Rng rng(params.seed + t);
    std::vector<std::size_t> sample(n);
    if (params.bootstrap) {
      for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    auto& imp = per_tree[t];
    model.trees_[t] = DecisionTree::grow(train.matrix.values, train.labels, model.num_classes_, sample,
                                         mtry, rng, imp);
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0)
      for (auto& v : imp) v /= total;
  }

  model.importances_.assign(d, 0.0);
  for (const auto& imp : per_tree)
    for (std::size_t j = 0; j < d; ++j) model.importances_[j] += imp[j];
  const double total = std::accumulate(model.importances_.begin(), model.importances_.end(), 0.0);
  if (total > 0.0) {
    for (auto& v : model.importances_) v /= total;
  } else {
    std::fill(model.importances_.begin(), model.importances_.end(), 1.0 / static_cast<double>(d));
  }
  return model;
}

Prediction ForestModel::predict(const Matrix& x) const {
  if (x.cols() != num_features_)
    throw std::invalid_argument("random forest: input has " + std::to_string(x.cols()) +
                                " features, model expects " + std::to_string(num_features_));
  Prediction p;
  p.scores = Matrix(x.rows(), num_classes_);
  p.labels.resize(x.rows());
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    auto out = p.scores.row(i);
    for (const auto& tree : trees_) {
      const auto& leaf = tree.leaf_for(x.row(i));
      double total = 0.0;
      for (double c : leaf.counts) total += c;
      for (std::size_t c = 0; c < num_classes_; ++c) out[c] += leaf.counts[c] / total;
    }
    for (auto& v : out) v /= static_cast<double>(trees_.size());
    p.labels[i] = argmax(out);
  }
  return p;
}

nlohmann::ordered_json ForestModel::to_json() const {
  nlohmann::ordered_json j;
  j["n_trees"] = params_.n_trees;
  j["max_features"] = params_.max_features;
  j["bootstrap"] = params_.bootstrap;
  j["seed"] = params_.seed;
  j["num_classes"] = num_classes_;
  j["num_features"] = num_features_;
  j["importances"] = importances_;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : trees_) arr.push_back(t.to_json());
  j["trees"] = std::move(arr);
  return j;
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  ForestModel m;
  m.params_.n_trees = j.at("n_trees").get<std::size_t>();
  m.params_.max_features = j.at("max_features").get<std::size_t>();
  m.params_.bootstrap = j.at("bootstrap").get<bool>();
  m.params_.seed = j.at("seed").get<std::uint64_t>();
  m.num_classes_ = j.at("num_classes").get<std::size_t>();
  m.num_features_ = j.at("num_features").get<std::size_t>();
  m.importances_ = j.at("importances").get<std::vector<double>>();
  for (const auto& t : j.at("trees")) m.trees_.push_back(DecisionTree::from_json(t, m.num_classes_));
  if (m.trees_.size() != m.params_.n_trees) throw DataError("forest document: tree count mismatch");
  return m;
}

}  // namespace deepfeat::classifiers
