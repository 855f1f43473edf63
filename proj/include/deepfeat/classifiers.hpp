#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "deepfeat/data.hpp"
#include "deepfeat/kernels.hpp"
#include "deepfeat/matrix.hpp"
#include "deepfeat/random.hpp"
#include "json.hpp"

namespace deepfeat::classifiers {

enum class ClassifierKind { Knn, Svm, RandomForest, NaiveBayes };

std::string_view kind_name(ClassifierKind kind);     // "knn", "svm", ...
std::string_view display_name(ClassifierKind kind);  // "K-NN", "SVM", ...
ClassifierKind kind_from_name(std::string_view name);

/// Predicted labels and an n x C score matrix. For KNN, forest and naive
/// Bayes the rows are probabilities; for SVM they are a row-softmax of the
/// one-vs-rest decision values and carry no calibration.
struct Prediction {
  std::vector<int> labels;
  Matrix scores;
};

/// Index of the row maximum; ties go to the lowest index.
int argmax(std::span<const double> row);

// ---------------------------------------------------------------------------
// K-nearest neighbours

struct KnnParams {
  std::size_t k = 5;
};

class KnnModel {
 public:
  static KnnModel fit(const data::LabeledDataset& train, const KnnParams& params);
  [[nodiscard]] Prediction predict(const Matrix& x) const;

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static KnnModel from_json(const nlohmann::json& j);

  [[nodiscard]] std::size_t num_features() const noexcept { return train_.cols(); }
  [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }

 private:
  KnnParams params_;
  Matrix train_;
  std::vector<int> labels_;
  std::size_t num_classes_ = 0;
};

// ---------------------------------------------------------------------------
// Support vector machine

struct SvmParams {
  kernels::KernelType kernel = kernels::KernelType::Rbf;
  double gamma = 0.0;  // <= 0 selects 1 / (d * Var(X))
  double C = 1.0;
  double tolerance = 1e-3;         // stop when the maximal KKT violation drops below this
  std::size_t max_iterations = 0;  // 0 selects max(10^7, 100 n)
};

/// 1 / (d * Var(X)) over all entries of X; 1 when X has zero variance.
double default_gamma(const Matrix& x);

/// One binary soft-margin machine, f(x) = sum_i alpha_i y_i k(sv_i, x) + bias.
struct BinarySvm {
  kernels::KernelFunction kernel;
  double C = 1.0;
  std::size_t n_train = 0;
  std::vector<std::size_t> support_indices;  // rows of the training matrix with alpha > 0
  std::vector<double> alpha;                 // dual values of the support vectors
  std::vector<int> support_labels;           // +1 / -1
  Matrix support_vectors;
  double bias = 0.0;
  std::size_t iterations = 0;

  [[nodiscard]] double decision(std::span<const double> x) const;
  [[nodiscard]] std::vector<double> decision(const Matrix& x) const;
  /// Full-length dual vector over the training rows.
  [[nodiscard]] std::vector<double> dual_alphas() const;
  /// Primal weights sum_i alpha_i y_i x_i; linear kernel only.
  [[nodiscard]] std::vector<double> linear_weights() const;

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static BinarySvm from_json(const nlohmann::json& j);
};

/// Trains one machine by SMO with second-order working-set selection.
/// y holds +1 / -1; both must occur. Throws ConvergenceError at the cap.
BinarySvm svm_train_binary(const Matrix& x, std::span<const int> y, const SvmParams& params);

/// Same, with a precomputed n x n kernel matrix for x (shared across the
/// one-vs-rest machines).
BinarySvm svm_train_binary(const Matrix& x, std::span<const int> y, const SvmParams& params,
                           const kernels::KernelFunction& kernel, const Matrix* gram);

class SvmModel {
 public:
  /// One-vs-rest over all classes; every class must have a sample.
  static SvmModel fit(const data::LabeledDataset& train, const SvmParams& params);
  [[nodiscard]] Prediction predict(const Matrix& x) const;
  /// n x C decision values.
  [[nodiscard]] Matrix decision_values(const Matrix& x) const;

  [[nodiscard]] const std::vector<BinarySvm>& machines() const noexcept { return machines_; }
  [[nodiscard]] std::size_t num_classes() const noexcept { return machines_.size(); }

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static SvmModel from_json(const nlohmann::json& j);

 private:
  SvmParams params_;
  std::vector<BinarySvm> machines_;
};

// ---------------------------------------------------------------------------
// Random forest

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_features = 0;  // 0 selects max(1, floor(sqrt(d)))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

/// Node array entry. Internal nodes route x[feature] <= threshold to `left`.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> counts;  // class counts, leaves only
};

class DecisionTree {
 public:
  /// Grows a CART tree with Gini splits over `sample` (rows of x, repeats
  /// allowed) until nodes are pure or hold fewer than 2 samples. Each node
  /// draws features in a fresh random order and scores them until
  /// `max_features` non-constant ones were seen. Weighted impurity decreases
  /// are added to `importance` (length d).
  static DecisionTree grow(const Matrix& x, std::span<const int> y, std::size_t num_classes,
                           std::span<const std::size_t> sample, std::size_t max_features, Rng& rng,
                           std::vector<double>& importance);

  [[nodiscard]] const TreeNode& leaf_for(std::span<const double> x) const;
  [[nodiscard]] const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j, std::size_t num_classes);

 private:
  std::vector<TreeNode> nodes_;
};

class ForestModel {
 public:
  /// Tree t is grown from Rng(seed + t), so the forest does not depend on
  /// how trees are scheduled across threads.
  static ForestModel fit(const data::LabeledDataset& train, const ForestParams& params);
  [[nodiscard]] Prediction predict(const Matrix& x) const;

  /// Mean decrease in impurity: per-tree normalized, averaged, normalized to sum 1.
  [[nodiscard]] const std::vector<double>& feature_importances() const noexcept {
    return importances_;
  }
  [[nodiscard]] const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);

 private:
  ForestParams params_;
  std::size_t num_classes_ = 0;
  std::size_t num_features_ = 0;
  std::vector<DecisionTree> trees_;
  std::vector<double> importances_;
};

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

struct NaiveBayesParams {
  double var_smoothing = 1e-9;  // epsilon = var_smoothing * max feature variance
};

class NaiveBayesModel {
 public:
  static NaiveBayesModel fit(const data::LabeledDataset& train, const NaiveBayesParams& params);
  [[nodiscard]] Prediction predict(const Matrix& x) const;
  /// n x C joint log-likelihoods; -inf for classes with no training samples.
  [[nodiscard]] Matrix joint_log_likelihood(const Matrix& x) const;

  [[nodiscard]] const std::vector<double>& priors() const noexcept { return priors_; }
  [[nodiscard]] const Matrix& means() const noexcept { return means_; }
  [[nodiscard]] const Matrix& variances() const noexcept { return variances_; }
  [[nodiscard]] double epsilon() const noexcept { return epsilon_; }

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static NaiveBayesModel from_json(const nlohmann::json& j);

 private:
  NaiveBayesParams params_;
  std::vector<double> priors_;
  Matrix means_;      // C x d
  Matrix variances_;  // C x d, epsilon already added
  double epsilon_ = 0.0;
};

// ---------------------------------------------------------------------------

using ClassifierParams = std::variant<KnnParams, SvmParams, ForestParams, NaiveBayesParams>;

ClassifierKind kind_of(const ClassifierParams& params);

/// Any fitted classifier; versioned JSON round trip.
class TrainedClassifier {
 public:
  using Model = std::variant<KnnModel, SvmModel, ForestModel, NaiveBayesModel>;

  explicit TrainedClassifier(Model model) : model_(std::move(model)) {}

  [[nodiscard]] ClassifierKind kind() const noexcept;
  [[nodiscard]] Prediction predict(const Matrix& x) const;
  [[nodiscard]] const Model& model() const noexcept { return model_; }

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static TrainedClassifier from_json(const nlohmann::json& j);

 private:
  Model model_;
};

inline constexpr int kClassifierFormatVersion = 1;

TrainedClassifier fit_classifier(const ClassifierParams& params, const data::LabeledDataset& train);

Prediction knn_classify(const data::LabeledDataset& train, const data::FeatureMatrix& test,
                        std::size_t k = 5);
Prediction svm_classify(const data::LabeledDataset& train, const data::FeatureMatrix& test,
                        const SvmParams& params = {});
Prediction nb_classify(const data::LabeledDataset& train, const data::FeatureMatrix& test,
                       const NaiveBayesParams& params = {});
Prediction forest_classify(const data::LabeledDataset& train, const data::FeatureMatrix& test,
                           std::size_t n_trees = 100, std::uint64_t seed = 0);

}  // namespace deepfeat::classifiers
