#include "deepfeat/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "deepfeat/codec.hpp"
#include "deepfeat/error.hpp"

namespace deepfeat::classifiers {

namespace {

void check_features(std::size_t got, std::size_t want, std::string_view who) {
  if (got != want)
    throw std::invalid_argument(std::string(who) + ": input has " + std::to_string(got) +
                                " features, model expects " + std::to_string(want));
}

}  // namespace

std::string_view kind_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Knn: return "knn";
    case ClassifierKind::Svm: return "svm";
    case ClassifierKind::RandomForest: return "random_forest";
    case ClassifierKind::NaiveBayes: return "naive_bayes";
  }
  return "?";
}

std::string_view display_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Knn: return "K-NN";
    case ClassifierKind::Svm: return "SVM";
    case ClassifierKind::RandomForest: return "Random Forest";
    case ClassifierKind::NaiveBayes: return "Naïve Bayes";
  }
  return "?";
}

ClassifierKind kind_from_name(std::string_view name) {
  for (auto k : {ClassifierKind::Knn, ClassifierKind::Svm, ClassifierKind::RandomForest,
                 ClassifierKind::NaiveBayes})
    if (kind_name(k) == name) return k;
  throw ConfigError("unknown classifier kind '" + std::string(name) + "'");
}

int argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = c;
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------

KnnModel KnnModel::fit(const data::LabeledDataset& train, const KnnParams& params) {
  train.validate();
  if (params.k == 0) throw std::invalid_argument("knn: k must be positive");
  if (params.k > train.n())
    throw std::invalid_argument("knn: k = " + std::to_string(params.k) + " exceeds " +
                                std::to_string(train.n()) + " training samples");
  KnnModel m;
  m.params_ = params;
  m.train_ = train.matrix.values;
  m.labels_ = train.labels;
  m.num_classes_ = train.num_classes();
  return m;
}

Prediction KnnModel::predict(const Matrix& x) const {
  check_features(x.cols(), train_.cols(), "knn");
  const auto dist = kernels::squared_distances(x, train_);
  const std::size_t n_train = train_.rows();
  const std::size_t k = params_.k;
  Prediction p;
  p.scores = Matrix(x.rows(), num_classes_);
  p.labels.resize(x.rows());
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel
  {
    std::vector<std::size_t> order(n_train);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      const auto drow = dist.row(i);
      std::iota(order.begin(), order.end(), 0);
      const auto closer = [&](std::size_t a, std::size_t b) {
        return drow[a] < drow[b] || (drow[a] == drow[b] && a < b);
      };
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), closer);
      auto out = p.scores.row(i);
      for (std::size_t t = 0; t < k; ++t) out[static_cast<std::size_t>(labels_[order[t]])] += 1.0;
      for (auto& v : out) v /= static_cast<double>(k);
      p.labels[i] = argmax(out);
    }
  }
  return p;
}

nlohmann::ordered_json KnnModel::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = params_.k;
  j["num_classes"] = num_classes_;
  j["labels"] = labels_;
  j["train"] = codec::matrix_to_json(train_);
  return j;
}

KnnModel KnnModel::from_json(const nlohmann::json& j) {
  KnnModel m;
  m.params_.k = j.at("k").get<std::size_t>();
  m.num_classes_ = j.at("num_classes").get<std::size_t>();
  m.labels_ = j.at("labels").get<std::vector<int>>();
  m.train_ = codec::matrix_from_json(j.at("train"));
  if (m.labels_.size() != m.train_.rows()) throw DataError("knn document: label count mismatch");
  return m;
}

// ---------------------------------------------------------------------------

NaiveBayesModel NaiveBayesModel::fit(const data::LabeledDataset& train, const NaiveBayesParams& params) {
  train.validate();
  const std::size_t n = train.n();
  const std::size_t d = train.d();
  const std::size_t C = train.num_classes();
  const auto& x = train.matrix.values;

  NaiveBayesModel m;
  m.params_ = params;
  m.priors_.assign(C, 0.0);
  m.means_ = Matrix(C, d);
  m.variances_ = Matrix(C, d);

  double max_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    max_var = std::max(max_var, var / static_cast<double>(n));
  }
  // Degenerate all-constant input still needs a positive floor.
  m.epsilon_ = max_var > 0.0 ? params.var_smoothing * max_var : params.var_smoothing;

  std::vector<double> count(C, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(train.labels[i]);
    count[c] += 1.0;
    for (std::size_t j = 0; j < d; ++j) m.means_(c, j) += x(i, j);
  }
  for (std::size_t c = 0; c < C; ++c) {
    m.priors_[c] = count[c] / static_cast<double>(n);
    if (count[c] > 0)
      for (std::size_t j = 0; j < d; ++j) m.means_(c, j) /= count[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(train.labels[i]);
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = x(i, j) - m.means_(c, j);
      m.variances_(c, j) += dev * dev;
    }
  }
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t j = 0; j < d; ++j)
      m.variances_(c, j) = (count[c] > 0 ? m.variances_(c, j) / count[c] : 0.0) + m.epsilon_;
  return m;
}

Matrix NaiveBayesModel::joint_log_likelihood(const Matrix& x) const {
  check_features(x.cols(), means_.cols(), "naive bayes");
  const std::size_t C = priors_.size();
  const std::size_t d = means_.cols();
  std::vector<double> log_norm(C, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t j = 0; j < d; ++j) log_norm[c] += std::log(2.0 * std::numbers::pi * variances_(c, j));

  Matrix out(x.rows(), C);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      if (priors_[c] <= 0.0) {
        out(i, c) = -std::numeric_limits<double>::infinity();
        continue;
      }
      double q = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = x(i, j) - means_(c, j);
        q += dev * dev / variances_(c, j);
      }
      out(i, c) = std::log(priors_[c]) - 0.5 * log_norm[c] - 0.5 * q;
    }
  }
  return out;
}

Prediction NaiveBayesModel::predict(const Matrix& x) const {
  Prediction p;
  p.scores = joint_log_likelihood(x);
  p.labels.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = p.scores.row(i);
    const double top = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (auto& v : r) {
      v = std::exp(v - top);
      z += v;
    }
    for (auto& v : r) v /= z;
    p.labels[i] = argmax(r);
  }
  return p;
}

nlohmann::ordered_json NaiveBayesModel::to_json() const {
  nlohmann::ordered_json j;
  j["var_smoothing"] = params_.var_smoothing;
  j["epsilon"] = epsilon_;
  j["priors"] = priors_;
  j["means"] = codec::matrix_to_json(means_);
  j["variances"] = codec::matrix_to_json(variances_);
  return j;
}

NaiveBayesModel NaiveBayesModel::from_json(const nlohmann::json& j) {
  NaiveBayesModel m;
  m.params_.var_smoothing = j.at("var_smoothing").get<double>();
  m.epsilon_ = j.at("epsilon").get<double>();
  m.priors_ = j.at("priors").get<std::vector<double>>();
  m.means_ = codec::matrix_from_json(j.at("means"));
  m.variances_ = codec::matrix_from_json(j.at("variances"));
  if (m.means_.rows() != m.priors_.size() || m.variances_.rows() != m.priors_.size() ||
      m.means_.cols() != m.variances_.cols())
    throw DataError("naive bayes document: shape mismatch");
  for (double v : m.variances_.values())
    if (!(v > 0.0)) throw DataError("naive bayes document: non-positive variance");
  return m;
}

// ---------------------------------------------------------------------------

ClassifierKind kind_of(const ClassifierParams& params) {
  return static_cast<ClassifierKind>(params.index());
}

ClassifierKind TrainedClassifier::kind() const noexcept {
  return static_cast<ClassifierKind>(model_.index());
}

Prediction TrainedClassifier::predict(const Matrix& x) const {
  return std::visit([&](const auto& m) { return m.predict(x); }, model_);
}

nlohmann::ordered_json TrainedClassifier::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "deepfeat.classifier";
  j["version"] = kClassifierFormatVersion;
  j["kind"] = kind_name(kind());
  j["model"] = std::visit([](const auto& m) { return m.to_json(); }, model_);
  return j;
}

TrainedClassifier TrainedClassifier::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "deepfeat.classifier")
    throw DataError("not a classifier document");
  const int version = j.at("version").get<int>();
  if (version != kClassifierFormatVersion)
    throw DataError("unsupported classifier document version " + std::to_string(version));
  const auto& body = j.at("model");
  switch (kind_from_name(j.at("kind").get<std::string>())) {
    case ClassifierKind::Knn: return TrainedClassifier(KnnModel::from_json(body));
    case ClassifierKind::Svm: return TrainedClassifier(SvmModel::from_json(body));
    case ClassifierKind::RandomForest: return TrainedClassifier(ForestModel::from_json(body));
    case ClassifierKind::NaiveBayes: return TrainedClassifier(NaiveBayesModel::from_json(body));
  }
  throw DataError("unreachable classifier kind");
}

TrainedClassifier fit_classifier(const ClassifierParams& params, const data::LabeledDataset& train) {
  return std::visit(
      [&](const auto& p) -> TrainedClassifier {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) return TrainedClassifier(KnnModel::fit(train, p));
        else if constexpr (std::is_same_v<P, SvmParams>) return TrainedClassifier(SvmModel::fit(train, p));
        else if constexpr (std::is_same_v<P, ForestParams>) return TrainedClassifier(ForestModel::fit(train, p));
        else return TrainedClassifier(NaiveBayesModel::fit(train, p));
      },
      params);
}

Prediction knn_classify(const data::LabeledDataset& train, const data::FeatureMatrix& test, std::size_t k) {
  return KnnModel::fit(train, {k}).predict(test.values);
}

Prediction svm_classify(const data::LabeledDataset& train, const data::FeatureMatrix& test,
                        const SvmParams& params) {
  return SvmModel::fit(train, params).predict(test.values);
}

Prediction nb_classify(const data::LabeledDataset& train, const data::FeatureMatrix& test,
                       const NaiveBayesParams& params) {
  return NaiveBayesModel::fit(train, params).predict(test.values);
}

Prediction forest_classify(const data::LabeledDataset& train, const data::FeatureMatrix& test,
                           std::size_t n_trees, std::uint64_t seed) {
  ForestParams p;
  p.n_trees = n_trees;
  p.seed = seed;
  return ForestModel::fit(train, p).predict(test.values);
}

}  // namespace deepfeat::classifiers
