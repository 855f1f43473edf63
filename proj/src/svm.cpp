#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "deepfeat/classifiers.hpp"
#include "deepfeat/codec.hpp"
#include "deepfeat/error.hpp"

namespace deepfeat::classifiers {

namespace {

constexpr double kTau = 1e-12;
constexpr std::size_t kFullGramLimit = 5000;

/// Kernel rows, either from a precomputed Gram matrix or computed on demand
/// into a small round-robin cache. The two most recent rows stay valid.
class KernelRows {
 public:
  KernelRows(const Matrix& x, const kernels::KernelFunction& k, const Matrix* gram)
      : x_(x), k_(k), gram_(gram) {
    if (gram_ == nullptr) {
      diag_.resize(x.rows());
      for (std::size_t i = 0; i < x.rows(); ++i) diag_[i] = k_(x.row(i), x.row(i));
      slots_.assign(kSlots, {std::numeric_limits<std::size_t>::max(), std::vector<double>(x.rows())});
    }
  }

  std::span<const double> row(std::size_t i) {
    if (gram_ != nullptr) return gram_->row(i);
    for (auto& [idx, buf] : slots_)
      if (idx == i) return buf;
    auto& [idx, buf] = slots_[next_];
    next_ = (next_ + 1) % kSlots;
    idx = i;
    for (std::size_t t = 0; t < x_.rows(); ++t) buf[t] = k_(x_.row(i), x_.row(t));
    return buf;
  }

  double diag(std::size_t i) const { return gram_ != nullptr ? (*gram_)(i, i) : diag_[i]; }

 private:
  static constexpr std::size_t kSlots = 8;
  const Matrix& x_;
  const kernels::KernelFunction& k_;
  const Matrix* gram_;
  std::vector<double> diag_;
  std::vector<std::pair<std::size_t, std::vector<double>>> slots_;
  std::size_t next_ = 0;
};

nlohmann::ordered_json kernel_to_json(const kernels::KernelFunction& k) {
  nlohmann::ordered_json j;
  j["type"] = k.type == kernels::KernelType::Linear ? "linear" : "rbf";
  j["gamma"] = k.gamma;
  return j;
}

kernels::KernelFunction kernel_from_json(const nlohmann::json& j) {
  kernels::KernelFunction k;
  const auto type = j.at("type").get<std::string>();
  if (type == "linear") {
    k.type = kernels::KernelType::Linear;
  } else if (type == "rbf") {
    k.type = kernels::KernelType::Rbf;
  } else {
    throw DataError("unknown kernel type '" + type + "'");
  }
  k.gamma = j.at("gamma").get<double>();
  return k;
}

}  // namespace

double default_gamma(const Matrix& x) {
  const auto v = x.values();
  if (v.empty()) return 1.0;
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double a : v) var += (a - mean) * (a - mean);
  var /= static_cast<double>(v.size());
  if (!(var > 0.0)) return 1.0;
  return 1.0 / (static_cast<double>(x.cols()) * var);
}

double BinarySvm::decision(std::span<const double> x) const {
  double f = bias;
  for (std::size_t s = 0; s < alpha.size(); ++s)
    f += alpha[s] * support_labels[s] * kernel(support_vectors.row(s), x);
  return f;
}

std::vector<double> BinarySvm::decision(const Matrix& x) const {
  std::vector<double> out(x.rows(), bias);
  if (alpha.empty()) return out;
  const auto k = kernels::cross_kernel(x, support_vectors, kernel);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double f = bias;
    const auto r = k.row(i);
    for (std::size_t s = 0; s < alpha.size(); ++s) f += alpha[s] * support_labels[s] * r[s];
    out[i] = f;
  }
  return out;
}

std::vector<double> BinarySvm::dual_alphas() const {
  std::vector<double> full(n_train, 0.0);
  for (std::size_t s = 0; s < support_indices.size(); ++s) full[support_indices[s]] = alpha[s];
  return full;
}

std::vector<double> BinarySvm::linear_weights() const {
  if (kernel.type != kernels::KernelType::Linear)
    throw std::logic_error("primal weights exist only for the linear kernel");
  std::vector<double> w(support_vectors.cols(), 0.0);
  for (std::size_t s = 0; s < alpha.size(); ++s) {
    const double c = alpha[s] * support_labels[s];
    const auto r = support_vectors.row(s);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += c * r[j];
  }
  return w;
}

nlohmann::ordered_json BinarySvm::to_json() const {
  nlohmann::ordered_json j;
  j["kernel"] = kernel_to_json(kernel);
  j["C"] = C;
  j["n_train"] = n_train;
  j["bias"] = bias;
  j["iterations"] = iterations;
  j["support_indices"] = support_indices;
  j["support_labels"] = support_labels;
  j["alpha"] = alpha;
  j["support_vectors"] = codec::matrix_to_json(support_vectors);
  return j;
}

BinarySvm BinarySvm::from_json(const nlohmann::json& j) {
  BinarySvm m;
  m.kernel = kernel_from_json(j.at("kernel"));
  m.C = j.at("C").get<double>();
  m.n_train = j.at("n_train").get<std::size_t>();
  m.bias = j.at("bias").get<double>();
  m.iterations = j.at("iterations").get<std::size_t>();
  m.support_indices = j.at("support_indices").get<std::vector<std::size_t>>();
  m.support_labels = j.at("support_labels").get<std::vector<int>>();
  m.alpha = j.at("alpha").get<std::vector<double>>();
  m.support_vectors = codec::matrix_from_json(j.at("support_vectors"));
  if (m.alpha.size() != m.support_indices.size() || m.alpha.size() != m.support_labels.size() ||
      m.alpha.size() != m.support_vectors.rows())
    throw DataError("binary SVM document: support arrays disagree in length");
  return m;
}

BinarySvm svm_train_binary(const Matrix& x, std::span<const int> y, const SvmParams& params) {
  kernels::KernelFunction k{params.kernel, params.gamma > 0.0 ? params.gamma : default_gamma(x)};
  if (x.rows() <= kFullGramLimit) {
    const auto gram = kernels::gram_matrix(x, k);
    return svm_train_binary(x, y, params, k, &gram);
  }
  return svm_train_binary(x, y, params, k, nullptr);
}

BinarySvm svm_train_binary(const Matrix& x, std::span<const int> y, const SvmParams& params,
                           const kernels::KernelFunction& kernel, const Matrix* gram) {
  const std::size_t n = x.rows();
  if (y.size() != n) throw std::invalid_argument("svm: label count != row count");
  if (!(params.C > 0.0)) throw std::invalid_argument("svm: C must be positive");
  bool has_pos = false;
  bool has_neg = false;
  for (int v : y) {
    if (v == 1) {
      has_pos = true;
    } else if (v == -1) {
      has_neg = true;
    } else {
      throw std::invalid_argument("svm: labels must be +1 or -1");
    }
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("svm: both classes must be present");

  const double C = params.C;
  const double eps = params.tolerance;
  const std::size_t max_iter =
      params.max_iterations > 0 ? params.max_iterations : std::max<std::size_t>(10'000'000, 100 * n);

  KernelRows rows(x, kernel, gram);
  std::vector<double> a(n, 0.0);
  std::vector<double> g(n, -1.0);  // gradient of 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij
  std::vector<double> yd(y.begin(), y.end());

  const auto in_up = [&](std::size_t t) { return (yd[t] > 0 && a[t] < C) || (yd[t] < 0 && a[t] > 0); };
  const auto in_low = [&](std::size_t t) { return (yd[t] > 0 && a[t] > 0) || (yd[t] < 0 && a[t] < C); };

  std::size_t iter = 0;
  bool converged = false;
  for (; iter < max_iter; ++iter) {
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -yd[t] * g[t] > g_max) {
        g_max = -yd[t] * g[t];
        i = t;
      }
    }
    if (i == n) {
      converged = true;
      break;
    }
    const auto ki = rows.row(i);
    const double kii = rows.diag(i);
    double g_min = std::numeric_limits<double>::infinity();
    double obj_min = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -yd[t] * g[t];
      g_min = std::min(g_min, v);
      const double b = g_max - v;
      if (b > 0.0) {
        double quad = kii + rows.diag(t) - 2.0 * ki[t];
        if (quad <= 0.0) quad = kTau;
        const double obj = -(b * b) / quad;
        if (obj < obj_min) {
          obj_min = obj;
          j = t;
        }
      }
    }
    if (g_max - g_min < eps || j == n) {
      converged = true;
      break;
    }

    const auto kj = rows.row(j);
    const double old_ai = a[i];
    const double old_aj = a[j];
    double quad = kii + rows.diag(j) - 2.0 * ki[j];
    if (quad <= 0.0) quad = kTau;
    if (yd[i] != yd[j]) {
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = C - diff;
        }
      } else if (a[j] > C) {
        a[j] = C;
        a[i] = C + diff;
      }
    } else {
      const double delta = (g[i] - g[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = sum - C;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > C) {
        if (a[j] > C) {
          a[j] = C;
          a[i] = sum - C;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }

    const double dai = a[i] - old_ai;
    const double daj = a[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t)
      g[t] += yd[t] * (yd[i] * ki[t] * dai + yd[j] * kj[t] * daj);
  }
  if (!converged)
    throw ConvergenceError("svm: SMO did not reach KKT tolerance " + std::to_string(eps) +
                           " within " + std::to_string(max_iter) + " iterations");

  // Offset: mean of y_i G_i over free vectors, else midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = yd[t] * g[t];
    if (a[t] >= C) {
      if (yd[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (yd[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  BinarySvm m;
  m.kernel = kernel;
  m.C = C;
  m.n_train = n;
  m.bias = -rho;
  m.iterations = iter;
  for (std::size_t t = 0; t < n; ++t) {
    if (a[t] > 0.0) {
      m.support_indices.push_back(t);
      m.alpha.push_back(a[t]);
      m.support_labels.push_back(y[t]);
    }
  }
  m.support_vectors = x.select_rows(m.support_indices);
  return m;
}

SvmModel SvmModel::fit(const data::LabeledDataset& train, const SvmParams& params) {
  train.validate_for_training();
  const auto& x = train.matrix.values;
  const kernels::KernelFunction k{params.kernel,
                                  params.gamma > 0.0 ? params.gamma : default_gamma(x)};
  Matrix gram;
  if (x.rows() <= kFullGramLimit) gram = kernels::gram_matrix(x, k);
  const Matrix* gram_ptr = gram.empty() ? nullptr : &gram;

  SvmModel model;
  model.params_ = params;
  model.params_.gamma = k.gamma;
  std::vector<int> y(train.n());
  for (std::size_t c = 0; c < train.num_classes(); ++c) {
    for (std::size_t i = 0; i < train.n(); ++i)
      y[i] = train.labels[i] == static_cast<int>(c) ? 1 : -1;
    try {
      model.machines_.push_back(svm_train_binary(x, y, params, k, gram_ptr));
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("class '" + train.class_names[c] + "' vs rest: " + e.what());
    }
  }
  return model;
}

Matrix SvmModel::decision_values(const Matrix& x) const {
  if (!machines_.empty() && x.cols() != machines_.front().support_vectors.cols())
    throw std::invalid_argument("svm: input has " + std::to_string(x.cols()) +
                                " features, model expects " +
                                std::to_string(machines_.front().support_vectors.cols()));
  Matrix out(x.rows(), machines_.size());
  for (std::size_t c = 0; c < machines_.size(); ++c) {
    const auto f = machines_[c].decision(x);
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, c) = f[i];
  }
  return out;
}

Prediction SvmModel::predict(const Matrix& x) const {
  Prediction p;
  p.scores = decision_values(x);
  p.labels.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = p.scores.row(i);
    p.labels[i] = argmax(r);
    const double top = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (auto& v : r) {
      v = std::exp(v - top);
      z += v;
    }
    for (auto& v : r) v /= z;
  }
  return p;
}

nlohmann::ordered_json SvmModel::to_json() const {
  nlohmann::ordered_json j;
  j["C"] = params_.C;
  j["tolerance"] = params_.tolerance;
  j["kernel"] = params_.kernel == kernels::KernelType::Linear ? "linear" : "rbf";
  j["gamma"] = params_.gamma;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : machines_) arr.push_back(m.to_json());
  j["machines"] = std::move(arr);
  return j;
}

SvmModel SvmModel::from_json(const nlohmann::json& j) {
  SvmModel model;
  model.params_.C = j.at("C").get<double>();
  model.params_.tolerance = j.at("tolerance").get<double>();
  model.params_.kernel = j.at("kernel").get<std::string>() == "linear" ? kernels::KernelType::Linear
                                                                       : kernels::KernelType::Rbf;
  model.params_.gamma = j.at("gamma").get<double>();
  for (const auto& m : j.at("machines")) model.machines_.push_back(BinarySvm::from_json(m));
  return model;
}

}  // namespace deepfeat::classifiers
