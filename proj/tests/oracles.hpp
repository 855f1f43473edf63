// Independent reference computations for the tests. Nothing here calls into
// the library's numerical code.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "deepfeat/matrix.hpp"

namespace oracle {

/// Textbook one-way ANOVA F for column j, long-double two-pass sums.
inline double anova_f(const deepfeat::Matrix& x, std::span<const int> y, std::size_t num_classes, std::size_t j) {
  const std::size_t n = x.rows();
  std::vector<long double> sum(num_classes, 0.0L);
  std::vector<std::size_t> cnt(num_classes, 0);
  long double total = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    sum[y[i]] += x(i, j);
    ++cnt[y[i]];
    total += x(i, j);
  }
  const long double grand = total / n;
  std::size_t groups = 0;
  long double ssb = 0.0L;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (cnt[c] == 0) continue;
    ++groups;
    const long double m = sum[c] / cnt[c];
    ssb += cnt[c] * (m - grand) * (m - grand);
  }
  long double ssw = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double m = sum[y[i]] / cnt[y[i]];
    ssw += (x(i, j) - m) * (x(i, j) - m);
  }
  return static_cast<double>((ssb / (groups - 1)) / (ssw / (n - groups)));
}

inline double soft_threshold(double z, double a) {
  if (z > a) return z - a;
  if (z < -a) return z + a;
  return 0.0;
}

/// SVM dual value sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij.
inline double dual_objective(const Eigen::MatrixXd& K, const std::vector<int>& y, const std::vector<double>& a) {
  double lin = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lin += a[i];
    for (std::size_t j = 0; j < a.size(); ++j) quad += a[i] * a[j] * y[i] * y[j] * K(i, j);
  }
  return lin - 0.5 * quad;
}

/// Exact maximum of the soft-margin dual by enumerating which variables sit
/// at 0, at C, or strictly inside the box. For each pattern the free block
/// is stationary under the equality constraint, which is a linear system.
/// Use only for n <= 8.
inline double svm_dual_max(const Eigen::MatrixXd& K, const std::vector<int>& y, double C) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd Q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Q(i, j) = y[i] * y[j] * K(i, j);
  int patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> state(n);
  for (int p = 0; p < patterns; ++p) {
    int code = p;
    std::vector<int> free;
    std::vector<double> a(n, 0.0);
    for (int i = 0; i < n; ++i) {
      state[i] = code % 3;
      code /= 3;
      if (state[i] == 1) a[i] = C;
      if (state[i] == 2) free.push_back(i);
    }
    const int f = static_cast<int>(free.size());
    if (f > 0) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(f + 1, f + 1);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(f + 1);
      double eq = 0.0;
      for (int i = 0; i < n; ++i)
        if (state[i] == 1) eq -= y[i] * C;
      for (int r = 0; r < f; ++r) {
        const int i = free[r];
        double rhs = 1.0;
        for (int j = 0; j < n; ++j)
          if (state[j] == 1) rhs -= Q(i, j) * C;
        for (int c = 0; c < f; ++c) A(r, c) = Q(i, free[c]);
        A(r, f) = y[i];
        A(f, r) = y[i];
        b(r) = rhs;
      }
      b(f) = eq;
      const Eigen::VectorXd sol = A.completeOrthogonalDecomposition().solve(b);
      if ((A * sol - b).norm() > 1e-8 * (1.0 + b.norm())) continue;
      bool ok = true;
      for (int r = 0; r < f; ++r) {
        if (sol(r) < -1e-10 || sol(r) > C + 1e-10) ok = false;
        a[free[r]] = std::clamp(sol(r), 0.0, C);
      }
      if (!ok) continue;
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * y[i];
    if (std::abs(s) > 1e-8) continue;
    best = std::max(best, dual_objective(K, y, a));
  }
  return best;
}

inline Eigen::MatrixXd kernel_matrix(const deepfeat::Matrix& x, bool rbf, double gamma) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double dot = 0.0;
      double dist = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        dot += x(i, c) * x(j, c);
        const double t = x(i, c) - x(j, c);
        dist += t * t;
      }
      K(i, j) = rbf ? std::exp(-gamma * dist) : dot;
    }
  return K;
}

}  // namespace oracle
