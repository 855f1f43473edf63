#include "deepfeat/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace deepfeat::kernels {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void check_cols(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.cols()) + " columns");
}

struct AnovaLayout {
  std::vector<std::size_t> class_sizes;
  std::size_t populated = 0;
};

AnovaLayout check_anova(const Matrix& x, std::span<const int> labels, std::size_t num_classes) {
  if (labels.size() != x.rows()) throw std::invalid_argument("anova_f: label count != row count");
  AnovaLayout layout;
  layout.class_sizes.assign(num_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument("anova_f: label out of range");
    ++layout.class_sizes[static_cast<std::size_t>(y)];
  }
  for (auto c : layout.class_sizes) layout.populated += c > 0 ? 1 : 0;
  if (layout.populated < 2) throw std::invalid_argument("anova_f: all samples in one class");
  if (x.rows() <= layout.populated)
    throw std::invalid_argument("anova_f: need more samples than classes");
  return layout;
}

double anova_column(const Matrix& x, std::span<const int> labels, const AnovaLayout& layout,
                    std::size_t j, std::vector<double>& sums) {
  const std::size_t n = x.rows();
  const double first = x(0, j);
  bool constant = true;
  double total = 0.0;
  std::fill(sums.begin(), sums.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x(i, j);
    constant = constant && v == first;
    total += v;
    sums[static_cast<std::size_t>(labels[i])] += v;
  }
  if (constant) return 0.0;
  const double grand = total / static_cast<double>(n);
  double ss_between = 0.0;
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (layout.class_sizes[c] == 0) continue;
    sums[c] /= static_cast<double>(layout.class_sizes[c]);
    const double dev = sums[c] - grand;
    ss_between += static_cast<double>(layout.class_sizes[c]) * dev * dev;
  }
  double ss_within = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = x(i, j) - sums[static_cast<std::size_t>(labels[i])];
    ss_within += dev * dev;
  }
  const double k = static_cast<double>(layout.populated);
  const double ms_between = ss_between / (k - 1.0);
  const double ms_within = ss_within / (static_cast<double>(n) - k);
  return ms_between / (ms_within + kAnovaEpsilon);
}

}  // namespace

double KernelFunction::operator()(std::span<const double> a, std::span<const double> b) const {
  if (type == KernelType::Linear) return dot(a, b);
  return std::exp(-gamma * squared_distance(a, b));
}

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  check_cols(a, b);
  Matrix out(a.rows(), b.rows());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto ai = a.row(static_cast<std::size_t>(i));
    auto dst = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows(); ++j) dst[j] = squared_distance(ai, b.row(j));
  }
  return out;
}

Matrix gram_matrix(const Matrix& x, const KernelFunction& k) {
  const std::size_t n = x.rows();
  Matrix out(n, n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j <= i; ++j) out(i, j) = k(x.row(i), x.row(j));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out(i, j) = out(j, i);
  return out;
}

Matrix cross_kernel(const Matrix& a, const Matrix& b, const KernelFunction& k) {
  check_cols(a, b);
  Matrix out(a.rows(), b.rows());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto ai = a.row(static_cast<std::size_t>(i));
    auto dst = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows(); ++j) dst[j] = k(ai, b.row(j));
  }
  return out;
}

std::vector<double> anova_f(const Matrix& x, std::span<const int> labels, std::size_t num_classes) {
  const auto layout = check_anova(x, labels, num_classes);
  std::vector<double> f(x.cols(), 0.0);
  const auto cols = static_cast<std::ptrdiff_t>(x.cols());
#pragma omp parallel
  {
    std::vector<double> sums(num_classes);
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < cols; ++j)
      f[static_cast<std::size_t>(j)] =
          anova_column(x, labels, layout, static_cast<std::size_t>(j), sums);
  }
  return f;
}

namespace serial {

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  check_cols(a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = squared_distance(a.row(i), b.row(j));
  return out;
}

Matrix gram_matrix(const Matrix& x, const KernelFunction& k) {
  Matrix out(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) out(i, j) = out(j, i) = k(x.row(i), x.row(j));
  return out;
}

Matrix cross_kernel(const Matrix& a, const Matrix& b, const KernelFunction& k) {
  check_cols(a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = k(a.row(i), b.row(j));
  return out;
}

std::vector<double> anova_f(const Matrix& x, std::span<const int> labels, std::size_t num_classes) {
  const auto layout = check_anova(x, labels, num_classes);
  std::vector<double> f(x.cols(), 0.0);
  std::vector<double> sums(num_classes);
  for (std::size_t j = 0; j < x.cols(); ++j) f[j] = anova_column(x, labels, layout, j, sums);
  return f;
}

}  // namespace serial

}  // namespace deepfeat::kernels
