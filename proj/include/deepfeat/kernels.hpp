#pragma once

#include <span>

#include "deepfeat/matrix.hpp"

// Data-parallel inner loops shared by the selectors and classifiers.
//
// Each kernel has an OpenMP implementation in deepfeat::kernels and a plain
// loop reference in deepfeat::kernels::serial. Every output entry is computed
// by one thread with the same accumulation order as the reference, so results
// are bit-identical regardless of thread count.
namespace deepfeat::kernels {

enum class KernelType { Linear, Rbf };

struct KernelFunction {
  KernelType type = KernelType::Rbf;
  double gamma = 1.0;  // RBF only

  [[nodiscard]] double operator()(std::span<const double> a, std::span<const double> b) const;
};

/// out(i, j) = ||a_i - b_j||^2
[[nodiscard]] Matrix squared_distances(const Matrix& a, const Matrix& b);

/// out(i, j) = k(x_i, x_j), symmetric.
[[nodiscard]] Matrix gram_matrix(const Matrix& x, const KernelFunction& k);

/// out(i, j) = k(a_i, b_j)
[[nodiscard]] Matrix cross_kernel(const Matrix& a, const Matrix& b, const KernelFunction& k);

/// One-way ANOVA F per column. labels in [0, num_classes); classes with no
/// samples are ignored. F = MS_between / (MS_within + 1e-12); columns constant
/// over all rows get exactly 0. Requires n > number of populated classes >= 2.
[[nodiscard]] std::vector<double> anova_f(const Matrix& x, std::span<const int> labels,
                                          std::size_t num_classes);

namespace serial {
[[nodiscard]] Matrix squared_distances(const Matrix& a, const Matrix& b);
[[nodiscard]] Matrix gram_matrix(const Matrix& x, const KernelFunction& k);
[[nodiscard]] Matrix cross_kernel(const Matrix& a, const Matrix& b, const KernelFunction& k);
[[nodiscard]] std::vector<double> anova_f(const Matrix& x, std::span<const int> labels,
                                          std::size_t num_classes);
}  // namespace serial

inline constexpr double kAnovaEpsilon = 1e-12;

}  // namespace deepfeat::kernels
