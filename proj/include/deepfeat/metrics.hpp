#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deepfeat::metrics {

/// counts(i, j): samples of true class i predicted as j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes)
      : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {}

  [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }
  [[nodiscard]] std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_.at(truth * num_classes_ + predicted);
  }
  std::size_t& at(std::size_t truth, std::size_t predicted) {
    return counts_.at(truth * num_classes_ + predicted);
  }
  [[nodiscard]] std::size_t total() const noexcept;
  [[nodiscard]] std::size_t trace() const noexcept;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t num_classes_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::size_t num_classes);

enum class Averaging { Weighted, Macro };

std::string_view averaging_name(Averaging a);
Averaging averaging_from_name(std::string_view name);

struct MetricRow {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Averaging averaging = Averaging::Weighted;
  std::vector<std::size_t> support;
  std::vector<double> class_precision;
  std::vector<double> class_recall;
  std::vector<double> class_f1;
};

/// Accuracy = trace / total. Per-class one-vs-rest precision, recall and F1
/// with 0 for zero denominators, then averaged: weighted by true support, or
/// an unweighted mean over classes that occur as truth or prediction.
MetricRow classification_report(const ConfusionMatrix& cm, Averaging averaging = Averaging::Weighted);

/// Half-up rounding to 3 decimals on the shortest decimal representation,
/// trailing zeros trimmed: 0.8675 -> "0.868", 0.850 -> "0.85", 1 -> "1".
std::string format_metric(double value);

}  // namespace deepfeat::metrics
