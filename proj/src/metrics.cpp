#include "deepfeat/metrics.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

#include "deepfeat/error.hpp"

namespace deepfeat::metrics {

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::size_t ConfusionMatrix::trace() const noexcept {
  std::size_t s = 0;
  for (std::size_t i = 0; i < num_classes_; ++i) s += counts_[i * num_classes_ + i];
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::size_t num_classes) {
  if (y_true.size() != y_pred.size())
    throw std::invalid_argument("confusion_matrix: " + std::to_string(y_true.size()) + " true labels vs " +
                                std::to_string(y_pred.size()) + " predictions");
  if (y_true.empty()) throw std::invalid_argument("confusion_matrix: empty input");
  ConfusionMatrix cm(num_classes);
  for (std::size_t t = 0; t < y_true.size(); ++t) {
    const int a = y_true[t];
    const int b = y_pred[t];
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= num_classes || static_cast<std::size_t>(b) >= num_classes)
      throw std::invalid_argument("confusion_matrix: label out of range at position " + std::to_string(t));
    ++cm.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  }
  return cm;
}

std::string_view averaging_name(Averaging a) { return a == Averaging::Weighted ? "weighted" : "macro"; }

Averaging averaging_from_name(std::string_view name) {
  if (name == "weighted") return Averaging::Weighted;
  if (name == "macro") return Averaging::Macro;
  throw ConfigError("unknown averaging mode '" + std::string(name) + "'");
}

MetricRow classification_report(const ConfusionMatrix& cm, Averaging averaging) {
  const std::size_t C = cm.num_classes();
  const std::size_t total = cm.total();
  if (total == 0) throw std::invalid_argument("classification_report: confusion matrix is empty");

  MetricRow row;
  row.averaging = averaging;
  row.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  row.support.assign(C, 0);
  row.class_precision.assign(C, 0.0);
  row.class_recall.assign(C, 0.0);
  row.class_f1.assign(C, 0.0);
  std::vector<std::size_t> predicted(C, 0);
  for (std::size_t i = 0; i < C; ++i)
    for (std::size_t j = 0; j < C; ++j) {
      row.support[i] += cm.at(i, j);
      predicted[j] += cm.at(i, j);
    }

  for (std::size_t c = 0; c < C; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const double p = predicted[c] > 0 ? tp / static_cast<double>(predicted[c]) : 0.0;
    const double r = row.support[c] > 0 ? tp / static_cast<double>(row.support[c]) : 0.0;
    row.class_precision[c] = p;
    row.class_recall[c] = r;
    row.class_f1[c] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }

  double wsum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    double w = 0.0;
    if (averaging == Averaging::Weighted) {
      w = static_cast<double>(row.support[c]);
    } else {
      w = (row.support[c] > 0 || predicted[c] > 0) ? 1.0 : 0.0;
    }
    row.precision += w * row.class_precision[c];
    // support * (tp / support) is tp; summing tp keeps weighted recall equal to accuracy bit for bit.
    row.recall += averaging == Averaging::Weighted ? static_cast<double>(cm.at(c, c)) : w * row.class_recall[c];
    row.f1 += w * row.class_f1[c];
    wsum += w;
  }
  row.precision /= wsum;
  row.recall /= wsum;
  row.f1 /= wsum;
  return row;
}

std::string format_metric(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("format_metric: non-finite value");
  // Shortest round-trip digits, then decimal half-up at the third place.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
  std::string s(buf, res.ptr);
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.erase(0, 1);
  }
  auto dot = s.find('.');
  if (dot == std::string::npos) {
    s += ".";
    dot = s.size() - 1;
  }
  while (s.size() < dot + 5) s += '0';
  const bool round_up = s[dot + 4] >= '5';
  std::string digits = s.substr(0, dot) + s.substr(dot + 1, 3);
  if (round_up) {
    std::size_t p = digits.size();
    while (p > 0) {
      --p;
      if (digits[p] == '9') {
        digits[p] = '0';
      } else {
        ++digits[p];
        break;
      }
      if (p == 0) digits.insert(digits.begin(), '1');
    }
  }
  std::string int_part = digits.substr(0, digits.size() - 3);
  std::string frac = digits.substr(digits.size() - 3);
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  std::string out = int_part.empty() ? "0" : int_part;
  if (!frac.empty()) out += "." + frac;
  if (negative && out != "0") out = "-" + out;
  return out;
}

}  // namespace deepfeat::metrics
