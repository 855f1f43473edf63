#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepfeat/data.hpp"
#include "deepfeat/matrix.hpp"
#include "json.hpp"

namespace deepfeat::selection {

enum class SelectorKind { Anova, Rfe, RfImportance, Lasso, Pca };

std::string_view kind_name(SelectorKind kind);     // "anova", "rfe", ...
std::string_view display_name(SelectorKind kind);  // "ANOVA", "RFE", "Random Forest", ...
SelectorKind kind_from_name(std::string_view name);

/// Output of a selector fit.
///
/// Index kinds fill `selected` (unique, in the selector's ranking order) and
/// give one score per input feature. PCA leaves `selected` empty and stores a
/// k x d orthonormal `projection` with the training column means in `center`;
/// its scores are the k component variances, non-increasing.
struct SelectorResult {
  SelectorKind kind = SelectorKind::Anova;
  std::size_t input_dim = 0;
  std::vector<std::size_t> selected;
  std::vector<double> scores;
  std::optional<Matrix> projection;
  std::optional<std::vector<double>> center;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();

  /// Number of output columns after apply_selection.
  [[nodiscard]] std::size_t output_dim() const {
    return projection ? projection->rows() : selected.size();
  }

  /// Throws DataError on broken invariants.
  void validate() const;

  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static SelectorResult from_json(const nlohmann::json& j);
};

inline constexpr int kSelectorFormatVersion = 1;

/// k highest one-way ANOVA F statistics, descending F (ties: lower index first).
SelectorResult anova_select(const data::LabeledDataset& train, std::size_t k = 500);

/// Surviving feature sets after each elimination round, first entry = all features.
using RfeTrace = std::vector<std::vector<std::size_t>>;

struct RfeOptions {
  std::size_t k = 200;
  double step_fraction = 0.1;
  double C = 1.0;  // linear one-vs-rest SVM
};

/// Recursive elimination under a linear one-vs-rest SVM. Each round refits,
/// aggregates each feature's weight as the L2 norm across the per-class
/// weight vectors and drops the ceil(step * remaining) smallest, never going
/// below k. Scores hold the elimination round (survivors get rounds + 1).
SelectorResult rfe_select(const data::LabeledDataset& train, const RfeOptions& options = {},
                          RfeTrace* trace = nullptr);

struct RfImportanceOptions {
  std::size_t n_trees = 100;
  std::uint64_t seed = 0;
};

/// Features whose forest importance is at least the mean 1/d, by descending importance.
SelectorResult rf_importance_select(const data::LabeledDataset& train,
                                    const RfImportanceOptions& options = {});

struct LassoOptions {
  double tolerance = 1e-6;        // on max |delta beta| over a full sweep
  std::size_t max_sweeps = 10000;
  bool fit_intercept = true;
};

struct LassoFit {
  std::vector<double> coef;
  double intercept = 0.0;
  std::size_t sweeps = 0;
};

/// Cyclic coordinate descent for min (1/2n)||y - b0 - X beta||^2 + alpha ||beta||_1.
/// With fit_intercept the columns and y are centred first. Throws
/// ConvergenceError at the sweep cap.
LassoFit lasso_coordinate_descent(const Matrix& x, std::span<const double> y, double alpha,
                                  const LassoOptions& options = {});

/// One-vs-rest 0/1 regressions; keeps features with a nonzero coefficient in
/// any class. Scores are max_c |beta_cj|. Ordered by descending score.
SelectorResult lasso_select(const data::LabeledDataset& train, double alpha = 0.01,
                            const LassoOptions& options = {});

/// Bisects alpha on a log scale to reach `target_count` selected features.
/// Returns the exact hit or, after `max_steps`, the closest count seen.
SelectorResult lasso_select_count(const data::LabeledDataset& train, std::size_t target_count,
                                  std::size_t max_steps = 60, const LassoOptions& options = {});

/// Top-k principal directions of the centred training matrix by thin SVD.
/// Each direction is oriented so its largest-magnitude entry is positive.
SelectorResult pca_reduce(const data::FeatureMatrix& train, std::size_t k = 512);

/// Selected columns in order, or (m - center) * projection^T for PCA.
data::FeatureMatrix apply_selection(const data::FeatureMatrix& m, const SelectorResult& r);

}  // namespace deepfeat::selection
