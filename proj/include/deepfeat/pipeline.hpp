#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepfeat/classifiers.hpp"
#include "deepfeat/ensemble.hpp"
#include "deepfeat/metrics.hpp"
#include "deepfeat/selection.hpp"
#include "json.hpp"

namespace deepfeat::pipeline {

struct DatasetSpec {
  std::string model;
  std::filesystem::path path;
};

struct SelectorSpec {
  selection::SelectorKind kind = selection::SelectorKind::Anova;
  std::size_t k = 0;                        // anova, rfe, pca
  double step_fraction = 0.1;               // rfe
  double C = 1.0;                           // rfe base estimator
  std::size_t n_trees = 100;                // rf_importance
  double alpha = 0.01;                      // lasso
  std::optional<std::size_t> target_count;  // lasso alpha bisection

  /// Canonical parameter string, e.g. "anova(k=500)". Part of cell keys and cache names.
  [[nodiscard]] std::string key() const;
};

struct ClassifierSpec {
  classifiers::ClassifierParams params;

  [[nodiscard]] classifiers::ClassifierKind kind() const { return classifiers::kind_of(params); }
  [[nodiscard]] std::string key() const;  // "svm", "knn(k=3)", ...
};

enum class VoteMode { Hard, Soft };

struct EnsembleSpec {
  bool enabled = true;
  std::vector<std::string> members;  // cell keys; empty selects the best cell of every model
  std::vector<double> weights;
  VoteMode mode = VoteMode::Hard;
  ensemble::TieBreak tie_break = ensemble::TieBreak::LowestIndex;
};

struct RunConfig {
  std::vector<DatasetSpec> datasets;
  double test_fraction = 0.2;
  std::optional<std::uint64_t> seed;
  std::vector<SelectorSpec> selectors;
  std::vector<ClassifierSpec> classifiers;
  EnsembleSpec ensemble;
  metrics::Averaging averaging = metrics::Averaging::Weighted;
  std::filesystem::path output_dir = "out";
  std::string canonical;  // normalized JSON text, hashed into the provenance

  /// Structural checks and file existence. Throws ConfigError.
  void validate() const;
};

/// Parses a config document. Unknown keys anywhere are errors. Relative
/// dataset and output paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Seed resolution: explicit override, then the config, then $DEEPFEAT_SEED, then 0.
std::uint64_t resolve_seed(const RunConfig& cfg, std::optional<std::uint64_t> override_seed);

std::string cell_key(std::string_view model, std::string_view selector_key, std::string_view classifier_key);

struct CellResult {
  std::string model;
  std::string selector_key;
  std::string selector_label;  // "ANOVA(500)", "Lasso(13)", ...
  std::string classifier_key;
  std::string classifier_label;
  std::size_t n_features = 0;
  std::optional<metrics::MetricRow> metrics;
  std::string error;

  [[nodiscard]] std::string key() const { return cell_key(model, selector_key, classifier_key); }
  [[nodiscard]] bool ok() const { return metrics.has_value(); }
};

struct ModelSummary {
  std::string model;
  std::size_t feature_dim = 0;
  std::string best_cell;
  metrics::MetricRow metrics;
};

struct EnsembleResult {
  std::vector<std::string> members;
  std::vector<double> weights;
  VoteMode mode = VoteMode::Hard;
  std::optional<metrics::MetricRow> metrics;
  std::string error;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  double test_fraction = 0.2;
  metrics::Averaging averaging = metrics::Averaging::Weighted;
  std::optional<std::string> started_at;
  std::optional<std::string> finished_at;
};

struct EvaluationReport {
  std::vector<std::string> models;  // dataset order
  std::vector<CellResult> cells;    // grid order: model, selector, classifier
  std::vector<ModelSummary> summaries;
  std::optional<EnsembleResult> ensemble;
  Provenance provenance;

  [[nodiscard]] bool any_failed() const;
  [[nodiscard]] nlohmann::ordered_json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& j);
};

/// Called with the source-row indices handed to every fit routine.
using FitObserver = std::function<void(std::string_view stage, std::span<const std::size_t> rows)>;

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;  // overrides the config
  bool use_cache = true;
  bool timestamps = false;  // adds wall-clock times to the JSON provenance
  FitObserver fit_observer;
};

/// Phase one fits every selector on the scaled training split of every
/// dataset; phase two fits every classifier on every selection and scores
/// it on the test split. Stage errors are recorded against their cells.
/// Selector fits, fitted classifiers and test predictions are cached under
/// <output_dir>/cache.
EvaluationReport run_grid(const RunConfig& cfg, const RunOptions& options = {});

enum class ReportFormat { Markdown, Csv, Json };

ReportFormat report_format_from_name(std::string_view name);

std::string render_markdown(const EvaluationReport& r);
std::string render_csv(const EvaluationReport& r);
std::string render_json(const EvaluationReport& r);

/// Writes report.md / report.csv / report.json into `dir`. Throws IoError.
std::filesystem::path emit_report(const EvaluationReport& r, ReportFormat format,
                                  const std::filesystem::path& dir);

/// Recomputes the ensemble from cached test predictions of a finished run.
EnsembleResult run_ensemble_from_cache(const RunConfig& cfg, const EvaluationReport& report,
                                       const std::filesystem::path& output_dir);

/// "0.868" -> "86.8", as in the model comparison table.
std::string format_percent(double value);

}  // namespace deepfeat::pipeline
