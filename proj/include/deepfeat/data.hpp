#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepfeat/matrix.hpp"

namespace deepfeat::data {

/// n x d feature values with one identifier per column.
struct FeatureMatrix {
  Matrix values;
  std::vector<std::string> feature_ids;

  [[nodiscard]] std::size_t n() const noexcept { return values.rows(); }
  [[nodiscard]] std::size_t d() const noexcept { return values.cols(); }

  /// Throws DataError when shape, id count, or finiteness is violated.
  void validate() const;
};

/// Default identifiers f0..f{d-1}.
std::vector<std::string> default_feature_ids(std::size_t d);

struct LabeledDataset {
  FeatureMatrix matrix;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<std::string> ids;  // per-row sample identifiers, may be empty

  [[nodiscard]] std::size_t n() const noexcept { return matrix.n(); }
  [[nodiscard]] std::size_t d() const noexcept { return matrix.d(); }
  [[nodiscard]] std::size_t num_classes() const noexcept { return class_names.size(); }
  [[nodiscard]] std::vector<std::size_t> class_counts() const;

  void validate() const;
  /// validate() plus: every class has at least one sample.
  void validate_for_training() const;
};

/// Rows in the given order. Ids follow when present.
[[nodiscard]] LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> rows);

/// Sidecar manifest describing a feature CSV.
struct Manifest {
  std::string extractor_model;
  std::size_t feature_dim = 0;
  std::vector<std::string> class_names;
  std::string image_size = "320x240";
  std::string extractor_version;
};

inline const std::vector<std::string>& known_extractor_models() {
  static const std::vector<std::string> models{"resnet101", "vgg19", "inceptionv3", "densenet121",
                                               "mobilenetv2"};
  return models;
}

/// `features.csv` -> `features.manifest.json`.
std::filesystem::path manifest_path_for(const std::filesystem::path& csv_path);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Parses a feature CSV and its sidecar manifest.
///
/// Header is `id,label,<feature columns...>`; `label` holds a class name from
/// the manifest, whose order defines label integers. Errors carry the 1-based
/// data row and column name.
LabeledDataset load_feature_csv(const std::filesystem::path& path);

/// Same parse from in-memory text, with an explicit class table.
LabeledDataset parse_feature_csv(std::string_view text, const std::vector<std::string>& class_names,
                                 const std::string& source = "<memory>");

/// Writes CSV (shortest round-trip float formatting) and the sidecar manifest.
void export_feature_csv(const LabeledDataset& ds, const Manifest& manifest,
                        const std::filesystem::path& path);

struct ScalerParams {
  std::vector<double> mins;
  std::vector<double> maxs;

  /// (x - min) / (max - min), unclipped; constant columns map to 0.
  [[nodiscard]] FeatureMatrix transform(const FeatureMatrix& m) const;
};

[[nodiscard]] ScalerParams fit_minmax(const FeatureMatrix& train);

/// Fits on `train`, transforms `apply_to`.
[[nodiscard]] std::pair<ScalerParams, FeatureMatrix> minmax_scale(const FeatureMatrix& train,
                                                                  const FeatureMatrix& apply_to);

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct Split {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::size_t> train_rows;  // indices into the source dataset, ascending
  std::vector<std::size_t> test_rows;
};

/// Per-class test counts: half-up round(count * fraction), at least 1.
[[nodiscard]] std::vector<std::size_t> stratified_test_counts(std::span<const std::size_t> counts,
                                                              double test_fraction);

/// Shuffles each class with a seeded Rng and takes the leading test_count
/// indices for the test side. Both sides keep source row order.
[[nodiscard]] Split stratified_split(const LabeledDataset& ds, const SplitSpec& spec);

struct BlobSpec {
  std::size_t n = 800;
  std::size_t d = 500;
  std::size_t classes = 4;
  double center_scale = 1.0;  // per-coordinate spread of class centres
  double noise = 1.0;         // per-coordinate sample spread
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian blobs, one centre per class, labels cycling 0..C-1.
/// Four classes are named after the leukemia subtypes, others c0, c1, ...
[[nodiscard]] LabeledDataset make_blobs(const BlobSpec& spec);

}  // namespace deepfeat::data
