#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "deepfeat/data.hpp"
#include "deepfeat/random.hpp"

namespace testutil {

inline deepfeat::data::LabeledDataset dataset(deepfeat::Matrix x, std::vector<int> labels, std::size_t classes) {
  deepfeat::data::LabeledDataset ds;
  const std::size_t d = x.cols();
  ds.matrix = {std::move(x), deepfeat::data::default_feature_ids(d)};
  ds.labels = std::move(labels);
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  return ds;
}

inline deepfeat::Matrix gaussian(deepfeat::Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  deepfeat::Matrix m(r, c);
  for (auto& v : m.values()) v = scale * rng.normal();
  return m;
}

/// Labels 0..C-1 cycling, so every class is populated when n >= C.
inline std::vector<int> cycling(std::size_t n, std::size_t classes) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  return y;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("deepfeat-test-" + std::to_string(deepfeat::Rng(std::random_device{}()).next()));
    std::filesystem::create_directories(path);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testutil
