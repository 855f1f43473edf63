#include "deepfeat/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "deepfeat/error.hpp"
#include "deepfeat/random.hpp"

namespace deepfeat::data {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string location(const std::string& source, std::size_t row, std::string_view column) {
  return source + ": row " + std::to_string(row) + ", column '" + std::string(column) + "'";
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

void FeatureMatrix::validate() const {
  if (values.rows() == 0 || values.cols() == 0) throw DataError("feature matrix must be at least 1x1");
  if (feature_ids.size() != values.cols()) {
    throw DataError("feature matrix has " + std::to_string(values.cols()) + " columns but " +
                    std::to_string(feature_ids.size()) + " feature ids");
  }
  for (std::size_t i = 0; i < values.rows(); ++i)
    for (std::size_t j = 0; j < values.cols(); ++j)
      if (!std::isfinite(values(i, j)))
        throw DataError("non-finite value at row " + std::to_string(i + 1) + ", column " +
                        feature_ids[j]);
}

std::vector<std::string> default_feature_ids(std::size_t d) {
  std::vector<std::string> ids;
  ids.reserve(d);
  for (std::size_t j = 0; j < d; ++j) ids.push_back("f" + std::to_string(j));
  return ids;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

void LabeledDataset::validate() const {
  matrix.validate();
  if (labels.size() != matrix.n())
    throw DataError("label count " + std::to_string(labels.size()) + " != row count " +
                    std::to_string(matrix.n()));
  if (class_names.size() < 2) throw DataError("need at least 2 classes");
  if (!ids.empty() && ids.size() != matrix.n()) throw DataError("id count != row count");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size())
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i + 1) +
                      " outside [0, " + std::to_string(class_names.size()) + ")");
}

void LabeledDataset::validate_for_training() const {
  validate();
  const auto counts = class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0) throw DataError("class '" + class_names[c] + "' has no training samples");
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  LabeledDataset out;
  out.matrix.values = ds.matrix.values.select_rows(rows);
  out.matrix.feature_ids = ds.matrix.feature_ids;
  out.class_names = ds.class_names;
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(ds.labels[r]);
  if (!ds.ids.empty()) {
    out.ids.reserve(rows.size());
    for (auto r : rows) out.ids.push_back(ds.ids[r]);
  }
  return out;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".manifest.json");
  return p;
}

Manifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("manifest not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  Manifest m;
  try {
    m.extractor_model = j.at("extractor_model").get<std::string>();
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.image_size = j.value("image_size", std::string("320x240"));
    m.extractor_version = j.value("extractor_version", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const auto& models = known_extractor_models();
  if (std::find(models.begin(), models.end(), m.extractor_model) == models.end())
    throw DataError(path.string() + ": unknown extractor_model '" + m.extractor_model + "'");
  if (m.class_names.size() < 2) throw DataError(path.string() + ": class_names needs >= 2 entries");
  std::set<std::string> uniq(m.class_names.begin(), m.class_names.end());
  if (uniq.size() != m.class_names.size()) throw DataError(path.string() + ": duplicate class name");
  return m;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["extractor_model"] = m.extractor_model;
  j["feature_dim"] = m.feature_dim;
  j["class_names"] = m.class_names;
  j["image_size"] = m.image_size;
  j["extractor_version"] = m.extractor_version;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

LabeledDataset parse_feature_csv(std::string_view text, const std::vector<std::string>& class_names,
                                 const std::string& source) {
  if (text.empty()) throw DataError(source + ": empty file");

  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw DataError(source + ": empty file");

  const auto header = split_fields(lines[0]);
  std::unordered_map<std::string_view, std::size_t> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty())
      throw DataError(source + ": header column " + std::to_string(c + 1) + " is empty");
    if (!seen.emplace(header[c], c).second)
      throw DataError(source + ": duplicate header field '" + std::string(header[c]) + "'");
  }
  if (!seen.contains("id")) throw DataError(source + ": header missing 'id' field");
  if (!seen.contains("label")) throw DataError(source + ": header missing 'label' field");
  const std::size_t id_col = seen["id"];
  const std::size_t label_col = seen["label"];

  std::vector<std::size_t> feature_cols;
  LabeledDataset ds;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == id_col || c == label_col) continue;
    feature_cols.push_back(c);
    ds.matrix.feature_ids.emplace_back(header[c]);
  }
  if (feature_cols.empty()) throw DataError(source + ": no feature columns");

  std::unordered_map<std::string_view, int> class_index;
  for (std::size_t k = 0; k < class_names.size(); ++k)
    class_index.emplace(class_names[k], static_cast<int>(k));

  const std::size_t n = lines.size() - 1;
  if (n == 0) throw DataError(source + ": no data rows");
  const std::size_t d = feature_cols.size();
  std::vector<double> values;
  values.reserve(n * d);
  ds.labels.reserve(n);
  ds.ids.reserve(n);

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row_no = r + 1;
    const auto fields = split_fields(lines[r + 1]);
    if (fields.size() != header.size())
      throw DataError(source + ": row " + std::to_string(row_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    ds.ids.emplace_back(fields[id_col]);
    const auto label = fields[label_col];
    const auto it = class_index.find(label);
    if (it == class_index.end())
      throw DataError(location(source, row_no, "label") + ": label '" + std::string(label) +
                      "' not in manifest class list");
    ds.labels.push_back(it->second);
    for (const auto c : feature_cols) {
      const auto cell = fields[c];
      if (cell.empty()) throw DataError(location(source, row_no, header[c]) + ": empty feature cell");
      double v = 0.0;
      const auto* first = cell.data();
      if (*first == '+') ++first;
      const auto res = std::from_chars(first, cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw DataError(location(source, row_no, header[c]) + ": non-numeric value '" +
                        std::string(cell) + "'");
      if (!std::isfinite(v))
        throw DataError(location(source, row_no, header[c]) + ": non-finite value '" +
                        std::string(cell) + "'");
      values.push_back(v);
    }
  }
  ds.matrix.values = Matrix(n, d, std::move(values));
  ds.class_names = class_names;
  ds.validate();
  return ds;
}

LabeledDataset load_feature_csv(const std::filesystem::path& path) {
  const auto manifest = read_manifest(manifest_path_for(path));
  if (!std::filesystem::exists(path)) throw IoError("feature CSV not found: " + path.string());
  auto ds = parse_feature_csv(read_text(path), manifest.class_names, path.string());
  if (ds.d() != manifest.feature_dim)
    throw DataError(path.string() + ": " + std::to_string(ds.d()) +
                    " feature columns but manifest feature_dim is " +
                    std::to_string(manifest.feature_dim));
  return ds;
}

void export_feature_csv(const LabeledDataset& ds, const Manifest& manifest,
                        const std::filesystem::path& path) {
  ds.validate();
  std::string out = "id,label";
  for (const auto& f : ds.matrix.feature_ids) {
    out += ',';
    out += f;
  }
  out += '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out += ds.ids.empty() ? "s" + std::to_string(i) : ds.ids[i];
    out += ',';
    out += ds.class_names[static_cast<std::size_t>(ds.labels[i])];
    for (double v : ds.matrix.values.row(i)) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << out;
  if (!f) throw IoError("write failed: " + path.string());
  write_manifest(manifest, manifest_path_for(path));
}

FeatureMatrix ScalerParams::transform(const FeatureMatrix& m) const {
  if (m.d() != mins.size())
    throw DataError("scaler fitted on " + std::to_string(mins.size()) + " features, input has " +
                    std::to_string(m.d()));
  FeatureMatrix out{Matrix(m.n(), m.d()), m.feature_ids};
  for (std::size_t j = 0; j < m.d(); ++j) {
    const double range = maxs[j] - mins[j];
    for (std::size_t i = 0; i < m.n(); ++i)
      out.values(i, j) = range > 0.0 ? (m.values(i, j) - mins[j]) / range : 0.0;
  }
  return out;
}

ScalerParams fit_minmax(const FeatureMatrix& train) {
  if (train.n() == 0) throw DataError("cannot fit scaler on an empty matrix");
  ScalerParams p;
  p.mins.assign(train.values.row(0).begin(), train.values.row(0).end());
  p.maxs = p.mins;
  for (std::size_t i = 1; i < train.n(); ++i) {
    const auto r = train.values.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      p.mins[j] = std::min(p.mins[j], r[j]);
      p.maxs[j] = std::max(p.maxs[j], r[j]);
    }
  }
  return p;
}

std::pair<ScalerParams, FeatureMatrix> minmax_scale(const FeatureMatrix& train,
                                                    const FeatureMatrix& apply_to) {
  if (train.d() != apply_to.d())
    throw DataError("dimension mismatch: scaler input has " + std::to_string(train.d()) +
                    " features, target has " + std::to_string(apply_to.d()));
  auto params = fit_minmax(train);
  auto scaled = params.transform(apply_to);
  return {std::move(params), std::move(scaled)};
}

std::vector<std::size_t> stratified_test_counts(std::span<const std::size_t> counts,
                                                double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must lie strictly between 0 and 1");
  std::vector<std::size_t> out;
  out.reserve(counts.size());
  for (const auto c : counts) {
    // The small offset makes decimal halves (e.g. 0.15 * 10) round up despite binary error.
    const double exact = static_cast<double>(c) * test_fraction;
    auto t = static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9));
    out.push_back(std::max<std::size_t>(t, 1));
  }
  return out;
}

Split stratified_split(const LabeledDataset& ds, const SplitSpec& spec) {
  ds.validate();
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] < 2)
      throw DataError("class '" + ds.class_names[c] + "' has " + std::to_string(counts[c]) +
                      " samples; stratified split needs at least 2");
  const auto test_counts = stratified_test_counts(counts, spec.test_fraction);
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (test_counts[c] >= counts[c])
      throw DataError("test_fraction " + std::to_string(spec.test_fraction) +
                      " leaves no training samples for class '" + ds.class_names[c] + "'");

  std::vector<std::vector<std::size_t>> by_class(counts.size());
  for (std::size_t i = 0; i < ds.n(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  Rng rng(spec.seed);
  std::vector<char> is_test(ds.n(), 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    for (std::size_t t = 0; t < test_counts[c]; ++t) is_test[by_class[c][t]] = 1;
  }

  Split s;
  for (std::size_t i = 0; i < ds.n(); ++i) (is_test[i] ? s.test_rows : s.train_rows).push_back(i);
  s.train = subset(ds, s.train_rows);
  s.test = subset(ds, s.test_rows);
  return s;
}

LabeledDataset make_blobs(const BlobSpec& spec) {
  if (spec.classes < 2 || spec.n < spec.classes || spec.d == 0)
    throw DataError("make_blobs: need n >= classes >= 2 and d >= 1");
  Rng rng(spec.seed);
  Matrix centers(spec.classes, spec.d);
  for (double& v : centers.values()) v = spec.center_scale * rng.normal();
  LabeledDataset ds;
  ds.matrix.values = Matrix(spec.n, spec.d);
  ds.matrix.feature_ids = default_feature_ids(spec.d);
  if (spec.classes == 4) {
    ds.class_names = {"Benign", "Early Pre-B", "Pre-B", "Pro-B"};
  } else {
    for (std::size_t c = 0; c < spec.classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  }
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.classes;
    ds.labels.push_back(static_cast<int>(c));
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    ds.ids.emplace_back(id);
    for (std::size_t j = 0; j < spec.d; ++j) ds.matrix.values(i, j) = centers(c, j) + spec.noise * rng.normal();
  }
  return ds;
}

}  // namespace deepfeat::data
