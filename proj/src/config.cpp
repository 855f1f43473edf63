#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "deepfeat/data.hpp"
#include "deepfeat/error.hpp"
#include "deepfeat/pipeline.hpp"

namespace deepfeat::pipeline {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

// Parsed text gives unsigned numbers; documents built in code may hold signed ones.
bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!non_negative_integer(v)) throw ConfigError(where + ": '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double get_positive(const json& obj, const char* key, double fallback, const std::string& where) {
  const double v = get_or<double>(obj, key, fallback, where);
  if (!(v > 0.0)) throw ConfigError(where + ": '" + key + "' must be positive");
  return v;
}

SelectorSpec parse_selector(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError(where + ": selector needs a 'kind'");
  SelectorSpec s;
  s.kind = selection::kind_from_name(get_or<std::string>(j, "kind", "", where));
  switch (s.kind) {
    case selection::SelectorKind::Anova:
      check_keys(j, {"kind", "k"}, where);
      s.k = get_count(j, "k", 500, where);
      break;
    case selection::SelectorKind::Rfe:
      check_keys(j, {"kind", "k", "step_fraction", "C"}, where);
      s.k = get_count(j, "k", 200, where);
      s.step_fraction = get_positive(j, "step_fraction", 0.1, where);
      if (s.step_fraction >= 1.0) throw ConfigError(where + ": step_fraction must be below 1");
      s.C = get_positive(j, "C", 1.0, where);
      break;
    case selection::SelectorKind::RfImportance:
      check_keys(j, {"kind", "n_trees"}, where);
      s.n_trees = get_count(j, "n_trees", 100, where);
      break;
    case selection::SelectorKind::Lasso:
      check_keys(j, {"kind", "alpha", "target_count"}, where);
      s.alpha = get_positive(j, "alpha", 0.01, where);
      if (j.contains("target_count")) {
        if (j.contains("alpha")) throw ConfigError(where + ": give either 'alpha' or 'target_count'");
        s.target_count = get_count(j, "target_count", 0, where);
      }
      break;
    case selection::SelectorKind::Pca:
      check_keys(j, {"kind", "k"}, where);
      s.k = get_count(j, "k", 512, where);
      break;
  }
  if ((s.kind == selection::SelectorKind::Anova || s.kind == selection::SelectorKind::Rfe ||
       s.kind == selection::SelectorKind::Pca) && s.k == 0)
    throw ConfigError(where + ": k must be positive");
  if (s.kind == selection::SelectorKind::RfImportance && s.n_trees == 0)
    throw ConfigError(where + ": n_trees must be positive");
  if (s.target_count && *s.target_count == 0) throw ConfigError(where + ": target_count must be positive");
  return s;
}

ClassifierSpec parse_classifier(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError(where + ": classifier needs a 'kind'");
  const auto kind = classifiers::kind_from_name(get_or<std::string>(j, "kind", "", where));
  switch (kind) {
    case classifiers::ClassifierKind::Knn: {
      check_keys(j, {"kind", "k"}, where);
      classifiers::KnnParams p;
      p.k = get_count(j, "k", 5, where);
      if (p.k == 0) throw ConfigError(where + ": k must be positive");
      return {p};
    }
    case classifiers::ClassifierKind::Svm: {
      check_keys(j, {"kind", "kernel", "C", "gamma", "tolerance", "max_iterations"}, where);
      classifiers::SvmParams p;
      const auto kernel = get_or<std::string>(j, "kernel", "rbf", where);
      if (kernel == "linear") {
        p.kernel = kernels::KernelType::Linear;
      } else if (kernel != "rbf") {
        throw ConfigError(where + ": kernel must be 'rbf' or 'linear'");
      }
      p.C = get_positive(j, "C", 1.0, where);
      if (j.contains("gamma")) {
        const auto& g = j.at("gamma");
        if (g.is_string()) {
          if (g.get<std::string>() != "scale") throw ConfigError(where + ": gamma must be 'scale' or a number");
        } else {
          p.gamma = get_positive(j, "gamma", 1.0, where);
        }
      }
      p.tolerance = get_positive(j, "tolerance", 1e-3, where);
      p.max_iterations = get_count(j, "max_iterations", 0, where);
      return {p};
    }
    case classifiers::ClassifierKind::RandomForest: {
      check_keys(j, {"kind", "n_trees", "max_features", "bootstrap"}, where);
      classifiers::ForestParams p;
      p.n_trees = get_count(j, "n_trees", 100, where);
      if (p.n_trees == 0) throw ConfigError(where + ": n_trees must be positive");
      p.max_features = get_count(j, "max_features", 0, where);
      p.bootstrap = get_or<bool>(j, "bootstrap", true, where);
      return {p};
    }
    case classifiers::ClassifierKind::NaiveBayes: {
      check_keys(j, {"kind", "var_smoothing"}, where);
      classifiers::NaiveBayesParams p;
      p.var_smoothing = get_positive(j, "var_smoothing", 1e-9, where);
      return {p};
    }
  }
  throw ConfigError(where + ": unreachable");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

std::string SelectorSpec::key() const {
  switch (kind) {
    case selection::SelectorKind::Anova: return "anova(k=" + std::to_string(k) + ")";
    case selection::SelectorKind::Rfe:
      return "rfe(k=" + std::to_string(k) + ",step=" + num(step_fraction) + ",C=" + num(C) + ")";
    case selection::SelectorKind::RfImportance: return "rf_importance(trees=" + std::to_string(n_trees) + ")";
    case selection::SelectorKind::Lasso:
      return target_count ? "lasso(target=" + std::to_string(*target_count) + ")" : "lasso(alpha=" + num(alpha) + ")";
    case selection::SelectorKind::Pca: return "pca(k=" + std::to_string(k) + ")";
  }
  return "?";
}

std::string ClassifierSpec::key() const {
  return std::visit(
      [](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, classifiers::KnnParams>) {
          return "knn(k=" + std::to_string(p.k) + ")";
        } else if constexpr (std::is_same_v<P, classifiers::SvmParams>) {
          std::string s = "svm(";
          s += p.kernel == kernels::KernelType::Linear ? "linear" : "rbf";
          s += ",C=" + num(p.C);
          if (p.kernel == kernels::KernelType::Rbf) s += ",gamma=" + (p.gamma > 0 ? num(p.gamma) : std::string("scale"));
          if (p.tolerance != 1e-3) s += ",tol=" + num(p.tolerance);
          return s + ")";
        } else if constexpr (std::is_same_v<P, classifiers::ForestParams>) {
          std::string s = "random_forest(trees=" + std::to_string(p.n_trees);
          if (p.max_features > 0) s += ",mtry=" + std::to_string(p.max_features);
          if (!p.bootstrap) s += ",no_bootstrap";
          return s + ")";
        } else {
          return "naive_bayes(eps=" + num(p.var_smoothing) + ")";
        }
      },
      params);
}

std::string cell_key(std::string_view model, std::string_view selector_key, std::string_view classifier_key) {
  std::string k(model);
  k += '/';
  k += selector_key;
  k += '/';
  k += classifier_key;
  return k;
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc, {"datasets", "split", "seed", "selectors", "classifiers", "ensemble", "averaging", "output_dir"},
             "config");
  RunConfig cfg;
  cfg.canonical = doc.dump();

  if (!doc.contains("datasets") || !doc.at("datasets").is_array())
    throw ConfigError("config: 'datasets' must be an array");
  std::set<std::string> models;
  for (std::size_t i = 0; i < doc.at("datasets").size(); ++i) {
    const auto& d = doc.at("datasets")[i];
    const std::string where = "datasets[" + std::to_string(i) + "]";
    check_keys(d, {"model", "path"}, where);
    if (!d.contains("model") || !d.contains("path")) throw ConfigError(where + ": needs 'model' and 'path'");
    DatasetSpec ds;
    ds.model = get_or<std::string>(d, "model", "", where);
    ds.path = resolve(base_dir, get_or<std::string>(d, "path", "", where));
    if (!models.insert(ds.model).second) throw ConfigError(where + ": duplicate model '" + ds.model + "'");
    const auto& known = data::known_extractor_models();
    if (std::find(known.begin(), known.end(), ds.model) == known.end())
      throw ConfigError(where + ": unknown extraction model '" + ds.model + "'");
    cfg.datasets.push_back(std::move(ds));
  }

  if (doc.contains("split")) {
    const auto& s = doc.at("split");
    check_keys(s, {"test_fraction"}, "split");
    cfg.test_fraction = get_or<double>(s, "test_fraction", 0.2, "split");
  }
  if (doc.contains("seed")) {
    if (!non_negative_integer(doc.at("seed"))) throw ConfigError("config: 'seed' must be a non-negative integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }

  if (!doc.contains("selectors") || !doc.at("selectors").is_array())
    throw ConfigError("config: 'selectors' must be an array");
  for (std::size_t i = 0; i < doc.at("selectors").size(); ++i)
    cfg.selectors.push_back(parse_selector(doc.at("selectors")[i], "selectors[" + std::to_string(i) + "]"));

  if (!doc.contains("classifiers") || !doc.at("classifiers").is_array())
    throw ConfigError("config: 'classifiers' must be an array");
  for (std::size_t i = 0; i < doc.at("classifiers").size(); ++i)
    cfg.classifiers.push_back(parse_classifier(doc.at("classifiers")[i], "classifiers[" + std::to_string(i) + "]"));

  if (doc.contains("ensemble")) {
    const auto& e = doc.at("ensemble");
    check_keys(e, {"enabled", "members", "weights", "mode", "tie_break"}, "ensemble");
    cfg.ensemble.enabled = get_or<bool>(e, "enabled", true, "ensemble");
    cfg.ensemble.members = get_or<std::vector<std::string>>(e, "members", {}, "ensemble");
    cfg.ensemble.weights = get_or<std::vector<double>>(e, "weights", {}, "ensemble");
    const auto mode = get_or<std::string>(e, "mode", "hard", "ensemble");
    if (mode == "hard") {
      cfg.ensemble.mode = VoteMode::Hard;
    } else if (mode == "soft") {
      cfg.ensemble.mode = VoteMode::Soft;
    } else {
      throw ConfigError("ensemble: mode must be 'hard' or 'soft'");
    }
    const auto tb = get_or<std::string>(e, "tie_break", "lowest", "ensemble");
    if (tb == "lowest") {
      cfg.ensemble.tie_break = ensemble::TieBreak::LowestIndex;
    } else if (tb == "scores") {
      cfg.ensemble.tie_break = ensemble::TieBreak::SummedScores;
    } else {
      throw ConfigError("ensemble: tie_break must be 'lowest' or 'scores'");
    }
    for (double w : cfg.ensemble.weights)
      if (!(w > 0.0)) throw ConfigError("ensemble: weights must be positive");
  }

  if (doc.contains("averaging"))
    cfg.averaging = metrics::averaging_from_name(get_or<std::string>(doc, "averaging", "weighted", "config"));
  if (doc.contains("output_dir")) cfg.output_dir = resolve(base_dir, get_or<std::string>(doc, "output_dir", "out", "config"));
  else cfg.output_dir = resolve(base_dir, "out");

  // Duplicate selector / classifier keys would collide in cell keys.
  std::set<std::string> keys;
  for (const auto& s : cfg.selectors)
    if (!keys.insert(s.key()).second) throw ConfigError("selectors: duplicate entry " + s.key());
  keys.clear();
  for (const auto& c : cfg.classifiers)
    if (!keys.insert(c.key()).second) throw ConfigError("classifiers: duplicate entry " + c.key());
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

void RunConfig::validate() const {
  if (datasets.empty()) throw ConfigError("config: at least one dataset is required");
  if (selectors.empty()) throw ConfigError("config: at least one selector is required");
  if (classifiers.empty()) throw ConfigError("config: at least one classifier is required");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("split: test_fraction must lie strictly between 0 and 1");
  for (const auto& d : datasets) {
    if (!std::filesystem::exists(d.path)) throw ConfigError("dataset file not found: " + d.path.string());
    const auto manifest = data::manifest_path_for(d.path);
    if (!std::filesystem::exists(manifest)) throw ConfigError("manifest not found: " + manifest.string());
    data::Manifest m;
    try {
      m = data::read_manifest(manifest);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    if (m.extractor_model != d.model)
      throw ConfigError(manifest.string() + ": extractor_model '" + m.extractor_model + "' but config says '" +
                        d.model + "'");
  }
  if (!ensemble.members.empty() && !ensemble.weights.empty() && ensemble.weights.size() != ensemble.members.size())
    throw ConfigError("ensemble: weights count must match members count");
  if (ensemble.members.empty() && !ensemble.weights.empty() && ensemble.weights.size() != datasets.size())
    throw ConfigError("ensemble: with automatic members, give one weight per dataset");
}

std::uint64_t resolve_seed(const RunConfig& cfg, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("DEEPFEAT_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t v = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw ConfigError("DEEPFEAT_SEED is not an unsigned integer: '" + std::string(s) + "'");
    return v;
  }
  return 0;
}

}  // namespace deepfeat::pipeline
