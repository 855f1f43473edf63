#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "deepfeat/codec.hpp"
#include "deepfeat/data.hpp"
#include "deepfeat/error.hpp"
#include "deepfeat/pipeline.hpp"
#include "deepfeat/random.hpp"

namespace deepfeat::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// File-system-safe name plus a hash of the raw key, so distinct keys never collide.
std::string cache_name(std::string_view key) {
  std::string s;
  for (char c : key) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                      c == '-' || c == '=';
    s += keep ? c : '_';
  }
  return s + "-" + hex64(fnv1a64(key)).substr(0, 8) + ".json";
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::optional<json> read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::uint64_t fingerprint(const data::LabeledDataset& ds) {
  const auto* bytes = reinterpret_cast<const char*>(ds.matrix.values.values().data());
  std::uint64_t h = fnv1a64({bytes, ds.matrix.values.values().size() * sizeof(double)});
  for (int y : ds.labels) h = splitmix64(h ^ static_cast<std::uint64_t>(y));
  return splitmix64(h ^ ds.d());
}

template <class F>
void run_tasks(std::size_t count, std::size_t jobs, F&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
}

struct Prepared {
  std::string error;
  std::size_t feature_dim = 0;
  data::LabeledDataset train;  // scaled
  data::LabeledDataset test;   // scaled
  std::vector<std::size_t> train_rows;
  std::vector<std::string> test_ids;
};

struct Fitted {
  std::string error;
  selection::SelectorResult result;
  data::LabeledDataset train;
  data::LabeledDataset test;
};

struct CachedPrediction {
  std::vector<std::string> ids;
  std::vector<int> y_true;
  std::vector<int> labels;
  Matrix scores;
};

selection::SelectorResult fit_selector(const SelectorSpec& s, const data::LabeledDataset& train, std::uint64_t seed) {
  switch (s.kind) {
    case selection::SelectorKind::Anova: return selection::anova_select(train, s.k);
    case selection::SelectorKind::Rfe: return selection::rfe_select(train, {s.k, s.step_fraction, s.C});
    case selection::SelectorKind::RfImportance: return selection::rf_importance_select(train, {s.n_trees, seed});
    case selection::SelectorKind::Lasso:
      return s.target_count ? selection::lasso_select_count(train, *s.target_count)
                            : selection::lasso_select(train, s.alpha);
    case selection::SelectorKind::Pca: return selection::pca_reduce(train.matrix, s.k);
  }
  throw ConfigError("unknown selector");
}

data::LabeledDataset with_matrix(const data::LabeledDataset& src, data::FeatureMatrix m) {
  data::LabeledDataset out;
  out.matrix = std::move(m);
  out.labels = src.labels;
  out.class_names = src.class_names;
  out.ids = src.ids;
  return out;
}

ordered_json prediction_json(const std::string& cell, const CachedPrediction& p) {
  ordered_json j;
  j["cell"] = cell;
  j["ids"] = p.ids;
  j["y_true"] = p.y_true;
  j["labels"] = p.labels;
  j["scores"] = codec::matrix_to_json(p.scores);
  return j;
}

std::optional<CachedPrediction> load_prediction(const fs::path& out_dir, const std::string& cell) {
  const auto j = read_json(out_dir / "cache" / "predictions" / cache_name(cell));
  if (!j || !j->is_object() || j->value("cell", "") != cell) return std::nullopt;
  CachedPrediction p;
  try {
    p.ids = j->at("ids").get<std::vector<std::string>>();
    p.y_true = j->at("y_true").get<std::vector<int>>();
    p.labels = j->at("labels").get<std::vector<int>>();
    p.scores = codec::matrix_from_json(j->at("scores"));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return p;
}

EnsembleResult evaluate_ensemble(const RunConfig& cfg, const EvaluationReport& report,
                                 const std::function<std::optional<CachedPrediction>(const std::string&)>& lookup) {
  EnsembleResult er;
  er.mode = cfg.ensemble.mode;
  er.weights = cfg.ensemble.weights;
  if (cfg.ensemble.members.empty()) {
    for (const auto& s : report.summaries) er.members.push_back(s.best_cell);
    if (!er.weights.empty() && er.weights.size() != er.members.size()) {
      er.error = "automatic members: " + std::to_string(er.members.size()) + " models succeeded but " +
                 std::to_string(er.weights.size()) + " weights were given";
      return er;
    }
  } else {
    er.members = cfg.ensemble.members;
  }
  if (er.members.empty()) {
    er.error = "no ensemble members";
    return er;
  }
  try {
    ensemble::VoteInput in;
    in.weights = er.weights;
    std::optional<CachedPrediction> first;
    for (const auto& key : er.members) {
      auto p = lookup(key);
      if (!p) throw DataError("no predictions for member '" + key + "'");
      if (!first) {
        first = p;
        in.num_classes = p->scores.cols();
      } else if (p->ids != first->ids || p->y_true != first->y_true) {
        throw DataError("member '" + key + "' was scored on different test rows");
      }
      in.members.push_back({key, p->labels, p->scores});
    }
    const auto combined = cfg.ensemble.mode == VoteMode::Soft
                              ? ensemble::soft_vote(in)
                              : ensemble::hard_vote(in, cfg.ensemble.tie_break);
    const auto cm = metrics::confusion_matrix(first->y_true, combined, in.num_classes);
    er.metrics = metrics::classification_report(cm, cfg.averaging);
  } catch (const std::exception& e) {
    er.error = e.what();
  }
  return er;
}

std::string selector_label(const SelectorSpec& s, const selection::SelectorResult& r) {
  return std::string(selection::display_name(s.kind)) + "(" + std::to_string(r.output_dim()) + ")";
}

}  // namespace

EvaluationReport run_grid(const RunConfig& cfg, const RunOptions& options) {
  cfg.validate();
  EvaluationReport report;
  const std::uint64_t seed = resolve_seed(cfg, options.seed);
  report.provenance.seed = seed;
  report.provenance.config_hash = hex64(fnv1a64(cfg.canonical));
  report.provenance.test_fraction = cfg.test_fraction;
  report.provenance.averaging = cfg.averaging;
  if (options.timestamps) report.provenance.started_at = utc_now();

  const fs::path cache = cfg.output_dir / "cache";
  std::mutex observer_mutex;
  auto observe = [&](std::string_view stage, std::span<const std::size_t> rows) {
    if (!options.fit_observer) return;
    std::lock_guard lock(observer_mutex);
    options.fit_observer(stage, rows);
  };

  const std::size_t M = cfg.datasets.size();
  const std::size_t S = cfg.selectors.size();
  const std::size_t K = cfg.classifiers.size();
  for (const auto& d : cfg.datasets) report.models.push_back(d.model);

  // Load, split, scale.
  std::vector<Prepared> prepared(M);
  run_tasks(M, options.jobs, [&](std::size_t m) {
    auto& p = prepared[m];
    try {
      const auto ds = data::load_feature_csv(cfg.datasets[m].path);
      ds.validate_for_training();
      p.feature_dim = ds.d();
      // one split seed for all models, so row-aligned exports share a test set
      const auto split =
          data::stratified_split(ds, {cfg.test_fraction, derive_seed(seed, "split")});
      observe("scale/" + cfg.datasets[m].model, split.train_rows);
      auto [scaler, train_scaled] = data::minmax_scale(split.train.matrix, split.train.matrix);
      p.train = with_matrix(split.train, std::move(train_scaled));
      p.test = with_matrix(split.test, scaler.transform(split.test.matrix));
      p.train_rows = split.train_rows;
      p.test_ids = split.test.ids;
      if (p.test_ids.empty())
        for (auto r : split.test_rows) p.test_ids.push_back(std::to_string(r));
    } catch (const std::exception& e) {
      p.error = cfg.datasets[m].model + ": " + e.what();
    }
  });

  // Phase one: selectors.
  std::vector<Fitted> fitted(M * S);
  run_tasks(M * S, options.jobs, [&](std::size_t t) {
    const std::size_t m = t / S;
    const auto& spec = cfg.selectors[t % S];
    auto& f = fitted[t];
    const auto& p = prepared[m];
    if (!p.error.empty()) {
      f.error = p.error;
      return;
    }
    const std::string key = cfg.datasets[m].model + "/" + spec.key();
    const std::uint64_t sel_seed = derive_seed(seed, key);
    const std::uint64_t print = fingerprint(p.train);
    const fs::path path = cache / "selectors" / cache_name(key);
    try {
      bool loaded = false;
      if (options.use_cache) {
        if (auto j = read_json(path); j && j->is_object() && j->value("key", "") == key &&
                                      j->value("seed", std::uint64_t{0}) == sel_seed &&
                                      j->value("train_fingerprint", "") == hex64(print) && j->contains("selector")) {
          try {
            f.result = selection::SelectorResult::from_json(j->at("selector"));
            loaded = f.result.input_dim == p.train.d();
          } catch (const std::exception&) {
            loaded = false;
          }
        }
      }
      if (!loaded) {
        observe("select/" + key, p.train_rows);
        f.result = fit_selector(spec, p.train, sel_seed);
        ordered_json doc;
        doc["key"] = key;
        doc["seed"] = sel_seed;
        doc["train_fingerprint"] = hex64(print);
        doc["selector"] = f.result.to_json();
        write_text(path, doc.dump());
      }
      f.train = with_matrix(p.train, selection::apply_selection(p.train.matrix, f.result));
      f.test = with_matrix(p.test, selection::apply_selection(p.test.matrix, f.result));
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      f.error = "selector " + spec.key() + ": " + e.what();
    }
  });

  // Phase two: classifiers.
  report.cells.resize(M * S * K);
  std::map<std::string, CachedPrediction> predictions;
  std::mutex predictions_mutex;
  run_tasks(M * S * K, options.jobs, [&](std::size_t t) {
    const std::size_t m = t / (S * K);
    const std::size_t s = (t / K) % S;
    const auto& spec = cfg.classifiers[t % K];
    auto& cell = report.cells[t];
    const auto& f = fitted[m * S + s];
    cell.model = cfg.datasets[m].model;
    cell.selector_key = cfg.selectors[s].key();
    cell.selector_label = f.error.empty() ? selector_label(cfg.selectors[s], f.result)
                                          : std::string(selection::display_name(cfg.selectors[s].kind));
    cell.classifier_key = spec.key();
    cell.classifier_label = classifiers::display_name(spec.kind());
    if (!f.error.empty()) {
      cell.error = f.error;
      return;
    }
    cell.n_features = f.result.output_dim();
    const std::string key = cell.key();
    try {
      auto params = spec.params;
      if (auto* fp = std::get_if<classifiers::ForestParams>(&params)) fp->seed = derive_seed(seed, key);
      observe("classify/" + key, prepared[m].train_rows);
      const auto model = classifiers::fit_classifier(params, f.train);
      auto pred = model.predict(f.test.matrix.values);
      const auto cm = metrics::confusion_matrix(f.test.labels, pred.labels, f.test.num_classes());
      cell.metrics = metrics::classification_report(cm, cfg.averaging);

      CachedPrediction cp{prepared[m].test_ids, f.test.labels, std::move(pred.labels), std::move(pred.scores)};
      write_text(cache / "classifiers" / cache_name(key), model.to_json().dump());
      write_text(cache / "predictions" / cache_name(key), prediction_json(key, cp).dump());
      std::lock_guard lock(predictions_mutex);
      predictions.emplace(key, std::move(cp));
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      cell.error = "classifier " + cell.classifier_key + ": " + e.what();
    }
  });

  for (std::size_t m = 0; m < M; ++m) {
    const CellResult* best = nullptr;
    for (std::size_t c = m * S * K; c < (m + 1) * S * K; ++c) {
      const auto& cell = report.cells[c];
      if (cell.ok() && (best == nullptr || cell.metrics->accuracy > best->metrics->accuracy)) best = &cell;
    }
    if (best != nullptr) report.summaries.push_back({cfg.datasets[m].model, prepared[m].feature_dim, best->key(), *best->metrics});
  }

  if (cfg.ensemble.enabled) {
    report.ensemble = evaluate_ensemble(cfg, report, [&](const std::string& key) -> std::optional<CachedPrediction> {
      const auto it = predictions.find(key);
      if (it == predictions.end()) return std::nullopt;
      return it->second;
    });
  }
  if (options.timestamps) report.provenance.finished_at = utc_now();
  return report;
}

EnsembleResult run_ensemble_from_cache(const RunConfig& cfg, const EvaluationReport& report,
                                       const fs::path& output_dir) {
  return evaluate_ensemble(cfg, report, [&](const std::string& key) { return load_prediction(output_dir, key); });
}

}  // namespace deepfeat::pipeline
