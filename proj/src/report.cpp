#include <cmath>
#include <fstream>
#include <sstream>

#include "deepfeat/error.hpp"
#include "deepfeat/pipeline.hpp"

namespace deepfeat::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json metrics_json(const metrics::MetricRow& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["averaging"] = metrics::averaging_name(m.averaging);
  j["support"] = m.support;
  j["class_precision"] = m.class_precision;
  j["class_recall"] = m.class_recall;
  j["class_f1"] = m.class_f1;
  return j;
}

metrics::MetricRow metrics_from_json(const json& j) {
  metrics::MetricRow m;
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.averaging = metrics::averaging_from_name(j.at("averaging").get<std::string>());
  m.support = j.at("support").get<std::vector<std::size_t>>();
  m.class_precision = j.at("class_precision").get<std::vector<double>>();
  m.class_recall = j.at("class_recall").get<std::vector<double>>();
  m.class_f1 = j.at("class_f1").get<std::vector<double>>();
  return m;
}

std::string_view mode_name(VoteMode m) { return m == VoteMode::Soft ? "soft" : "hard"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += (c == '\n') ? ' ' : c;
  }
  return out;
}

}  // namespace

bool EvaluationReport::any_failed() const {
  for (const auto& c : cells)
    if (!c.ok()) return true;
  return ensemble && !ensemble->error.empty();
}

ordered_json EvaluationReport::to_json() const {
  ordered_json j;
  j["format"] = "deepfeat.report";
  j["version"] = 1;
  ordered_json prov;
  prov["seed"] = provenance.seed;
  prov["config_hash"] = provenance.config_hash;
  prov["test_fraction"] = provenance.test_fraction;
  prov["averaging"] = metrics::averaging_name(provenance.averaging);
  if (provenance.started_at) prov["started_at"] = *provenance.started_at;
  if (provenance.finished_at) prov["finished_at"] = *provenance.finished_at;
  j["provenance"] = prov;
  j["models"] = models;
  ordered_json cj = ordered_json::array();
  for (const auto& c : cells) {
    ordered_json e;
    e["key"] = c.key();
    e["model"] = c.model;
    e["selector_key"] = c.selector_key;
    e["selector"] = c.selector_label;
    e["classifier_key"] = c.classifier_key;
    e["classifier"] = c.classifier_label;
    e["n_features"] = c.n_features;
    if (c.metrics) e["metrics"] = metrics_json(*c.metrics);
    if (!c.error.empty()) e["error"] = c.error;
    cj.push_back(e);
  }
  j["cells"] = cj;
  ordered_json sj = ordered_json::array();
  for (const auto& s : summaries) {
    ordered_json e;
    e["model"] = s.model;
    e["feature_dim"] = s.feature_dim;
    e["best_cell"] = s.best_cell;
    e["metrics"] = metrics_json(s.metrics);
    sj.push_back(e);
  }
  j["summaries"] = sj;
  if (ensemble) {
    ordered_json e;
    e["members"] = ensemble->members;
    e["weights"] = ensemble->weights;
    e["mode"] = mode_name(ensemble->mode);
    if (ensemble->metrics) e["metrics"] = metrics_json(*ensemble->metrics);
    if (!ensemble->error.empty()) e["error"] = ensemble->error;
    j["ensemble"] = e;
  }
  return j;
}

EvaluationReport EvaluationReport::from_json(const json& j) {
  try {
    if (j.value("format", "") != "deepfeat.report") throw DataError("not a deepfeat report");
    if (j.value("version", 0) != 1) throw DataError("unsupported report version");
    EvaluationReport r;
    const auto& p = j.at("provenance");
    r.provenance.seed = p.at("seed").get<std::uint64_t>();
    r.provenance.config_hash = p.at("config_hash").get<std::string>();
    r.provenance.test_fraction = p.at("test_fraction").get<double>();
    r.provenance.averaging = metrics::averaging_from_name(p.at("averaging").get<std::string>());
    if (p.contains("started_at")) r.provenance.started_at = p.at("started_at").get<std::string>();
    if (p.contains("finished_at")) r.provenance.finished_at = p.at("finished_at").get<std::string>();
    r.models = j.at("models").get<std::vector<std::string>>();
    for (const auto& e : j.at("cells")) {
      CellResult c;
      c.model = e.at("model").get<std::string>();
      c.selector_key = e.at("selector_key").get<std::string>();
      c.selector_label = e.at("selector").get<std::string>();
      c.classifier_key = e.at("classifier_key").get<std::string>();
      c.classifier_label = e.at("classifier").get<std::string>();
      c.n_features = e.at("n_features").get<std::size_t>();
      if (e.contains("metrics")) c.metrics = metrics_from_json(e.at("metrics"));
      c.error = e.value("error", "");
      if (!c.metrics && c.error.empty()) throw DataError("cell " + c.key() + " has neither metrics nor error");
      r.cells.push_back(std::move(c));
    }
    for (const auto& e : j.at("summaries")) {
      ModelSummary s;
      s.model = e.at("model").get<std::string>();
      s.feature_dim = e.at("feature_dim").get<std::size_t>();
      s.best_cell = e.at("best_cell").get<std::string>();
      s.metrics = metrics_from_json(e.at("metrics"));
      r.summaries.push_back(std::move(s));
    }
    if (j.contains("ensemble")) {
      const auto& e = j.at("ensemble");
      EnsembleResult er;
      er.members = e.at("members").get<std::vector<std::string>>();
      er.weights = e.at("weights").get<std::vector<double>>();
      er.mode = e.at("mode").get<std::string>() == "soft" ? VoteMode::Soft : VoteMode::Hard;
      if (e.contains("metrics")) er.metrics = metrics_from_json(e.at("metrics"));
      er.error = e.value("error", "");
      r.ensemble = std::move(er);
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

ReportFormat report_format_from_name(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

std::string format_percent(double value) {
  // Percent of the 3-decimal reported value, so the two tables agree.
  std::string s = metrics::format_metric(value);
  const bool negative = !s.empty() && s.front() == '-';
  if (negative) s.erase(0, 1);
  const auto dot = s.find('.');
  std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
  frac.resize(3, '0');
  const long long millis = std::stoll(s.substr(0, dot)) * 1000 + std::stoll(frac);
  std::string out = std::to_string(millis / 10);
  if (millis % 10 != 0) out += "." + std::to_string(millis % 10);
  return negative ? "-" + out : out;
}

std::string render_markdown(const EvaluationReport& r) {
  std::ostringstream os;
  os << "# Evaluation report\n";
  std::vector<std::string> failures;
  for (const auto& model : r.models) {
    os << "\n## " << model << "\n\n";
    os << "| Feature Selection Method | Classification Algorithm | Accuracy | Precision | Recall | F1-score |\n";
    os << "|---|---|---|---|---|---|\n";
    for (const auto& c : r.cells) {
      if (c.model != model) continue;
      os << "| " << md_cell(c.selector_label) << " | " << md_cell(c.classifier_label) << " | ";
      if (c.metrics) {
        os << metrics::format_metric(c.metrics->accuracy) << " | " << metrics::format_metric(c.metrics->precision)
           << " | " << metrics::format_metric(c.metrics->recall) << " | " << metrics::format_metric(c.metrics->f1)
           << " |\n";
      } else {
        os << "failed | failed | failed | failed |\n";
        failures.push_back(c.key() + ": " + c.error);
      }
    }
  }

  if (!r.summaries.empty()) {
    os << "\n## Comparison of feature extraction models\n\n";
    os << "| Model | Extracted features | Best cell | Accuracy (%) | Precision (%) | Recall (%) | F1-score (%) |\n";
    os << "|---|---|---|---|---|---|---|\n";
    for (const auto& s : r.summaries) {
      os << "| " << md_cell(s.model) << " | " << s.feature_dim << " | " << md_cell(s.best_cell) << " | "
         << format_percent(s.metrics.accuracy) << " | " << format_percent(s.metrics.precision) << " | "
         << format_percent(s.metrics.recall) << " | " << format_percent(s.metrics.f1) << " |\n";
    }
  }

  if (r.ensemble) {
    const auto& e = *r.ensemble;
    os << "\n## Ensemble (" << mode_name(e.mode) << " vote)\n\n";
    for (std::size_t i = 0; i < e.members.size(); ++i) {
      os << "- " << md_cell(e.members[i]);
      if (!e.weights.empty() && i < e.weights.size()) os << " (weight " << metrics::format_metric(e.weights[i]) << ")";
      os << "\n";
    }
    if (e.metrics) {
      os << "\n| Accuracy | Precision | Recall | F1-score |\n|---|---|---|---|\n";
      os << "| " << metrics::format_metric(e.metrics->accuracy) << " | " << metrics::format_metric(e.metrics->precision)
         << " | " << metrics::format_metric(e.metrics->recall) << " | " << metrics::format_metric(e.metrics->f1)
         << " |\n";
    } else {
      os << "\nEnsemble failed: " << md_cell(e.error) << "\n";
    }
  }

  if (!failures.empty()) {
    os << "\n## Failed cells\n\n";
    for (const auto& f : failures) os << "- " << md_cell(f) << "\n";
  }

  os << "\n## Provenance\n\n";
  os << "- seed: " << r.provenance.seed << "\n";
  os << "- config hash: " << r.provenance.config_hash << "\n";
  os << "- test fraction: " << metrics::format_metric(r.provenance.test_fraction) << "\n";
  os << "- averaging: " << metrics::averaging_name(r.provenance.averaging) << "\n";
  if (r.provenance.started_at) os << "- started: " << *r.provenance.started_at << "\n";
  if (r.provenance.finished_at) os << "- finished: " << *r.provenance.finished_at << "\n";
  return os.str();
}

std::string render_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "model,selector,n_features,classifier,accuracy,precision,recall,f1,status\n";
  for (const auto& c : r.cells) {
    os << csv_field(c.model) << ',' << csv_field(c.selector_label) << ',' << c.n_features << ','
       << csv_field(c.classifier_label) << ',';
    if (c.metrics) {
      os << metrics::format_metric(c.metrics->accuracy) << ',' << metrics::format_metric(c.metrics->precision) << ','
         << metrics::format_metric(c.metrics->recall) << ',' << metrics::format_metric(c.metrics->f1) << ",ok\n";
    } else {
      os << ",,,,failed\n";
    }
  }
  return os.str();
}

std::string render_json(const EvaluationReport& r) { return r.to_json().dump(2) + "\n"; }

fs::path emit_report(const EvaluationReport& r, ReportFormat format, const fs::path& dir) {
  if (r.cells.empty()) throw DataError("emit_report: report has no cells");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  fs::path path;
  std::string text;
  switch (format) {
    case ReportFormat::Markdown:
      path = dir / "report.md";
      text = render_markdown(r);
      break;
    case ReportFormat::Csv:
      path = dir / "report.csv";
      text = render_csv(r);
      break;
    case ReportFormat::Json:
      path = dir / "report.json";
      text = render_json(r);
      break;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
  return path;
}

}  // namespace deepfeat::pipeline
