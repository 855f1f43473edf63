#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deepfeat/error.hpp"
#include "deepfeat/pipeline.hpp"

namespace pl = deepfeat::pipeline;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kPartial = 3, kIo = 4 };

std::vector<pl::ReportFormat> parse_formats(const std::string& spec) {
  if (spec == "all") return {pl::ReportFormat::Markdown, pl::ReportFormat::Csv, pl::ReportFormat::Json};
  std::vector<pl::ReportFormat> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const auto item = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(pl::report_format_from_name(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

pl::EvaluationReport read_report(const fs::path& dir) {
  const auto path = dir / "report.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw deepfeat::IoError("cannot read " + path.string() + " (run first)");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw deepfeat::IoError(path.string() + ": " + e.what());
  }
  try {
    return pl::EvaluationReport::from_json(j);
  } catch (const deepfeat::DataError& e) {
    throw deepfeat::IoError(path.string() + ": " + e.what());
  }
}

void write_all(const pl::EvaluationReport& r, const std::vector<pl::ReportFormat>& formats, const fs::path& dir) {
  for (auto f : formats) std::cout << "wrote " << pl::emit_report(r, f, dir).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep-feature selection and classification grid runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string formats = "all";
  std::size_t jobs = 1;
  bool no_cache = false;
  bool timestamps = false;

  auto* validate = app.add_subcommand("validate", "Check a config and its datasets");
  validate->add_option("--config", config_path, "Config file")->required();

  auto* run = app.add_subcommand("run", "Run the selector x classifier grid");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--seed", seed, "Run seed (overrides config and DEEPFEAT_SEED)");
  run->add_option("--out", out_dir, "Output directory (overrides config)");
  run->add_option("--format", formats, "markdown, csv, json, a comma list, or all");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--no-cache", no_cache, "Refit selectors even when a cached fit exists");
  run->add_flag("--timestamps", timestamps, "Record wall-clock times in report.json");

  auto* report = app.add_subcommand("report", "Re-render reports from report.json");
  report->add_option("--config", config_path, "Config file (for its output directory)");
  report->add_option("--out", out_dir, "Output directory");
  report->add_option("--format", formats, "markdown, csv, json, a comma list, or all");

  auto* ens = app.add_subcommand("ensemble", "Recompute the ensemble from cached predictions");
  ens->add_option("--config", config_path, "Config file")->required();
  ens->add_option("--out", out_dir, "Output directory (overrides config)");
  ens->add_option("--format", formats, "markdown, csv, json, a comma list, or all");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto fmts = parse_formats(formats);

    if (report->parsed()) {
      fs::path dir = out_dir;
      if (dir.empty()) {
        if (config_path.empty()) throw deepfeat::ConfigError("report: give --out or --config");
        dir = pl::load_config(config_path).output_dir;
      }
      write_all(read_report(dir), fmts, dir);
      return kOk;
    }

    auto cfg = pl::load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    if (validate->parsed()) {
      cfg.validate();
      std::cout << "config ok: " << cfg.datasets.size() << " dataset(s), " << cfg.selectors.size()
                << " selector(s), " << cfg.classifiers.size() << " classifier(s), "
                << cfg.datasets.size() * cfg.selectors.size() * cfg.classifiers.size() << " cells\n";
      return kOk;
    }

    if (run->parsed()) {
      pl::RunOptions opts;
      opts.jobs = jobs;
      opts.seed = seed;
      opts.use_cache = !no_cache;
      opts.timestamps = timestamps;
      const auto r = pl::run_grid(cfg, opts);
      write_all(r, fmts, cfg.output_dir);
      std::size_t failed = 0;
      for (const auto& c : r.cells)
        if (!c.ok()) {
          ++failed;
          std::cerr << "cell failed: " << c.key() << ": " << c.error << "\n";
        }
      if (r.ensemble && !r.ensemble->error.empty()) std::cerr << "ensemble failed: " << r.ensemble->error << "\n";
      std::cout << r.cells.size() - failed << "/" << r.cells.size() << " cells ok\n";
      return r.any_failed() ? kPartial : kOk;
    }

    if (ens->parsed()) {
      auto r = read_report(cfg.output_dir);
      cfg.ensemble.enabled = true;
      r.ensemble = pl::run_ensemble_from_cache(cfg, r, cfg.output_dir);
      write_all(r, fmts, cfg.output_dir);
      if (!r.ensemble->error.empty()) {
        std::cerr << "ensemble failed: " << r.ensemble->error << "\n";
        return kPartial;
      }
      std::cout << "ensemble accuracy " << deepfeat::metrics::format_metric(r.ensemble->metrics->accuracy) << "\n";
      return kOk;
    }
  } catch (const deepfeat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const deepfeat::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
