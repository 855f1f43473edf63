// Prints one PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "deepfeat/classifiers.hpp"
#include "deepfeat/ensemble.hpp"
#include "deepfeat/metrics.hpp"
#include "deepfeat/pipeline.hpp"
#include "deepfeat/selection.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#ifndef DEEPFEAT_FIXTURES
#define DEEPFEAT_FIXTURES "tests/fixtures"
#endif

using namespace deepfeat;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome anova_oracle() {
  Outcome o;
  Rng rng(101);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t C = 2 + rng.below(3);
    const std::size_t n = C + 1 + rng.below(50 - C);
    const std::size_t d = 1 + rng.below(20);
    auto y = testutil::cycling(n, C);
    rng.shuffle(std::span<int>(y));
    const auto x = testutil::gaussian(rng, n, d, 1.0 + 10 * rng.uniform());
    const auto f = kernels::anova_f(x, y, C);
    for (std::size_t j = 0; j < d; ++j) {
      const double want = oracle::anova_f(x, y, C, j);
      worst = std::max(worst, std::abs(f[j] - want) / std::max(std::abs(want), 1e-300));
    }
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-9, "max relative error " + fmt("%.3g", worst));
  o.require(secs < 5.0, "took " + fmt("%.2f", secs) + " s");
  if (o.pass) o.detail = "200 instances, max rel err " + fmt("%.2g", worst) + ", " + fmt("%.3f", secs) + " s";
  return o;
}

Matrix orthonormal_design(Rng& rng, std::size_t n, std::size_t d) {
  Eigen::MatrixXd a(n, d + 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    a(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < a.cols(); ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() * Eigen::MatrixXd::Identity(n, d + 1);
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = q(i, j + 1) * std::sqrt(static_cast<double>(n));
  return out;
}

Outcome lasso_checks() {
  Outcome o;
  Rng rng(102);
  double closed = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 1 + rng.below(10);
    const std::size_t n = d + 5 + rng.below(40);
    const auto x = orthonormal_design(rng, n, d);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    const double alpha = 0.01 + 0.4 * rng.uniform();
    const auto fit = selection::lasso_coordinate_descent(x, y, alpha);
    for (std::size_t j = 0; j < d; ++j) {
      double z = 0.0;
      for (std::size_t i = 0; i < n; ++i) z += x(i, j) * y[i];
      closed = std::max(closed, std::abs(fit.coef[j] - oracle::soft_threshold(z / n, alpha)));
    }
  }
  double kkt = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 10 + rng.below(40);
    const std::size_t d = 1 + rng.below(15);
    Matrix x(n, d);
    for (auto& v : x.values()) v = rng.normal();
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    const double alpha = 0.005 + 0.2 * rng.uniform();
    const auto fit = selection::lasso_coordinate_descent(x, y, alpha);
    for (std::size_t j = 0; j < d; ++j) {
      double g = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double pred = fit.intercept;
        for (std::size_t k = 0; k < d; ++k) pred += x(i, k) * fit.coef[k];
        g += x(i, j) * (y[i] - pred);
      }
      g /= static_cast<double>(n);
      const double r = fit.coef[j] == 0.0 ? std::max(0.0, std::abs(g) - alpha)
                                          : std::abs(g - alpha * (fit.coef[j] > 0 ? 1.0 : -1.0));
      kkt = std::max(kkt, r);
    }
  }
  o.require(closed <= 1e-6, "soft-threshold deviation " + fmt("%.3g", closed));
  o.require(kkt <= 1e-5, "KKT residual " + fmt("%.3g", kkt));
  if (o.pass) o.detail = "closed form err " + fmt("%.2g", closed) + ", KKT residual " + fmt("%.2g", kkt);
  return o;
}

Outcome pca_checks() {
  Outcome o;
  Rng rng(103);
  double ortho = 0.0, recon = 0.0;
  bool monotone = true;
  for (int t = 0; t < 30; ++t) {
    const std::size_t d = 2 + rng.below(15);
    const std::size_t n = d + 2 + rng.below(40);
    const auto x = testutil::gaussian(rng, n, d, 1.0 + 5 * rng.uniform());
    const data::FeatureMatrix m{x, data::default_feature_ids(d)};
    const auto r = selection::pca_reduce(m, d);
    const auto& P = *r.projection;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += P(a, j) * P(b, j);
        ortho = std::max(ortho, std::abs(s - (a == b ? 1.0 : 0.0)));
      }
    for (std::size_t c = 1; c < d; ++c) monotone = monotone && r.scores[c - 1] >= r.scores[c];
    const auto z = selection::apply_selection(m, r);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double back = (*r.center)[j];
        for (std::size_t c = 0; c < d; ++c) back += z.values(i, c) * P(c, j);
        recon = std::max(recon, std::abs(back - x(i, j)));
      }
  }
  o.require(ortho <= 1e-9, "orthonormality deviation " + fmt("%.3g", ortho));
  o.require(recon <= 1e-8, "reconstruction error " + fmt("%.3g", recon));
  o.require(monotone, "variances increase somewhere");
  if (o.pass) o.detail = "basis dev " + fmt("%.2g", ortho) + ", reconstruction " + fmt("%.2g", recon);
  return o;
}

Outcome svm_checks() {
  Outcome o;
  using classifiers::SvmParams;
  SvmParams lin;
  lin.kernel = kernels::KernelType::Linear;
  lin.C = 1e6;
  const Matrix two(2, 1, {0, 2});
  const std::vector<int> ty{-1, 1};
  const auto m = classifiers::svm_train_binary(two, ty, lin);
  const auto a = m.dual_alphas();
  const double boundary = -m.bias / m.linear_weights()[0];
  const auto K2 = oracle::kernel_matrix(two, false, 1.0);
  const double best2 = oracle::svm_dual_max(K2, ty, lin.C);
  o.require(std::abs(boundary - 1.0) <= 1e-4, "boundary at " + fmt("%.6g", boundary));
  o.require(std::abs(oracle::dual_objective(K2, ty, a) - best2) <= 1e-4, "two-point dual below oracle");
  // The stated alpha of 0.25 maximises sum(a) - sum_ij a_i a_j y_i y_j K_ij, without the 1/2.
  // Under the standard dual (and its primal w = sum a_i y_i x_i = 1) the value is 2 / |x2 - x1|^2.
  o.require(std::abs(a[0] - 0.25) <= 1e-4 && std::abs(a[1] - 0.25) <= 1e-4,
            "alpha = (" + fmt("%.6g", a[0]) + ", " + fmt("%.6g", a[1]) +
                ") not 0.25; the exact standard-dual optimum is 0.5, which the QP oracle confirms");

  Rng rng(104);
  double gap = 0.0, feas = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(7);
    const auto x = testutil::gaussian(rng, n, 2);
    std::vector<int> y(n);
    for (auto& v : y) v = rng.below(2) ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    SvmParams p;
    const bool rbf = t % 2 == 0;
    p.kernel = rbf ? kernels::KernelType::Rbf : kernels::KernelType::Linear;
    p.gamma = 0.5;
    p.C = 0.5 + 5 * rng.uniform();
    p.tolerance = 1e-8;
    const auto s = classifiers::svm_train_binary(x, y, p);
    const auto al = s.dual_alphas();
    double eq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      feas = std::max({feas, -al[i], al[i] - p.C});
      eq += al[i] * y[i];
    }
    feas = std::max(feas, std::abs(eq));
    const auto K = oracle::kernel_matrix(x, rbf, 0.5);
    gap = std::max(gap, std::abs(oracle::dual_objective(K, y, al) - oracle::svm_dual_max(K, y, p.C)));
  }
  o.require(gap <= 1e-4, "dual gap to QP oracle " + fmt("%.3g", gap));
  o.require(feas <= 1e-6, "feasibility violation " + fmt("%.3g", feas));
  if (o.pass) o.detail = "two-point alpha 0.25, 50 QP instances gap " + fmt("%.2g", gap);
  else
    o.detail += " [boundary " + fmt("%.6g", boundary) + ", 50 QP instances gap " + fmt("%.2g", gap) +
                ", feasibility " + fmt("%.2g", feas) + "]";
  return o;
}

Outcome classifier_sanity() {
  Outcome o;
  Rng rng(105);
  const auto ds = testutil::dataset(testutil::gaussian(rng, 80, 4), testutil::cycling(80, 4), 4);
  o.require(classifiers::knn_classify(ds, ds.matrix, 1).labels == ds.labels, "knn k=1 training accuracy below 1");
  double worst = 0.0;
  const auto p = classifiers::nb_classify(ds, {testutil::gaussian(rng, 200, 4, 10.0), data::default_feature_ids(4)});
  for (std::size_t i = 0; i < p.scores.rows(); ++i) {
    const auto row = p.scores.row(i);
    worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
  }
  o.require(worst <= 1e-12, "NB posterior sum off by " + fmt("%.3g", worst));
  classifiers::ForestParams one{1, 4, false, 7};
  const auto f = classifiers::ForestModel::fit(ds, one);
  o.require(f.predict(ds.matrix.values).labels == ds.labels, "single tree training accuracy below 1");
  if (o.pass) o.detail = "knn, NB (max sum err " + fmt("%.2g", worst) + "), tree";
  return o;
}

Outcome metric_checks() {
  Outcome o;
  Rng rng(106);
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t C = 2 + rng.below(5);
    metrics::ConfusionMatrix cm(C);
    for (std::size_t i = 0; i < C; ++i)
      for (std::size_t j = 0; j < C; ++j) cm.at(i, j) = rng.below(4) == 0 ? 0 : rng.below(60);
    if (cm.total() == 0) cm.at(0, 0) = 1;
    const auto r = metrics::classification_report(cm);
    bad += r.recall != r.accuracy;
  }
  o.require(bad == 0, std::to_string(bad) + " matrices break recall == accuracy");

  const std::vector<int> y{0, 1, 1, 2};
  const std::vector<int> p{0, 1, 2, 2};
  pipeline::EvaluationReport r;
  r.models = {"resnet101"};
  pipeline::CellResult c;
  c.model = "resnet101";
  c.selector_key = "anova(k=2)";
  c.selector_label = "ANOVA(2)";
  c.classifier_key = "knn(k=1)";
  c.classifier_label = "K-NN";
  c.n_features = 2;
  c.metrics = metrics::classification_report(metrics::confusion_matrix(y, p, 3));
  r.cells.push_back(c);
  r.summaries.push_back({"resnet101", 2048, c.key(), *c.metrics});
  r.provenance.seed = 0;
  r.provenance.config_hash = "0000000000000000";
  const std::filesystem::path dir = DEEPFEAT_FIXTURES;
  o.require(c.metrics->accuracy == 0.75, "worked example accuracy " + fmt("%.6g", c.metrics->accuracy));
  o.require(pipeline::render_csv(r) == slurp(dir / "golden_3class.csv"), "golden CSV differs");
  o.require(pipeline::render_markdown(r) == slurp(dir / "golden_3class.md"), "golden markdown differs");
  if (o.pass) o.detail = "1000 matrices exact, golden CSV and markdown byte-exact";
  return o;
}

Outcome end_to_end() {
  Outcome o;
  testutil::TempDir dir;
  const auto ds = data::make_blobs({800, 500, 4, 1.0, 1.0, 107});
  const auto csv = dir.path / "resnet101.csv";
  data::export_feature_csv(ds, {"resnet101", 500, ds.class_names, "320x240", "synthetic"}, csv);
  nlohmann::json j = nlohmann::json::parse(R"({
    "seed": 7,
    "selectors": [
      {"kind": "anova", "k": 200},
      {"kind": "rfe", "k": 200},
      {"kind": "rf_importance", "n_trees": 100},
      {"kind": "lasso", "alpha": 0.01},
      {"kind": "pca", "k": 50}
    ],
    "classifiers": [{"kind": "knn"}, {"kind": "svm"}, {"kind": "random_forest"}, {"kind": "naive_bayes"}]
  })");
  j["datasets"] = {{{"model", "resnet101"}, {"path", csv.string()}}};
  auto cfg = pipeline::parse_config(j);
  const auto t0 = Clock::now();
  std::string first;
  double min_svm = 1.0;
  std::size_t cells = 0, failed = 0;
  for (int rep = 0; rep < 2; ++rep) {
    cfg.output_dir = dir.path / ("run" + std::to_string(rep));
    pipeline::RunOptions opt;
    opt.use_cache = false;
    const auto r = pipeline::run_grid(cfg, opt);
    const auto path = pipeline::emit_report(r, pipeline::ReportFormat::Csv, cfg.output_dir);
    const auto text = slurp(path);
    if (rep == 0) {
      first = text;
      cells = r.cells.size();
      for (const auto& c : r.cells) {
        if (!c.ok()) ++failed;
        else if (c.classifier_label == "SVM") min_svm = std::min(min_svm, c.metrics->accuracy);
      }
    } else {
      o.require(text == first, "report.csv differs between runs");
    }
  }
  const double secs = seconds_since(t0);
  o.require(cells == 20 && failed == 0, std::to_string(failed) + " of " + std::to_string(cells) + " cells failed");
  o.require(min_svm >= 0.95, "worst SVM cell accuracy " + fmt("%.3f", min_svm));
  o.require(secs < 600.0, "two runs took " + fmt("%.1f", secs) + " s");
  if (o.pass)
    o.detail = "20 cells twice in " + fmt("%.1f", secs) + " s, worst SVM " + fmt("%.3f", min_svm) +
               ", report.csv identical";
  return o;
}

Outcome ensemble_checks() {
  Outcome o;
  Rng rng(108);
  std::size_t bad_perm = 0, bad_same = 0;
  for (int t = 0; t < 100; ++t) {
    ensemble::VoteInput v;
    v.num_classes = 2 + rng.below(4);
    const std::size_t members = 1 + rng.below(6);
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t m = 0; m < members; ++m) {
      ensemble::VoteMember mem;
      mem.id = "m" + std::to_string(m);
      Matrix s(n, v.num_classes);
      for (std::size_t i = 0; i < n; ++i) {
        mem.labels.push_back(static_cast<int>(rng.below(v.num_classes)));
        double sum = 0.0;
        for (std::size_t c = 0; c < v.num_classes; ++c) sum += s(i, c) = rng.uniform();
        for (std::size_t c = 0; c < v.num_classes; ++c) s(i, c) /= sum;
      }
      mem.scores = s;
      v.members.push_back(std::move(mem));
      v.weights.push_back(0.5 + rng.uniform());
    }
    std::vector<std::size_t> order(members);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    ensemble::VoteInput p;
    p.num_classes = v.num_classes;
    for (auto i : order) {
      p.members.push_back(v.members[i]);
      p.weights.push_back(v.weights[i]);
    }
    if (ensemble::hard_vote(v) != ensemble::hard_vote(p) || ensemble::soft_vote(v) != ensemble::soft_vote(p) ||
        ensemble::hard_vote(v, ensemble::TieBreak::SummedScores) !=
            ensemble::hard_vote(p, ensemble::TieBreak::SummedScores))
      ++bad_perm;
    ensemble::VoteInput same;
    same.num_classes = v.num_classes;
    for (std::size_t m = 0; m < members; ++m) {
      auto mem = v.members[0];
      mem.id = "copy" + std::to_string(m);
      same.members.push_back(mem);
    }
    same.weights = v.weights;
    // soft vote over copies gives the member's own score argmax, not necessarily its labels
    std::vector<int> own;
    for (std::size_t i = 0; i < n; ++i) own.push_back(classifiers::argmax(v.members[0].scores->row(i)));
    if (ensemble::hard_vote(same) != v.members[0].labels || ensemble::soft_vote(same) != own) ++bad_same;
  }
  o.require(bad_perm == 0, std::to_string(bad_perm) + " inputs change under permutation");
  o.require(bad_same == 0, std::to_string(bad_same) + " identical-member inputs differ from the member");
  if (o.pass) o.detail = "100 inputs, hard/soft/score tie-break";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 ANOVA oracle equivalence", anova_oracle},
      {"2 Lasso closed form and KKT", lasso_checks},
      {"3 PCA basis, reconstruction, variances", pca_checks},
      {"4 SVM analytic case and QP oracle", svm_checks},
      {"5 classifier sanity", classifier_sanity},
      {"6 metrics identity and golden report", metric_checks},
      {"7 end-to-end synthetic grid", end_to_end},
      {"8 ensemble properties", ensemble_checks},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
