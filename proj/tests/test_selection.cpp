#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "deepfeat/classifiers.hpp"
#include "deepfeat/error.hpp"
#include "deepfeat/selection.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace deepfeat;
using namespace deepfeat::selection;
using testutil::dataset;

namespace {

bool unique_in_range(const std::vector<std::size_t>& v, std::size_t d) {
  std::set<std::size_t> s(v.begin(), v.end());
  return s.size() == v.size() && std::all_of(v.begin(), v.end(), [&](std::size_t j) { return j < d; });
}

// Columns of an n x d matrix with zero mean and (1/n) X^T X = I.
Matrix orthonormal_design(Rng& rng, std::size_t n, std::size_t d) {
  Eigen::MatrixXd a(n, d + 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    a(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < a.cols(); ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() * Eigen::MatrixXd::Identity(n, d + 1);
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = q(i, j + 1) * std::sqrt(static_cast<double>(n));
  return out;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("anova matches the brute-force formula") {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t C = 2 + rng.below(3);
    const std::size_t n = C + 1 + rng.below(50 - C);
    const std::size_t d = 1 + rng.below(20);
    auto y = testutil::cycling(n, C);
    rng.shuffle(std::span<int>(y));
    auto x = testutil::gaussian(rng, n, d);
    const auto r = anova_select(dataset(x, y, C), d);
    for (std::size_t j = 0; j < d; ++j) {
      const double want = oracle::anova_f(x, y, C, j);
      CHECK(r.scores[j] == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("anova ranking and limits") {
  const Matrix x(4, 3, {1, 0, 5, 2, 0, 5, 3, 1, 5, 4, 1, 5});
  const auto ds = dataset(x, {0, 0, 1, 1}, 2);
  const auto r = anova_select(ds, 3);
  CHECK(r.scores[0] == doctest::Approx(8.0));
  CHECK(r.scores[2] == 0.0);
  CHECK(r.selected == std::vector<std::size_t>{1, 0, 2});
  CHECK(anova_select(ds, 1).selected == std::vector<std::size_t>{1});
  CHECK_THROWS((void)anova_select(ds, 4));
  CHECK_THROWS((void)anova_select(dataset(x, {0, 0, 0, 0}, 2), 1));
}

TEST_CASE("anova ties go to the lower index") {
  const Matrix x(4, 3, {1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4});
  const auto r = anova_select(dataset(x, {0, 0, 1, 1}, 2), 3);
  CHECK(r.selected == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("anova keeps exactly 500 of 2048") {
  Rng rng(3);
  const auto y = testutil::cycling(60, 4);
  const auto r = anova_select(dataset(testutil::gaussian(rng, 60, 2048), y, 4), 500);
  CHECK(r.selected.size() == 500);
  CHECK(unique_in_range(r.selected, 2048));
  for (std::size_t t = 1; t < r.selected.size(); ++t) CHECK(r.scores[r.selected[t - 1]] >= r.scores[r.selected[t]]);
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("rfe drops the zero-weight feature first") {
  Rng rng(8);
  const std::size_t n = 40;
  Matrix x(n, 5);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    const double s = y[i] ? 1.0 : -1.0;
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = s * (1.0 + 0.2 * j) + 0.3 * rng.normal();
    x(i, 4) = 0.5;
  }
  const auto ds = dataset(x, y, 2);
  // Fit the base estimator once and find the smallest aggregate weight.
  classifiers::SvmParams p;
  p.kernel = kernels::KernelType::Linear;
  const auto model = classifiers::SvmModel::fit(ds, p);
  std::vector<double> agg(5, 0.0);
  for (const auto& m : model.machines()) {
    const auto w = m.linear_weights();
    for (std::size_t j = 0; j < 5; ++j) agg[j] += w[j] * w[j];
  }
  const auto weakest = static_cast<std::size_t>(std::min_element(agg.begin(), agg.end()) - agg.begin());
  CHECK(weakest == 4);
  for (std::size_t j = 0; j < 4; ++j) CHECK(agg[j] > agg[4]);

  RfeTrace trace;
  const auto r = rfe_select(ds, {4, 0.1, 1.0}, &trace);
  REQUIRE(trace.size() == 2);
  CHECK(trace[1] == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(r.scores[4] == 1.0);
  CHECK(r.selected.size() == 4);
}

TEST_CASE("rfe with k = d is the identity") {
  Rng rng(2);
  const auto ds = dataset(testutil::gaussian(rng, 12, 4), testutil::cycling(12, 2), 2);
  RfeTrace trace;
  const auto r = rfe_select(ds, {4, 0.1, 1.0}, &trace);
  CHECK(trace.size() == 1);
  CHECK(r.selected == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(r.parameters["rounds"] == 0);
}

TEST_CASE("rfe reaches 200 of 2048 through nested rounds") {
  Rng rng(4);
  const auto ds = dataset(testutil::gaussian(rng, 40, 2048), testutil::cycling(40, 4), 4);
  RfeTrace trace;
  const auto r = rfe_select(ds, {200, 0.1, 1.0}, &trace);
  CHECK(r.selected.size() == 200);
  CHECK(unique_in_range(r.selected, 2048));
  for (std::size_t t = 1; t < trace.size(); ++t) {
    CHECK(trace[t].size() < trace[t - 1].size());
    CHECK(std::includes(trace[t - 1].begin(), trace[t - 1].end(), trace[t].begin(), trace[t].end()));
    // Each round removes ceil(10%) except the last, which lands on k.
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(0.1 * trace[t - 1].size())),
                                            trace[t - 1].size() - 200);
    CHECK(trace[t - 1].size() - trace[t].size() == want);
  }
  CHECK(trace.back().size() == 200);
  // Survivors carry the highest round score.
  const double top = *std::max_element(r.scores.begin(), r.scores.end());
  for (auto j : r.selected) CHECK(r.scores[j] == top);
}

TEST_CASE("rf importance finds the informative feature") {
  Rng rng(5);
  const std::size_t n = 120;
  Matrix x = testutil::gaussian(rng, n, 10);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    x(i, 3) = y[i] + 0.05 * rng.normal();
  }
  const auto ds = dataset(x, y, 2);
  const auto forest = classifiers::ForestModel::fit(ds, {100, 0, true, 9});
  const auto& imp = forest.feature_importances();
  CHECK(std::max_element(imp.begin(), imp.end()) - imp.begin() == 3);
  CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto r = rf_importance_select(ds, {100, 9});
  CHECK(r.selected.front() == 3);
  for (auto j : r.selected) CHECK(r.scores[j] >= 0.1 * (1 - 1e-12));
  CHECK(r.scores == imp);
}

TEST_CASE("rf importance with equal importances keeps everything") {
  const Matrix x(6, 3, 1.0);
  const auto r = rf_importance_select(dataset(x, testutil::cycling(6, 2), 2), {10, 1});
  CHECK(r.selected.size() == 3);
  for (double s : r.scores) CHECK(s == doctest::Approx(1.0 / 3));
}

TEST_CASE("lasso large alpha selects nothing") {
  Rng rng(6);
  Matrix x(30, 5);
  for (auto& v : x.values()) v = rng.uniform();
  const auto r = lasso_select(dataset(x, testutil::cycling(30, 3), 3), 1e3);
  CHECK(r.selected.empty());
  CHECK_THROWS((void)lasso_select(dataset(x, testutil::cycling(30, 3), 3), 0.0));
  CHECK_THROWS((void)lasso_select(dataset(x, testutil::cycling(30, 3), 3), -1.0));
}

TEST_CASE("lasso equals soft thresholding on orthonormal designs") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(10);
    const std::size_t n = d + 5 + rng.below(30);
    const auto x = orthonormal_design(rng, n, d);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    const double alpha = 0.02 + 0.3 * rng.uniform();
    const auto fit = lasso_coordinate_descent(x, y, alpha);
    for (std::size_t j = 0; j < d; ++j) {
      double ols = 0.0;
      for (std::size_t i = 0; i < n; ++i) ols += x(i, j) * y[i];
      ols /= static_cast<double>(n);
      CHECK(fit.coef[j] == doctest::Approx(oracle::soft_threshold(ols, alpha)).epsilon(1e-6).scale(1.0));
      CHECK((fit.coef[j] != 0.0) == (std::abs(ols) > alpha));
    }
  }
}

TEST_CASE("lasso KKT conditions on random designs") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.below(40);
    const std::size_t d = 1 + rng.below(15);
    Matrix x(n, d);
    for (auto& v : x.values()) v = rng.uniform();
    std::vector<double> y(n);
    for (auto& v : y) v = rng.below(2);
    const double alpha = 0.001 + 0.05 * rng.uniform();
    const auto fit = lasso_coordinate_descent(x, y, alpha);
    for (std::size_t j = 0; j < d; ++j) {
      double g = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double pred = fit.intercept;
        for (std::size_t k = 0; k < d; ++k) pred += x(i, k) * fit.coef[k];
        g += x(i, j) * (y[i] - pred);
      }
      g /= static_cast<double>(n);
      if (fit.coef[j] == 0.0) {
        CHECK(std::abs(g) <= alpha + 1e-5);
      } else {
        CHECK(std::abs(g - alpha * (fit.coef[j] > 0 ? 1.0 : -1.0)) <= 1e-5);
      }
    }
  }
}

TEST_CASE("lasso sweep cap raises") {
  Rng rng(9);
  auto x = testutil::gaussian(rng, 30, 6);
  for (std::size_t i = 0; i < 30; ++i) x(i, 1) = x(i, 0) + 1e-3 * rng.normal();
  std::vector<double> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = x(i, 0) + x(i, 1);
  LassoOptions opt;
  opt.max_sweeps = 1;
  CHECK_THROWS_AS((void)lasso_coordinate_descent(x, y, 1e-4, opt), ConvergenceError);
}

TEST_CASE("lasso bisection reaches a requested count") {
  Rng rng(10);
  Matrix x(80, 30);
  for (auto& v : x.values()) v = rng.uniform();
  auto y = testutil::cycling(80, 2);
  for (std::size_t i = 0; i < 80; ++i)
    for (std::size_t j = 0; j < 6; ++j) x(i, j) = 0.3 * y[i] + 0.7 * rng.uniform();
  const auto ds = dataset(x, y, 2);
  const auto r = lasso_select_count(ds, 5);
  CHECK(r.selected.size() == 5);
  for (auto j : r.selected) CHECK(r.scores[j] > 0.0);
}

TEST_CASE("lasso bisection survives alphas that do not converge") {
  Rng rng(11);
  const std::size_t n = 40, d = 300;
  auto x = testutil::gaussian(rng, n, d);
  const auto y = testutil::cycling(n, 4);
  const auto ds = dataset(x, y, 4);
  LassoOptions tight;
  tight.max_sweeps = 50;
  const auto r = lasso_select_count(ds, 7, 60, tight);
  CHECK(r.selected.size() == 7);
  // nothing converges at all
  LassoOptions hopeless;
  hopeless.max_sweeps = 1;
  hopeless.tolerance = 0.0;
  CHECK_THROWS_AS((void)lasso_select_count(ds, 7, 10, hopeless), ConvergenceError);
}

TEST_CASE("pca of points on a line") {
  const Matrix x(3, 2, {0, 0, 1, 1, 2, 2});
  const auto r = pca_reduce({x, {"a", "b"}}, 1);
  CHECK(r.scores[0] == doctest::Approx(2.0));  // sample variance of {-sqrt2, 0, sqrt2}
  const auto t = apply_selection({x, {"a", "b"}}, r);
  CHECK(t.d() == 1);
  CHECK(std::abs(t.values(0, 0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(t.values(1, 0) == doctest::Approx(0.0).scale(1.0));
  CHECK(t.values(0, 0) == doctest::Approx(-t.values(2, 0)));
  // Two components on rank-one data: the second carries no variance.
  const auto r2 = pca_reduce({Matrix(4, 2, {0, 0, 1, 2, 2, 4, 3, 6}), {"a", "b"}}, 2);
  CHECK(r2.scores[0] / (r2.scores[0] + r2.scores[1]) == doctest::Approx(1.0));
}

TEST_CASE("pca basis, variances and reconstruction") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + rng.below(30);
    const std::size_t d = 2 + rng.below(12);
    const std::size_t k = std::min(n - 1, d);
    const auto x = testutil::gaussian(rng, n, d, 3.0);
    const data::FeatureMatrix m{x, data::default_feature_ids(d)};
    const auto r = pca_reduce(m, k);
    CHECK_NOTHROW(r.validate());
    const auto& P = *r.projection;
    double dev = 0.0;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += P(a, j) * P(b, j);
        dev = std::max(dev, std::abs(s - (a == b ? 1.0 : 0.0)));
      }
    CHECK(dev <= 1e-9);
    for (std::size_t c = 1; c < k; ++c) CHECK(r.scores[c - 1] >= r.scores[c]);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
      mean /= n;
      for (std::size_t i = 0; i < n; ++i) total += (x(i, j) - mean) * (x(i, j) - mean) / (n - 1);
    }
    CHECK(std::accumulate(r.scores.begin(), r.scores.end(), 0.0) <= total + 1e-8);
    const auto t = apply_selection(m, r);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double back = 0.0;
        for (std::size_t c = 0; c < k; ++c) back += t.values(i, c) * P(c, j);
        err = std::max(err, std::abs(back - (x(i, j) - (*r.center)[j])));
      }
    CHECK(err <= 1e-8);
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t big = 0;
      for (std::size_t j = 0; j < d; ++j)
        if (std::abs(P(c, j)) > std::abs(P(c, big))) big = j;
      CHECK(P(c, big) > 0.0);
    }
  }
}

TEST_CASE("pca limits and the 512-component case") {
  Rng rng(13);
  const data::FeatureMatrix small{testutil::gaussian(rng, 4, 6), data::default_feature_ids(6)};
  CHECK_THROWS((void)pca_reduce(small, 4));
  CHECK_NOTHROW((void)pca_reduce(small, 3));
  const data::FeatureMatrix big{testutil::gaussian(rng, 600, 2048), data::default_feature_ids(2048)};
  const auto r = pca_reduce(big, 512);
  const auto t = apply_selection(big, r);
  CHECK(t.d() == 512);
  CHECK(t.n() == 600);
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("apply_selection on index kinds") {
  const Matrix x(2, 3, {1, 2, 3, 4, 5, 6});
  const data::FeatureMatrix m{x, {"a", "b", "c"}};
  SelectorResult id;
  id.kind = SelectorKind::Anova;
  id.input_dim = 3;
  id.selected = {0, 1, 2};
  id.scores = {0, 0, 0};
  CHECK(apply_selection(m, id).values == x);
  SelectorResult re = id;
  re.selected = {2, 0};
  const auto t = apply_selection(m, re);
  CHECK(t.values == Matrix(2, 2, {3, 1, 6, 4}));
  CHECK(t.feature_ids == std::vector<std::string>{"c", "a"});
  const data::FeatureMatrix wrong{Matrix(2, 2), {"a", "b"}};
  CHECK_THROWS((void)apply_selection(wrong, id));
}

TEST_CASE("selector documents round-trip") {
  Rng rng(14);
  const auto ds = dataset(testutil::gaussian(rng, 20, 6), testutil::cycling(20, 2), 2);
  for (const auto& r : {anova_select(ds, 3), pca_reduce(ds.matrix, 2), lasso_select(ds, 0.01)}) {
    const auto j = r.to_json();
    CHECK(j["format"] == "deepfeat.selector");
    const auto back = SelectorResult::from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.selected == r.selected);
    CHECK(back.scores == r.scores);
    CHECK(back.projection == r.projection);
    CHECK(back.center == r.center);
    CHECK(back.kind == r.kind);
  }
  auto j = nlohmann::json::parse(anova_select(ds, 3).to_json().dump());
  j["version"] = 99;
  CHECK_THROWS_AS((void)SelectorResult::from_json(j), DataError);
  j["version"] = 1;
  j["selected"] = {1, 1};
  CHECK_THROWS_AS((void)SelectorResult::from_json(j), DataError);
}

}
