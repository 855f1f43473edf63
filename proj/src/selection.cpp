#include "deepfeat/selection.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "deepfeat/classifiers.hpp"
#include "deepfeat/codec.hpp"
#include "deepfeat/error.hpp"
#include "deepfeat/kernels.hpp"

namespace deepfeat::selection {

namespace {

void require_k(std::size_t k, std::size_t d, std::string_view who) {
  if (k == 0) throw std::invalid_argument(std::string(who) + ": k must be positive");
  if (k > d)
    throw std::invalid_argument(std::string(who) + ": k = " + std::to_string(k) + " exceeds d = " +
                                std::to_string(d));
}

/// Indices ordered by descending score, ties to the lower index.
std::vector<std::size_t> rank_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// Column-major centred copy of x plus column means.
struct CentredColumns {
  std::vector<std::vector<double>> cols;
  std::vector<double> means;
  std::vector<double> sq_norm;  // (1/n) ||x_j||^2
};

CentredColumns centre_columns(const Matrix& x, bool centre) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  CentredColumns c;
  c.cols.assign(d, std::vector<double>(n));
  c.means.assign(d, 0.0);
  c.sq_norm.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    auto& col = c.cols[j];
    for (std::size_t i = 0; i < n; ++i) col[i] = x(i, j);
    if (centre) {
      const double m = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
      c.means[j] = m;
      for (auto& v : col) v -= m;
    }
    double s = 0.0;
    for (double v : col) s += v * v;
    c.sq_norm[j] = s / static_cast<double>(n);
  }
  return c;
}

LassoFit lasso_on_columns(const CentredColumns& xc, std::vector<double> y, double alpha,
                          const LassoOptions& options) {
  const std::size_t d = xc.cols.size();
  const std::size_t n = y.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double y_mean = 0.0;
  if (options.fit_intercept) {
    y_mean = std::accumulate(y.begin(), y.end(), 0.0) * inv_n;
    for (auto& v : y) v -= y_mean;
  }
  LassoFit fit;
  fit.coef.assign(d, 0.0);
  std::vector<double>& beta = fit.coef;
  std::vector<double> r = y;  // residual y - X beta

  const auto update = [&](std::size_t j) {
    if (xc.sq_norm[j] == 0.0) return 0.0;
    const auto& col = xc.cols[j];
    double rho = 0.0;
    for (std::size_t i = 0; i < n; ++i) rho += col[i] * r[i];
    rho = rho * inv_n + xc.sq_norm[j] * beta[j];
    const double next = soft_threshold(rho, alpha) / xc.sq_norm[j];
    const double delta = next - beta[j];
    if (delta != 0.0) {
      for (std::size_t i = 0; i < n; ++i) r[i] -= col[i] * delta;
      beta[j] = next;
    }
    return std::abs(delta);
  };

  // Full sweeps alternate with sweeps over the active set until a full
  // sweep moves no coefficient by more than the tolerance.
  std::size_t sweeps = 0;
  bool converged = false;
  while (sweeps < options.max_sweeps) {
    double max_delta = 0.0;
    for (std::size_t j = 0; j < d; ++j) max_delta = std::max(max_delta, update(j));
    ++sweeps;
    if (max_delta < options.tolerance) {
      converged = true;
      break;
    }
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < d; ++j)
      if (beta[j] != 0.0) active.push_back(j);
    while (sweeps < options.max_sweeps) {
      double active_delta = 0.0;
      for (auto j : active) active_delta = std::max(active_delta, update(j));
      ++sweeps;
      if (active_delta < options.tolerance) break;
    }
  }
  if (!converged)
    throw ConvergenceError("lasso: coordinate descent did not converge within " +
                           std::to_string(options.max_sweeps) + " sweeps (alpha = " +
                           std::to_string(alpha) + ")");
  fit.sweeps = sweeps;
  fit.intercept = y_mean;
  for (std::size_t j = 0; j < d; ++j) fit.intercept -= xc.means[j] * beta[j];
  return fit;
}

SelectorResult lasso_from_columns(const data::LabeledDataset& train, const CentredColumns& xc,
                                  double alpha, const LassoOptions& options) {
  const std::size_t d = train.d();
  SelectorResult r;
  r.kind = SelectorKind::Lasso;
  r.input_dim = d;
  r.scores.assign(d, 0.0);
  std::vector<double> y(train.n());
  for (std::size_t c = 0; c < train.num_classes(); ++c) {
    for (std::size_t i = 0; i < train.n(); ++i) y[i] = train.labels[i] == static_cast<int>(c) ? 1.0 : 0.0;
    const auto fit = lasso_on_columns(xc, y, alpha, options);
    for (std::size_t j = 0; j < d; ++j) r.scores[j] = std::max(r.scores[j], std::abs(fit.coef[j]));
  }
  for (auto j : rank_descending(r.scores))
    if (r.scores[j] > 0.0) r.selected.push_back(j);
  r.parameters["alpha"] = alpha;
  return r;
}

double lasso_alpha_max(const data::LabeledDataset& train, const CentredColumns& xc) {
  const std::size_t n = train.n();
  double best = 0.0;
  for (std::size_t c = 0; c < train.num_classes(); ++c) {
    double mean = 0.0;
    for (int l : train.labels) mean += l == static_cast<int>(c) ? 1.0 : 0.0;
    mean /= static_cast<double>(n);
    for (const auto& col : xc.cols) {
      double g = 0.0;
      for (std::size_t i = 0; i < n; ++i) g += col[i] * ((train.labels[i] == static_cast<int>(c) ? 1.0 : 0.0) - mean);
      best = std::max(best, std::abs(g) / static_cast<double>(n));
    }
  }
  return best;
}

}  // namespace

std::string_view kind_name(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::Anova: return "anova";
    case SelectorKind::Rfe: return "rfe";
    case SelectorKind::RfImportance: return "rf_importance";
    case SelectorKind::Lasso: return "lasso";
    case SelectorKind::Pca: return "pca";
  }
  return "?";
}

std::string_view display_name(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::Anova: return "ANOVA";
    case SelectorKind::Rfe: return "RFE";
    case SelectorKind::RfImportance: return "Random Forest";
    case SelectorKind::Lasso: return "Lasso";
    case SelectorKind::Pca: return "PCA";
  }
  return "?";
}

SelectorKind kind_from_name(std::string_view name) {
  for (auto k : {SelectorKind::Anova, SelectorKind::Rfe, SelectorKind::RfImportance, SelectorKind::Lasso,
                 SelectorKind::Pca})
    if (kind_name(k) == name) return k;
  throw ConfigError("unknown selector kind '" + std::string(name) + "'");
}

void SelectorResult::validate() const {
  if (kind == SelectorKind::Pca) {
    if (!selected.empty()) throw DataError("PCA result must not list selected indices");
    if (!projection || !center) throw DataError("PCA result lacks projection or center");
    if (projection->cols() != input_dim || center->size() != input_dim)
      throw DataError("PCA projection width does not match input dimension");
    if (scores.size() != projection->rows()) throw DataError("PCA scores must hold one variance per component");
    return;
  }
  if (projection || center) throw DataError("only PCA results carry a projection");
  if (scores.size() != input_dim) throw DataError("scores length must equal input dimension");
  std::set<std::size_t> seen;
  for (auto j : selected) {
    if (j >= input_dim) throw DataError("selected index " + std::to_string(j) + " out of range");
    if (!seen.insert(j).second) throw DataError("duplicate selected index " + std::to_string(j));
  }
}

nlohmann::ordered_json SelectorResult::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "deepfeat.selector";
  j["version"] = kSelectorFormatVersion;
  j["kind"] = kind_name(kind);
  j["input_dim"] = input_dim;
  j["parameters"] = parameters;
  j["selected"] = selected;
  j["scores"] = scores;
  if (projection) j["projection"] = codec::matrix_to_json(*projection);
  if (center) j["center"] = codec::encode_f64(*center);
  return j;
}

SelectorResult SelectorResult::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "deepfeat.selector") throw DataError("not a selector document");
  const int version = j.at("version").get<int>();
  if (version != kSelectorFormatVersion)
    throw DataError("unsupported selector document version " + std::to_string(version));
  SelectorResult r;
  r.kind = kind_from_name(j.at("kind").get<std::string>());
  r.input_dim = j.at("input_dim").get<std::size_t>();
  r.parameters = j.at("parameters");
  r.selected = j.at("selected").get<std::vector<std::size_t>>();
  r.scores = j.at("scores").get<std::vector<double>>();
  if (j.contains("projection")) r.projection = codec::matrix_from_json(j.at("projection"));
  if (j.contains("center")) r.center = codec::decode_f64(j.at("center").get<std::string>());
  r.validate();
  return r;
}

SelectorResult anova_select(const data::LabeledDataset& train, std::size_t k) {
  train.validate();
  require_k(k, train.d(), "anova");
  SelectorResult r;
  r.kind = SelectorKind::Anova;
  r.input_dim = train.d();
  r.scores = kernels::anova_f(train.matrix.values, train.labels, train.num_classes());
  const auto order = rank_descending(r.scores);
  r.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  r.parameters["k"] = k;
  return r;
}

SelectorResult rfe_select(const data::LabeledDataset& train, const RfeOptions& options, RfeTrace* trace) {
  train.validate_for_training();
  const std::size_t d = train.d();
  require_k(options.k, d, "rfe");
  if (!(options.step_fraction > 0.0 && options.step_fraction < 1.0))
    throw std::invalid_argument("rfe: step_fraction must lie in (0, 1)");

  std::vector<std::size_t> remaining(d);
  std::iota(remaining.begin(), remaining.end(), 0);
  if (trace) trace->assign(1, remaining);

  SelectorResult r;
  r.kind = SelectorKind::Rfe;
  r.input_dim = d;
  r.scores.assign(d, 0.0);
  r.parameters["k"] = options.k;
  r.parameters["step_fraction"] = options.step_fraction;
  r.parameters["C"] = options.C;

  classifiers::SvmParams svm;
  svm.kernel = kernels::KernelType::Linear;
  svm.C = options.C;

  std::vector<double> weight;  // aggregated |w| for `remaining`, from the latest fit
  std::size_t round = 0;
  while (remaining.size() > options.k) {
    ++round;
    data::LabeledDataset sub = train;
    sub.matrix.values = train.matrix.values.select_cols(remaining);
    sub.matrix.feature_ids.clear();
    for (auto j : remaining) sub.matrix.feature_ids.push_back(train.matrix.feature_ids[j]);

    classifiers::SvmModel model;
    try {
      model = classifiers::SvmModel::fit(sub, svm);
    } catch (const std::exception& e) {
      throw std::runtime_error("rfe round " + std::to_string(round) + ": " + e.what());
    }
    weight.assign(remaining.size(), 0.0);
    for (const auto& m : model.machines()) {
      const auto w = m.linear_weights();
      for (std::size_t t = 0; t < w.size(); ++t) weight[t] += w[t] * w[t];
    }
    for (auto& v : weight) v = std::sqrt(v);

    const auto step = static_cast<std::size_t>(
        std::ceil(options.step_fraction * static_cast<double>(remaining.size())));
    const std::size_t drop = std::min(std::max<std::size_t>(step, 1), remaining.size() - options.k);

    // Positions by ascending weight; equal weights drop the higher index first.
    std::vector<std::size_t> pos(remaining.size());
    std::iota(pos.begin(), pos.end(), 0);
    std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
      return weight[a] < weight[b] || (weight[a] == weight[b] && remaining[a] > remaining[b]);
    });
    std::vector<char> gone(remaining.size(), 0);
    for (std::size_t t = 0; t < drop; ++t) {
      gone[pos[t]] = 1;
      r.scores[remaining[pos[t]]] = static_cast<double>(round);
    }
    std::vector<std::size_t> next;
    std::vector<double> next_weight;
    for (std::size_t t = 0; t < remaining.size(); ++t) {
      if (gone[t]) continue;
      next.push_back(remaining[t]);
      next_weight.push_back(weight[t]);
    }
    remaining = std::move(next);
    weight = std::move(next_weight);
    if (trace) trace->push_back(remaining);
  }

  for (auto j : remaining) r.scores[j] = static_cast<double>(round + 1);
  if (weight.empty()) {
    r.selected = remaining;
  } else {
    for (auto t : rank_descending(weight)) r.selected.push_back(remaining[t]);
  }
  r.parameters["rounds"] = round;
  return r;
}

SelectorResult rf_importance_select(const data::LabeledDataset& train, const RfImportanceOptions& options) {
  train.validate();
  classifiers::ForestParams fp;
  fp.n_trees = options.n_trees;
  fp.seed = options.seed;
  classifiers::ForestModel forest;
  try {
    forest = classifiers::ForestModel::fit(train, fp);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("random forest importance: ") + e.what());
  }
  SelectorResult r;
  r.kind = SelectorKind::RfImportance;
  r.input_dim = train.d();
  r.scores = forest.feature_importances();
  // Relative slack absorbs rounding when all importances equal 1/d.
  const double threshold = (1.0 / static_cast<double>(train.d())) * (1.0 - 1e-12);
  for (auto j : rank_descending(r.scores))
    if (r.scores[j] >= threshold) r.selected.push_back(j);
  r.parameters["n_trees"] = options.n_trees;
  r.parameters["seed"] = options.seed;
  return r;
}

LassoFit lasso_coordinate_descent(const Matrix& x, std::span<const double> y, double alpha,
                                  const LassoOptions& options) {
  if (!(alpha > 0.0)) throw std::invalid_argument("lasso: alpha must be positive");
  if (y.size() != x.rows()) throw std::invalid_argument("lasso: target length != row count");
  if (x.rows() == 0) throw std::invalid_argument("lasso: empty design");
  const auto xc = centre_columns(x, options.fit_intercept);
  return lasso_on_columns(xc, std::vector<double>(y.begin(), y.end()), alpha, options);
}

SelectorResult lasso_select(const data::LabeledDataset& train, double alpha, const LassoOptions& options) {
  train.validate();
  if (!(alpha > 0.0)) throw std::invalid_argument("lasso: alpha must be positive");
  const auto xc = centre_columns(train.matrix.values, options.fit_intercept);
  return lasso_from_columns(train, xc, alpha, options);
}

SelectorResult lasso_select_count(const data::LabeledDataset& train, std::size_t target_count,
                                  std::size_t max_steps, const LassoOptions& options) {
  train.validate();
  require_k(target_count, train.d(), "lasso");
  const auto xc = centre_columns(train.matrix.values, options.fit_intercept);
  const double alpha_max = lasso_alpha_max(train, xc);
  if (!(alpha_max > 0.0)) throw std::invalid_argument("lasso: targets are uncorrelated with every feature");

  double log_hi = std::log(alpha_max);         // selects nothing
  double log_lo = std::log(alpha_max * 1e-6);  // dense end
  const auto miss = [&](const SelectorResult& r) {
    const auto c = r.selected.size();
    return c > target_count ? c - target_count : target_count - c;
  };
  std::optional<SelectorResult> best;
  std::string last_failure;
  for (std::size_t step = 0; step < max_steps && !(best && miss(*best) == 0); ++step) {
    const double mid = 0.5 * (log_lo + log_hi);
    SelectorResult r;
    try {
      r = lasso_from_columns(train, xc, std::exp(mid), options);
    } catch (const ConvergenceError& e) {
      // small alphas with d > n may not settle; treat as too dense
      last_failure = e.what();
      log_lo = mid;
      continue;
    }
    if (!best || miss(r) < miss(*best) || (miss(r) == miss(*best) && r.selected.size() > best->selected.size()))
      best = r;
    if (r.selected.size() > target_count) {
      log_lo = mid;
    } else {
      log_hi = mid;
    }
  }
  if (!best) throw ConvergenceError("lasso: no alpha in the bisection converged: " + last_failure);
  best->parameters["target_count"] = target_count;
  return *best;
}

SelectorResult pca_reduce(const data::FeatureMatrix& train, std::size_t k) {
  const std::size_t n = train.n();
  const std::size_t d = train.d();
  const std::size_t rank_bound = std::min(n > 0 ? n - 1 : 0, d);
  if (k == 0) throw std::invalid_argument("pca: k must be positive");
  if (k > rank_bound)
    throw std::invalid_argument("pca: k = " + std::to_string(k) + " exceeds min(n - 1, d) = " +
                                std::to_string(rank_bound));

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += train.values(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);

  Eigen::MatrixXd xc(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      xc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = train.values(i, j) - mean[j];

  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinV);
  const auto& v = svd.matrixV();
  const auto& s = svd.singularValues();

  SelectorResult r;
  r.kind = SelectorKind::Pca;
  r.input_dim = d;
  Matrix proj(k, d);
  r.scores.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    Eigen::Index lead = 0;
    v.col(col).cwiseAbs().maxCoeff(&lead);
    const double sign = v(lead, col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) proj(c, j) = sign * v(static_cast<Eigen::Index>(j), col);
    r.scores[c] = s(col) * s(col) / static_cast<double>(n - 1);
  }
  r.projection = std::move(proj);
  r.center = std::move(mean);
  r.parameters["k"] = k;
  return r;
}

data::FeatureMatrix apply_selection(const data::FeatureMatrix& m, const SelectorResult& r) {
  if (m.d() != r.input_dim)
    throw std::invalid_argument("apply_selection: matrix has " + std::to_string(m.d()) +
                                " features, selector was fitted on " + std::to_string(r.input_dim));
  data::FeatureMatrix out;
  if (r.kind != SelectorKind::Pca) {
    out.values = m.values.select_cols(r.selected);
    for (auto j : r.selected) out.feature_ids.push_back(m.feature_ids[j]);
    return out;
  }
  const auto& p = *r.projection;
  const auto& c = *r.center;
  out.values = Matrix(m.n(), p.rows());
  std::vector<double> centred(m.d());
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto row = m.values.row(i);
    for (std::size_t j = 0; j < m.d(); ++j) centred[j] = row[j] - c[j];
    for (std::size_t q = 0; q < p.rows(); ++q) {
      const auto basis = p.row(q);
      double s = 0.0;
      for (std::size_t j = 0; j < m.d(); ++j) s += centred[j] * basis[j];
      out.values(i, q) = s;
    }
  }
  for (std::size_t q = 0; q < p.rows(); ++q) out.feature_ids.push_back("pc" + std::to_string(q));
  return out;
}

}  // namespace deepfeat::selection
