#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "trustbal/linalg.hpp"
#include "trustbal/rng.hpp"

namespace trustbal {

// Vector autoregression X_t = M [+ trend*t] + sum_i Phi_i X_{t-i} + Z_t with
// Z_t ~ N(0, innovation_cov).  Rows of a series matrix are time points,
// columns are the k component series.
struct VarModel {
  int k = 0;
  int p = 0;
  Eigen::VectorXd intercept;            // M, length k
  std::vector<Eigen::MatrixXd> coeffs;  // Phi_1..Phi_p, each k x k
  Eigen::MatrixXd innovation_cov;       // Sigma_Z, dof-corrected
  std::optional<Eigen::VectorXd> trend; // slope per series, when fitted

  // Per-equation regressor count: intercept + lags (+ trend).
  int regressors_per_equation() const { return k * p + 1 + (trend ? 1 : 0); }
  // Total regression parameter count across the k equations.
  int regression_params() const { return k * regressors_per_equation(); }
};

struct OrderSelection {
  struct Entry {
    int p = 0;
    double aicc = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
  };
  std::vector<Entry> scanned;
  int chosen_p = 0;
  double chosen_aicc = 0.0;
};

// Multivariate least squares of X_t on (1, [t], X_{t-1}, ..., X_{t-p}) over
// t = p+1..n.  Identical regressors per equation make joint estimation and
// per-equation OLS coincide; the innovation covariance uses the
// degrees-of-freedom denominator (n-p) - regressors_per_equation.
inline VarModel fit_var(const Eigen::MatrixXd& series, int p, bool with_trend) {
  const int n = static_cast<int>(series.rows());
  const int k = static_cast<int>(series.cols());
  if (p < 1) throw std::invalid_argument("fit_var: order must be >= 1");
  if (!series.allFinite()) throw std::invalid_argument("fit_var: series has non-finite values");
  const int q = k * p + 1 + (with_trend ? 1 : 0);
  const int n_eff = n - p;
  if (n_eff < q + 2)
    throw std::invalid_argument("fit_var: series too short for order " + std::to_string(p) +
                                " (need n - p >= " + std::to_string(q + 2) + ")");

  Eigen::MatrixXd design(n_eff, q);
  Eigen::MatrixXd response(n_eff, k);
  for (int t = p; t < n; ++t) {
    const int row = t - p;
    int col = 0;
    design(row, col++) = 1.0;
    if (with_trend) design(row, col++) = static_cast<double>(t + 1);  // 1-based time
    for (int lag = 1; lag <= p; ++lag)
      for (int j = 0; j < k; ++j) design(row, col++) = series(t - lag, j);
    response.row(row) = series.row(t);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < q) throw NumericError("fit_var: regressor matrix is rank-deficient");
  const Eigen::MatrixXd beta = qr.solve(response);  // q x k
  const Eigen::MatrixXd resid = response - design * beta;

  VarModel m;
  m.k = k;
  m.p = p;
  m.intercept = beta.row(0).transpose();
  int row0 = 1;
  if (with_trend) {
    m.trend = beta.row(1).transpose();
    row0 = 2;
  }
  m.coeffs.reserve(static_cast<std::size_t>(p));
  for (int lag = 1; lag <= p; ++lag)
    m.coeffs.push_back(beta.block(row0 + (lag - 1) * k, 0, k, k).transpose());
  Eigen::MatrixXd cov = resid.transpose() * resid / (n_eff - q);
  m.innovation_cov = 0.5 * (cov + cov.transpose()).eval();
  return m;
}

// Small-sample-corrected information score; lower is better.
//   AICC = n_eff * ln det(Sigma_ML) + 2 m n_eff / (n_eff - m - 1)
// with Sigma_ML the uncorrected residual covariance and m the parameter
// count: regression parameters only by default, plus the k(k+1)/2
// covariance entries when count_covariance_params is set.
inline double aicc(const VarModel& model, int n_effective, bool count_covariance_params = false) {
  const int q = model.regressors_per_equation();
  int m = model.regression_params();
  if (count_covariance_params) m += model.k * (model.k + 1) / 2;
  if (n_effective <= m + 1)
    throw std::invalid_argument("aicc: correction denominator requires n_eff > m + 1");
  const Eigen::MatrixXd sigma_ml =
      model.innovation_cov * (static_cast<double>(n_effective - q) / n_effective);
  const double logdet = linalg::chol_log_det(linalg::cholesky(sigma_ml));
  return n_effective * logdet +
         2.0 * m * static_cast<double>(n_effective) / (n_effective - m - 1);
}

// Scans orders in [p_lo, p_hi], recording one AICC per order; ties break to
// the smallest order.  Every order is scored over the same effective sample
// (each fit drops the first p_hi - p rows), so the criteria are comparable
// across orders.  Throws only if every fit in the range failed.
inline OrderSelection select_order(const Eigen::MatrixXd& series, int p_lo, int p_hi,
                                   bool with_trend, bool count_covariance_params = false) {
  if (p_lo < 1 || p_hi < p_lo) throw std::invalid_argument("select_order: bad order range");
  const int n = static_cast<int>(series.rows());
  OrderSelection sel;
  for (int p = p_lo; p <= p_hi; ++p) {
    OrderSelection::Entry e;
    e.p = p;
    try {
      const int rows = n - (p_hi - p);
      if (rows < p + 1) throw std::invalid_argument("series too short");
      const Eigen::MatrixXd sub = series.bottomRows(rows);
      const VarModel m = fit_var(sub, p, with_trend);
      e.aicc = aicc(m, rows - p, count_covariance_params);
      e.ok = true;
    } catch (const std::exception&) {
      e.ok = false;
    }
    sel.scanned.push_back(e);
  }
  const OrderSelection::Entry* best = nullptr;
  for (const auto& e : sel.scanned)
    if (e.ok && (!best || e.aicc < best->aicc)) best = &e;
  if (!best) throw NumericError("select_order: every order in the scan range failed to fit");
  sel.chosen_p = best->p;
  sel.chosen_aicc = best->aicc;
  return sel;
}

// Max |eigenvalue| of the companion matrix; < 1 indicates a stationary fit.
// Advisory: callers log a warning on >= 1, they do not abort.
inline double stationarity_check(const VarModel& model) {
  const int kp = model.k * model.p;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(kp, kp);
  for (int lag = 1; lag <= model.p; ++lag)
    companion.block(0, (lag - 1) * model.k, model.k, model.k) =
        model.coeffs[static_cast<std::size_t>(lag - 1)];
  if (model.p > 1)
    companion.block(model.k, 0, kp - model.k, kp - model.k)
        .setIdentity();
  return linalg::spectral_radius(companion);
}

// Generates a fresh realization conditioned on the p presample rows (oldest
// first).  t_first is the 1-based time index of the first simulated step on
// the clock the model was fitted with; it only matters for trend models.
// An exactly zero innovation covariance runs the deterministic recursion.
inline Eigen::MatrixXd simulate_var(const VarModel& model, const Eigen::MatrixXd& presample,
                                    int horizon, RngStream& rng, int t_first = -1) {
  if (presample.rows() != model.p || presample.cols() != model.k)
    throw std::invalid_argument("simulate_var: presample must be p rows by k columns");
  if (horizon < 0) throw std::invalid_argument("simulate_var: negative horizon");
  if (t_first < 0) t_first = model.p + 1;

  const bool noiseless = model.innovation_cov.isZero(0.0);
  Eigen::MatrixXd chol_z;
  if (!noiseless) chol_z = linalg::cholesky(model.innovation_cov);

  Eigen::MatrixXd path(model.p + horizon, model.k);
  path.topRows(model.p) = presample;
  Eigen::VectorXd z(model.k);
  for (int s = 0; s < horizon; ++s) {
    const int pos = model.p + s;
    Eigen::VectorXd x = model.intercept;
    if (model.trend) x += *model.trend * static_cast<double>(t_first + s);
    for (int lag = 1; lag <= model.p; ++lag)
      x += model.coeffs[static_cast<std::size_t>(lag - 1)] * path.row(pos - lag).transpose();
    if (!noiseless) {
      for (int j = 0; j < model.k; ++j) z[j] = rng.normal();
      x += chol_z * z;
    }
    path.row(pos) = x.transpose();
  }
  return path.bottomRows(horizon);
}

}  // namespace trustbal
