#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "trustbal/linalg.hpp"
#include "trustbal/missing_patterns.hpp"
#include "trustbal/mvn.hpp"
#include "trustbal/series.hpp"

namespace trustbal {

namespace em_detail {

// Adds an escalating diagonal ridge until the matrix factors; returns the
// number of escalations used, -1 when even the largest ridge failed.
inline int ridge_until_pd(Eigen::MatrixXd& sigma) {
  if (linalg::is_positive_definite(sigma)) return 0;
  const int d = static_cast<int>(sigma.rows());
  double ridge = kTol.ridge_scale * sigma.trace() / d;
  if (!(ridge > 0.0)) ridge = kTol.ridge_scale;
  for (int attempt = 1; attempt <= 12; ++attempt) {
    Eigen::MatrixXd candidate = sigma + ridge * Eigen::MatrixXd::Identity(d, d);
    if (linalg::is_positive_definite(candidate)) {
      sigma = candidate;
      return attempt;
    }
    ridge *= 10.0;
  }
  return -1;
}

}  // namespace em_detail

struct EmResult {
  MvnParams params;        // covariance on the (n-1)-denominator convention
  int iterations = 0;
  double log_likelihood = 0.0;  // observed-data log likelihood at the optimum
  bool converged = false;
  int ridge_applications = 0;
};

// Maximum-likelihood fit of a multivariate normal to a matrix with missing
// entries, by EM.  Converges on relative observed-data log-likelihood change
// below kTol.em_rel_loglik or kTol.em_max_iter iterations.  The returned
// covariance is rescaled by n/(n-1) so that complete data reproduces the
// ordinary sample covariance.
inline EmResult em_start(const Eigen::MatrixXd& values,
                         const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& observed,
                         double extra_ridge = 0.0) {
  const int n = static_cast<int>(values.rows());
  const int d = static_cast<int>(values.cols());
  if (n < 2) throw std::invalid_argument("em_start: need at least 2 rows");

  // Column-wise observed moments seed the chain.
  Eigen::VectorXd mu(d);
  Eigen::VectorXd var(d);
  for (int c = 0; c < d; ++c) {
    double sum = 0.0, sum2 = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (!observed(i, c)) continue;
      sum += values(i, c);
      ++count;
    }
    if (count < 2)
      throw std::invalid_argument("em_start: variable " + std::to_string(c) +
                                  " has fewer than 2 observed values");
    mu[c] = sum / count;
    for (int i = 0; i < n; ++i) {
      if (!observed(i, c)) continue;
      const double dlt = values(i, c) - mu[c];
      sum2 += dlt * dlt;
    }
    var[c] = count > 1 ? sum2 / (count - 1) : 1.0;
    if (!(var[c] > 0.0)) var[c] = 1.0;  // constant column; EM needs a PD start
  }
  Eigen::MatrixXd sigma = var.asDiagonal();

  const std::vector<PatternGroup> groups = group_by_pattern(observed);
  EmResult res;

  Eigen::MatrixXd completed(n, d);  // E[y_i | y_obs,i] under current params
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= kTol.em_max_iter; ++iter) {
    Eigen::MatrixXd cond_cov_sum = Eigen::MatrixXd::Zero(d, d);
    double ll = 0.0;

    for (const PatternGroup& g : groups) {
      const int no = static_cast<int>(g.observed.size());
      const int nm = static_cast<int>(g.missing.size());

      Eigen::MatrixXd s_oo(no, no), s_om(no, nm);
      Eigen::VectorXd mu_o(no), mu_m(nm);
      for (int a = 0; a < no; ++a) {
        mu_o[a] = mu[g.observed[a]];
        for (int b = 0; b < no; ++b) s_oo(a, b) = sigma(g.observed[a], g.observed[b]);
        for (int b = 0; b < nm; ++b) s_om(a, b) = sigma(g.observed[a], g.missing[b]);
      }
      for (int b = 0; b < nm; ++b) mu_m[b] = mu[g.missing[b]];

      Eigen::MatrixXd L;
      try {
        L = linalg::cholesky(s_oo);
      } catch (const NotPositiveDefinite&) {
        throw NumericError("em_start: observed-block covariance became singular");
      }
      const double logdet = linalg::chol_log_det(L);
      Eigen::MatrixXd w;  // S_oo^-1 S_om
      Eigen::MatrixXd cond_cov = Eigen::MatrixXd::Zero(nm, nm);
      if (nm > 0) {
        w = linalg::chol_solve(L, s_om);
        Eigen::MatrixXd s_mm(nm, nm);
        for (int a = 0; a < nm; ++a)
          for (int b = 0; b < nm; ++b) s_mm(a, b) = sigma(g.missing[a], g.missing[b]);
        cond_cov = s_mm - s_om.transpose() * w;
      }

      for (int row : g.rows) {
        Eigen::VectorXd y_o(no);
        for (int a = 0; a < no; ++a) y_o[a] = values(row, g.observed[a]);
        const Eigen::VectorXd centered = y_o - mu_o;
        const Eigen::VectorXd half = L.triangularView<Eigen::Lower>().solve(centered);
        ll += -0.5 * (no * std::log(2.0 * std::numbers::pi) + logdet + half.squaredNorm());

        for (int a = 0; a < no; ++a) completed(row, g.observed[a]) = y_o[a];
        if (nm > 0) {
          const Eigen::VectorXd cond_mean = mu_m + w.transpose() * centered;
          for (int b = 0; b < nm; ++b) completed(row, g.missing[b]) = cond_mean[b];
        }
      }
      if (nm > 0) {
        for (int a = 0; a < nm; ++a)
          for (int b = 0; b < nm; ++b)
            cond_cov_sum(g.missing[a], g.missing[b]) += g.rows.size() * cond_cov(a, b);
      }
    }

    // M-step, centered two-pass form.
    mu = completed.colwise().mean();
    Eigen::MatrixXd centered = completed.rowwise() - mu.transpose();
    sigma = (centered.transpose() * centered + cond_cov_sum) / n;
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    if (extra_ridge > 0.0) sigma += extra_ridge * Eigen::MatrixXd::Identity(d, d);
    {
      const int apps = em_detail::ridge_until_pd(sigma);
      if (apps < 0) throw NumericError("em_start: covariance not PD; increase ridge");
      res.ridge_applications += apps > 0 ? 1 : 0;
    }

    res.iterations = iter;
    res.log_likelihood = ll;
    if (std::abs(ll - prev_ll) < kTol.em_rel_loglik * (std::abs(ll) + 1e-12)) {
      res.converged = true;
      break;
    }
    prev_ll = ll;
  }

  res.params.mu = mu;
  res.params.sigma = sigma * (static_cast<double>(n) / (n - 1));
  if (em_detail::ridge_until_pd(res.params.sigma) < 0)
    throw NumericError("em_start: covariance not PD; increase ridge");
  return res;
}

}  // namespace trustbal
