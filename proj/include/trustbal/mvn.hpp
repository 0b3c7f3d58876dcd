#pragma once

#include <Eigen/Dense>
#include <vector>

#include "trustbal/linalg.hpp"
#include "trustbal/rng.hpp"

namespace trustbal {

// Mean vector and covariance of a multivariate normal.
struct MvnParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;

  int dim() const { return static_cast<int>(mu.size()); }
};

// Values observed at a subset of coordinates of a multivariate vector.
struct ObservedSlice {
  std::vector<int> indices;   // distinct, each in [0, d)
  Eigen::VectorXd values;     // same length as indices
};

inline Eigen::VectorXd draw_mvn(const MvnParams& p, RngStream& rng) {
  const Eigen::MatrixXd L = linalg::cholesky(p.sigma);
  Eigen::VectorXd z(p.dim());
  for (int i = 0; i < p.dim(); ++i) z[i] = rng.normal();
  return p.mu + L * z;
}

// Positive-definite draw from the inverse Wishart parameterized so that
// E[draw] = scale / (df - d - 1) for df > d + 1.  Bartlett decomposition of
// the Wishart on the inverse scale, then triangular solves; no rejection.
inline Eigen::MatrixXd draw_inverse_wishart(double df, const Eigen::MatrixXd& scale,
                                            RngStream& rng) {
  const int d = static_cast<int>(scale.rows());
  if (!(df > d - 1))
    throw std::invalid_argument("draw_inverse_wishart: need df > d - 1");
  const Eigen::MatrixXd C = linalg::cholesky(scale);

  // Bartlett factor A (lower): sqrt chi-square diagonal, standard normal
  // below, filled in fixed row-major order.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    A(i, i) = std::sqrt(rng.chi_squared(df - i));
    for (int j = 0; j < i; ++j) A(i, j) = rng.normal();
  }

  // draw = (A^-1 C')' (A^-1 C') ~ IW(df, scale).
  const Eigen::MatrixXd B =
      A.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(C.transpose()));
  Eigen::MatrixXd sigma = B.transpose() * B;
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return sigma;
}

// Exact conditional law of the unobserved coordinates given an observed
// slice:  mu_m + S_mo S_oo^-1 (y_o - mu_o)  and  S_mm - S_mo S_oo^-1 S_om.
// Empty slice returns p unchanged; a fully observed vector yields
// zero-dimensional params.  The missing coordinates keep ascending order.
inline MvnParams conditional_mvn(const MvnParams& p, const ObservedSlice& obs) {
  const int d = p.dim();
  if (static_cast<Eigen::Index>(obs.indices.size()) != obs.values.size())
    throw std::invalid_argument("conditional_mvn: index/value length mismatch");
  if (obs.indices.empty()) return p;

  std::vector<char> seen(d, 0);
  for (int idx : obs.indices) {
    if (idx < 0 || idx >= d) throw std::invalid_argument("conditional_mvn: index out of range");
    if (seen[idx]) throw std::invalid_argument("conditional_mvn: duplicate observed index");
    seen[idx] = 1;
  }
  std::vector<int> missing;
  for (int i = 0; i < d; ++i)
    if (!seen[i]) missing.push_back(i);

  const int no = static_cast<int>(obs.indices.size());
  const int nm = static_cast<int>(missing.size());
  if (nm == 0) return MvnParams{Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)};

  Eigen::MatrixXd s_oo(no, no), s_mo(nm, no), s_mm(nm, nm);
  Eigen::VectorXd mu_o(no), mu_m(nm);
  for (int a = 0; a < no; ++a) {
    mu_o[a] = p.mu[obs.indices[a]];
    for (int b = 0; b < no; ++b) s_oo(a, b) = p.sigma(obs.indices[a], obs.indices[b]);
  }
  for (int a = 0; a < nm; ++a) {
    mu_m[a] = p.mu[missing[a]];
    for (int b = 0; b < no; ++b) s_mo(a, b) = p.sigma(missing[a], obs.indices[b]);
    for (int b = 0; b < nm; ++b) s_mm(a, b) = p.sigma(missing[a], missing[b]);
  }

  Eigen::MatrixXd L;
  try {
    L = linalg::cholesky(s_oo);
  } catch (const NotPositiveDefinite&) {
    throw NumericError("conditional_mvn: observed-block covariance is singular");
  }
  const Eigen::MatrixXd w = linalg::chol_solve(L, s_mo.transpose());  // S_oo^-1 S_om
  MvnParams out;
  out.mu = mu_m + w.transpose() * (obs.values - mu_o);
  Eigen::MatrixXd cov = s_mm - s_mo * w;
  out.sigma = 0.5 * (cov + cov.transpose()).eval();
  return out;
}

}  // namespace trustbal
