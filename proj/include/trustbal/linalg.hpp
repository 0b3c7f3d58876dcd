#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "trustbal/errors.hpp"

namespace trustbal {

// Normative numeric tolerances, centralized.  Tests assert against these
// same constants.
struct Tolerances {
  double cholesky_rel = 1e-10;   // ‖L·Lᵀ − Σ‖_F / ‖Σ‖_F
  double symmetry_rel = 1e-8;    // accepted asymmetry before erroring
  double em_rel_loglik = 1e-8;   // EM convergence on relative change
  int em_max_iter = 500;
  double ridge_scale = 1e-8;     // auto-ridge: ridge_scale * trace(S)/d
};

inline constexpr Tolerances kTol{};

namespace linalg {

inline void require_symmetric(const Eigen::MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) throw std::invalid_argument(std::string(what) + ": matrix not square");
  const double scale = a.cwiseAbs().maxCoeff();
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > kTol.symmetry_rel * std::max(scale, 1.0))
    throw std::invalid_argument(std::string(what) + ": matrix not symmetric");
}

// Lower-triangular L with L·Lᵀ = sigma.  Throws NotPositiveDefinite with the
// 0-based index of the first nonpositive pivot.
inline Eigen::MatrixXd cholesky(const Eigen::MatrixXd& sigma) {
  require_symmetric(sigma, "cholesky");
  const Eigen::Index d = sigma.rows();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double diag = sigma(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag))
      throw NotPositiveDefinite(static_cast<int>(j));
    L(j, j) = std::sqrt(diag);
    for (Eigen::Index i = j + 1; i < d; ++i) {
      double s = sigma(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

inline bool is_positive_definite(const Eigen::MatrixXd& sigma) {
  try {
    cholesky(sigma);
    return true;
  } catch (const NumericError&) {
    return false;
  }
}

// Solve A·x = b for SPD A using an already computed Cholesky factor.
inline Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& L, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd y = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

inline double chol_log_det(const Eigen::MatrixXd& L) {
  return 2.0 * L.diagonal().array().log().sum();
}

// Spectral radius (max |eigenvalue|) of a general square matrix.
inline double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace linalg
}  // namespace trustbal
