#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "trustbal/em.hpp"
#include "trustbal/linalg.hpp"
#include "trustbal/missing_patterns.hpp"
#include "trustbal/mvn.hpp"
#include "trustbal/rng.hpp"

namespace trustbal {

enum class ChainMode { kIndependentChains, kSingleChainThinned };
enum class ScaleMode { kLog, kRaw };

struct ImputationConfig {
  int n_imputations = 10000;
  int burn_in = 500;
  int iterations_between = 100;  // single-chain spacing
  ChainMode chain_mode = ChainMode::kIndependentChains;
  ScaleMode scale_mode = ScaleMode::kLog;
  double ridge = 0.0;

  void validate() const {
    if (n_imputations < 1) throw std::invalid_argument("n_imputations must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
    if (iterations_between < 1) throw std::invalid_argument("iterations_between must be >= 1");
    if (ridge < 0.0) throw std::invalid_argument("ridge must be >= 0");
  }
};

// A data matrix with every entry present plus the provenance mask saying
// which entries were observed (bit-identical to the input) and which were
// filled in.
struct CompletedMatrix {
  Eigen::MatrixXd values;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> observed;
};

// Optional per-iteration convergence trace: (iteration, mu, log|Sigma|).
using ChainTrace = std::function<void(int, const Eigen::VectorXd&, double)>;

// Complete-data posterior draw: Sigma | Y ~ IW(n-1, (n-1)S), then
// mu | Sigma, Y ~ N(ybar, Sigma/n), with S the (n-1)-denominator sample
// covariance and ybar the sample mean of the completed matrix.
inline MvnParams draw_posterior_params(const Eigen::MatrixXd& completed, RngStream& rng,
                                       double ridge = 0.0, int* ridge_applications = nullptr) {
  const int n = static_cast<int>(completed.rows());
  const int d = static_cast<int>(completed.cols());
  if (n <= d && ridge <= 0.0)
    throw std::invalid_argument("p_step: need n > d or an explicit ridge");
  const Eigen::VectorXd ybar = completed.colwise().mean();
  const Eigen::MatrixXd centered = completed.rowwise() - ybar.transpose();
  Eigen::MatrixXd s = centered.transpose() * centered / (n - 1);
  s = 0.5 * (s + s.transpose()).eval();
  if (ridge > 0.0) s += ridge * Eigen::MatrixXd::Identity(d, d);
  if (!linalg::is_positive_definite(s)) {
    const int apps = em_detail::ridge_until_pd(s);
    if (apps < 0) throw NumericError("p_step: sample covariance not PD even with ridge");
    if (ridge_applications) ++*ridge_applications;
  }
  MvnParams out;
  out.sigma = draw_inverse_wishart(n - 1, (n - 1) * s, rng);
  out.mu = draw_mvn(MvnParams{ybar, out.sigma / n}, rng);
  return out;
}

// ---------------------------------------------------------------------------
// One data-augmentation chain: alternate draws of the missing entries given
// parameters (I-step) and of the parameters given completed data (P-step).
// ---------------------------------------------------------------------------
class DataAugmentationChain {
 public:
  DataAugmentationChain(const Eigen::MatrixXd& values,
                        const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& observed,
                        MvnParams start, double ridge = 0.0)
      : observed_(observed),
        groups_(group_by_pattern(observed)),
        params_(std::move(start)),
        ridge_(ridge),
        completed_(values) {
    n_ = static_cast<int>(values.rows());
    d_ = static_cast<int>(values.cols());
    // Missing entries start at the conditional means so the first I-step
    // operates on defined numbers regardless of the input's NaN markers.
    i_step_impl(nullptr);
  }

  // Draws every missing entry from its conditional normal given the row's
  // observed entries; observed entries are never touched.
  void i_step(RngStream& rng) { i_step_impl(&rng); }

  void p_step(RngStream& rng) {
    params_ = draw_posterior_params(completed_, rng, ridge_, &ridge_applications_);
  }

  void step(RngStream& rng) {
    i_step(rng);
    p_step(rng);
  }

  const Eigen::MatrixXd& completed() const { return completed_; }
  const MvnParams& params() const { return params_; }
  int ridge_applications() const { return ridge_applications_; }

  CompletedMatrix snapshot() const { return CompletedMatrix{completed_, observed_}; }

 private:
  // rng == nullptr fills conditional means instead of draws (initialization).
  void i_step_impl(RngStream* rng) {
    for (const PatternGroup& g : groups_) {
      const int nm = static_cast<int>(g.missing.size());
      if (nm == 0) continue;
      const int no = static_cast<int>(g.observed.size());

      Eigen::MatrixXd s_oo(no, no), s_om(no, nm), s_mm(nm, nm);
      Eigen::VectorXd mu_o(no), mu_m(nm);
      for (int a = 0; a < no; ++a) {
        mu_o[a] = params_.mu[g.observed[a]];
        for (int b = 0; b < no; ++b) s_oo(a, b) = params_.sigma(g.observed[a], g.observed[b]);
        for (int b = 0; b < nm; ++b) s_om(a, b) = params_.sigma(g.observed[a], g.missing[b]);
      }
      for (int a = 0; a < nm; ++a) {
        mu_m[a] = params_.mu[g.missing[a]];
        for (int b = 0; b < nm; ++b) s_mm(a, b) = params_.sigma(g.missing[a], g.missing[b]);
      }

      Eigen::MatrixXd w, chol_cond;
      if (no > 0) {
        Eigen::MatrixXd L;
        try {
          L = linalg::cholesky(s_oo);
        } catch (const NotPositiveDefinite&) {
          throw NumericError("i_step: observed-block covariance is singular");
        }
        w = linalg::chol_solve(L, s_om);  // S_oo^-1 S_om
        Eigen::MatrixXd cond = s_mm - s_om.transpose() * w;
        cond = 0.5 * (cond + cond.transpose()).eval();
        chol_cond = rng ? linalg::cholesky(cond) : Eigen::MatrixXd();
      } else {
        chol_cond = rng ? linalg::cholesky(s_mm) : Eigen::MatrixXd();
      }

      for (int row : g.rows) {
        Eigen::VectorXd mean = mu_m;
        if (no > 0) {
          Eigen::VectorXd y_o(no);
          for (int a = 0; a < no; ++a) y_o[a] = completed_(row, g.observed[a]);
          mean += w.transpose() * (y_o - mu_o);
        }
        if (rng) {
          Eigen::VectorXd z(nm);
          for (int a = 0; a < nm; ++a) z[a] = rng->normal();
          mean += chol_cond * z;
        }
        for (int a = 0; a < nm; ++a) completed_(row, g.missing[a]) = mean[a];
      }
    }
  }

  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> observed_;
  std::vector<PatternGroup> groups_;
  MvnParams params_;
  double ridge_ = 0.0;
  int ridge_applications_ = 0;
  int n_ = 0;
  int d_ = 0;
  Eigen::MatrixXd completed_;
};

// Free-function forms of the two chain moves (spec surface; the chain class
// is the batched implementation behind them).
inline CompletedMatrix i_step(const MvnParams& params, const Eigen::MatrixXd& values,
                              const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& observed,
                              RngStream& rng) {
  DataAugmentationChain chain(values, observed, params);
  chain.i_step(rng);
  return chain.snapshot();
}

inline MvnParams p_step(const CompletedMatrix& completed, RngStream& rng, double ridge = 0.0) {
  return draw_posterior_params(completed.values, rng, ridge);
}

// ---------------------------------------------------------------------------
// Multiple imputation driver
// ---------------------------------------------------------------------------

// The completed matrix for one imputation index under independent-chains
// mode: a freshly seeded chain (stream_id = imputation index) run burn_in
// alternations from the shared EM start.
inline CompletedMatrix impute_one(const Eigen::MatrixXd& values,
                                  const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& observed,
                                  const MvnParams& start, const ImputationConfig& cfg,
                                  std::uint64_t seed, std::uint64_t imputation_index,
                                  int* ridge_applications = nullptr) {
  RngStream rng(seed, imputation_index);
  DataAugmentationChain chain(values, observed, start, cfg.ridge);
  for (int it = 0; it < cfg.burn_in; ++it) chain.step(rng);
  chain.i_step(rng);  // final fill under the last parameter draw
  if (ridge_applications) *ridge_applications += chain.ridge_applications();
  return chain.snapshot();
}

// Streams n_imputations completed matrices to `sink` in imputation order.
// Observed entries are preserved exactly in every imputation.  A data matrix
// with no missing entries yields n identical copies without consuming
// randomness.
inline void impute_foreach(const Eigen::MatrixXd& values,
                           const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& observed,
                           const ImputationConfig& cfg, std::uint64_t seed,
                           const std::function<void(int, CompletedMatrix&&)>& sink,
                           const ChainTrace& trace = {}) {
  cfg.validate();
  const bool complete = observed.cast<int>().sum() == static_cast<int>(observed.size());
  if (complete) {
    for (int m = 0; m < cfg.n_imputations; ++m) sink(m, CompletedMatrix{values, observed});
    return;
  }

  const EmResult start = em_start(values, observed, cfg.ridge);

  if (cfg.chain_mode == ChainMode::kIndependentChains) {
    for (int m = 0; m < cfg.n_imputations; ++m)
      sink(m, impute_one(values, observed, start.params, cfg, seed,
                         static_cast<std::uint64_t>(m)));
    return;
  }

  // Single chain, thinned: snapshot at burn_in, then every iterations_between.
  RngStream rng(seed, 0);
  DataAugmentationChain chain(values, observed, start.params, cfg.ridge);
  int iter = 0;
  auto advance = [&](int steps) {
    for (int s = 0; s < steps; ++s) {
      chain.step(rng);
      ++iter;
      if (trace)
        trace(iter, chain.params().mu,
              linalg::chol_log_det(linalg::cholesky(chain.params().sigma)));
    }
  };
  advance(cfg.burn_in);
  for (int m = 0; m < cfg.n_imputations; ++m) {
    if (m > 0) advance(cfg.iterations_between);
    DataAugmentationChain snap = chain;  // refresh missing under current params
    snap.i_step(rng);
    sink(m, snap.snapshot());
  }
}

inline std::vector<CompletedMatrix> impute(const Eigen::MatrixXd& values,
                                           const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& observed,
                                           const ImputationConfig& cfg, std::uint64_t seed,
                                           const ChainTrace& trace = {}) {
  std::vector<CompletedMatrix> out(static_cast<std::size_t>(cfg.n_imputations));
  impute_foreach(values, observed, cfg, seed,
                 [&](int m, CompletedMatrix&& c) { out[static_cast<std::size_t>(m)] = std::move(c); },
                 trace);
  return out;
}

}  // namespace trustbal
