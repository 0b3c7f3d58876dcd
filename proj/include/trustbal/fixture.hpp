#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "trustbal/rng.hpp"
#include "trustbal/series.hpp"

namespace trustbal {

// Synthetic annual panel from a known generating process, shaped like the
// production data.  Log collections ride a linear trend plus an AR(1) level
// deviation; log disbursements track collections through a tightly
// mean-reverting AR(1) ratio below them (the fund accumulates the margin).
// Jointly (log C, log D) is a bivariate VAR(1) with linear trend, reported in
// the sidecar parameters.  Headright is a fully observed covariate coupled to
// the level; the reported balance drifts off the flows (it does not foot)
// outside the reliable era.  Flow values before analysis_first are
// unobserved, mirroring a covariate-only presample era.
struct FixtureParams {
  int first_year = 1880;
  int last_year = 2007;
  int analysis_first = 1887;   // flows can be observed from here on
  int reliable_first = 1996;   // fully observed and footing-exact from here
  std::uint64_t seed = 0;
  double missing_frac = 1.0 / 3.0;  // target flow missingness over the analysis era

  // log C_t = level + growth*t + l_t,          l_t = ar_level*l_{t-1} + e_l
  // log D_t = log C_t - margin + r_t,          r_t = ar_ratio*r_{t-1} + e_r
  double log_level_collections = 13.95;
  double log_growth = 0.0465;
  double margin = 0.0465;
  double ar_level = 0.82;
  double level_sd = 0.03;
  double ar_ratio = 0.55;
  double ratio_sd = 0.085;

  // Headright covariate on its own trend, coupled to the level deviation.
  double log_level_headright = 3.9;
  double log_growth_headright = 0.043;
  double headright_coupling = 0.55;
  double headright_noise_sd = 0.18;

  // Reported balance: true cumulative flows, understated by a ramp and
  // blurred by reporting noise before the reliable era.
  double opening_balance = 2.5e5;
  double stated_final_balance = 423.7e6;
  double footing_noise_sd = 0.10;
};

struct FixtureResult {
  AccountingSeries series;
  AccountingSeries truth;        // fully observed, before masking
  nlohmann::json true_params;    // generating process for oracle tests
};

inline FixtureResult generate_fixture(const FixtureParams& fp) {
  const int n = fp.last_year - fp.first_year + 1;
  if (n < 8) throw std::invalid_argument("generate_fixture: span too short");
  if (fp.missing_frac < 0.0 || fp.missing_frac > 0.95)
    throw std::invalid_argument("generate_fixture: missing_frac outside [0, 0.95]");

  // Independent streams per component keep the realization of one component
  // stable when another's parameters change.
  RngStream flow_rng(fp.seed, 10);
  RngStream headright_rng(fp.seed, 11);
  RngStream balance_rng(fp.seed, 12);
  RngStream mask_rng(fp.seed, 13);

  std::vector<double> coll(n), disb(n), head(n), true_balance(n);
  double level = 0.0, ratio = 0.0;
  double cum = fp.opening_balance;
  for (int i = 0; i < n; ++i) {
    level = fp.ar_level * level + fp.level_sd * flow_rng.normal();
    ratio = fp.ar_ratio * ratio + fp.ratio_sd * flow_rng.normal();
    const double trend = fp.log_level_collections + fp.log_growth * i;
    coll[i] = std::exp(trend + level);
    disb[i] = std::exp(trend + level - fp.margin + ratio);
    head[i] = std::exp(fp.log_level_headright + fp.log_growth_headright * i +
                       fp.headright_coupling * level +
                       fp.headright_noise_sd * headright_rng.normal());
    cum += coll[i] - disb[i];
    true_balance[i] = std::max(cum, 1.0);
  }

  // Reported balance: anchor the reliable era so it ends at the stated
  // balance and foots exactly; ramp earlier years toward that anchor.
  std::vector<double> reported(n);
  const int rel0 = std::clamp(fp.reliable_first - fp.first_year, 1, n - 1);
  double reliable_net = 0.0;
  for (int i = rel0 + 1; i < n; ++i) reliable_net += coll[i] - disb[i];
  const double anchor = std::max(fp.stated_final_balance - reliable_net, 1.0);
  reported[rel0] = anchor;
  for (int i = rel0 + 1; i < n; ++i) reported[i] = reported[i - 1] + coll[i] - disb[i];
  const double ramp_end = anchor / true_balance[rel0];
  for (int i = 0; i < rel0; ++i) {
    const double ramp = 1.0 + (ramp_end - 1.0) * static_cast<double>(i) / rel0;
    reported[i] = true_balance[i] * ramp *
                  std::exp(fp.footing_noise_sd * balance_rng.normal());
    reported[i] = std::max(reported[i], 1.0);
  }

  // Era-profile missingness, scaled to the requested overall fraction.
  auto era_weight = [&](int year) {
    if (year < fp.analysis_first) return 1.0;  // covariate-only presample
    if (year >= fp.reliable_first) return 0.0;
    if (year < 1912) return 0.65;
    if (year < 1922) return 0.35;
    if (year < 1950) return 0.50;
    if (year < 1972) return 0.25;
    return 0.12;
  };
  double expected = 0.0;
  int analysis_years = 0;
  for (int y = fp.analysis_first; y <= fp.last_year; ++y) {
    expected += era_weight(y);
    ++analysis_years;
  }
  const double scale = expected > 0.0 ? fp.missing_frac * analysis_years / expected : 0.0;

  FixtureResult out;
  out.truth.first_year = out.series.first_year = fp.first_year;
  out.truth.last_year = out.series.last_year = fp.last_year;
  for (int i = 0; i < n; ++i) {
    const int year = fp.first_year + i;
    YearRecord full;
    full.year = year;
    full.collections = coll[i];
    full.disbursements = disb[i];
    full.balance = reported[i];
    full.headright = head[i];
    out.truth.rows.push_back(full);

    YearRecord masked = full;
    const double p_flow =
        year < fp.analysis_first
            ? (fp.missing_frac > 0.0 ? 1.0 : 0.0)
            : std::min(0.95, scale * era_weight(year));
    const double p_bal = year < fp.analysis_first ? p_flow
                         : year >= fp.reliable_first ? 0.0
                         : year < 1912              ? std::min(0.95, 0.60 * scale)
                                                    : std::min(0.95, 0.10 * scale);
    if (mask_rng.u01() < p_flow) masked.collections.reset();
    if (mask_rng.u01() < p_flow) masked.disbursements.reset();
    if (mask_rng.u01() < p_bal) masked.balance.reset();
    out.series.rows.push_back(masked);
  }
  validate_series(out.series);
  validate_series(out.truth);

  // The (log C, log D) pair follows the VAR(1)
  //   X_t = M + b t + A X_{t-1} + Z_t
  // with A, M, b and cov(Z) given below (level/ratio form rearranged).
  const double a_l = fp.ar_level, a_r = fp.ar_ratio;
  const double ve = fp.level_sd * fp.level_sd, vr = fp.ratio_sd * fp.ratio_sd;
  out.true_params = {
      {"seed", fp.seed},
      {"years", {{"first", fp.first_year}, {"last", fp.last_year}}},
      {"missing_frac", fp.missing_frac},
      {"log_flow_var1",
       {{"trend_level", {fp.log_level_collections, fp.log_level_collections - fp.margin}},
        {"trend_growth", {fp.log_growth, fp.log_growth}},
        {"ar", {a_l, 0.0, a_l - a_r, a_r}},
        {"innovation_cov", {ve, ve, ve, ve + vr}},
        {"level_ar", a_l},
        {"level_sd", fp.level_sd},
        {"ratio_ar", a_r},
        {"ratio_sd", fp.ratio_sd},
        {"margin", fp.margin}}},
      {"headright",
       {{"level", fp.log_level_headright},
        {"growth", fp.log_growth_headright},
        {"coupling", fp.headright_coupling},
        {"noise_sd", fp.headright_noise_sd}}},
      {"balance",
       {{"opening", fp.opening_balance},
        {"stated_final", fp.stated_final_balance},
        {"footing_noise_sd", fp.footing_noise_sd},
        {"reliable_first", fp.reliable_first}}},
  };
  return out;
}

}  // namespace trustbal
