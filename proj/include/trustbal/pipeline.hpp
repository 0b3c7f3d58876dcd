#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "trustbal/impute.hpp"
#include "trustbal/quantiles.hpp"
#include "trustbal/series.hpp"
#include "trustbal/var.hpp"

namespace trustbal {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct YearRange {
  int first = 0;
  int last = 0;
  bool empty() const { return first > last; }
  int length() const { return empty() ? 0 : last - first + 1; }
  bool contains(int y) const { return y >= first && y <= last; }
};

struct PipelineConfig {
  YearRange analysis_range{1887, 2007};
  YearRange synthetic_range{1887, 1995};
  int n_replicates = 10000;
  int var_order = 7;
  std::optional<YearRange> order_scan;  // scan p in [first,last] per replicate
  bool with_trend = false;
  bool aicc_count_covariance = false;
  std::uint64_t seed = 0;
  std::vector<double> percentiles = {0.01, 0.025, 0.05, 0.10, 0.25,
                                     0.50, 0.75, 0.90, 0.95, 0.975, 0.99};
  double stated_balance = 423.7e6;
  ImputationConfig imputation;
  int threads = 1;
  bool salvage_failed_replicates = false;
  int max_redraw_attempts = 100;

  // Presample length equals the fitted order; the largest order that can be
  // simulated is bounded by the data available before the synthetic window.
  int max_order() const {
    return order_scan ? order_scan->last : var_order;
  }

  void validate(const AccountingSeries& data) const {
    imputation.validate();
    if (n_replicates < 1) throw std::invalid_argument("n_replicates must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (analysis_range.empty()) throw std::invalid_argument("analysis range is empty");
    if (analysis_range.first < data.first_year || analysis_range.last > data.last_year)
      throw std::invalid_argument("analysis range outside the data span");
    if (!synthetic_range.empty()) {
      if (synthetic_range.first < analysis_range.first ||
          synthetic_range.last > analysis_range.last)
        throw std::invalid_argument("synthetic range must lie inside the analysis range");
      const int p = max_order();
      if (synthetic_range.first - p < data.first_year)
        throw std::invalid_argument("not enough presample years before the synthetic range for order " +
                                    std::to_string(p));
    }
    if (order_scan && (order_scan->first < 1 || order_scan->empty()))
      throw std::invalid_argument("bad order-scan range");
    if (var_order < 1) throw std::invalid_argument("var order must be >= 1");
    for (double q : percentiles)
      if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("percentiles must lie strictly inside (0,1)");
  }
};

// ---------------------------------------------------------------------------
// Replicate results
// ---------------------------------------------------------------------------

// One end-to-end draw: an imputed series, a VAR refit, a synthetic splice,
// and the resulting calculated balance.  Dollar-scale per-year vectors span
// the full data range.
struct ReplicateResult {
  int replicate_id = 0;
  Eigen::VectorXd completed_collections;
  Eigen::VectorXd completed_disbursements;
  Eigen::VectorXd final_collections;
  Eigen::VectorXd final_disbursements;
  double total_collections = 0.0;
  double total_disbursements = 0.0;
  double calculated_balance = 0.0;
  int var_order = 0;
  double spectral_radius = 0.0;
  double aicc_value = 0.0;
  int redraws = 0;  // raw-scale imputations rejected for nonpositive dollars
};

struct YearBand {
  int year = 0;
  int column = kCollections;  // kCollections or kDisbursements
  bool synthetic_stage = false;  // false: imputation-only, true: post-synthetic
  double mean = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
};

struct BalanceReport {
  int n_replicates = 0;
  double mean = 0.0;
  double median = 0.0;
  double iqr = 0.0;
  std::vector<std::pair<double, double>> quantiles;        // (prob, value)
  double ci95_lo = 0.0;
  double ci95_hi = 0.0;
  double stated_balance = 0.0;
  double understatement_mean = 0.0;
  std::vector<std::pair<double, double>> understatement;   // (prob, quantile - stated)
  std::vector<YearBand> bands;
  int dropped_replicates = 0;
  long long redraw_rejections = 0;
  int nonstationary_fits = 0;
  int data_first_year = 0;
  int data_last_year = 0;
};

struct PipelineOutput {
  BalanceReport report;
  std::vector<std::pair<int, double>> balances;  // (replicate_id, calculated_balance)
};

// ---------------------------------------------------------------------------
// Prepared inputs shared by all replicates
// ---------------------------------------------------------------------------

struct PipelineContext {
  AccountingSeries data;
  PipelineConfig cfg;
  MaskedMatrix matrix;        // per cfg.imputation.scale_mode
  MvnParams chain_start;      // shared EM start (pure function of the data)
  bool any_missing = false;
  std::uint64_t impute_seed = 0;
  std::uint64_t simulate_seed = 0;
};

inline PipelineContext prepare_pipeline(const AccountingSeries& data, const PipelineConfig& cfg) {
  validate_series(data);
  cfg.validate(data);
  PipelineContext ctx;
  ctx.data = data;
  ctx.cfg = cfg;
  ctx.cfg.imputation.n_imputations = cfg.n_replicates;
  ctx.matrix = to_matrix(data, cfg.imputation.scale_mode == ScaleMode::kLog);
  ctx.any_missing = ctx.matrix.n_missing() > 0;
  if (ctx.any_missing)
    ctx.chain_start = em_start(ctx.matrix.values, ctx.matrix.observed, cfg.imputation.ridge).params;
  ctx.impute_seed = mix_seed(cfg.seed, 1);
  ctx.simulate_seed = mix_seed(cfg.seed, 2);
  return ctx;
}

// ---------------------------------------------------------------------------
// One replicate
// ---------------------------------------------------------------------------

namespace pipeline_detail {

// Dollar value of a cell of a completed matrix: observed cells pass the
// original dollars through untouched, imputed cells are transformed back.
inline double cell_dollars(const PipelineContext& ctx, const Eigen::MatrixXd& completed,
                           int row, int col) {
  if (ctx.matrix.observed(row, col)) return ctx.matrix.raw(row, col);
  const double v = completed(row, col);
  return ctx.matrix.log_scale ? std::exp(v) : v;
}

struct ReplicateFailure : NumericError {
  ReplicateFailure(int id, const std::string& what)
      : NumericError("replicate " + std::to_string(id) + ": " + what) {}
};

}  // namespace pipeline_detail

// Sum of collections minus sum of disbursements over a complete dollar
// series restricted to `range`.
inline double calculated_balance(const AccountingSeries& s, const YearRange& range) {
  if (range.first < s.first_year || range.last > s.last_year)
    throw std::out_of_range("calculated_balance: range outside series");
  double coll = 0.0, disb = 0.0;
  for (int y = range.first; y <= range.last; ++y) {
    const YearRecord& r = s.at_year(y);
    if (!r.collections || !r.disbursements)
      throw std::invalid_argument("calculated_balance: missing value in year " + std::to_string(y));
    coll += *r.collections;
    disb += *r.disbursements;
  }
  return coll - disb;
}

// Runs replicate #replicate_id end to end:
//   1. completed matrix #replicate_id from the imputation engine,
//   2. VAR fit to the completed log collections/disbursements (full span),
//   3. synthetic realization over the synthetic range conditioned on the
//      completed presample,
//   4. splice (synthetic values replace completed ones inside the range),
//   5. back-transform to dollars and total over the analysis range.
// In raw-scale mode, completions with nonpositive dollar values are
// rejected and redrawn on a fresh stream; the count is reported.
inline ReplicateResult run_replicate(const PipelineContext& ctx, int replicate_id,
                                     const Eigen::MatrixXd* precompleted = nullptr) {
  const PipelineConfig& cfg = ctx.cfg;
  const int n = static_cast<int>(ctx.matrix.n_rows());
  const int first_year = ctx.data.first_year;

  ReplicateResult res;
  res.replicate_id = replicate_id;

  Eigen::MatrixXd completed;
  Eigen::MatrixXd logs(n, 2);  // log collections / log disbursements, full span
  for (int attempt = 0;; ++attempt) {
    if (attempt > cfg.max_redraw_attempts)
      throw pipeline_detail::ReplicateFailure(replicate_id, "redraw attempts exhausted");
    if (precompleted != nullptr) {
      completed = *precompleted;
    } else if (ctx.any_missing) {
      const std::uint64_t stream =
          static_cast<std::uint64_t>(replicate_id) | (static_cast<std::uint64_t>(attempt) << 40);
      completed = impute_one(ctx.matrix.values, ctx.matrix.observed, ctx.chain_start,
                             cfg.imputation, ctx.impute_seed, stream)
                      .values;
    } else {
      completed = ctx.matrix.values;
    }

    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int c : {kCollections, kDisbursements}) {
        if (ctx.matrix.log_scale) {
          logs(i, c == kCollections ? 0 : 1) = completed(i, c);
        } else {
          const double v = completed(i, c);
          if (!(v > 0.0)) {
            ok = false;  // nonpositive raw-scale dollars: reject this completion
            break;
          }
          logs(i, c == kCollections ? 0 : 1) = std::log(v);
        }
      }
    }
    if (ok) {
      res.redraws = attempt;
      break;
    }
    if (precompleted != nullptr || !ctx.any_missing)
      throw pipeline_detail::ReplicateFailure(replicate_id,
                                              "nonpositive dollar value cannot be redrawn");
  }

  // Completed-stage dollar series.
  res.completed_collections.resize(n);
  res.completed_disbursements.resize(n);
  for (int i = 0; i < n; ++i) {
    res.completed_collections[i] = pipeline_detail::cell_dollars(ctx, completed, i, kCollections);
    res.completed_disbursements[i] =
        pipeline_detail::cell_dollars(ctx, completed, i, kDisbursements);
  }
  res.final_collections = res.completed_collections;
  res.final_disbursements = res.completed_disbursements;

  if (!cfg.synthetic_range.empty()) {
    VarModel model;
    try {
      if (cfg.order_scan) {
        const OrderSelection sel = select_order(logs, cfg.order_scan->first,
                                                cfg.order_scan->last, cfg.with_trend,
                                                cfg.aicc_count_covariance);
        model = fit_var(logs, sel.chosen_p, cfg.with_trend);
        res.aicc_value = sel.chosen_aicc;
      } else {
        model = fit_var(logs, cfg.var_order, cfg.with_trend);
        res.aicc_value = aicc(model, n - cfg.var_order, cfg.aicc_count_covariance);
      }
    } catch (const std::exception& e) {
      throw pipeline_detail::ReplicateFailure(replicate_id, e.what());
    }
    res.var_order = model.p;
    res.spectral_radius = stationarity_check(model);  // advisory, never aborts

    const int sim_start_row = cfg.synthetic_range.first - first_year;
    const int horizon = cfg.synthetic_range.length();
    const Eigen::MatrixXd presample = logs.middleRows(sim_start_row - model.p, model.p);
    RngStream sim_rng(ctx.simulate_seed, static_cast<std::uint64_t>(replicate_id));
    Eigen::MatrixXd synth;
    try {
      synth = simulate_var(model, presample, horizon, sim_rng, sim_start_row + 1);
    } catch (const std::exception& e) {
      throw pipeline_detail::ReplicateFailure(replicate_id, e.what());
    }
    for (int s = 0; s < horizon; ++s) {
      res.final_collections[sim_start_row + s] = std::exp(synth(s, 0));
      res.final_disbursements[sim_start_row + s] = std::exp(synth(s, 1));
    }
  }

  for (int y = cfg.analysis_range.first; y <= cfg.analysis_range.last; ++y) {
    const int i = y - first_year;
    res.total_collections += res.final_collections[i];
    res.total_disbursements += res.final_disbursements[i];
  }
  res.calculated_balance = res.total_collections - res.total_disbursements;
  if (!std::isfinite(res.calculated_balance))
    throw pipeline_detail::ReplicateFailure(replicate_id, "non-finite calculated balance");
  return res;
}

inline ReplicateResult run_replicate(const AccountingSeries& data, const PipelineConfig& cfg,
                                     int replicate_id) {
  return run_replicate(prepare_pipeline(data, cfg), replicate_id);
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

inline std::vector<YearBand> yearly_bands(const std::vector<ReplicateResult>& results,
                                          const PipelineContext& ctx) {
  if (results.size() < 2) throw std::invalid_argument("yearly_bands: need >= 2 replicates");
  std::vector<YearBand> bands;
  const int n = static_cast<int>(ctx.matrix.n_rows());
  std::vector<double> cell(results.size());
  for (int i = 0; i < n; ++i) {
    for (int col : {kCollections, kDisbursements}) {
      for (bool synthetic : {false, true}) {
        for (std::size_t r = 0; r < results.size(); ++r) {
          const ReplicateResult& rr = results[r];
          const Eigen::VectorXd& v =
              col == kCollections
                  ? (synthetic ? rr.final_collections : rr.completed_collections)
                  : (synthetic ? rr.final_disbursements : rr.completed_disbursements);
          cell[r] = v[i];
        }
        YearBand b;
        b.year = ctx.data.first_year + i;
        b.column = col;
        b.synthetic_stage = synthetic;
        std::sort(cell.begin(), cell.end());
        if (cell.front() == cell.back()) {
          // constant across replicates (observed cell): keep it exact
          b.mean = b.lo95 = b.hi95 = cell.front();
        } else {
          b.mean = mean_of(cell);
          b.lo95 = quantile_sorted(cell, 0.025);
          b.hi95 = quantile_sorted(cell, 0.975);
        }
        bands.push_back(b);
      }
    }
  }
  return bands;
}

inline BalanceReport summarize(const std::vector<ReplicateResult>& results,
                               const PipelineContext& ctx) {
  if (results.size() < 2) throw std::invalid_argument("summarize: need >= 2 replicates");
  const PipelineConfig& cfg = ctx.cfg;

  std::vector<double> balances;
  balances.reserve(results.size());
  long long redraws = 0;
  int nonstationary = 0;
  for (const ReplicateResult& r : results) {
    balances.push_back(r.calculated_balance);
    redraws += r.redraws;
    if (!cfg.synthetic_range.empty() && r.spectral_radius >= 1.0) ++nonstationary;
  }

  BalanceReport rep;
  rep.n_replicates = static_cast<int>(results.size());
  rep.mean = mean_of(balances);
  std::sort(balances.begin(), balances.end());
  rep.median = quantile_sorted(balances, 0.5);
  rep.iqr = quantile_sorted(balances, 0.75) - quantile_sorted(balances, 0.25);
  for (double q : cfg.percentiles)
    rep.quantiles.emplace_back(q, quantile_sorted(balances, q));
  rep.ci95_lo = quantile_sorted(balances, 0.025);
  rep.ci95_hi = quantile_sorted(balances, 0.975);
  rep.stated_balance = cfg.stated_balance;
  rep.understatement_mean = rep.mean - cfg.stated_balance;
  for (const auto& [q, v] : rep.quantiles) rep.understatement.emplace_back(q, v - cfg.stated_balance);
  rep.redraw_rejections = redraws;
  rep.nonstationary_fits = nonstationary;
  rep.data_first_year = ctx.data.first_year;
  rep.data_last_year = ctx.data.last_year;
  rep.bands = yearly_bands(results, ctx);
  return rep;
}

// ---------------------------------------------------------------------------
// Full run: replicates in parallel, deterministic aggregation
// ---------------------------------------------------------------------------

// Results are keyed by replicate_id and folded in id order, so the output is
// a pure function of (data, cfg, seed) whatever the thread count.
inline PipelineOutput run_pipeline(const AccountingSeries& data, const PipelineConfig& cfg) {
  PipelineContext ctx = prepare_pipeline(data, cfg);
  const int n_rep = cfg.n_replicates;

  // Single-chain imputation is inherently sequential: materialize the
  // completed matrices first, then fan out the per-replicate model work.
  std::vector<Eigen::MatrixXd> precompleted;
  if (ctx.any_missing && cfg.imputation.chain_mode == ChainMode::kSingleChainThinned) {
    precompleted.resize(static_cast<std::size_t>(n_rep));
    ImputationConfig icfg = ctx.cfg.imputation;
    impute_foreach(ctx.matrix.values, ctx.matrix.observed, icfg, ctx.impute_seed,
                   [&](int m, CompletedMatrix&& c) {
                     precompleted[static_cast<std::size_t>(m)] = std::move(c.values);
                   });
  }

  std::vector<std::optional<ReplicateResult>> slots(static_cast<std::size_t>(n_rep));
  std::vector<std::string> errors(static_cast<std::size_t>(n_rep));
  std::atomic<int> next{0};
  std::atomic<bool> abort_flag{false};

  auto worker = [&]() {
    for (;;) {
      const int id = next.fetch_add(1);
      if (id >= n_rep || abort_flag.load()) return;
      try {
        const Eigen::MatrixXd* pre =
            precompleted.empty() ? nullptr : &precompleted[static_cast<std::size_t>(id)];
        slots[static_cast<std::size_t>(id)] = run_replicate(ctx, id, pre);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(id)] = e.what();
        if (!cfg.salvage_failed_replicates) abort_flag.store(true);
      }
    }
  };

  const int n_threads = std::min(cfg.threads, n_rep);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  int dropped = 0;
  std::vector<ReplicateResult> results;
  results.reserve(static_cast<std::size_t>(n_rep));
  for (int id = 0; id < n_rep; ++id) {
    if (slots[static_cast<std::size_t>(id)]) {
      results.push_back(std::move(*slots[static_cast<std::size_t>(id)]));
    } else if (!errors[static_cast<std::size_t>(id)].empty()) {
      if (!cfg.salvage_failed_replicates) throw NumericError(errors[static_cast<std::size_t>(id)]);
      ++dropped;
    } else if (!cfg.salvage_failed_replicates) {
      // Slot skipped because another replicate aborted the run first.
      continue;
    }
  }

  PipelineOutput out;
  out.report = summarize(results, ctx);
  out.report.dropped_replicates = dropped;
  out.balances.reserve(results.size());
  for (const ReplicateResult& r : results)
    out.balances.emplace_back(r.replicate_id, r.calculated_balance);
  return out;
}

}  // namespace trustbal
