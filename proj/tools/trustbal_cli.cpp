// Command-line front end: reconstructs the distribution of a trust-fund
// system's cumulative balance from an incomplete annual accounting panel.
//
// Subcommands:
//   run          multiple imputation + VAR resimulation + balance report
//   diagnose     footing residuals and missingness summary
//   select-order AICC scan of candidate VAR orders on imputed series
//   fixture      synthetic test panel from a known generating process

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "trustbal/trustbal.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 1;    // input parse/validation failure
constexpr int kExitNumeric = 2;  // numerical failure
constexpr int kExitUsage = 64;   // bad flags

struct RangeFlag {
  int first = 0;
  int last = 0;
};

// "lo:hi" -> RangeFlag
bool parse_range(const std::string& text, RangeFlag& out) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return false;
  try {
    out.first = std::stoi(text.substr(0, colon));
    out.last = std::stoi(text.substr(colon + 1));
  } catch (...) {
    return false;
  }
  return true;
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

struct RunFlags {
  std::string input;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  int replicates = 10000;
  int burn_in = 500;
  std::string chain_mode = "independent-chains";
  std::string scale_mode = "log";
  int var_order = 7;
  std::string order_scan;
  bool with_trend = false;
  bool aicc_count_covariance = false;
  std::string synthetic_range = "1887:1995";
  std::string analysis_range = "1887:2007";
  std::vector<double> percentiles = {0.01, 0.025, 0.05, 0.10, 0.25, 0.50,
                                     0.75, 0.90, 0.95, 0.975, 0.99};
  double stated_balance = 423.7e6;
  int threads = 1;
  bool salvage = false;
};

void add_model_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--burn-in", f.burn_in, "Data-augmentation burn-in iterations");
  cmd->add_option("--chain-mode", f.chain_mode, "independent-chains | single-chain-thinned")
      ->check(CLI::IsMember({"independent-chains", "single-chain-thinned"}));
  cmd->add_option("--scale-mode", f.scale_mode, "Imputation scale: log | raw")
      ->check(CLI::IsMember({"log", "raw"}));
  cmd->add_option("--order-scan", f.order_scan, "Scan VAR orders lo:hi by AICC");
  cmd->add_flag("--with-trend", f.with_trend, "Include a linear time trend in the VAR");
  cmd->add_flag("--aicc-count-covariance", f.aicc_count_covariance,
                "Count the covariance entries in the AICC parameter total");
  cmd->add_option("--threads", f.threads, "Worker threads (never affects results)");
}

// Returns kExitUsage on a bad flag combination, otherwise fills cfg.
int build_config(const RunFlags& f, trustbal::PipelineConfig& cfg) {
  using trustbal::ChainMode;
  using trustbal::ScaleMode;
  if (f.replicates < 1) {
    std::cerr << "error: --replicates must be positive\n";
    return kExitUsage;
  }
  if (f.burn_in < 0 || f.threads < 1 || f.var_order < 1) {
    std::cerr << "error: nonpositive flag value\n";
    return kExitUsage;
  }
  RangeFlag ar;
  if (!parse_range(f.analysis_range, ar)) {
    std::cerr << "error: --analysis-range expects lo:hi\n";
    return kExitUsage;
  }
  cfg.analysis_range = {ar.first, ar.last};
  if (f.synthetic_range == "none") {
    cfg.synthetic_range = {1, 0};
  } else {
    RangeFlag sr;
    if (!parse_range(f.synthetic_range, sr)) {
      std::cerr << "error: --synthetic-range expects lo:hi or none\n";
      return kExitUsage;
    }
    cfg.synthetic_range = {sr.first, sr.last};
  }
  if (!f.order_scan.empty()) {
    RangeFlag os;
    if (!parse_range(f.order_scan, os) || os.first < 1 || os.last < os.first) {
      std::cerr << "error: --order-scan expects lo:hi with 1 <= lo <= hi\n";
      return kExitUsage;
    }
    cfg.order_scan = trustbal::YearRange{os.first, os.last};
  }
  for (double p : f.percentiles) {
    if (!(p > 0.0 && p < 1.0)) {
      std::cerr << "error: percentiles must lie strictly inside (0,1)\n";
      return kExitUsage;
    }
  }
  cfg.n_replicates = f.replicates;
  cfg.var_order = f.var_order;
  cfg.with_trend = f.with_trend;
  cfg.aicc_count_covariance = f.aicc_count_covariance;
  cfg.seed = f.seed;
  cfg.percentiles = f.percentiles;
  cfg.stated_balance = f.stated_balance;
  cfg.threads = f.threads;
  cfg.salvage_failed_replicates = f.salvage;
  cfg.imputation.n_imputations = f.replicates;
  cfg.imputation.burn_in = f.burn_in;
  cfg.imputation.chain_mode = f.chain_mode == "independent-chains"
                                  ? ChainMode::kIndependentChains
                                  : ChainMode::kSingleChainThinned;
  cfg.imputation.scale_mode = f.scale_mode == "log" ? ScaleMode::kLog : ScaleMode::kRaw;
  return kExitOk;
}

int cmd_run(const RunFlags& f) {
  trustbal::PipelineConfig cfg;
  if (int rc = build_config(f, cfg); rc != kExitOk) return rc;
  if (f.replicates < 2) {
    std::cerr << "error: run needs --replicates >= 2\n";
    return kExitUsage;
  }

  trustbal::AccountingSeries data;
  try {
    data = trustbal::load_accounting_csv(f.input);
    cfg.validate(data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }

  try {
    const auto out_dir = ensure_dir(f.output_dir);
    const trustbal::PipelineOutput out = trustbal::run_pipeline(data, cfg);
    const std::string seed_text = std::to_string(cfg.seed);

    trustbal::write_text_file((out_dir / "report.json").string(),
                              trustbal::report_json(out.report, cfg).dump(2) + "\n");
    trustbal::write_text_file((out_dir / "balances.csv").string(),
                              trustbal::balances_csv(out.balances, seed_text));
    trustbal::write_text_file((out_dir / "bands.csv").string(),
                              trustbal::bands_csv(out.report.bands, seed_text));
    trustbal::json echo;
    echo["config"] = trustbal::config_json(cfg);
    echo["provenance"] = trustbal::provenance_json(seed_text);
    trustbal::write_text_file((out_dir / "config_echo.json").string(), echo.dump(2) + "\n");

    std::printf("replicates: %d (dropped %d, redraws %lld)\n", out.report.n_replicates,
                out.report.dropped_replicates, out.report.redraw_rejections);
    std::printf("calculated balance: mean %.1fM  median %.1fM  95%% CI [%.1fM, %.1fM]\n",
                out.report.mean / 1e6, out.report.median / 1e6, out.report.ci95_lo / 1e6,
                out.report.ci95_hi / 1e6);
    std::printf("understatement vs stated %.1fM: mean %.1fM\n", cfg.stated_balance / 1e6,
                out.report.understatement_mean / 1e6);
    return kExitOk;
  } catch (const trustbal::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int cmd_diagnose(const std::string& input, const std::string& output_dir) {
  trustbal::AccountingSeries data;
  try {
    data = trustbal::load_accounting_csv(input);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  try {
    const auto out_dir = ensure_dir(output_dir);
    const auto rows = trustbal::footing_residuals(data);
    trustbal::write_text_file((out_dir / "footing.csv").string(),
                              trustbal::footing_csv(rows, "unused"));
    const auto ms = trustbal::missingness_summary(data, data.first_year, data.last_year);
    trustbal::json j = trustbal::missingness_json(ms);
    j["provenance"] = trustbal::provenance_json("unused");
    trustbal::write_text_file((out_dir / "missingness.json").string(), j.dump(2) + "\n");

    int defined = 0, nonzero = 0;
    for (const auto& r : rows) {
      if (!r.residual) continue;
      ++defined;
      if (std::abs(*r.residual) > 0.005) ++nonzero;  // beyond a cent
    }
    std::printf("footing residuals: %d defined, %d nonzero\n", defined, nonzero);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int cmd_select_order(const RunFlags& f) {
  trustbal::PipelineConfig cfg;
  if (int rc = build_config(f, cfg); rc != kExitOk) return rc;
  if (!cfg.order_scan) cfg.order_scan = trustbal::YearRange{1, 7};

  trustbal::AccountingSeries data;
  try {
    data = trustbal::load_accounting_csv(f.input);
    trustbal::validate_series(data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }

  try {
    const auto out_dir = ensure_dir(f.output_dir);
    trustbal::ImputationConfig icfg = cfg.imputation;
    icfg.n_imputations = f.replicates;
    const auto matrix = trustbal::to_matrix(data, icfg.scale_mode == trustbal::ScaleMode::kLog);
    const auto completions =
        trustbal::impute(matrix.values, matrix.observed, icfg, trustbal::mix_seed(cfg.seed, 1));

    trustbal::json per_series = trustbal::json::array();
    std::printf("%-10s", "series");
    for (int p = cfg.order_scan->first; p <= cfg.order_scan->last; ++p)
      std::printf("  AICC(p=%d)", p);
    std::printf("  chosen\n");
    for (std::size_t m = 0; m < completions.size(); ++m) {
      const auto& cm = completions[m];
      const int n = static_cast<int>(cm.values.rows());
      Eigen::MatrixXd logs(n, 2);
      for (int i = 0; i < n; ++i) {
        for (int c : {trustbal::kCollections, trustbal::kDisbursements}) {
          double v = cm.values(i, c);
          if (icfg.scale_mode == trustbal::ScaleMode::kRaw) {
            if (!(v > 0.0)) throw trustbal::NumericError("nonpositive dollar in imputation " +
                                                         std::to_string(m));
            v = std::log(v);
          }
          logs(i, c == trustbal::kCollections ? 0 : 1) = v;
        }
      }
      const auto sel = trustbal::select_order(logs, cfg.order_scan->first, cfg.order_scan->last,
                                              cfg.with_trend, cfg.aicc_count_covariance);
      std::printf("%-10zu", m);
      trustbal::json scanned = trustbal::json::array();
      for (const auto& e : sel.scanned) {
        if (e.ok)
          std::printf("  %9.2f", e.aicc);
        else
          std::printf("  %9s", "fail");
        scanned.push_back(trustbal::json{
            {"p", e.p}, {"aicc", e.ok ? trustbal::json(e.aicc) : trustbal::json(nullptr)}});
      }
      std::printf("  p=%d\n", sel.chosen_p);
      per_series.push_back(trustbal::json{
          {"imputation", m}, {"scanned", scanned}, {"chosen_p", sel.chosen_p}});
    }
    trustbal::json j;
    j["order_scan"] = {{"first", cfg.order_scan->first}, {"last", cfg.order_scan->last}};
    j["series"] = per_series;
    j["provenance"] = trustbal::provenance_json(std::to_string(cfg.seed));
    trustbal::write_text_file((out_dir / "order_selection.json").string(), j.dump(2) + "\n");
    return kExitOk;
  } catch (const trustbal::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int cmd_fixture(const std::string& output_dir, std::uint64_t seed, double missing_frac) {
  try {
    const auto out_dir = ensure_dir(output_dir);
    trustbal::FixtureParams fp;
    fp.seed = seed;
    fp.missing_frac = missing_frac;
    const trustbal::FixtureResult fx = trustbal::generate_fixture(fp);
    const std::string comment = trustbal::provenance_line(std::to_string(seed));
    trustbal::write_text_file((out_dir / "fixture.csv").string(),
                              trustbal::serialize_accounting_csv(fx.series, comment));
    trustbal::json j = fx.true_params;
    j["provenance"] = trustbal::provenance_json(std::to_string(seed));
    trustbal::write_text_file((out_dir / "fixture_params.json").string(), j.dump(2) + "\n");
    std::printf("fixture: %d rows, %s\n", fx.series.n_years(),
                (out_dir / "fixture.csv").string().c_str());
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balance-distribution reconstruction for incomplete trust-fund accounting data"};
  app.require_subcommand(1);

  RunFlags rf;
  CLI::App* run = app.add_subcommand("run", "Run the full uncertainty pipeline");
  run->add_option("--input", rf.input, "Accounting panel CSV")->required();
  run->add_option("--output-dir", rf.output_dir, "Directory for report.json and CSV outputs");
  run->add_option("--seed", rf.seed,
                  "RNG seed (required; there is no wall-clock default)")
      ->required();
  run->add_option("--replicates", rf.replicates, "Number of end-to-end replicates");
  run->add_option("--var-order", rf.var_order, "VAR order p");
  run->add_option("--synthetic-range", rf.synthetic_range,
                  "Years regenerated from the fitted VAR (lo:hi or none)");
  run->add_option("--analysis-range", rf.analysis_range, "Years totaled into the balance");
  run->add_option("--percentiles", rf.percentiles, "Report percentiles, comma separated")
      ->delimiter(',');
  run->add_option("--stated-balance", rf.stated_balance,
                  "Stated balance the distribution is compared against");
  run->add_flag("--salvage-failed-replicates", rf.salvage,
                "Drop and count failed replicates instead of aborting");
  add_model_flags(run, rf);

  std::string diag_input, diag_output = ".";
  CLI::App* diag = app.add_subcommand("diagnose", "Footing residuals and missingness summary");
  diag->add_option("--input", diag_input, "Accounting panel CSV")->required();
  diag->add_option("--output-dir", diag_output, "Directory for footing.csv / missingness.json");

  RunFlags sf;
  sf.replicates = 5;
  CLI::App* sel = app.add_subcommand("select-order", "AICC order scan on imputed series");
  sel->add_option("--input", sf.input, "Accounting panel CSV")->required();
  sel->add_option("--output-dir", sf.output_dir, "Directory for order_selection.json");
  sel->add_option("--seed", sf.seed, "RNG seed (required)")->required();
  sel->add_option("--replicates", sf.replicates, "Number of imputed series to scan");
  add_model_flags(sel, sf);

  std::string fx_output = ".";
  std::uint64_t fx_seed = 0;
  double fx_missing = 1.0 / 3.0;
  CLI::App* fix = app.add_subcommand("fixture", "Write a synthetic panel from a known process");
  fix->add_option("--output-dir", fx_output, "Directory for fixture.csv / fixture_params.json");
  fix->add_option("--seed", fx_seed, "Generator seed");
  fix->add_option("--missing-frac", fx_missing, "Flow missingness fraction (0 = fully observed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (run->parsed()) return cmd_run(rf);
  if (diag->parsed()) return cmd_diagnose(diag_input, diag_output);
  if (sel->parsed()) return cmd_select_order(sf);
  if (fix->parsed()) return cmd_fixture(fx_output, fx_seed, fx_missing);
  return kExitUsage;
}
