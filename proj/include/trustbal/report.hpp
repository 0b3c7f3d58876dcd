#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "trustbal/pipeline.hpp"
#include "trustbal/series.hpp"
#include "trustbal/version.hpp"

namespace trustbal {

using json = nlohmann::json;  // std::map keys: serialized in sorted order

namespace report_detail {

inline std::string money(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string prob_key(double q) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", q);
  return buf;
}

}  // namespace report_detail

// One-line provenance stamp carried at the top of every CSV output;
// the accounting-CSV parser skips '#' lines, so stamped files stay loadable.
inline std::string provenance_line(const std::string& seed_text) {
  std::ostringstream out;
  out << kArtifactName << ' ' << kArtifactVersion << " rng=" << kRngName << '/' << kRngVersion
      << " seed=" << seed_text;
  return out.str();
}

inline json provenance_json(const std::string& seed_text) {
  return json{{"artifact", kArtifactName},
              {"artifact_version", kArtifactVersion},
              {"generator", kRngName},
              {"generator_version", kRngVersion},
              {"quantile_method", "order-statistic linear interpolation, h=(n-1)q+1"},
              {"seed", seed_text}};
}

inline json config_json(const PipelineConfig& cfg) {
  json j;
  j["analysis_range"] = {{"first", cfg.analysis_range.first}, {"last", cfg.analysis_range.last}};
  j["synthetic_range"] =
      cfg.synthetic_range.empty()
          ? json(nullptr)
          : json{{"first", cfg.synthetic_range.first}, {"last", cfg.synthetic_range.last}};
  j["n_replicates"] = cfg.n_replicates;
  if (cfg.order_scan)
    j["order_scan"] = {{"first", cfg.order_scan->first}, {"last", cfg.order_scan->last}};
  else
    j["var_order"] = cfg.var_order;
  j["presample_years"] = cfg.max_order();
  j["with_trend"] = cfg.with_trend;
  j["aicc_count_covariance"] = cfg.aicc_count_covariance;
  j["seed"] = cfg.seed;
  j["percentiles"] = cfg.percentiles;
  j["stated_balance"] = cfg.stated_balance;
  j["threads"] = cfg.threads;
  j["salvage_failed_replicates"] = cfg.salvage_failed_replicates;
  j["imputation"] = {
      {"burn_in", cfg.imputation.burn_in},
      {"chain_mode", cfg.imputation.chain_mode == ChainMode::kIndependentChains
                         ? "independent-chains"
                         : "single-chain-thinned"},
      {"iterations_between", cfg.imputation.iterations_between},
      {"ridge", cfg.imputation.ridge},
      {"scale_mode", cfg.imputation.scale_mode == ScaleMode::kLog ? "log" : "raw"},
  };
  return j;
}

inline json report_json(const BalanceReport& rep, const PipelineConfig& cfg) {
  json quant, under;
  for (const auto& [q, v] : rep.quantiles) quant[report_detail::prob_key(q)] = v;
  for (const auto& [q, v] : rep.understatement) under[report_detail::prob_key(q)] = v;
  json j;
  j["balance"] = {{"mean", rep.mean},
                  {"median", rep.median},
                  {"iqr", rep.iqr},
                  {"ci95", {{"lo", rep.ci95_lo}, {"hi", rep.ci95_hi}}},
                  {"quantiles", quant}};
  j["understatement"] = {{"stated_balance", rep.stated_balance},
                         {"mean", rep.understatement_mean},
                         {"quantiles", under}};
  j["n_replicates"] = rep.n_replicates;
  j["diagnostics"] = {{"dropped_replicates", rep.dropped_replicates},
                      {"redraw_rejections", rep.redraw_rejections},
                      {"nonstationary_fits", rep.nonstationary_fits}};
  j["data"] = {{"first_year", rep.data_first_year}, {"last_year", rep.data_last_year}};
  j["config"] = config_json(cfg);
  j["provenance"] = provenance_json(std::to_string(cfg.seed));
  return j;
}

inline std::string balances_csv(const std::vector<std::pair<int, double>>& balances,
                                const std::string& seed_text) {
  std::ostringstream out;
  out << "# " << provenance_line(seed_text) << "\n";
  out << "replicate_id,calculated_balance\n";
  for (const auto& [id, v] : balances) out << id << ',' << report_detail::money(v) << '\n';
  return out.str();
}

inline std::string bands_csv(const std::vector<YearBand>& bands, const std::string& seed_text) {
  std::ostringstream out;
  out << "# " << provenance_line(seed_text) << "\n";
  out << "year,variable,stage,mean,lo95,hi95\n";
  for (const YearBand& b : bands) {
    out << b.year << ',' << (b.column == kCollections ? "collections" : "disbursements") << ','
        << (b.synthetic_stage ? "synthetic" : "imputed") << ',' << report_detail::money(b.mean)
        << ',' << report_detail::money(b.lo95) << ',' << report_detail::money(b.hi95) << '\n';
  }
  return out.str();
}

inline std::string footing_csv(const std::vector<FootingRow>& rows, const std::string& seed_text) {
  std::ostringstream out;
  out << "# " << provenance_line(seed_text) << "\n";
  out << "year,residual,coll_less_disb,balance_change\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? report_detail::money(*v) : std::string();
  };
  for (const FootingRow& r : rows)
    out << r.year << ',' << cell(r.residual) << ',' << cell(r.coll_less_disb) << ','
        << cell(r.balance_change) << '\n';
  return out.str();
}

inline json missingness_json(const MissingnessSummary& ms) {
  json vars;
  for (int c = kHeadright; c < kNumColumns; ++c) {
    vars[kColumnNames[static_cast<std::size_t>(c)]] = {
        {"missing", ms.missing_count[static_cast<std::size_t>(c)]},
        {"fraction", ms.missing_fraction[static_cast<std::size_t>(c)]}};
  }
  json patterns = json::array();
  for (int y = ms.first_year; y <= ms.last_year; ++y) {
    const std::uint8_t bits = ms.pattern[static_cast<std::size_t>(y - ms.first_year)];
    if (!bits) continue;
    json missing = json::array();
    for (int c = kHeadright; c < kNumColumns; ++c)
      if (bits & (1u << c)) missing.push_back(kColumnNames[static_cast<std::size_t>(c)]);
    patterns.push_back(json{{"year", y}, {"missing", missing}});
  }
  return json{{"range", {{"first_year", ms.first_year}, {"last_year", ms.last_year}}},
              {"variables", vars},
              {"incomplete_years", patterns}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace trustbal
