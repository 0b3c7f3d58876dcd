#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trustbal/errors.hpp"

namespace trustbal {

// Column layout of the five-variable annual matrix.  Year is deterministic
// but kept as a model variable: it carries the trend information used by
// the missing-at-random adjustment.
enum Column : int {
  kYear = 0,
  kHeadright = 1,
  kBalance = 2,
  kCollections = 3,
  kDisbursements = 4,
};
inline constexpr int kNumColumns = 5;
inline constexpr std::array<const char*, kNumColumns> kColumnNames = {
    "year", "headright", "balance", "collections", "disbursements"};

// One fiscal year of the accounting panel.  Absent values are genuinely
// absent, never sentinel numbers.
struct YearRecord {
  int year = 0;
  std::optional<double> collections;
  std::optional<double> disbursements;
  std::optional<double> balance;       // fiscal-year-end
  std::optional<double> headright;

  const std::optional<double>& column(int c) const {
    switch (c) {
      case kHeadright: return headright;
      case kBalance: return balance;
      case kCollections: return collections;
      case kDisbursements: return disbursements;
      default: throw std::invalid_argument("YearRecord::column: no optional column " + std::to_string(c));
    }
  }
  std::optional<double>& column(int c) {
    return const_cast<std::optional<double>&>(static_cast<const YearRecord&>(*this).column(c));
  }
};

// The annual panel over a consecutive year range.
struct AccountingSeries {
  std::vector<YearRecord> rows;
  int first_year = 0;
  int last_year = 0;

  int n_years() const { return static_cast<int>(rows.size()); }
  const YearRecord& at_year(int year) const {
    if (year < first_year || year > last_year)
      throw std::out_of_range("AccountingSeries: year " + std::to_string(year) + " outside series");
    return rows[static_cast<std::size_t>(year - first_year)];
  }
};

// Enforces the series invariants: consecutive years, strictly positive
// present dollar amounts, fully observed headright.
inline void validate_series(const AccountingSeries& s) {
  if (s.rows.empty()) throw ParseError("series has no rows");
  if (s.first_year != s.rows.front().year || s.last_year != s.rows.back().year ||
      s.n_years() != s.last_year - s.first_year + 1)
    throw ParseError("series year range inconsistent with rows");
  int expect = s.first_year;
  for (const YearRecord& r : s.rows) {
    if (r.year != expect)
      throw ParseError("years not consecutive: expected " + std::to_string(expect) +
                       ", found " + std::to_string(r.year));
    ++expect;
    for (int c = kHeadright; c < kNumColumns; ++c) {
      const auto& v = r.column(c);
      if (v && !(*v > 0.0))
        throw ParseError(std::string("non-positive ") + kColumnNames[c] + " in year " +
                         std::to_string(r.year));
      if (v && !std::isfinite(*v))
        throw ParseError(std::string("non-finite ") + kColumnNames[c] + " in year " +
                         std::to_string(r.year));
    }
    if (!r.headright)
      throw ParseError("headright missing in year " + std::to_string(r.year) +
                       " (headright must be fully observed)");
  }
}

// ---------------------------------------------------------------------------
// Footing diagnostic
// ---------------------------------------------------------------------------

// Per-year footing residual and the scatter pair it decomposes into.
// residual(t) = balance(t) - (balance(t-1) + collections(t) - disbursements(t));
// each field is defined only when its components are all present.
struct FootingRow {
  int year = 0;
  std::optional<double> residual;
  std::optional<double> coll_less_disb;
  std::optional<double> balance_change;
};

inline std::vector<FootingRow> footing_residuals(const AccountingSeries& s) {
  std::vector<FootingRow> out;
  out.reserve(s.rows.size());
  for (int i = 0; i < s.n_years(); ++i) {
    const YearRecord& r = s.rows[static_cast<std::size_t>(i)];
    FootingRow row;
    row.year = r.year;
    if (r.collections && r.disbursements)
      row.coll_less_disb = *r.collections - *r.disbursements;
    if (i > 0) {
      const YearRecord& prev = s.rows[static_cast<std::size_t>(i - 1)];
      if (r.balance && prev.balance) row.balance_change = *r.balance - *prev.balance;
      if (row.balance_change && row.coll_less_disb)
        row.residual = *row.balance_change - *row.coll_less_disb;
    }
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Missingness accounting
// ---------------------------------------------------------------------------

struct MissingnessSummary {
  int first_year = 0;
  int last_year = 0;
  // Indexed by Column; year is never missing so slot 0 stays zero.
  std::array<int, kNumColumns> missing_count{};
  std::array<double, kNumColumns> missing_fraction{};
  // Per-year pattern: bit c set means column c is missing that year.
  std::vector<std::uint8_t> pattern;

  int n_years() const { return last_year - first_year + 1; }
};

inline MissingnessSummary missingness_summary(const AccountingSeries& s, int first_year,
                                              int last_year) {
  if (first_year < s.first_year || last_year > s.last_year || first_year > last_year)
    throw std::out_of_range("missingness_summary: range outside series");
  MissingnessSummary out;
  out.first_year = first_year;
  out.last_year = last_year;
  out.pattern.resize(static_cast<std::size_t>(out.n_years()), 0);
  for (int y = first_year; y <= last_year; ++y) {
    const YearRecord& r = s.at_year(y);
    std::uint8_t bits = 0;
    for (int c = kHeadright; c < kNumColumns; ++c) {
      if (!r.column(c)) {
        bits |= static_cast<std::uint8_t>(1u << c);
        ++out.missing_count[static_cast<std::size_t>(c)];
      }
    }
    out.pattern[static_cast<std::size_t>(y - first_year)] = bits;
  }
  for (int c = 0; c < kNumColumns; ++c)
    out.missing_fraction[static_cast<std::size_t>(c)] =
        static_cast<double>(out.missing_count[static_cast<std::size_t>(c)]) / out.n_years();
  return out;
}

// ---------------------------------------------------------------------------
// Matrix transforms
// ---------------------------------------------------------------------------

// Dense year-by-variable matrix plus an observed mask.  On the log scale
// the original dollar values of observed cells ride along in `raw`, so the
// inverse transform reproduces them bit-for-bit (exp(log(x)) does not).
struct MaskedMatrix {
  Eigen::MatrixXd values;                                       // NaN where unobserved
  Eigen::MatrixXd raw;                                          // dollars; NaN where unobserved
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> observed;
  bool log_scale = false;
  int first_year = 0;

  Eigen::Index n_rows() const { return values.rows(); }
  Eigen::Index n_cols() const { return values.cols(); }
  int n_missing() const {
    return static_cast<int>(observed.size()) - static_cast<int>(observed.cast<int>().sum());
  }
};

inline MaskedMatrix to_matrix(const AccountingSeries& s, bool log_scale) {
  MaskedMatrix m;
  m.log_scale = log_scale;
  m.first_year = s.first_year;
  const int n = s.n_years();
  m.values = Eigen::MatrixXd::Constant(n, kNumColumns, std::nan(""));
  m.raw = m.values;
  m.observed.setZero(n, kNumColumns);
  for (int i = 0; i < n; ++i) {
    const YearRecord& r = s.rows[static_cast<std::size_t>(i)];
    m.values(i, kYear) = static_cast<double>(r.year);
    m.raw(i, kYear) = m.values(i, kYear);
    m.observed(i, kYear) = 1;
    for (int c = kHeadright; c < kNumColumns; ++c) {
      const auto& v = r.column(c);
      if (!v) continue;
      if (log_scale) {
        if (!(*v > 0.0))
          throw std::domain_error(std::string("to_log_scale: non-positive ") + kColumnNames[c] +
                                  " in year " + std::to_string(r.year));
        m.values(i, c) = std::log(*v);
      } else {
        m.values(i, c) = *v;
      }
      m.raw(i, c) = *v;
      m.observed(i, c) = 1;
    }
  }
  return m;
}

// Natural log on the dollar columns; year passes through untouched.
inline MaskedMatrix to_log_scale(const AccountingSeries& s) { return to_matrix(s, true); }

// Exact inverse of to_log_scale on present entries (observed dollars come
// back from the carried raw values, not from exp).
inline AccountingSeries from_log_scale(const MaskedMatrix& m) {
  AccountingSeries s;
  const int n = static_cast<int>(m.n_rows());
  if (n == 0) throw std::invalid_argument("from_log_scale: empty matrix");
  s.rows.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    YearRecord r;
    r.year = static_cast<int>(std::llround(m.values(i, kYear)));
    for (int c = kHeadright; c < kNumColumns; ++c) {
      if (!m.observed(i, c)) continue;
      r.column(c) = m.raw(i, c);
    }
    s.rows.push_back(r);
  }
  s.first_year = s.rows.front().year;
  s.last_year = s.rows.back().year;
  return s;
}

}  // namespace trustbal
