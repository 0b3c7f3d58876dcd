#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "trustbal/errors.hpp"
#include "trustbal/series.hpp"

namespace trustbal {

struct ParseOptions {
  // Blank is the only missing marker by default; switching this on also
  // maps NA/N/A/null (case-insensitive) to missing.
  bool map_na_tokens = false;
};

namespace csv_detail {

inline std::string trim(std::string_view v) {
  std::size_t b = 0, e = v.size();
  while (b < e && std::isspace(static_cast<unsigned char>(v[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(v[e - 1]))) --e;
  return std::string(v.substr(b, e - b));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

// Dollar cell: optional leading '$', thousands commas already split away by
// the field splitter are not supported, but commas inside are tolerated when
// the cell was quoted upstream; here we just strip '$' and ','.
inline double parse_number(const std::string& cell, std::size_t line_no) {
  std::string cleaned;
  cleaned.reserve(cell.size());
  for (char ch : cell) {
    if (ch == '$' || ch == ',' || ch == '"') continue;
    cleaned.push_back(ch);
  }
  cleaned = trim(cleaned);
  if (cleaned.empty()) throw ParseError("empty numeric cell", line_no);
  const char* b = cleaned.data();
  const char* e = b + cleaned.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, value);
  if (ec != std::errc() || ptr != e)
    throw ParseError("non-numeric cell '" + cell + "'", line_no);
  return value;
}

inline std::string format_number(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace csv_detail

// Parses the annual panel.  Expected header: year, collections,
// disbursements, balance, headright in any order, case-insensitive.  Blank
// cells are missing.  Lines starting with '#' are provenance comments and
// are skipped.  The returned series satisfies validate_series.
inline AccountingSeries parse_accounting_csv(const std::string& text,
                                             const ParseOptions& opt = {}) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::array<int, kNumColumns> col_pos;  // column index in file, by Column
  col_pos.fill(-1);
  bool have_header = false;
  AccountingSeries s;

  auto header_slot = [](const std::string& name) -> int {
    for (int c = 0; c < kNumColumns; ++c)
      if (name == kColumnNames[static_cast<std::size_t>(c)]) return c;
    return -1;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = csv_detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;

    std::vector<std::string> fields = csv_detail::split_fields(line);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const int slot = header_slot(csv_detail::lower(csv_detail::trim(fields[i])));
        if (slot >= 0) col_pos[static_cast<std::size_t>(slot)] = static_cast<int>(i);
      }
      for (int c = 0; c < kNumColumns; ++c)
        if (col_pos[static_cast<std::size_t>(c)] < 0)
          throw ParseError(std::string("missing header column '") +
                               kColumnNames[static_cast<std::size_t>(c)] + "'",
                           line_no);
      have_header = true;
      continue;
    }

    YearRecord r;
    auto cell = [&](int c) -> std::string {
      const auto pos = static_cast<std::size_t>(col_pos[static_cast<std::size_t>(c)]);
      return pos < fields.size() ? csv_detail::trim(fields[pos]) : std::string();
    };
    auto is_missing = [&](const std::string& v) {
      if (v.empty()) return true;
      if (!opt.map_na_tokens) return false;
      const std::string lc = csv_detail::lower(v);
      return lc == "na" || lc == "n/a" || lc == "null";
    };

    const std::string year_cell = cell(kYear);
    if (is_missing(year_cell)) throw ParseError("missing year", line_no);
    const double y = csv_detail::parse_number(year_cell, line_no);
    r.year = static_cast<int>(y);
    if (static_cast<double>(r.year) != y) throw ParseError("non-integer year", line_no);

    for (int c = kHeadright; c < kNumColumns; ++c) {
      const std::string v = cell(c);
      if (is_missing(v)) continue;
      const double amount = csv_detail::parse_number(v, line_no);
      if (!(amount > 0.0))
        throw ParseError(std::string("non-positive ") + kColumnNames[static_cast<std::size_t>(c)],
                         line_no);
      r.column(c) = amount;
    }
    s.rows.push_back(r);
  }

  if (!have_header) throw ParseError("missing header row");
  if (s.rows.empty()) throw ParseError("no data rows");
  s.first_year = s.rows.front().year;
  s.last_year = s.rows.back().year;

  // Consecutiveness / duplicates surface here with the offending year named.
  for (std::size_t i = 1; i < s.rows.size(); ++i) {
    const int prev = s.rows[i - 1].year;
    const int cur = s.rows[i].year;
    if (cur == prev) throw ParseError("duplicate year " + std::to_string(cur));
    if (cur != prev + 1)
      throw ParseError("non-consecutive years " + std::to_string(prev) + " -> " +
                       std::to_string(cur));
  }
  validate_series(s);
  return s;
}

inline AccountingSeries load_accounting_csv(const std::string& path,
                                            const ParseOptions& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open input file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_accounting_csv(buf.str(), opt);
}

// Inverse of parse_accounting_csv: parse(serialize(s)) == s, value-exact.
inline std::string serialize_accounting_csv(const AccountingSeries& s,
                                            const std::string& comment = {}) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "year,collections,disbursements,balance,headright\n";
  auto field = [](const std::optional<double>& v) {
    return v ? csv_detail::format_number(*v) : std::string();
  };
  for (const YearRecord& r : s.rows) {
    out << r.year << ',' << field(r.collections) << ',' << field(r.disbursements) << ','
        << field(r.balance) << ',' << field(r.headright) << '\n';
  }
  return out.str();
}

}  // namespace trustbal
