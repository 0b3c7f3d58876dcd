#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace trustbal {

// Quantile by linear interpolation between order statistics, evaluated at
// 1-based position h = (n-1)q + 1 on the sorted sample.  Monotone in q by
// construction.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: probability outside [0,1]");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (static_cast<double>(n - 1)) * q;  // 0-based fractional index
  const double fl = std::floor(h);
  const auto lo = static_cast<std::size_t>(fl);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double w = h - fl;
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> sample, double q) {
  std::sort(sample.begin(), sample.end());
  return quantile_sorted(sample, q);
}

inline std::vector<double> quantiles_sorted(const std::vector<double>& sorted,
                                            const std::vector<double>& probs) {
  std::vector<double> out;
  out.reserve(probs.size());
  for (double q : probs) out.push_back(quantile_sorted(sorted, q));
  return out;
}

inline double mean_of(const std::vector<double>& sample) {
  if (sample.empty()) throw std::invalid_argument("mean_of: empty sample");
  double s = 0.0;
  for (double v : sample) s += v;
  return s / static_cast<double>(sample.size());
}

}  // namespace trustbal
