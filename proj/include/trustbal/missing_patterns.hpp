#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

namespace trustbal {

// Rows of a masked matrix grouped by their missingness pattern, so per-row
// conditional work (EM E-step, imputation draws) factors each observed-block
// decomposition once per pattern instead of once per row.
struct PatternGroup {
  std::uint64_t key = 0;
  std::vector<int> rows;
  std::vector<int> observed;   // ascending column indices
  std::vector<int> missing;    // ascending column indices
};

inline std::vector<PatternGroup> group_by_pattern(
    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& observed) {
  const int n = static_cast<int>(observed.rows());
  const int d = static_cast<int>(observed.cols());
  std::map<std::uint64_t, PatternGroup> groups;
  for (int i = 0; i < n; ++i) {
    std::uint64_t key = 0;
    for (int c = 0; c < d; ++c)
      if (observed(i, c)) key |= (1ULL << c);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) {
      it->second.key = key;
      for (int c = 0; c < d; ++c)
        (observed(i, c) ? it->second.observed : it->second.missing).push_back(c);
    }
    it->second.rows.push_back(i);
  }
  std::vector<PatternGroup> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace trustbal
