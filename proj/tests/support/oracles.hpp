#pragma once

#include <cstddef>
#include <vector>

namespace testgen {

// Independent oracles: pair enumeration instead of the closed forms.
inline double cohen_oracle(const std::vector<int>& r1, const std::vector<int>& r2) {
  const double n = static_cast<double>(r1.size());
  double po = 0;
  for (std::size_t i = 0; i < r1.size(); ++i) po += r1[i] == r2[i];
  po /= n;
  double pe = 0;
  for (std::size_t i = 0; i < r1.size(); ++i)
    for (std::size_t j = 0; j < r2.size(); ++j) pe += r1[i] == r2[j];
  pe /= n * n;
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1 - pe);
}

inline double fleiss_oracle(const std::vector<std::vector<int>>& labels) {
  double agree_pairs = 0, pairs = 0, same_all = 0, all_pairs = 0;
  std::vector<int> flat;
  for (const auto& item : labels) {
    for (std::size_t a = 0; a < item.size(); ++a)
      for (std::size_t b = 0; b < item.size(); ++b)
        if (a != b) {
          pairs += 1;
          agree_pairs += item[a] == item[b];
        }
    flat.insert(flat.end(), item.begin(), item.end());
  }
  for (int x : flat)
    for (int y : flat) {
      all_pairs += 1;
      same_all += x == y;
    }
  double p = agree_pairs / pairs, pe = same_all / all_pairs;
  if (pe == 1.0) return 1.0;
  return (p - pe) / (1 - pe);
}

}  // namespace testgen
