#include "critics/agreement.hpp"

namespace critics {

double fleiss_kappa(const std::vector<std::vector<int>>& counts) {
  if (counts.empty() || counts.front().empty()) throw Error(ErrorCode::EmptyInput, "no items to rate");
  const std::size_t k = counts.front().size();
  long raters = -1;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != k) throw Error(ErrorCode::RaggedMatrix, "row " + std::to_string(i) + " has a different width");
    long sum = 0;
    for (int c : row) {
      if (c < 0) throw Error(ErrorCode::RaggedMatrix, "negative count in row " + std::to_string(i));
      sum += c;
    }
    if (raters < 0) raters = sum;
    if (sum != raters)
      throw Error(ErrorCode::RaggedMatrix, "row " + std::to_string(i) + " sums to " + std::to_string(sum) +
                                               ", expected " + std::to_string(raters));
  }
  if (raters < 2) throw Error(ErrorCode::TooFewRaters, "fleiss kappa needs at least two raters per item");

  const double n = static_cast<double>(raters);
  const double items = static_cast<double>(counts.size());
  std::vector<double> column(k, 0.0);
  double p_bar = 0;
  for (const auto& row : counts) {
    double agree = 0;
    for (std::size_t j = 0; j < k; ++j) {
      agree += static_cast<double>(row[j]) * (row[j] - 1);
      column[j] += row[j];
    }
    p_bar += agree / (n * (n - 1));
  }
  p_bar /= items;
  double pe = 0;
  for (double c : column) {
    double p = c / (items * n);
    pe += p * p;
  }
  if (pe >= 1.0) return 1.0;
  return (p_bar - pe) / (1.0 - pe);
}

}  // namespace critics
