#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "critics/error.hpp"

namespace critics {

/// Cohen's kappa for two raters over the same items. Categories are whatever
/// distinct values occur in either list. Returns 1.0 when chance agreement is
/// already 1 (both raters used one and the same category throughout).
/// Throws Error{EmptyInput} / Error{LengthMismatch}.
template <typename Label>
double cohen_kappa(const std::vector<Label>& r1, const std::vector<Label>& r2) {
  if (r1.size() != r2.size())
    throw Error(ErrorCode::LengthMismatch, "rating lists differ in length",
                std::to_string(r1.size()) + " vs " + std::to_string(r2.size()));
  if (r1.empty()) throw Error(ErrorCode::EmptyInput, "no ratings");
  const double n = static_cast<double>(r1.size());
  std::map<Label, double> m1, m2;
  double agree = 0;
  for (std::size_t i = 0; i < r1.size(); ++i) {
    m1[r1[i]] += 1;
    m2[r2[i]] += 1;
    if (r1[i] == r2[i]) agree += 1;
  }
  double po = agree / n;
  double pe = 0;
  for (const auto& [label, count] : m1) {
    auto it = m2.find(label);
    if (it != m2.end()) pe += (count / n) * (it->second / n);
  }
  if (pe >= 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

/// Fleiss' kappa from an items x categories matrix of rater counts. Every row
/// must sum to the same rater count n >= 2. Returns 1.0 when expected
/// agreement is 1 (every rating in one category).
/// Throws Error{EmptyInput} / Error{RaggedMatrix} / Error{TooFewRaters}.
double fleiss_kappa(const std::vector<std::vector<int>>& counts);

/// Builds the count matrix for fleiss_kappa from per-item rater labels.
template <typename Label>
std::vector<std::vector<int>> category_counts(const std::vector<std::vector<Label>>& item_ratings) {
  std::map<Label, std::size_t> index;
  for (const auto& item : item_ratings)
    for (const auto& l : item) index.emplace(l, 0);
  std::size_t k = 0;
  for (auto& [_, i] : index) i = k++;
  std::vector<std::vector<int>> out;
  for (const auto& item : item_ratings) {
    std::vector<int> row(index.size(), 0);
    for (const auto& l : item) ++row[index.at(l)];
    out.push_back(std::move(row));
  }
  return out;
}

struct AgreementReport {
  std::map<std::string, double> cohen;  // "raterX~raterY" -> kappa
  std::optional<double> fleiss;
  std::size_t n_items = 0;
  std::size_t n_categories = 0;
};

}  // namespace critics
