#include "qope/core/folds.hpp"

#include <numeric>
#include <string>

#include "qope/core/error.hpp"
#include "qope/core/log.hpp"

namespace qope::core {

std::vector<std::vector<int>> FoldAssignment::members() const {
  std::vector<std::vector<int>> out(num_folds);
  for (std::size_t i = 0; i < fold_of.size(); ++i) out[fold_of[i]].push_back(static_cast<int>(i));
  return out;
}

std::vector<int> FoldAssignment::complement(int fold) const {
  std::vector<int> out;
  out.reserve(fold_of.size());
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(static_cast<int>(i));
  return out;
}

FoldAssignment split_folds(int n, int s, RngStream& rng) {
  if (s <= 0 || s > n)
    throw ConfigError("split_folds: need 1 <= folds <= n, got folds=" + std::to_string(s) +
                      " n=" + std::to_string(n));
  if (n % s != 0)
    warn("split_folds: " + std::to_string(s) + " folds do not divide n=" + std::to_string(n) +
         "; fold sizes will differ by one");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  FoldAssignment fa;
  fa.num_folds = s;
  fa.fold_of.assign(n, 0);
  for (int pos = 0; pos < n; ++pos) fa.fold_of[order[pos]] = pos % s;
  return fa;
}

}  // namespace qope::core
