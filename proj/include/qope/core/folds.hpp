#pragma once

#include <vector>

#include "qope/core/rng.hpp"

namespace qope::core {

struct FoldAssignment {
  std::vector<int> fold_of;  // trajectory index -> fold id
  int num_folds = 0;

  std::vector<std::vector<int>> members() const;
  std::vector<int> complement(int fold) const;
};

// Uniform random partition of {0..n-1} into s folds whose sizes differ by at
// most one. Warns when s does not divide n.
FoldAssignment split_folds(int n, int s, RngStream& rng);

}  // namespace qope::core
