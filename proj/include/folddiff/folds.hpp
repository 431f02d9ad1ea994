#ifndef FOLDDIFF_FOLDS_HPP
#define FOLDDIFF_FOLDS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "folddiff/rng.hpp"

namespace folddiff {

struct FoldAssignment {
  int K = 0;
  std::vector<int> fold_of;               // per row, 0..K-1
  std::vector<std::vector<int>> members;  // rows per fold
  bool small_stratum_warning = false;     // some stratum has fewer members than K
};

// Deterministic stratified K-fold assignment. Rows are shuffled within each
// stratum and dealt round-robin; the second stratum deals in reverse fold
// order so that all K folds are nonempty whenever n >= K even if one stratum
// is smaller than K. Within a stratum fold sizes differ by at most one.
inline FoldAssignment make_folds(int n, int K, const Eigen::VectorXi& strata, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("make_folds: empty data");
  if (K < 2 || K > n) throw std::invalid_argument("make_folds: need 2 <= K <= n");
  if (strata.size() != n) throw std::invalid_argument("make_folds: strata length mismatch");

  FoldAssignment fa;
  fa.K = K;
  fa.fold_of.assign(static_cast<std::size_t>(n), -1);
  fa.members.assign(static_cast<std::size_t>(K), {});

  std::vector<int> s0, s1;
  for (int i = 0; i < n; ++i) {
    if (strata[i] != 0 && strata[i] != 1) {
      throw std::invalid_argument("make_folds: strata must be 0/1");
    }
    (strata[i] == 0 ? s0 : s1).push_back(i);
  }
  if ((!s0.empty() && static_cast<int>(s0.size()) < K) ||
      (!s1.empty() && static_cast<int>(s1.size()) < K)) {
    fa.small_stratum_warning = true;
  }

  Rng rng(derive_seed(seed, {rngtag::kFolds}));
  rng.shuffle(s0);
  rng.shuffle(s1);
  for (std::size_t t = 0; t < s0.size(); ++t) {
    fa.fold_of[static_cast<std::size_t>(s0[t])] = static_cast<int>(t % static_cast<std::size_t>(K));
  }
  for (std::size_t t = 0; t < s1.size(); ++t) {
    fa.fold_of[static_cast<std::size_t>(s1[t])] =
        K - 1 - static_cast<int>(t % static_cast<std::size_t>(K));
  }
  for (int i = 0; i < n; ++i) fa.members[static_cast<std::size_t>(fa.fold_of[static_cast<std::size_t>(i)])].push_back(i);
  for (int k = 0; k < K; ++k) {
    if (fa.members[static_cast<std::size_t>(k)].empty()) {
      throw std::logic_error("make_folds: produced an empty fold");
    }
  }
  return fa;
}

}  // namespace folddiff

#endif
