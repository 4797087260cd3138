#pragma once

#include <cstdint>
#include <vector>

namespace csvq {

/// C(n, k) exactly. Throws std::overflow_error past 2^64 - 1.
std::uint64_t binomial(int n, int k);

/// log2 C(n, k) through log-gamma; valid for large n.
double log2_binomial(int n, int k);

/// Advances a sorted k-subset of {0..n-1} to its lexicographic successor.
/// Returns false after the last subset.
bool next_combination(std::vector<int>& subset, int n);

/// Rank of a sorted k-subset in the combinatorial number system:
/// sum_i C(s_i, i + 1). Ranks are a bijection onto [0, C(n,k)).
std::uint64_t subset_rank(const std::vector<int>& sorted_subset);

/// Inverse of subset_rank for k-subsets.
std::vector<int> subset_unrank(std::uint64_t rank, int k);

}  // namespace csvq
