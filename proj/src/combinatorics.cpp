#include "csvq/combinatorics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace csvq {

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step.
    const std::uint64_t factor = static_cast<std::uint64_t>(n - k + i);
    if (result > std::numeric_limits<std::uint64_t>::max() / factor) {
      throw std::overflow_error("binomial coefficient exceeds 64 bits");
    }
    result = result * factor / static_cast<std::uint64_t>(i);
  }
  return result;
}

double log2_binomial(int n, int k) {
  if (k < 0 || k > n) throw std::invalid_argument("log2_binomial: k outside [0, n]");
  const double ln = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return ln / std::log(2.0);
}

bool next_combination(std::vector<int>& subset, int n) {
  const int k = static_cast<int>(subset.size());
  int i = k - 1;
  while (i >= 0 && subset[static_cast<std::size_t>(i)] == n - k + i) --i;
  if (i < 0) return false;
  ++subset[static_cast<std::size_t>(i)];
  for (int j = i + 1; j < k; ++j) {
    subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
  }
  return true;
}

std::uint64_t subset_rank(const std::vector<int>& sorted_subset) {
  std::uint64_t rank = 0;
  for (std::size_t i = 0; i < sorted_subset.size(); ++i) {
    rank += binomial(sorted_subset[i], static_cast<int>(i) + 1);
  }
  return rank;
}

std::vector<int> subset_unrank(std::uint64_t rank, int k) {
  std::vector<int> subset(static_cast<std::size_t>(k));
  for (int i = k; i >= 1; --i) {
    // Largest c with C(c, i) <= rank.
    int c = i - 1;
    while (binomial(c + 1, i) <= rank) ++c;
    subset[static_cast<std::size_t>(i - 1)] = c;
    rank -= binomial(c, i);
  }
  return subset;
}

}  // namespace csvq
