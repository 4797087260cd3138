#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "csvq/types.hpp"

namespace csvq {

/// Discrete memoryless channel over the index alphabet {0, .., 2^R - 1}.
///
/// P(j|i) is the probability that index j is received when i is sent.
/// A binary symmetric channel is kept in factored form (one 2x2 factor per
/// bit), so expectations over the channel cost R * 2^R * dim instead of
/// 4^R * dim and the transition matrix is never materialized. Dense channels
/// carry the full matrix plus per-row CDFs for sampling.
class Dmc {
 public:
  static Dmc noiseless(int rate_bits);
  /// Natural-binary labelling: index value is the transmitted bit pattern.
  static Dmc bsc(int rate_bits, double epsilon);
  /// Square row-stochastic matrix of side 2^R, p(i, j) = P(j|i).
  static Dmc from_matrix(const Matrix& p);

  int rate_bits() const { return rate_bits_; }
  std::size_t size() const { return std::size_t{1} << rate_bits_; }
  bool is_identity() const;
  std::optional<double> bsc_epsilon() const;

  double probability(std::uint32_t sent, std::uint32_t received) const;

  /// out.row(i) = sum_j P(j|i) rows.row(j): channel-averaged codevectors.
  RowMatrix expect(const RowMatrix& rows) const;
  Vector expect(const Vector& values) const;
  /// out.row(j) = sum_i P(j|i) rows.row(i): mass arriving at each output.
  RowMatrix expect_transpose(const RowMatrix& rows) const;
  Vector expect_transpose(const Vector& values) const;

  std::uint32_t transmit(std::uint32_t sent, Rng& rng) const;

  /// Dense transition matrix; refuses alphabets larger than 2^12.
  Matrix matrix() const;

 private:
  enum class Kind { kIdentity, kBsc, kDense };

  Dmc(Kind kind, int rate_bits) : kind_(kind), rate_bits_(rate_bits) {}
  void butterfly(RowMatrix& rows) const;

  Kind kind_;
  int rate_bits_;
  double epsilon_ = 0.0;
  Matrix dense_;
  std::vector<std::vector<double>> cdf_;
};

/// 1 + e log2 e + (1 - e) log2 (1 - e), with 0 log 0 = 0.
double bsc_capacity(double epsilon);

}  // namespace csvq
