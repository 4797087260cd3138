#pragma once

#include <vector>

#include "csvq/types.hpp"

namespace csvq {

/// Exactly-K-sparse source in R^N with i.i.d. N(0,1) nonzeros on a support
/// drawn uniformly from all C(N,K) subsets.
struct SourceSpec {
  int n = 0;
  int k = 0;

  /// Throws std::invalid_argument unless 0 <= k <= n and n >= 1.
  void validate() const;
};

struct SparseVector {
  Vector values;
  std::vector<int> support;  // sorted ascending
};

/// Sensing matrix with unit-norm columns plus the measurement-noise variance.
class SensingModel {
 public:
  /// Columns are normalized here; a zero column is rejected.
  SensingModel(Matrix phi, double sigma_w2);

  const Matrix& phi() const { return phi_; }
  double sigma_w2() const { return sigma_w2_; }
  int n() const { return static_cast<int>(phi_.cols()); }
  int m() const { return static_cast<int>(phi_.rows()); }

 private:
  Matrix phi_;
  double sigma_w2_;
};

SparseVector generate_source(const SourceSpec& spec, Rng& rng);

/// M x N Gaussian matrix with N(0, 1/M) entries, columns scaled to unit norm.
Matrix generate_sensing_matrix(int n, int m, Rng& rng);

/// Scales every column to unit l2 norm. Throws on a zero column.
Matrix normalize_columns(Matrix phi);

/// y = phi x + w with w ~ N(0, sigma_w2 I). No noise draws when sigma_w2 == 0.
Vector measure(const Vector& x, const SensingModel& model, Rng& rng);

/// Largest normalized inner product between two distinct columns.
double mutual_coherence(const Matrix& phi);

}  // namespace csvq
