#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csvq/core_model.hpp"
#include "csvq/types.hpp"

namespace csvq {

// ---------------------------------------------------------------------------
// Sparse reconstruction x~(y)
// ---------------------------------------------------------------------------

enum class EstimatorMode {
  kAuto,    ///< exact when admissible, OMP otherwise
  kExact,   ///< enumerate every support
  kOmp,     ///< orthogonal matching pursuit with K iterations
  kOracle,  ///< x~ = x; models the perfect-recovery regime
};

EstimatorMode parse_estimator_mode(const std::string& text);
std::string to_string(EstimatorMode mode);

struct MmseConfig {
  EstimatorMode mode = EstimatorMode::kAuto;
  std::uint64_t enumeration_cap = 1'000'000;
  int exact_max_n = 16;
};

/// Conditional-mean estimator E[X | y] for the Gaussian-coefficient,
/// uniform-support prior. Per-support factors depend only on the sensing
/// matrix, so they are built once and reused for every observation.
class ExactMmse {
 public:
  ExactMmse(const SensingModel& model, const SourceSpec& spec,
            std::uint64_t enumeration_cap = 1'000'000);

  Vector estimate(const Vector& y) const;
  /// Also returns p(S | y) in enumeration order (lexicographic supports).
  Vector estimate(const Vector& y, Vector& posterior_weights) const;

  std::size_t support_count() const { return supports_.size(); }
  const std::vector<std::vector<int>>& supports() const { return supports_; }

 private:
  int n_ = 0;
  int m_ = 0;
  int k_ = 0;
  double sigma_w2_ = 0.0;
  Matrix phi_;
  std::vector<std::vector<int>> supports_;
  // Row-major K x K inverse of (Phi_S^T Phi_S / s2 + I) per support.
  std::vector<double> precision_inv_;
  std::vector<double> half_log_det_;
};

/// One-shot convenience wrapper around ExactMmse.
Vector mmse_exact(const Vector& y, const SensingModel& model, const SourceSpec& spec);

struct OmpResult {
  Vector x;
  std::vector<int> support;  // in selection order
  bool rank_deficient = false;
};

/// k rounds of greedy atom selection followed by least squares on the
/// selected columns. Ties go to the lowest column index.
OmpResult omp(const Vector& y, const Matrix& phi, int k);

/// Resolved x~(y) reconstructor shared by encoders and NNC decoders.
class SparseEstimator {
 public:
  SparseEstimator(const SensingModel& model, const SourceSpec& spec, const MmseConfig& cfg);

  EstimatorMode mode() const { return mode_; }
  /// Not available in oracle mode; callers substitute the true source.
  Vector estimate(const Vector& y) const;

 private:
  EstimatorMode mode_;
  int k_;
  Matrix phi_;
  std::shared_ptr<const ExactMmse> exact_;
};

/// Picks exact or OMP for kAuto following the enumeration cap and size limit.
EstimatorMode resolve_estimator_mode(const SensingModel& model, const SourceSpec& spec,
                                     const MmseConfig& cfg);

// ---------------------------------------------------------------------------
// Scalar quantization
// ---------------------------------------------------------------------------

/// Sorted reproduction levels; midpoints between neighbours are thresholds.
struct ScalarCodebook {
  std::vector<double> levels;

  int rate_bits() const;
  std::uint32_t encode(double value) const;
  double decode(std::uint32_t index) const { return levels.at(index); }
};

struct ScalarTrainResult {
  ScalarCodebook codebook;
  std::vector<double> distortion_trace;  // mean squared error per iteration
  int split_events = 0;
};

/// Lloyd iteration on the given samples (needs >= 1000 * 2^rate of them).
ScalarTrainResult lloyd_scalar(int rate_bits, std::span<const double> samples,
                               double rel_tol = 1e-6, int max_iters = 1000,
                               double delta_split = 1e-3);

/// Lloyd codebook for N(0,1), trained once per rate on a fixed-seed sample
/// set and cached for the life of the process.
const ScalarCodebook& gaussian_scalar_codebook(int rate_bits);
/// The cached training run behind gaussian_scalar_codebook.
const ScalarTrainResult& gaussian_scalar_training(int rate_bits);

}  // namespace csvq
