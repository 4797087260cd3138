#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csvq/channel.hpp"
#include "csvq/types.hpp"

namespace csvq {

enum class CodebookDomain { kSource, kMeasurement };

std::string to_string(CodebookDomain domain);

/// Decoder lookup table: row j is the reproduction for received index j.
/// Encoder regions are never stored; they are induced by the encoder rule.
struct Codebook {
  RowMatrix vectors;
  CodebookDomain domain = CodebookDomain::kSource;

  std::size_t size() const { return static_cast<std::size_t>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
  int rate_bits() const;
  /// Throws unless the row count is a power of two and every entry is finite.
  void validate() const;
};

struct TrainConfig {
  int max_iters = 200;
  double rel_tol = 1e-5;
  double delta_split = 1e-3;
  std::size_t n_train = 100'000;
  // Intermediate rates of the splitting (growth) phase stop earlier.
  int growth_max_iters = 25;
  double growth_rel_tol = 1e-3;
};

/// Per-index channel averages used by the encoder:
///   twice_expected.row(i) = 2 sum_j P(j|i) c_j
///   energy[i]             =   sum_j P(j|i) |c_j|^2
struct EncoderTables {
  RowMatrix twice_expected;
  Vector energy;

  static EncoderTables build(const Codebook& codebook, const Dmc& dmc);
  std::size_t size() const { return static_cast<std::size_t>(energy.size()); }
  RowMatrix expected() const { return 0.5 * twice_expected; }
  /// sum_j P(j|i) |c_j - E[c_J | i]|^2: the channel-induced spread of index i.
  Vector spread() const;
};

/// Floating-point operations spent in the per-candidate encoder loop.
struct EncoderOpCount {
  std::uint64_t candidate_flops = 0;
  std::uint64_t setup_flops = 0;  // per-sample work outside the candidate loop
};

struct EncodeResult {
  std::uint32_t index = 0;
  /// sum_j P(j|i) |c_j|^2 - 2 x^T sum_j P(j|i) c_j at the chosen index.
  /// Adding |x|^2 gives E[|x - c_J|^2 | I = index].
  double score = 0.0;
};

/// Channel-optimized nearest-codevector rule. Ties go to the lowest index.
EncodeResult covq_encode(const Vector& x_tilde, const EncoderTables& tables,
                         EncoderOpCount* ops = nullptr);
std::uint32_t covq_encode(const Vector& x_tilde, const Codebook& codebook, const Dmc& dmc);

/// The same rule over every row of `targets`, in fixed-size blocks.
void encode_batch(const RowMatrix& targets, const EncoderTables& tables, IndexVector& indices,
                  Vector& scores);

struct CellStatistics {
  RowMatrix sums;                     // per-index sum of targets
  std::vector<std::uint64_t> counts;  // per-index sample count
};

CellStatistics accumulate_cells(const RowMatrix& targets, const IndexVector& indices,
                                std::size_t size);

/// Sample-average centroid over the channel:
///   c_j = sum_i P(j|i) S_i / sum_i P(j|i) n_i.
/// Indices with zero channel mass keep their `previous` codevector.
Codebook covq_decoder_update(const RowMatrix& targets, const IndexVector& indices, const Dmc& dmc,
                             const Codebook& previous);

/// Replaces every never-used index j with c_max (1 + m delta), where c_max is
/// the most used codevector and m = 1, 2, .. counts the empty cells in index
/// order. Returns the number of replaced rows.
int split_empty_cells(Codebook& codebook, const std::vector<std::uint64_t>& usage, double delta);

struct TrainingTrace {
  std::string label;
  std::vector<double> distortion;  // one entry per accepted iteration
  std::vector<int> splits;         // cells reseeded before each entry
  int rejected_splits = 0;         // split attempts that would have raised distortion
};

/// Returns true when every entry is <= its predecessor.
bool is_non_increasing(const TrainingTrace& trace);

struct LloydResult {
  Codebook codebook;
  IndexVector indices;
  Vector scores;
  TrainingTrace trace;
};

/// Alternates encode and decoder update at a fixed rate starting from `init`.
/// The recorded distortion is mean(score + |t|^2) + offset, i.e. the exact
/// channel expectation of |t - c_J|^2 over the training set. An iteration
/// that would raise it is not taken.
LloydResult lloyd_train(const RowMatrix& targets, const Dmc& dmc, Codebook init,
                        const TrainConfig& cfg, int max_iters, double rel_tol,
                        double offset = 0.0, std::string label = {});

struct GrowthResult {
  LloydResult final;
  std::vector<TrainingTrace> traces;  // one per rate, 0..R
};

/// LBG splitting from a single centroid up to 2^rate codevectors, with a
/// noiseless channel at every rate.
GrowthResult lbg_grow(const RowMatrix& targets, int rate_bits, CodebookDomain domain,
                      const TrainConfig& cfg, double offset = 0.0);

struct VqTrainResult {
  Codebook codebook;
  std::vector<TrainingTrace> traces;
  double final_distortion = 0.0;
};

/// Full single-stage design: noiseless splitting design first, then (for a
/// noisy channel) Lloyd iterations on `dmc` starting from that codebook.
VqTrainResult train_covq(const RowMatrix& x_tilde, const Dmc& dmc, const TrainConfig& cfg);
/// Noisy-channel refinement from a previously trained codebook.
VqTrainResult train_covq_from(const RowMatrix& x_tilde, const Dmc& dmc, const Codebook& init,
                              const TrainConfig& cfg);

// Measurement-space baseline. Identical rules applied to y with a
// measurement-domain codebook; reconstruction happens after decoding.
std::uint32_t nnc_encode(const Vector& y, const Codebook& codebook, const Dmc& dmc);
Codebook nnc_decoder_update(const RowMatrix& y, const IndexVector& indices, const Dmc& dmc,
                            const Codebook& previous);
VqTrainResult train_nnc(const RowMatrix& y, const Dmc& dmc, const TrainConfig& cfg);
VqTrainResult train_nnc_from(const RowMatrix& y, const Dmc& dmc, const Codebook& init,
                             const TrainConfig& cfg);

}  // namespace csvq
