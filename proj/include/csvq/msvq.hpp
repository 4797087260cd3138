#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "csvq/channel.hpp"
#include "csvq/covq.hpp"
#include "csvq/types.hpp"

namespace csvq {

/// L-stage quantizer: stage l sends R_l bits over its own channel and the
/// decoder output is the sum of the received stage codevectors.
struct StagePlan {
  std::vector<int> stage_rates;
  std::vector<Dmc> stage_channels;
  std::vector<Codebook> stage_codebooks;

  int stages() const { return static_cast<int>(stage_rates.size()); }
  int total_rate() const;
  bool trained() const { return stage_codebooks.size() == stage_rates.size(); }
  /// Checks rates, channel widths and (if present) codebook sizes.
  void validate() const;
};

/// Splits `total` bits over `stages` as evenly as possible; earlier stages
/// take the leftover bits (15 over 2 stages -> 8 + 7).
std::vector<int> split_rate(int total, int stages);

/// Channel-averaged tables for every trained stage plus the cross-stage
/// inner products 2 E[c_{J_l} | i_l]^T E[c_{J_t} | i_t] where they fit in memory.
class MsvqEncoder {
 public:
  explicit MsvqEncoder(const StagePlan& plan, std::size_t cross_table_limit = std::size_t{1} << 22);

  int stages() const { return static_cast<int>(tables_.size()); }
  const EncoderTables& tables(int stage) const { return tables_.at(static_cast<std::size_t>(stage)); }

  /// Stage rule for stage `stage` (0-based) given the indices already chosen
  /// at stages 0..stage-1. The score omits terms that do not depend on i_l.
  EncodeResult encode_stage(const Vector& x_tilde, int stage,
                            std::span<const std::uint32_t> prior_indices,
                            EncoderOpCount* ops = nullptr) const;

  /// All stages in sequence.
  std::vector<std::uint32_t> encode(const Vector& x_tilde, EncoderOpCount* ops = nullptr) const;

  /// Batched stage rule over rows of `x_tilde`; `prior` holds one index
  /// vector per earlier stage.
  void encode_stage_batch(const RowMatrix& x_tilde, int stage,
                          const std::vector<IndexVector>& prior, IndexVector& indices,
                          Vector& scores) const;

  /// x_tilde minus the channel-averaged reproductions of stages 0..stage-1.
  RowMatrix residual(const RowMatrix& x_tilde, const std::vector<IndexVector>& prior,
                     int stage) const;

 private:
  std::vector<EncoderTables> tables_;
  std::vector<RowMatrix> expected_;
  // cross_[l][t] is empty when the table would exceed the limit.
  std::vector<std::vector<Matrix>> cross_;
};

/// Free-function form of the stage rule.
EncodeResult msvq_encode_stage(const Vector& x_tilde, int stage,
                               std::span<const std::uint32_t> prior_indices,
                               const StagePlan& plan);

/// Stage-l centroid: the channel-averaged mean of x_tilde minus the expected
/// reproductions of the earlier stages, over samples mapped to each index.
Codebook msvq_decoder_update_stage(const RowMatrix& x_tilde,
                                   const std::vector<IndexVector>& stage_indices,
                                   const StagePlan& plan, int stage);

struct MsvqTrainResult {
  StagePlan plan;
  std::vector<IndexVector> indices;               // final training indices per stage
  std::vector<std::vector<TrainingTrace>> traces;  // per stage
  std::vector<double> stage_distortion;            // D_l after each stage
};

/// Sequential stage design. Stage l sees the earlier stages frozen and the
/// later ones absent. With `init` the noisy design starts from its stage
/// codebooks; otherwise each stage is grown by splitting on a noiseless
/// channel and then refined on its own channel.
MsvqTrainResult train_msvq(const RowMatrix& targets, const std::vector<int>& stage_rates,
                           const std::vector<Dmc>& channels, const TrainConfig& cfg,
                           CodebookDomain domain = CodebookDomain::kSource,
                           const StagePlan* init = nullptr);

/// Measurement-space multi-stage baseline on y.
MsvqTrainResult train_msnnc(const RowMatrix& y, const std::vector<int>& stage_rates,
                            const std::vector<Dmc>& channels, const TrainConfig& cfg,
                            const StagePlan* init = nullptr);

/// (2N + 1) sum_l 2^{R_l}: the per-vector encoder cost of the stage rules.
std::uint64_t msvq_encoder_flop_budget(int dim, const std::vector<int>& stage_rates);

}  // namespace csvq
