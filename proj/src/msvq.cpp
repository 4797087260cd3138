#include "csvq/msvq.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace csvq {

int StagePlan::total_rate() const {
  return std::accumulate(stage_rates.begin(), stage_rates.end(), 0);
}

void StagePlan::validate() const {
  if (stage_rates.empty()) throw std::invalid_argument("stage plan needs at least one stage");
  if (stage_channels.size() != stage_rates.size()) {
    throw std::invalid_argument("stage plan needs one channel per stage");
  }
  for (std::size_t l = 0; l < stage_rates.size(); ++l) {
    if (stage_rates[l] < 0) throw std::invalid_argument("stage rates must be non-negative");
    if (stage_channels[l].rate_bits() != stage_rates[l]) {
      throw std::invalid_argument("stage " + std::to_string(l + 1) +
                                  ": channel width differs from stage rate");
    }
  }
  if (stage_codebooks.size() > stage_rates.size()) {
    throw std::invalid_argument("stage plan has more codebooks than stages");
  }
  for (std::size_t l = 0; l < stage_codebooks.size(); ++l) {
    stage_codebooks[l].validate();
    if (stage_codebooks[l].rate_bits() != stage_rates[l]) {
      throw std::invalid_argument("stage " + std::to_string(l + 1) +
                                  ": codebook size differs from 2^R_l");
    }
    if (stage_codebooks[l].dim() != stage_codebooks.front().dim()) {
      throw std::invalid_argument("stage codebooks must share one dimension");
    }
  }
}

std::vector<int> split_rate(int total, int stages) {
  if (stages < 1) throw std::invalid_argument("split_rate: need at least one stage");
  if (total < 0) throw std::invalid_argument("split_rate: negative total rate");
  std::vector<int> rates(static_cast<std::size_t>(stages), total / stages);
  for (int l = 0; l < total % stages; ++l) ++rates[static_cast<std::size_t>(l)];
  return rates;
}

MsvqEncoder::MsvqEncoder(const StagePlan& plan, std::size_t cross_table_limit) {
  plan.validate();
  const std::size_t trained = plan.stage_codebooks.size();
  for (std::size_t l = 0; l < trained; ++l) {
    tables_.push_back(EncoderTables::build(plan.stage_codebooks[l], plan.stage_channels[l]));
    expected_.push_back(tables_.back().expected());
  }
  cross_.resize(trained);
  for (std::size_t l = 0; l < trained; ++l) {
    cross_[l].resize(l);
    for (std::size_t t = 0; t < l; ++t) {
      if (tables_[l].size() * tables_[t].size() <= cross_table_limit) {
        cross_[l][t] = tables_[l].twice_expected * expected_[t].transpose();
      }
    }
  }
}

EncodeResult MsvqEncoder::encode_stage(const Vector& x_tilde, int stage,
                                       std::span<const std::uint32_t> prior_indices,
                                       EncoderOpCount* ops) const {
  if (stage < 0 || stage >= stages()) throw std::out_of_range("stage index out of range");
  const auto l = static_cast<std::size_t>(stage);
  if (prior_indices.size() < l) throw std::invalid_argument("missing prior-stage indices");
  if (l == 0) return covq_encode(x_tilde, tables_[0], ops);

  const EncoderTables& tab = tables_[l];
  if (x_tilde.size() != tab.twice_expected.cols()) {
    throw std::invalid_argument("encode: vector dimension differs from codebook dimension");
  }
  // Third term of the stage rule, one value per candidate i_l.
  Vector cross = Vector::Zero(static_cast<Eigen::Index>(tab.size()));
  for (std::size_t t = 0; t < l; ++t) {
    const auto it = prior_indices[t];
    if (it >= tables_[t].size()) throw std::out_of_range("prior-stage index out of range");
    if (cross_[l][t].size() > 0) {
      cross += cross_[l][t].col(it);
    } else {
      cross.noalias() += tab.twice_expected * expected_[t].row(it).transpose();
      if (ops != nullptr) {
        ops->setup_flops += static_cast<std::uint64_t>(2 * x_tilde.size()) * tab.size();
      }
    }
  }

  const auto dim = x_tilde.size();
  EncodeResult best{0, 0.0};
  for (std::size_t i = 0; i < tab.size(); ++i) {
    const auto row = tab.twice_expected.row(static_cast<Eigen::Index>(i));
    double dot = 0.0;
    for (Eigen::Index c = 0; c < dim; ++c) dot += row[c] * x_tilde[c];
    const double score = tab.energy[static_cast<Eigen::Index>(i)] - dot +
                         cross[static_cast<Eigen::Index>(i)];
    if (i == 0 || score < best.score) best = {static_cast<std::uint32_t>(i), score};
  }
  if (ops != nullptr) {
    // Inner product, one subtraction, one addition per earlier stage.
    ops->candidate_flops += static_cast<std::uint64_t>(2 * dim + static_cast<Eigen::Index>(l)) *
                            tab.size();
  }
  return best;
}

std::vector<std::uint32_t> MsvqEncoder::encode(const Vector& x_tilde, EncoderOpCount* ops) const {
  std::vector<std::uint32_t> indices;
  for (int l = 0; l < stages(); ++l) indices.push_back(encode_stage(x_tilde, l, indices, ops).index);
  return indices;
}

RowMatrix MsvqEncoder::residual(const RowMatrix& x_tilde, const std::vector<IndexVector>& prior,
                                int stage) const {
  if (prior.size() < static_cast<std::size_t>(stage)) {
    throw std::invalid_argument("missing prior-stage indices");
  }
  RowMatrix r = x_tilde;
  for (int t = 0; t < stage; ++t) {
    const auto& idx = prior[static_cast<std::size_t>(t)];
    const auto& expected = expected_[static_cast<std::size_t>(t)];
    if (idx.size() != static_cast<std::size_t>(r.rows())) {
      throw std::invalid_argument("prior index vector length differs from sample count");
    }
    for (Eigen::Index s = 0; s < r.rows(); ++s) r.row(s) -= expected.row(idx[static_cast<std::size_t>(s)]);
  }
  return r;
}

void MsvqEncoder::encode_stage_batch(const RowMatrix& x_tilde, int stage,
                                     const std::vector<IndexVector>& prior, IndexVector& indices,
                                     Vector& scores) const {
  if (stage < 0 || stage >= stages()) throw std::out_of_range("stage index out of range");
  // e_i - 2 x^T E[c|i] + 2 E[c|i]^T s = e_i - 2 (x - s)^T E[c|i], s = sum of
  // earlier expected reproductions.
  if (stage == 0) {
    encode_batch(x_tilde, tables_[0], indices, scores);
  } else {
    encode_batch(residual(x_tilde, prior, stage), tables_[static_cast<std::size_t>(stage)], indices,
                 scores);
  }
}

EncodeResult msvq_encode_stage(const Vector& x_tilde, int stage,
                               std::span<const std::uint32_t> prior_indices,
                               const StagePlan& plan) {
  return MsvqEncoder(plan).encode_stage(x_tilde, stage, prior_indices);
}

Codebook msvq_decoder_update_stage(const RowMatrix& x_tilde,
                                   const std::vector<IndexVector>& stage_indices,
                                   const StagePlan& plan, int stage) {
  if (stage < 0 || static_cast<std::size_t>(stage) >= plan.stage_codebooks.size()) {
    throw std::out_of_range("stage index out of range");
  }
  if (stage_indices.size() <= static_cast<std::size_t>(stage)) {
    throw std::invalid_argument("missing stage indices");
  }
  const auto l = static_cast<std::size_t>(stage);
  if (l == 0) {
    return covq_decoder_update(x_tilde, stage_indices[0], plan.stage_channels[0],
                               plan.stage_codebooks[0]);
  }
  const MsvqEncoder enc(plan);
  return covq_decoder_update(enc.residual(x_tilde, stage_indices, stage), stage_indices[l],
                             plan.stage_channels[l], plan.stage_codebooks[l]);
}

MsvqTrainResult train_msvq(const RowMatrix& targets, const std::vector<int>& stage_rates,
                           const std::vector<Dmc>& channels, const TrainConfig& cfg,
                           CodebookDomain domain, const StagePlan* init) {
  MsvqTrainResult res;
  res.plan.stage_rates = stage_rates;
  res.plan.stage_channels = channels;
  res.plan.validate();
  if (init != nullptr && (!init->trained() || init->stage_rates != stage_rates)) {
    throw std::invalid_argument("initial stage plan does not match the stage rates");
  }

  RowMatrix residual = targets;
  double offset = 0.0;  // channel spread of the frozen earlier stages
  for (std::size_t l = 0; l < stage_rates.size(); ++l) {
    const Dmc& dmc = channels[l];
    std::vector<TrainingTrace> traces;
    LloydResult lr;
    if (init != nullptr) {
      lr = lloyd_train(residual, dmc, init->stage_codebooks[l], cfg, cfg.max_iters, cfg.rel_tol,
                       offset, dmc.is_identity() ? "noiseless" : "noisy");
      traces.push_back(lr.trace);
    } else {
      GrowthResult grown = lbg_grow(residual, stage_rates[l], domain, cfg, offset);
      traces = grown.traces;
      if (dmc.is_identity()) {
        lr = std::move(grown.final);
      } else {
        lr = lloyd_train(residual, dmc, grown.final.codebook, cfg, cfg.max_iters, cfg.rel_tol,
                         offset, "noisy");
        traces.push_back(lr.trace);
      }
    }
    lr.codebook.domain = domain;

    const EncoderTables tables = EncoderTables::build(lr.codebook, dmc);
    const Vector spread = tables.spread();
    const RowMatrix expected = tables.expected();
    long double spread_sum = 0.0L;
    for (Eigen::Index s = 0; s < residual.rows(); ++s) {
      const auto i = lr.indices[static_cast<std::size_t>(s)];
      spread_sum += spread[i];
      residual.row(s) -= expected.row(i);
    }
    offset += static_cast<double>(spread_sum / static_cast<long double>(residual.rows()));

    res.stage_distortion.push_back(lr.trace.distortion.back());
    res.traces.push_back(std::move(traces));
    res.indices.push_back(std::move(lr.indices));
    res.plan.stage_codebooks.push_back(std::move(lr.codebook));
  }
  return res;
}

MsvqTrainResult train_msnnc(const RowMatrix& y, const std::vector<int>& stage_rates,
                            const std::vector<Dmc>& channels, const TrainConfig& cfg,
                            const StagePlan* init) {
  return train_msvq(y, stage_rates, channels, cfg, CodebookDomain::kMeasurement, init);
}

std::uint64_t msvq_encoder_flop_budget(int dim, const std::vector<int>& stage_rates) {
  std::uint64_t cells = 0;
  for (int r : stage_rates) cells += std::uint64_t{1} << r;
  return static_cast<std::uint64_t>(2 * dim + 1) * cells;
}

}  // namespace csvq
