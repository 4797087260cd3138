#include "csvq/covq.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <vector>

namespace csvq {

std::string to_string(CodebookDomain domain) {
  return domain == CodebookDomain::kSource ? "source" : "measurement";
}

int Codebook::rate_bits() const { return std::countr_zero(size()); }

void Codebook::validate() const {
  if (size() == 0 || !std::has_single_bit(size())) {
    throw std::invalid_argument("codebook size must be a power of two");
  }
  if (!vectors.allFinite()) throw NumericalError("codebook contains non-finite entries");
}

EncoderTables EncoderTables::build(const Codebook& codebook, const Dmc& dmc) {
  if (codebook.size() != dmc.size()) {
    throw std::invalid_argument("codebook size " + std::to_string(codebook.size()) +
                                " does not match channel alphabet " + std::to_string(dmc.size()));
  }
  EncoderTables t;
  t.twice_expected = 2.0 * dmc.expect(codebook.vectors);
  t.energy = dmc.expect(Vector(codebook.vectors.rowwise().squaredNorm()));
  return t;
}

Vector EncoderTables::spread() const {
  Vector s = energy - (0.5 * twice_expected).rowwise().squaredNorm();
  return s.cwiseMax(0.0);
}

EncodeResult covq_encode(const Vector& x_tilde, const EncoderTables& tables, EncoderOpCount* ops) {
  if (x_tilde.size() != tables.twice_expected.cols()) {
    throw std::invalid_argument("encode: vector dimension differs from codebook dimension");
  }
  const auto dim = x_tilde.size();
  EncodeResult best{0, 0.0};
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto row = tables.twice_expected.row(static_cast<Eigen::Index>(i));
    double dot = 0.0;
    for (Eigen::Index c = 0; c < dim; ++c) dot += row[c] * x_tilde[c];
    const double score = tables.energy[static_cast<Eigen::Index>(i)] - dot;
    if (i == 0 || score < best.score) best = {static_cast<std::uint32_t>(i), score};
  }
  if (ops != nullptr) {
    // Inner product (2N - 1) plus one subtraction per candidate.
    ops->candidate_flops += static_cast<std::uint64_t>(2 * dim) * tables.size();
  }
  return best;
}

std::uint32_t covq_encode(const Vector& x_tilde, const Codebook& codebook, const Dmc& dmc) {
  return covq_encode(x_tilde, EncoderTables::build(codebook, dmc)).index;
}

void encode_batch(const RowMatrix& targets, const EncoderTables& tables, IndexVector& indices,
                  Vector& scores) {
  if (targets.cols() != tables.twice_expected.cols()) {
    throw std::invalid_argument("encode: target dimension differs from codebook dimension");
  }
  // Blocks of samples against chunks of codevectors, small enough that the
  // products stay in cache between the multiply and the scan.
  constexpr Eigen::Index kBlock = 64;
  constexpr Eigen::Index kChunk = 1024;
  const Eigen::Index n = targets.rows();
  const auto size = static_cast<Eigen::Index>(tables.size());
  const Eigen::Index chunk = std::min(kChunk, size);
  indices.assign(static_cast<std::size_t>(n), 0);
  scores.resize(n);
  Matrix products(chunk, kBlock);
  // Sparse targets (reconstructions with few nonzeros) only need the
  // matching columns of the table.
  const Eigen::Index dim = targets.cols();
  Matrix columns;
  std::vector<std::vector<Eigen::Index>> support(static_cast<std::size_t>(kBlock));
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - start);
    const auto block = targets.middleRows(start, rows).transpose();
    bool sparse = true;
    for (Eigen::Index r = 0; r < rows && sparse; ++r) {
      auto& nz = support[static_cast<std::size_t>(r)];
      nz.clear();
      for (Eigen::Index c = 0; c < dim; ++c) {
        if (targets(start + r, c) != 0.0) nz.push_back(c);
      }
      sparse = 3 * static_cast<Eigen::Index>(nz.size()) <= dim;
    }
    if (sparse && columns.size() == 0) columns = tables.twice_expected;
    for (Eigen::Index c0 = 0; c0 < size; c0 += chunk) {
      const Eigen::Index len = std::min(chunk, size - c0);
      if (sparse) {
        for (Eigen::Index r = 0; r < rows; ++r) {
          auto dst = products.col(r).head(len);
          dst.setZero();
          for (Eigen::Index c : support[static_cast<std::size_t>(r)]) {
            dst.noalias() += targets(start + r, c) * columns.col(c).segment(c0, len);
          }
        }
      } else {
        products.topLeftCorner(len, rows).noalias() = tables.twice_expected.middleRows(c0, len) * block;
      }
      const auto energy = tables.energy.segment(c0, len);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto col = products.col(r).head(len);
        const double m = (energy - col).minCoeff();
        // Strict comparison: earlier chunks win ties.
        if (c0 != 0 && !(m < scores[start + r])) continue;
        // Lowest index attaining the minimum; the subtraction is recomputed exactly.
        Eigen::Index i = 0;
        while (i + 1 < len && energy[i] - col[i] != m) ++i;
        scores[start + r] = m;
        indices[static_cast<std::size_t>(start + r)] = static_cast<std::uint32_t>(c0 + i);
      }
    }
  }
}

CellStatistics accumulate_cells(const RowMatrix& targets, const IndexVector& indices,
                                std::size_t size) {
  if (static_cast<std::size_t>(targets.rows()) != indices.size()) {
    throw std::invalid_argument("accumulate_cells: one index per target row required");
  }
  CellStatistics stats;
  stats.sums = RowMatrix::Zero(static_cast<Eigen::Index>(size), targets.cols());
  stats.counts.assign(size, 0);
  for (Eigen::Index r = 0; r < targets.rows(); ++r) {
    const auto i = indices[static_cast<std::size_t>(r)];
    if (i >= size) throw std::out_of_range("accumulate_cells: index out of range");
    stats.sums.row(i) += targets.row(r);
    ++stats.counts[i];
  }
  return stats;
}

Codebook covq_decoder_update(const RowMatrix& targets, const IndexVector& indices, const Dmc& dmc,
                             const Codebook& previous) {
  if (previous.size() != dmc.size() || previous.dim() != targets.cols()) {
    throw std::invalid_argument("decoder update: codebook shape inconsistent with inputs");
  }
  const CellStatistics stats = accumulate_cells(targets, indices, dmc.size());
  Vector counts(static_cast<Eigen::Index>(dmc.size()));
  for (std::size_t i = 0; i < dmc.size(); ++i) {
    counts[static_cast<Eigen::Index>(i)] = static_cast<double>(stats.counts[i]);
  }
  const RowMatrix numer = dmc.expect_transpose(stats.sums);
  const Vector denom = dmc.expect_transpose(counts);

  Codebook next = previous;
  for (Eigen::Index j = 0; j < denom.size(); ++j) {
    if (denom[j] > 0.0) next.vectors.row(j) = numer.row(j) / denom[j];
  }
  return next;
}

int split_empty_cells(Codebook& codebook, const std::vector<std::uint64_t>& usage, double delta) {
  if (usage.size() != codebook.size()) {
    throw std::invalid_argument("split_empty_cells: usage vector has wrong length");
  }
  const auto busiest = static_cast<Eigen::Index>(
      std::max_element(usage.begin(), usage.end()) - usage.begin());
  if (usage[static_cast<std::size_t>(busiest)] == 0) return 0;
  const Eigen::RowVectorXd source = codebook.vectors.row(busiest);
  int split = 0;
  for (std::size_t j = 0; j < usage.size(); ++j) {
    if (usage[j] != 0) continue;
    ++split;
    const double step = delta * split;
    auto row = codebook.vectors.row(static_cast<Eigen::Index>(j));
    row = source * (1.0 + step);
    if ((row.array() == source.array()).all()) row[0] += step;  // c_max = 0 has no direction to scale
  }
  return split;
}

bool is_non_increasing(const TrainingTrace& trace) {
  for (std::size_t i = 1; i < trace.distortion.size(); ++i) {
    if (trace.distortion[i] > trace.distortion[i - 1]) return false;
  }
  return true;
}

namespace {

struct Pass {
  IndexVector indices;
  Vector scores;
  double distortion = 0.0;
};

Pass run_pass(const RowMatrix& targets, const Vector& target_energy, const Codebook& codebook,
              const Dmc& dmc, double offset) {
  Pass p;
  encode_batch(targets, EncoderTables::build(codebook, dmc), p.indices, p.scores);
  long double total = 0.0L;
  for (Eigen::Index r = 0; r < targets.rows(); ++r) total += p.scores[r] + target_energy[r];
  p.distortion = static_cast<double>(total / static_cast<long double>(targets.rows())) + offset;
  if (!std::isfinite(p.distortion)) throw NumericalError("training distortion is not finite");
  return p;
}

}  // namespace

LloydResult lloyd_train(const RowMatrix& targets, const Dmc& dmc, Codebook init,
                        const TrainConfig& cfg, int max_iters, double rel_tol, double offset,
                        std::string label) {
  if (targets.rows() == 0) throw std::invalid_argument("training set is empty");
  init.validate();
  const Vector energy = targets.rowwise().squaredNorm();

  LloydResult res;
  res.trace.label = std::move(label);
  res.codebook = std::move(init);
  Pass current = run_pass(targets, energy, res.codebook, dmc, offset);
  res.trace.distortion.push_back(current.distortion);
  res.trace.splits.push_back(0);

  for (int it = 0; it < max_iters; ++it) {
    const Codebook updated = covq_decoder_update(targets, current.indices, dmc, res.codebook);
    std::vector<std::uint64_t> usage(dmc.size(), 0);
    for (auto i : current.indices) ++usage[i];

    Codebook candidate = updated;
    int splits = split_empty_cells(candidate, usage, cfg.delta_split);
    Pass next = run_pass(targets, energy, candidate, dmc, offset);
    if (splits > 0 && next.distortion > current.distortion) {
      // Reseeding moved a codevector that still receives channel mass.
      ++res.trace.rejected_splits;
      splits = 0;
      candidate = updated;
      next = run_pass(targets, energy, candidate, dmc, offset);
    }
    if (next.distortion > current.distortion) break;  // rounding-level rise at a fixed point

    const double improvement =
        current.distortion > 0.0 ? (current.distortion - next.distortion) / current.distortion : 0.0;
    res.codebook = std::move(candidate);
    current = std::move(next);
    res.trace.distortion.push_back(current.distortion);
    res.trace.splits.push_back(splits);
    if (improvement < rel_tol || current.distortion <= 0.0) break;
  }
  res.indices = std::move(current.indices);
  res.scores = std::move(current.scores);
  return res;
}

GrowthResult lbg_grow(const RowMatrix& targets, int rate_bits, CodebookDomain domain,
                      const TrainConfig& cfg, double offset) {
  if (rate_bits < 0 || rate_bits > 30) throw std::invalid_argument("rate must be in [0, 30]");
  if (targets.rows() == 0) throw std::invalid_argument("training set is empty");
  const Eigen::RowVectorXd mean = targets.colwise().mean();
  const Eigen::RowVectorXd rms =
      (targets.rowwise() - mean).array().square().colwise().mean().sqrt().matrix();

  Codebook cb;
  cb.domain = domain;
  cb.vectors = mean;

  GrowthResult out;
  for (int r = 0; r <= rate_bits; ++r) {
    if (r > 0) {
      const Eigen::Index half = cb.vectors.rows();
      RowMatrix grown(2 * half, cb.vectors.cols());
      for (Eigen::Index j = 0; j < half; ++j) {
        const Eigen::RowVectorXd c = cb.vectors.row(j);
        const Eigen::RowVectorXd step =
            c.squaredNorm() > 0.0 ? Eigen::RowVectorXd(cfg.delta_split * c)
                                  : Eigen::RowVectorXd(cfg.delta_split * rms);
        grown.row(j) = c - step;
        grown.row(j + half) = c + step;
      }
      cb.vectors = std::move(grown);
    }
    const bool last = r == rate_bits;
    LloydResult lr = lloyd_train(targets, Dmc::noiseless(r), cb, cfg,
                                 last ? cfg.max_iters : cfg.growth_max_iters,
                                 last ? cfg.rel_tol : cfg.growth_rel_tol, offset,
                                 "noiseless-r" + std::to_string(r));
    cb = lr.codebook;
    out.traces.push_back(lr.trace);
    if (last) out.final = std::move(lr);
  }
  return out;
}

namespace {

VqTrainResult train_full(const RowMatrix& targets, const Dmc& dmc, const TrainConfig& cfg,
                         CodebookDomain domain) {
  GrowthResult grown = lbg_grow(targets, dmc.rate_bits(), domain, cfg);
  if (dmc.is_identity()) {
    return {grown.final.codebook, std::move(grown.traces), grown.final.trace.distortion.back()};
  }
  LloydResult lr = lloyd_train(targets, dmc, grown.final.codebook, cfg, cfg.max_iters,
                               cfg.rel_tol, 0.0, "noisy");
  grown.traces.push_back(lr.trace);
  return {lr.codebook, std::move(grown.traces), lr.trace.distortion.back()};
}

VqTrainResult train_refine(const RowMatrix& targets, const Dmc& dmc, const Codebook& init,
                           const TrainConfig& cfg) {
  LloydResult lr = lloyd_train(targets, dmc, init, cfg, cfg.max_iters, cfg.rel_tol, 0.0,
                               dmc.is_identity() ? "noiseless" : "noisy");
  const double d = lr.trace.distortion.back();
  return {lr.codebook, {lr.trace}, d};
}

}  // namespace

VqTrainResult train_covq(const RowMatrix& x_tilde, const Dmc& dmc, const TrainConfig& cfg) {
  return train_full(x_tilde, dmc, cfg, CodebookDomain::kSource);
}

VqTrainResult train_covq_from(const RowMatrix& x_tilde, const Dmc& dmc, const Codebook& init,
                              const TrainConfig& cfg) {
  return train_refine(x_tilde, dmc, init, cfg);
}

std::uint32_t nnc_encode(const Vector& y, const Codebook& codebook, const Dmc& dmc) {
  return covq_encode(y, codebook, dmc);
}

Codebook nnc_decoder_update(const RowMatrix& y, const IndexVector& indices, const Dmc& dmc,
                            const Codebook& previous) {
  return covq_decoder_update(y, indices, dmc, previous);
}

VqTrainResult train_nnc(const RowMatrix& y, const Dmc& dmc, const TrainConfig& cfg) {
  return train_full(y, dmc, cfg, CodebookDomain::kMeasurement);
}

VqTrainResult train_nnc_from(const RowMatrix& y, const Dmc& dmc, const Codebook& init,
                             const TrainConfig& cfg) {
  return train_refine(y, dmc, init, cfg);
}

}  // namespace csvq
