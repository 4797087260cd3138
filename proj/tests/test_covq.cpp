#include <doctest.h>

#include "csvq/covq.hpp"

using namespace csvq;

namespace {

RowMatrix random_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// argmin_i sum_j P(j|i) |x - c_j|^2, written out term by term.
std::uint32_t brute_force_encode(const Vector& x, const Codebook& cb, const Matrix& p) {
  std::uint32_t best = 0;
  double best_val = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double val = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      val += p(i, j) * (x - cb.vectors.row(j).transpose()).squaredNorm();
    }
    if (i == 0 || val < best_val) {
      best_val = val;
      best = static_cast<std::uint32_t>(i);
    }
  }
  return best;
}

Codebook codebook_of(RowMatrix v) {
  Codebook cb;
  cb.vectors = std::move(v);
  return cb;
}

}  // namespace

TEST_CASE("encoder on a two-point codebook") {
  RowMatrix v(2, 2);
  v << 1, 0, -1, 0;
  const Codebook cb = codebook_of(v);
  const EncoderTables t = EncoderTables::build(cb, Dmc::bsc(1, 0.1));
  CHECK(t.expected()(0, 0) == doctest::Approx(0.8));
  CHECK(t.expected()(1, 0) == doctest::Approx(-0.8));
  Vector x(2);
  x << 0.3, 0.0;
  const double s0 = t.energy[0] - t.twice_expected.row(0).dot(x);
  const double s1 = t.energy[1] - t.twice_expected.row(1).dot(x);
  CHECK(s0 == doctest::Approx(0.52));
  CHECK(s1 == doctest::Approx(1.48));
  const EncodeResult r = covq_encode(x, t);
  CHECK(r.index == 0);
  CHECK(r.score == doctest::Approx(0.52));
}

TEST_CASE("noiseless encoder is nearest neighbour") {
  Rng rng = make_stream(41, {});
  const Codebook cb = codebook_of(random_rows(16, 3, rng));
  const Dmc clean = Dmc::noiseless(4);
  for (int t = 0; t < 200; ++t) {
    const Vector x = random_rows(1, 3, rng).row(0).transpose();
    std::uint32_t nearest = 0;
    for (Eigen::Index j = 1; j < 16; ++j) {
      if ((x - cb.vectors.row(j).transpose()).squaredNorm() <
          (x - cb.vectors.row(nearest).transpose()).squaredNorm()) {
        nearest = static_cast<std::uint32_t>(j);
      }
    }
    CHECK(covq_encode(x, cb, clean) == nearest);
  }
}

TEST_CASE("encoder matches the brute-force conditional expectation") {
  Rng rng = make_stream(42, {});
  std::uniform_int_distribution<int> dim(1, 4), rate(1, 4);
  std::uniform_real_distribution<double> eps(0.0, 0.3);
  for (int t = 0; t < 300; ++t) {
    const int n = dim(rng), r = rate(rng);
    const Dmc dmc = Dmc::bsc(r, eps(rng));
    const Codebook cb = codebook_of(random_rows(Eigen::Index{1} << r, n, rng));
    const Matrix p = dmc.matrix();
    const EncoderTables tables = EncoderTables::build(cb, dmc);
    const RowMatrix xs = random_rows(20, n, rng, 1.5);
    IndexVector batch;
    Vector scores;
    encode_batch(xs, tables, batch, scores);
    for (Eigen::Index s = 0; s < xs.rows(); ++s) {
      const Vector x = xs.row(s).transpose();
      const std::uint32_t want = brute_force_encode(x, cb, p);
      CHECK(covq_encode(x, tables).index == want);
      CHECK(batch[static_cast<std::size_t>(s)] == want);
    }
  }
}

TEST_CASE("encoder operation count") {
  Rng rng = make_stream(43, {});
  const Codebook cb = codebook_of(random_rows(32, 5, rng));
  const EncoderTables t = EncoderTables::build(cb, Dmc::bsc(5, 0.01));
  EncoderOpCount ops;
  covq_encode(Vector::Zero(5), t, &ops);
  CHECK(ops.candidate_flops == 2 * 5 * 32);
}

TEST_CASE("decoder update") {
  SUBCASE("noiseless gives cell means") {
    RowMatrix x(4, 2);
    x << 1, 1, 3, 1, 0, -2, 0, -4;
    const IndexVector idx{0, 0, 1, 1};
    const Codebook prev = codebook_of(RowMatrix::Zero(2, 2));
    const Codebook cb = covq_decoder_update(x, idx, Dmc::noiseless(1), prev);
    CHECK(cb.vectors(0, 0) == 2.0);
    CHECK(cb.vectors(0, 1) == 1.0);
    CHECK(cb.vectors(1, 0) == 0.0);
    CHECK(cb.vectors(1, 1) == -3.0);
  }
  SUBCASE("uniform channel gives the global mean") {
    Rng rng = make_stream(44, {});
    const RowMatrix x = random_rows(40, 3, rng);
    IndexVector idx(40);
    for (std::size_t s = 0; s < 40; ++s) idx[s] = static_cast<std::uint32_t>(s % 4);
    const Codebook cb = covq_decoder_update(x, idx, Dmc::from_matrix(Matrix::Constant(4, 4, 0.25)),
                                            codebook_of(RowMatrix::Zero(4, 3)));
    const Eigen::RowVectorXd mean = x.colwise().mean();
    for (Eigen::Index j = 0; j < 4; ++j) CHECK((cb.vectors.row(j) - mean).norm() < 1e-12);
  }
  SUBCASE("two samples over a BSC") {
    RowMatrix x(2, 2);
    x << 1, 0, 0, 2;
    const Codebook cb = covq_decoder_update(x, {0, 1}, Dmc::bsc(1, 0.1),
                                            codebook_of(RowMatrix::Zero(2, 2)));
    // c_j = sum_i P(j|i) S_i / sum_i P(j|i) n_i
    CHECK(std::abs(cb.vectors(0, 0) - 0.9) < 1e-12);
    CHECK(std::abs(cb.vectors(0, 1) - 0.2) < 1e-12);
    CHECK(std::abs(cb.vectors(1, 0) - 0.1) < 1e-12);
    CHECK(std::abs(cb.vectors(1, 1) - 1.8) < 1e-12);
  }
  SUBCASE("indices without channel mass keep their codevector") {
    RowMatrix x(2, 1);
    x << 1, 3;
    RowMatrix prev(2, 1);
    prev << 7, 9;
    const Codebook cb = covq_decoder_update(x, {0, 0}, Dmc::noiseless(1), codebook_of(prev));
    CHECK(cb.vectors(0, 0) == 2.0);
    CHECK(cb.vectors(1, 0) == 9.0);
  }
}

TEST_CASE("empty-cell splitting") {
  RowMatrix v(2, 2);
  v << 2, 0, 5, 5;
  Codebook cb = codebook_of(v);
  CHECK(split_empty_cells(cb, {3, 1}, 1e-3) == 0);
  CHECK(cb.vectors == v);
  CHECK(split_empty_cells(cb, {3, 0}, 1e-3) == 1);
  CHECK(cb.vectors(1, 0) == doctest::Approx(2.002));
  CHECK(cb.vectors(1, 1) == 0.0);
}

TEST_CASE("Lloyd training never raises distortion") {
  Rng rng = make_stream(45, {});
  const RowMatrix x = random_rows(5000, 3, rng);
  TrainConfig cfg;
  for (double eps : {0.0, 0.05, 0.2}) {
    const VqTrainResult r = train_covq(x, eps == 0.0 ? Dmc::noiseless(5) : Dmc::bsc(5, eps), cfg);
    for (const auto& t : r.traces) CHECK(is_non_increasing(t));
    CHECK(r.codebook.size() == 32);
  }
}

TEST_CASE("rate zero is the sample mean") {
  Rng rng = make_stream(46, {});
  const RowMatrix x = random_rows(1000, 2, rng);
  const VqTrainResult r = train_covq(x, Dmc::noiseless(0), TrainConfig{});
  const Eigen::RowVectorXd mean = x.colwise().mean();
  CHECK((r.codebook.vectors.row(0) - mean).norm() < 1e-12);
  const double var = (x.rowwise() - mean).rowwise().squaredNorm().mean();
  CHECK(r.final_distortion == doctest::Approx(var).epsilon(1e-10));
}

TEST_CASE("recorded distortion equals the channel expectation") {
  Rng rng = make_stream(47, {});
  const RowMatrix x = random_rows(500, 2, rng);
  const Dmc dmc = Dmc::bsc(3, 0.1);
  const VqTrainResult r = train_covq(x, dmc, TrainConfig{});
  const Matrix p = dmc.matrix();
  double total = 0.0;
  for (Eigen::Index s = 0; s < x.rows(); ++s) {
    const Vector xs = x.row(s).transpose();
    const std::uint32_t i = covq_encode(xs, r.codebook, dmc);
    for (Eigen::Index j = 0; j < 8; ++j) {
      total += p(i, j) * (xs - r.codebook.vectors.row(j).transpose()).squaredNorm();
    }
  }
  CHECK(total / x.rows() == doctest::Approx(r.final_distortion).epsilon(1e-10));
}

TEST_CASE("measurement-domain wrappers are the same engine") {
  Rng rng = make_stream(48, {});
  const RowMatrix y = random_rows(2000, 2, rng);
  const Dmc dmc = Dmc::bsc(3, 0.05);
  const VqTrainResult a = train_nnc(y, dmc, TrainConfig{});
  const VqTrainResult b = train_covq(y, dmc, TrainConfig{});
  CHECK(a.codebook.domain == CodebookDomain::kMeasurement);
  CHECK(a.codebook.vectors == b.codebook.vectors);
  const Vector v = y.row(3).transpose();
  CHECK(nnc_encode(v, a.codebook, dmc) == covq_encode(v, b.codebook, dmc));
}
