#include <doctest.h>

#include <bit>

#include "csvq/channel.hpp"

using namespace csvq;

namespace {

double bsc_entry(std::uint32_t i, std::uint32_t j, int r, double e) {
  const int h = std::popcount(i ^ j);
  return std::pow(e, h) * std::pow(1.0 - e, r - h);
}

}  // namespace

TEST_CASE("BSC transition probabilities") {
  CHECK(Dmc::bsc(3, 0.0).matrix() == Matrix::Identity(8, 8));
  CHECK(Dmc::noiseless(2).is_identity());
  const Matrix p1 = Dmc::bsc(1, 0.1).matrix();
  CHECK(p1(0, 0) == doctest::Approx(0.9));
  CHECK(p1(0, 1) == doctest::Approx(0.1));
  CHECK(p1(1, 0) == doctest::Approx(0.1));
  CHECK(p1(1, 1) == doctest::Approx(0.9));
  const Dmc d2 = Dmc::bsc(2, 0.1);
  CHECK(d2.probability(0, 3) == doctest::Approx(0.01));
  const Matrix p4 = Dmc::bsc(4, 0.07).matrix();
  CHECK((p4 - p4.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < 16; ++i) {
    CHECK(p4.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (Eigen::Index j = 0; j < 16; ++j) {
      CHECK(p4(i, j) == doctest::Approx(bsc_entry(static_cast<std::uint32_t>(i),
                                                  static_cast<std::uint32_t>(j), 4, 0.07)));
    }
  }
  CHECK_THROWS(Dmc::bsc(2, 0.6));
}

TEST_CASE("channel expectations agree with the dense matrix") {
  Rng rng = make_stream(31, {});
  std::normal_distribution<double> g(0.0, 1.0);
  for (int r : {1, 3, 5}) {
    const Dmc bsc = Dmc::bsc(r, 0.13);
    const Dmc dense = Dmc::from_matrix(bsc.matrix());
    const auto size = static_cast<Eigen::Index>(bsc.size());
    RowMatrix rows(size, 3);
    for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = g(rng);
    const Matrix p = bsc.matrix();
    const Matrix want = p * Matrix(rows);
    const Matrix want_t = p.transpose() * Matrix(rows);
    CHECK((Matrix(bsc.expect(rows)) - want).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((Matrix(dense.expect(rows)) - want).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((Matrix(bsc.expect_transpose(rows)) - want_t).cwiseAbs().maxCoeff() < 1e-12);
    const Vector v = rows.col(0);
    CHECK((bsc.expect(v) - p * v).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("capacity") {
  CHECK(bsc_capacity(0.0) == 1.0);
  CHECK(bsc_capacity(0.5) == doctest::Approx(0.0));
  CHECK(std::abs(bsc_capacity(0.02) - 0.8586) < 1e-4);
  const double e = 0.02;
  CHECK(bsc_capacity(e) ==
        doctest::Approx(1.0 + e * std::log2(e) + (1.0 - e) * std::log2(1.0 - e)));
}

TEST_CASE("transmission") {
  Rng rng = make_stream(32, {});
  const Dmc clean = Dmc::noiseless(4);
  const Rng before = rng;
  for (std::uint32_t i = 0; i < 16; ++i) CHECK(clean.transmit(i, rng) == i);
  CHECK(rng == before);

  const Dmc bsc = Dmc::bsc(1, 0.1);
  const int draws = 100'000;
  int flips = 0;
  for (int t = 0; t < draws; ++t) flips += bsc.transmit(0, rng) == 1;
  CHECK(std::abs(flips / static_cast<double>(draws) - 0.1) < 0.005);

  Matrix p(2, 2);
  p << 0.0, 1.0, 0.3, 0.7;
  const Dmc fixed = Dmc::from_matrix(p);
  for (int t = 0; t < 1000; ++t) CHECK(fixed.transmit(0, rng) == 1);
  int ones = 0;
  for (int t = 0; t < draws; ++t) ones += fixed.transmit(1, rng) == 1;
  CHECK(std::abs(ones / static_cast<double>(draws) - 0.7) < 0.006);

  Matrix bad(2, 2);
  bad << 0.5, 0.4, 0.0, 1.0;
  CHECK_THROWS(Dmc::from_matrix(bad));
  CHECK_THROWS(Dmc::from_matrix(Matrix::Identity(3, 3)));
}
