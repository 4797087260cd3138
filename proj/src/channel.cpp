#include "csvq/channel.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <string>

namespace csvq {

namespace {

void check_rate(int rate_bits) {
  if (rate_bits < 0 || rate_bits > 30) {
    throw std::invalid_argument("channel rate must be in [0, 30] bits");
  }
}

}  // namespace

Dmc Dmc::noiseless(int rate_bits) {
  check_rate(rate_bits);
  return Dmc(Kind::kIdentity, rate_bits);
}

Dmc Dmc::bsc(int rate_bits, double epsilon) {
  check_rate(rate_bits);
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) {
    throw std::invalid_argument("BSC cross-over probability must lie in [0, 0.5]");
  }
  Dmc d(Kind::kBsc, rate_bits);
  d.epsilon_ = epsilon;
  return d;
}

Dmc Dmc::from_matrix(const Matrix& p) {
  const auto side = static_cast<std::size_t>(p.rows());
  if (p.rows() != p.cols() || side == 0 || !std::has_single_bit(side)) {
    throw std::invalid_argument("transition matrix must be square with side 2^R");
  }
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if ((p.row(i).array() < 0.0).any() || !p.row(i).allFinite()) {
      throw std::invalid_argument("transition matrix row " + std::to_string(i) +
                                  " has negative or non-finite entries");
    }
    if (std::abs(p.row(i).sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("transition matrix row " + std::to_string(i) +
                                  " does not sum to 1");
    }
  }
  Dmc d(Kind::kDense, std::countr_zero(side));
  d.dense_ = p;
  d.cdf_.resize(side);
  for (std::size_t i = 0; i < side; ++i) {
    auto& cdf = d.cdf_[i];
    cdf.resize(side);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < side; ++j) {
      acc += p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      cdf[j] = acc;
      if (p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) last_positive = j;
    }
    for (std::size_t j = last_positive; j < side; ++j) cdf[j] = 1.0;
  }
  return d;
}

bool Dmc::is_identity() const {
  switch (kind_) {
    case Kind::kIdentity: return true;
    case Kind::kBsc: return epsilon_ == 0.0 || rate_bits_ == 0;
    case Kind::kDense: return dense_.isIdentity(0.0);
  }
  return false;
}

std::optional<double> Dmc::bsc_epsilon() const {
  if (kind_ == Kind::kBsc) return epsilon_;
  if (kind_ == Kind::kIdentity) return 0.0;
  return std::nullopt;
}

double Dmc::probability(std::uint32_t sent, std::uint32_t received) const {
  if (sent >= size() || received >= size()) throw std::out_of_range("channel index out of range");
  switch (kind_) {
    case Kind::kIdentity: return sent == received ? 1.0 : 0.0;
    case Kind::kBsc: {
      const int flips = std::popcount(sent ^ received);
      return std::pow(epsilon_, flips) * std::pow(1.0 - epsilon_, rate_bits_ - flips);
    }
    case Kind::kDense: return dense_(sent, received);
  }
  return 0.0;
}

void Dmc::butterfly(RowMatrix& rows) const {
  const double keep = 1.0 - epsilon_;
  const double flip = epsilon_;
  const auto n = static_cast<Eigen::Index>(size());
  for (int b = 0; b < rate_bits_; ++b) {
    const Eigen::Index stride = Eigen::Index{1} << b;
    for (Eigen::Index base = 0; base < n; base += 2 * stride) {
      for (Eigen::Index i = base; i < base + stride; ++i) {
        auto lo = rows.row(i);
        auto hi = rows.row(i + stride);
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
          const double a = lo[c];
          const double h = hi[c];
          lo[c] = keep * a + flip * h;
          hi[c] = flip * a + keep * h;
        }
      }
    }
  }
}

RowMatrix Dmc::expect(const RowMatrix& rows) const {
  if (static_cast<std::size_t>(rows.rows()) != size()) {
    throw std::invalid_argument("channel expectation: row count differs from alphabet size");
  }
  if (is_identity()) return rows;
  if (kind_ == Kind::kBsc) {
    RowMatrix out = rows;
    butterfly(out);
    return out;
  }
  return dense_ * rows;
}

Vector Dmc::expect(const Vector& values) const {
  RowMatrix rows = values;
  return expect(rows);
}

RowMatrix Dmc::expect_transpose(const RowMatrix& rows) const {
  if (static_cast<std::size_t>(rows.rows()) != size()) {
    throw std::invalid_argument("channel expectation: row count differs from alphabet size");
  }
  if (is_identity()) return rows;
  if (kind_ == Kind::kBsc) {
    // Symmetric channel: P(j|i) = P(i|j).
    RowMatrix out = rows;
    butterfly(out);
    return out;
  }
  return dense_.transpose() * rows;
}

Vector Dmc::expect_transpose(const Vector& values) const {
  RowMatrix rows = values;
  return expect_transpose(rows);
}

std::uint32_t Dmc::transmit(std::uint32_t sent, Rng& rng) const {
  if (sent >= size()) throw std::out_of_range("transmit: index out of range");
  if (is_identity()) return sent;
  if (kind_ == Kind::kBsc) {
    std::uint32_t received = sent;
    for (int b = 0; b < rate_bits_; ++b) {
      if (uniform01(rng) < epsilon_) received ^= (std::uint32_t{1} << b);
    }
    return received;
  }
  const auto& cdf = cdf_[sent];
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                             static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

Matrix Dmc::matrix() const {
  if (rate_bits_ > 12) throw std::length_error("refusing to materialize a channel wider than 2^12");
  if (kind_ == Kind::kDense) return dense_;
  const auto n = static_cast<Eigen::Index>(size());
  Matrix p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      p(i, j) = probability(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    }
  }
  return p;
}

double bsc_capacity(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) {
    throw std::invalid_argument("BSC cross-over probability must lie in [0, 0.5]");
  }
  auto xlog2x = [](double p) { return p > 0.0 ? p * std::log2(p) : 0.0; };
  return 1.0 + xlog2x(epsilon) + xlog2x(1.0 - epsilon);
}

}  // namespace csvq
