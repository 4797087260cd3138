#include "csvq/core_model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace csvq {

void SourceSpec::validate() const {
  if (n < 1) throw std::invalid_argument("source dimension n must be >= 1");
  if (k < 0 || k > n) {
    throw std::invalid_argument("sparsity k=" + std::to_string(k) + " outside [0, " +
                                std::to_string(n) + "]");
  }
}

SensingModel::SensingModel(Matrix phi, double sigma_w2)
    : phi_(normalize_columns(std::move(phi))), sigma_w2_(sigma_w2) {
  if (!(sigma_w2 >= 0.0) || !std::isfinite(sigma_w2)) {
    throw std::invalid_argument("measurement-noise variance must be finite and >= 0");
  }
}

SparseVector generate_source(const SourceSpec& spec, Rng& rng) {
  spec.validate();
  // Partial Fisher-Yates: the first k slots of `pool` are a uniform k-subset.
  std::vector<int> pool(static_cast<std::size_t>(spec.n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < spec.k; ++i) {
    std::uniform_int_distribution<int> pick(i, spec.n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  SparseVector out;
  out.support.assign(pool.begin(), pool.begin() + spec.k);
  std::sort(out.support.begin(), out.support.end());
  out.values = Vector::Zero(spec.n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int idx : out.support) out.values[idx] = gauss(rng);
  return out;
}

Matrix generate_sensing_matrix(int n, int m, Rng& rng) {
  if (m < 1 || n < 1) throw std::invalid_argument("sensing matrix dimensions must be positive");
  if (m > n) throw std::invalid_argument("sensing matrix requires m <= n");
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  Matrix phi(m, n);
  // Column-by-column so the draw order does not depend on storage order.
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < m; ++r) phi(r, c) = gauss(rng);
  }
  return normalize_columns(std::move(phi));
}

Matrix normalize_columns(Matrix phi) {
  for (Eigen::Index c = 0; c < phi.cols(); ++c) {
    const double norm = phi.col(c).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw std::invalid_argument("column " + std::to_string(c) + " has zero or non-finite norm");
    }
    phi.col(c) /= norm;
  }
  return phi;
}

Vector measure(const Vector& x, const SensingModel& model, Rng& rng) {
  if (x.size() != model.n()) {
    throw std::invalid_argument("measure: source has dimension " + std::to_string(x.size()) +
                                ", sensing matrix expects " + std::to_string(model.n()));
  }
  Vector y = model.phi() * x;
  if (model.sigma_w2() > 0.0) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(model.sigma_w2()));
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += gauss(rng);
  }
  return y;
}

double mutual_coherence(const Matrix& phi) {
  if (phi.cols() < 2) throw std::invalid_argument("mutual coherence needs at least two columns");
  Vector norms(phi.cols());
  for (Eigen::Index c = 0; c < phi.cols(); ++c) {
    norms[c] = phi.col(c).norm();
    if (!(norms[c] > 0.0)) {
      throw std::invalid_argument("mutual coherence undefined: column " + std::to_string(c) +
                                  " is zero");
    }
  }
  double mu = 0.0;
  for (Eigen::Index i = 0; i < phi.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < phi.cols(); ++j) {
      const double c = std::abs(phi.col(i).dot(phi.col(j))) / (norms[i] * norms[j]);
      mu = std::max(mu, c);
    }
  }
  return std::min(mu, 1.0);
}

}  // namespace csvq
