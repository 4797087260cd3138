#include "csvq/estimators.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "csvq/combinatorics.hpp"

namespace csvq {

EstimatorMode parse_estimator_mode(const std::string& text) {
  if (text == "auto") return EstimatorMode::kAuto;
  if (text == "exact") return EstimatorMode::kExact;
  if (text == "omp") return EstimatorMode::kOmp;
  if (text == "oracle") return EstimatorMode::kOracle;
  throw ConfigError("unknown estimator mode '" + text + "' (expected auto|exact|omp|oracle)");
}

std::string to_string(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::kAuto: return "auto";
    case EstimatorMode::kExact: return "exact";
    case EstimatorMode::kOmp: return "omp";
    case EstimatorMode::kOracle: return "oracle";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

ExactMmse::ExactMmse(const SensingModel& model, const SourceSpec& spec,
                     std::uint64_t enumeration_cap)
    : n_(model.n()), m_(model.m()), k_(spec.k), sigma_w2_(model.sigma_w2()), phi_(model.phi()) {
  spec.validate();
  if (spec.n != model.n()) throw std::invalid_argument("exact MMSE: source/sensing dimension mismatch");
  if (!(sigma_w2_ > 0.0)) {
    throw std::invalid_argument(
        "exact MMSE needs sigma_w2 > 0; for noiseless measurements use OMP or "
        "least squares on a known support");
  }
  const std::uint64_t count = binomial(n_, k_);
  if (count > enumeration_cap) {
    throw std::invalid_argument("exact MMSE: C(N,K)=" + std::to_string(count) +
                                " exceeds the enumeration cap " +
                                std::to_string(enumeration_cap));
  }
  supports_.reserve(count);
  precision_inv_.reserve(count * static_cast<std::size_t>(k_ * k_));
  half_log_det_.reserve(count);

  std::vector<int> subset(static_cast<std::size_t>(k_));
  for (int i = 0; i < k_; ++i) subset[static_cast<std::size_t>(i)] = i;
  do {
    Matrix precision = Matrix::Identity(k_, k_);
    for (int a = 0; a < k_; ++a) {
      for (int b = 0; b < k_; ++b) {
        precision(a, b) += phi_.col(subset[a]).dot(phi_.col(subset[b])) / sigma_w2_;
      }
    }
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) throw NumericalError("exact MMSE: Cholesky failed");
    const Matrix inv = llt.solve(Matrix::Identity(k_, k_));
    for (int a = 0; a < k_; ++a) {
      for (int b = 0; b < k_; ++b) precision_inv_.push_back(inv(a, b));
    }
    double hld = 0.0;
    const Matrix l = llt.matrixL();
    for (int a = 0; a < k_; ++a) hld += std::log(l(a, a));
    half_log_det_.push_back(hld);
    supports_.push_back(subset);
  } while (k_ > 0 && next_combination(subset, n_));
}

Vector ExactMmse::estimate(const Vector& y) const {
  Vector weights;
  return estimate(y, weights);
}

Vector ExactMmse::estimate(const Vector& y, Vector& posterior_weights) const {
  if (y.size() != m_) throw std::invalid_argument("exact MMSE: measurement dimension mismatch");
  const std::size_t count = supports_.size();
  const auto kk = static_cast<std::size_t>(k_);
  const Vector corr = phi_.transpose() * y / sigma_w2_;

  // With u = Phi_S^T y / s2 and A = Phi_S^T Phi_S / s2 + I:
  //   E[X_S | y, S] = A^-1 u
  //   log p(S | y) = u^T A^-1 u / 2 - log det(A) / 2 + const
  std::vector<double> means(count * kk);
  Vector log_w(static_cast<Eigen::Index>(count));
  std::vector<double> u(kk);
  for (std::size_t s = 0; s < count; ++s) {
    const auto& sup = supports_[s];
    for (std::size_t a = 0; a < kk; ++a) u[a] = corr[sup[a]];
    const double* inv = precision_inv_.data() + s * kk * kk;
    double quad = 0.0;
    for (std::size_t a = 0; a < kk; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < kk; ++b) acc += inv[a * kk + b] * u[b];
      means[s * kk + a] = acc;
      quad += u[a] * acc;
    }
    log_w[static_cast<Eigen::Index>(s)] = 0.5 * quad - half_log_det_[s];
  }

  const double peak = log_w.maxCoeff();
  posterior_weights = (log_w.array() - peak).exp().matrix();
  posterior_weights /= posterior_weights.sum();

  Vector x = Vector::Zero(n_);
  for (std::size_t s = 0; s < count; ++s) {
    const double w = posterior_weights[static_cast<Eigen::Index>(s)];
    for (std::size_t a = 0; a < kk; ++a) x[supports_[s][a]] += w * means[s * kk + a];
  }
  return x;
}

Vector mmse_exact(const Vector& y, const SensingModel& model, const SourceSpec& spec) {
  return ExactMmse(model, spec).estimate(y);
}

// ---------------------------------------------------------------------------

OmpResult omp(const Vector& y, const Matrix& phi, int k) {
  if (y.size() != phi.rows()) throw std::invalid_argument("omp: measurement dimension mismatch");
  if (k < 0 || k > phi.rows()) throw std::invalid_argument("omp: requires 0 <= k <= M");
  const Eigen::Index n = phi.cols();
  OmpResult result;
  result.x = Vector::Zero(n);
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Vector residual = y;
  Vector coef;

  for (int it = 0; it < k; ++it) {
    if (residual.squaredNorm() == 0.0) break;
    const Vector corr = phi.transpose() * residual;
    Eigen::Index best = -1;
    double best_val = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (chosen[static_cast<std::size_t>(j)]) continue;
      const double v = std::abs(corr[j]);
      if (v > best_val) {
        best_val = v;
        best = j;
      }
    }
    if (best < 0) break;  // residual orthogonal to every remaining atom
    chosen[static_cast<std::size_t>(best)] = 1;
    result.support.push_back(static_cast<int>(best));

    Matrix sub(phi.rows(), static_cast<Eigen::Index>(result.support.size()));
    for (std::size_t c = 0; c < result.support.size(); ++c) {
      sub.col(static_cast<Eigen::Index>(c)) = phi.col(result.support[c]);
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sub);
    if (cod.rank() < sub.cols()) result.rank_deficient = true;
    coef = cod.solve(y);
    residual = y - sub * coef;
  }

  for (std::size_t c = 0; c < result.support.size(); ++c) {
    result.x[result.support[c]] = coef[static_cast<Eigen::Index>(c)];
  }
  return result;
}

// ---------------------------------------------------------------------------

EstimatorMode resolve_estimator_mode(const SensingModel& model, const SourceSpec& spec,
                                     const MmseConfig& cfg) {
  if (cfg.mode != EstimatorMode::kAuto) return cfg.mode;
  if (model.sigma_w2() <= 0.0 || spec.n > cfg.exact_max_n) return EstimatorMode::kOmp;
  std::uint64_t count = 0;
  try {
    count = binomial(spec.n, spec.k);
  } catch (const std::overflow_error&) {
    return EstimatorMode::kOmp;
  }
  return count <= cfg.enumeration_cap ? EstimatorMode::kExact : EstimatorMode::kOmp;
}

SparseEstimator::SparseEstimator(const SensingModel& model, const SourceSpec& spec,
                                 const MmseConfig& cfg)
    : mode_(resolve_estimator_mode(model, spec, cfg)), k_(spec.k), phi_(model.phi()) {
  if (mode_ == EstimatorMode::kExact) {
    exact_ = std::make_shared<const ExactMmse>(model, spec, cfg.enumeration_cap);
  }
  if (mode_ == EstimatorMode::kOmp && k_ > model.m()) {
    throw ConfigError("OMP needs K <= M");
  }
}

Vector SparseEstimator::estimate(const Vector& y) const {
  switch (mode_) {
    case EstimatorMode::kExact: return exact_->estimate(y);
    case EstimatorMode::kOmp: return omp(y, phi_, k_).x;
    default: break;
  }
  throw std::logic_error("oracle estimator has no measurement-only form");
}

// ---------------------------------------------------------------------------

int ScalarCodebook::rate_bits() const {
  int r = 0;
  while ((std::size_t{1} << r) < levels.size()) ++r;
  return r;
}

std::uint32_t ScalarCodebook::encode(double value) const {
  if (levels.empty()) throw std::logic_error("empty scalar codebook");
  const auto it = std::lower_bound(levels.begin(), levels.end(), value);
  if (it == levels.begin()) return 0;
  if (it == levels.end()) return static_cast<std::uint32_t>(levels.size() - 1);
  const auto hi = static_cast<std::size_t>(it - levels.begin());
  // Equal distance goes to the lower index.
  return (value - levels[hi - 1] <= levels[hi] - value) ? static_cast<std::uint32_t>(hi - 1)
                                                        : static_cast<std::uint32_t>(hi);
}

namespace {

struct SortedSamples {
  std::vector<double> x;
  std::vector<long double> s1;  // prefix sums, s1[i] = sum of x[0..i)
  std::vector<long double> s2;

  explicit SortedSamples(std::span<const double> samples) : x(samples.begin(), samples.end()) {
    std::sort(x.begin(), x.end());
    s1.assign(x.size() + 1, 0.0L);
    s2.assign(x.size() + 1, 0.0L);
    for (std::size_t i = 0; i < x.size(); ++i) {
      s1[i + 1] = s1[i] + x[i];
      s2[i + 1] = s2[i] + static_cast<long double>(x[i]) * x[i];
    }
  }
};

// Cell i is [bounds[i], bounds[i+1]); a sample on a midpoint goes to the lower level.
std::vector<std::size_t> partition(const SortedSamples& data, const std::vector<double>& levels) {
  std::vector<std::size_t> bounds(levels.size() + 1);
  bounds.front() = 0;
  bounds.back() = data.x.size();
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    const double t = 0.5 * (levels[i] + levels[i + 1]);
    bounds[i + 1] = static_cast<std::size_t>(
        std::upper_bound(data.x.begin(), data.x.end(), t) - data.x.begin());
  }
  return bounds;
}

double cell_distortion(const SortedSamples& data, const std::vector<std::size_t>& bounds,
                       const std::vector<double>& levels) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const long double cnt = static_cast<long double>(bounds[i + 1] - bounds[i]);
    const long double a = data.s1[bounds[i + 1]] - data.s1[bounds[i]];
    const long double b = data.s2[bounds[i + 1]] - data.s2[bounds[i]];
    const long double l = levels[i];
    total += b - 2.0L * l * a + cnt * l * l;
  }
  return static_cast<double>(std::max(total, 0.0L) / static_cast<long double>(data.x.size()));
}

}  // namespace

ScalarTrainResult lloyd_scalar(int rate_bits, std::span<const double> samples, double rel_tol,
                               int max_iters, double delta_split) {
  if (rate_bits < 1) throw std::invalid_argument("scalar Lloyd needs rate >= 1");
  const std::size_t size = std::size_t{1} << rate_bits;
  if (samples.size() < 1000 * size) {
    throw std::invalid_argument("scalar Lloyd needs at least 1000 * 2^r training samples");
  }
  SortedSamples data(samples);
  const std::size_t n = data.x.size();

  std::vector<double> levels(size);
  for (std::size_t i = 0; i < size; ++i) {
    levels[i] = data.x[std::min(n - 1, static_cast<std::size_t>((i + 0.5) * n / size))];
  }

  ScalarTrainResult result;
  auto bounds = partition(data, levels);
  double current = cell_distortion(data, bounds, levels);
  result.distortion_trace.push_back(current);

  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> next(size);
    std::size_t busiest = 0;
    std::vector<std::size_t> empty;
    for (std::size_t i = 0; i < size; ++i) {
      const std::size_t cnt = bounds[i + 1] - bounds[i];
      if (cnt == 0) {
        empty.push_back(i);
        next[i] = levels[i];
        continue;
      }
      next[i] = static_cast<double>((data.s1[bounds[i + 1]] - data.s1[bounds[i]]) /
                                    static_cast<long double>(cnt));
      if (cnt > bounds[busiest + 1] - bounds[busiest]) busiest = i;
    }
    for (std::size_t e = 0; e < empty.size(); ++e) {
      const double step = delta_split * static_cast<double>(e + 1);
      double v = next[busiest] * (1.0 + step);
      if (v == next[busiest]) v += step;
      next[empty[e]] = v;
      ++result.split_events;
    }
    std::sort(next.begin(), next.end());

    auto next_bounds = partition(data, next);
    const double d = cell_distortion(data, next_bounds, next);
    if (!std::isfinite(d)) throw NumericalError("scalar Lloyd: non-finite distortion");
    if (d > current) break;  // rounding-level rise at convergence; keep the previous levels
    const double improvement = current > 0.0 ? (current - d) / current : 0.0;
    levels = std::move(next);
    bounds = std::move(next_bounds);
    current = d;
    result.distortion_trace.push_back(current);
    if (improvement < rel_tol && empty.empty()) break;
  }
  result.codebook.levels = std::move(levels);
  return result;
}

const ScalarTrainResult& gaussian_scalar_training(int rate_bits) {
  static std::mutex mutex;
  static std::map<int, ScalarTrainResult> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(rate_bits);
  if (it != cache.end()) return it->second;

  const std::size_t count = std::max<std::size_t>(200'000, 1000 * (std::size_t{1} << rate_bits));
  Rng rng = make_stream(0x6a0551a7ULL, {static_cast<std::uint64_t>(rate_bits)});
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> samples(count);
  for (auto& s : samples) s = gauss(rng);
  return cache.emplace(rate_bits, lloyd_scalar(rate_bits, samples)).first->second;
}

const ScalarCodebook& gaussian_scalar_codebook(int rate_bits) {
  return gaussian_scalar_training(rate_bits).codebook;
}

}  // namespace csvq
