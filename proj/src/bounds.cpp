#include "csvq/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "csvq/combinatorics.hpp"

namespace csvq {

void BoundInputs::validate() const {
  if (k < 1 || k > n) throw std::invalid_argument("bound: need 1 <= K <= N");
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("bound: coherence outside [0, 1]");
  if (!(sigma_w2 >= 0.0)) throw std::invalid_argument("bound: negative noise variance");
  if (!(capacity >= 0.0)) throw std::invalid_argument("bound: negative capacity");
}

double bound_c1(const BoundInputs& in) {
  in.validate();
  return in.sigma_w2 / (1.0 + in.sigma_w2 + (in.k + 1) * in.mu);
}

double bound_c2(int k) {
  if (k < 1) throw std::invalid_argument("bound: K must be >= 1");
  const double half = 0.5 * k;
  if (k <= 100) {
    return 2.0 * std::pow(half * std::tgamma(half), 2.0 / k) * std::pow((k + 2.0) / k, half);
  }
  const double log_c2 = std::log(2.0) + (2.0 / k) * (std::log(half) + std::lgamma(half)) +
                        half * std::log((k + 2.0) / k);
  return std::exp(log_c2);
}

double bound_rate_factor(const BoundInputs& in) {
  in.validate();
  const double excess = in.rate - log2_binomial(in.n, in.k);
  return std::exp2(-2.0 * in.capacity * excess / in.k);
}

double bound_noisy(const BoundInputs& in) {
  const double c1 = bound_c1(in);
  if (c1 == 0.0) return 0.0;
  return in.k * c1 + c1 * bound_c2(in.k) * bound_rate_factor(in);
}

double bound_noiseless(const BoundInputs& in) {
  return bound_c2(in.k) * bound_rate_factor(in);
}

}  // namespace csvq
