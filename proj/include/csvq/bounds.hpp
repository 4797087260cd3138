#pragma once

namespace csvq {

/// Inputs to the asymptotic end-to-end MSE lower bounds. `rate` is real-valued.
struct BoundInputs {
  int n = 0;
  int k = 0;
  double mu = 0.0;        // mutual coherence of the sensing matrix
  double sigma_w2 = 0.0;  // measurement-noise variance
  double rate = 0.0;      // bits per vector
  double capacity = 1.0;  // bits per channel use

  void validate() const;
};

/// sigma_w2 / (1 + sigma_w2 + (K + 1) mu)
double bound_c1(const BoundInputs& in);

/// 2 ((K/2) Gamma(K/2))^{2/K} ((K + 2)/K)^{K/2}
double bound_c2(int k);

/// 2^{-2 C (R - log2 C(N,K)) / K}
double bound_rate_factor(const BoundInputs& in);

/// K c1 + c1 c2 2^{-2C(R - log2 C(N,K))/K}; zero when sigma_w2 = 0.
double bound_noisy(const BoundInputs& in);

/// c2 2^{-2C(R - log2 C(N,K))/K}, for clean measurements.
double bound_noiseless(const BoundInputs& in);

}  // namespace csvq
