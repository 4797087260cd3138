#include <doctest.h>

#include <cmath>
#include <numbers>

#include "csvq/bounds.hpp"

using namespace csvq;

TEST_CASE("high-rate constant") {
  CHECK(std::abs(bound_c2(1) - std::numbers::pi / 2.0 * std::sqrt(3.0)) < 1e-6);
  CHECK(bound_c2(2) == 4.0);
  // Direct evaluation for K = 3 with Gamma(3/2) = sqrt(pi)/2.
  const double g = std::sqrt(std::numbers::pi) / 2.0;
  CHECK(bound_c2(3) == doctest::Approx(2.0 * std::pow(1.5 * g, 2.0 / 3.0) * std::pow(5.0 / 3.0, 1.5)));
  // The two evaluation branches agree where they meet.
  const double k = 101.0;
  const double direct = 2.0 * std::pow(k / 2 * std::tgamma(k / 2), 2.0 / k) * std::pow((k + 2) / k, k / 2);
  CHECK(bound_c2(101) == doctest::Approx(direct).epsilon(1e-12));
  CHECK_THROWS(bound_c2(0));
}

TEST_CASE("clean-measurement bound") {
  const BoundInputs in{2, 1, 0.0, 0.0, 3.0, 1.0};
  CHECK(bound_noiseless(in) == doctest::Approx(0.1700).epsilon(5e-4));
  CHECK(bound_noiseless(in) == doctest::Approx(bound_c2(1) / 16.0));

  BoundInputs a{12, 2, 0.3, 0.0, 8.0, 1.0};
  BoundInputs b = a;
  const double excess = 8.0 - std::log2(66.0);
  b.rate = std::log2(66.0) + 2.0 * excess;
  CHECK(bound_noiseless(b) / bound_noiseless(a) == doctest::Approx(std::exp2(-2.0 * excess / 2.0 * 1.0)));

  // Slope of -6C/K dB per bit.
  BoundInputs s{12, 2, 0.0, 0.0, 10.0, 0.8};
  const double d0 = 10.0 * std::log10(bound_noiseless(s));
  s.rate = 11.0;
  const double d1 = 10.0 * std::log10(bound_noiseless(s));
  CHECK(d1 - d0 == doctest::Approx(-20.0 * std::log10(2.0) * 0.8 / 2.0));
}

TEST_CASE("noisy-measurement bound") {
  const BoundInputs clean{12, 2, 0.4, 0.0, 10.0, 1.0};
  CHECK(bound_c1(clean) == 0.0);
  CHECK(bound_noisy(clean) == 0.0);

  const BoundInputs in{12, 2, 0.4, 0.01, 10.0, 0.9};
  const double c1 = 0.01 / (1.0 + 0.01 + 3.0 * 0.4);
  CHECK(bound_c1(in) == doctest::Approx(c1));
  CHECK(bound_noisy(in) == doctest::Approx(2.0 * c1 + c1 * 4.0 * std::exp2(-2.0 * 0.9 * (10.0 - std::log2(66.0)) / 2.0)));

  double prev = 1e300;
  for (double r = 6.0; r <= 30.0; r += 1.0) {
    BoundInputs x = in;
    x.rate = r;
    CHECK(bound_noisy(x) <= prev);
    prev = bound_noisy(x);
  }
  BoundInputs lo = in, hi = in;
  lo.mu = 0.1;
  hi.mu = 0.9;
  CHECK(bound_noisy(lo) >= bound_noisy(hi));
  lo = in;
  hi = in;
  hi.sigma_w2 = 0.05;
  CHECK(bound_noisy(hi) >= bound_noisy(lo));
  BoundInputs bad = in;
  bad.mu = 1.5;
  CHECK_THROWS(bound_noisy(bad));
}
