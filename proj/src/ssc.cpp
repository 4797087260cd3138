#include "csvq/ssc.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "csvq/combinatorics.hpp"

namespace csvq {

SscCodec SscCodec::create(int n, int k, int rate) {
  if (n < 1 || k < 1 || k > n) throw ConfigError("SSC needs 1 <= K <= N");
  SscCodec c;
  c.n = n;
  c.k = k;
  c.rate = rate;
  c.support_count = binomial(n, k);
  while ((std::uint64_t{1} << c.support_bits) < c.support_count) ++c.support_bits;
  const int remaining = rate - c.support_bits;
  if (remaining < k) {
    throw ConfigError("SSC at R=" + std::to_string(rate) + " leaves " + std::to_string(remaining) +
                      " bits for " + std::to_string(k) + " coefficients after " +
                      std::to_string(c.support_bits) + " support bits");
  }
  c.coeff_bits.assign(static_cast<std::size_t>(k), remaining / k);
  for (int a = 0; a < remaining % k; ++a) ++c.coeff_bits[static_cast<std::size_t>(a)];
  if (c.coeff_bits.front() > 16) throw ConfigError("SSC coefficient rate above 16 bits");
  for (int b : c.coeff_bits) c.codebooks.push_back(gaussian_scalar_codebook(b));
  return c;
}

int SscCodec::coeff_bits_total() const {
  return std::accumulate(coeff_bits.begin(), coeff_bits.end(), 0);
}

SscMessage ssc_encode(const Vector& x_tilde, const SscCodec& codec) {
  if (x_tilde.size() != codec.n) throw std::invalid_argument("SSC: input dimension mismatch");
  std::vector<int> order(static_cast<std::size_t>(codec.n));
  std::iota(order.begin(), order.end(), 0);
  // Largest magnitude first; equal magnitudes (including zeros) by position.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(x_tilde[a]) > std::abs(x_tilde[b]);
  });
  std::vector<int> support(order.begin(), order.begin() + codec.k);
  std::sort(support.begin(), support.end());

  SscMessage msg;
  msg.support_rank = subset_rank(support);
  for (std::size_t a = 0; a < support.size(); ++a) {
    msg.levels.push_back(codec.codebooks[a].encode(x_tilde[support[a]]));
  }
  return msg;
}

SscDecoded ssc_decode(const SscMessage& message, const SscCodec& codec) {
  if (message.levels.size() != static_cast<std::size_t>(codec.k)) {
    throw std::invalid_argument("SSC: message carries the wrong number of coefficients");
  }
  SscDecoded out;
  std::uint64_t rank = message.support_rank;
  if (rank >= codec.support_count) {
    rank = codec.support_count - 1;
    out.clamped = true;
  }
  const std::vector<int> support = subset_unrank(rank, codec.k);
  out.x = Vector::Zero(codec.n);
  for (std::size_t a = 0; a < support.size(); ++a) {
    const auto& cb = codec.codebooks[a];
    if (message.levels[a] >= cb.levels.size()) throw std::out_of_range("SSC: level index out of range");
    out.x[support[a]] = cb.decode(message.levels[a]);
  }
  return out;
}

SscChannels SscChannels::bsc(const SscCodec& codec, double epsilon) {
  SscChannels ch{Dmc::bsc(codec.support_bits, epsilon), {}};
  for (int b : codec.coeff_bits) ch.coefficients.push_back(Dmc::bsc(b, epsilon));
  return ch;
}

SscMessage ssc_transmit(const SscMessage& message, const SscChannels& channels, Rng& rng,
                        bool ideal_support) {
  if (message.levels.size() != channels.coefficients.size()) {
    throw std::invalid_argument("SSC: channel count differs from coefficient count");
  }
  SscMessage out = message;
  if (!ideal_support) {
    out.support_rank =
        channels.support.transmit(static_cast<std::uint32_t>(message.support_rank), rng);
  }
  for (std::size_t a = 0; a < out.levels.size(); ++a) {
    out.levels[a] = channels.coefficients[a].transmit(message.levels[a], rng);
  }
  return out;
}

}  // namespace csvq
