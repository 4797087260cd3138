#pragma once

#include <cstdint>
#include <vector>

#include "csvq/channel.hpp"
#include "csvq/estimators.hpp"
#include "csvq/types.hpp"

namespace csvq {

/// Support-set coding: the support of the K largest-magnitude entries is sent
/// as its combinatorial-number-system rank on ceil(log2 C(N,K)) bits; the
/// remaining bits scalar-quantize the K coefficients in support order.
struct SscCodec {
  int n = 0;
  int k = 0;
  int rate = 0;
  int support_bits = 0;
  std::uint64_t support_count = 0;
  std::vector<int> coeff_bits;  // per coefficient, lower positions get spare bits
  std::vector<ScalarCodebook> codebooks;

  /// Throws ConfigError when fewer than one bit per coefficient remains or a
  /// coefficient would need more than 16 bits.
  static SscCodec create(int n, int k, int rate);

  int coeff_bits_total() const;
};

struct SscMessage {
  std::uint64_t support_rank = 0;
  std::vector<std::uint32_t> levels;  // one per coefficient, support order
};

SscMessage ssc_encode(const Vector& x_tilde, const SscCodec& codec);

struct SscDecoded {
  Vector x;
  bool clamped = false;  // support rank was outside [0, C(N,K)) and was clamped
};

SscDecoded ssc_decode(const SscMessage& message, const SscCodec& codec);

/// Per-field BSCs for uncoded transmission of an SSC message.
struct SscChannels {
  Dmc support;
  std::vector<Dmc> coefficients;

  static SscChannels bsc(const SscCodec& codec, double epsilon);
};

/// Sends every field over its channel. With `ideal_support` the support rank
/// bypasses the channel and only the coefficient indices are corrupted.
SscMessage ssc_transmit(const SscMessage& message, const SscChannels& channels, Rng& rng,
                        bool ideal_support);

}  // namespace csvq
