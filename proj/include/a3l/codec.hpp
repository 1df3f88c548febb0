#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "a3l/core.hpp"

namespace a3l {

namespace gf256 {

std::uint8_t mul(std::uint8_t a, std::uint8_t b);
std::uint8_t inv(std::uint8_t a);
std::uint8_t pow(std::uint8_t a, unsigned e);

}  // namespace gf256

/// Systematic MDS erasure code over GF(256).
///
/// The generator is V * Vtop^-1 where V is the n x k Vandermonde matrix on
/// the points 0..n-1. Its first k rows form the identity, so chunks 0..k-1
/// carry the raw data split, and every k-row subset is invertible because it
/// is again a Vandermonde product on distinct points.
class MdsCodec {
 public:
  explicit MdsCodec(const CodingParams& params);

  const CodingParams& params() const { return params_; }

  std::vector<Chunk> encode(const Sample& sample) const;

  /// Reconstructs the sample payload (sample_bytes long) from any k distinct
  /// chunks. Extra chunks beyond the first k distinct ones are ignored.
  Bytes decode(std::span<const Chunk> chunks) const;

 private:
  CodingParams params_;
  std::vector<std::uint8_t> generator_;  // n x k, row-major

  std::uint8_t gen(int row, int col) const { return generator_[row * params_.k + col]; }
};

std::vector<Chunk> encode_sample(const Sample& sample, const CodingParams& params);
Bytes decode_sample(std::span<const Chunk> chunks, const CodingParams& params);

}  // namespace a3l
