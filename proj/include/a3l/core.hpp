#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "a3l/error.hpp"

namespace a3l {

/// Simulation time in slots. Differences are signed slot counts.
using Slot = std::int64_t;

using Bytes = std::vector<std::uint8_t>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct LossModel {
  double p_in = 0.0;   // before the bottleneck
  double p_out = 0.0;  // after the bottleneck

  void validate() const;
};

/// Probability that a chunk entering the path never reaches the receiver.
double total_loss_probability(const LossModel& loss);

struct CodingParams {
  int k = 1;
  int n = 1;
  std::size_t sample_bytes = 1024;

  void validate() const;

  /// Bytes per chunk; the sample is zero-padded up to k * chunk_bytes().
  std::size_t chunk_bytes() const { return (sample_bytes + k - 1) / k; }
  std::size_t padded_bytes() const { return chunk_bytes() * k; }
};

struct Sample {
  std::uint64_t id = 0;
  Slot gen_time = 0;
  Bytes payload;
};

struct Chunk {
  std::uint64_t sample_id = 0;
  int chunk_index = 0;
  Slot gen_time = 0;
  Bytes payload;
};

/// True iff a sample missing `missing_count` of its n chunks can still be
/// decoded, i.e. missing_count <= n - k.
bool is_decodable(int missing_count, const CodingParams& params);

/// Counter-based deterministic generator. Each (seed, stream) pair yields an
/// independent sequence so adding a consumer never perturbs the others.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  bool bernoulli(double p) { return p > 0.0 && (p >= 1.0 || uniform() < p); }

 private:
  std::uint64_t state_;
};

}  // namespace a3l
