#include "a3l/core.hpp"

#include <string>

namespace a3l {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void LossModel::validate() const {
  if (!is_probability(p_in) || !is_probability(p_out)) {
    throw ParameterError("loss probabilities must lie in [0, 1]");
  }
}

double total_loss_probability(const LossModel& loss) {
  loss.validate();
  return loss.p_in + (1.0 - loss.p_in) * loss.p_out;
}

void CodingParams::validate() const {
  if (k < 1 || n < k) {
    throw ParameterError("coding parameters require n >= k >= 1 (k=" + std::to_string(k) +
                         ", n=" + std::to_string(n) + ")");
  }
  // GF(256) evaluation points limit the block length.
  if (n > 255) throw ParameterError("block length n must be <= 255");
  if (sample_bytes == 0) throw ParameterError("sample size must be positive");
}

bool is_decodable(int missing_count, const CodingParams& params) {
  return missing_count <= params.n - params.k;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(seed ^ mix64(stream * kGolden + 0x632be59bd9b4e019ULL))) {}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

}  // namespace a3l
