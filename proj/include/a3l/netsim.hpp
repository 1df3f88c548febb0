#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "a3l/core.hpp"

namespace a3l::netsim {

/// Per-chunk service rate used in the reference experiments, times k.
inline constexpr double kServiceRatePerDataChunk = 1.4706;

struct SimConfig {
  double q_s = 3 * kServiceRatePerDataChunk;  // chunks per slot
  std::size_t buffer_capacity = 5000;          // chunks
  LossModel loss{0.1, 0.1};
  Slot propagation_delay = 1;
  Slot duration = 100000;
  Slot monitoring_interval = 100;  // fixed for FSFB, initial value for VSVB
  std::uint64_t rng_seed = 1;
  CodingParams coding{3, 4, 1024};
  Slot avt = 5;
  Slot initial_age = -1;  // < 0 selects avt

  void validate() const;
  Slot effective_initial_age() const { return initial_age < 0 ? avt : initial_age; }
};

/// RNG stream identifiers; each randomness source draws from its own stream.
enum RngStream : std::uint64_t {
  kStreamLossIn = 1,
  kStreamLossOut = 2,
  kStreamSelection = 3,  // + flow index
};

struct SimChunk {
  std::uint32_t flow = 0;
  std::uint64_t sample_id = 0;
  int index = 0;
  Slot gen_time = 0;
  Slot send_slot = 0;
  Slot enqueue_slot = 0;
  Slot dequeue_slot = 0;
  Slot delivery_slot = 0;

  Slot delay() const { return delivery_slot - send_slot; }
};

enum class Fate { LostIn, DroppedBuffer, Enqueued };

struct ServiceOutcome {
  SimChunk chunk;
  bool lost = false;  // lost after the bottleneck
};

struct Counters {
  std::uint64_t injected = 0;
  std::uint64_t lost_in = 0;
  std::uint64_t dropped_buffer = 0;
  std::uint64_t lost_out = 0;
  std::uint64_t delivered = 0;
  std::uint64_t queued = 0;
  std::uint64_t in_pipe = 0;

  std::uint64_t in_flight() const { return queued + in_pipe; }
  bool balanced() const {
    return injected == lost_in + dropped_buffer + lost_out + delivered + in_flight();
  }
};

/// Pre-bottleneck Bernoulli loss, finite FCFS buffer served at a fractional
/// rate, post-bottleneck Bernoulli loss, fixed propagation delay.
///
/// A chunk dequeued by advance_slot(t) has used its 1/q_s of service inside
/// slot t and is delivered at t + propagation_delay. Service credit that
/// cannot be used because the queue ran empty is discarded down to its
/// fractional part.
class Bottleneck {
 public:
  Bottleneck(double q_s, std::size_t capacity, LossModel loss, Slot propagation_delay,
             std::uint64_t seed);
  explicit Bottleneck(const SimConfig& cfg);

  Fate inject(const SimChunk& chunk, Slot now);
  std::vector<Fate> inject(std::span<const SimChunk> chunks, Slot now);

  std::vector<ServiceOutcome> advance_slot(Slot now);

  /// Removes and returns chunks whose delivery slot is `now`.
  std::vector<SimChunk> deliveries_at(Slot now);

  std::size_t occupancy() const { return queue_.size(); }
  std::size_t capacity() const { return capacity_; }
  double credit() const { return credit_; }
  const Counters& counters() const { return counters_; }

 private:
  double q_s_;
  std::size_t capacity_;
  LossModel loss_;
  Slot propagation_delay_;
  Rng rng_in_;
  Rng rng_out_;
  double credit_ = 0.0;
  std::deque<SimChunk> queue_;
  std::deque<SimChunk> pipe_;  // ordered by delivery slot
  Counters counters_;
};

struct OccupancyReport {
  std::size_t max_occupancy = 0;
  double mean_occupancy = 0.0;
  double mean_occupancy_second_half = 0.0;
  Slot capacity_reached_at = -1;  // first slot with a full buffer, -1 if never
};

/// Drives the bottleneck with a deterministic source emitting whole
/// codewords (n chunks) at `codewords_per_slot` on average.
OccupancyReport run_fixed_injection(const SimConfig& cfg, double codewords_per_slot);

}  // namespace a3l::netsim
