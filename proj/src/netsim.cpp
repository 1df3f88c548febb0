#include "a3l/netsim.hpp"

#include <cmath>
#include <string>

namespace a3l::netsim {

void SimConfig::validate() const {
  if (!(q_s > 0.0) || !std::isfinite(q_s)) throw ParameterError("q_s must be positive");
  if (buffer_capacity == 0) throw ParameterError("buffer capacity must be positive");
  loss.validate();
  coding.validate();
  if (propagation_delay < 0) throw ParameterError("propagation delay must be non-negative");
  if (monitoring_interval < 1) throw ParameterError("monitoring interval must be >= 1");
  if (duration < monitoring_interval) {
    throw ParameterError("duration (" + std::to_string(duration) +
                         ") must be at least one monitoring interval");
  }
  if (avt < 1) throw ParameterError("age violation threshold must be >= 1");
}

Bottleneck::Bottleneck(double q_s, std::size_t capacity, LossModel loss, Slot propagation_delay,
                       std::uint64_t seed)
    : q_s_(q_s),
      capacity_(capacity),
      loss_(loss),
      propagation_delay_(propagation_delay),
      rng_in_(seed, kStreamLossIn),
      rng_out_(seed, kStreamLossOut) {
  if (!(q_s > 0.0)) throw ParameterError("q_s must be positive");
  if (capacity == 0) throw ParameterError("buffer capacity must be positive");
  loss_.validate();
}

Bottleneck::Bottleneck(const SimConfig& cfg)
    : Bottleneck(cfg.q_s, cfg.buffer_capacity, cfg.loss, cfg.propagation_delay, cfg.rng_seed) {}

Fate Bottleneck::inject(const SimChunk& chunk, Slot now) {
  ++counters_.injected;
  if (rng_in_.bernoulli(loss_.p_in)) {
    ++counters_.lost_in;
    return Fate::LostIn;
  }
  if (queue_.size() >= capacity_) {
    ++counters_.dropped_buffer;
    return Fate::DroppedBuffer;
  }
  SimChunk& c = queue_.emplace_back(chunk);
  c.send_slot = now;
  c.enqueue_slot = now;
  ++counters_.queued;
  return Fate::Enqueued;
}

std::vector<Fate> Bottleneck::inject(std::span<const SimChunk> chunks, Slot now) {
  std::vector<Fate> fates;
  fates.reserve(chunks.size());
  for (const SimChunk& c : chunks) fates.push_back(inject(c, now));
  return fates;
}

std::vector<ServiceOutcome> Bottleneck::advance_slot(Slot now) {
  std::vector<ServiceOutcome> out;
  credit_ += q_s_;
  while (credit_ >= 1.0 && !queue_.empty()) {
    SimChunk c = queue_.front();
    queue_.pop_front();
    --counters_.queued;
    credit_ -= 1.0;
    c.dequeue_slot = now;
    if (rng_out_.bernoulli(loss_.p_out)) {
      ++counters_.lost_out;
      out.push_back({c, true});
      continue;
    }
    c.delivery_slot = now + propagation_delay_;
    pipe_.push_back(c);
    ++counters_.in_pipe;
    out.push_back({c, false});
  }
  if (queue_.empty()) credit_ -= std::floor(credit_);
  return out;
}

std::vector<SimChunk> Bottleneck::deliveries_at(Slot now) {
  std::vector<SimChunk> out;
  while (!pipe_.empty() && pipe_.front().delivery_slot <= now) {
    out.push_back(pipe_.front());
    pipe_.pop_front();
    --counters_.in_pipe;
    ++counters_.delivered;
  }
  return out;
}

OccupancyReport run_fixed_injection(const SimConfig& cfg, double codewords_per_slot) {
  cfg.validate();
  if (!(codewords_per_slot >= 0.0)) throw ParameterError("injection rate must be non-negative");
  Bottleneck queue(cfg);
  OccupancyReport report;
  double acc = 0.0;
  double sum = 0.0;
  double sum_second = 0.0;
  std::uint64_t sample_id = 0;
  const Slot half = cfg.duration / 2;

  for (Slot t = 1; t <= cfg.duration; ++t) {
    queue.deliveries_at(t);
    acc += codewords_per_slot;
    while (acc >= 1.0) {
      acc -= 1.0;
      for (int i = 0; i < cfg.coding.n; ++i) {
        queue.inject(SimChunk{.sample_id = sample_id, .index = i, .gen_time = t}, t);
      }
      ++sample_id;
    }
    const std::size_t occ = queue.occupancy();
    if (occ > report.max_occupancy) report.max_occupancy = occ;
    if (occ >= cfg.buffer_capacity && report.capacity_reached_at < 0) report.capacity_reached_at = t;
    queue.advance_slot(t);
    sum += static_cast<double>(occ);
    if (t > half) sum_second += static_cast<double>(occ);
  }
  report.mean_occupancy = sum / static_cast<double>(cfg.duration);
  report.mean_occupancy_second_half = sum_second / static_cast<double>(cfg.duration - half);
  return report;
}

}  // namespace a3l::netsim
