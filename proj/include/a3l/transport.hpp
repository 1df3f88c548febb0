#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "a3l/core.hpp"
#include "a3l/sim_result.hpp"
#include "a3l/vsvb.hpp"

namespace a3l::wire {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port"; throws ParameterError.
  static Endpoint parse(const std::string& text);
  std::string str() const;
};

/// Settings shared by both ends. Time is slotted at slot_ms; thresholds and
/// intervals are in slots.
struct LinkConfig {
  int k = 3;
  int n_init = 5;
  double slot_ms = 1.0;
  Slot avt = 40;
  Slot initial_interval = 100;
  std::size_t sample_bytes = 96;
  vsvb::Params params{};
  std::optional<double> fixed_sigma;  // chunks per slot; no adaptation when set
};

struct SenderConfig {
  Endpoint dest;
  LinkConfig link;
  std::uint64_t samples = 1000;  // 0 sends until duration_ms or stop
  double duration_ms = 0.0;
  double linger_ms = 200.0;  // keep reading feedback after the last sample
  const std::atomic<bool>* stop = nullptr;
};

struct RateChange {
  double received_ms = 0.0;  // since sender start
  double applied_ms = 0.0;   // sample boundary where it took effect
  double sigma = 0.0;
  int n = 0;
  std::uint32_t ts_ms = 0;
  bool fallback = false;
};

struct SenderLog {
  std::uint64_t samples_sent = 0;
  std::uint64_t chunks_sent = 0;
  std::uint64_t stale_chunks_skipped = 0;
  std::uint64_t feedback_received = 0;
  std::uint64_t malformed_feedback = 0;
  std::uint64_t fallbacks = 0;
  std::vector<double> sample_times_ms;
  std::vector<RateChange> changes;
};

struct ReceiverConfig {
  Endpoint listen;
  LinkConfig link;
  double duration_ms = 0.0;        // 0 runs until idle or stop
  double idle_timeout_ms = 1000.0;  // after traffic has started
  double drop_shim = 0.0;           // synthetic loss, test only
  double delay_shim_ms = 0.0;       // synthetic one-way delay, test only
  std::uint64_t seed = 1;
  bool relative_delay = false;  // delay minus the minimum observed, for unsynchronized clocks
  const std::atomic<bool>* stop = nullptr;
  std::atomic<std::uint16_t>* bound_port = nullptr;  // set once listening
};

struct ReceiverLog {
  std::uint64_t datagrams = 0;
  std::uint64_t chunks_received = 0;  // distinct (sample, index) pairs
  std::uint64_t duplicates = 0;
  std::uint64_t malformed = 0;
  std::uint64_t shim_dropped = 0;
  std::uint64_t samples_decoded = 0;
  std::uint64_t payload_mismatches = 0;
  std::uint64_t feedback_sent = 0;
  double mean_delay_ms = kInfinity;
  std::vector<IntervalRecord> intervals;
};

/// Deterministic payload for a sample so the receiver can verify decodes.
Bytes sample_payload(std::uint32_t sample_id, std::size_t bytes);

/// Generate-at-will sender: every T_s it encodes a fresh sample and sends all
/// n chunks. Feedback is read on a second thread and applied at the next
/// sample boundary. Throws std::system_error on socket failures.
SenderLog run_sender(const SenderConfig& cfg);

/// Receives chunks, decodes, and at every monitoring-interval boundary runs
/// the VSVB tasks and replies with one feedback datagram to the last sender.
ReceiverLog run_receiver(const ReceiverConfig& cfg);

}  // namespace a3l::wire
