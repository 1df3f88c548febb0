#pragma once

#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "a3l/core.hpp"

namespace a3l {

struct AgePoint {
  Slot slot = 0;
  Slot age = 0;
};

/// Receiver-side age of information: age(t) = t - (generation slot of the
/// freshest decoded sample). Before the first decode the age grows from a
/// configurable initial value.
class AgeTracker {
 public:
  /// `start` is the slot at which the age equals `initial_age`; the first
  /// step() must be for a later slot.
  AgeTracker(Slot avt, Slot initial_age, Slot start = 0);

  Slot step(Slot now, std::span<const Slot> newly_decoded_gens = {});

  Slot avt() const { return avt_; }
  Slot last_slot() const { return last_slot_; }
  std::optional<Slot> freshest_decoded_gen() const { return freshest_; }
  /// Generation slot that the current age is measured from.
  Slot reference_gen() const { return reference_; }
  const std::vector<AgePoint>& trace() const { return trace_; }

  void set_recording(bool on) { recording_ = on; }

 private:
  Slot avt_;
  Slot last_slot_;
  Slot reference_;
  std::optional<Slot> freshest_;
  std::vector<AgePoint> trace_;
  bool recording_ = true;
};

/// Fraction of slots with age >= avt.
double age_violation_rate(std::span<const Slot> ages, Slot avt);
double age_violation_rate(std::span<const AgePoint> trace, Slot avt);

/// Tracks which chunk indices of each sample have arrived. A sample becomes
/// decoded exactly when its count of distinct indices first reaches k.
class ReceiverChunkStore {
 public:
  enum class Outcome { Stored, Decoded, Duplicate, AlreadyDecoded };

  explicit ReceiverChunkStore(int k);

  Outcome add(std::uint64_t sample_id, int chunk_index, Slot gen_time);

  bool decoded(std::uint64_t sample_id) const;
  int received_count(std::uint64_t sample_id) const;
  std::size_t decoded_count() const { return decoded_count_; }

  /// Drops bookkeeping for samples generated before `cutoff`. Chunks of a
  /// forgotten sample that arrive later start a fresh entry.
  void forget_before(Slot cutoff);

 private:
  struct Entry {
    std::bitset<256> have;
    int count = 0;
    bool decoded = false;
    Slot gen_time = 0;
  };

  int k_;
  std::size_t decoded_count_ = 0;
  std::unordered_map<std::uint64_t, Entry> entries_;
};

}  // namespace a3l
