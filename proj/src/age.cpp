#include "a3l/age.hpp"

#include <algorithm>
#include <string>

namespace a3l {

AgeTracker::AgeTracker(Slot avt, Slot initial_age, Slot start)
    : avt_(avt), last_slot_(start), reference_(start - initial_age) {
  if (avt <= 0) throw ParameterError("age violation threshold must be positive");
  if (initial_age < 0) throw ParameterError("initial age must be non-negative");
}

Slot AgeTracker::step(Slot now, std::span<const Slot> newly_decoded_gens) {
  if (now <= last_slot_) {
    throw InputError("age step at slot " + std::to_string(now) + " does not advance past " +
                     std::to_string(last_slot_));
  }
  for (Slot gen : newly_decoded_gens) {
    if (gen > now) {
      throw CausalityError("sample generated at " + std::to_string(gen) + " decoded at " +
                           std::to_string(now));
    }
    if (!freshest_ || gen > *freshest_) freshest_ = gen;
  }
  if (freshest_ && *freshest_ > reference_) reference_ = *freshest_;
  last_slot_ = now;
  const Slot age = now - reference_;
  if (recording_) trace_.push_back({now, age});
  return age;
}

double age_violation_rate(std::span<const Slot> ages, Slot avt) {
  if (ages.empty()) throw InputError("age violation rate of an empty trace");
  const auto violated = std::count_if(ages.begin(), ages.end(), [avt](Slot a) { return a >= avt; });
  return static_cast<double>(violated) / static_cast<double>(ages.size());
}

double age_violation_rate(std::span<const AgePoint> trace, Slot avt) {
  if (trace.empty()) throw InputError("age violation rate of an empty trace");
  const auto violated =
      std::count_if(trace.begin(), trace.end(), [avt](const AgePoint& p) { return p.age >= avt; });
  return static_cast<double>(violated) / static_cast<double>(trace.size());
}

ReceiverChunkStore::ReceiverChunkStore(int k) : k_(k) {
  if (k < 1) throw ParameterError("k must be positive");
}

ReceiverChunkStore::Outcome ReceiverChunkStore::add(std::uint64_t sample_id, int chunk_index,
                                                    Slot gen_time) {
  if (chunk_index < 0 || chunk_index >= 256) throw InputError("chunk index out of range");
  Entry& e = entries_[sample_id];
  if (e.count == 0) e.gen_time = gen_time;
  if (e.have.test(chunk_index)) return Outcome::Duplicate;
  e.have.set(chunk_index);
  ++e.count;
  if (e.decoded) return Outcome::AlreadyDecoded;
  if (e.count >= k_) {
    e.decoded = true;
    ++decoded_count_;
    return Outcome::Decoded;
  }
  return Outcome::Stored;
}

bool ReceiverChunkStore::decoded(std::uint64_t sample_id) const {
  const auto it = entries_.find(sample_id);
  return it != entries_.end() && it->second.decoded;
}

int ReceiverChunkStore::received_count(std::uint64_t sample_id) const {
  const auto it = entries_.find(sample_id);
  return it == entries_.end() ? 0 : it->second.count;
}

void ReceiverChunkStore::forget_before(Slot cutoff) {
  std::erase_if(entries_, [cutoff](const auto& kv) { return kv.second.gen_time < cutoff; });
}

}  // namespace a3l
