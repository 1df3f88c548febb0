#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "a3l/core.hpp"

namespace a3l::wire {

inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kChunkHeaderBytes = 22;
inline constexpr std::size_t kFeedbackBytes = 30;
inline constexpr std::uint64_t kInfiniteDelay = UINT64_MAX;

/// Chunk datagram, big-endian:
///   "A3LF" | version u8 | sample_id u32 | gen_timestamp_us u64 |
///   chunk_index u8 | k u8 | n u8 | payload_len u16 | payload
struct ChunkPacket {
  std::uint32_t sample_id = 0;
  std::uint64_t gen_timestamp_us = 0;
  std::uint8_t chunk_index = 0;
  std::uint8_t k = 1;
  std::uint8_t n = 1;
  Bytes payload;

  bool operator==(const ChunkPacket&) const = default;
};

/// Feedback datagram, big-endian, fixed 30 bytes:
///   "A3LB" | version u8 | mi_index u32 | new_rate_milli u32 | new_n u8 |
///   new_ts_ms u32 | av_ratio_milli u16 | pdr_milli u16 | mean_delay_us u64
/// mean_delay_us = kInfiniteDelay when nothing arrived.
struct FeedbackPacket {
  std::uint32_t mi_index = 0;
  std::uint32_t new_rate_milli = 0;
  std::uint8_t new_n = 1;
  std::uint32_t new_ts_ms = 1;
  std::uint16_t av_ratio_milli = 0;  // 0..1000
  std::uint16_t pdr_milli = 0;       // 0..1000
  std::uint64_t mean_delay_us = kInfiniteDelay;

  bool operator==(const FeedbackPacket&) const = default;
};

class DecodeError : public std::runtime_error {
 public:
  enum class Kind { Truncated, BadMagic, VersionMismatch, BadLength, InvalidField };

  DecodeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Throws ParameterError for out-of-range fields.
Bytes encode(const ChunkPacket& p);
Bytes encode(const FeedbackPacket& p);

ChunkPacket decode_chunk(std::span<const std::uint8_t> buf);
FeedbackPacket decode_feedback(std::span<const std::uint8_t> buf);

}  // namespace a3l::wire
