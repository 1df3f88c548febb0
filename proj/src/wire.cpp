#include "a3l/wire.hpp"

#include <algorithm>
#include <cstring>

namespace a3l::wire {

namespace {

constexpr char kChunkMagic[4] = {'A', '3', 'L', 'F'};
constexpr char kFeedbackMagic[4] = {'A', '3', 'L', 'B'};

template <typename T>
void put(Bytes& out, T v) {
  for (int shift = (sizeof(T) - 1) * 8; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  template <typename T>
  T get() {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<T>((v << 8) | buf_[pos_ + i]);
    pos_ += sizeof(T);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

void check_header(std::span<const std::uint8_t> buf, const char (&magic)[4], std::size_t min_len) {
  if (buf.size() < min_len) {
    throw DecodeError(DecodeError::Kind::Truncated,
                      "datagram of " + std::to_string(buf.size()) + " bytes is truncated");
  }
  if (std::memcmp(buf.data(), magic, 4) != 0) {
    throw DecodeError(DecodeError::Kind::BadMagic, "bad magic");
  }
  if (buf[4] != kVersion) {
    throw DecodeError(DecodeError::Kind::VersionMismatch,
                      "unsupported version " + std::to_string(buf[4]));
  }
}

}  // namespace

Bytes encode(const ChunkPacket& p) {
  if (p.k < 1 || p.k > p.n) throw ParameterError("chunk packet needs 1 <= k <= n");
  if (p.chunk_index >= p.n) throw ParameterError("chunk index must be below n");
  if (p.payload.size() > UINT16_MAX) throw ParameterError("chunk payload too large");
  Bytes out(kChunkMagic, kChunkMagic + 4);
  out.reserve(kChunkHeaderBytes + p.payload.size());
  put<std::uint8_t>(out, kVersion);
  put(out, p.sample_id);
  put(out, p.gen_timestamp_us);
  put(out, p.chunk_index);
  put(out, p.k);
  put(out, p.n);
  put(out, static_cast<std::uint16_t>(p.payload.size()));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

Bytes encode(const FeedbackPacket& p) {
  if (p.av_ratio_milli > 1000 || p.pdr_milli > 1000) {
    throw ParameterError("ratio fields must be in [0, 1000]");
  }
  if (p.new_n < 1 || p.new_ts_ms < 1) throw ParameterError("n and T_s must be positive");
  Bytes out(kFeedbackMagic, kFeedbackMagic + 4);
  out.reserve(kFeedbackBytes);
  put<std::uint8_t>(out, kVersion);
  put(out, p.mi_index);
  put(out, p.new_rate_milli);
  put(out, p.new_n);
  put(out, p.new_ts_ms);
  put(out, p.av_ratio_milli);
  put(out, p.pdr_milli);
  put(out, p.mean_delay_us);
  return out;
}

ChunkPacket decode_chunk(std::span<const std::uint8_t> buf) {
  check_header(buf, kChunkMagic, kChunkHeaderBytes);
  Reader r(buf.subspan(5));
  ChunkPacket p;
  p.sample_id = r.get<std::uint32_t>();
  p.gen_timestamp_us = r.get<std::uint64_t>();
  p.chunk_index = r.get<std::uint8_t>();
  p.k = r.get<std::uint8_t>();
  p.n = r.get<std::uint8_t>();
  const auto len = r.get<std::uint16_t>();
  if (buf.size() != kChunkHeaderBytes + len) {
    throw DecodeError(buf.size() < kChunkHeaderBytes + len ? DecodeError::Kind::Truncated
                                                           : DecodeError::Kind::BadLength,
                      "payload length " + std::to_string(len) + " does not match datagram size " +
                          std::to_string(buf.size()));
  }
  if (p.k < 1 || p.k > p.n || p.chunk_index >= p.n) {
    throw DecodeError(DecodeError::Kind::InvalidField, "inconsistent k, n or chunk index");
  }
  p.payload.assign(buf.begin() + kChunkHeaderBytes, buf.end());
  return p;
}

FeedbackPacket decode_feedback(std::span<const std::uint8_t> buf) {
  check_header(buf, kFeedbackMagic, kFeedbackBytes);
  if (buf.size() != kFeedbackBytes) {
    throw DecodeError(DecodeError::Kind::BadLength, "feedback datagram must be 30 bytes");
  }
  Reader r(buf.subspan(5));
  FeedbackPacket p;
  p.mi_index = r.get<std::uint32_t>();
  p.new_rate_milli = r.get<std::uint32_t>();
  p.new_n = r.get<std::uint8_t>();
  p.new_ts_ms = r.get<std::uint32_t>();
  p.av_ratio_milli = r.get<std::uint16_t>();
  p.pdr_milli = r.get<std::uint16_t>();
  p.mean_delay_us = r.get<std::uint64_t>();
  if (p.av_ratio_milli > 1000 || p.pdr_milli > 1000 || p.new_n < 1 || p.new_ts_ms < 1) {
    throw DecodeError(DecodeError::Kind::InvalidField, "feedback field out of range");
  }
  return p;
}

}  // namespace a3l::wire
