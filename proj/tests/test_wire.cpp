#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#include "a3l/codec.hpp"
#include "a3l/transport.hpp"
#include "a3l/wire.hpp"

using namespace a3l;
using namespace a3l::wire;

namespace {

// Bare loopback socket for playing one side of the protocol by hand.
class Peer {
 public:
  Peer() {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a);
    socklen_t len = sizeof a;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
    port_ = ntohs(a.sin_port);
  }
  ~Peer() { ::close(fd_); }
  Peer(const Peer&) = delete;
  Peer& operator=(const Peer&) = delete;

  std::uint16_t port() const { return port_; }

  void send_to(std::uint16_t port, const Bytes& data) {
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    a.sin_port = htons(port);
    ::sendto(fd_, data.data(), data.size(), 0, reinterpret_cast<sockaddr*>(&a), sizeof a);
  }

  /// Receives one datagram within timeout_ms; records the sender's port.
  bool recv(Bytes& out, int timeout_ms) {
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, timeout_ms) <= 0) return false;
    out.resize(65536);
    sockaddr_in a{};
    socklen_t len = sizeof a;
    const auto n = ::recvfrom(fd_, out.data(), out.size(), 0, reinterpret_cast<sockaddr*>(&a), &len);
    if (n < 0) return false;
    out.resize(static_cast<std::size_t>(n));
    from_port_ = ntohs(a.sin_port);
    return true;
  }
  std::uint16_t from_port() const { return from_port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::uint16_t from_port_ = 0;
};

ChunkPacket chunk_packet(const std::vector<Chunk>& chunks, int index, int n) {
  ChunkPacket p;
  p.sample_id = static_cast<std::uint32_t>(chunks[index].sample_id);
  p.gen_timestamp_us = 0;
  p.chunk_index = static_cast<std::uint8_t>(index);
  p.k = 3;
  p.n = static_cast<std::uint8_t>(n);
  p.payload = chunks[index].payload;
  return p;
}

double median_gap(const std::vector<double>& times, double from, double to) {
  std::vector<double> gaps;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i - 1] >= from && times[i] <= to) gaps.push_back(times[i] - times[i - 1]);
  }
  if (gaps.empty()) return 0.0;
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  return gaps[gaps.size() / 2];
}

}  // namespace

TEST_CASE("chunk packet layout is big-endian") {
  ChunkPacket p{.sample_id = 0x01020304, .gen_timestamp_us = 0x1112131415161718, .chunk_index = 2,
                .k = 3, .n = 5, .payload = {0xAA, 0xBB}};
  const Bytes b = encode(p);
  const Bytes expect{'A', '3', 'L', 'F', 1, 0x01, 0x02, 0x03, 0x04, 0x11, 0x12, 0x13, 0x14,
                     0x15, 0x16, 0x17, 0x18, 2, 3, 5, 0x00, 0x02, 0xAA, 0xBB};
  CHECK(b == expect);
  CHECK(decode_chunk(b) == p);
}

TEST_CASE("feedback packet layout is big-endian and fixed size") {
  FeedbackPacket f{.mi_index = 7, .new_rate_milli = 2500, .new_n = 4, .new_ts_ms = 0x01000002,
                   .av_ratio_milli = 1000, .pdr_milli = 0x0102, .mean_delay_us = kInfiniteDelay};
  const Bytes b = encode(f);
  REQUIRE(b.size() == kFeedbackBytes);
  const Bytes head{'A', '3', 'L', 'B', 1, 0, 0, 0, 7, 0, 0, 0x09, 0xC4, 4, 0x01, 0, 0, 0x02, 0x03, 0xE8, 0x01, 0x02};
  CHECK(std::equal(head.begin(), head.end(), b.begin()));
  CHECK(std::all_of(b.begin() + 22, b.end(), [](std::uint8_t x) { return x == 0xFF; }));
  CHECK(decode_feedback(b) == f);
}

TEST_CASE("random packets round-trip") {
  Rng rng(6, 0);
  for (int i = 0; i < 2000; ++i) {
    ChunkPacket p;
    p.n = static_cast<std::uint8_t>(1 + rng.next_u64() % 255);
    p.k = static_cast<std::uint8_t>(1 + rng.next_u64() % p.n);
    p.chunk_index = static_cast<std::uint8_t>(rng.next_u64() % p.n);
    p.sample_id = static_cast<std::uint32_t>(rng.next_u64());
    p.gen_timestamp_us = rng.next_u64();
    p.payload.resize(rng.next_u64() % 300);
    for (auto& x : p.payload) x = static_cast<std::uint8_t>(rng.next_u64());
    REQUIRE(decode_chunk(encode(p)) == p);

    FeedbackPacket f;
    f.mi_index = static_cast<std::uint32_t>(rng.next_u64());
    f.new_rate_milli = static_cast<std::uint32_t>(rng.next_u64());
    f.new_n = static_cast<std::uint8_t>(1 + rng.next_u64() % 255);
    f.new_ts_ms = static_cast<std::uint32_t>(1 + rng.next_u64() % 100000);
    f.av_ratio_milli = static_cast<std::uint16_t>(rng.next_u64() % 1001);
    f.pdr_milli = static_cast<std::uint16_t>(rng.next_u64() % 1001);
    f.mean_delay_us = rng.next_u64();
    REQUIRE(decode_feedback(encode(f)) == f);
  }
}

TEST_CASE("decode errors") {
  const Bytes good = encode(ChunkPacket{.sample_id = 1, .k = 2, .n = 3, .payload = {1, 2, 3}});
  auto kind_of = [](auto fn) {
    try {
      fn();
    } catch (const DecodeError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  using K = DecodeError::Kind;
  Bytes cut(good.begin(), good.end() - 1);
  CHECK(kind_of([&] { decode_chunk(cut); }) == static_cast<int>(K::Truncated));
  Bytes head(good.begin(), good.begin() + 10);
  CHECK(kind_of([&] { decode_chunk(head); }) == static_cast<int>(K::Truncated));
  Bytes magic = good;
  magic[0] = 'X';
  CHECK(kind_of([&] { decode_chunk(magic); }) == static_cast<int>(K::BadMagic));
  Bytes version = good;
  version[4] = 9;
  CHECK(kind_of([&] { decode_chunk(version); }) == static_cast<int>(K::VersionMismatch));
  Bytes extra = good;
  extra.push_back(0);
  CHECK(kind_of([&] { decode_chunk(extra); }) == static_cast<int>(K::BadLength));
  Bytes fields = good;
  fields[18] = 5;  // k > n
  CHECK(kind_of([&] { decode_chunk(fields); }) == static_cast<int>(K::InvalidField));

  Bytes fb = encode(FeedbackPacket{});
  CHECK(kind_of([&] { decode_feedback(Bytes(fb.begin(), fb.end() - 1)); }) == static_cast<int>(K::Truncated));
  Bytes fb_long = fb;
  fb_long.push_back(0);
  CHECK(kind_of([&] { decode_feedback(fb_long); }) == static_cast<int>(K::BadLength));
  fb[18] = 0xFF;  // av ratio above 1000
  CHECK(kind_of([&] { decode_feedback(fb); }) == static_cast<int>(K::InvalidField));
  Bytes fb_magic = encode(FeedbackPacket{});
  fb_magic[3] = 'F';
  CHECK(kind_of([&] { decode_feedback(fb_magic); }) == static_cast<int>(K::BadMagic));

  CHECK_THROWS_AS(encode(ChunkPacket{.chunk_index = 3, .k = 1, .n = 3}), ParameterError);
  CHECK_THROWS_AS(encode(FeedbackPacket{.av_ratio_milli = 1001}), ParameterError);
}

TEST_CASE("endpoint parsing") {
  const auto e = Endpoint::parse("127.0.0.1:9400");
  CHECK(e.host == "127.0.0.1");
  CHECK(e.port == 9400);
  CHECK(e.str() == "127.0.0.1:9400");
  CHECK_THROWS_AS(Endpoint::parse("localhost"), ParameterError);
  CHECK_THROWS_AS(Endpoint::parse("h:70000"), ParameterError);
  CHECK_THROWS_AS(Endpoint::parse("h:12x"), ParameterError);
}

TEST_CASE("receiver dedups and decodes at the k-th distinct chunk") {
  std::atomic<std::uint16_t> port{0};
  ReceiverConfig rc;
  rc.listen = {"127.0.0.1", 0};
  rc.link.fixed_sigma = 1.0;
  rc.idle_timeout_ms = 300;
  rc.bound_port = &port;
  ReceiverLog log;
  std::thread t([&] { log = run_receiver(rc); });
  while (port == 0) std::this_thread::yield();

  const CodingParams coding{3, 5, rc.link.sample_bytes};
  const auto chunks = encode_sample({1, 0, sample_payload(1, rc.link.sample_bytes)}, coding);
  Peer peer;
  for (int idx : {4, 4, 2, 0, 1}) peer.send_to(port, encode(chunk_packet(chunks, idx, 5)));
  peer.send_to(port, Bytes{1, 2, 3});
  t.join();
  CHECK(log.samples_decoded == 1);
  CHECK(log.duplicates == 1);
  CHECK(log.chunks_received == 4);
  CHECK(log.malformed == 1);
  CHECK(log.payload_mismatches == 0);
}

TEST_CASE("silent interval yields zero PDR and the infinite-delay sentinel") {
  std::atomic<std::uint16_t> port{0};
  ReceiverConfig rc;
  rc.listen = {"127.0.0.1", 0};
  rc.link.fixed_sigma = 1.0;
  rc.link.initial_interval = 20;
  rc.idle_timeout_ms = 400;
  rc.bound_port = &port;
  ReceiverLog log;
  std::thread t([&] { log = run_receiver(rc); });
  while (port == 0) std::this_thread::yield();

  const CodingParams coding{3, 5, rc.link.sample_bytes};
  const auto chunks = encode_sample({0, 0, sample_payload(0, rc.link.sample_bytes)}, coding);
  Peer peer;
  peer.send_to(port, encode(chunk_packet(chunks, 0, 5)));
  bool saw_empty = false;
  Bytes buf;
  while (peer.recv(buf, 500)) {
    const auto fb = decode_feedback(buf);
    if (fb.pdr_milli == 0 && fb.mean_delay_us == kInfiniteDelay) saw_empty = true;
  }
  t.join();
  CHECK(saw_empty);
  CHECK(log.feedback_sent > 2);
}

TEST_CASE("sender adopts the fed-back sampling interval at the next sample") {
  Peer receiver;
  std::atomic<bool> stop{false};
  std::thread fake([&] {
    Bytes buf;
    int datagrams = 0;
    bool sent = false;
    while (!stop) {
      if (!receiver.recv(buf, 20)) continue;
      if (++datagrams == 50 && !sent) {
        FeedbackPacket fb;
        fb.mi_index = 1;
        fb.new_rate_milli = 495;
        fb.new_n = 5;
        fb.new_ts_ms = 10;
        fb.pdr_milli = 1000;
        fb.mean_delay_us = 100;
        sent = true;
        // Reply from the receiving socket so the sender sees its peer.
        receiver.send_to(receiver.from_port(), encode(fb));
      }
    }
  });

  SenderConfig sc;
  sc.dest = {"127.0.0.1", receiver.port()};
  sc.link.k = 3;
  sc.link.n_init = 5;
  sc.samples = 60;
  sc.linger_ms = 50;
  const SenderLog log = run_sender(sc);
  stop = true;
  fake.join();

  REQUIRE(log.changes.size() == 1);
  const RateChange& c = log.changes[0];
  CHECK_FALSE(c.fallback);
  CHECK(c.ts_ms == 10);
  const double before = median_gap(log.sample_times_ms, 0.0, c.applied_ms);
  const double after = median_gap(log.sample_times_ms, c.applied_ms, 1e9);
  CHECK(c.applied_ms - c.received_ms <= before + 1.0);
  CHECK(before < 5.0);
  CHECK(after == doctest::Approx(10.0).epsilon(0.2));
}

TEST_CASE("lossless loopback decodes every sample") {
  std::atomic<std::uint16_t> port{0};
  ReceiverConfig rc;
  rc.listen = {"127.0.0.1", 0};
  rc.link.fixed_sigma = 2.5;
  rc.idle_timeout_ms = 300;
  rc.bound_port = &port;
  ReceiverLog rlog;
  std::thread t([&] { rlog = run_receiver(rc); });
  while (port == 0) std::this_thread::yield();
  SenderConfig sc;
  sc.dest = {"127.0.0.1", port};
  sc.link = rc.link;
  sc.samples = 200;
  const SenderLog slog = run_sender(sc);
  t.join();
  CHECK(slog.samples_sent == 200);
  CHECK(rlog.samples_decoded == 200);
  CHECK(rlog.payload_mismatches == 0);
  // The last report can go out after the sender has closed.
  CHECK(slog.feedback_received >= 1);
  CHECK(slog.feedback_received <= rlog.feedback_sent);
}
