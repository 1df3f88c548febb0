#include "a3l/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <numeric>
#include <system_error>
#include <thread>
#include <unordered_map>

#include "a3l/age.hpp"
#include "a3l/codec.hpp"
#include "a3l/wire.hpp"

namespace a3l::wire {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now().time_since_epoch())
      .count();
}

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

sockaddr_in resolve(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) throw ParameterError("cannot resolve host '" + ep.host + "'");
  sockaddr_in addr = *reinterpret_cast<const sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(ep.port);
  return addr;
}

class UdpSocket {
 public:
  UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
    if (fd_ < 0) throw_errno("socket");
  }
  ~UdpSocket() { ::close(fd_); }
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  void bind(const sockaddr_in& addr) {
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) throw_errno("bind");
  }

  std::uint16_t local_port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw_errno("getsockname");
    return ntohs(addr.sin_port);
  }

  void send_to(const sockaddr_in& to, const Bytes& data) {
    const ssize_t rc = ::sendto(fd_, data.data(), data.size(), 0,
                                reinterpret_cast<const sockaddr*>(&to), sizeof(to));
    // A full socket buffer or an unreachable peer loses the datagram, as the
    // network would.
    if (rc < 0 && errno != ENOBUFS && errno != EAGAIN && errno != ECONNREFUSED) throw_errno("sendto");
  }

  /// Waits up to timeout_ms; returns false on timeout.
  bool recv_from(Bytes& buf, sockaddr_in* from, int timeout_ms) {
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, std::max(0, timeout_ms));
    if (ready < 0) {
      if (errno == EINTR) return false;
      throw_errno("poll");
    }
    if (ready == 0) return false;
    buf.resize(65536);
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&addr), &len);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == ECONNREFUSED) return false;
      throw_errno("recvfrom");
    }
    buf.resize(static_cast<std::size_t>(n));
    if (from != nullptr) *from = addr;
    return true;
  }

 private:
  int fd_;
};

void validate(const LinkConfig& link) {
  CodingParams{link.k, link.n_init, link.sample_bytes}.validate();
  if (!(link.slot_ms > 0.0)) throw ParameterError("slot duration must be positive");
  if (link.avt < 1) throw ParameterError("age violation threshold must be >= 1 slot");
  if (link.initial_interval < 1) throw ParameterError("monitoring interval must be >= 1 slot");
  if (link.fixed_sigma && !(*link.fixed_sigma > 0.0)) throw ParameterError("rate must be positive");
}

vsvb::Params effective_params(const LinkConfig& link) {
  vsvb::Params p = link.params;
  if (!p.rtt_init) p.rtt_init = 2.0;
  return p;
}

vsvb::State link_state(const LinkConfig& link) {
  vsvb::State s = vsvb::initial_state({link.k, link.n_init, link.sample_bytes}, link.avt,
                                      link.initial_interval, effective_params(link));
  if (link.fixed_sigma) {
    s.sigma = *link.fixed_sigma;
    s.sigma_last = s.sigma;
    s.ts = vsvb::sampling_interval(s.n, s.sigma);
  }
  return s;
}

std::uint32_t ts_ms(Slot ts, double slot_ms) {
  return static_cast<std::uint32_t>(std::max(1.0, std::floor(ts * slot_ms + 0.5)));
}

struct SendParams {
  double sigma = 0.0;
  int n = 1;
  std::uint32_t ts_ms = 1;
};

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ParameterError("expected host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  try {
    std::size_t used = 0;
    const unsigned long port = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::logic_error&) {
    throw ParameterError("bad port in '" + text + "'");
  }
  return ep;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

Bytes sample_payload(std::uint32_t sample_id, std::size_t bytes) {
  Rng rng(sample_id, 0x5a);
  Bytes out(bytes);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.next_u64());
  return out;
}

SenderLog run_sender(const SenderConfig& cfg) {
  validate(cfg.link);
  const LinkConfig& link = cfg.link;
  const vsvb::Params params = effective_params(link);
  const sockaddr_in dest = resolve(cfg.dest);

  UdpSocket sock;
  sockaddr_in any{};
  any.sin_family = AF_INET;
  any.sin_addr.s_addr = htonl(INADDR_ANY);
  sock.bind(any);

  const vsvb::State init = link_state(link);
  SendParams current{init.sigma, init.n, ts_ms(init.ts, link.slot_ms)};

  SenderLog log;
  std::mutex mu;
  std::optional<RateChange> pending;  // written by the feedback thread only
  std::atomic<bool> has_pending{false};
  std::atomic<bool> done{false};
  std::atomic<std::int64_t> last_feedback_us{now_us()};
  std::atomic<std::uint64_t> feedback_count{0};
  std::atomic<std::uint64_t> malformed_count{0};
  const std::int64_t start_us = now_us();

  std::thread feedback([&] {
    Bytes buf;
    while (!done.load()) {
      if (!sock.recv_from(buf, nullptr, 20)) continue;
      FeedbackPacket fb;
      try {
        fb = decode_feedback(buf);
      } catch (const DecodeError&) {
        ++malformed_count;
        continue;
      }
      ++feedback_count;
      const std::int64_t t = now_us();
      last_feedback_us = t;
      if (link.fixed_sigma) continue;
      RateChange c;
      c.received_ms = static_cast<double>(t - start_us) / 1000.0;
      c.sigma = fb.new_rate_milli / 1000.0;
      c.n = std::max<int>(fb.new_n, link.k);
      c.ts_ms = fb.new_ts_ms;
      std::lock_guard lock(mu);
      pending = c;
      has_pending = true;
    }
  });

  std::map<int, MdsCodec> codecs;
  auto codec_for = [&](int n) -> const MdsCodec& {
    auto it = codecs.find(n);
    if (it == codecs.end()) it = codecs.emplace(n, MdsCodec({link.k, n, link.sample_bytes})).first;
    return it->second;
  };

  const double avt_us = static_cast<double>(link.avt) * link.slot_ms * 1000.0;
  auto next = Clock::now();
  std::uint32_t sample_id = 0;
  try {
    while (cfg.samples == 0 || log.samples_sent < cfg.samples) {
      if (cfg.stop != nullptr && cfg.stop->load()) break;
      std::this_thread::sleep_until(next);
      const std::int64_t t = now_us();
      const double t_ms = static_cast<double>(t - start_us) / 1000.0;
      if (cfg.duration_ms > 0.0 && t_ms >= cfg.duration_ms) break;

      if (has_pending.exchange(false)) {
        std::lock_guard lock(mu);
        RateChange c = *pending;
        c.applied_ms = t_ms;
        current = {c.sigma, c.n, c.ts_ms};
        log.changes.push_back(c);
      } else if (!link.fixed_sigma) {
        const Slot interval =
            log.changes.empty() ? link.initial_interval : vsvb::monitoring_interval_length(link.avt, current.n);
        const double silent_us = static_cast<double>(t - last_feedback_us.load());
        if (silent_us > 5.0 * static_cast<double>(interval) * link.slot_ms * 1000.0) {
          // Feedback lost: behave as the empty-pipe branch would.
          const double n = current.n;
          const double sigma_max = params.sigma_max.value_or(vsvb::default_sigma_max(link.k, link.avt));
          const double sigma = std::max(std::min(2.0 * (n + 0.05 * n) / *params.rtt_init, sigma_max),
                                        params.sigma_min);
          current = {sigma, current.n, ts_ms(vsvb::sampling_interval(current.n, sigma), link.slot_ms)};
          log.changes.push_back({t_ms, t_ms, sigma, current.n, current.ts_ms, true});
          ++log.fallbacks;
          last_feedback_us = t;
        }
      }

      const Sample sample{sample_id, 0, sample_payload(sample_id, link.sample_bytes)};
      const std::vector<Chunk> chunks = codec_for(current.n).encode(sample);
      const auto gen_us = static_cast<std::uint64_t>(now_us());
      for (const Chunk& c : chunks) {
        if (static_cast<double>(now_us()) - static_cast<double>(gen_us) > avt_us) {
          ++log.stale_chunks_skipped;
          continue;
        }
        ChunkPacket p;
        p.sample_id = sample_id;
        p.gen_timestamp_us = gen_us;
        p.chunk_index = static_cast<std::uint8_t>(c.chunk_index);
        p.k = static_cast<std::uint8_t>(link.k);
        p.n = static_cast<std::uint8_t>(current.n);
        p.payload = c.payload;
        sock.send_to(dest, encode(p));
        ++log.chunks_sent;
      }
      log.sample_times_ms.push_back(t_ms);
      ++log.samples_sent;
      ++sample_id;

      next += std::chrono::microseconds(static_cast<std::int64_t>(current.ts_ms) * 1000);
      const auto now = Clock::now();
      if (next < now - std::chrono::milliseconds(current.ts_ms)) next = now;
    }
    std::this_thread::sleep_for(std::chrono::microseconds(static_cast<std::int64_t>(cfg.linger_ms * 1000)));
  } catch (...) {
    done = true;
    feedback.join();
    throw;
  }
  done = true;
  feedback.join();
  log.feedback_received = feedback_count.load();
  log.malformed_feedback = malformed_count.load();
  return log;
}

ReceiverLog run_receiver(const ReceiverConfig& cfg) {
  validate(cfg.link);
  const LinkConfig& link = cfg.link;
  const vsvb::Params params = effective_params(link);
  if (!(cfg.drop_shim >= 0.0 && cfg.drop_shim <= 1.0)) throw ParameterError("drop shim must be in [0, 1]");
  if (cfg.delay_shim_ms < 0.0) throw ParameterError("delay shim must be non-negative");

  UdpSocket sock;
  sock.bind(resolve(cfg.listen));
  if (cfg.bound_port != nullptr) *cfg.bound_port = sock.local_port();

  const double slot_us = link.slot_ms * 1000.0;
  const std::int64_t t0 = now_us();
  auto slot_of = [&](std::int64_t us) {
    return static_cast<Slot>(std::floor(static_cast<double>(us - t0) / slot_us));
  };

  vsvb::State st = link_state(link);
  int n_used = st.n;
  Slot ts_used = st.ts;
  Slot start = 0;

  ReceiverChunkStore store(link.k);
  std::unordered_map<std::uint32_t, std::vector<Chunk>> partial;
  std::map<int, MdsCodec> codecs;
  Rng drop_rng(cfg.seed, 11);
  std::deque<std::pair<std::int64_t, Bytes>> delayed;

  vsvb::DecodeLog dlog;
  Slot freshest_gen = -link.avt;
  Slot freshest_decode = 0;
  auto reset_log = [&](Slot s) {
    dlog.interval_start = s;
    dlog.gen.assign(1, freshest_gen);
    dlog.decode.assign(1, freshest_decode);
    dlog.interval_end.reset();
  };
  reset_log(0);

  std::vector<double> delays;  // slots, this interval
  double min_delay_us = kInfinity;
  double delay_sum_ms = 0.0;
  std::optional<sockaddr_in> peer;
  bool traffic = false;
  std::int64_t last_packet_us = t0;
  std::uint32_t max_id = 0;
  ReceiverLog log;

  auto process = [&](const Bytes& data, std::int64_t now) {
    ChunkPacket p;
    try {
      p = decode_chunk(data);
    } catch (const DecodeError&) {
      ++log.malformed;
      return;
    }
    if (p.k != link.k) {
      ++log.malformed;
      return;
    }
    const Slot gen_slot = slot_of(static_cast<std::int64_t>(p.gen_timestamp_us));
    const auto outcome = store.add(p.sample_id, p.chunk_index, gen_slot);
    if (outcome == ReceiverChunkStore::Outcome::Duplicate) {
      ++log.duplicates;
      return;
    }
    ++log.chunks_received;
    double delay_us = static_cast<double>(now) - static_cast<double>(p.gen_timestamp_us);
    min_delay_us = std::min(min_delay_us, delay_us);
    if (cfg.relative_delay) delay_us -= min_delay_us;
    delay_sum_ms += delay_us / 1000.0;
    delays.push_back(delay_us / slot_us);
    max_id = std::max(max_id, p.sample_id);

    if (outcome == ReceiverChunkStore::Outcome::AlreadyDecoded) return;
    auto& have = partial[p.sample_id];
    have.push_back({p.sample_id, p.chunk_index, gen_slot, std::move(p.payload)});
    if (outcome != ReceiverChunkStore::Outcome::Decoded) return;

    auto it = codecs.find(p.n);
    if (it == codecs.end()) it = codecs.emplace(p.n, MdsCodec({link.k, p.n, link.sample_bytes})).first;
    try {
      if (it->second.decode(have) != sample_payload(p.sample_id, link.sample_bytes)) ++log.payload_mismatches;
    } catch (const std::exception&) {
      ++log.payload_mismatches;
    }
    partial.erase(p.sample_id);
    ++log.samples_decoded;
    const Slot d = std::max(slot_of(now), freshest_decode);
    if (gen_slot > freshest_gen) {
      freshest_gen = gen_slot;
      freshest_decode = d;
      dlog.gen.push_back(gen_slot);
      dlog.decode.push_back(d);
    }
    if (partial.size() > 4096) {
      std::erase_if(partial, [&](const auto& kv) { return kv.first + 2048 < max_id; });
      store.forget_before(gen_slot - 100 * link.avt);
    }
  };

  auto boundary = [&](Slot end) {
    dlog.interval_end = end;
    const Slot interval = end - start;
    vsvb::IntervalStats stats;
    stats.av_raw = params.printed_alpha ? vsvb::interval_age_violation(dlog, link.avt)
                                        : vsvb::interval_age_violation_exact(dlog, link.avt);
    stats.mean_delay = vsvb::interval_mean_delay(delays);
    if (!delays.empty()) stats.min_delay = *std::min_element(delays.begin(), delays.end());
    stats.chunks_received = static_cast<std::int64_t>(delays.size());
    stats.expected_chunks = vsvb::expected_chunks(n_used, interval, ts_used);

    vsvb::Branch branch = vsvb::Branch::None;
    vsvb::Processed pr;
    if (!link.fixed_sigma) {
      st = vsvb::vsvb_update(st, stats, &branch, &pr, params);
    } else {
      ++st.mi;
      pr.av_ratio = std::clamp(stats.av_raw / static_cast<double>(interval), 0.0, 1.0);
      if (stats.expected_chunks > 0) {
        pr.pdr = std::min(1.0, static_cast<double>(stats.chunks_received) /
                                   static_cast<double>(stats.expected_chunks));
      }
    }

    FeedbackPacket fb;
    fb.mi_index = static_cast<std::uint32_t>(st.mi);
    fb.new_rate_milli = static_cast<std::uint32_t>(std::llround(st.sigma * 1000.0));
    fb.new_n = static_cast<std::uint8_t>(st.n);
    fb.new_ts_ms = ts_ms(st.ts, link.slot_ms);
    fb.av_ratio_milli = static_cast<std::uint16_t>(std::llround(pr.av_ratio * 1000.0));
    fb.pdr_milli = static_cast<std::uint16_t>(std::llround(pr.pdr * 1000.0));
    fb.mean_delay_us = std::isfinite(stats.mean_delay)
                           ? static_cast<std::uint64_t>(std::llround(stats.mean_delay * slot_us))
                           : kInfiniteDelay;
    if (peer) {
      sock.send_to(*peer, encode(fb));
      ++log.feedback_sent;
    }

    IntervalRecord rec;
    rec.mi = st.mi;
    rec.start = start;
    rec.end = end;
    rec.branch = static_cast<int>(branch);
    rec.sigma = st.sigma;
    rec.n = st.n;
    rec.ts = static_cast<double>(st.ts);
    rec.next_interval = st.interval;
    rec.av_raw = stats.av_raw;
    rec.av_ratio = pr.av_ratio;
    rec.av_ema = st.av_ema;
    rec.mean_delay = stats.mean_delay;
    rec.delay_ema = st.delay_ema;
    rec.pdr = pr.pdr;
    rec.chunks_received = stats.chunks_received;
    rec.ef = st.ef;
    rec.df = st.df;
    rec.min_rtt = st.min_rtt;
    rec.delay_sum = std::accumulate(delays.begin(), delays.end(), 0.0);
    log.intervals.push_back(rec);

    n_used = st.n;
    ts_used = st.ts;
    start = end;
    delays.clear();
    reset_log(end);
  };

  Bytes buf;
  for (;;) {
    const std::int64_t now = now_us();
    if (cfg.stop != nullptr && cfg.stop->load()) break;
    if (cfg.duration_ms > 0.0 && static_cast<double>(now - t0) >= cfg.duration_ms * 1000.0) break;
    if (traffic && delayed.empty() &&
        static_cast<double>(now - last_packet_us) >= cfg.idle_timeout_ms * 1000.0) {
      break;
    }

    while (!delayed.empty() && delayed.front().first <= now) {
      process(delayed.front().second, now);
      delayed.pop_front();
    }
    const Slot cur = slot_of(now);
    const Slot interval = st.interval;
    if (cur - start >= interval) {
      boundary(start + interval);
      continue;
    }

    double wait_us = (static_cast<double>(start + interval) * slot_us + static_cast<double>(t0)) -
                     static_cast<double>(now);
    if (!delayed.empty()) wait_us = std::min(wait_us, static_cast<double>(delayed.front().first - now));
    const int timeout_ms = std::clamp(static_cast<int>(std::ceil(wait_us / 1000.0)), 0, 5);

    sockaddr_in from{};
    if (!sock.recv_from(buf, &from, timeout_ms)) continue;
    const std::int64_t arrived = now_us();
    ++log.datagrams;
    traffic = true;
    last_packet_us = arrived;
    peer = from;
    if (drop_rng.bernoulli(cfg.drop_shim)) {
      ++log.shim_dropped;
      continue;
    }
    if (cfg.delay_shim_ms > 0.0) {
      delayed.emplace_back(arrived + static_cast<std::int64_t>(cfg.delay_shim_ms * 1000.0), buf);
    } else {
      process(buf, arrived);
    }
  }

  if (log.chunks_received > 0) {
    log.mean_delay_ms = delay_sum_ms / static_cast<double>(log.chunks_received);
  }
  return log;
}

}  // namespace a3l::wire
