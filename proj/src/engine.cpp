#include "engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "a3l/age.hpp"

namespace a3l::detail {

namespace {

struct Flow {
  Slot avt = 1;
  AgeTracker tracker;
  ReceiverChunkStore store;
  vsvb::DecodeLog log;
  Slot freshest_gen = 0;
  Slot freshest_decode = 0;
  double sigma = 0.0;
  Slot ts = 1;
  Slot anchor = 1;  // generation happens when (t - anchor) % ts == 0
  std::vector<double> delays;
  double min_delay = kInfinity;
  std::int64_t violations_ge = 0;
  SimResult result;

  Flow(Slot avt_, Slot initial_age, int k)
      : avt(avt_), tracker(avt_, initial_age, 0), store(k), freshest_gen(-initial_age) {
    tracker.set_recording(false);
  }

  void reset_log(Slot start) {
    log.interval_start = start;
    log.gen.assign(1, freshest_gen);
    log.decode.assign(1, freshest_decode);
    log.interval_end.reset();
  }
};

}  // namespace

EngineResult run_engine(const EngineSpec& spec) {
  const netsim::SimConfig& cfg = spec.cfg;
  cfg.validate();
  const auto flow_count = static_cast<int>(spec.avts.size());
  if (flow_count < 1) throw ParameterError("at least one flow is required");
  for (Slot a : spec.avts) {
    if (a < 1) throw ParameterError("age violation threshold must be >= 1");
  }
  if (spec.fixed_sigma && !(*spec.fixed_sigma > 0.0)) throw ParameterError("rate must be positive");

  const Slot sys_avt = *std::min_element(spec.avts.begin(), spec.avts.end());
  vsvb::Params params = spec.params;
  if (!params.rtt_init) params.rtt_init = std::max(1.0, 2.0 * static_cast<double>(cfg.propagation_delay));
  params.sigma_max = flow_count * params.sigma_max.value_or(vsvb::default_sigma_max(cfg.coding.k, sys_avt));

  vsvb::State sys = vsvb::initial_state(cfg.coding, sys_avt, cfg.monitoring_interval, params);
  sys.flows = flow_count;
  sys.sigma *= flow_count;
  sys.sigma_last = sys.sigma;
  if (spec.fixed_sigma) {
    sys.sigma = *spec.fixed_sigma;
    sys.sigma_last = sys.sigma;
  }

  netsim::Bottleneck queue(cfg);
  std::vector<Flow> flows;
  flows.reserve(flow_count);
  for (Slot a : spec.avts) {
    const Slot initial_age = cfg.initial_age < 0 ? a : cfg.initial_age;
    Flow& f = flows.emplace_back(a, initial_age, cfg.coding.k);
    f.sigma = sys.sigma / flow_count;
    f.ts = vsvb::sampling_interval(sys.n, f.sigma);
    f.reset_log(0);
    f.result.avt = a;
    f.result.ages.reserve(static_cast<std::size_t>(cfg.duration));
  }

  // Chunks older than this can no longer be in the network.
  const Slot horizon = 2 * (static_cast<Slot>(std::ceil(static_cast<double>(cfg.buffer_capacity) / cfg.q_s)) +
                            cfg.propagation_delay + 1);

  EngineResult out;
  Slot start = 0;
  std::vector<Slot> decoded;

  for (Slot t = 1; t <= cfg.duration; ++t) {
    // Receiver: deliveries, decodes, age.
    for (const netsim::SimChunk& c : queue.deliveries_at(t)) {
      Flow& f = flows[c.flow];
      const auto d = static_cast<double>(c.delay());
      f.delays.push_back(d);
      f.min_delay = std::min(f.min_delay, d);
      if (f.store.add(c.sample_id, c.index, c.gen_time) == ReceiverChunkStore::Outcome::Decoded) {
        ++f.result.samples_decoded;
        if (c.gen_time > f.freshest_gen) {
          f.freshest_gen = c.gen_time;
          f.freshest_decode = t;
          f.log.gen.push_back(c.gen_time);
          f.log.decode.push_back(t);
        }
      }
    }
    for (Flow& f : flows) {
      decoded.assign(1, f.freshest_gen);
      const Slot age = f.tracker.step(t, f.freshest_decode == t ? std::span<const Slot>(decoded)
                                                                 : std::span<const Slot>());
      f.result.ages.push_back(age);
      if (age >= f.avt) ++f.violations_ge;
    }

    // Feedback at the interval boundary.
    if (t - start == sys.interval) {
      const Slot interval = sys.interval;
      vsvb::IntervalStats agg;
      double delay_sum = 0.0;
      double max_raw = -kInfinity;
      std::vector<double> raws(flows.size());
      std::vector<multiserver::FlowState> fs(flows.size());
      for (std::size_t i = 0; i < flows.size(); ++i) {
        Flow& f = flows[i];
        f.log.interval_end = t;
        const vsvb::AgeViolationParts parts = vsvb::age_violation_parts(f.log, f.avt);
        raws[i] = params.printed_alpha ? parts.total() : parts.exact();
        max_raw = std::max(max_raw, raws[i]);
        agg.chunks_received += static_cast<std::int64_t>(f.delays.size());
        agg.expected_chunks += vsvb::expected_chunks(sys.n, interval, f.ts);
        delay_sum += std::accumulate(f.delays.begin(), f.delays.end(), 0.0);
        agg.min_delay = std::min(agg.min_delay, f.min_delay);
        fs[i] = {static_cast<int>(i), f.sigma,
                 std::clamp(raws[i] / static_cast<double>(interval), 0.0, 1.0)};
      }
      agg.av_raw = max_raw;
      agg.mean_delay = agg.chunks_received == 0 ? kInfinity
                                                : delay_sum / static_cast<double>(agg.chunks_received);

      const int n_used = sys.n;
      const double total_old = sys.sigma;
      vsvb::Branch branch = vsvb::Branch::None;
      vsvb::Processed pr;
      if (!spec.fixed_sigma) {
        sys = vsvb::vsvb_update(sys, agg, &branch, &pr, params);
      } else {
        ++sys.mi;
        pr.av_ratio = std::clamp(agg.av_raw / static_cast<double>(interval), 0.0, 1.0);
        sys.av_ema = params.omega * pr.av_ratio + (1.0 - params.omega) * sys.av_ema;
        if (std::isfinite(agg.mean_delay)) {
          sys.delay_ema = params.psi * agg.mean_delay + (1.0 - params.psi) * sys.delay_ema;
        }
      }

      std::vector<double> rates(flows.size(), sys.sigma);
      if (flow_count > 1) {
        rates = multiserver::allocate_rates(fs, sys.sigma, total_old, sys.sigma_min / flow_count);
      }

      multiserver::SystemRecord srec;
      srec.mi = sys.mi;
      srec.end = t;
      srec.branch = static_cast<int>(branch);
      srec.sigma_total = sys.sigma;
      srec.n = sys.n;
      srec.av_ratio = pr.av_ratio;
      srec.fairness = multiserver::fairness_index(rates);
      srec.rates = rates;
      out.system.push_back(std::move(srec));

      for (std::size_t i = 0; i < flows.size(); ++i) {
        Flow& f = flows[i];
        const Slot ts_used = f.ts;
        f.sigma = rates[i];
        f.ts = vsvb::sampling_interval(sys.n, f.sigma);
        if (f.ts != ts_used) f.anchor = t;

        IntervalRecord rec;
        rec.mi = sys.mi;
        rec.start = start;
        rec.end = t;
        rec.branch = static_cast<int>(branch);
        rec.sigma = f.sigma;
        rec.n = sys.n;
        rec.ts = static_cast<double>(f.ts);
        rec.next_interval = sys.interval;
        rec.av_raw = raws[i];
        rec.av_ratio = fs[i].av;
        rec.av_ema = sys.av_ema;
        rec.mean_delay = vsvb::interval_mean_delay(f.delays);
        rec.delay_ema = sys.delay_ema;
        rec.pdr = std::min(1.0, vsvb::interval_pdr(static_cast<std::int64_t>(f.delays.size()), n_used,
                                                   interval, ts_used));
        rec.chunks_received = static_cast<std::int64_t>(f.delays.size());
        rec.ef = sys.ef;
        rec.df = sys.df;
        rec.min_rtt = sys.min_rtt;
        rec.violations_ge = f.violations_ge;
        rec.delay_sum = std::accumulate(f.delays.begin(), f.delays.end(), 0.0);
        f.result.intervals.push_back(rec);

        f.delays.clear();
        f.min_delay = kInfinity;
        f.violations_ge = 0;
        f.reset_log(t);
        if (t > horizon) f.store.forget_before(t - horizon);
      }
      start = t;
    }

    // Sender: one codeword per sampling interval. The starting flow rotates
    // so no flow is always first in the queue.
    for (std::size_t j = 0; j < flows.size(); ++j) {
      const std::size_t i = (j + static_cast<std::size_t>(t)) % flows.size();
      Flow& f = flows[i];
      if ((t - f.anchor) % f.ts != 0) continue;
      ++f.result.samples_generated;
      for (int c = 0; c < sys.n; ++c) {
        netsim::SimChunk chunk;
        chunk.flow = static_cast<std::uint32_t>(i);
        chunk.sample_id = static_cast<std::uint64_t>(t);
        chunk.index = c;
        chunk.gen_time = t;
        queue.inject(chunk, t);
      }
    }
    const std::size_t occ = queue.occupancy();
    for (Flow& f : flows) f.result.max_occupancy = std::max(f.result.max_occupancy, occ);
    queue.advance_slot(t);
  }

  if (start < cfg.duration) {
    for (Flow& f : flows) {
      IntervalRecord rec;
      rec.mi = sys.mi + 1;
      rec.start = start;
      rec.end = cfg.duration;
      rec.sigma = f.sigma;
      rec.n = sys.n;
      rec.ts = static_cast<double>(f.ts);
      rec.next_interval = sys.interval;
      f.log.interval_end = cfg.duration;
      rec.av_raw = vsvb::interval_age_violation_exact(f.log, f.avt);
      rec.mean_delay = vsvb::interval_mean_delay(f.delays);
      rec.chunks_received = static_cast<std::int64_t>(f.delays.size());
      rec.violations_ge = f.violations_ge;
      rec.delay_sum = std::accumulate(f.delays.begin(), f.delays.end(), 0.0);
      f.result.intervals.push_back(rec);
    }
  }

  for (Flow& f : flows) {
    f.result.counters = queue.counters();
    out.flows.push_back(std::move(f.result));
  }
  return out;
}

}  // namespace a3l::detail
