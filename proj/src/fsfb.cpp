#include "a3l/fsfb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "a3l/age.hpp"

namespace a3l::fsfb {

double SisPolicy::rate() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

SisPolicy optimal_probs(double rate, Slot avt, int memory, bool paper_literal) {
  if (!(rate > 0.0)) throw ParameterError("transmission rate must be positive");
  if (memory < 1) throw ParameterError("sample memory must be >= 1");
  if (avt < 1) throw ParameterError("age violation threshold must be >= 1");

  SisPolicy policy;
  policy.probs.assign(memory, 0.0);
  const double capped = std::min(rate, static_cast<double>(avt));

  if (paper_literal) {
    const double whole = std::floor(capped);
    const auto last_full = static_cast<int>(whole);
    for (int j = 0; j < memory && j <= last_full; ++j) policy.probs[j] = 1.0;
    if (last_full + 1 < memory) policy.probs[last_full + 1] = capped - whole;
    return policy;
  }

  const double mass = std::min(capped, static_cast<double>(memory));
  const double whole = std::floor(mass);
  const auto full = static_cast<int>(whole);
  for (int j = 0; j < full; ++j) policy.probs[j] = 1.0;
  if (full < memory) policy.probs[full] = mass - whole;
  return policy;
}

std::vector<Selection> select_chunks(const SisPolicy& policy, Slot now, const CodingParams& coding,
                                     Rng& rng, Slot first_sample) {
  std::vector<Selection> out;
  for (int j = 0; j < policy.memory(); ++j) {
    const Slot gen = now - j;
    if (gen < first_sample) break;
    const double p = policy.probs[j];
    if (p <= 0.0) continue;
    for (int i = 0; i < coding.n; ++i) {
      if (rng.bernoulli(p)) out.push_back({gen, i});
    }
  }
  return out;
}

double interval_av(std::span<const Slot> ages, Slot avt, Slot interval_len) {
  if (interval_len < 1 || static_cast<Slot>(ages.size()) != interval_len) {
    throw InputError("interval trace has " + std::to_string(ages.size()) + " slots, expected " +
                     std::to_string(interval_len));
  }
  const auto violated = std::count_if(ages.begin(), ages.end(), [avt](Slot a) { return a > avt; });
  return static_cast<double>(violated) / static_cast<double>(interval_len);
}

double interval_mean_delay(std::span<const double> delays) {
  if (delays.empty()) return kInfinity;
  return std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(delays.size());
}

FsfbState initial_state(const CodingParams& coding, Slot avt) {
  FsfbState s;
  s.rate = std::min(2.0 * coding.n, static_cast<double>(avt));
  return s;
}

void process(FsfbState& state, const IntervalStats& stats, const Constants& c) {
  ++state.mi;
  if (std::isfinite(stats.mean_delay)) {
    state.delay_ema = c.psi * stats.mean_delay + (1.0 - c.psi) * state.delay_ema;
  }
  state.av_ema = c.omega * stats.av + (1.0 - c.omega) * state.av_ema;
}

Branch decide(FsfbState& s, const IntervalStats& stats, Slot avt, int n, const Constants& c) {
  const double w = stats.mean_delay;
  const double av = stats.av;
  Branch b;

  if (w < 1.0 && s.ef >= 2) {
    s.rate *= c.phi;
    s.ef = 0;
    b = Branch::EmptyPipeBoost;
  } else if (s.av_ema >= 0.9 && std::isinf(w) && s.ef < 2) {
    s.rate *= c.phi;
    b = Branch::StarvedBoost;
  } else if (av >= 0.9 && s.av_ema >= 0.9 && w > static_cast<double>(avt)) {
    s.rate = s.rate / c.phi + std::min(0.1, 1.0 / n);
    b = Branch::CongestionBackoff;
  } else if (av <= s.av_ema) {
    if (w > s.delay_ema) {
      s.rate = std::min(s.rate + (s.av_ema - av), 1.1 * s.rate);
      b = Branch::ImprovingProbe;
    } else {
      s.rate = std::max(s.rate - (s.av_ema - av), 0.2 * s.rate);
      ++s.ef;
      b = Branch::ImprovingDrain;
    }
  } else {
    if (w > s.delay_ema) {
      s.rate = std::max(s.rate - (av - s.av_ema), 0.2 * s.rate);
      b = Branch::WorseningBackoff;
    } else {
      s.rate = std::min(s.rate + (av - s.av_ema), 1.1 * s.rate);
      b = Branch::WorseningBoost;
    }
  }
  s.rate = std::min(s.rate, static_cast<double>(avt));
  return b;
}

FsfbState fsfb_update(FsfbState state, const IntervalStats& stats, Slot avt, int n, Branch* branch,
                      const Constants& c) {
  process(state, stats, c);
  const Branch b = decide(state, stats, avt, n, c);
  if (branch != nullptr) *branch = b;
  return state;
}

SimResult run_fsfb_sim(const netsim::SimConfig& cfg, const Options& opt) {
  cfg.validate();
  const int memory = opt.memory.value_or(static_cast<int>(cfg.avt));
  const Slot interval = cfg.monitoring_interval;

  netsim::Bottleneck queue(cfg);
  Rng selection_rng(cfg.rng_seed, netsim::kStreamSelection);
  AgeTracker tracker(cfg.avt, cfg.effective_initial_age(), 0);
  tracker.set_recording(false);
  ReceiverChunkStore store(cfg.coding.k);

  FsfbState state = initial_state(cfg.coding, cfg.avt);
  if (opt.fixed_rate) state.rate = *opt.fixed_rate;
  SisPolicy policy = optimal_probs(state.rate, cfg.avt, memory, opt.paper_literal_probs);

  SimResult result;
  result.avt = cfg.avt;
  result.ages.reserve(static_cast<std::size_t>(cfg.duration));

  std::vector<double> delays;
  std::vector<Slot> decoded_gens;
  std::int64_t violations_ge = 0;

  for (Slot t = 1; t <= cfg.duration; ++t) {
    decoded_gens.clear();
    for (const netsim::SimChunk& c : queue.deliveries_at(t)) {
      delays.push_back(static_cast<double>(c.delay() - cfg.propagation_delay));
      if (store.add(c.sample_id, c.index, c.gen_time) == ReceiverChunkStore::Outcome::Decoded) {
        decoded_gens.push_back(c.gen_time);
        ++result.samples_decoded;
      }
    }
    const Slot age = tracker.step(t, decoded_gens);
    result.ages.push_back(age);
    if (age >= cfg.avt) ++violations_ge;

    if (t % interval == 0) {
      IntervalStats stats;
      stats.av = interval_av(std::span<const Slot>(result.ages).last(interval), cfg.avt, interval);
      stats.mean_delay = interval_mean_delay(delays);

      Branch branch = Branch::None;
      if (!opt.fixed_rate) {
        state = fsfb_update(state, stats, cfg.avt, cfg.coding.n, &branch, opt.constants);
        policy = optimal_probs(state.rate, cfg.avt, memory, opt.paper_literal_probs);
      } else {
        process(state, stats, opt.constants);
      }

      IntervalRecord rec;
      rec.mi = static_cast<int>(t / interval);
      rec.start = t - interval;
      rec.end = t;
      rec.branch = static_cast<int>(branch);
      rec.sigma = state.rate;
      rec.n = cfg.coding.n;
      rec.ts = 1.0;
      rec.next_interval = interval;
      rec.av_raw = stats.av;
      rec.av_ratio = stats.av;
      rec.av_ema = state.av_ema;
      rec.mean_delay = stats.mean_delay;
      rec.delay_ema = state.delay_ema;
      rec.chunks_received = static_cast<std::int64_t>(delays.size());
      rec.ef = state.ef;
      rec.violations_ge = violations_ge;
      rec.delay_sum = std::accumulate(delays.begin(), delays.end(), 0.0);
      result.intervals.push_back(rec);

      delays.clear();
      violations_ge = 0;
    }

    for (const Selection& s : select_chunks(policy, t, cfg.coding, selection_rng)) {
      netsim::SimChunk chunk;
      chunk.sample_id = static_cast<std::uint64_t>(s.gen_time);
      chunk.index = s.chunk_index;
      chunk.gen_time = s.gen_time;
      queue.inject(chunk, t);
    }
    result.max_occupancy = std::max(result.max_occupancy, queue.occupancy());
    queue.advance_slot(t);
    ++result.samples_generated;
  }

  // Trailing partial interval, recorded without a controller step.
  const Slot tail = cfg.duration % interval;
  if (tail != 0) {
    IntervalRecord rec;
    rec.mi = static_cast<int>(cfg.duration / interval) + 1;
    rec.start = cfg.duration - tail;
    rec.end = cfg.duration;
    rec.sigma = state.rate;
    rec.n = cfg.coding.n;
    rec.ts = 1.0;
    rec.next_interval = interval;
    rec.mean_delay = interval_mean_delay(delays);
    rec.chunks_received = static_cast<std::int64_t>(delays.size());
    rec.violations_ge = violations_ge;
    rec.delay_sum = std::accumulate(delays.begin(), delays.end(), 0.0);
    result.intervals.push_back(rec);
  }
  result.counters = queue.counters();
  return result;
}

}  // namespace a3l::fsfb
