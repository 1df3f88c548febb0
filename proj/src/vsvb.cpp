#include "a3l/vsvb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "a3l/analysis.hpp"
#include "engine.hpp"

namespace a3l::vsvb {

namespace {

// Bracket notation: round half up.
Slot round_slots(double x) { return static_cast<Slot>(std::floor(x + 0.5)); }

double gap_violation(Slot beta, Slot gamma) {
  return static_cast<double>(std::min(beta - std::max<Slot>(0, std::min(beta, gamma)), beta));
}

}  // namespace

AgeViolationParts age_violation_parts(const DecodeLog& log, Slot avt) {
  if (log.gen.empty() || log.gen.size() != log.decode.size()) {
    throw InputError("decode log needs matching, non-empty generation and decode lists");
  }
  if (log.interval_end && *log.interval_end < log.interval_start) {
    throw InputError("decode log interval ends before it starts");
  }
  AgeViolationParts parts;
  // Nothing after D_1 is counted, so there is nothing to correct.
  if (log.gen.size() == 1 && !log.interval_end) return parts;
  const Slot lead = log.interval_start - log.gen.front();
  parts.alpha = -static_cast<double>(std::abs(std::min(lead, std::max<Slot>(lead - avt, 0))));
  const Slot first_violated = std::max(log.decode.front(), log.gen.front() + avt);
  parts.alpha_exact = -static_cast<double>(std::max<Slot>(0, log.interval_start - first_violated));
  for (std::size_t i = 1; i < log.gen.size(); ++i) {
    const Slot beta = log.decode[i] - log.decode[i - 1];
    const Slot gamma = avt - (log.decode[i - 1] - log.gen[i - 1]);
    parts.gaps += gap_violation(beta, gamma);
  }
  if (log.interval_end) {
    const Slot beta = *log.interval_end - log.decode.back();
    if (beta > 0) parts.tail = gap_violation(beta, avt - (log.decode.back() - log.gen.back()));
  }
  return parts;
}

double interval_age_violation(const DecodeLog& log, Slot avt) {
  return age_violation_parts(log, avt).total();
}

double interval_age_violation_exact(const DecodeLog& log, Slot avt) {
  return age_violation_parts(log, avt).exact();
}

double interval_mean_delay(std::span<const double> delays) {
  if (delays.empty()) return kInfinity;
  return std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(delays.size());
}

std::int64_t expected_chunks(int n, Slot interval_len, Slot ts) {
  if (ts < 1) throw ParameterError("sampling interval must be >= 1");
  return n * round_slots(static_cast<double>(interval_len) / static_cast<double>(ts));
}

double interval_pdr(std::int64_t chunks_received, int n, Slot interval_len, Slot ts) {
  const std::int64_t expected = expected_chunks(n, interval_len, ts);
  if (expected <= 0) return 0.0;
  return static_cast<double>(chunks_received) / static_cast<double>(expected);
}

Slot monitoring_interval_length(Slot avt, int n) {
  if (n < 1) throw ParameterError("n must be >= 1");
  return std::max<Slot>(1, round_slots(static_cast<double>(avt) * 100.0 / n));
}

Slot sampling_interval(int n, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("rate must be positive");
  return std::max<Slot>(1, round_slots(n / sigma));
}

double predicted_violation(int n, int k, double chunk_loss, double delay, double sigma, Slot avt) {
  const double q = analysis::decode_prob(n, k, std::clamp(chunk_loss, 0.0, 1.0));
  if (q <= 0.0) return 1.0;
  const auto ts = static_cast<double>(sampling_interval(n, sigma));
  // Decoded generations are ts * G apart with G geometric(q). A gap of L
  // slots holds max(0, L - c) violated slots, c = max(0, avt - delay), so only
  // gaps with G >= g0 contribute.
  const double c = std::max(0.0, static_cast<double>(avt) - delay);
  const double g0 = std::max(1.0, std::ceil(c / ts));
  const double tail = std::pow(1.0 - q, g0 - 1.0);
  const double violated = tail * (ts * (g0 - 1.0 + 1.0 / q) - c);
  return std::clamp(violated * q / ts, 0.0, 1.0);
}

int select_block_length(const BlockLengthInput& in) {
  std::vector<int> candidates;
  if (in.candidates) {
    candidates = *in.candidates;
  } else {
    for (int n = in.k; n <= std::min(3 * in.k, 255); ++n) candidates.push_back(n);
  }
  if (candidates.empty()) throw ParameterError("block-length candidate set is empty");
  for (int n : candidates) {
    if (n < in.k || n > 255) throw ParameterError("candidate n=" + std::to_string(n) + " out of range");
  }
  if (in.pdr <= 0.0 || !std::isfinite(in.mean_delay)) return in.current_n;

  const double loss = 1.0 - std::min(in.pdr, 1.0);
  int best = candidates.front();
  double best_av = kInfinity;
  std::sort(candidates.begin(), candidates.end());
  for (int n : candidates) {
    const double av = predicted_violation(n, in.k, loss, in.mean_delay, in.sigma, in.avt);
    if (av < best_av - 1e-12) {
      best_av = av;
      best = n;
    }
  }
  return best;
}

double default_sigma_max(int k, Slot avt) {
  if (avt < 1) throw ParameterError("age violation threshold must be >= 1");
  return static_cast<double>(round_slots(4.4 * k)) / static_cast<double>(avt);
}

State initial_state(const CodingParams& coding, Slot avt, Slot initial_interval, const Params& p) {
  coding.validate();
  if (initial_interval < 1) throw ParameterError("monitoring interval must be >= 1");
  const double rtt = p.rtt_init.value_or(2.0);
  if (!(rtt > 0.0)) throw ParameterError("initial RTT must be positive");
  State s;
  s.k = coding.k;
  s.n = coding.n;
  s.avt = avt;
  s.sigma_min = p.sigma_min;
  s.sigma_max = p.sigma_max.value_or(default_sigma_max(coding.k, avt));
  s.sigma = 2.0 * (s.n + 0.05 * s.n) / rtt;
  s.sigma_last = s.sigma;
  s.min_rtt = rtt;
  s.ts = sampling_interval(s.n, s.sigma);
  s.interval = initial_interval;
  return s;
}

Processed process(State& s, const IntervalStats& stats, const Params& p) {
  Processed pr;
  ++s.mi;
  if (std::isfinite(stats.mean_delay)) {
    s.delay_ema = p.psi * stats.mean_delay + (1.0 - p.psi) * s.delay_ema;
  }
  pr.av_ratio = std::clamp(stats.av_raw / static_cast<double>(s.interval), 0.0, 1.0);
  s.av_ema = p.omega * pr.av_ratio + (1.0 - p.omega) * s.av_ema;
  if (std::isfinite(stats.min_delay)) s.min_rtt = std::min(s.min_rtt, stats.min_delay);
  if (stats.expected_chunks > 0) {
    pr.pdr = std::min(1.0, static_cast<double>(stats.chunks_received) /
                               static_cast<double>(stats.expected_chunks));
  }
  if (p.adapt_block_length) {
    s.n = select_block_length({.pdr = pr.pdr,
                               .mean_delay = stats.mean_delay,
                               .sigma = s.sigma / std::max(1, s.flows),
                               .k = s.k,
                               .current_n = s.n,
                               .avt = s.avt,
                               .candidates = p.candidates});
  }
  return pr;
}

Branch decide(State& s, const IntervalStats& stats, const Processed& pr, const Params& p) {
  const double av = pr.av_ratio;
  const double w = stats.mean_delay;
  const double n = s.n;
  Branch b;

  if (av == 0.0) {
    s.sigma = s.sigma_last;
    b = Branch::Hold;
  } else if (std::isinf(w) && s.ef >= 2 && pr.pdr == 0.0) {
    s.sigma = 2.0 * (n + 0.05 * n) / s.min_rtt;
    s.ef = 0;
    s.df = false;
    b = Branch::EmptyPipeRefill;
  } else if (av >= 0.9 && s.av_ema >= 0.9 && w >= static_cast<double>(s.avt)) {
    s.sigma = s.sigma / p.phi + std::min(0.1, 1.0 / n);
    ++s.ef;
    s.df = true;
    b = Branch::CongestionBackoff;
  } else if (av >= 0.9 && w <= 2.0 * s.min_rtt && s.ef <= 2) {
    s.sigma *= p.phi;
    s.ef = 0;
    s.df = false;
    b = Branch::UnderloadBoost;
  } else if (av <= s.av_ema) {
    if (pr.pdr >= 0.9) {
      if (s.sigma < 0.75 * s.sigma_max) {
        s.sigma *= 1.0 + 1.0 / n;
        b = Branch::GoodProbe;
      } else {
        // An empty [sigma_min, sigma_max] range makes the step undefined; the
        // clamp below decides the rate then.
        const double span = s.sigma_max - s.sigma_min;
        if (span > 0.0) s.sigma += ((s.sigma_max - s.sigma) + s.sigma_min + 1.0) / span;
        b = Branch::GoodNearMax;
      }
      s.df = false;
    } else if (w >= s.delay_ema && !s.df) {
      const double cap = p.literal_good_cap ? 1.2 * s.sigma / n : 1.2 * s.sigma;
      s.sigma = std::min(s.sigma + (s.av_ema - av) / n, cap);
      s.ef = 0;
      b = Branch::GoodLossyIncrease;
    } else {
      s.sigma = std::max(s.sigma - (s.av_ema - av), 0.2 * s.sigma);
      ++s.ef;
      s.df = true;
      b = Branch::GoodLossyDecrease;
    }
  } else if (w > s.delay_ema) {
    s.sigma = std::max(s.sigma - (av - s.av_ema), 0.2 * s.sigma);
    s.df = true;
    s.ef = 0;
    b = Branch::BadCongested;
  } else {
    s.sigma = std::min(s.sigma + (av - s.av_ema), 1.2 * s.sigma);
    s.df = false;
    s.ef = 0;
    b = Branch::BadUndersampled;
  }

  s.sigma = std::max(std::min(s.sigma, s.sigma_max), s.sigma_min);
  s.sigma_last = s.sigma;
  return b;
}

void finish(State& s) {
  s.ts = sampling_interval(s.n, s.sigma);
  s.interval = monitoring_interval_length(s.avt, s.n);
}

State vsvb_update(State s, const IntervalStats& stats, Branch* branch, Processed* processed,
                  const Params& p) {
  const Processed pr = process(s, stats, p);
  const Branch b = decide(s, stats, pr, p);
  finish(s);
  if (branch != nullptr) *branch = b;
  if (processed != nullptr) *processed = pr;
  return s;
}

SimResult run_vsvb_sim(const netsim::SimConfig& cfg, const Options& opt) {
  detail::EngineSpec spec{cfg, {cfg.avt}, opt.params, opt.fixed_sigma};
  return std::move(detail::run_engine(spec).flows.front());
}

SimResult run_fixed_rate_sim(const netsim::SimConfig& cfg, double sigma) {
  Options opt;
  opt.fixed_sigma = sigma;
  opt.params.adapt_block_length = false;
  return run_vsvb_sim(cfg, opt);
}

}  // namespace a3l::vsvb
