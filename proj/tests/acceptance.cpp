// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "a3l/analysis.hpp"
#include "a3l/codec.hpp"
#include "a3l/experiment.hpp"
#include "a3l/fsfb.hpp"
#include "a3l/multiserver.hpp"
#include "a3l/netsim.hpp"
#include "a3l/transport.hpp"
#include "a3l/vsvb.hpp"
#include "oracles.hpp"

using namespace a3l;
namespace ex = a3l::experiment;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

nlohmann::json run_quiet(const ex::ExperimentSpec& spec) {
  std::ostringstream sink;
  return ex::run_experiment(spec, sink);
}

Outcome table1() {
  const auto t0 = std::chrono::steady_clock::now();
  auto n4 = ex::preset("table1-k3n4");
  auto n6 = ex::preset("table1-k3n6");
  n4.runs = n6.runs = 10;
  const double av4 = run_quiet(n4)["mean_av"]["mean"].get<double>();
  const double av6 = run_quiet(n6)["mean_av"]["mean"].get<double>();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_band = av4 >= 0.0005 && av4 <= 0.01;
  return {in_band && av4 < av6 && secs < 60.0,
          fmt("mean AV n=4 %.5f (band [0.0005, 0.01]), n=6 %.5f, ordering %s, %.1fs (limit 60s)", av4, av6,
              av4 < av6 ? "ok" : "wrong", secs)};
}

Outcome u_shape(const char* name) {
  const auto t0 = std::chrono::steady_clock::now();
  auto spec = ex::preset(name);
  spec.sweep_k = {3};
  spec.sweep_n_min = 3;
  spec.sweep_n_max = 9;
  const auto j = run_quiet(spec);
  std::vector<double> av;
  for (const auto& p : j["points"]) av.push_back(p["mean_av"]["mean"].get<double>());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto best = std::min_element(av.begin() + 1, av.end() - 1);
  const bool interior = *best < av.front() && *best < av.back();
  std::string curve;
  for (std::size_t i = 0; i < av.size(); ++i) curve += fmt("%s%d:%.4f", i ? " " : "", static_cast<int>(i) + 3, av[i]);
  return {av.size() == 7 && interior && secs < 300.0,
          fmt("AV by n [%s], interior min at n=%d %s, %.1fs (limit 300s)", curve.c_str(),
              static_cast<int>(best - av.begin()) + 3, interior ? "below both ends" : "not below both ends", secs)};
}

Outcome stability() {
  netsim::SimConfig cfg;
  cfg.coding = {3, 4, 64};
  cfg.loss = {0.1, 0.1};
  cfg.duration = 100000;
  const double up = analysis::sigma_upper_bound(cfg.q_s, cfg.coding.n, cfg.loss.p_in);
  const auto below = netsim::run_fixed_injection(cfg, 0.9 * up);
  const auto above = netsim::run_fixed_injection(cfg, 1.1 * up);
  const bool ok = below.max_occupancy < cfg.buffer_capacity / 2 && above.capacity_reached_at > 0;
  return {ok, fmt("sigma_up %.4f; 0.9x max occupancy %zu of %zu; 1.1x full at slot %lld", up, below.max_occupancy,
                  cfg.buffer_capacity, static_cast<long long>(above.capacity_reached_at))};
}

Outcome analytic_vs_mc() {
  const int trials = 100000;
  const int k = 3;
  Rng rng(404, 0);
  int bad = 0;
  double worst = 0.0;
  for (double pc : {0.05, 0.15, 0.3}) {
    for (int r : {0, 1, 2}) {
      const CodingParams coding{k, k + r};
      const LossModel loss{pc, 0.0};
      int decoded = 0;
      for (int i = 0; i < trials; ++i) decoded += oracle::draw_decode(rng, k + r, k, pc);
      const double p_dec = analysis::sample_decode_prob(coding, loss, 0);
      const double z_dec = std::abs(static_cast<double>(decoded) / trials - p_dec) / oracle::three_sigma(p_dec, trials);
      worst = std::max(worst, z_dec);
      bad += z_dec > 1.0;

      std::vector<int> beyond(3, 0);
      for (int i = 0; i < trials; ++i) {
        const Slot age = oracle::draw_channel_age(rng, k + r, k, pc, 4);
        for (Slot e = 0; e < 3; ++e) beyond[e] += age > e;
      }
      for (Slot e = 0; e < 3; ++e) {
        const double p = analysis::outage_prob(e, 50, coding, loss);
        const double z = std::abs(static_cast<double>(beyond[e]) / trials - p) / oracle::three_sigma(p, trials);
        worst = std::max(worst, z);
        bad += z > 1.0;
      }
    }
  }
  return {bad == 0, fmt("%d of 36 comparisons outside 3 sigma; worst |diff| = %.2f x 3 sigma", bad, worst)};
}

Outcome av_accounting() {
  Rng rng(505, 0);
  int mismatches = 0;
  int exact_cases = 0;
  for (int i = 0; i < 1000; ++i) {
    const Slot avt = 2 + static_cast<Slot>(rng.next_u64() % 8);
    const auto log = oracle::random_log(rng, avt, rng.next_u64() % 2 == 0);
    const auto truth = static_cast<double>(oracle::violated_slots(log, avt));
    const auto parts = vsvb::age_violation_parts(log, avt);
    const double printed = vsvb::interval_age_violation(log, avt);
    const bool within = std::abs(printed - truth) <= std::abs(parts.alpha);
    bool ok = within && vsvb::interval_age_violation_exact(log, avt) == truth;
    if (log.interval_start - log.gen[0] <= avt) {
      ++exact_cases;
      ok = ok && printed == truth;
    }
    mismatches += !ok;
  }
  return {mismatches == 0, fmt("%d of 1000 logs disagree with the slot walk (%d logs in the exact-match class)",
                               mismatches, exact_cases)};
}

Outcome codec() {
  Rng rng(606, 0);
  long checked = 0;
  long bad = 0;
  for (int n = 1; n <= 8; ++n) {
    for (int k = 1; k <= n; ++k) {
      const CodingParams coding{k, n, 37};
      const MdsCodec codec(coding);
      for (int trial = 0; trial < 100; ++trial) {
        Sample s{static_cast<std::uint64_t>(trial), 0, Bytes(coding.sample_bytes)};
        for (auto& b : s.payload) b = static_cast<std::uint8_t>(rng.next_u64());
        const auto chunks = codec.encode(s);
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
          if (std::popcount(mask) != k) continue;
          std::vector<Chunk> subset;
          for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) subset.push_back(chunks[i]);
          }
          ++checked;
          bad += codec.decode(subset) != s.payload;
        }
      }
    }
  }
  return {bad == 0, fmt("%ld of %ld subset decodes differ from the payload", bad, checked)};
}

Outcome branch_totality() {
  Rng rng(707, 0);
  const int tuples = 100000;
  int fsfb_bad = 0;
  int vsvb_bad = 0;
  for (int i = 0; i < tuples; ++i) {
    {
      const Slot avt = 2 + static_cast<Slot>(rng.next_u64() % 9);
      const int n = 3 + static_cast<int>(rng.next_u64() % 4);
      fsfb::FsfbState s;
      s.rate = oracle::pick(rng, {static_cast<double>(avt)}, 0.05, static_cast<double>(avt));
      s.av_ema = oracle::pick(rng, {0.0, 0.9, 1.0}, 0.0, 1.0);
      s.delay_ema = oracle::pick(rng, {0.0, 1.0, static_cast<double>(avt)}, 0.0, 15.0);
      s.ef = static_cast<int>(rng.next_u64() % 4);
      const double av = oracle::pick(rng, {0.0, 0.9, 1.0, s.av_ema}, 0.0, 1.0);
      const double w = oracle::pick(rng, {kInfinity, 1.0, static_cast<double>(avt), s.delay_ema}, 0.0, 15.0);
      const auto expect = oracle::fsfb_expect(s, av, w, avt, n);
      fsfb::FsfbState got = s;
      const auto b = fsfb::decide(got, {.av = av, .mean_delay = w}, avt, n);
      const bool ok = expect.hits == 1 && b == expect.branch && std::abs(got.rate - expect.rate) <= 1e-12 * std::max(1.0, expect.rate) &&
                      got.ef == expect.ef && got.rate <= static_cast<double>(avt) && got.rate > 0.0;
      fsfb_bad += !ok;
    }
    {
      vsvb::State s;
      s.k = 3;
      s.n = 3 + static_cast<int>(rng.next_u64() % 4);
      s.avt = 5;
      s.sigma_min = 0.99;
      s.sigma_max = oracle::pick(rng, {2.6}, 1.0, 8.0);
      s.sigma = oracle::pick(rng, {s.sigma_min, s.sigma_max, 0.75 * s.sigma_max}, 0.5, 9.0);
      s.sigma_last = oracle::pick(rng, {s.sigma}, 0.99, 8.0);
      s.av_ema = oracle::pick(rng, {0.0, 0.9, 1.0}, 0.0, 1.0);
      s.delay_ema = oracle::pick(rng, {0.0, 5.0}, 0.0, 12.0);
      s.ef = static_cast<int>(rng.next_u64() % 5);
      s.df = rng.next_u64() % 2 == 0;
      s.min_rtt = oracle::pick(rng, {1.0, 2.0}, 0.5, 4.0);
      const double av = oracle::pick(rng, {0.0, 0.9, 1.0, s.av_ema}, 0.0, 1.0);
      const double w = oracle::pick(rng, {kInfinity, 5.0, 2.0 * s.min_rtt, s.delay_ema}, 0.0, 12.0);
      const double pdr = oracle::pick(rng, {0.0, 0.9, 1.0}, 0.0, 1.0);
      const auto expect = oracle::vsvb_expect(s, av, w, pdr);
      vsvb::State got = s;
      const auto b = vsvb::decide(got, {.mean_delay = w}, {.av_ratio = av, .pdr = pdr});
      const bool ok = expect.hits == 1 && b == expect.branch &&
                      std::abs(got.sigma - expect.sigma) <= 1e-12 * std::max(1.0, expect.sigma) &&
                      got.ef == expect.ef && got.df == expect.df && got.sigma >= s.sigma_min &&
                      got.sigma <= s.sigma_max && got.sigma_last == got.sigma;
      vsvb_bad += !ok;
    }
  }
  return {fsfb_bad == 0 && vsvb_bad == 0,
          fmt("%d tuples each: %d Algorithm 1 and %d Algorithm 2 violations", tuples, fsfb_bad, vsvb_bad)};
}

Outcome wire_loopback() {
  const double shim_ms = 20.0;
  std::atomic<std::uint16_t> port{0};
  wire::ReceiverConfig rc;
  rc.listen = {"127.0.0.1", 0};
  rc.link.k = 3;
  rc.link.n_init = 5;
  rc.link.params.adapt_block_length = false;  // the criterion fixes n = 5; sigma still adapts
  rc.drop_shim = 0.05;
  rc.delay_shim_ms = shim_ms;
  rc.idle_timeout_ms = 500;
  rc.seed = 8;
  rc.bound_port = &port;
  wire::ReceiverLog rlog;
  std::thread receiver([&] { rlog = wire::run_receiver(rc); });
  while (port == 0) std::this_thread::yield();

  wire::SenderConfig sc;
  sc.dest = {"127.0.0.1", port};
  sc.link = rc.link;
  sc.samples = 1000;
  const wire::SenderLog slog = wire::run_sender(sc);
  receiver.join();

  const double ratio = static_cast<double>(rlog.samples_decoded) / static_cast<double>(slog.samples_sent);
  const double delay_err = std::abs(rlog.mean_delay_ms - shim_ms);
  // Each change must land within the monitoring interval in force when it arrived.
  int late = 0;
  int applied = 0;
  Slot interval = rc.link.initial_interval;
  for (const auto& c : slog.changes) {
    if (!c.fallback) {
      ++applied;
      late += c.applied_ms - c.received_ms > static_cast<double>(interval) * rc.link.slot_ms;
    }
    interval = vsvb::monitoring_interval_length(rc.link.avt, c.n);
  }
  const bool ok = slog.samples_sent == 1000 && ratio >= 0.99 && delay_err <= 2.0 && applied > 0 && late == 0;
  return {ok, fmt("decode ratio %.4f (min 0.99), mean delay %.2f ms vs shim %.1f ms, %d rate changes, %d late, %llu "
                  "fallbacks",
                  ratio, rlog.mean_delay_ms, shim_ms, applied, late,
                  static_cast<unsigned long long>(slog.fallbacks))};
}

Outcome multiserver_fairness() {
  const auto spec = ex::preset("multiserver-2");
  double worst = 0.0;
  for (int run = 0; run < spec.runs; ++run) {
    multiserver::Config cfg;
    cfg.base = spec.sim;
    cfg.base.rng_seed = spec.seed_base + static_cast<std::uint64_t>(run);
    cfg.flows = 2;
    cfg.params = spec.vsvb;
    const auto rates = multiserver::run_multiserver_sim(cfg).long_run_rates();
    worst = std::max(worst, std::abs(rates[0] - rates[1]) / (0.5 * (rates[0] + rates[1])));
  }

  Rng rng(909, 0);
  double worst_sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int f = 2 + static_cast<int>(rng.next_u64() % 6);
    std::vector<multiserver::FlowState> flows(f);
    double old_total = 0.0;
    for (int j = 0; j < f; ++j) {
      flows[j] = {j, 0.1 + 3.0 * rng.uniform(), rng.uniform()};
      old_total += flows[j].sigma_old;
    }
    const double total = 0.5 + 10.0 * rng.uniform();
    const auto raw = multiserver::raw_allocation(flows, total, old_total);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(raw.begin(), raw.end(), 0.0) - total) / total);
  }
  return {worst <= 0.05 && worst_sum <= 1e-12,
          fmt("largest long-run rate gap %.2f%% over %d seeds (limit 5%%); worst relative sum error %.1e", 100.0 * worst,
              spec.runs, worst_sum)};
}

Outcome vsvb_vs_baseline() {
  const double vsvb_av = run_quiet(ex::preset("vsvb-lossy"))["mean_av"]["mean"].get<double>();
  const auto base = run_quiet(ex::preset("baseline-lossy"));
  bool all = true;
  std::string detail = fmt("VSVB %.4f;", vsvb_av);
  for (const auto& r : base["rates"]) {
    const double av = r["mean_av"]["mean"].get<double>();
    all = all && vsvb_av < av;
    detail += fmt(" fixed %.1f: %.4f", r["rate"].get<double>(), av);
  }
  return {all, detail};
}

}  // namespace

int main() {
  report("1 table-I FSFB k=3 n=4", table1);
  report("2a coding-rate U-shape AVT=2", [] { return u_shape("sweep-avt2-p02"); });
  report("2b coding-rate U-shape AVT=5", [] { return u_shape("sweep-avt5-p02"); });
  report("3 stability bound", stability);
  report("4 analytic vs Monte-Carlo", analytic_vs_mc);
  report("5 AV accounting", av_accounting);
  report("6 codec subsets", codec);
  report("7 controller branch totality", branch_totality);
  report("8 wire loopback", wire_loopback);
  report("9 multiserver fairness", multiserver_fairness);
  report("baseline VSVB beats fixed rates", vsvb_vs_baseline);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
