#pragma once

#include <optional>
#include <span>
#include <vector>

#include "a3l/core.hpp"
#include "a3l/netsim.hpp"
#include "a3l/sim_result.hpp"

namespace a3l::vsvb {

/// Generation and decode slots of the samples that advanced freshness during
/// an interval. Entry 0 is the freshest sample decoded before the interval
/// began.
struct DecodeLog {
  Slot interval_start = 0;  // ST; the interval covers slots (ST, end]
  std::vector<Slot> gen;
  std::vector<Slot> decode;
  std::optional<Slot> interval_end;  // when set, the trailing gap is counted too
};

struct AgeViolationParts {
  double alpha = 0.0;        // printed boundary term
  double alpha_exact = 0.0;  // violated slots of the first gap before ST, negated
  double gaps = 0.0;         // sum over decode gaps
  double tail = 0.0;         // after the last decode, up to interval_end
  double total() const { return alpha + gaps + tail; }
  double exact() const { return alpha_exact + gaps + tail; }
};

/// Violated time in slots. Slot t in (D_{i-1}, D_i] counts when
/// t - G_{i-1} > avt; alpha removes the part of the first gap that precedes
/// the interval. The printed alpha equals the exact correction whenever
/// D_1 - G_1 <= avt and removes too much otherwise.
AgeViolationParts age_violation_parts(const DecodeLog& log, Slot avt);
double interval_age_violation(const DecodeLog& log, Slot avt);

/// Same sum with the exact boundary correction; equals the slot-level count.
double interval_age_violation_exact(const DecodeLog& log, Slot avt);

double interval_mean_delay(std::span<const double> delays);

/// n * round(T~ / T_s): chunks a regular sender emits in one interval.
std::int64_t expected_chunks(int n, Slot interval_len, Slot ts);

/// C / expected_chunks; 0 when no chunks were expected.
double interval_pdr(std::int64_t chunks_received, int n, Slot interval_len, Slot ts);

/// round(avt * 100 / n), at least 1.
Slot monitoring_interval_length(Slot avt, int n);

/// round(n / sigma), at least 1.
Slot sampling_interval(int n, double sigma);

/// Long-run fraction of slots with age above avt when one codeword of n
/// chunks is sent every round(n / sigma) slots, each chunk lost independently
/// with `chunk_loss` and delivered after `delay` slots.
double predicted_violation(int n, int k, double chunk_loss, double delay, double sigma, Slot avt);

struct BlockLengthInput {
  double pdr = 0.0;
  double mean_delay = kInfinity;
  double sigma = 1.0;
  int k = 1;
  int current_n = 1;
  Slot avt = 1;
  std::optional<std::vector<int>> candidates;  // default {k, ..., 3k}
};

/// Candidate minimizing predicted_violation; ties go to the smaller n. Keeps
/// current_n when the interval carried no information (PDR 0 or no delay).
int select_block_length(const BlockLengthInput& in);

struct Params {
  double sigma_min = 0.99;
  std::optional<double> sigma_max;  // default round(4.4 k) / avt
  std::optional<double> rtt_init;  // simulations default to 2 * propagation delay
  double phi = 1.5;
  double psi = 0.8;
  double omega = 0.8;
  bool literal_good_cap = false;  // cap line as printed: 1.2 sigma / n
  bool adapt_block_length = true;
  bool printed_alpha = false;  // feed the controller the printed boundary term
  std::optional<std::vector<int>> candidates;
};

double default_sigma_max(int k, Slot avt);

enum class Branch : int {
  None = 0,
  Hold = 1,
  EmptyPipeRefill = 2,
  CongestionBackoff = 3,
  UnderloadBoost = 4,
  GoodProbe = 5,
  GoodNearMax = 6,
  GoodLossyIncrease = 7,
  GoodLossyDecrease = 8,
  BadCongested = 9,
  BadUndersampled = 10,
};

struct State {
  double sigma = 0.0;  // chunks per slot
  double sigma_min = 0.99;
  double sigma_max = 1.0;
  double sigma_last = 0.0;
  int k = 1;
  int n = 1;
  Slot ts = 1;
  Slot interval = 1;  // T~
  Slot avt = 1;
  int ef = 0;
  bool df = false;
  double min_rtt = 0.0;
  double av_ema = 0.0;
  double delay_ema = 0.0;
  int mi = 0;
  int flows = 1;  // sigma is shared by this many senders; n is predicted per sender
};

State initial_state(const CodingParams& coding, Slot avt, Slot initial_interval,
                    const Params& p = {});

/// What the receiver measured over one interval.
struct IntervalStats {
  double av_raw = 0.0;  // violated slots
  double mean_delay = kInfinity;
  double min_delay = kInfinity;
  std::int64_t chunks_received = 0;
  std::int64_t expected_chunks = 0;
};

/// Derived per-interval quantities after Process().
struct Processed {
  double av_ratio = 0.0;
  double pdr = 0.0;
};

/// EMAs, MinRTT, PDR and block-length selection. T_s and T~ are left for
/// finish().
Processed process(State& s, const IntervalStats& stats, const Params& p = {});

/// Applies exactly one rate branch, then clamps sigma and records sigma_last.
Branch decide(State& s, const IntervalStats& stats, const Processed& pr, const Params& p = {});

/// Recomputes T_s and T~ from the committed sigma and n.
void finish(State& s);

/// process, decide, finish.
State vsvb_update(State s, const IntervalStats& stats, Branch* branch = nullptr,
                  Processed* processed = nullptr, const Params& p = {});

struct Options {
  Params params{};
  std::optional<double> fixed_sigma;  // disables the controller and block-length selection
};

SimResult run_vsvb_sim(const netsim::SimConfig& cfg, const Options& opt = {});

/// Fixed-rate comparator: one codeword of cfg.coding.n chunks every
/// round(n / sigma) slots, no adaptation.
SimResult run_fixed_rate_sim(const netsim::SimConfig& cfg, double sigma);

}  // namespace a3l::vsvb
