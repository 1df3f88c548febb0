#pragma once

#include <optional>
#include <span>
#include <vector>

#include "a3l/core.hpp"
#include "a3l/netsim.hpp"
#include "a3l/sim_result.hpp"

namespace a3l::fsfb {

/// Stationary independent selection: at slot t, each chunk of the sample
/// generated at t - j is sent independently with probability probs[j].
struct SisPolicy {
  std::vector<double> probs;  // size m

  int memory() const { return static_cast<int>(probs.size()); }
  double rate() const;  // sum of probs, expected codewords per slot
};

/// Freshest-first policy with total mass min(rate, avt, m).
///
/// With `paper_literal` the printed piecewise form is used instead: ones up to
/// and including index floor(rate), the fractional part at floor(rate) + 1.
/// That vector carries one extra unit of mass and is kept for comparison only.
SisPolicy optimal_probs(double rate, Slot avt, int memory, bool paper_literal = false);

struct Selection {
  Slot gen_time = 0;
  int chunk_index = 0;
};

/// Draws the chunk set for slot `now`. Samples are generated one per slot
/// starting at slot `first_sample`; older slots have nothing to send.
std::vector<Selection> select_chunks(const SisPolicy& policy, Slot now, const CodingParams& coding,
                                     Rng& rng, Slot first_sample = 1);

/// Fraction of the interval's slots with age strictly above avt.
double interval_av(std::span<const Slot> ages, Slot avt, Slot interval_len);

/// Mean of the delays; infinity when there are none.
double interval_mean_delay(std::span<const double> delays);

struct IntervalStats {
  double av = 0.0;                // AV_MI
  double mean_delay = kInfinity;  // W_MI
};

enum class Branch : int {
  None = 0,
  EmptyPipeBoost = 1,      // W < 1 and EF >= 2
  StarvedBoost = 2,        // AV_ema >= 0.9, W = inf, EF < 2
  CongestionBackoff = 3,   // AV, AV_ema >= 0.9 and W > AVT
  ImprovingProbe = 4,      // AV <= AV_ema, W rising
  ImprovingDrain = 5,      // AV <= AV_ema, W falling
  WorseningBackoff = 6,    // AV > AV_ema, W rising
  WorseningBoost = 7,      // AV > AV_ema, W falling
};

struct Constants {
  double phi = 1.5;
  double psi = 0.8;    // delay EMA weight
  double omega = 0.8;  // age-violation EMA weight
};

struct FsfbState {
  double rate = 0.0;  // codewords per slot
  double av_ema = 0.0;
  double delay_ema = 0.0;
  int mi = 0;
  int ef = 0;
};

/// Initial state: rate 2n clamped to avt.
FsfbState initial_state(const CodingParams& coding, Slot avt);

/// Folds the interval into the EMAs. An infinite delay leaves the delay EMA
/// unchanged.
void process(FsfbState& state, const IntervalStats& stats, const Constants& c = {});

/// Applies exactly one rate branch to a state whose EMAs already include
/// `stats`, then clamps the rate to avt.
Branch decide(FsfbState& state, const IntervalStats& stats, Slot avt, int n,
              const Constants& c = {});

/// process() then decide(); returns the new state.
FsfbState fsfb_update(FsfbState state, const IntervalStats& stats, Slot avt, int n,
                      Branch* branch = nullptr, const Constants& c = {});

struct Options {
  std::optional<int> memory;        // defaults to avt
  bool paper_literal_probs = false;
  std::optional<double> fixed_rate;  // disables the controller
  Constants constants{};
};

SimResult run_fsfb_sim(const netsim::SimConfig& cfg, const Options& opt = {});

}  // namespace a3l::fsfb
