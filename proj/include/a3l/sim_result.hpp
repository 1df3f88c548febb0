#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "a3l/core.hpp"
#include "a3l/netsim.hpp"

namespace a3l {

inline constexpr const char* kIntervalCsvSchema = "a3lfec-intervals/1";
inline constexpr const char* kRunJsonSchema = "a3lfec-run/1";

/// One row per monitoring interval. FSFB runs leave the VSVB-only columns
/// (pdr, df, min_rtt) at their defaults.
struct IntervalRecord {
  int mi = 0;
  Slot start = 0;  // interval covers slots (start, end]
  Slot end = 0;
  int branch = 0;
  double sigma = 0.0;  // rate chosen for the next interval
  int n = 0;           // block length for the next interval
  double ts = 0.0;     // sampling interval for the next interval (VSVB)
  Slot next_interval = 0;
  double av_raw = 0.0;    // violated slots (VSVB accounting) or violated-slot fraction (FSFB)
  double av_ratio = 0.0;  // value the controller consumed
  double av_ema = 0.0;
  double mean_delay = kInfinity;
  double delay_ema = 0.0;
  double pdr = 0.0;
  std::int64_t chunks_received = 0;
  int ef = 0;
  bool df = false;
  double min_rtt = 0.0;
  std::int64_t violations_ge = 0;  // slots with age >= AVT (global metric)
  double delay_sum = 0.0;          // sum of chunk delays received in the interval
};

struct SimResult {
  std::vector<Slot> ages;  // ages[t - 1] is the age at slot t
  std::vector<IntervalRecord> intervals;
  netsim::Counters counters;
  std::size_t max_occupancy = 0;
  std::uint64_t samples_generated = 0;
  std::uint64_t samples_decoded = 0;
  Slot avt = 0;

  double mean_av() const;     // fraction of slots with age >= AVT
  double mean_delay() const;  // over every delivered chunk; infinity if none
  double mean_age() const;
};

void write_interval_csv(std::ostream& os, const std::vector<IntervalRecord>& rows);
std::vector<IntervalRecord> read_interval_csv(std::istream& is);

nlohmann::json run_summary_json(const SimResult& result);

}  // namespace a3l
