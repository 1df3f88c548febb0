#include "a3l/sim_result.hpp"

#include "a3l/age.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace a3l {

namespace {

constexpr const char* kColumns =
    "mi,start,end,branch,sigma,n,ts,next_interval,av_raw,av_ratio,av_ema,mean_delay,delay_ema,"
    "pdr,chunks_received,ef,df,min_rtt,violations_ge,delay_sum";

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError("bad number '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError("bad integer '" + s + "'");
  return v;
}

}  // namespace

double SimResult::mean_av() const {
  if (ages.empty()) return 0.0;
  return age_violation_rate(std::span<const Slot>(ages), avt);
}

double SimResult::mean_delay() const {
  double sum = 0.0;
  std::int64_t count = 0;
  for (const auto& r : intervals) {
    sum += r.delay_sum;
    count += r.chunks_received;
  }
  return count == 0 ? kInfinity : sum / static_cast<double>(count);
}

double SimResult::mean_age() const {
  if (ages.empty()) return 0.0;
  const double total = std::accumulate(ages.begin(), ages.end(), 0.0);
  return total / static_cast<double>(ages.size());
}

void write_interval_csv(std::ostream& os, const std::vector<IntervalRecord>& rows) {
  os << "# " << kIntervalCsvSchema << '\n' << kColumns << '\n';
  for (const auto& r : rows) {
    os << r.mi << ',' << r.start << ',' << r.end << ',' << r.branch << ',' << fmt_double(r.sigma)
       << ',' << r.n << ',' << fmt_double(r.ts) << ',' << r.next_interval << ','
       << fmt_double(r.av_raw) << ',' << fmt_double(r.av_ratio) << ',' << fmt_double(r.av_ema)
       << ',' << fmt_double(r.mean_delay) << ',' << fmt_double(r.delay_ema) << ','
       << fmt_double(r.pdr) << ',' << r.chunks_received << ',' << r.ef << ',' << (r.df ? 1 : 0)
       << ',' << fmt_double(r.min_rtt) << ',' << r.violations_ge << ',' << fmt_double(r.delay_sum)
       << '\n';
  }
}

std::vector<IntervalRecord> read_interval_csv(std::istream& is) {
  std::vector<IntervalRecord> rows;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kColumns) throw InputError("unexpected CSV header at line " + std::to_string(line_no));
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 20) throw InputError("expected 20 columns at line " + std::to_string(line_no));
    IntervalRecord r;
    r.mi = static_cast<int>(parse_int(f[0]));
    r.start = parse_int(f[1]);
    r.end = parse_int(f[2]);
    r.branch = static_cast<int>(parse_int(f[3]));
    r.sigma = parse_double(f[4]);
    r.n = static_cast<int>(parse_int(f[5]));
    r.ts = parse_double(f[6]);
    r.next_interval = parse_int(f[7]);
    r.av_raw = parse_double(f[8]);
    r.av_ratio = parse_double(f[9]);
    r.av_ema = parse_double(f[10]);
    r.mean_delay = parse_double(f[11]);
    r.delay_ema = parse_double(f[12]);
    r.pdr = parse_double(f[13]);
    r.chunks_received = parse_int(f[14]);
    r.ef = static_cast<int>(parse_int(f[15]));
    r.df = parse_int(f[16]) != 0;
    r.min_rtt = parse_double(f[17]);
    r.violations_ge = parse_int(f[18]);
    r.delay_sum = parse_double(f[19]);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json run_summary_json(const SimResult& result) {
  const double delay = result.mean_delay();
  return {
      {"schema", kRunJsonSchema},
      {"slots", result.ages.size()},
      {"avt", result.avt},
      {"mean_av", result.mean_av()},
      {"mean_age", result.mean_age()},
      {"mean_delay", std::isinf(delay) ? nlohmann::json(nullptr) : nlohmann::json(delay)},
      {"intervals", result.intervals.size()},
      {"samples_generated", result.samples_generated},
      {"samples_decoded", result.samples_decoded},
      {"max_occupancy", result.max_occupancy},
      {"counters",
       {{"injected", result.counters.injected},
        {"lost_in", result.counters.lost_in},
        {"dropped_buffer", result.counters.dropped_buffer},
        {"lost_out", result.counters.lost_out},
        {"delivered", result.counters.delivered},
        {"in_flight", result.counters.in_flight()}}},
  };
}

}  // namespace a3l
