#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "a3l/core.hpp"
#include "a3l/netsim.hpp"
#include "a3l/sim_result.hpp"
#include "a3l/vsvb.hpp"

namespace a3l::multiserver {

struct FlowState {
  int id = 0;
  double sigma_old = 0.0;
  double av = 0.0;  // normalized age violation of the last interval
};

/// (sigma_old_i + av_i - mean av) * sigma_total / sigma_total_old, before any
/// floor. The deviations sum to zero, so the total scales exactly.
std::vector<double> raw_allocation(std::span<const FlowState> flows, double sigma_total,
                                   double sigma_total_old);

/// raw_allocation, then rates below `min_rate` are lifted to it and the
/// remaining flows are scaled down proportionally so the total is kept.
std::vector<double> allocate_rates(std::span<const FlowState> flows, double sigma_total,
                                   double sigma_total_old, double min_rate);

/// Jain's fairness index of the rates; 1 when all are equal.
double fairness_index(std::span<const double> rates);

struct SystemRecord {
  int mi = 0;
  Slot end = 0;
  int branch = 0;
  double sigma_total = 0.0;
  int n = 0;
  double av_ratio = 0.0;  // max over flows
  double fairness = 1.0;
  std::vector<double> rates;
};

struct Config {
  netsim::SimConfig base;
  int flows = 2;
  std::vector<Slot> avts;  // per flow; empty means base.avt for all
  vsvb::Params params{};
};

struct Result {
  std::vector<SimResult> flows;
  std::vector<SystemRecord> system;

  /// Mean allocated rate of each flow over the last `fraction` of intervals.
  std::vector<double> long_run_rates(double fraction = 0.5) const;
};

Result run_multiserver_sim(const Config& cfg);

void write_system_csv(std::ostream& os, const std::vector<SystemRecord>& rows);

}  // namespace a3l::multiserver
