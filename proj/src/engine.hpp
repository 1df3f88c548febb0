#pragma once

#include <optional>
#include <vector>

#include "a3l/multiserver.hpp"
#include "a3l/netsim.hpp"
#include "a3l/sim_result.hpp"
#include "a3l/vsvb.hpp"

namespace a3l::detail {

/// Generate-at-will flows sharing one bottleneck. A single VSVB controller
/// sets the total rate from flow-aggregate statistics; the total is split
/// across flows by the multiserver allocation. With one flow this is the
/// plain VSVB simulation.
struct EngineSpec {
  netsim::SimConfig cfg;
  std::vector<Slot> avts;  // one per flow
  vsvb::Params params;
  std::optional<double> fixed_sigma;  // total rate; disables control
};

struct EngineResult {
  std::vector<SimResult> flows;
  std::vector<multiserver::SystemRecord> system;
};

EngineResult run_engine(const EngineSpec& spec);

}  // namespace a3l::detail
