#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

#include "a3l/multiserver.hpp"

using namespace a3l;
using namespace a3l::multiserver;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Config two_flows(std::uint64_t seed) {
  Config cfg;
  cfg.base.loss = {0.1, 0.1};
  cfg.base.coding = {3, 3, 64};
  cfg.base.duration = 50000;
  cfg.base.rng_seed = seed;
  cfg.flows = 2;
  return cfg;
}

}  // namespace

TEST_CASE("allocation examples") {
  const std::vector<FlowState> two{{0, 1.0, 0.2}, {1, 1.0, 0.0}};
  const auto r2 = raw_allocation(two, 2.0, 2.0);
  CHECK(r2[0] == doctest::Approx(1.1));
  CHECK(r2[1] == doctest::Approx(0.9));

  const std::vector<FlowState> three{{0, 1.0, 0.9}, {1, 1.0, 0.1}, {2, 1.0, 0.2}};
  const auto r3 = raw_allocation(three, 3.0, 3.0);
  CHECK(r3[0] == doctest::Approx(1.5));
  CHECK(r3[1] == doctest::Approx(0.7));
  CHECK(r3[2] == doctest::Approx(0.8));
  CHECK(sum(r3) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("equal violations scale all rates uniformly") {
  const std::vector<FlowState> flows{{0, 1.0, 0.3}, {1, 2.0, 0.3}, {2, 0.5, 0.3}};
  const auto r = raw_allocation(flows, 7.0, 3.5);
  CHECK(r[0] == doctest::Approx(2.0));
  CHECK(r[1] == doctest::Approx(4.0));
  CHECK(r[2] == doctest::Approx(1.0));
}

TEST_CASE("deviations sum to zero so the total scales exactly") {
  Rng rng(3, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int f = 1 + static_cast<int>(rng.next_u64() % 6);
    std::vector<FlowState> flows;
    double old_total = 0.0;
    for (int i = 0; i < f; ++i) {
      flows.push_back({i, 0.1 + 3.0 * rng.uniform(), rng.uniform()});
      old_total += flows.back().sigma_old;
    }
    const double total = 0.5 + 10.0 * rng.uniform();
    REQUIRE(sum(raw_allocation(flows, total, old_total)) == doctest::Approx(total).epsilon(1e-12));
    const double floor = 0.2 * total / f;
    const auto alloc = allocate_rates(flows, total, old_total, floor);
    REQUIRE(sum(alloc) == doctest::Approx(total).epsilon(1e-9));
    for (double x : alloc) REQUIRE(x >= floor - 1e-12);
  }
}

TEST_CASE("floor lifts starved flows and rescales the rest") {
  const std::vector<FlowState> three{{0, 1.0, 0.9}, {1, 1.0, 0.1}, {2, 1.0, 0.2}};
  const auto r = allocate_rates(three, 3.0, 3.0, 0.75);
  CHECK(r[1] == doctest::Approx(0.75));
  CHECK(r[0] / r[2] == doctest::Approx(1.5 / 0.8));
  CHECK(sum(r) == doctest::Approx(3.0));
  // Floor too high for everyone: equal split.
  const auto eq = allocate_rates(three, 3.0, 3.0, 1.2);
  for (double x : eq) CHECK(x == doctest::Approx(1.0));
}

TEST_CASE("allocation rejects degenerate input") {
  CHECK_THROWS_AS(raw_allocation(std::vector<FlowState>{}, 1.0, 1.0), ParameterError);
  const std::vector<FlowState> one{{0, 1.0, 0.0}};
  CHECK_THROWS_AS(raw_allocation(one, 1.0, 0.0), ParameterError);
  CHECK_THROWS_AS(raw_allocation(one, -1.0, 1.0), ParameterError);
}

TEST_CASE("Jain fairness index") {
  CHECK(fairness_index(std::vector<double>{2, 2, 2}) == doctest::Approx(1.0));
  CHECK(fairness_index(std::vector<double>{1, 0, 0, 0}) == doctest::Approx(0.25));
}

TEST_CASE("a single flow reproduces the single-sender simulation") {
  Config cfg = two_flows(4);
  cfg.flows = 1;
  cfg.base.duration = 20000;
  const auto multi = run_multiserver_sim(cfg);
  const auto single = vsvb::run_vsvb_sim(cfg.base);
  REQUIRE(multi.flows.size() == 1);
  CHECK(multi.flows[0].ages == single.ages);
  CHECK(multi.flows[0].intervals.size() == single.intervals.size());
}

TEST_CASE("identical flows converge to equal rates") {
  const auto r = run_multiserver_sim(two_flows(1));
  const auto rates = r.long_run_rates();
  REQUIRE(rates.size() == 2);
  CHECK(std::abs(rates[0] - rates[1]) / std::max(rates[0], rates[1]) <= 0.05);
  for (const auto& rec : r.system) CHECK(sum(rec.rates) == doctest::Approx(rec.sigma_total).epsilon(1e-9));
}

TEST_CASE("tighter threshold earns at least its share") {
  Config cfg = two_flows(2);
  cfg.avts = {3, 8};
  const auto rates = run_multiserver_sim(cfg).long_run_rates();
  CHECK(rates[0] >= rates[1]);
}

TEST_CASE("system CSV is versioned") {
  Config cfg = two_flows(1);
  cfg.base.duration = 2000;
  std::ostringstream os;
  write_system_csv(os, run_multiserver_sim(cfg).system);
  CHECK(os.str().rfind("# a3lfec-system/1", 0) == 0);
}
