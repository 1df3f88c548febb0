#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "a3l/fsfb.hpp"

using namespace a3l;
using namespace a3l::fsfb;

TEST_CASE("optimal probabilities fill freshest first") {
  const auto p = optimal_probs(2.5, 5, 8);
  REQUIRE(p.memory() == 8);
  const std::vector<double> expect{1, 1, 0.5, 0, 0, 0, 0, 0};
  for (int j = 0; j < 8; ++j) CHECK(p.probs[j] == doctest::Approx(expect[j]));

  const auto one = optimal_probs(1.0, 5, 5);
  CHECK(one.probs[0] == 1.0);
  CHECK(std::accumulate(one.probs.begin() + 1, one.probs.end(), 0.0) == 0.0);

  CHECK(optimal_probs(10.0, 5, 8).rate() == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(optimal_probs(10.0, 8, 3).rate() == doctest::Approx(3.0).epsilon(1e-9));
  CHECK_THROWS_AS(optimal_probs(0.0, 5, 5), ParameterError);
}

TEST_CASE("printed probability vector carries one extra unit") {
  const auto p = optimal_probs(2.5, 5, 8, true);
  CHECK(p.rate() == doctest::Approx(3.5));
}

TEST_CASE("chunk selection") {
  const CodingParams coding{3, 4};
  Rng rng(1, 3);
  SisPolicy freshest{{1, 0, 0}};
  for (Slot t = 5; t < 50; ++t) {
    const auto sel = select_chunks(freshest, t, coding, rng);
    REQUIRE(sel.size() == 4);
    for (const auto& s : sel) CHECK(s.gen_time == t);
  }
  SisPolicy none{{0, 0, 0}};
  CHECK(select_chunks(none, 10, coding, rng).empty());

  SisPolicy half{{1, 0.5, 0, 0}};
  const int slots = 100000;
  double total = 0;
  for (Slot t = 10; t < 10 + slots; ++t) total += static_cast<double>(select_chunks(half, t, coding, rng).size());
  CHECK(std::abs(total / slots - 6.0) <= 0.1);
}

TEST_CASE("selection skips samples not yet generated") {
  const CodingParams coding{2, 2};
  Rng rng(1, 3);
  SisPolicy all{{1, 1, 1}};
  CHECK(select_chunks(all, 1, coding, rng).size() == 2);
  CHECK(select_chunks(all, 2, coding, rng).size() == 4);
  CHECK(select_chunks(all, 5, coding, rng).size() == 6);
}

TEST_CASE("interval age violation counts age strictly above AVT") {
  CHECK(interval_av(std::vector<Slot>(100, 5), 5, 100) == 0.0);
  CHECK(interval_av(std::vector<Slot>(100, 6), 5, 100) == 1.0);
  std::vector<Slot> ages(100, 2);
  for (int i = 0; i < 17; ++i) ages[i * 5] = 9;
  CHECK(interval_av(ages, 5, 100) == doctest::Approx(0.17));
  CHECK_THROWS_AS(interval_av(ages, 5, 99), InputError);
}

TEST_CASE("mean delay") {
  CHECK(std::isinf(interval_mean_delay(std::vector<double>{})));
  CHECK(interval_mean_delay(std::vector<double>{2, 2, 2}) == 2.0);
  CHECK(interval_mean_delay(std::vector<double>{1, 2, 3, 4}) == 2.5);
}

TEST_CASE("initial rate is 2n clamped to AVT") {
  CHECK(initial_state({3, 4}, 5).rate == 5.0);
  CHECK(initial_state({1, 2}, 10).rate == 4.0);
}

TEST_CASE("rate controller examples") {
  SUBCASE("empty pipe boost") {
    FsfbState s{.rate = 2.0, .av_ema = 0.3, .delay_ema = 0.4, .ef = 2};
    CHECK(decide(s, {.av = 0.3, .mean_delay = 0.5}, 5, 4) == Branch::EmptyPipeBoost);
    CHECK(s.rate == doctest::Approx(3.0));
    CHECK(s.ef == 0);
  }
  SUBCASE("congestion backoff") {
    FsfbState s{.rate = 3.0, .av_ema = 0.95, .delay_ema = 5.0};
    CHECK(decide(s, {.av = 0.95, .mean_delay = 6.0}, 5, 4) == Branch::CongestionBackoff);
    CHECK(s.rate == doctest::Approx(2.1));
  }
  SUBCASE("improving with rising delay probes up") {
    FsfbState s{.rate = 1.0, .av_ema = 0.4, .delay_ema = 2.0, .ef = 1};
    CHECK(decide(s, {.av = 0.2, .mean_delay = 3.0}, 5, 4) == Branch::ImprovingProbe);
    CHECK(s.rate == doctest::Approx(1.1));
    CHECK(s.ef == 1);
  }
  SUBCASE("improving with falling delay drains") {
    FsfbState s{.rate = 1.0, .av_ema = 0.4, .delay_ema = 2.0, .ef = 1};
    CHECK(decide(s, {.av = 0.2, .mean_delay = 1.0}, 5, 4) == Branch::ImprovingDrain);
    CHECK(s.rate == doctest::Approx(0.8));
    CHECK(s.ef == 2);
  }
  SUBCASE("starved boost") {
    FsfbState s{.rate = 1.0, .av_ema = 0.95, .delay_ema = 2.0, .ef = 1};
    CHECK(decide(s, {.av = 1.0, .mean_delay = kInfinity}, 5, 4) == Branch::StarvedBoost);
    CHECK(s.rate == doctest::Approx(1.5));
  }
  SUBCASE("ties fall into the improving branch") {
    FsfbState s{.rate = 1.0, .av_ema = 0.4, .delay_ema = 2.0};
    CHECK(decide(s, {.av = 0.4, .mean_delay = 1.0}, 5, 4) == Branch::ImprovingDrain);
  }
}

TEST_CASE("process skips the delay EMA for empty intervals") {
  FsfbState s{.rate = 1.0, .av_ema = 0.5, .delay_ema = 3.0};
  process(s, {.av = 1.0, .mean_delay = kInfinity});
  CHECK(s.delay_ema == 3.0);
  CHECK(s.av_ema == doctest::Approx(0.9));
  process(s, {.av = 0.0, .mean_delay = 1.0});
  CHECK(s.delay_ema == doctest::Approx(0.8 + 0.6));
  CHECK(s.mi == 2);
}

TEST_CASE("freshest-always policy on a lossless channel holds the minimum age") {
  netsim::SimConfig cfg;
  cfg.loss = {0.0, 0.0};
  cfg.coding = {3, 4, 64};
  cfg.duration = 2000;
  Options opt;
  opt.fixed_rate = 1.0;
  const auto r = run_fsfb_sim(cfg, opt);
  for (std::size_t i = 10; i < r.ages.size(); ++i) REQUIRE(r.ages[i] == cfg.propagation_delay);
  CHECK(r.mean_av() < 0.01);
}

TEST_CASE("simulation is deterministic per seed") {
  netsim::SimConfig cfg;
  cfg.duration = 5000;
  const auto a = run_fsfb_sim(cfg);
  const auto b = run_fsfb_sim(cfg);
  CHECK(a.ages == b.ages);
  cfg.rng_seed = 2;
  CHECK(run_fsfb_sim(cfg).ages != a.ages);
}
