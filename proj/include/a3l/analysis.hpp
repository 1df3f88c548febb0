#pragma once

#include <iosfwd>
#include <vector>

#include "a3l/core.hpp"

namespace a3l::analysis {

/// Codeword rate above which the bottleneck queue is unstable:
/// q_s / (n (1 - p_in)).
double sigma_upper_bound(double q_s, int n, double p_in);

/// Probability that a chunk sent once per slot since generation is still
/// missing after `elapsed` slots: P_c^(elapsed + 1).
double chunk_loss_prob(const LossModel& loss, Slot elapsed);

/// P(at most n - k of n independent chunks lost), each lost with `p_lost`.
/// `printed_limit` sums up to n - k + 1 instead.
double decode_prob(int n, int k, double p_lost, bool printed_limit = false);

/// Decode probability of a sample generated `elapsed` slots ago on the
/// zero-queueing channel.
double sample_decode_prob(const CodingParams& coding, const LossModel& loss, Slot elapsed,
                          bool printed_limit = false);

/// Probability that the age at time t is exactly e: the sample aged e is
/// decodable and every fresher one is not.
double age_event_prob(Slot e, Slot t, const CodingParams& coding, const LossModel& loss,
                      bool printed_limit = false);

/// 1 - sum_{i=0}^{e} age_event_prob(i, t). e = -1 gives 1.
double outage_prob(Slot e, Slot t, const CodingParams& coding, const LossModel& loss,
                   bool printed_limit = false);

struct BoundsRow {
  Slot elapsed = 0;
  double chunk_loss = 0.0;
  double decode = 0.0;
  double age_event = 0.0;
  double outage = 0.0;
};

struct BoundsTable {
  double sigma_up = 0.0;
  Slot t = 0;
  std::vector<BoundsRow> rows;
};

BoundsTable bounds_table(double q_s, const CodingParams& coding, const LossModel& loss,
                         Slot max_elapsed, Slot t, bool printed_limit = false);

void write_bounds_csv(std::ostream& os, const BoundsTable& table);

}  // namespace a3l::analysis
