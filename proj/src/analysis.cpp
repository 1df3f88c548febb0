#include "a3l/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace a3l::analysis {

namespace {

double log_choose(int n, int i) {
  return std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError(std::string(what) + " must be in [0, 1]");
}

// 1 - decode_prob, summed directly so tiny failure probabilities keep their digits.
double decode_fail_prob(int n, int k, double p_lost, bool printed_limit) {
  const int limit = std::min(n, n - k + (printed_limit ? 1 : 0));
  if (p_lost == 0.0) return 0.0;
  if (p_lost == 1.0) return limit >= n ? 0.0 : 1.0;
  const double lp = std::log(p_lost);
  const double lq = std::log1p(-p_lost);
  double sum = 0.0;
  for (int i = limit + 1; i <= n; ++i) sum += std::exp(log_choose(n, i) + i * lp + (n - i) * lq);
  return std::min(sum, 1.0);
}

double sample_fail_prob(const CodingParams& coding, const LossModel& loss, Slot elapsed,
                        bool printed_limit) {
  return decode_fail_prob(coding.n, coding.k, chunk_loss_prob(loss, elapsed), printed_limit);
}

}  // namespace

double sigma_upper_bound(double q_s, int n, double p_in) {
  if (!(q_s > 0.0)) throw ParameterError("q_s must be positive");
  if (n < 1) throw ParameterError("n must be >= 1");
  check_probability(p_in, "p_in");
  if (p_in >= 1.0) throw ParameterError("p_in = 1 leaves the rate bound undefined");
  return q_s / (n * (1.0 - p_in));
}

double chunk_loss_prob(const LossModel& loss, Slot elapsed) {
  loss.validate();
  if (elapsed < 0) throw ParameterError("elapsed time must be non-negative");
  return std::pow(total_loss_probability(loss), static_cast<double>(elapsed + 1));
}

double decode_prob(int n, int k, double p_lost, bool printed_limit) {
  CodingParams{k, n}.validate();
  check_probability(p_lost, "chunk loss probability");
  const int limit = std::min(n, n - k + (printed_limit ? 1 : 0));
  if (p_lost == 0.0) return 1.0;
  if (p_lost == 1.0) return limit >= n ? 1.0 : 0.0;
  const double lp = std::log(p_lost);
  const double lq = std::log1p(-p_lost);
  double sum = 0.0;
  for (int i = 0; i <= limit; ++i) sum += std::exp(log_choose(n, i) + i * lp + (n - i) * lq);
  return std::min(sum, 1.0);
}

double sample_decode_prob(const CodingParams& coding, const LossModel& loss, Slot elapsed,
                          bool printed_limit) {
  return decode_prob(coding.n, coding.k, chunk_loss_prob(loss, elapsed), printed_limit);
}

double age_event_prob(Slot e, Slot t, const CodingParams& coding, const LossModel& loss,
                      bool printed_limit) {
  if (e < 0 || e > t) throw ParameterError("age must satisfy 0 <= e <= t");
  double none_fresher = 1.0;
  for (Slot a = 0; a < e; ++a) none_fresher *= sample_fail_prob(coding, loss, a, printed_limit);
  return sample_decode_prob(coding, loss, e, printed_limit) * none_fresher;
}

double outage_prob(Slot e, Slot t, const CodingParams& coding, const LossModel& loss,
                   bool printed_limit) {
  if (e < -1 || e > t) throw ParameterError("age must satisfy -1 <= e <= t");
  // 1 - sum of the age events telescopes to the probability that no sample
  // of age <= e decodes.
  coding.validate();
  double none_fresher = 1.0;
  for (Slot a = 0; a <= e; ++a) none_fresher *= sample_fail_prob(coding, loss, a, printed_limit);
  return none_fresher;
}

BoundsTable bounds_table(double q_s, const CodingParams& coding, const LossModel& loss,
                         Slot max_elapsed, Slot t, bool printed_limit) {
  if (max_elapsed < 0 || max_elapsed > t) throw ParameterError("need 0 <= max_elapsed <= t");
  BoundsTable table;
  table.sigma_up = sigma_upper_bound(q_s, coding.n, loss.p_in);
  table.t = t;
  double none_fresher = 1.0;
  for (Slot e = 0; e <= max_elapsed; ++e) {
    BoundsRow row;
    row.elapsed = e;
    row.chunk_loss = chunk_loss_prob(loss, e);
    row.decode = decode_prob(coding.n, coding.k, row.chunk_loss, printed_limit);
    row.age_event = row.decode * none_fresher;
    none_fresher *= decode_fail_prob(coding.n, coding.k, row.chunk_loss, printed_limit);
    row.outage = none_fresher;
    table.rows.push_back(row);
  }
  return table;
}

void write_bounds_csv(std::ostream& os, const BoundsTable& table) {
  os << "# a3lfec-bounds/1 sigma_up=" << table.sigma_up << " t=" << table.t << '\n';
  os << "elapsed,chunk_loss,decode_prob,age_event_prob,outage_prob\n";
  for (const auto& r : table.rows) {
    os << r.elapsed << ',' << r.chunk_loss << ',' << r.decode << ',' << r.age_event << ','
       << r.outage << '\n';
  }
}

}  // namespace a3l::analysis
