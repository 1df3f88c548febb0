#include "a3l/multiserver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "engine.hpp"

namespace a3l::multiserver {

std::vector<double> raw_allocation(std::span<const FlowState> flows, double sigma_total,
                                   double sigma_total_old) {
  if (flows.empty()) throw ParameterError("no flows to allocate");
  if (!(sigma_total_old > 0.0)) throw ParameterError("previous total rate must be positive");
  if (!(sigma_total >= 0.0)) throw ParameterError("total rate must be non-negative");
  if (std::all_of(flows.begin(), flows.end(), [](const FlowState& f) { return f.sigma_old == 0.0; })) {
    throw ParameterError("all previous flow rates are zero");
  }
  double av_sum = 0.0;
  for (const FlowState& f : flows) av_sum += f.av;
  const double av_mean = av_sum / static_cast<double>(flows.size());
  const double scale = sigma_total / sigma_total_old;
  std::vector<double> rates;
  rates.reserve(flows.size());
  for (const FlowState& f : flows) rates.push_back((f.sigma_old + (f.av - av_mean)) * scale);
  return rates;
}

std::vector<double> allocate_rates(std::span<const FlowState> flows, double sigma_total,
                                   double sigma_total_old, double min_rate) {
  std::vector<double> rates = raw_allocation(flows, sigma_total, sigma_total_old);
  const auto count = static_cast<double>(rates.size());
  if (min_rate * count >= sigma_total) {
    std::fill(rates.begin(), rates.end(), sigma_total / count);
    return rates;
  }
  std::vector<bool> pinned(rates.size(), false);
  for (bool changed = true; changed;) {
    changed = false;
    double free_sum = 0.0;
    double pinned_sum = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      if (!pinned[i] && rates[i] < min_rate) {
        pinned[i] = true;
        changed = true;
      }
      if (pinned[i]) {
        rates[i] = min_rate;
        pinned_sum += min_rate;
      } else {
        free_sum += rates[i];
      }
    }
    if (free_sum <= 0.0) break;
    const double scale = (sigma_total - pinned_sum) / free_sum;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      if (!pinned[i]) rates[i] *= scale;
    }
  }
  return rates;
}

double fairness_index(std::span<const double> rates) {
  if (rates.empty()) return 1.0;
  double sum = 0.0;
  double sq = 0.0;
  for (double r : rates) {
    sum += r;
    sq += r * r;
  }
  if (sq == 0.0) return 1.0;
  return sum * sum / (static_cast<double>(rates.size()) * sq);
}

std::vector<double> Result::long_run_rates(double fraction) const {
  std::vector<double> mean(flows.size(), 0.0);
  if (system.empty()) return mean;
  const auto skip = static_cast<std::size_t>(
      std::floor(static_cast<double>(system.size()) * (1.0 - std::clamp(fraction, 0.0, 1.0))));
  std::size_t used = 0;
  for (std::size_t j = std::min(skip, system.size() - 1); j < system.size(); ++j, ++used) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += system[j].rates[i];
  }
  for (double& m : mean) m /= static_cast<double>(used);
  return mean;
}

Result run_multiserver_sim(const Config& cfg) {
  if (cfg.flows < 1) throw ParameterError("flow count must be >= 1");
  std::vector<Slot> avts = cfg.avts;
  if (avts.empty()) avts.assign(cfg.flows, cfg.base.avt);
  if (static_cast<int>(avts.size()) != cfg.flows) {
    throw ParameterError("expected one age violation threshold per flow");
  }
  detail::EngineResult r = detail::run_engine({cfg.base, avts, cfg.params, std::nullopt});
  return {std::move(r.flows), std::move(r.system)};
}

void write_system_csv(std::ostream& os, const std::vector<SystemRecord>& rows) {
  const std::size_t flows = rows.empty() ? 0 : rows.front().rates.size();
  os << "# a3lfec-system/1\nmi,end,branch,sigma_total,n,av_ratio,fairness";
  for (std::size_t i = 0; i < flows; ++i) os << ",rate_" << i;
  os << '\n';
  for (const SystemRecord& r : rows) {
    os << r.mi << ',' << r.end << ',' << r.branch << ',' << r.sigma_total << ',' << r.n << ','
       << r.av_ratio << ',' << r.fairness;
    for (double x : r.rates) os << ',' << x;
    os << '\n';
  }
}

}  // namespace a3l::multiserver
