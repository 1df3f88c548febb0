#include "a3l/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "a3l/analysis.hpp"
#include "a3l/fsfb.hpp"
#include "a3l/multiserver.hpp"
#include "a3l/sim_result.hpp"

namespace a3l::experiment {

namespace {

constexpr const char* kAggregateSchema = "a3lfec-aggregate/1";

const std::map<std::string, Mode>& mode_table() {
  static const std::map<std::string, Mode> table{
      {"fsfb-sim", Mode::FsfbSim},         {"vsvb-sim", Mode::VsvbSim},
      {"sweep-coding", Mode::SweepCoding}, {"bounds", Mode::Bounds},
      {"multiserver", Mode::Multiserver},  {"wire-send", Mode::WireSend},
      {"wire-recv", Mode::WireRecv},       {"baseline-fixed", Mode::BaselineFixed},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  if constexpr (std::is_floating_point_v<T>) {
    if (v == "inf") return std::numeric_limits<T>::infinity();
  }
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw ConfigError("bad value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean '" + v + "' for " + key);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

using Setter = std::function<void(ExperimentSpec&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"mode", [](auto& s, auto&, auto& v) { s.mode = parse_mode(v); }},
      {"q_s", [](auto& s, auto& k, auto& v) { s.sim.q_s = parse_number<double>(k, v); s.sweep_scale_q_s = false; }},
      {"buffer", [](auto& s, auto& k, auto& v) { s.sim.buffer_capacity = parse_number<std::size_t>(k, v); }},
      {"p_in", [](auto& s, auto& k, auto& v) { s.sim.loss.p_in = parse_number<double>(k, v); }},
      {"p_out", [](auto& s, auto& k, auto& v) { s.sim.loss.p_out = parse_number<double>(k, v); }},
      {"propagation_delay", [](auto& s, auto& k, auto& v) { s.sim.propagation_delay = parse_number<Slot>(k, v); }},
      {"duration", [](auto& s, auto& k, auto& v) { s.sim.duration = parse_number<Slot>(k, v); }},
      {"monitoring_interval", [](auto& s, auto& k, auto& v) { s.sim.monitoring_interval = parse_number<Slot>(k, v); }},
      {"seed", [](auto& s, auto& k, auto& v) { s.seed_base = parse_number<std::uint64_t>(k, v); }},
      {"runs", [](auto& s, auto& k, auto& v) { s.runs = parse_number<int>(k, v); }},
      {"jobs", [](auto& s, auto& k, auto& v) { s.jobs = parse_number<int>(k, v); }},
      {"k", [](auto& s, auto& k, auto& v) { s.sim.coding.k = parse_number<int>(k, v); }},
      {"n", [](auto& s, auto& k, auto& v) { s.sim.coding.n = parse_number<int>(k, v); }},
      {"sample_bytes", [](auto& s, auto& k, auto& v) { s.sim.coding.sample_bytes = parse_number<std::size_t>(k, v); }},
      {"avt", [](auto& s, auto& k, auto& v) { s.sim.avt = parse_number<Slot>(k, v); }},
      {"initial_age", [](auto& s, auto& k, auto& v) { s.sim.initial_age = parse_number<Slot>(k, v); }},
      {"out_dir", [](auto& s, auto&, auto& v) { s.out_dir = v; }},
      {"fsfb.memory", [](auto& s, auto& k, auto& v) { s.fsfb_memory = parse_number<int>(k, v); }},
      {"fsfb.paper_literal_probs", [](auto& s, auto& k, auto& v) { s.fsfb_paper_literal_probs = parse_bool(k, v); }},
      {"vsvb.sigma_min", [](auto& s, auto& k, auto& v) { s.vsvb.sigma_min = parse_number<double>(k, v); }},
      {"vsvb.sigma_max", [](auto& s, auto& k, auto& v) { s.vsvb.sigma_max = parse_number<double>(k, v); }},
      {"vsvb.rtt_init", [](auto& s, auto& k, auto& v) { s.vsvb.rtt_init = parse_number<double>(k, v); }},
      {"vsvb.literal_good_cap", [](auto& s, auto& k, auto& v) { s.vsvb.literal_good_cap = parse_bool(k, v); }},
      {"vsvb.adapt_n", [](auto& s, auto& k, auto& v) { s.vsvb.adapt_block_length = parse_bool(k, v); }},
      {"vsvb.printed_alpha", [](auto& s, auto& k, auto& v) { s.vsvb.printed_alpha = parse_bool(k, v); }},
      {"vsvb.candidates", [](auto& s, auto& k, auto& v) { s.vsvb.candidates = parse_list<int>(k, v); }},
      {"sweep.k", [](auto& s, auto& k, auto& v) { s.sweep_k = parse_list<int>(k, v); }},
      {"sweep.n_min", [](auto& s, auto& k, auto& v) { s.sweep_n_min = parse_number<int>(k, v); }},
      {"sweep.n_max", [](auto& s, auto& k, auto& v) { s.sweep_n_max = parse_number<int>(k, v); }},
      {"sweep.avt", [](auto& s, auto& k, auto& v) { s.sweep_avt = parse_list<Slot>(k, v); }},
      {"sweep.algorithm", [](auto& s, auto&, auto& v) { s.sweep_algorithm = parse_mode(v); }},
      {"baseline.rates", [](auto& s, auto& k, auto& v) { s.baseline_rates = parse_list<double>(k, v); }},
      {"multiserver.flows", [](auto& s, auto& k, auto& v) { s.flows = parse_number<int>(k, v); }},
      {"multiserver.avts", [](auto& s, auto& k, auto& v) { s.flow_avts = parse_list<Slot>(k, v); }},
      {"bounds.max_elapsed", [](auto& s, auto& k, auto& v) { s.bounds_max_elapsed = parse_number<Slot>(k, v); }},
      {"bounds.t", [](auto& s, auto& k, auto& v) { s.bounds_t = parse_number<Slot>(k, v); }},
      {"bounds.printed_limit", [](auto& s, auto& k, auto& v) { s.bounds_printed_limit = parse_bool(k, v); }},
      {"wire.listen", [](auto& s, auto&, auto& v) { s.listen = wire::Endpoint::parse(v); }},
      {"wire.dest", [](auto& s, auto&, auto& v) { s.dest = wire::Endpoint::parse(v); }},
      {"wire.slot_ms", [](auto& s, auto& k, auto& v) { s.slot_ms = parse_number<double>(k, v); }},
      {"wire.samples", [](auto& s, auto& k, auto& v) { s.wire_samples = parse_number<std::uint64_t>(k, v); }},
      {"wire.duration_ms", [](auto& s, auto& k, auto& v) { s.wire_duration_ms = parse_number<double>(k, v); }},
      {"wire.drop_shim", [](auto& s, auto& k, auto& v) { s.drop_shim = parse_number<double>(k, v); }},
      {"wire.delay_shim_ms", [](auto& s, auto& k, auto& v) { s.delay_shim_ms = parse_number<double>(k, v); }},
      {"wire.fixed_sigma", [](auto& s, auto& k, auto& v) { s.wire_fixed_sigma = parse_number<double>(k, v); }},
      {"wire.log", [](auto& s, auto&, auto& v) { s.wire_log = v; }},
  };
  return table;
}

void ensure_dir(const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

void check_written(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw IoError("failed writing " + path.string());
}

/// Runs fn(i) for i in [0, count) on `jobs` threads; results land by index.
template <typename R, typename F>
std::vector<R> parallel_runs(int count, int jobs, F fn) {
  std::vector<R> out(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  const int workers = std::max(1, std::min(count, jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency())));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          out[i] = fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

nlohmann::json stat_json(const std::vector<double>& xs) {
  const Stat s = summarize(xs);
  return {{"mean", s.mean}, {"std", s.stddev}};
}

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

SimResult run_single(const ExperimentSpec& spec, Mode mode, const netsim::SimConfig& cfg,
                     std::optional<double> fixed_rate = std::nullopt) {
  switch (mode) {
    case Mode::FsfbSim: {
      fsfb::Options opt;
      opt.memory = spec.fsfb_memory;
      opt.paper_literal_probs = spec.fsfb_paper_literal_probs;
      return fsfb::run_fsfb_sim(cfg, opt);
    }
    case Mode::VsvbSim:
      return vsvb::run_vsvb_sim(cfg, {spec.vsvb, std::nullopt});
    case Mode::BaselineFixed:
      return vsvb::run_fixed_rate_sim(cfg, fixed_rate.value_or(1.0));
    default:
      throw ConfigError(std::string("mode ") + mode_name(mode) + " is not a single-run simulation");
  }
}

netsim::SimConfig seeded(const ExperimentSpec& spec, int run) {
  netsim::SimConfig cfg = spec.sim;
  cfg.rng_seed = spec.seed_base + static_cast<std::uint64_t>(run);
  return cfg;
}

nlohmann::json run_simulations(const ExperimentSpec& spec, Mode mode, const netsim::SimConfig& base,
                               const std::filesystem::path& dir, std::optional<double> fixed_rate) {
  ExperimentSpec local = spec;
  local.sim = base;
  const std::vector<SimResult> results = parallel_runs<SimResult>(
      spec.runs, spec.jobs, [&](int i) { return run_single(local, mode, seeded(local, i), fixed_rate); });

  std::vector<double> avs;
  std::vector<double> delays;
  nlohmann::json per_run = nlohmann::json::array();
  for (int i = 0; i < spec.runs; ++i) {
    const SimResult& r = results[i];
    avs.push_back(r.mean_av());
    if (std::isfinite(r.mean_delay())) delays.push_back(r.mean_delay());
    nlohmann::json j = run_summary_json(r);
    j["seed"] = local.seed_base + static_cast<std::uint64_t>(i);
    if (!dir.empty()) {
      const auto path = dir / ("run_" + std::to_string(i) + ".csv");
      auto os = open_out(path);
      write_interval_csv(os, r.intervals);
      check_written(os, path);
      j["csv"] = path.filename().string();
    }
    per_run.push_back(std::move(j));
  }
  nlohmann::json agg{{"schema", kAggregateSchema},
                     {"mode", mode_name(mode)},
                     {"runs", spec.runs},
                     {"seed_base", spec.seed_base},
                     {"k", base.coding.k},
                     {"n", base.coding.n},
                     {"avt", base.avt},
                     {"q_s", base.q_s},
                     {"p_in", base.loss.p_in},
                     {"p_out", base.loss.p_out},
                     {"duration", base.duration},
                     {"mean_av", stat_json(avs)},
                     {"mean_delay", stat_json(delays)},
                     {"per_run", per_run}};
  if (fixed_rate) agg["rate"] = *fixed_rate;
  return agg;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
  check_written(os, path);
}

wire::LinkConfig link_of(const ExperimentSpec& spec) {
  wire::LinkConfig link;
  link.k = spec.sim.coding.k;
  link.n_init = spec.sim.coding.n;
  link.slot_ms = spec.slot_ms;
  link.avt = spec.sim.avt;
  link.initial_interval = spec.sim.monitoring_interval;
  link.sample_bytes = spec.sim.coding.sample_bytes;
  link.params = spec.vsvb;
  link.fixed_sigma = spec.wire_fixed_sigma;
  return link;
}

}  // namespace

const char* mode_name(Mode m) {
  for (const auto& [name, mode] : mode_table()) {
    if (mode == m) return name.c_str();
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  const auto it = mode_table().find(name);
  if (it == mode_table().end()) throw ConfigError("unknown mode '" + name + "'");
  return it->second;
}

void ExperimentSpec::validate() const {
  try {
    sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (jobs < 0) throw ConfigError("jobs must be >= 0");
  if (mode == Mode::SweepCoding) {
    if (sweep_algorithm != Mode::FsfbSim && sweep_algorithm != Mode::VsvbSim) {
      throw ConfigError("sweep.algorithm must be fsfb-sim or vsvb-sim");
    }
    if (sweep_n_max < sweep_n_min) throw ConfigError("sweep.n_max must be >= sweep.n_min");
    for (int k : sweep_k) {
      if (k < 1 || k > sweep_n_max) throw ConfigError("sweep.k values must be in [1, sweep.n_max]");
    }
  }
  if (mode == Mode::BaselineFixed) {
    for (double r : baseline_rates) {
      if (!(r > 0.0)) throw ConfigError("baseline.rates must be positive");
    }
  }
  if (mode == Mode::Multiserver) {
    if (flows < 1) throw ConfigError("multiserver.flows must be >= 1");
    if (!flow_avts.empty() && static_cast<int>(flow_avts.size()) != flows) {
      throw ConfigError("multiserver.avts needs one value per flow");
    }
  }
  if (mode == Mode::Bounds && (bounds_max_elapsed < 0 || bounds_max_elapsed > bounds_t)) {
    throw ConfigError("bounds.max_elapsed must be in [0, bounds.t]");
  }
  if (!(slot_ms > 0.0)) throw ConfigError("wire.slot_ms must be positive");
  if (!(drop_shim >= 0.0 && drop_shim <= 1.0)) throw ConfigError("wire.drop_shim must be in [0, 1]");
}

std::vector<std::string> preset_names() {
  return {"table1-k3n4", "table1-k3n6", "sweep-avt2-p02", "sweep-avt5-p02", "vsvb-lossy",
          "baseline-lossy", "multiserver-2"};
}

ExperimentSpec preset(const std::string& name) {
  ExperimentSpec s;
  s.sim.q_s = 3 * netsim::kServiceRatePerDataChunk;
  s.sim.buffer_capacity = 5000;
  s.sim.duration = 100000;
  s.sim.monitoring_interval = 100;
  if (name == "table1-k3n4" || name == "table1-k3n6") {
    s.mode = Mode::FsfbSim;
    s.sim.avt = 5;
    s.sim.loss = {0.1, 0.1};
    s.sim.coding = {3, name == "table1-k3n4" ? 4 : 6, 1024};
    s.runs = 50;
  } else if (name == "sweep-avt2-p02" || name == "sweep-avt5-p02") {
    s.mode = Mode::SweepCoding;
    s.sim.avt = name == "sweep-avt2-p02" ? 2 : 5;
    s.sim.loss = {0.2, 0.2};
    s.sweep_k = {2, 3, 4};
    s.sweep_n_min = 2;
    s.sweep_n_max = 9;
    s.runs = 10;
  } else if (name == "vsvb-lossy" || name == "baseline-lossy") {
    s.mode = name == "vsvb-lossy" ? Mode::VsvbSim : Mode::BaselineFixed;
    s.sim.avt = 5;
    s.sim.loss = {0.2, 0.2};
    s.sim.coding = {3, 3, 1024};
    s.runs = 10;
  } else if (name == "multiserver-2") {
    s.mode = Mode::Multiserver;
    s.sim.avt = 5;
    s.sim.loss = {0.1, 0.1};
    s.flows = 2;
    s.runs = 5;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return s;
}

void apply_key(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown key '" + key + "'");
  try {
    it->second(spec, key, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentSpec parse_config(std::istream& is) {
  struct Entry {
    int line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::optional<Entry> preset_entry;
  std::string line;
  for (int no = 1; std::getline(is, line); ++no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    Entry e{no, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(no) + ": missing key");
    if (e.key == "preset") {
      if (preset_entry) throw ConfigError("line " + std::to_string(no) + ": preset given twice");
      preset_entry = e;
    } else {
      entries.push_back(std::move(e));
    }
  }
  ExperimentSpec spec;
  if (preset_entry) {
    try {
      spec = preset(preset_entry->value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(preset_entry->line) + ": " + err.what());
    }
  }
  for (const Entry& e : entries) {
    try {
      apply_key(spec, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  spec.validate();
  return spec;
}

ExperimentSpec parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  return parse_config(is);
}

Stat summarize(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

nlohmann::json run_experiment(const ExperimentSpec& spec, std::ostream& out) {
  spec.validate();
  ensure_dir(spec.out_dir);
  nlohmann::json summary;

  switch (spec.mode) {
    case Mode::FsfbSim:
    case Mode::VsvbSim:
      summary = run_simulations(spec, spec.mode, spec.sim, spec.out_dir, std::nullopt);
      break;

    case Mode::BaselineFixed: {
      summary = {{"schema", kAggregateSchema}, {"mode", mode_name(spec.mode)}, {"rates", nlohmann::json::array()}};
      for (std::size_t r = 0; r < spec.baseline_rates.size(); ++r) {
        const auto dir = spec.out_dir.empty() ? spec.out_dir : spec.out_dir / ("rate_" + std::to_string(r));
        ensure_dir(dir);
        summary["rates"].push_back(run_simulations(spec, spec.mode, spec.sim, dir, spec.baseline_rates[r]));
      }
      break;
    }

    case Mode::SweepCoding: {
      std::vector<Slot> avts = spec.sweep_avt.empty() ? std::vector<Slot>{spec.sim.avt} : spec.sweep_avt;
      summary = {{"schema", kAggregateSchema}, {"mode", mode_name(spec.mode)},
                 {"algorithm", mode_name(spec.sweep_algorithm)}, {"points", nlohmann::json::array()}};
      std::ostringstream csv;
      csv << "# a3lfec-sweep/1\nalgorithm,avt,k,n,runs,mean_av,std_av,mean_delay\n";
      for (Slot avt : avts) {
        for (int k : spec.sweep_k) {
          for (int n = std::max(k, spec.sweep_n_min); n <= spec.sweep_n_max; ++n) {
            netsim::SimConfig cfg = spec.sim;
            cfg.avt = avt;
            cfg.coding.k = k;
            cfg.coding.n = n;
            if (spec.sweep_scale_q_s) cfg.q_s = k * netsim::kServiceRatePerDataChunk;
            const auto dir = spec.out_dir.empty()
                                 ? spec.out_dir
                                 : spec.out_dir / ("avt" + std::to_string(avt) + "_k" + std::to_string(k) +
                                                   "_n" + std::to_string(n));
            ensure_dir(dir);
            nlohmann::json point = run_simulations(spec, spec.sweep_algorithm, cfg, dir, std::nullopt);
            csv << mode_name(spec.sweep_algorithm) << ',' << avt << ',' << k << ',' << n << ','
                << spec.runs << ',' << point["mean_av"]["mean"].get<double>() << ','
                << point["mean_av"]["std"].get<double>() << ','
                << point["mean_delay"]["mean"].get<double>() << '\n';
            point.erase("per_run");
            summary["points"].push_back(std::move(point));
          }
        }
      }
      if (!spec.out_dir.empty()) {
        auto os = open_out(spec.out_dir / "sweep.csv");
        os << csv.str();
        check_written(os, spec.out_dir / "sweep.csv");
      }
      out << csv.str();
      break;
    }

    case Mode::Bounds: {
      const analysis::BoundsTable table =
          analysis::bounds_table(spec.sim.q_s, spec.sim.coding, spec.sim.loss, spec.bounds_max_elapsed,
                                 spec.bounds_t, spec.bounds_printed_limit);
      std::ostringstream csv;
      analysis::write_bounds_csv(csv, table);
      if (!spec.out_dir.empty()) {
        auto os = open_out(spec.out_dir / "bounds.csv");
        os << csv.str();
        check_written(os, spec.out_dir / "bounds.csv");
      }
      out << csv.str();
      return {{"schema", kAggregateSchema}, {"mode", "bounds"}, {"sigma_up", table.sigma_up}};
    }

    case Mode::Multiserver: {
      const auto results = parallel_runs<multiserver::Result>(spec.runs, spec.jobs, [&](int i) {
        multiserver::Config cfg;
        cfg.base = seeded(spec, i);
        cfg.flows = spec.flows;
        cfg.avts = spec.flow_avts;
        cfg.params = spec.vsvb;
        return multiserver::run_multiserver_sim(cfg);
      });
      summary = {{"schema", kAggregateSchema}, {"mode", "multiserver"}, {"flows", spec.flows},
                 {"runs", spec.runs}, {"per_run", nlohmann::json::array()}};
      for (int i = 0; i < spec.runs; ++i) {
        const auto& r = results[i];
        nlohmann::json j{{"seed", spec.seed_base + static_cast<std::uint64_t>(i)},
                         {"long_run_rates", r.long_run_rates()},
                         {"fairness", multiserver::fairness_index(r.long_run_rates())}};
        std::vector<double> avs;
        for (const auto& f : r.flows) avs.push_back(f.mean_av());
        j["mean_av"] = avs;
        if (!spec.out_dir.empty()) {
          const auto sys_path = spec.out_dir / ("run_" + std::to_string(i) + "_system.csv");
          auto os = open_out(sys_path);
          multiserver::write_system_csv(os, r.system);
          check_written(os, sys_path);
          for (std::size_t f = 0; f < r.flows.size(); ++f) {
            const auto path = spec.out_dir / ("run_" + std::to_string(i) + "_flow" + std::to_string(f) + ".csv");
            auto fos = open_out(path);
            write_interval_csv(fos, r.flows[f].intervals);
            check_written(fos, path);
          }
        }
        summary["per_run"].push_back(std::move(j));
      }
      break;
    }

    case Mode::WireSend: {
      wire::SenderConfig cfg;
      cfg.dest = spec.dest;
      cfg.link = link_of(spec);
      cfg.samples = spec.wire_samples;
      cfg.duration_ms = spec.wire_duration_ms;
      const wire::SenderLog log = wire::run_sender(cfg);
      summary = {{"schema", kAggregateSchema},       {"mode", "wire-send"},
                 {"samples_sent", log.samples_sent}, {"chunks_sent", log.chunks_sent},
                 {"stale_chunks_skipped", log.stale_chunks_skipped},
                 {"feedback_received", log.feedback_received},
                 {"rate_changes", log.changes.size()}, {"fallbacks", log.fallbacks}};
      break;
    }

    case Mode::WireRecv: {
      wire::ReceiverConfig cfg;
      cfg.listen = spec.listen;
      cfg.link = link_of(spec);
      cfg.duration_ms = spec.wire_duration_ms;
      cfg.drop_shim = spec.drop_shim;
      cfg.delay_shim_ms = spec.delay_shim_ms;
      cfg.seed = spec.seed_base;
      const wire::ReceiverLog log = wire::run_receiver(cfg);
      if (!spec.wire_log.empty()) {
        auto os = open_out(spec.wire_log);
        write_interval_csv(os, log.intervals);
        check_written(os, spec.wire_log);
      }
      summary = {{"schema", kAggregateSchema},
                 {"mode", "wire-recv"},
                 {"chunks_received", log.chunks_received},
                 {"samples_decoded", log.samples_decoded},
                 {"duplicates", log.duplicates},
                 {"malformed", log.malformed},
                 {"shim_dropped", log.shim_dropped},
                 {"payload_mismatches", log.payload_mismatches},
                 {"feedback_sent", log.feedback_sent},
                 {"mean_delay_ms", finite_or_null(log.mean_delay_ms)}};
      break;
    }
  }

  if (!spec.out_dir.empty()) write_json(spec.out_dir / "aggregate.json", summary);
  if (spec.mode != Mode::SweepCoding) {
    nlohmann::json brief = summary;
    brief.erase("per_run");
    out << brief.dump(2) << '\n';
  }
  return summary;
}

}  // namespace a3l::experiment
