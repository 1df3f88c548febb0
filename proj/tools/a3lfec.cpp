// a3lfec: experiment runner for the age-aware FEC simulator and UDP prototype.
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "a3l/error.hpp"
#include "a3l/experiment.hpp"

namespace {

namespace ex = a3l::experiment;

constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;

void apply_overrides(ex::ExperimentSpec& spec, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw a3l::ConfigError("--set expects key=value, got '" + kv + "'");
    ex::apply_key(spec, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

struct WireFlags {
  std::string endpoint;
  double avt_ms = 40.0;
  int k = 3;
  int n_init = 5;
  double slot_ms = 1.0;
  double duration_ms = 0.0;
  std::uint64_t samples = 1000;
  std::optional<double> fixed_sigma;
  std::string log;
  double drop_shim = 0.0;
  double delay_shim_ms = 0.0;
  std::uint64_t seed = 1;
};

void add_link_flags(CLI::App* cmd, WireFlags& f) {
  cmd->add_option("--avt-ms", f.avt_ms, "age violation threshold in milliseconds")->check(CLI::PositiveNumber);
  cmd->add_option("--k", f.k, "data chunks per sample")->check(CLI::Range(1, 255));
  cmd->add_option("--n-init", f.n_init, "initial block length")->check(CLI::Range(1, 255));
  cmd->add_option("--slot-ms", f.slot_ms, "slot length in milliseconds")->check(CLI::PositiveNumber);
  cmd->add_option("--duration-ms", f.duration_ms, "stop after this long (0: no limit)");
  cmd->add_option("--fixed-sigma", f.fixed_sigma, "disable the controller and send at this rate");
  cmd->add_option("--seed", f.seed, "seed for the receiver shims");
}

ex::ExperimentSpec wire_spec(ex::Mode mode, const WireFlags& f) {
  ex::ExperimentSpec spec;
  spec.mode = mode;
  spec.slot_ms = f.slot_ms;
  spec.sim.avt = std::max<a3l::Slot>(1, std::llround(f.avt_ms / f.slot_ms));
  spec.sim.coding.k = f.k;
  spec.sim.coding.n = f.n_init;
  spec.sim.coding.sample_bytes = 96;
  spec.wire_samples = f.samples;
  spec.wire_duration_ms = f.duration_ms;
  spec.wire_fixed_sigma = f.fixed_sigma;
  spec.drop_shim = f.drop_shim;
  spec.delay_shim_ms = f.delay_shim_ms;
  spec.seed_base = f.seed;
  spec.wire_log = f.log;
  if (mode == ex::Mode::WireSend) spec.dest = a3l::wire::Endpoint::parse(f.endpoint);
  else spec.listen = a3l::wire::Endpoint::parse(f.endpoint);
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"a3lfec: age-aware adaptive FEC simulator, analysis and UDP prototype"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset_name;
  std::string out_dir;
  std::vector<std::string> sets;
  int runs = 0;
  int jobs = -1;

  auto* run = app.add_subcommand("run", "run an experiment described by a config file");
  run->add_option("config", config_path, "key = value config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides out_dir)");
  run->add_option("--set", sets, "override a config key, key=value (repeatable)");
  run->add_option("--jobs", jobs, "worker threads (0: all cores)");

  auto* pre = app.add_subcommand("preset", "run a built-in experiment preset");
  pre->add_option("name", preset_name, "preset name (see list-presets)")->required();
  pre->add_option("--out", out_dir, "output directory");
  pre->add_option("--runs", runs, "override the run count");
  pre->add_option("--set", sets, "override a config key, key=value (repeatable)");
  pre->add_option("--jobs", jobs, "worker threads (0: all cores)");

  auto* list = app.add_subcommand("list-presets", "print the preset names");

  ex::ExperimentSpec bounds_spec;
  bounds_spec.mode = ex::Mode::Bounds;
  auto* bounds = app.add_subcommand("bounds", "print the stability bound, decode and outage table as CSV");
  bounds->add_option("--k", bounds_spec.sim.coding.k, "data chunks per sample");
  bounds->add_option("--n", bounds_spec.sim.coding.n, "block length");
  bounds->add_option("--pin", bounds_spec.sim.loss.p_in, "loss before the bottleneck");
  bounds->add_option("--pout", bounds_spec.sim.loss.p_out, "loss after the bottleneck");
  bounds->add_option("--q-s", bounds_spec.sim.q_s, "service rate in chunks per slot");
  bounds->add_option("--t", bounds_spec.bounds_t, "slot at which outage is evaluated");
  bounds->add_option("--max-elapsed", bounds_spec.bounds_max_elapsed, "largest elapsed-slot row");
  bounds->add_flag("--printed-limit", bounds_spec.bounds_printed_limit,
                   "sum the decode tail up to n-k+1 instead of n-k");
  bounds->add_option("--out", out_dir, "also write bounds.csv here");

  WireFlags send_flags;
  auto* send = app.add_subcommand("wire-send", "run the UDP sender");
  send->add_option("--dest", send_flags.endpoint, "receiver host:port")->required();
  send->add_option("--samples", send_flags.samples, "samples to send");
  add_link_flags(send, send_flags);

  WireFlags recv_flags;
  auto* recv = app.add_subcommand("wire-recv", "run the UDP receiver and controller");
  recv->add_option("--listen", recv_flags.endpoint, "bind host:port")->required();
  recv->add_option("--log", recv_flags.log, "interval CSV path");
  recv->add_option("--drop-shim", recv_flags.drop_shim, "synthetic loss probability (testing)")
      ->check(CLI::Range(0.0, 1.0));
  recv->add_option("--delay-shim-ms", recv_flags.delay_shim_ms, "synthetic one-way delay (testing)");
  add_link_flags(recv, recv_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (list->parsed()) {
      for (const auto& name : ex::preset_names()) std::cout << name << '\n';
      return 0;
    }
    ex::ExperimentSpec spec;
    if (run->parsed()) {
      spec = ex::parse_config_file(config_path);
    } else if (pre->parsed()) {
      spec = ex::preset(preset_name);
      if (runs > 0) spec.runs = runs;
    } else if (bounds->parsed()) {
      spec = bounds_spec;
    } else if (send->parsed()) {
      spec = wire_spec(ex::Mode::WireSend, send_flags);
    } else {
      spec = wire_spec(ex::Mode::WireRecv, recv_flags);
    }
    apply_overrides(spec, sets);
    if (!out_dir.empty()) spec.out_dir = out_dir;
    if (jobs >= 0) spec.jobs = jobs;
    spec.validate();
    ex::run_experiment(spec, std::cout);
    return 0;
  } catch (const a3l::IoError& e) {
    std::cerr << "a3lfec: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "a3lfec: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "a3lfec: " << e.what() << '\n';
    return kExitIo;
  }
}
