#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "a3l/netsim.hpp"
#include "a3l/transport.hpp"
#include "a3l/vsvb.hpp"

namespace a3l::experiment {

enum class Mode { FsfbSim, VsvbSim, SweepCoding, Bounds, Multiserver, WireSend, WireRecv, BaselineFixed };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& name);  // throws ConfigError

struct ExperimentSpec {
  Mode mode = Mode::FsfbSim;
  netsim::SimConfig sim;
  int runs = 1;
  std::uint64_t seed_base = 1;
  int jobs = 0;  // 0 = hardware concurrency
  std::filesystem::path out_dir;  // empty: aggregate to stdout only

  std::optional<int> fsfb_memory;
  bool fsfb_paper_literal_probs = false;

  vsvb::Params vsvb;

  std::vector<int> sweep_k{3};
  int sweep_n_min = 1;
  int sweep_n_max = 9;
  std::vector<Slot> sweep_avt;  // empty: sim.avt
  Mode sweep_algorithm = Mode::FsfbSim;
  bool sweep_scale_q_s = true;  // q_s = k * 1.4706 at each point

  std::vector<double> baseline_rates{0.5, 1.0, 2.0, 3.0, 4.0};  // chunks per slot, n = k

  int flows = 2;
  std::vector<Slot> flow_avts;

  Slot bounds_max_elapsed = 10;
  Slot bounds_t = 50;
  bool bounds_printed_limit = false;

  wire::Endpoint listen{"127.0.0.1", 9400};
  wire::Endpoint dest{"127.0.0.1", 9400};
  double slot_ms = 1.0;
  std::uint64_t wire_samples = 1000;
  double wire_duration_ms = 0.0;
  double drop_shim = 0.0;
  double delay_shim_ms = 0.0;
  std::optional<double> wire_fixed_sigma;
  std::filesystem::path wire_log;

  void validate() const;  // throws ConfigError
};

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
ExperimentSpec preset(const std::string& name);

/// key = value lines, '#' comments. A `preset` key is applied first wherever
/// it appears; every other key overrides it. Unknown keys and unparsable
/// values throw ConfigError naming the line; range and cross-field checks run
/// once the whole file is read and name the field.
ExperimentSpec parse_config(std::istream& is);
ExperimentSpec parse_config_file(const std::filesystem::path& path);

/// Sets one key on a spec; shared by the file parser and the CLI.
void apply_key(ExperimentSpec& spec, const std::string& key, const std::string& value);

/// Runs the experiment, writes files under spec.out_dir and a summary to
/// `out`. Throws IoError when output cannot be written.
nlohmann::json run_experiment(const ExperimentSpec& spec, std::ostream& out);

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
};
Stat summarize(const std::vector<double>& xs);

}  // namespace a3l::experiment
