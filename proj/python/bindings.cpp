#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "a3l/analysis.hpp"
#include "a3l/codec.hpp"
#include "a3l/error.hpp"
#include "a3l/experiment.hpp"
#include "a3l/fsfb.hpp"
#include "a3l/multiserver.hpp"
#include "a3l/vsvb.hpp"
#include "a3l/wire.hpp"

namespace py = pybind11;
using namespace a3l;

namespace {

Bytes to_bytes(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

py::bytes from_bytes(const Bytes& b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

// Keyword arguments use the config-file keys, so both paths share validation.
netsim::SimConfig sim_config(const py::kwargs& kw) {
  experiment::ExperimentSpec spec;
  for (const auto& [key, value] : kw) {
    const std::string k = py::str(key);
    std::string v = py::str(value);
    if (py::isinstance<py::bool_>(value)) v = value.cast<bool>() ? "true" : "false";
    experiment::apply_key(spec, k, v);
  }
  spec.sim.validate();
  return spec.sim;
}

std::string summary(const SimResult& r, bool with_trace) {
  nlohmann::json j = run_summary_json(r);
  if (with_trace) j["ages"] = r.ages;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_a3lfec, m) {
  m.doc() = "Age-aware FEC transport core";

  py::register_exception<InsufficientChunksError>(m, "InsufficientChunksError");
  py::register_exception<CausalityError>(m, "CausalityError");
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<wire::DecodeError>(m, "WireDecodeError", PyExc_ValueError);

  m.def(
      "encode",
      [](int k, int n, const py::bytes& payload, std::uint64_t sample_id) {
        const Bytes data = to_bytes(payload);
        const auto chunks = encode_sample({sample_id, 0, data}, {k, n, data.size()});
        py::list out;
        for (const auto& c : chunks) out.append(py::make_tuple(c.chunk_index, from_bytes(c.payload)));
        return out;
      },
      py::arg("k"), py::arg("n"), py::arg("payload"), py::arg("sample_id") = 0);
  m.def(
      "decode",
      [](int k, int n, std::size_t sample_bytes, const std::vector<std::pair<int, py::bytes>>& chunks) {
        std::vector<Chunk> in;
        for (const auto& [index, payload] : chunks) in.push_back({0, index, 0, to_bytes(payload)});
        return from_bytes(decode_sample(in, {k, n, sample_bytes}));
      },
      py::arg("k"), py::arg("n"), py::arg("sample_bytes"), py::arg("chunks"));

  m.def("sigma_upper_bound", &analysis::sigma_upper_bound, py::arg("q_s"), py::arg("n"), py::arg("p_in"));
  m.def("decode_prob", &analysis::decode_prob, py::arg("n"), py::arg("k"), py::arg("p_lost"),
        py::arg("printed_limit") = false);
  m.def(
      "sample_decode_prob",
      [](int k, int n, double p_in, double p_out, Slot elapsed) {
        return analysis::sample_decode_prob({k, n}, {p_in, p_out}, elapsed);
      },
      py::arg("k"), py::arg("n"), py::arg("p_in"), py::arg("p_out"), py::arg("elapsed"));
  m.def(
      "age_event_prob",
      [](Slot e, Slot t, int k, int n, double p_in, double p_out) {
        return analysis::age_event_prob(e, t, {k, n}, {p_in, p_out});
      },
      py::arg("e"), py::arg("t"), py::arg("k"), py::arg("n"), py::arg("p_in"), py::arg("p_out"));
  m.def(
      "outage_prob",
      [](Slot e, Slot t, int k, int n, double p_in, double p_out) {
        return analysis::outage_prob(e, t, {k, n}, {p_in, p_out});
      },
      py::arg("e"), py::arg("t"), py::arg("k"), py::arg("n"), py::arg("p_in"), py::arg("p_out"));
  m.def(
      "bounds_csv",
      [](double q_s, int k, int n, double p_in, double p_out, Slot max_elapsed, Slot t) {
        std::ostringstream os;
        analysis::write_bounds_csv(os, analysis::bounds_table(q_s, {k, n}, {p_in, p_out}, max_elapsed, t));
        return os.str();
      },
      py::arg("q_s"), py::arg("k"), py::arg("n"), py::arg("p_in"), py::arg("p_out"), py::arg("max_elapsed"),
      py::arg("t"));

  m.def(
      "interval_age_violation",
      [](Slot interval_start, std::vector<Slot> gen, std::vector<Slot> decode, Slot avt,
         std::optional<Slot> interval_end, bool exact) {
        const vsvb::DecodeLog log{interval_start, std::move(gen), std::move(decode), interval_end};
        return exact ? vsvb::interval_age_violation_exact(log, avt) : vsvb::interval_age_violation(log, avt);
      },
      py::arg("interval_start"), py::arg("gen"), py::arg("decode"), py::arg("avt"),
      py::arg("interval_end") = std::nullopt, py::arg("exact") = false);

  m.def(
      "_run_fsfb_sim",
      [](bool trace, const py::kwargs& kw) {
        const auto cfg = sim_config(kw);
        py::gil_scoped_release release;
        return summary(fsfb::run_fsfb_sim(cfg), trace);
      },
      py::arg("trace") = false);
  m.def(
      "_run_vsvb_sim",
      [](bool trace, const py::kwargs& kw) {
        const auto cfg = sim_config(kw);
        py::gil_scoped_release release;
        return summary(vsvb::run_vsvb_sim(cfg), trace);
      },
      py::arg("trace") = false);
  m.def(
      "_run_fixed_rate_sim",
      [](double sigma, bool trace, const py::kwargs& kw) {
        const auto cfg = sim_config(kw);
        py::gil_scoped_release release;
        return summary(vsvb::run_fixed_rate_sim(cfg, sigma), trace);
      },
      py::arg("sigma"), py::arg("trace") = false);
  m.def(
      "_run_preset",
      [](const std::string& name, std::optional<int> runs, const std::string& out_dir) {
        auto spec = experiment::preset(name);
        if (runs) spec.runs = *runs;
        spec.out_dir = out_dir;
        spec.validate();
        std::ostringstream sink;
        py::gil_scoped_release release;
        return experiment::run_experiment(spec, sink).dump();
      },
      py::arg("name"), py::arg("runs") = std::nullopt, py::arg("out_dir") = "");
  m.def("preset_names", &experiment::preset_names);

  m.def(
      "allocate_rates",
      [](const std::vector<double>& sigma_old, const std::vector<double>& av, double sigma_total,
         double min_rate) {
        if (sigma_old.size() != av.size()) throw ParameterError("sigma_old and av need the same length");
        std::vector<multiserver::FlowState> flows;
        double old_total = 0.0;
        for (std::size_t i = 0; i < av.size(); ++i) {
          flows.push_back({static_cast<int>(i), sigma_old[i], av[i]});
          old_total += sigma_old[i];
        }
        return multiserver::allocate_rates(flows, sigma_total, old_total, min_rate);
      },
      py::arg("sigma_old"), py::arg("av"), py::arg("sigma_total"), py::arg("min_rate") = 0.0);
  m.def("fairness_index", [](const std::vector<double>& r) { return multiserver::fairness_index(r); });

  m.def(
      "encode_chunk_packet",
      [](std::uint32_t sample_id, std::uint64_t gen_timestamp_us, int chunk_index, int k, int n,
         const py::bytes& payload) {
        if (k < 0 || k > 255 || n < 0 || n > 255 || chunk_index < 0 || chunk_index > 255) {
          throw ParameterError("k, n and chunk_index must fit in one byte");
        }
        return from_bytes(wire::encode(wire::ChunkPacket{sample_id, gen_timestamp_us,
                                                         static_cast<std::uint8_t>(chunk_index),
                                                         static_cast<std::uint8_t>(k),
                                                         static_cast<std::uint8_t>(n), to_bytes(payload)}));
      },
      py::arg("sample_id"), py::arg("gen_timestamp_us"), py::arg("chunk_index"), py::arg("k"), py::arg("n"),
      py::arg("payload"));
  m.def("decode_chunk_packet", [](const py::bytes& data) {
    const auto p = wire::decode_chunk(to_bytes(data));
    py::dict d;
    d["sample_id"] = p.sample_id;
    d["gen_timestamp_us"] = p.gen_timestamp_us;
    d["chunk_index"] = p.chunk_index;
    d["k"] = p.k;
    d["n"] = p.n;
    d["payload"] = from_bytes(p.payload);
    return d;
  });
  m.def("decode_feedback_packet", [](const py::bytes& data) {
    const auto f = wire::decode_feedback(to_bytes(data));
    py::dict d;
    d["mi_index"] = f.mi_index;
    d["new_rate_milli"] = f.new_rate_milli;
    d["new_n"] = f.new_n;
    d["new_ts_ms"] = f.new_ts_ms;
    d["av_ratio_milli"] = f.av_ratio_milli;
    d["pdr_milli"] = f.pdr_milli;
    d["mean_delay_us"] = f.mean_delay_us == wire::kInfiniteDelay ? py::object(py::none()) : py::int_(f.mean_delay_us);
    return d;
  });
  m.attr("CHUNK_HEADER_BYTES") = wire::kChunkHeaderBytes;
  m.attr("FEEDBACK_BYTES") = wire::kFeedbackBytes;
}
