#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "urbantrack/harness.hpp"

namespace py = pybind11;
using namespace urbantrack;

namespace {

py::dict result_dict(const ExperimentResult& r) {
  py::dict d;
  d["mode"] = to_string(r.mode);
  d["runs"] = r.runs;
  d["scans"] = r.scans;
  d["rmse"] = r.rmse;
  d["mean_confirmed"] = r.mean_confirmed;
  d["coverage"] = r.coverage;
  d["ct_left_dominance"] = r.ct_left_dominance;
  d["metrics_csv"] = metrics_csv({r});
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::enum_<Sweep>(m, "Sweep").value("UP", Sweep::kUp).value("DOWN", Sweep::kDown);

  py::class_<ChirpWaveform>(m, "ChirpWaveform")
      .def(py::init<>())
      .def_readwrite("name", &ChirpWaveform::name)
      .def_readwrite("kappa", &ChirpWaveform::kappa)
      .def_readwrite("gamma", &ChirpWaveform::gamma)
      .def_readwrite("sweep", &ChirpWaveform::sweep)
      .def_readwrite("pulses", &ChirpWaveform::pulses)
      .def_readwrite("pri", &ChirpWaveform::pri)
      .def_readwrite("wavelength", &ChirpWaveform::wavelength)
      .def_readwrite("bandwidth", &ChirpWaveform::bandwidth)
      .def("peak_amplitude", &ChirpWaveform::peak_amplitude);

  m.def("make_library",
        [](const std::vector<double>& kappas, int pulses, double pri, double wavelength, double bandwidth) {
          return make_library(kappas, pulses, pri, wavelength, bandwidth).waveforms();
        },
        py::arg("kappas"), py::arg("pulses"), py::arg("pri"), py::arg("wavelength"), py::arg("bandwidth"));
  m.def("chirp_rate_for_bandwidth", &chirp_rate_for_bandwidth, py::arg("kappa"), py::arg("bandwidth"));
  m.def("measurement_covariance", &measurement_covariance, py::arg("waveform"), py::arg("eta"),
        "Single-pulse range / range-rate covariance.");
  m.def("train_measurement_covariance", &train_measurement_covariance, py::arg("waveform"), py::arg("eta"),
        "Coherent pulse-train range / range-rate covariance used by the tracker.");

  m.def("measurement_function",
        [](const StateVector& s, const Point2& tx, const Point2& rx) { return measurement_function(s, tx, rx); },
        py::arg("state"), py::arg("tx"), py::arg("rx"));
  m.def("gate_threshold", &gate_threshold, py::arg("p_gate"));

  m.def("trajectory",
        [](const std::string& config) {
          const auto traj = load_scenario(config).trajectory();
          Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor> out(static_cast<Eigen::Index>(traj.size()), 6);
          for (std::size_t k = 0; k < traj.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = traj[k].transpose();
          return out;
        },
        py::arg("config"), "Noise-free truth trajectory, one [x, vx, y, vy, ax, ay] row per scan.");

  m.def("simulate",
        [](const std::string& config, const std::string& mode, int runs, int scans, std::uint64_t seed,
           bool signal_level, const std::string& out) {
          ExperimentConfig cfg;
          cfg.scenario = load_scenario(config);
          cfg.runs = runs;
          cfg.scans = scans;
          cfg.seed = seed;
          cfg.signal_level = signal_level;
          std::vector<LoopMode> modes;
          if (mode == "both") {
            modes = {LoopMode::kClosed, LoopMode::kOpen};
          } else {
            modes = {loop_mode_from_string(mode)};
          }
          std::vector<ExperimentResult> results;
          {
            py::gil_scoped_release release;
            for (LoopMode lm : modes) {
              cfg.mode = lm;
              results.push_back(run_experiment(cfg));
            }
          }
          if (!out.empty()) emit_outputs(results, cfg, out);
          py::list list;
          for (const auto& r : results) list.append(result_dict(r));
          return list;
        },
        py::arg("config"), py::arg("mode") = "closed", py::arg("runs") = 10, py::arg("scans") = 140,
        py::arg("seed") = 1, py::arg("signal_level") = false, py::arg("out") = "",
        "Runs the Monte Carlo experiment; writes the output files when `out` is set.");

  m.def("compare", &compare_directories, py::arg("a"), py::arg("b"),
        "Comparison of two output directories as JSON text.");
}
