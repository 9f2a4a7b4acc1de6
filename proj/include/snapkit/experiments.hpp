#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snapkit/dynamics.hpp"
#include "snapkit/gate_synth.hpp"
#include "snapkit/io.hpp"
#include "snapkit/targets.hpp"
#include "snapkit/wigner.hpp"

namespace snapkit {

// ---------- target spec ----------

struct TargetSpec {
  std::string kind = "fock";  // vacuum | fock | coherent | binomial | cat | gkp | cubic
  int n = 2;                  // fock index
  Complex alpha = Complex(std::sqrt(2.0), 0.0);  // cat / coherent amplitude
  std::string parity = "odd";                    // cat parity
  GkpSpec gkp;
  CubicSpec cubic;
  int dim = 0;  // 0 = per-kind default

  void validate() const;
};

StateVector build_target(const TargetSpec& spec);

// ---------- run config ----------

struct WignerConfig {
  double extent = 3.5;
  int side = 81;
  int shots = 0;  // 0 = exact values
  bool emit = true;
};

struct SimulationConfig {
  bool pulse_level = true;
  bool with_loss = true;        // also report the open-system fidelity
  double disp_duration = 50e-9;
  double tol = 1e-8;
};

struct SweepRunConfig {
  std::string parameter = "chi";  // chi | f_snap | a_disp | a_snap | duration
  std::vector<std::string> modes = {"optimized", "standard"};
  std::string observable = "w0";  // w0 | fidelity
  // uniform offset grid unless an explicit list is given; chi/f_snap/a_*
  // offsets are relative (dimensionless), duration offsets are seconds
  double min = -0.07, max = 0.07;
  int count = 29;
  std::vector<double> offsets;
  double standard_duration = 4e-6;
  bool with_loss = false;
};

struct ScalingRunConfig {
  int n_snaps = 2;
  int fock_min = 1, fock_max = 10;
  std::vector<int> m_values;  // per target |fock_min>..|fock_max>; empty = reference list
  bool pulse_step = true;     // run the envelope-optimization step
  bool loss_step = true;      // run the open-system evaluation
};

struct TomographyRunConfig {
  std::string source = "simulate";  // simulate | ideal | csv
  std::string csv_path;
  int shots = 0;
  bool decoherent = true;
  int dim = 32;           // reconstruction space
  int bootstrap = 0;      // resample count (needs shots > 0)
  int fock_cutoff = 0;    // 0 = full-space fidelity
  double noise_floor = 0.0;
  int mle_iters = 2000;
};

// Frequencies in config files are cyclic (Hz) and converted to angular here;
// times are in seconds. Unknown keys anywhere in the file are rejected.
struct RunConfig {
  std::string experiment;  // prepare | snapshots | sweep | scaling | tomography
  TargetSpec target;
  std::optional<GateSequence> sequence;  // pre-computed gate parameters; skips synthesis
  SynthConfig synth;
  PulseConstraints constraints;
  SystemParams system;
  CoherenceParams coherence;
  GrapeOptions grape;
  WignerConfig wigner;
  SimulationConfig sim;
  SweepRunConfig sweep;
  ScalingRunConfig scaling;
  TomographyRunConfig tomo;
  std::filesystem::path out = "runs/out";
  std::uint64_t seed = 1;
  int threads = 1;
  bool render = false;  // set by the CLI flag, not the file

  void validate() const;
};

RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// reference per-Fock maximum SNAP indices for the scaling study
const std::vector<int>& scaling_m_reference(int n_snaps);

// ---------- commands ----------
// Each command writes its artifacts under config.out and returns the main
// report (also written to <out>/report.json).

Json cmd_prepare(const RunConfig& config);
Json cmd_snapshots(const RunConfig& config);
Json cmd_sweep(const RunConfig& config);
Json cmd_scaling(const RunConfig& config);
Json cmd_tomography(const RunConfig& config);

Json run_experiment(const RunConfig& config);  // dispatch on config.experiment

}  // namespace snapkit
