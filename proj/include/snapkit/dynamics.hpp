#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "snapkit/pulse.hpp"

namespace snapkit {

struct CoherenceParams {
  double t1_qubit = 35e-6;
  double t2_qubit = 27e-6;
  double t1_cavity = 248e-6;

  // no decoherence (all rates zero)
  static CoherenceParams none() {
    double inf = std::numeric_limits<double>::infinity();
    return CoherenceParams{inf, inf, inf};
  }
  // pure-dephasing time from 1/T_phi = 1/T2 - 1/(2 T1)
  double t_phi() const;
  void validate() const;
};

struct ScheduledPulse {
  DriveChannel channel = DriveChannel::qubit;
  double start = 0.0;
  PulseWaveform pulse;
};

struct PulseSchedule {
  std::vector<ScheduledPulse> items;
  double duration() const;
};

struct EvolveOptions {
  double tol = 1e-8;                   // per-step relative tolerance
  std::vector<double> snapshot_times;  // must lie inside [0, duration]
  bool include_static_hamiltonian = true;
};

struct EvolutionResult {
  Matrix final_state;                // joint density matrix, hermitized; trace checked
  std::vector<double> times;         // breakpoints where trace was recorded
  std::vector<double> traces;
  std::vector<Matrix> snapshots;     // at snapshot_times
};

// d rho/dt = -i[H(t), rho] + (1/T1c) D[a] + (1/T1q) D[b] + (1/T_phi) D[b†b],
// integrated with an adaptive embedded Runge-Kutta pair (Dormand-Prince 5(4)),
// piecewise-constant H per pulse sample. rho0 is on the joint cavity x qubit
// space, index n*2+q.
EvolutionResult lindblad_evolve(const Matrix& rho0, const SystemParams& params,
                                const CoherenceParams& coh, const PulseSchedule& schedule,
                                const EvolveOptions& options = {});

// Heisenberg-picture map for the channel generated by the schedule:
// Tr[E(rho) obs] = Tr[rho E†(obs)]
Matrix lindblad_adjoint_map(const Matrix& obs, const SystemParams& params,
                            const CoherenceParams& coh, const PulseSchedule& schedule,
                            double tol = 1e-8);

// Closed-system fast path: piecewise-constant exponential action on a joint
// state vector (truncated Taylor per sample; exact to machine precision at
// 1 ns steps).
Vector closed_evolve(const SystemParams& params, const PulseSchedule& schedule, Vector psi,
                     bool include_static_hamiltonian = true);

Matrix trace_out_qubit(const Matrix& joint);
Matrix kron_cavity(const Matrix& cavity_op);       // G -> G (x) I_2
Matrix kron_qubit(const Matrix& qubit_op, int cavity_dim);  // Q -> I_dc (x) Q

// amplitude/frequency execution errors applied when realizing a schedule
struct ExecutionPerturbation {
  double disp_scale = 1.0;
  double snap_scale = 1.0;
  double snap_carrier = 0.0;  // rad/s added to SNAP pulse carriers
};

// displacements as 50 ns resonant pulses, SNAPs as the given waveforms,
// back-to-back with zero gaps; a trailing zero displacement is omitted
PulseSchedule build_schedule(const GateSequence& seq,
                             const std::vector<PulseWaveform>& snap_pulses,
                             double disp_duration = 50e-9,
                             const ExecutionPerturbation& pert = {});

struct SequenceSimOptions {
  bool pulse_level = true;
  PulseConstraints constraints;
  GrapeOptions grape;
  std::uint64_t seed = 1;
  std::vector<PulseWaveform> snap_pulses;  // reused when nonempty, else synthesized
  bool record_gate_snapshots = false;
  double disp_duration = 50e-9;
};

struct SequenceSimResult {
  double fidelity = 0.0;
  Matrix final_joint;                      // cavity x qubit density matrix
  Matrix final_cavity;                     // reduced density matrix
  std::vector<double> gate_fidelities;     // vs snapshot_states(), when recorded
  std::vector<Matrix> gate_states;         // cavity-reduced, after each gate
  std::vector<GrapeResult> snap_synthesis; // per-SNAP artifacts (pulse level)
  PulseSchedule schedule;
};

SequenceSimResult simulate_sequence(const StateVector& target, const GateSequence& seq,
                                    const SystemParams& params, const CoherenceParams& coh,
                                    const SequenceSimOptions& options = {});

// full pulse schedule from vacuum x ground, Lindblad, qubit traced out,
// fidelity to target. pulse_level=false uses ideal instantaneous gates with
// dissipator-only idle intervals of matching duration (deterministic in-gate
// phases are absorbed by calibrated pulses, so idles carry no Hamiltonian).
double sequence_theory_fidelity(const StateVector& target, const GateSequence& seq,
                                const SystemParams& params, const CoherenceParams& coh,
                                bool pulse_level = true,
                                const SequenceSimOptions& options = {});

// comb-SNAP quality probe: state infidelity of the full pulse realization of
// S(thetas) acting on D(alpha)|0> against the ideal gate result (lossless);
// the comb covers band_padding extra zero-phase lines above the addressed band
double comb_state_infidelity(const RealVector& thetas, Complex alpha,
                             const SystemParams& params, double duration,
                             SnapEnvelope envelope = SnapEnvelope::sin2, int band_padding = 6);

enum class SweepParameter { chi, f_snap, a_disp, a_snap, duration };
enum class SweepObservable { w0, fidelity };
enum class SweepMode { optimized, standard };

struct SweepContext {
  StateVector target;
  GateSequence sequence;
  SystemParams params;
  CoherenceParams coherence = CoherenceParams::none();
  PulseConstraints constraints;
  GrapeOptions grape;
  double standard_duration = 4e-6;
  double disp_duration = 50e-9;
  std::uint64_t seed = 1;
  bool with_loss = false;
};

struct SweepCurve {
  std::vector<double> offsets;
  std::vector<double> values;
  double span_low = 0.0, span_high = 0.0;  // within-1%-of-max interval
  bool span_extrapolated = false;          // quadratic-fit fallback was used
  double span() const { return span_high - span_low; }
};

// chi: pulses are regenerated with the perturbed value and run on the true
// system; f_snap/a_disp/a_snap: fixed nominal pulses with perturbed execution;
// duration (comb-length study): offsets are absolute durations in seconds.
SweepCurve sensitivity_sweep(SweepParameter parameter, const std::vector<double>& offsets,
                             SweepObservable observable, SweepMode mode,
                             const SweepContext& ctx);

}  // namespace snapkit
