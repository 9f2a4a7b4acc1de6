#pragma once

#include <cstdint>
#include <vector>

#include "snapkit/fock.hpp"

namespace snapkit {

// Piecewise-constant complex baseband drive, angular units (rad/s).
// `carrier` is an angular offset of the drive LO from the rotating frame;
// the effective drive at sample k is samples[k] * exp(i * carrier * t_k).
struct PulseWaveform {
  Vector samples;
  double sample_rate = 1e9;
  double carrier = 0.0;

  int size() const { return static_cast<int>(samples.size()); }
  double dt() const { return 1.0 / sample_rate; }
  double duration() const { return size() * dt(); }
  double max_amplitude() const;
  // fraction of spectral power strictly above |f| = cutoff (angular)
  double spectral_power_above(double cutoff) const;
};

struct PulseConstraints {
  double rabi_max = kTwoPi * 30e6;
  double sample_rate = 1e9;
  double lowpass_cutoff = kTwoPi * 60e6;
  double duration = 500e-9;
  int filter_taps = 64;

  void validate() const;
  // amplitude bound and >= 99% of spectral power below the cutoff (the 40 dB
  // pointwise stopband is the filter's own response, checked on its taps)
  bool satisfied_by(const PulseWaveform& p) const;
};

struct SystemParams {
  double chi = kTwoPi * 3.14e6;
  double chi_prime = kTwoPi * 25e3;
  double kerr = kTwoPi * 6e3;
  int cavity_dim = 32;
  double detuning_q = 0.0;
  double detuning_c = 0.0;
  // two-level-approximation metadata; not part of the Hamiltonian
  double anharmonicity = -kTwoPi * 300e6;

  void validate() const;
};

enum class DriveChannel { qubit, cavity };

// Joint cavity (x) qubit Hamiltonian in the doubly rotating frame, index n*2+q
// (q=0 ground): H = -chi n nq - (kerr/2) n(n-1) - (chi'/2) n(n-1) nq
//               + detuning_c n + detuning_q nq + (gamma b† + gamma* b)
//               + (eps a† + eps* a)
Operator hamiltonian(const SystemParams& params, Complex gamma_qubit,
                     Complex eps_cavity = Complex(0, 0));

// Product of per-sample exponentials U = prod_k exp(-i H(drive_k) dt*group).
// `group` averages that many samples per exponential (speed/accuracy tradeoff).
Operator propagate_piecewise(const SystemParams& params, const PulseWaveform& pulse,
                             int group = 1, DriveChannel channel = DriveChannel::qubit);

// 1 - |Tr(P U_target† U P)/d_eff|^2 on the qubit-ground Fock block 0..m,
// U_target = S(thetas) ⊗ |g><g|, d_eff = m+1.
double snap_gate_infidelity(const Operator& u, const RealVector& thetas, int cavity_dim);

// Infidelity-plus-leakage objective for a fixed qubit-drive envelope over the
// padded band, with its exact gradient wrt the envelope samples (entry k holds
// dO/dRe(gamma_k) + i dO/dIm(gamma_k)). Exposed so the analytic gradient can
// be verified against finite differences.
double snap_pulse_objective(const PulseWaveform& pulse, const RealVector& thetas,
                            const SystemParams& params, int band_padding,
                            double leakage_weight, Vector* grad_gamma = nullptr);

struct GrapeOptions {
  int max_iters = 2500;
  int restarts = 3;
  double learning_rate = 0.03;     // dimensionless (parameters are in rabi_max units)
  double target_infidelity = 5e-5; // early stop
  double fail_threshold = 0.05;
  int band_padding = 4;            // zero-phase guard levels above the addressed band
  double leakage_weight = 0.1;
  double init_scale = 0.15;        // initial waveform scale, fraction of rabi_max
};

struct GrapeResult {
  PulseWaveform pulse;
  double infidelity = 1.0;         // over the padded band, from full joint propagation
  RealVector thetas_padded;
  std::vector<double> trace;       // objective per iteration, winning restart
  int iterations = 0;
  bool converged = false;
};

struct GrapeFailure : std::runtime_error {
  GrapeResult best;
  GrapeFailure(const std::string& msg, GrapeResult b)
      : std::runtime_error(msg), best(std::move(b)) {}
};

// Piecewise-constant control synthesis for S(thetas) under the dispersive
// Hamiltonian. Amplitude and bandwidth constraints hold by construction:
// optimizer variables pass through a radial tanh squash (headroom
// rabi_max/||h||_1) and a windowed-sinc FIR h. Gradients are exact
// (per-Fock-level 2x2 Fréchet derivatives; the qubit drive conserves photon
// number, so levels evolve independently).
GrapeResult grape_optimize(const RealVector& thetas, const SystemParams& params,
                           const PulseConstraints& constraints, std::uint64_t seed,
                           const GrapeOptions& options = {});

enum class SnapEnvelope { sin2, square };

// Frequency-comb SNAP: one line per Fock level j at that level's qubit
// transition (-chi*j plus the chi' shift); each line is two consecutive pi
// pulses of half the duration, the second with axis rotated to pi - theta_j;
// per-line amplitude set by the pi-area theorem for the envelope. The
// deterministic phases a real instrument calibrates out -- cavity self-phase
// over the gate and the Stark phases from neighbouring lines -- are folded
// into the applied axes against the nominal params. What remains is the
// genuine selectivity error, which shrinks with duration.
PulseWaveform standard_snap_pulse(const RealVector& thetas, const SystemParams& params,
                                  double duration, SnapEnvelope envelope = SnapEnvelope::sin2);

// Resonant cavity drive, sin^2 envelope: eps(t) = calibration * i * alpha * (2/T) sin^2(pi t/T),
// which integrates to D(alpha) in the decoupled limit (alpha' = -i eps).
PulseWaveform displacement_pulse(Complex alpha, double calibration = 1.0,
                                 double duration = 50e-9, double sample_rate = 1e9);

// Hamming-windowed-sinc lowpass taps (unit DC gain). The -6 dB design
// frequency is placed half a transition band below `cutoff` so that
// attenuation at `cutoff` itself is already in the stopband.
RealVector fir_lowpass_taps(double cutoff, double sample_rate, int taps);

}  // namespace snapkit
