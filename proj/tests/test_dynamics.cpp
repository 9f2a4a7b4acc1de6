#include <cmath>
#include <complex>

#include "doctest.h"
#include "snapkit/dynamics.hpp"
#include "snapkit/rng.hpp"
#include "snapkit/targets.hpp"
#include "snapkit/wigner.hpp"
#include "test_util.hpp"

using namespace snapkit;
using namespace snapkit::testutil;

namespace {

SystemParams small_system(int cavity_dim) {
  SystemParams p;
  p.cavity_dim = cavity_dim;
  return p;
}

SystemParams bare_system(int cavity_dim) {
  SystemParams p = small_system(cavity_dim);
  p.chi = 0.0;
  p.chi_prime = 0.0;
  p.kerr = 0.0;
  return p;
}

PulseSchedule idle_schedule(double duration, int samples = 128) {
  PulseWaveform w;
  w.samples = Vector::Zero(samples);
  w.sample_rate = samples / duration;
  PulseSchedule s;
  s.items.push_back(ScheduledPulse{DriveChannel::qubit, 0.0, std::move(w)});
  return s;
}

Matrix pure_joint(const Vector& cavity, int qubit) {
  int dc = static_cast<int>(cavity.size());
  Vector psi = Vector::Zero(2 * dc);
  for (int n = 0; n < dc; ++n) psi(2 * n + qubit) = cavity(n);
  return psi * psi.adjoint();
}

}  // namespace

// ---------- coherence parameters ----------

TEST_CASE("pure dephasing time from T1/T2") {
  CoherenceParams coh;
  coh.validate();
  // 1/T_phi = 1/27us - 1/(2*35us)
  CHECK(std::abs(coh.t_phi() - 43.953e-6) <= 1e-3 * 43.953e-6);

  CoherenceParams none = CoherenceParams::none();
  none.validate();
  CHECK(std::isinf(none.t_phi()));

  CoherenceParams bad;
  bad.t2_qubit = 80e-6;  // > 2 T1
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = CoherenceParams{};
  bad.t1_cavity = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

// ---------- lindblad evolution ----------

TEST_CASE("single photon decays at e^{-t/T1c}") {
  SystemParams p = bare_system(4);
  CoherenceParams coh = CoherenceParams::none();
  coh.t1_cavity = 248e-6;
  double t = 0.5 * coh.t1_cavity;

  Matrix rho0 = pure_joint(fock_state(1, 4).amplitudes(), 0);
  EvolutionResult er = lindblad_evolve(rho0, p, coh, idle_schedule(t));

  double p1 = er.final_state(2, 2).real();  // |1,g>
  double p0 = er.final_state(0, 0).real();
  CHECK(std::abs(p1 - std::exp(-0.5)) <= 1e-4 * std::exp(-0.5));
  CHECK(std::abs(p0 - (1.0 - std::exp(-0.5))) <= 1e-4);

  for (double tr : er.traces) CHECK(std::abs(tr - 1.0) < 1e-6);
  DensityMatrix dm(er.final_state);  // hermiticity / trace / PSD gate
  CHECK(dm.dim() == 8);
}

TEST_CASE("zero-rate limit matches unitary propagation") {
  SystemParams p = small_system(4);
  PulseWaveform drive;
  drive.samples = Vector::Constant(200, Complex(kTwoPi * 0.5e6, 0.0));
  drive.sample_rate = 1e9;
  PulseSchedule sched;
  sched.items.push_back(ScheduledPulse{DriveChannel::qubit, 0.0, drive});

  Matrix rho0 = pure_joint(fock_state(0, 4).amplitudes(), 0);
  EvolutionResult er = lindblad_evolve(rho0, p, CoherenceParams::none(), sched);

  Operator u = propagate_piecewise(p, drive);
  Vector psi = u.elements.col(0);
  double f = fidelity(DensityMatrix(er.final_state), StateVector(psi));
  CHECK(f >= 1.0 - 1e-8);

  // closed-system fast path agrees with the dense propagator
  Vector psi0 = Vector::Zero(8);
  psi0(0) = 1.0;
  Vector fast = closed_evolve(p, sched, psi0);
  CHECK(std::abs(std::abs(fast.dot(psi.conjugate())) - 1.0) < 1e-10);
}

TEST_CASE("evolution snapshots and input validation") {
  SystemParams p = bare_system(3);
  CoherenceParams coh = CoherenceParams::none();
  coh.t1_cavity = 100e-6;
  Matrix rho0 = pure_joint(fock_state(1, 3).amplitudes(), 0);
  PulseSchedule sched = idle_schedule(10e-6);

  EvolveOptions opt;
  opt.snapshot_times = {5e-6, 10e-6};
  EvolutionResult er = lindblad_evolve(rho0, p, coh, sched, opt);
  REQUIRE(er.snapshots.size() == 2);
  CHECK(std::abs(er.snapshots[0].trace().real() - 1.0) < 1e-6);
  CHECK(std::abs(er.snapshots[0](2, 2).real() - std::exp(-0.05)) <= 1e-4);
  CHECK((er.snapshots[1] - er.final_state).cwiseAbs().maxCoeff() < 1e-8);

  EvolveOptions bad;
  bad.snapshot_times = {20e-6};  // outside the schedule
  CHECK_THROWS_AS(lindblad_evolve(rho0, p, coh, sched, bad), std::invalid_argument);
  Matrix odd = Matrix::Identity(5, 5);
  CHECK_THROWS_AS(lindblad_evolve(odd, p, coh, sched), std::invalid_argument);

  // empty schedule: no time passes
  EvolutionResult still = lindblad_evolve(rho0, p, coh, PulseSchedule{});
  CHECK((still.final_state - rho0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adjoint map is dual to the forward channel") {
  SystemParams p = small_system(4);
  CoherenceParams coh;  // full decoherence
  PulseWaveform drive;
  drive.samples = Vector::Constant(100, Complex(kTwoPi * 1e6, kTwoPi * 0.3e6));
  drive.sample_rate = 1e9;
  PulseSchedule sched;
  sched.items.push_back(ScheduledPulse{DriveChannel::qubit, 0.0, drive});

  Rng rng(7);
  Matrix m(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) m(i, j) = Complex(rng.normal(), rng.normal());
  Matrix rho = m * m.adjoint();
  rho /= rho.trace();
  Matrix obs = Matrix::Zero(8, 8);
  for (int i = 0; i < 8; ++i) obs(i, i) = rng.uniform(-1.0, 1.0);
  obs(1, 4) = Complex(0.3, 0.2);
  obs(4, 1) = Complex(0.3, -0.2);

  Complex lhs = (lindblad_evolve(rho, p, coh, sched).final_state * obs).trace();
  Complex rhs = (rho * lindblad_adjoint_map(obs, p, coh, sched)).trace();
  CHECK(std::abs(lhs - rhs) < 1e-6 * (1.0 + std::abs(lhs)));
}

// ---------- schedules ----------

TEST_CASE("schedule layout and perturbations") {
  GateSequence seq = fock2_sequence();
  std::vector<PulseWaveform> snaps(2);
  for (auto& w : snaps) {
    w.samples = Vector::Constant(100, Complex(1e6, 0.0));
    w.sample_rate = 1e9;
  }

  PulseSchedule sched = build_schedule(seq, snaps);
  REQUIRE(sched.items.size() == 5);  // D S D S D
  CHECK(sched.items[0].channel == DriveChannel::cavity);
  CHECK(sched.items[1].channel == DriveChannel::qubit);
  CHECK(sched.items[0].start == 0.0);
  // back-to-back, no gaps
  for (std::size_t i = 1; i < sched.items.size(); ++i) {
    double prev_end = sched.items[i - 1].start + sched.items[i - 1].pulse.duration();
    CHECK(std::abs(sched.items[i].start - prev_end) <= 1e-15);
  }
  CHECK(std::abs(sched.duration() - (3 * 50e-9 + 2 * 100e-9)) <= 1e-15);

  // trailing zero displacement is omitted
  GateSequence tail = seq;
  tail.displacements.back() = Complex(0, 0);
  CHECK(build_schedule(tail, snaps).items.size() == 4);

  // execution errors scale the waveforms / shift the SNAP carrier
  ExecutionPerturbation pert;
  pert.disp_scale = 1.1;
  pert.snap_scale = 0.9;
  pert.snap_carrier = kTwoPi * 1e5;
  PulseSchedule bent = build_schedule(seq, snaps, 50e-9, pert);
  CHECK(std::abs(bent.items[0].pulse.max_amplitude() -
                 1.1 * sched.items[0].pulse.max_amplitude()) <= 1e-6);
  CHECK(std::abs(bent.items[1].pulse.max_amplitude() -
                 0.9 * sched.items[1].pulse.max_amplitude()) <= 1e-6);
  CHECK(bent.items[1].pulse.carrier == kTwoPi * 1e5);
  CHECK(bent.items[0].pulse.carrier == 0.0);

  CHECK_THROWS_AS(build_schedule(seq, {snaps[0]}), std::invalid_argument);
}

// ---------- sequence fidelity predictions ----------

TEST_CASE("fock |2> preparation with measured coherences" * doctest::timeout(300)) {
  StateVector target = fock_state(2, 32);
  double f = sequence_theory_fidelity(target, fock2_sequence(), SystemParams{}, CoherenceParams{});
  CHECK(std::abs(f - 0.97) <= 0.01);
}

TEST_CASE("binomial per-gate snapshots with loss" * doctest::timeout(300)) {
  StateVector target = binomial_state(32);
  SequenceSimOptions opt;
  opt.record_gate_snapshots = true;
  SequenceSimResult r =
      simulate_sequence(target, binomial_sequence(), SystemParams{}, CoherenceParams{}, opt);
  REQUIRE(r.gate_fidelities.size() == 5);
  CHECK(std::abs(r.gate_fidelities[0] - 0.99) <= 0.01);
  CHECK(std::abs(r.gate_fidelities[1] - 0.98) <= 0.01);
  CHECK(std::abs(r.gate_fidelities[2] - 0.98) <= 0.01);
  CHECK(std::abs(r.gate_fidelities[3] - 0.97) <= 0.01);
  // last snapshot is the end of the sequence
  CHECK(std::abs(r.gate_fidelities[4] - r.fidelity) <= 1e-9);
  CHECK(r.gate_states.size() == 5);
  CHECK(r.snap_synthesis.size() == 2);

  // gate-level approximation lands close to the pulse-level prediction
  double gate_level = sequence_theory_fidelity(target, binomial_sequence(), SystemParams{},
                                               CoherenceParams{}, false);
  CHECK(std::abs(gate_level - r.fidelity) <= 0.02);
}

// ---------- sensitivity sweeps ----------

TEST_CASE("unperturbed optimized sequence keeps W(0) at the parity point" *
          doctest::timeout(300)) {
  SweepContext ctx{fock_state(2, 32), fock2_sequence(), SystemParams{}};
  SweepCurve c = sensitivity_sweep(SweepParameter::a_disp, {0.0}, SweepObservable::w0,
                                   SweepMode::optimized, ctx);
  REQUIRE(c.values.size() == 1);
  double w_ideal = 2.0 / kPi;  // Fock |2> is even
  CHECK(std::abs(c.values[0] - w_ideal) < 0.02 * w_ideal);
}

TEST_CASE("sensitivity curves are locally parabolic" * doctest::timeout(300)) {
  SweepContext ctx{fock_state(2, 32), fock2_sequence(), SystemParams{}};
  std::vector<double> offsets = {-0.02, -0.01, 0.0, 0.01, 0.02};
  SweepCurve c = sensitivity_sweep(SweepParameter::a_disp, offsets, SweepObservable::fidelity,
                                   SweepMode::standard, ctx);
  REQUIRE(c.values.size() == 5);

  // least-squares quadratic fit; residual <= 5% of the curve range
  Eigen::MatrixXd a(5, 3);
  Eigen::VectorXd y(5);
  for (int i = 0; i < 5; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = offsets[i];
    a(i, 2) = offsets[i] * offsets[i];
    y(i) = c.values[i];
  }
  Eigen::VectorXd fit = a.colPivHouseholderQr().solve(y);
  double range = y.maxCoeff() - y.minCoeff();
  REQUIRE(range > 0.0);
  double resid = (a * fit - y).cwiseAbs().maxCoeff();
  CHECK(resid <= 0.05 * range);
  CHECK(fit(2) < 0.0);  // concave: fidelity falls off both ways
}

TEST_CASE("sweep input validation") {
  SweepContext ctx{fock_state(2, 32), fock2_sequence(), SystemParams{}};
  CHECK_THROWS_AS(sensitivity_sweep(SweepParameter::chi, {}, SweepObservable::fidelity,
                                    SweepMode::optimized, ctx),
                  DegenerateInput);
  CHECK_THROWS_AS(sensitivity_sweep(SweepParameter::chi, {0.1, 0.0}, SweepObservable::fidelity,
                                    SweepMode::optimized, ctx),
                  DegenerateInput);
  CHECK_THROWS_AS(sensitivity_sweep(SweepParameter::duration, {1e-6}, SweepObservable::w0,
                                    SweepMode::standard, ctx),
                  ConfigError);
  SweepContext no_snaps{fock_state(0, 8), GateSequence{{Complex(1.0, 0.0)}, {}}, SystemParams{}};
  CHECK_THROWS_AS(sensitivity_sweep(SweepParameter::chi, {0.0}, SweepObservable::fidelity,
                                    SweepMode::optimized, no_snaps),
                  DegenerateInput);
}
