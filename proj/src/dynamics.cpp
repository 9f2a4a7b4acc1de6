#include "snapkit/dynamics.hpp"

#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <utility>

#include "snapkit/fock.hpp"
#include "snapkit/rng.hpp"

namespace snapkit {

namespace {

double rate_of(double t) { return (std::isfinite(t) && t > 0.0) ? 1.0 / t : 0.0; }

using Sparse = Eigen::SparseMatrix<Complex>;

// ---------- structured joint-space operators ----------

struct JointOps {
  Vector ediag;  // static Hamiltonian diagonal
  Vector damp;   // (r1c n_c + (r1q + rphi) n_q) / 2, anticommutator half
  Vector nq;     // qubit excitation diagonal
  Sparse a, ad, b, bd;
  double r1c = 0.0, r1q = 0.0, rphi = 0.0;
  int dim = 0;

  JointOps(const SystemParams& p, const CoherenceParams& coh, bool include_static) {
    const int dc = p.cavity_dim;
    dim = 2 * dc;
    r1c = rate_of(coh.t1_cavity);
    r1q = rate_of(coh.t1_qubit);
    rphi = rate_of(coh.t_phi());
    ediag = include_static ? Vector(hamiltonian(p, 0.0).elements.diagonal())
                           : Vector(Vector::Zero(dim));
    damp.resize(dim);
    nq.resize(dim);
    for (int n = 0; n < dc; ++n)
      for (int q = 0; q < 2; ++q) {
        nq(2 * n + q) = q;
        damp(2 * n + q) = 0.5 * (r1c * n + (r1q + rphi) * q);
      }
    a.resize(dim, dim);
    ad.resize(dim, dim);
    b.resize(dim, dim);
    bd.resize(dim, dim);
    std::vector<Eigen::Triplet<Complex>> ta, tad, tb, tbd;
    for (int n = 0; n + 1 < dc; ++n) {
      Complex s(std::sqrt(n + 1.0), 0.0);
      for (int q = 0; q < 2; ++q) {
        ta.emplace_back(2 * n + q, 2 * (n + 1) + q, s);
        tad.emplace_back(2 * (n + 1) + q, 2 * n + q, s);
      }
    }
    for (int n = 0; n < dc; ++n) {
      tb.emplace_back(2 * n, 2 * n + 1, Complex(1, 0));
      tbd.emplace_back(2 * n + 1, 2 * n, Complex(1, 0));
    }
    a.setFromTriplets(ta.begin(), ta.end());
    ad.setFromTriplets(tad.begin(), tad.end());
    b.setFromTriplets(tb.begin(), tb.end());
    bd.setFromTriplets(tbd.begin(), tbd.end());
  }

  // -i[H, rho] + r1c D[a] + r1q D[b] + rphi D[b†b]
  Matrix lindblad(const Matrix& rho, Complex g, Complex e) const {
    Matrix hr = ediag.asDiagonal() * rho;
    Matrix rh = rho * ediag.asDiagonal();
    if (g != Complex(0, 0)) {
      hr += g * (bd * rho) + std::conj(g) * (b * rho);
      rh += g * (rho * bd) + std::conj(g) * (rho * b);
    }
    if (e != Complex(0, 0)) {
      hr += e * (ad * rho) + std::conj(e) * (a * rho);
      rh += e * (rho * ad) + std::conj(e) * (rho * a);
    }
    Matrix out = Complex(0, -1) * (hr - rh);
    out -= damp.asDiagonal() * rho + rho * damp.asDiagonal();
    if (r1c > 0) out += r1c * Matrix(a * rho * ad);
    if (r1q > 0) out += r1q * Matrix(b * rho * bd);
    if (rphi > 0) out += rphi * Matrix(nq.asDiagonal() * rho * nq.asDiagonal());
    return out;
  }

  // Heisenberg picture: +i[H, O] + sum_L L† O L - {L†L, O}/2
  Matrix adjoint(const Matrix& o, Complex g, Complex e) const {
    Matrix ho = ediag.asDiagonal() * o;
    Matrix oh = o * ediag.asDiagonal();
    if (g != Complex(0, 0)) {
      ho += g * (bd * o) + std::conj(g) * (b * o);
      oh += g * (o * bd) + std::conj(g) * (o * b);
    }
    if (e != Complex(0, 0)) {
      ho += e * (ad * o) + std::conj(e) * (a * o);
      oh += e * (o * ad) + std::conj(e) * (o * a);
    }
    Matrix out = Complex(0, 1) * (ho - oh);
    out -= damp.asDiagonal() * o + o * damp.asDiagonal();
    if (r1c > 0) out += r1c * Matrix(ad * o * a);
    if (r1q > 0) out += r1q * Matrix(bd * o * b);
    if (rphi > 0) out += rphi * Matrix(nq.asDiagonal() * o * nq.asDiagonal());
    return out;
  }

  Vector hpsi(const Vector& v, Complex g, Complex e) const {
    Vector out = ediag.cwiseProduct(v);
    if (g != Complex(0, 0)) out += g * (bd * v) + std::conj(g) * (b * v);
    if (e != Complex(0, 0)) out += e * (ad * v) + std::conj(e) * (a * v);
    return out;
  }
};

// ---------- piecewise-constant drive timeline ----------

struct Timeline {
  std::vector<double> edges;  // ascending breakpoints, edges.size() == size()+1
  std::vector<Complex> gamma, eps;
  int size() const { return static_cast<int>(gamma.size()); }
};

Timeline build_timeline(const PulseSchedule& sched, const std::vector<double>& extra) {
  double total = sched.duration();
  for (double t : extra) total = std::max(total, t);
  std::vector<double> edges{0.0, total};
  for (const auto& it : sched.items) {
    if (it.start < -1e-12) throw std::invalid_argument("schedule: negative start time");
    const double dt = it.pulse.dt();
    for (int k = 0; k <= it.pulse.size(); ++k) edges.push_back(it.start + k * dt);
  }
  for (double t : extra) {
    if (t < -1e-12 || t > total + 1e-12)
      throw std::invalid_argument("schedule: snapshot time outside [0, duration]");
    edges.push_back(std::clamp(t, 0.0, total));
  }
  std::sort(edges.begin(), edges.end());
  std::vector<double> uniq;
  for (double t : edges)
    if (uniq.empty() || t - uniq.back() > 1e-13) uniq.push_back(t);
  Timeline tl;
  tl.edges = std::move(uniq);
  const int m = std::max<int>(0, static_cast<int>(tl.edges.size()) - 1);
  tl.gamma.assign(m, Complex(0, 0));
  tl.eps.assign(m, Complex(0, 0));
  for (int i = 0; i < m; ++i) {
    double tm = 0.5 * (tl.edges[i] + tl.edges[i + 1]);
    for (const auto& it : sched.items) {
      double local = tm - it.start;
      if (local < 0.0 || local >= it.pulse.duration()) continue;
      int k = std::min(it.pulse.size() - 1, static_cast<int>(local * it.pulse.sample_rate));
      // carriers are referenced to the pulse's own start (phase-reset per pulse)
      Complex v = it.pulse.samples(k) * std::exp(Complex(0, it.pulse.carrier * local));
      (it.channel == DriveChannel::qubit ? tl.gamma[i] : tl.eps[i]) += v;
    }
  }
  return tl;
}

// ---------- embedded Dormand-Prince 5(4) ----------

template <class Rhs>
void rk45(const Rhs& f, Matrix& y, double span, double tol, double& h) {
  if (span <= 0.0) return;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  double t = 0.0;
  h = std::clamp(h, 1e-15, span);
  while (t < span * (1.0 - 1e-14)) {
    h = std::min(h, span - t);
    Matrix k1 = f(y);
    Matrix k2 = f(Matrix(y + (h * a21) * k1));
    Matrix k3 = f(Matrix(y + h * (a31 * k1 + a32 * k2)));
    Matrix k4 = f(Matrix(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    Matrix k5 = f(Matrix(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    Matrix k6 = f(Matrix(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    Matrix y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Matrix k7 = f(y5);
    double errn =
        (h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)).cwiseAbs().maxCoeff();
    double ynorm = std::max(y.cwiseAbs().maxCoeff(), y5.cwiseAbs().maxCoeff());
    double ratio = errn / (1e-14 + tol * std::max(ynorm, 1e-8));
    if (ratio <= 1.0) {
      y.swap(y5);
      t += h;
    }
    double fac = (ratio <= 1e-12) ? 5.0 : 0.9 * std::pow(ratio, -0.2);
    h *= std::clamp(fac, 0.2, 5.0);
    if (h < 1e-16) throw NumericalFailure("rk45: step size underflow");
  }
}

Matrix hermitized(const Matrix& m) { return 0.5 * (m + Matrix(m.adjoint())); }

}  // namespace

// ---------- coherence ----------

double CoherenceParams::t_phi() const {
  double r = rate_of(t2_qubit) - 0.5 * rate_of(t1_qubit);
  return r > 0.0 ? 1.0 / r : std::numeric_limits<double>::infinity();
}

void CoherenceParams::validate() const {
  if (!(t1_qubit > 0) || !(t2_qubit > 0) || !(t1_cavity > 0))
    throw ConfigError("CoherenceParams: times must be positive");
  if (rate_of(t2_qubit) < 0.5 * rate_of(t1_qubit) * (1.0 - 1e-12))
    throw ConfigError("CoherenceParams: t2_qubit may not exceed 2 t1_qubit");
}

double PulseSchedule::duration() const {
  double end = 0.0;
  for (const auto& it : items) end = std::max(end, it.start + it.pulse.duration());
  return end;
}

// ---------- master equation ----------

EvolutionResult lindblad_evolve(const Matrix& rho0, const SystemParams& params,
                                const CoherenceParams& coh, const PulseSchedule& schedule,
                                const EvolveOptions& options) {
  params.validate();
  coh.validate();
  const int d = 2 * params.cavity_dim;
  if (rho0.rows() != d || rho0.cols() != d)
    throw std::invalid_argument("lindblad_evolve: rho0 must be 2*cavity_dim square");
  if (std::abs(rho0.trace() - Complex(1, 0)) > 1e-8)
    throw std::invalid_argument("lindblad_evolve: rho0 must have unit trace");
  for (std::size_t i = 0; i + 1 < options.snapshot_times.size(); ++i)
    if (options.snapshot_times[i] > options.snapshot_times[i + 1])
      throw std::invalid_argument("lindblad_evolve: snapshot times must be ascending");

  JointOps ops(params, coh, options.include_static_hamiltonian);
  Timeline tl = build_timeline(schedule, options.snapshot_times);

  EvolutionResult res;
  Matrix rho = rho0;
  res.times.push_back(0.0);
  res.traces.push_back(rho.trace().real());
  std::size_t next_snap = 0;
  auto take_snapshots = [&](double t) {
    while (next_snap < options.snapshot_times.size() &&
           options.snapshot_times[next_snap] <= t + 1e-13) {
      res.snapshots.push_back(hermitized(rho));
      ++next_snap;
    }
  };
  take_snapshots(0.0);

  double h = 1e-9;
  for (int i = 0; i < tl.size(); ++i) {
    const Complex g = tl.gamma[i], e = tl.eps[i];
    auto f = [&](const Matrix& y) { return ops.lindblad(y, g, e); };
    rk45(f, rho, tl.edges[i + 1] - tl.edges[i], options.tol, h);
    double tr = rho.trace().real();
    res.times.push_back(tl.edges[i + 1]);
    res.traces.push_back(tr);
    if (std::abs(tr - 1.0) > 1e-5)
      throw NumericalFailure("lindblad_evolve: trace drift exceeds 1e-5");
    take_snapshots(tl.edges[i + 1]);
  }
  res.final_state = hermitized(rho);
  return res;
}

Matrix lindblad_adjoint_map(const Matrix& obs, const SystemParams& params,
                            const CoherenceParams& coh, const PulseSchedule& schedule,
                            double tol) {
  params.validate();
  coh.validate();
  const int d = 2 * params.cavity_dim;
  if (obs.rows() != d || obs.cols() != d)
    throw std::invalid_argument("lindblad_adjoint_map: obs must be 2*cavity_dim square");
  JointOps ops(params, coh, true);
  Timeline tl = build_timeline(schedule, {});
  Matrix o = obs;
  double h = 1e-9;
  // Tr[E(rho) O] = Tr[rho E†(O)]: the adjoint generator is integrated over the
  // time-reversed drive timeline
  for (int i = tl.size() - 1; i >= 0; --i) {
    const Complex g = tl.gamma[i], e = tl.eps[i];
    auto f = [&](const Matrix& y) { return ops.adjoint(y, g, e); };
    rk45(f, o, tl.edges[i + 1] - tl.edges[i], tol, h);
  }
  return hermitized(o);
}

// ---------- closed-system fast path ----------

Vector closed_evolve(const SystemParams& params, const PulseSchedule& schedule, Vector psi,
                     bool include_static_hamiltonian) {
  params.validate();
  const int d = 2 * params.cavity_dim;
  if (psi.size() != d)
    throw std::invalid_argument("closed_evolve: psi must have size 2*cavity_dim");
  JointOps ops(params, CoherenceParams::none(), include_static_hamiltonian);
  Timeline tl = build_timeline(schedule, {});
  for (int i = 0; i < tl.size(); ++i) {
    const double dt = tl.edges[i + 1] - tl.edges[i];
    const Complex g = tl.gamma[i], e = tl.eps[i];
    if (g == Complex(0, 0) && e == Complex(0, 0)) {
      for (int j = 0; j < d; ++j) psi(j) *= std::exp(Complex(0, -ops.ediag(j).real() * dt));
      continue;
    }
    // exp(-i H dt) psi by truncated Taylor; exact at these step sizes
    Vector term = psi, acc = psi;
    const double base = psi.norm();
    bool converged = false;
    for (int k = 1; k <= 80; ++k) {
      term = (Complex(0, -dt) / static_cast<double>(k)) * ops.hpsi(term, g, e);
      acc += term;
      if (term.norm() <= 1e-16 * base) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw NumericalFailure("closed_evolve: exponential series did not converge");
    psi.swap(acc);
  }
  return psi;
}

// ---------- joint-space helpers ----------

Matrix trace_out_qubit(const Matrix& joint) {
  if (joint.rows() != joint.cols() || joint.rows() % 2 != 0)
    throw std::invalid_argument("trace_out_qubit: need even square matrix");
  const int dc = static_cast<int>(joint.rows()) / 2;
  Matrix out(dc, dc);
  for (int n = 0; n < dc; ++n)
    for (int m = 0; m < dc; ++m) out(n, m) = joint(2 * n, 2 * m) + joint(2 * n + 1, 2 * m + 1);
  return out;
}

Matrix kron_cavity(const Matrix& cavity_op) {
  const int dc = static_cast<int>(cavity_op.rows());
  if (cavity_op.cols() != dc) throw std::invalid_argument("kron_cavity: need square operator");
  Matrix out = Matrix::Zero(2 * dc, 2 * dc);
  for (int n = 0; n < dc; ++n)
    for (int m = 0; m < dc; ++m)
      for (int q = 0; q < 2; ++q) out(2 * n + q, 2 * m + q) = cavity_op(n, m);
  return out;
}

Matrix kron_qubit(const Matrix& qubit_op, int cavity_dim) {
  if (qubit_op.rows() != 2 || qubit_op.cols() != 2)
    throw std::invalid_argument("kron_qubit: need a 2x2 operator");
  Matrix out = Matrix::Zero(2 * cavity_dim, 2 * cavity_dim);
  for (int n = 0; n < cavity_dim; ++n)
    for (int q = 0; q < 2; ++q)
      for (int r = 0; r < 2; ++r) out(2 * n + q, 2 * n + r) = qubit_op(q, r);
  return out;
}

// ---------- sequence realization ----------

PulseSchedule build_schedule(const GateSequence& seq, const std::vector<PulseWaveform>& snap_pulses,
                             double disp_duration, const ExecutionPerturbation& pert) {
  seq.validate();
  if (snap_pulses.size() != seq.snaps.size())
    throw std::invalid_argument("build_schedule: need one waveform per SNAP");
  PulseSchedule out;
  double t = 0.0;
  const std::size_t nd = seq.displacements.size();
  for (std::size_t i = 0; i < nd; ++i) {
    if (!(i + 1 == nd && seq.displacements[i] == Complex(0, 0))) {
      PulseWaveform p = displacement_pulse(seq.displacements[i], 1.0, disp_duration);
      p.samples *= pert.disp_scale;
      out.items.push_back({DriveChannel::cavity, t, std::move(p)});
      t += disp_duration;
    }
    if (i < seq.snaps.size()) {
      PulseWaveform p = snap_pulses[i];
      p.samples *= pert.snap_scale;
      p.carrier += pert.snap_carrier;
      double dur = p.duration();
      out.items.push_back({DriveChannel::qubit, t, std::move(p)});
      t += dur;
    }
  }
  return out;
}

namespace {

Matrix dissipative_idle(Matrix rho, const SystemParams& params, const CoherenceParams& coh,
                        double span, double tol) {
  if (span <= 0.0) return rho;
  JointOps ops(params, coh, false);
  auto f = [&](const Matrix& y) { return ops.lindblad(y, Complex(0, 0), Complex(0, 0)); };
  double h = std::min(span, 1e-8);
  rk45(f, rho, span, tol, h);
  return rho;
}

double pure_state_fidelity(const Matrix& rho_c, const StateVector& target) {
  const StateVector t = target.resized(static_cast<int>(rho_c.rows()));
  return std::real(t.amplitudes().dot(rho_c * t.amplitudes()));
}

}  // namespace

SequenceSimResult simulate_sequence(const StateVector& target, const GateSequence& seq,
                                    const SystemParams& params, const CoherenceParams& coh,
                                    const SequenceSimOptions& options) {
  params.validate();
  seq.validate();
  coh.validate();
  const int dc = params.cavity_dim;
  SequenceSimResult res;

  std::vector<StateVector> ideal;
  if (options.record_gate_snapshots) ideal = snapshot_states(seq, dc);

  if (options.pulse_level) {
    std::vector<PulseWaveform> pulses = options.snap_pulses;
    if (pulses.empty()) {
      for (std::size_t i = 0; i < seq.snaps.size(); ++i) {
        GrapeResult r = grape_optimize(seq.snaps[i], params, options.constraints,
                                       derive_seed(options.seed, 1000 + i), options.grape);
        pulses.push_back(r.pulse);
        res.snap_synthesis.push_back(std::move(r));
      }
    } else if (pulses.size() != seq.snaps.size()) {
      throw std::invalid_argument("simulate_sequence: need one waveform per SNAP");
    }
    res.schedule = build_schedule(seq, pulses, options.disp_duration);

    EvolveOptions eo;
    if (options.record_gate_snapshots)
      for (const auto& it : res.schedule.items)
        eo.snapshot_times.push_back(it.start + it.pulse.duration());
    Matrix rho0 = Matrix::Zero(2 * dc, 2 * dc);
    rho0(0, 0) = 1.0;
    EvolutionResult er = lindblad_evolve(rho0, params, coh, res.schedule, eo);
    res.final_joint = er.final_state;
    res.final_cavity = trace_out_qubit(er.final_state);
    for (const Matrix& s : er.snapshots) res.gate_states.push_back(trace_out_qubit(s));
  } else {
    // ideal instantaneous gates, decoherence as dissipator-only idles split
    // around each gate
    Matrix rho = Matrix::Zero(2 * dc, 2 * dc);
    rho(0, 0) = 1.0;
    const double tol = 1e-8;
    const std::size_t nd = seq.displacements.size();
    for (std::size_t i = 0; i < nd; ++i) {
      if (!(i + 1 == nd && seq.displacements[i] == Complex(0, 0))) {
        Matrix g = kron_cavity(displacement_operator(seq.displacements[i], dc).elements);
        rho = dissipative_idle(std::move(rho), params, coh, 0.5 * options.disp_duration, tol);
        rho = g * rho * g.adjoint();
        rho = dissipative_idle(std::move(rho), params, coh, 0.5 * options.disp_duration, tol);
        if (options.record_gate_snapshots) res.gate_states.push_back(trace_out_qubit(rho));
      }
      if (i < seq.snaps.size()) {
        Matrix g = kron_cavity(snap_unitary(seq.snaps[i], dc).elements);
        double half = 0.5 * options.constraints.duration;
        rho = dissipative_idle(std::move(rho), params, coh, half, tol);
        rho = g * rho * g.adjoint();
        rho = dissipative_idle(std::move(rho), params, coh, half, tol);
        if (options.record_gate_snapshots) res.gate_states.push_back(trace_out_qubit(rho));
      }
    }
    res.final_joint = rho;
    res.final_cavity = trace_out_qubit(rho);
  }

  res.fidelity = pure_state_fidelity(res.final_cavity, target);
  if (options.record_gate_snapshots) {
    for (std::size_t k = 0; k < res.gate_states.size() && k < ideal.size(); ++k)
      res.gate_fidelities.push_back(pure_state_fidelity(res.gate_states[k], ideal[k]));
  }
  return res;
}

double sequence_theory_fidelity(const StateVector& target, const GateSequence& seq,
                                const SystemParams& params, const CoherenceParams& coh,
                                bool pulse_level, const SequenceSimOptions& options) {
  SequenceSimOptions o = options;
  o.pulse_level = pulse_level;
  return simulate_sequence(target, seq, params, coh, o).fidelity;
}

// ---------- SNAP realization probes ----------

namespace {

// state infidelity of `pulse` against the ideal S(thetas), both acting on
// D(alpha)|0> x |g>
double pulse_state_infidelity(const PulseWaveform& pulse, const RealVector& thetas, Complex alpha,
                              const SystemParams& params) {
  const int dc = params.cavity_dim;
  Vector psic = displacement_operator(alpha, dc).elements.col(0);
  Vector psi = Vector::Zero(2 * dc);
  for (int n = 0; n < dc; ++n) psi(2 * n) = psic(n);
  PulseSchedule sched;
  sched.items.push_back({DriveChannel::qubit, 0.0, pulse});
  psi = closed_evolve(params, sched, psi);
  Vector ref = psic;
  for (int j = 0; j < thetas.size() && j < dc; ++j) ref(j) *= std::exp(Complex(0, thetas(j)));
  Complex ov(0, 0);
  for (int n = 0; n < dc; ++n) ov += std::conj(ref(n)) * psi(2 * n);
  return 1.0 - std::norm(ov);
}

}  // namespace

double comb_state_infidelity(const RealVector& thetas, Complex alpha, const SystemParams& params,
                             double duration, SnapEnvelope envelope, int band_padding) {
  if (thetas.size() < 1) throw DegenerateInput("comb_state_infidelity: empty phase vector");
  SystemParams p = params;
  const int band = static_cast<int>(thetas.size()) + std::max(band_padding, 0);
  p.cavity_dim = std::max(p.cavity_dim, band + 2);
  RealVector padded = RealVector::Zero(band);
  padded.head(thetas.size()) = thetas;
  PulseWaveform pulse = standard_snap_pulse(padded, p, duration, envelope);
  return pulse_state_infidelity(pulse, thetas, alpha, p);
}

// ---------- sensitivity sweeps ----------

namespace {

void compute_span(SweepCurve& c) {
  const int n = static_cast<int>(c.values.size());
  int imax = 0;
  for (int i = 1; i < n; ++i)
    if (c.values[i] > c.values[imax]) imax = i;
  const double vmax = c.values[imax];
  if (n < 2 || vmax <= 0.0) {
    c.span_low = c.offsets.front();
    c.span_high = c.offsets.back();
    c.span_extrapolated = true;
    return;
  }
  const double thresh = 0.99 * vmax;
  bool lo_found = false, hi_found = false;
  for (int i = imax; i > 0; --i) {
    if (c.values[i - 1] < thresh) {
      double f = (thresh - c.values[i - 1]) / (c.values[i] - c.values[i - 1]);
      c.span_low = c.offsets[i - 1] + f * (c.offsets[i] - c.offsets[i - 1]);
      lo_found = true;
      break;
    }
  }
  for (int i = imax; i + 1 < n; ++i) {
    if (c.values[i + 1] < thresh) {
      double f = (thresh - c.values[i]) / (c.values[i + 1] - c.values[i]);
      c.span_high = c.offsets[i] + f * (c.offsets[i + 1] - c.offsets[i]);
      hi_found = true;
      break;
    }
  }
  if (lo_found && hi_found) return;
  // curve does not drop below the threshold inside the window on one side:
  // extrapolate from a local quadratic fit around the peak
  c.span_extrapolated = true;
  const int w0 = std::max(0, imax - 2), w1 = std::min(n - 1, imax + 2);
  const int m = w1 - w0 + 1;
  Eigen::MatrixXd x(m, 3);
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    double t = c.offsets[w0 + i];
    x(i, 0) = 1.0;
    x(i, 1) = t;
    x(i, 2) = t * t;
    y(i) = c.values[w0 + i];
  }
  Eigen::Vector3d cf = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  if (cf(2) < -1e-300) {
    const double x0 = -cf(1) / (2.0 * cf(2));
    const double vp = cf(0) + cf(1) * x0 + cf(2) * x0 * x0;
    const double half = std::sqrt(std::max(0.01 * vp / -cf(2), 0.0));
    if (!lo_found) c.span_low = x0 - half;
    if (!hi_found) c.span_high = x0 + half;
  } else {
    if (!lo_found) c.span_low = c.offsets.front();
    if (!hi_found) c.span_high = c.offsets.back();
  }
}

}  // namespace

SweepCurve sensitivity_sweep(SweepParameter parameter, const std::vector<double>& offsets,
                             SweepObservable observable, SweepMode mode, const SweepContext& ctx) {
  ctx.params.validate();
  ctx.sequence.validate();
  ctx.coherence.validate();
  ctx.constraints.validate();
  if (offsets.empty()) throw DegenerateInput("sensitivity_sweep: need at least one offset");
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i)
    if (!(offsets[i] < offsets[i + 1]))
      throw DegenerateInput("sensitivity_sweep: offsets must be strictly increasing");
  if (ctx.sequence.snaps.empty())
    throw DegenerateInput("sensitivity_sweep: sequence has no SNAP gates");

  SweepCurve out;
  out.offsets = offsets;

  if (parameter == SweepParameter::duration) {
    if (observable != SweepObservable::fidelity)
      throw ConfigError("sensitivity_sweep: the duration study reports fidelity");
    const RealVector& th = ctx.sequence.snaps.front();
    const Complex alpha = ctx.sequence.displacements.front();
    for (double T : offsets) {
      if (T <= 0.0) throw ConfigError("sensitivity_sweep: durations must be positive");
      double v;
      if (mode == SweepMode::standard) {
        v = 1.0 - comb_state_infidelity(th, alpha, ctx.params, T);
      } else {
        PulseConstraints c = ctx.constraints;
        c.duration = T;
        PulseWaveform pulse;
        try {
          pulse = grape_optimize(th, ctx.params, c, derive_seed(ctx.seed, 1000), ctx.grape).pulse;
        } catch (const GrapeFailure& f) {
          pulse = f.best.pulse;  // short windows: report the best achievable
        }
        v = 1.0 - pulse_state_infidelity(pulse, th, alpha, ctx.params);
      }
      out.values.push_back(v);
    }
    compute_span(out);
    return out;
  }

  auto design_pulses = [&](const SystemParams& design) {
    std::vector<PulseWaveform> ps;
    for (std::size_t i = 0; i < ctx.sequence.snaps.size(); ++i) {
      const RealVector& th = ctx.sequence.snaps[i];
      if (mode == SweepMode::standard) {
        // comb lines cover a guard band above the addressed levels so that
        // deterministic Kerr phases on populated levels stay compensated
        int band = std::min(design.cavity_dim - 2,
                            static_cast<int>(th.size()) + 6);
        RealVector padded = RealVector::Zero(std::max<int>(band, th.size()));
        padded.head(th.size()) = th;
        ps.push_back(standard_snap_pulse(padded, design, ctx.standard_duration));
      } else {
        try {
          ps.push_back(grape_optimize(th, design, ctx.constraints,
                                      derive_seed(ctx.seed, 1000 + i), ctx.grape)
                           .pulse);
        } catch (const GrapeFailure& f) {
          ps.push_back(f.best.pulse);  // off-design synthesis may fall short
        }
      }
    }
    return ps;
  };

  std::vector<PulseWaveform> nominal;
  if (parameter != SweepParameter::chi) nominal = design_pulses(ctx.params);

  const int dc = ctx.params.cavity_dim;
  const StateVector tgt = ctx.target.resized(dc);

  for (double delta : offsets) {
    ExecutionPerturbation pert;
    std::vector<PulseWaveform> ps;
    switch (parameter) {
      case SweepParameter::chi: {
        SystemParams design = ctx.params;
        design.chi *= 1.0 + delta;
        ps = design_pulses(design);
        break;
      }
      case SweepParameter::f_snap:
        ps = nominal;
        // a tone shifted up by delta*chi rotates the drive envelope as
        // exp(-i delta chi t)
        pert.snap_carrier = -delta * ctx.params.chi;
        break;
      case SweepParameter::a_disp:
        ps = nominal;
        pert.disp_scale = 1.0 + delta;
        break;
      case SweepParameter::a_snap:
        ps = nominal;
        pert.snap_scale = 1.0 + delta;
        break;
      default:
        break;
    }
    PulseSchedule sched = build_schedule(ctx.sequence, ps, ctx.disp_duration, pert);
    double v = 0.0;
    if (!ctx.with_loss) {
      Vector psi = Vector::Zero(2 * dc);
      psi(0) = 1.0;
      psi = closed_evolve(ctx.params, sched, psi);
      if (observable == SweepObservable::w0) {
        double s = 0.0;
        for (int n = 0; n < dc; ++n) {
          double p = std::norm(psi(2 * n)) + std::norm(psi(2 * n + 1));
          s += (n % 2 == 0 ? p : -p);
        }
        v = (2.0 / kPi) * s;
      } else {
        Complex ag(0, 0), ae(0, 0);
        for (int n = 0; n < dc; ++n) {
          ag += std::conj(tgt.amplitude(n)) * psi(2 * n);
          ae += std::conj(tgt.amplitude(n)) * psi(2 * n + 1);
        }
        v = std::norm(ag) + std::norm(ae);
      }
    } else {
      Matrix rho0 = Matrix::Zero(2 * dc, 2 * dc);
      rho0(0, 0) = 1.0;
      Matrix rc = trace_out_qubit(lindblad_evolve(rho0, ctx.params, ctx.coherence, sched).final_state);
      if (observable == SweepObservable::w0) {
        double s = 0.0;
        for (int n = 0; n < dc; ++n) s += (n % 2 == 0 ? 1.0 : -1.0) * rc(n, n).real();
        v = (2.0 / kPi) * s;
      } else {
        v = pure_state_fidelity(rc, tgt);
      }
    }
    out.values.push_back(v);
  }
  compute_span(out);
  return out;
}

}  // namespace snapkit
