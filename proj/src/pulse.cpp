#include "snapkit/pulse.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "snapkit/rng.hpp"

namespace snapkit {

// ---------- waveform / constraints ----------

double PulseWaveform::max_amplitude() const {
  double m = 0.0;
  for (int k = 0; k < size(); ++k) m = std::max(m, std::abs(samples(k)));
  return m;
}

namespace {

std::vector<Complex> spectrum_of(const Vector& samples) {
  std::vector<Complex> in(samples.data(), samples.data() + samples.size());
  std::vector<Complex> out(in.size());
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  return out;
}

}  // namespace

double PulseWaveform::spectral_power_above(double cutoff) const {
  if (size() == 0) return 0.0;
  auto spec = spectrum_of(samples);
  const int n = static_cast<int>(spec.size());
  double above = 0.0, total = 0.0;
  for (int k = 0; k < n; ++k) {
    double f = static_cast<double>(k) / n * sample_rate;
    if (k > n / 2) f -= sample_rate;
    double p = std::norm(spec[k]);
    total += p;
    if (std::abs(f) * kTwoPi > cutoff) above += p;
  }
  return total > 0.0 ? above / total : 0.0;
}

void PulseConstraints::validate() const {
  if (rabi_max <= 0 || sample_rate <= 0 || lowpass_cutoff <= 0 || duration <= 0)
    throw std::invalid_argument("PulseConstraints: all fields must be positive");
  if (lowpass_cutoff >= kPi * sample_rate)  // Nyquist in angular units
    throw std::invalid_argument("PulseConstraints: cutoff must be below Nyquist");
  if (filter_taps < 8) throw std::invalid_argument("PulseConstraints: need >= 8 taps");
}

bool PulseConstraints::satisfied_by(const PulseWaveform& p) const {
  if (p.max_amplitude() > rabi_max * (1.0 + 1e-9)) return false;
  if (p.max_amplitude() == 0.0) return true;
  // >= 99% of the spectral power must sit below the cutoff; the per-frequency
  // stopband attenuation is a property of the filter taps, not of a finite
  // signal window whose truncation leakage would dominate a pointwise check
  return p.spectral_power_above(lowpass_cutoff) <= 1e-2;
}

void SystemParams::validate() const {
  if (cavity_dim < 2) throw std::invalid_argument("SystemParams: cavity_dim must be >= 2");
  for (double v : {chi, chi_prime, kerr, detuning_q, detuning_c, anharmonicity})
    if (!std::isfinite(v)) throw std::invalid_argument("SystemParams: non-finite entry");
}

// ---------- Hamiltonian / propagation ----------

namespace {

// diagonal energies of |n,g> and |n,e>
inline double level_g(const SystemParams& p, int n) {
  return -0.5 * p.kerr * n * (n - 1.0) + p.detuning_c * n;
}
inline double level_e(const SystemParams& p, int n) {
  return level_g(p, n) - p.chi * n - 0.5 * p.chi_prime * n * (n - 1.0) + p.detuning_q;
}

}  // namespace

Operator hamiltonian(const SystemParams& params, Complex gamma_qubit, Complex eps_cavity) {
  params.validate();
  const int dc = params.cavity_dim;
  Matrix h = Matrix::Zero(2 * dc, 2 * dc);
  for (int n = 0; n < dc; ++n) {
    h(2 * n, 2 * n) = level_g(params, n);
    h(2 * n + 1, 2 * n + 1) = level_e(params, n);
    // qubit drive: gamma |n,e><n,g| + h.c.
    h(2 * n + 1, 2 * n) = gamma_qubit;
    h(2 * n, 2 * n + 1) = std::conj(gamma_qubit);
  }
  for (int n = 0; n + 1 < dc; ++n) {
    double s = std::sqrt(n + 1.0);
    for (int q = 0; q < 2; ++q) {
      // cavity drive: eps a† + eps* a, acting on the cavity index
      h(2 * (n + 1) + q, 2 * n + q) += eps_cavity * s;
      h(2 * n + q, 2 * (n + 1) + q) += std::conj(eps_cavity) * s;
    }
  }
  return Operator{std::move(h), "H"};
}

Operator propagate_piecewise(const SystemParams& params, const PulseWaveform& pulse,
                             int group, DriveChannel channel) {
  params.validate();
  if (group < 1) throw std::invalid_argument("propagate_piecewise: group must be >= 1");
  const int dc = params.cavity_dim;
  const int d = 2 * dc;
  const double dt = pulse.dt();
  Matrix u = Matrix::Identity(d, d);
  int k = 0;
  while (k < pulse.size()) {
    int g = std::min(group, pulse.size() - k);
    Complex drive(0, 0);
    for (int j = 0; j < g; ++j) {
      double t = (k + j + 0.5) * dt;
      drive += pulse.samples(k + j) * std::exp(Complex(0, pulse.carrier * t));
    }
    drive /= static_cast<double>(g);
    Matrix h = channel == DriveChannel::qubit ? hamiltonian(params, drive).elements
                                              : hamiltonian(params, 0, drive).elements;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    Vector phases(d);
    for (int i = 0; i < d; ++i) phases(i) = std::exp(Complex(0, -es.eigenvalues()(i) * dt * g));
    u = (es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint() * u).eval();
    k += g;
  }
  double dev = (u.adjoint() * u - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  if (dev > 1e-9) throw NumericalFailure("propagate_piecewise: unitarity lost");
  return Operator{std::move(u), "U"};
}

double snap_gate_infidelity(const Operator& u, const RealVector& thetas, int cavity_dim) {
  if (u.dim() != 2 * cavity_dim)
    throw std::invalid_argument("snap_gate_infidelity: U must act on cavity x qubit");
  const int deff = static_cast<int>(thetas.size());
  if (deff < 1 || deff > cavity_dim)
    throw std::invalid_argument("snap_gate_infidelity: need 1 <= len(thetas) <= cavity_dim");
  Complex s(0, 0);
  for (int j = 0; j < deff; ++j)
    s += std::exp(Complex(0, -thetas(j))) * u.elements(2 * j, 2 * j);
  return 1.0 - std::norm(s / static_cast<double>(deff));
}

// ---------- FIR ----------

RealVector fir_lowpass_taps(double cutoff, double sample_rate, int taps) {
  if (taps < 2) throw std::invalid_argument("fir_lowpass_taps: need >= 2 taps");
  double cutoff_hz = cutoff / kTwoPi;
  // Hamming transition band ~= 3.3 fs / taps; put the -6 dB design point half a
  // transition below the constraint cutoff so the stopband starts at `cutoff`.
  double transition = 3.3 * sample_rate / taps;
  double fd = std::max(cutoff_hz - 0.5 * transition, 0.25 * cutoff_hz);
  double fc = fd / sample_rate;  // normalized
  RealVector h(taps);
  double c = 0.5 * (taps - 1);
  for (int i = 0; i < taps; ++i) {
    double x = i - c;
    double sinc = x == 0.0 ? 2.0 * fc : std::sin(kTwoPi * fc * x) / (kPi * x);
    double w = 0.54 - 0.46 * std::cos(kTwoPi * i / (taps - 1));
    h(i) = sinc * w;
  }
  h /= h.sum();
  return h;
}

// ---------- GRAPE ----------

namespace {

struct Level {
  double c0, cz;  // H_n = c0 I + cz sigma_z + Re(g) sigma_x + Im(g) sigma_y
};

using Vec2 = Eigen::Vector2cd;
using Row2 = Eigen::RowVector2cd;
using Mat2 = Eigen::Matrix2cd;

inline double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

// U = exp(-i (c0 I + c.sigma) dt)
inline Mat2 u2x2(double c0, double cx, double cy, double cz, double dt) {
  double w = std::sqrt(cx * cx + cy * cy + cz * cz);
  Complex ph = std::exp(Complex(0, -c0 * dt));
  double cs = std::cos(w * dt);
  double sn = sinc(w * dt) * dt;  // sin(w dt)/w
  Mat2 u;
  u(0, 0) = ph * (cs - Complex(0, sn * cz));
  u(1, 1) = ph * (cs + Complex(0, sn * cz));
  u(1, 0) = ph * Complex(0, -sn) * Complex(cx, cy);
  u(0, 1) = ph * Complex(0, -sn) * Complex(cx, -cy);
  return u;
}

struct SquashOut {
  Vector value;       // M * tanh-radial(y)
  Vector y;           // kept for the backward pass
};

Vector squash_forward(const Vector& y, double m) {
  Vector s(y.size());
  for (int k = 0; k < y.size(); ++k) {
    double r = std::abs(y(k));
    double f_over_r = r < 1e-9 ? 1.0 - r * r / 3.0 : std::tanh(r) / r;
    s(k) = m * f_over_r * y(k);
  }
  return s;
}

// gradient wrt y given gradient wrt squash output (complex = (d/dRe, d/dIm))
Vector squash_backward(const Vector& y, const Vector& grad_s, double m) {
  Vector g(y.size());
  for (int k = 0; k < y.size(); ++k) {
    double r = std::abs(y(k));
    double f_over_r, corr;
    if (r < 1e-6) {
      f_over_r = 1.0 - r * r / 3.0;
      corr = -2.0 / 3.0;
    } else {
      double th = std::tanh(r);
      f_over_r = th / r;
      double fp = 1.0 - th * th;
      corr = (fp - f_over_r) / (r * r);
    }
    double dot = y(k).real() * grad_s(k).real() + y(k).imag() * grad_s(k).imag();
    g(k) = m * (f_over_r * grad_s(k) + corr * dot * y(k));
  }
  return g;
}

Vector fir_forward(const Vector& p, const RealVector& h) {
  const int n = static_cast<int>(p.size()), t = static_cast<int>(h.size());
  const int c = (t - 1) / 2;
  Vector out = Vector::Zero(n);
  for (int k = 0; k < n; ++k) {
    Complex acc(0, 0);
    for (int j = 0; j < t; ++j) {
      int idx = k - j + c;
      if (idx >= 0 && idx < n) acc += h(j) * p(idx);
    }
    out(k) = acc;
  }
  return out;
}

Vector fir_backward(const Vector& grad_out, const RealVector& h) {
  const int n = static_cast<int>(grad_out.size()), t = static_cast<int>(h.size());
  const int c = (t - 1) / 2;
  Vector g = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    Complex acc(0, 0);
    for (int j = 0; j < t; ++j) {
      int idx = i + j - c;
      if (idx >= 0 && idx < n) acc += h(j) * grad_out(idx);
    }
    g(i) = acc;
  }
  return g;
}

struct BandObjective {
  std::vector<Level> levels;
  Vector weights;  // e^{-i theta_j} over the padded band
  double leakage_weight;
  double dt;

  int band() const { return static_cast<int>(levels.size()); }

  // objective and exact gradient wrt the physical samples gamma_k
  double eval(const Vector& gamma, double* raw_infidelity, Vector* grad_gamma) const {
    const int big_l = band();
    const int big_k = static_cast<int>(gamma.size());
    // forward pass: per-level 2-vectors from |g>, storing every step
    std::vector<std::vector<Vec2>> f(big_l, std::vector<Vec2>(big_k + 1));
    std::vector<std::vector<Mat2>> us;
    if (grad_gamma) us.assign(big_l, std::vector<Mat2>(big_k));
    for (int n = 0; n < big_l; ++n) {
      f[n][0] = Vec2(1, 0);
      for (int k = 0; k < big_k; ++k) {
        Mat2 u = u2x2(levels[n].c0, gamma(k).real(), gamma(k).imag(), levels[n].cz, dt);
        f[n][k + 1] = u * f[n][k];
        if (grad_gamma) us[n][k] = u;
      }
    }
    Vector amp(big_l);
    Complex s(0, 0);
    double leak = 0.0;
    for (int n = 0; n < big_l; ++n) {
      amp(n) = f[n][big_k](0);
      s += weights(n) * amp(n);
      leak += 1.0 - std::norm(amp(n));
    }
    double deff = big_l;
    double raw = 1.0 - std::norm(s / deff);
    leak /= deff;
    if (raw_infidelity) *raw_infidelity = raw;
    double obj = raw + leakage_weight * leak;
    if (!grad_gamma) return obj;

    // dO/d(amp_n), Wirtinger: O = 1 - S conj(S)/deff^2 + w/deff sum(1 - |amp|^2)
    Vector gn(big_l);
    for (int n = 0; n < big_l; ++n)
      gn(n) = -std::conj(s) * weights(n) / (deff * deff) -
              leakage_weight * std::conj(amp(n)) / deff;

    *grad_gamma = Vector::Zero(big_k);
    std::vector<Row2> r(big_l);
    for (int n = 0; n < big_l; ++n) r[n] = Row2(1, 0);  // <g|
    for (int k = big_k - 1; k >= 0; --k) {
      Complex gx(0, 0), gy(0, 0);  // dO/dRe(gamma_k), dO/dIm(gamma_k) accumulators
      for (int n = 0; n < big_l; ++n) {
        const double cx = gamma(k).real(), cy = gamma(k).imag(), cz = levels[n].cz;
        const double w = std::sqrt(cx * cx + cy * cy + cz * cz);
        const Complex ph = std::exp(Complex(0, -levels[n].c0 * dt));
        const Vec2& fv = f[n][k];
        const Row2& rv = r[n];
        Complex vx, vy;
        if (w * dt < 1e-7) {
          // H ~ c0 I: Frechet derivative collapses to -i dt e^{-i c0 dt} E
          Complex phi = Complex(0, -dt) * ph;
          vx = phi * (rv(0) * fv(1) + rv(1) * fv(0));
          vy = phi * Complex(0, 1) * (rv(1) * fv(0) - rv(0) * fv(1));
        } else {
          double nx = cx / w, ny = cy / w, nz = cz / w;
          Complex lp = std::exp(Complex(0, -w * dt)), lm = std::exp(Complex(0, w * dt));
          Complex fpp = Complex(0, -dt) * ph * lp;
          Complex fmm = Complex(0, -dt) * ph * lm;
          Complex fpm = Complex(0, -1.0) * ph * sinc(w * dt) * dt;
          // A_s = r P_s, B_s = P_s f with P± = (I ± n.sigma)/2
          Complex nsf0 = nz * fv(0) + Complex(nx, -ny) * fv(1);
          Complex nsf1 = Complex(nx, ny) * fv(0) - nz * fv(1);
          Vec2 bp(0.5 * (fv(0) + nsf0), 0.5 * (fv(1) + nsf1));
          Vec2 bm(0.5 * (fv(0) - nsf0), 0.5 * (fv(1) - nsf1));
          Complex rns0 = rv(0) * nz + rv(1) * Complex(nx, ny);
          Complex rns1 = rv(0) * Complex(nx, -ny) - rv(1) * nz;
          Row2 ap(0.5 * (rv(0) + rns0), 0.5 * (rv(1) + rns1));
          Row2 am(0.5 * (rv(0) - rns0), 0.5 * (rv(1) - rns1));
          auto pair_xy = [](const Row2& a, const Vec2& b, Complex& tx, Complex& ty) {
            Complex t1 = a(0) * b(1), t2 = a(1) * b(0);
            tx = t1 + t2;
            ty = Complex(0, 1) * (t2 - t1);
          };
          Complex xpp, ypp, xmm, ymm, xpm, ypm, xmp, ymp;
          pair_xy(ap, bp, xpp, ypp);
          pair_xy(am, bm, xmm, ymm);
          pair_xy(ap, bm, xpm, ypm);
          pair_xy(am, bp, xmp, ymp);
          vx = fpp * xpp + fmm * xmm + fpm * (xpm + xmp);
          vy = fpp * ypp + fmm * ymm + fpm * (ypm + ymp);
        }
        gx += gn(n) * vx;
        gy += gn(n) * vy;
        r[n] = rv * us[n][k];
      }
      (*grad_gamma)(k) = Complex(2.0 * gx.real(), 2.0 * gy.real());
    }
    return obj;
  }
};

struct GrapeRun {
  Vector y;
  double raw = 1.0;
  double objective = 1.0;
  std::vector<double> trace;
  int iterations = 0;
};

GrapeRun run_grape_restart(Vector y0, const BandObjective& bo, const RealVector& h, double m,
                           int max_iters, double lr0, double target) {
  GrapeRun out;
  Vector y = std::move(y0);
  const int k2 = 2 * static_cast<int>(y.size());
  RealVector mom = RealVector::Zero(k2), vel = RealVector::Zero(k2);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int it = 0; it < max_iters; ++it) {
    Vector p = squash_forward(y, m);
    Vector gamma = fir_forward(p, h);
    double raw;
    Vector ggamma;
    double obj = bo.eval(gamma, &raw, &ggamma);
    out.trace.push_back(obj);
    out.raw = raw;
    out.objective = obj;
    out.iterations = it + 1;
    if (raw <= target) break;
    Vector gp = fir_backward(ggamma, h);
    Vector gy = squash_backward(y, gp, m);
    double lr = lr0 * 0.5 * (1.0 + std::cos(kPi * it / std::max(1, max_iters)));
    for (int i = 0; i < y.size(); ++i) {
      for (int c = 0; c < 2; ++c) {
        int j = 2 * i + c;
        double g = c == 0 ? gy(i).real() : gy(i).imag();
        mom(j) = b1 * mom(j) + (1 - b1) * g;
        vel(j) = b2 * vel(j) + (1 - b2) * g * g;
        double mh = mom(j) / (1 - std::pow(b1, it + 1));
        double vh = vel(j) / (1 - std::pow(b2, it + 1));
        double step = lr * mh / (std::sqrt(vh) + eps);
        if (c == 0)
          y(i) -= Complex(step, 0);
        else
          y(i) -= Complex(0, step);
      }
    }
    // long-stagnation escape: the cosine tail cannot fix a dead restart
    int lag = 400;
    if (it > lag && out.trace[it - lag] - obj < 1e-13) break;
  }
  // refresh to match final parameters
  Vector gamma = fir_forward(squash_forward(y, m), h);
  out.objective = bo.eval(gamma, &out.raw, nullptr);
  out.y = std::move(y);
  return out;
}

}  // namespace

double snap_pulse_objective(const PulseWaveform& pulse, const RealVector& thetas,
                            const SystemParams& params, int band_padding,
                            double leakage_weight, Vector* grad_gamma) {
  params.validate();
  if (thetas.size() < 1) throw std::invalid_argument("snap_pulse_objective: empty theta vector");
  if (band_padding < 0) throw std::invalid_argument("snap_pulse_objective: bad band_padding");
  if (pulse.samples.size() < 1 || pulse.sample_rate <= 0)
    throw std::invalid_argument("snap_pulse_objective: bad pulse");

  const int band = static_cast<int>(thetas.size()) + band_padding;
  RealVector padded = RealVector::Zero(band);
  padded.head(thetas.size()) = thetas;
  for (int j = 0; j < padded.size(); ++j) padded(j) = wrap_phase(padded(j));

  BandObjective bo;
  bo.dt = 1.0 / pulse.sample_rate;
  bo.leakage_weight = leakage_weight;
  bo.weights = Vector(band);
  for (int j = 0; j < band; ++j) bo.weights(j) = std::exp(Complex(0, -padded(j)));
  bo.levels.resize(band);
  for (int n = 0; n < band; ++n) {
    double eg = level_g(params, n), ee = level_e(params, n);
    bo.levels[n] = Level{0.5 * (eg + ee), 0.5 * (eg - ee)};
  }
  return bo.eval(pulse.samples, nullptr, grad_gamma);
}

GrapeResult grape_optimize(const RealVector& thetas, const SystemParams& params,
                           const PulseConstraints& constraints, std::uint64_t seed,
                           const GrapeOptions& options) {
  params.validate();
  constraints.validate();
  if (thetas.size() < 1) throw std::invalid_argument("grape_optimize: empty theta vector");
  if (options.band_padding < 0) throw std::invalid_argument("grape_optimize: bad band_padding");

  const int band = static_cast<int>(thetas.size()) + options.band_padding;
  RealVector padded = RealVector::Zero(band);
  padded.head(thetas.size()) = thetas;
  for (int j = 0; j < padded.size(); ++j) padded(j) = wrap_phase(padded(j));

  const int nk = static_cast<int>(std::lround(constraints.duration * constraints.sample_rate));
  if (nk < 2) throw std::invalid_argument("grape_optimize: duration too short for sample rate");
  const double dt = 1.0 / constraints.sample_rate;

  BandObjective bo;
  bo.dt = dt;
  bo.leakage_weight = options.leakage_weight;
  bo.weights = Vector(band);
  for (int j = 0; j < band; ++j) bo.weights(j) = std::exp(Complex(0, -padded(j)));
  bo.levels.resize(band);
  for (int n = 0; n < band; ++n) {
    double eg = level_g(params, n), ee = level_e(params, n);
    bo.levels[n] = Level{0.5 * (eg + ee), 0.5 * (eg - ee)};
  }

  RealVector h = fir_lowpass_taps(constraints.lowpass_cutoff, constraints.sample_rate,
                                  constraints.filter_taps);
  const double m = constraints.rabi_max / h.cwiseAbs().sum();
  const double y_scale = options.init_scale * constraints.rabi_max / m;

  GrapeRun best;
  int best_r = -1, iterations = 0;
  for (int r = 0; r < options.restarts; ++r) {
    Vector y0 = Vector::Zero(nk);
    if (r > 0) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      for (int k = 0; k < nk; ++k) y0(k) = Complex(rng.normal(), rng.normal()) * y_scale;
    }
    GrapeRun run = run_grape_restart(std::move(y0), bo, h, m, options.max_iters,
                                     options.learning_rate, options.target_infidelity);
    iterations += run.iterations;
    if (best_r < 0 || run.raw < best.raw) {
      best = run;
      best_r = r;
    }
    if (best.raw <= options.target_infidelity) break;
  }

  GrapeResult res;
  res.pulse.samples = fir_forward(squash_forward(best.y, m), h);
  res.pulse.sample_rate = constraints.sample_rate;
  res.pulse.carrier = 0.0;
  res.thetas_padded = padded;
  res.trace = std::move(best.trace);
  res.iterations = iterations;

  // independent verification through the generic joint-space propagator
  SystemParams vp = params;
  vp.cavity_dim = std::max(params.cavity_dim, band + 2);
  Operator u = propagate_piecewise(vp, res.pulse);
  res.infidelity = snap_gate_infidelity(u, padded, vp.cavity_dim);
  if (std::abs(res.infidelity - best.raw) > 1e-6)
    throw NumericalFailure("grape_optimize: fast path and joint propagation disagree");
  res.converged = res.infidelity <= options.target_infidelity;

  if (res.infidelity > options.fail_threshold)
    throw GrapeFailure("grape_optimize: infidelity above fail threshold", std::move(res));
  return res;
}

// ---------- analytic pulses ----------

PulseWaveform standard_snap_pulse(const RealVector& thetas, const SystemParams& params,
                                  double duration, SnapEnvelope envelope) {
  params.validate();
  if (thetas.size() < 1) throw std::invalid_argument("standard_snap_pulse: empty thetas");
  if (duration <= 0) throw std::invalid_argument("standard_snap_pulse: duration must be > 0");
  const double fs = 1e9;
  const int nk = static_cast<int>(std::lround(duration * fs));
  const double dt = 1.0 / fs;
  const double t_half = 0.5 * duration;
  const int lines = static_cast<int>(thetas.size());

  const double amp = envelope == SnapEnvelope::sin2 ? kPi / t_half : kPi / (2.0 * t_half);

  // each line drives its own |n,g> <-> |n,e> transition at the calibrated
  // splitting (chi' shifts the higher lines away from plain chi multiples)
  RealVector wj(lines);
  for (int j = 0; j < lines; ++j) wj(j) = level_e(params, j) - level_g(params, j);

  // unit-amplitude tone of line j (envelope and phase, no amp factor)
  auto tone = [&](int j, const RealVector& axes, int k) {
    double t = (k + 0.5) * dt;
    bool second = t >= t_half;
    double tl = second ? t - t_half : t;
    double env = envelope == SnapEnvelope::sin2
                     ? std::sin(kPi * tl / t_half) * std::sin(kPi * tl / t_half)
                     : 1.0;
    double phase = -wj(j) * t + (second ? kPi - axes(j) : 0.0);
    return env * std::exp(Complex(0, phase));
  };
  auto build = [&](const RealVector& amps, const RealVector& axes) {
    PulseWaveform out;
    out.sample_rate = fs;
    out.carrier = 0.0;
    out.samples = Vector::Zero(nk);
    for (int k = 0; k < nk; ++k) {
      Complex acc(0, 0);
      for (int j = 0; j < lines; ++j) acc += amps(j) * tone(j, axes, k);
      out.samples(k) = acc;
    }
    return out;
  };

  // the comb is calibrated against the nominal params, as on the instrument:
  // per-line amplitudes so each half is a pi rotation for its selective line
  // despite the neighbours' crosstalk, and per-line axes so the realized
  // ground phase of every level lands on its target (the cavity self-phase
  // and the drive-induced cross-phases are deterministic).  The cross-coupling
  // between lines is weak, so a few fixed-point rounds settle both.
  RealVector amps = RealVector::Constant(lines, amp);
  RealVector axes(lines);
  for (int j = 0; j < lines; ++j) axes(j) = thetas(j) + level_g(params, j) * duration;
  PulseWaveform out = build(amps, axes);
  const int half = nk / 2;
  for (int round = 0; round < 4; ++round) {
    for (int j = 0; j < lines; ++j) {
      const double eg = level_g(params, j), ee = level_e(params, j);
      // ground-population leftover of the first half as a function of a small
      // scale on this line's amplitude; the minimum is the pi condition (a
      // magnitude readout alone cannot tell over- from under-rotation, so fit
      // a parabola through three points instead of inverting one angle)
      auto leftover = [&](double scale) {
        Mat2 u = Mat2::Identity();
        for (int k = 0; k < half; ++k) {
          Complex s = out.samples(k) + (scale - 1.0) * amps(j) * tone(j, axes, k);
          u = u2x2(0.5 * (eg + ee), s.real(), s.imag(), 0.5 * (eg - ee), dt) * u;
        }
        return std::norm(u(0, 0));
      };
      const double h = 0.02;
      double lo = leftover(1.0 - h), mid = leftover(1.0), hi = leftover(1.0 + h);
      double curv = lo - 2.0 * mid + hi;
      if (curv > 0) {
        double step = 0.5 * h * (lo - hi) / curv;
        amps(j) *= 1.0 + std::clamp(step, -0.1, 0.1);
      }
      Mat2 u = Mat2::Identity();
      for (int k = 0; k < nk; ++k)
        u = u2x2(0.5 * (eg + ee), out.samples(k).real(), out.samples(k).imag(),
                 0.5 * (eg - ee), dt) *
            u;
      axes(j) += wrap_phase(thetas(j) - std::arg(u(0, 0)));
    }
    out = build(amps, axes);
  }
  return out;
}

PulseWaveform displacement_pulse(Complex alpha, double calibration, double duration,
                                 double sample_rate) {
  if (calibration <= 0) throw std::invalid_argument("displacement_pulse: calibration must be > 0");
  if (duration <= 0) throw std::invalid_argument("displacement_pulse: duration must be > 0");
  const int nk = static_cast<int>(std::lround(duration * sample_rate));
  PulseWaveform out;
  out.sample_rate = sample_rate;
  out.carrier = 0.0;
  out.samples = Vector::Zero(nk);
  const Complex scale = calibration * Complex(0, 1) * alpha * (2.0 / duration);
  for (int k = 0; k < nk; ++k) {
    double t = (k + 0.5) / sample_rate;
    double s = std::sin(kPi * t / duration);
    out.samples(k) = scale * s * s;
  }
  return out;
}

}  // namespace snapkit
