#include "snapkit/wigner.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "snapkit/rng.hpp"

namespace snapkit {

// ---------- grids and exact evaluation ----------

std::vector<Complex> square_grid(double extent, int side) {
  if (!(extent > 0) || side < 2) throw DegenerateInput("square_grid: need extent > 0, side >= 2");
  std::vector<Complex> pts;
  pts.reserve(static_cast<std::size_t>(side) * side);
  const double step = 2.0 * extent / (side - 1);
  for (int i = 0; i < side; ++i)
    for (int r = 0; r < side; ++r)
      pts.emplace_back(-extent + r * step, -extent + i * step);
  return pts;
}

Operator displaced_parity(Complex alpha, int dim) {
  Matrix d = displacement_operator(alpha, dim).elements;
  Matrix p = parity_operator(dim).elements;
  return Operator{d * p * d.adjoint(), "D P D+"};
}

double wigner(const DensityMatrix& rho, Complex alpha) {
  Matrix m = displaced_parity(alpha, rho.dim()).elements;
  return (2.0 / kPi) * rho.elements().cwiseProduct(m.transpose()).sum().real();
}

WignerGrid wigner_grid(const DensityMatrix& rho, const std::vector<Complex>& points) {
  if (points.empty()) throw DegenerateInput("wigner_grid: no points");
  WignerGrid g;
  g.points = points;
  g.values.resize(points.size());
  for (std::size_t k = 0; k < points.size(); ++k)
    g.values(static_cast<int>(k)) = wigner(rho, points[k]);
  return g;
}

// ---------- simulated tomography ----------

namespace {

Matrix qubit_rx(double angle) {
  Matrix r(2, 2);
  const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
  r << Complex(c, 0), Complex(0, -s), Complex(0, -s), Complex(c, 0);
  return r;
}

// single zero-drive interval of exactly `span` seconds
PulseSchedule idle_schedule(double span) {
  PulseSchedule s;
  PulseWaveform w;
  w.samples = Vector::Zero(1);
  w.sample_rate = 1.0 / span;
  s.items.push_back({DriveChannel::qubit, 0.0, std::move(w)});
  return s;
}

}  // namespace

WignerGrid simulate_tomography(const Matrix& rho_joint, const std::vector<Complex>& points,
                               const SystemParams& params, const CoherenceParams& coh,
                               const TomographyOptions& options) {
  params.validate();
  coh.validate();
  if (points.empty()) throw DegenerateInput("simulate_tomography: no points");
  if (!(params.chi > 0)) throw ConfigError("simulate_tomography: chi must be positive");
  const int dc = params.cavity_dim;
  const int d = 2 * dc;
  if (rho_joint.rows() != d || rho_joint.cols() != d)
    throw std::invalid_argument("simulate_tomography: state must be 2*cavity_dim square");

  // measurement operator after the first pi/2 pulse: difference of the two
  // final-pulse outcomes, pulled back through the parity wait
  Matrix u1 = kron_qubit(qubit_rx(0.5 * kPi), dc);
  Matrix pe = Matrix::Zero(2, 2);
  pe(1, 1) = 1.0;
  Matrix up = kron_qubit(qubit_rx(0.5 * kPi), dc);
  Matrix um = kron_qubit(qubit_rx(-0.5 * kPi), dc);
  Matrix pej = kron_qubit(pe, dc);
  Matrix diff = up.adjoint() * pej * up - um.adjoint() * pej * um;
  Matrix sum = up.adjoint() * pej * up + um.adjoint() * pej * um;

  const double wait = kPi / params.chi;  // 1/(2 chi) in cyclic units
  Matrix diff_w, sum_w;
  if (options.decoherent) {
    PulseSchedule idle = idle_schedule(wait);
    diff_w = lindblad_adjoint_map(diff, params, coh, idle, options.tol);
    sum_w = lindblad_adjoint_map(sum, params, coh, idle, options.tol);
  } else {
    // ideal parity map: a pure conditional phase pi per photon on the excited
    // qubit, nothing else
    Vector phase(d);
    for (int n = 0; n < dc; ++n) {
      phase(2 * n) = 1.0;
      phase(2 * n + 1) = std::exp(Complex(0, -kPi * n));
    }
    Matrix w = phase.asDiagonal();
    diff_w = w.adjoint() * diff * w;
    sum_w = w.adjoint() * sum * w;
  }
  // per-point observables O such that A = Tr[D† rho D O] etc.
  Matrix o_diff = u1.adjoint() * diff_w * u1;
  Matrix o_sum = u1.adjoint() * sum_w * u1;

  // contrast reference: same protocol at the origin without the wait
  Matrix b_diff = u1.adjoint() * diff * u1;
  Matrix b_sum = u1.adjoint() * sum * u1;

  Rng rng(derive_seed(options.seed, 77));
  auto outcome_pair = [&](const Matrix& state, const Matrix& odiff, const Matrix& osum) {
    double a = state.cwiseProduct(odiff.transpose()).sum().real();
    double s = state.cwiseProduct(osum.transpose()).sum().real();
    double pp = std::clamp(0.5 * (s + a), 0.0, 1.0);
    double pm = std::clamp(0.5 * (s - a), 0.0, 1.0);
    if (options.shots > 0) {
      pp = static_cast<double>(rng.binomial(options.shots, pp)) / options.shots;
      pm = static_cast<double>(rng.binomial(options.shots, pm)) / options.shots;
    }
    return pp - pm;
  };

  WignerGrid g;
  g.points = points;
  g.values.resize(points.size());
  g.shots = std::max(options.shots, 0);
  g.seed = options.seed;
  g.scale = outcome_pair(rho_joint, b_diff, b_sum);
  if (!(std::abs(g.scale) > 1e-9))
    throw NumericalFailure("simulate_tomography: vanishing contrast reference");
  for (std::size_t k = 0; k < points.size(); ++k) {
    Matrix dj = kron_cavity(displacement_operator(points[k], dc).elements);
    Matrix disp = dj.adjoint() * rho_joint * dj;
    double a = outcome_pair(disp, o_diff, o_sum);
    g.values(static_cast<int>(k)) = (2.0 / kPi) * a / g.scale;
  }
  return g;
}

// ---------- maximum-likelihood reconstruction ----------

namespace {

struct MleWork {
  Matrix phi;        // K x dim^2, row k = vec(M_k)† with M_k = (2/pi) D P D†
  RealVector meas;   // measured values
  RealVector weights;
  int dim = 0;

  int points() const { return static_cast<int>(phi.rows()); }
};

MleWork build_work(const WignerGrid& grid, int dim) {
  MleWork w;
  w.dim = dim;
  const int cap = static_cast<int>(grid.points.size());
  w.phi.resize(cap, dim * dim);
  for (int k = 0; k < cap; ++k) {
    Matrix m = (2.0 / kPi) * displaced_parity(grid.points[k], dim).elements;
    w.phi.row(k) = Eigen::Map<Vector>(m.data(), dim * dim).adjoint();
  }
  w.meas = grid.values;
  w.weights = RealVector::Ones(cap);
  return w;
}

// lower-triangular mask with real diagonal: dim^2 real parameters
RealVector pack_factor(const Matrix& t) {
  const int n = static_cast<int>(t.rows());
  RealVector x(n * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    x(k++) = t(i, i).real();
    for (int j = 0; j < i; ++j) {
      x(k++) = t(i, j).real();
      x(k++) = t(i, j).imag();
    }
  }
  return x;
}

Matrix unpack_factor(const RealVector& x, int n) {
  Matrix t = Matrix::Zero(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    t(i, i) = x(k++);
    for (int j = 0; j < i; ++j) {
      double re = x(k++), im = x(k++);
      t(i, j) = Complex(re, im);
    }
  }
  return t;
}

struct FitState {
  Matrix rho;
  double cost = 0.0;       // weighted sum of squared residuals
  RealVector residual;
};

FitState evaluate(const MleWork& w, const Matrix& t, RealVector* grad) {
  FitState st;
  Matrix tt = t.adjoint() * t;
  double s = tt.trace().real();
  if (!(s > 1e-300)) s = 1e-300;
  st.rho = tt / s;
  const int n = w.dim;
  Vector model_c = w.phi * Eigen::Map<const Vector>(st.rho.data(), n * n);
  st.residual = model_c.real() - w.meas;
  st.cost = (w.weights.array() * st.residual.array().square()).sum();
  if (grad) {
    Vector r = (2.0 * w.weights.array() * st.residual.array()).matrix().cast<Complex>();
    Vector gv = w.phi.adjoint() * r;
    Matrix g = Eigen::Map<Matrix>(gv.data(), n, n);
    g = 0.5 * (g + Matrix(g.adjoint()));  // M_k hermitian; enforce against roundoff
    Matrix gt = (g - Complex(st.rho.cwiseProduct(g.transpose()).sum()) * Matrix::Identity(n, n)) / s;
    Matrix dt = t * gt;  // d cost = 2 Re Tr[(T Gt) dT†]
    RealVector gx(n * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
      gx(k++) = 2.0 * dt(i, i).real();
      for (int j = 0; j < i; ++j) {
        gx(k++) = 2.0 * dt(i, j).real();
        gx(k++) = 2.0 * dt(i, j).imag();
      }
    }
    *grad = std::move(gx);
  }
  return st;
}

ReconstructionResult mle_fit(const MleWork& w, const MleOptions& options, const Matrix* start,
                             Matrix* factor_out) {
  const int n = w.dim;
  Matrix t0 = start ? *start : Matrix(std::sqrt(1.0 / n) * Matrix::Identity(n, n));
  RealVector x = pack_factor(t0);
  RealVector m = RealVector::Zero(x.size()), v = RealVector::Zero(x.size());
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  ReconstructionResult res;
  RealVector best_x = x;
  double best_cost = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  const double wsum = std::max(w.weights.sum(), 1.0);

  int it = 0;
  bool exhausted = true;
  for (; it < options.max_iters; ++it) {
    RealVector grad;
    FitState st = evaluate(w, unpack_factor(x, n), &grad);
    res.trace.push_back(st.cost);
    if (st.cost < best_cost - 1e-18) {
      best_cost = st.cost;
      best_x = x;
      best_iter = it;
    }
    if (st.cost <= 1e-18 * wsum || it - best_iter > options.stagnation_window) {
      exhausted = false;
      break;
    }
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, it + 1), c2 = 1.0 - std::pow(b2, it + 1);
    for (int i = 0; i < x.size(); ++i)
      x(i) -= options.learning_rate * (m(i) / c1) / (std::sqrt(v(i) / c2) + eps);
  }
  Matrix t_best = unpack_factor(best_x, n);
  FitState st = evaluate(w, t_best, nullptr);
  res.rho = 0.5 * (st.rho + Matrix(st.rho.adjoint()));
  res.residual = st.cost / wsum;
  res.iterations = it;
  res.converged = !exhausted;  // settled (tiny cost or stagnated at the optimum)
  if (factor_out) *factor_out = std::move(t_best);
  if (options.noise_floor > 0.0 && res.residual > 10.0 * options.noise_floor)
    throw ReconstructionFailure("mle_reconstruct: stagnated above 10x the noise floor", res);
  return res;
}

}  // namespace

ReconstructionResult mle_reconstruct(const WignerGrid& grid, int dim, const MleOptions& options) {
  if (dim < 2) throw DegenerateInput("mle_reconstruct: dim must be >= 2");
  if (grid.points.empty() || grid.values.size() != static_cast<int>(grid.points.size()))
    throw DegenerateInput("mle_reconstruct: malformed grid");
  MleWork w = build_work(grid, dim);
  ReconstructionResult res = mle_fit(w, options, nullptr, nullptr);
  if (w.points() < dim * dim)
    res.warnings.push_back("grid has fewer points than dim^2; reconstruction may be underdetermined");
  return res;
}

double truncated_fidelity(const Matrix& rho, const StateVector& target, int fock_cutoff) {
  const int d = static_cast<int>(rho.rows());
  const int k = fock_cutoff > 0 ? std::min(fock_cutoff, d) : d;
  Vector t = target.resized(d).amplitudes().head(k);
  const double tn = t.norm();
  Matrix block = rho.topLeftCorner(k, k);
  const double bn = block.trace().real();
  if (tn < 1e-12 || bn < 1e-12)
    throw DegenerateInput("truncated_fidelity: no support below the cutoff");
  t /= tn;
  return std::real(t.dot(block * t)) / bn;
}

double bootstrap_uncertainty(const WignerGrid& grid, int resamples, std::uint64_t seed, int dim,
                             const MleOptions& options) {
  if (resamples < 2) throw DegenerateInput("bootstrap_uncertainty: need >= 2 resamples");
  MleWork w = build_work(grid, dim);
  Matrix t0;
  ReconstructionResult base = mle_fit(w, options, nullptr, &t0);

  MleOptions warm = options;
  warm.max_iters = std::max(300, options.max_iters / 4);
  warm.noise_floor = 0.0;  // resamples inherit the base fit's quality
  const int cap = w.points();
  std::vector<double> fids;
  for (int r = 0; r < resamples; ++r) {
    Rng rng(derive_seed(seed, 500 + r));
    RealVector counts = RealVector::Zero(cap);
    for (int k = 0; k < cap; ++k) counts(static_cast<int>(rng.next_u64() % cap)) += 1.0;
    MleWork wr = w;
    wr.weights = counts;
    ReconstructionResult rr = mle_fit(wr, warm, &t0, nullptr);
    // fidelity between the resampled and base reconstructions
    fids.push_back(fidelity(DensityMatrix(rr.rho), DensityMatrix(base.rho)));
  }
  double mean = 0.0;
  for (double f : fids) mean += f;
  mean /= fids.size();
  double var = 0.0;
  for (double f : fids) var += (f - mean) * (f - mean);
  var /= (fids.size() - 1.0);
  return std::sqrt(var);
}

}  // namespace snapkit
