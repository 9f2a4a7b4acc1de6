#include "snapkit/targets.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace snapkit {

StateVector fock_state(int n, int dim) {
  if (n < 0 || n >= dim) throw std::invalid_argument("fock_state: need 0 <= n < dim");
  return StateVector::basis(n, dim);
}

StateVector binomial_state(int dim) {
  if (dim < 5) throw std::invalid_argument("binomial_state: dim must be >= 5");
  Vector v = Vector::Zero(dim);
  v(0) = v(4) = 1.0 / std::sqrt(2.0);
  return StateVector(std::move(v));
}

namespace {

// unnormalized coherent amplitudes <n|alpha> (exact up to truncation)
Vector coherent_amplitudes(Complex alpha, int dim) {
  Vector v(dim);
  v(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return v;
}

}  // namespace

StateVector coherent_state(Complex alpha, int dim) {
  if (dim < 2) throw std::invalid_argument("coherent_state: dim must be >= 2");
  Vector v = coherent_amplitudes(alpha, dim);
  if (v.squaredNorm() < 0.999)
    throw TruncationError("coherent_state: dim too small for |alpha|");
  return StateVector(std::move(v));
}

StateVector cat_state(Complex alpha, CatParity parity, int dim) {
  double aa = std::norm(alpha);
  int needed = static_cast<int>(std::ceil(aa + 7.0 * std::sqrt(aa)));
  if (dim < needed) throw std::invalid_argument("cat_state: |alpha| too large for dim");
  Vector plus = coherent_amplitudes(alpha, dim);
  Vector minus = coherent_amplitudes(-alpha, dim);
  Vector v = parity == CatParity::even ? (plus + minus).eval() : (plus - minus).eval();
  // exact parity support: the surviving terms are even (or odd) n only
  for (int n = parity == CatParity::even ? 1 : 0; n < dim; n += 2) v(n) = 0.0;
  if (v.norm() < 1e-12)
    throw std::invalid_argument("cat_state: degenerate superposition (alpha too small)");
  return StateVector(std::move(v));
}

StateVector gkp_state(const GkpSpec& spec) {
  if (spec.sigma < 0.0 || spec.sigma > 1.0)
    throw std::invalid_argument("gkp_state: sigma must be in [0, 1]");
  if (spec.mu != 0 && spec.mu != 1) throw std::invalid_argument("gkp_state: mu must be 0 or 1");
  if (spec.grid_range < 1) throw std::invalid_argument("gkp_state: grid_range must be >= 1");
  if (spec.dim < 2) throw std::invalid_argument("gkp_state: dim must be >= 2");

  const int ext = spec.dim + 64;  // reference space for the truncation check
  const double s = std::sqrt(kPi / 2.0);
  Vector acc = Vector::Zero(ext);
  for (int n1 = -spec.grid_range; n1 <= spec.grid_range; ++n1) {
    for (int n2 = -spec.grid_range; n2 <= spec.grid_range; ++n2) {
      Complex a(s * (2 * n1 + spec.mu), s * n2);
      double env = std::exp(-spec.sigma * spec.sigma * std::norm(a));
      if (env < 1e-14) continue;
      Complex w = env * std::exp(Complex(0, -a.real() * a.imag()));
      acc += w * coherent_amplitudes(a, ext);
    }
  }
  double total = acc.squaredNorm();
  if (total < 1e-24) throw DegenerateInput("gkp_state: sum vanished");
  double kept = acc.head(spec.dim).squaredNorm() / total;
  if (kept < 0.99)
    throw TruncationError("gkp_state: dim holds < 99% of the state norm");
  return StateVector(acc.head(spec.dim).eval());
}

StateVector cubic_phase_state(const CubicSpec& spec) {
  if (spec.dim < 2) throw std::invalid_argument("cubic_phase_state: dim must be >= 2");
  // q^3 couples across 3 levels; build everything padded, then project
  const int pad = spec.dim + 16;
  Vector psi = Vector::Zero(pad);
  psi(0) = 1.0;
  psi = squeeze_operator(spec.squeezing, pad) * psi;
  if (std::abs(spec.cubicity) > 0.0) {
    Matrix a = destroy_op(pad);
    Matrix q = a + a.adjoint();
    Matrix gen = Complex(0, spec.cubicity) * (q * q * q);
    psi = gen.exp() * psi;
  }
  if (spec.displacement != Complex(0, 0))
    psi = displacement_operator(spec.displacement, pad).elements * psi;
  double lost = 1.0 - psi.head(spec.dim).squaredNorm() / psi.squaredNorm();
  if (lost > 1e-3) throw TruncationError("cubic_phase_state: truncation leakage > 1e-3");
  return StateVector(psi.head(spec.dim).eval());
}

StateVector truncate_to(const StateVector& psi, int k) {
  if (k < 1 || k > psi.dim()) throw std::invalid_argument("truncate_to: need 1 <= k <= dim");
  Vector v = psi.amplitudes();
  v.tail(psi.dim() - k).setZero();
  if (v.norm() < 1e-12) throw DegenerateInput("truncate_to: no amplitude below cutoff");
  return StateVector(std::move(v));
}

}  // namespace snapkit
