#include "snapkit/fock.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace snapkit {

// ---------- StateVector ----------

StateVector::StateVector(Vector amplitudes) : amps_(std::move(amplitudes)) {
  if (amps_.size() < 1) throw std::invalid_argument("StateVector: dim must be >= 1");
  if (!amps_.allFinite()) throw std::invalid_argument("StateVector: non-finite amplitude");
  double n = amps_.norm();
  if (n < 1e-12) throw DegenerateInput("StateVector: zero norm");
  amps_ /= n;
}

StateVector StateVector::basis(int n, int dim) {
  if (n < 0 || n >= dim) throw std::invalid_argument("StateVector::basis: need 0 <= n < dim");
  Vector v = Vector::Zero(dim);
  v(n) = 1.0;
  return StateVector(std::move(v));
}

Complex StateVector::overlap(const StateVector& other) const {
  if (other.dim() != dim()) throw std::invalid_argument("overlap: dimension mismatch");
  return amps_.dot(other.amps_);
}

double StateVector::mean_photon_number() const {
  double s = 0.0;
  for (int n = 1; n < dim(); ++n) s += n * std::norm(amps_(n));
  return s;
}

StateVector StateVector::resized(int dim) const {
  if (dim < 1) throw std::invalid_argument("resized: dim must be >= 1");
  Vector v = Vector::Zero(dim);
  int c = std::min(dim, this->dim());
  v.head(c) = amps_.head(c);
  return StateVector(std::move(v));
}

// ---------- DensityMatrix ----------

DensityMatrix::DensityMatrix(Matrix elements) : mat_(std::move(elements)) {
  if (mat_.rows() != mat_.cols() || mat_.rows() < 1)
    throw std::invalid_argument("DensityMatrix: must be square");
  if (!mat_.allFinite()) throw std::invalid_argument("DensityMatrix: non-finite entry");
  double herm_dev = (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff();
  if (herm_dev > 1e-10) throw std::invalid_argument("DensityMatrix: not Hermitian");
  double tr = mat_.trace().real();
  if (std::abs(tr - 1.0) > 1e-10) throw std::invalid_argument("DensityMatrix: trace != 1");
  mat_ = ((mat_ + mat_.adjoint()) / 2.0).eval();
  mat_ /= mat_.trace().real();
  Eigen::SelfAdjointEigenSolver<Matrix> es(mat_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw std::invalid_argument("DensityMatrix: not positive semidefinite");
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
}

// ---------- GateSequence ----------

int GateSequence::max_snap_index() const {
  int m = -1;
  for (const auto& t : snaps) m = std::max(m, static_cast<int>(t.size()) - 1);
  return m;
}

void GateSequence::wrap_phases() {
  for (auto& t : snaps)
    for (int j = 0; j < t.size(); ++j) t(j) = wrap_phase(t(j));
}

void GateSequence::validate() const {
  if (displacements.empty() && snaps.empty()) return;
  if (displacements.size() != snaps.size() + 1)
    throw std::invalid_argument("GateSequence: need n+1 displacements for n SNAPs");
  for (Complex a : displacements)
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
      throw std::invalid_argument("GateSequence: non-finite displacement");
  for (const auto& t : snaps)
    if (!t.allFinite()) throw std::invalid_argument("GateSequence: non-finite phase");
}

// ---------- operators ----------

Matrix destroy_op(int dim) {
  if (dim < 1) throw std::invalid_argument("destroy_op: dim must be >= 1");
  Matrix a = Matrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Matrix create_op(int dim) { return destroy_op(dim).adjoint(); }

Matrix number_op(int dim) {
  Matrix n = Matrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

Operator displacement_operator(Complex alpha, int dim) {
  if (dim < 2) throw std::invalid_argument("displacement_operator: dim must be >= 2");
  if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag()))
    throw std::invalid_argument("displacement_operator: non-finite alpha");
  Matrix a = destroy_op(dim);
  Matrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  return Operator{gen.exp(), "D"};
}

DisplacementWithGradient displacement_operator_with_gradient(Complex alpha, int dim) {
  if (dim < 2) throw std::invalid_argument("displacement gradient: dim must be >= 2");
  Matrix a = destroy_op(dim);
  Matrix adag = a.adjoint();
  // gen = alpha a† - alpha* a is anti-Hermitian, so gen = iH with H Hermitian;
  // exact Frechet derivatives come from the Daleckii-Krein formula in the
  // eigenbasis of H (much cheaper than block exponentials at 2*dim).
  Matrix h = Complex(0, -1) * (alpha * adag - std::conj(alpha) * a);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  const RealVector& lam = eig.eigenvalues();
  const Matrix& v = eig.eigenvectors();

  Vector phase(dim);
  for (int j = 0; j < dim; ++j) phase(j) = std::exp(Complex(0, lam(j)));
  Matrix phi(dim, dim);  // phi_jk = (e^{i l_j} - e^{i l_k}) / (i (l_j - l_k))
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < dim; ++k) {
      double half = 0.5 * (lam(j) - lam(k));
      double sinc = std::abs(half) < 1e-6 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
      phi(j, k) = std::exp(Complex(0, 0.5 * (lam(j) + lam(k)))) * sinc;
    }

  // d(gen)/dRe(alpha) = a† - a, d(gen)/dIm(alpha) = i(a† + a)
  Matrix e_re = adag - a;
  Matrix e_im = Complex(0, 1) * (adag + a);

  DisplacementWithGradient out;
  out.op = v * phase.asDiagonal() * v.adjoint();
  out.d_re = v * (v.adjoint() * e_re * v).cwiseProduct(phi) * v.adjoint();
  out.d_im = v * (v.adjoint() * e_im * v).cwiseProduct(phi) * v.adjoint();
  return out;
}

Operator snap_unitary(const RealVector& thetas, int dim) {
  if (thetas.size() > dim) throw std::invalid_argument("snap_unitary: len(thetas) > dim");
  Matrix s = Matrix::Identity(dim, dim);
  for (int j = 0; j < thetas.size(); ++j) s(j, j) = std::exp(Complex(0, thetas(j)));
  return Operator{std::move(s), "S"};
}

Operator parity_operator(int dim) {
  if (dim < 1) throw std::invalid_argument("parity_operator: dim must be >= 1");
  Matrix p = Matrix::Identity(dim, dim);
  for (int n = 1; n < dim; n += 2) p(n, n) = -1.0;
  return Operator{std::move(p), "parity"};
}

Matrix squeeze_operator(Complex zeta, int dim) {
  if (dim < 2) throw std::invalid_argument("squeeze_operator: dim must be >= 2");
  Matrix a = destroy_op(dim);
  Matrix gen = 0.5 * (std::conj(zeta) * a * a - zeta * (a * a).adjoint());
  return gen.exp();
}

// ---------- metrics ----------

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.elements());
  RealVector ev = es.eigenvalues().cwiseMax(0.0);
  Matrix sqrt_rho =
      es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
  Matrix m = sqrt_rho * sigma.elements() * sqrt_rho;
  Eigen::SelfAdjointEigenSolver<Matrix> es2((m + m.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  double s = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::min(s * s, 1.0);
}

double fidelity(const StateVector& a, const StateVector& b) {
  return std::norm(a.overlap(b));
}

double fidelity(const DensityMatrix& rho, const StateVector& psi) {
  if (rho.dim() != psi.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  return (psi.amplitudes().adjoint() * rho.elements() * psi.amplitudes())(0).real();
}

// ---------- sequence application ----------

namespace {

void check_leakage(const Vector& v) {
  int d = static_cast<int>(v.size());
  double top = std::norm(v(d - 1)) + (d >= 2 ? std::norm(v(d - 2)) : 0.0);
  if (top > 1e-4 * v.squaredNorm())
    throw TruncationError("apply_gate_sequence: > 1e-4 of norm in top two Fock levels");
}

}  // namespace

StateVector apply_gate_sequence(const GateSequence& seq, const StateVector& input) {
  seq.validate();
  if (seq.displacements.empty()) return input;
  int dim = input.dim();
  Vector psi = input.amplitudes();
  for (std::size_t i = 0; i < seq.displacements.size(); ++i) {
    if (!(i + 1 == seq.displacements.size() && seq.displacements[i] == Complex(0, 0))) {
      psi = displacement_operator(seq.displacements[i], dim).elements * psi;
      check_leakage(psi);
    }
    if (i < seq.snaps.size()) {
      const RealVector& t = seq.snaps[i];
      if (t.size() > dim) throw std::invalid_argument("apply_gate_sequence: SNAP exceeds dim");
      for (int j = 0; j < t.size(); ++j) psi(j) *= std::exp(Complex(0, t(j)));
    }
  }
  return StateVector(std::move(psi));
}

int sequence_working_dim(const GateSequence& seq, int min_dim) {
  double excursion = 0.0, total = 0.0;
  for (Complex a : seq.displacements) {
    total += std::abs(a);
    excursion = std::max(excursion, total);
  }
  int for_disp = static_cast<int>(std::ceil(excursion * excursion + 7.0 * excursion)) + 2;
  int for_snap = seq.max_snap_index() + 11;
  return std::max({for_disp, for_snap, min_dim, 8});
}

std::vector<StateVector> snapshot_states(const GateSequence& seq, int dim) {
  seq.validate();
  std::vector<StateVector> out;
  if (seq.displacements.empty()) return out;
  if (dim <= 0) dim = sequence_working_dim(seq);
  Vector psi = Vector::Zero(dim);
  psi(0) = 1.0;
  for (std::size_t i = 0; i < seq.displacements.size(); ++i) {
    if (!(i + 1 == seq.displacements.size() && seq.displacements[i] == Complex(0, 0))) {
      psi = displacement_operator(seq.displacements[i], dim).elements * psi;
      out.emplace_back(psi);
    }
    if (i < seq.snaps.size()) {
      const RealVector& t = seq.snaps[i];
      for (int j = 0; j < t.size() && j < dim; ++j) psi(j) *= std::exp(Complex(0, t(j)));
      out.emplace_back(psi);
    }
  }
  return out;
}

}  // namespace snapkit
