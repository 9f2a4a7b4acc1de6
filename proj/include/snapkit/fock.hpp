#pragma once

#include <string>
#include <vector>

#include "snapkit/types.hpp"

namespace snapkit {

// ---------- states ----------

class StateVector {
 public:
  // Normalizes on construction; throws DegenerateInput on a (near-)zero vector.
  explicit StateVector(Vector amplitudes);

  static StateVector basis(int n, int dim);

  int dim() const { return static_cast<int>(amps_.size()); }
  const Vector& amplitudes() const { return amps_; }
  Complex amplitude(int n) const { return amps_(n); }
  double population(int n) const { return std::norm(amps_(n)); }

  // <this|other>
  Complex overlap(const StateVector& other) const;

  double mean_photon_number() const;

  // zero-pad (dim larger) or truncate-and-renormalize (dim smaller)
  StateVector resized(int dim) const;

 private:
  Vector amps_;
};

class DensityMatrix {
 public:
  // Validates hermiticity (1e-10), trace (1e-10), PSD (eigenvalues >= -1e-8),
  // then symmetrizes and rescales exactly.
  explicit DensityMatrix(Matrix elements);

  static DensityMatrix pure(const StateVector& psi);

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Matrix& elements() const { return mat_; }

  double purity() const { return (mat_ * mat_).trace().real(); }

 private:
  Matrix mat_;
};

struct Operator {
  Matrix elements;
  std::string label;
  int dim() const { return static_cast<int>(elements.rows()); }
};

// Alternating displacement / SNAP sequence: D(a_1) S(t_1) ... S(t_n) D(a_{n+1}).
// A trailing displacement of exactly 0 stands for "no final displacement".
struct GateSequence {
  std::vector<Complex> displacements;     // n+1 amplitudes
  std::vector<RealVector> snaps;          // n phase vectors, radians

  int n_snaps() const { return static_cast<int>(snaps.size()); }
  // highest Fock index addressed by any SNAP, -1 if none
  int max_snap_index() const;
  // wraps all phases to (-pi, pi]
  void wrap_phases();
  // displacement count must be n_snaps()+1 (or the sequence entirely empty)
  void validate() const;
};

// ---------- operators ----------

Matrix destroy_op(int dim);
Matrix create_op(int dim);
Matrix number_op(int dim);

// exp(alpha a† - alpha* a) on the truncated space
Operator displacement_operator(Complex alpha, int dim);

// Displacement operator together with its exact partial derivatives with
// respect to Re(alpha) and Im(alpha).  The generator is anti-Hermitian, so
// both follow from the Daleckii-Krein formula in its eigenbasis.
struct DisplacementWithGradient {
  Matrix op, d_re, d_im;
};
DisplacementWithGradient displacement_operator_with_gradient(Complex alpha, int dim);

// diag(e^{i theta_j}) for j < len(thetas), 1 above
Operator snap_unitary(const RealVector& thetas, int dim);

// diag((-1)^n)
Operator parity_operator(int dim);

// exp(1/2 (zeta* a^2 - zeta a†^2))
Matrix squeeze_operator(Complex zeta, int dim);

// ---------- metrics ----------

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);
double fidelity(const StateVector& a, const StateVector& b);
double fidelity(const DensityMatrix& rho, const StateVector& psi);

// ---------- sequence application ----------

// D(a_{n+1}) S(t_n) ... S(t_1) D(a_1) |input>, normalized. Throws
// TruncationError if more than 1e-4 of the norm reaches the top two Fock
// levels at any intermediate step.
StateVector apply_gate_sequence(const GateSequence& seq, const StateVector& input);

// Working dimension used by synthesis/diagnostics for a sequence: 10 levels
// above the largest SNAP index, with room for the displacement excursion.
int sequence_working_dim(const GateSequence& seq, int min_dim = 0);

// states after each successive gate applied to |0>; a trailing zero
// displacement contributes no snapshot
std::vector<StateVector> snapshot_states(const GateSequence& seq, int dim = 0);

}  // namespace snapkit
