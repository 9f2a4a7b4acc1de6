#pragma once

#include "snapkit/fock.hpp"

namespace snapkit {

StateVector fock_state(int n, int dim);

// (|0> + |4>)/sqrt(2)
StateVector binomial_state(int dim);

enum class CatParity { even, odd };

// (|alpha> ± |-alpha>)/N
StateVector cat_state(Complex alpha, CatParity parity, int dim);

// coherent state |alpha> by the stable series recurrence
StateVector coherent_state(Complex alpha, int dim);

// Finite-energy grid state: sum over kappa(mu) = sqrt(pi/2)(2 n1 + mu) + i sqrt(pi/2) n2,
// n1, n2 in [-R, R], of e^{-sigma^2 |a|^2} e^{-i Re(a) Im(a)} D(a)|0>, normalized after
// summation. Construction must retain >= 99% of the untruncated squared norm (the
// canonical sigma=0.35 target holds 0.9962 at dim 25).
struct GkpSpec {
  double sigma = 0.35;
  int mu = 0;            // logical encoding, 0 or 1
  int grid_range = 8;    // R
  int dim = 25;
};
StateVector gkp_state(const GkpSpec& spec);

// D(beta) exp(i gamma q^3) S(zeta)|0> with q = a + a† (no 1/sqrt(2) factor).
struct CubicSpec {
  double cubicity = -0.106;        // gamma
  Complex squeezing = 0.5;         // zeta
  Complex displacement = {0, 1.5}; // beta
  int dim = 32;
};
StateVector cubic_phase_state(const CubicSpec& spec);

// zero amplitudes at index >= k, renormalize (dim unchanged)
StateVector truncate_to(const StateVector& psi, int k);

}  // namespace snapkit
