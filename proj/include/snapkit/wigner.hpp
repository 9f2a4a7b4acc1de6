#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snapkit/dynamics.hpp"
#include "snapkit/fock.hpp"

namespace snapkit {

struct WignerGrid {
  std::vector<Complex> points;
  RealVector values;
  double scale = 1.0;   // contrast reference B
  int shots = 0;        // 0 = exact expectation values
  std::uint64_t seed = 0;
  double extent = 0.0;  // square-grid metadata (0 when the grid is custom)
  int side = 0;
};

// side x side points over [-extent, extent]^2, imaginary part in the outer loop
std::vector<Complex> square_grid(double extent, int side);

// W(alpha) = (2/pi) Tr[D†(alpha) rho D(alpha) P]
double wigner(const DensityMatrix& rho, Complex alpha);

// D(alpha) P D†(alpha)
Operator displaced_parity(Complex alpha, int dim);

// exact Wigner values over a set of points (no measurement protocol)
WignerGrid wigner_grid(const DensityMatrix& rho, const std::vector<Complex>& points);

struct TomographyOptions {
  int shots = 0;           // 0 = exact
  std::uint64_t seed = 1;
  bool decoherent = true;  // dissipation and the full static Hamiltonian act during the wait
  double tol = 1e-8;
};

// Ramsey displaced-parity tomography of a joint cavity x qubit state: per
// point, displace, pi/2 pulse, wait 1/(2 chi), second +-pi/2 pulse; the
// outcome difference gives A(alpha). The contrast reference B repeats the
// protocol at the origin without the wait; values are (2/pi) A/B.
WignerGrid simulate_tomography(const Matrix& rho_joint, const std::vector<Complex>& points,
                               const SystemParams& params, const CoherenceParams& coh,
                               const TomographyOptions& options = {});

struct ReconstructionResult {
  Matrix rho;                         // density matrix (PSD, unit trace by construction)
  std::vector<double> trace;          // objective per iteration
  double residual = 0.0;              // final mean squared Wigner residual
  double bootstrap_fidelity_std = 0.0;
  std::vector<std::string> warnings;
  int iterations = 0;
  bool converged = false;
};

struct ReconstructionFailure : std::runtime_error {
  ReconstructionResult best;
  ReconstructionFailure(const std::string& msg, ReconstructionResult b)
      : std::runtime_error(msg), best(std::move(b)) {}
};

struct MleOptions {
  int max_iters = 2000;
  double learning_rate = 0.03;
  double noise_floor = 0.0;  // expected per-point Wigner variance; 0 disables the check
  int stagnation_window = 250;
};

// Least squares on Wigner residuals over rho = T†T/Tr(T†T), T lower
// triangular with real diagonal (PSD and unit trace by construction), Adam.
// Stagnating above 10x the declared noise floor raises ReconstructionFailure
// with the best iterate attached.
ReconstructionResult mle_reconstruct(const WignerGrid& grid, int dim = 32,
                                     const MleOptions& options = {});

// <t|rho|t> after projecting both onto the first `fock_cutoff` levels and
// renormalizing; cutoff 0 uses the full space
double truncated_fidelity(const Matrix& rho, const StateVector& target, int fock_cutoff = 0);

// standard deviation of fidelity(resampled rho, base rho) across point-level
// bootstrap resamples of the grid
double bootstrap_uncertainty(const WignerGrid& grid, int resamples, std::uint64_t seed,
                             int dim = 32, const MleOptions& options = {});

}  // namespace snapkit
