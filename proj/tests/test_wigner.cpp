#include <cmath>
#include <complex>

#include "doctest.h"
#include "snapkit/rng.hpp"
#include "snapkit/targets.hpp"
#include "snapkit/wigner.hpp"
#include "test_util.hpp"

using namespace snapkit;
using namespace snapkit::testutil;

namespace {

Matrix ground_joint(const StateVector& cavity) {
  Vector psi = Vector::Zero(2 * cavity.dim());
  for (int n = 0; n < cavity.dim(); ++n) psi(2 * n) = cavity.amplitude(n);
  return psi * psi.adjoint();
}

StateVector random_pure(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(dim);
  for (int n = 0; n < dim; ++n) v(n) = Complex(rng.normal(), rng.normal());
  return StateVector(v);
}

}  // namespace

// ---------- exact Wigner values ----------

TEST_CASE("vacuum Wigner function is a Gaussian of height 2/pi") {
  DensityMatrix vac = DensityMatrix::pure(fock_state(0, 24));
  CHECK(std::abs(wigner(vac, Complex(0, 0)) - 2.0 / kPi) <= 1e-10);
  for (Complex a : {Complex(0.5, 0.0), Complex(-0.3, 0.8), Complex(1.0, -1.0)}) {
    double want = 2.0 / kPi * std::exp(-2.0 * std::norm(a));
    CHECK(std::abs(wigner(vac, a) - want) <= 1e-8);
  }
}

TEST_CASE("Fock state parities at the origin") {
  CHECK(std::abs(wigner(DensityMatrix::pure(fock_state(2, 24)), Complex(0, 0)) - 2.0 / kPi) <=
        1e-10);
  CHECK(std::abs(wigner(DensityMatrix::pure(fock_state(1, 24)), Complex(0, 0)) + 2.0 / kPi) <=
        1e-10);
}

TEST_CASE("Wigner values are bounded by 2/pi") {
  std::vector<Complex> pts = square_grid(2.5, 21);
  for (const StateVector& s :
       {cat_state(std::sqrt(2.0), CatParity::odd, 28), binomial_state(24), random_pure(12, 3)}) {
    WignerGrid g = wigner_grid(DensityMatrix::pure(s), pts);
    CHECK(g.values.cwiseAbs().maxCoeff() <= 2.0 / kPi + 1e-6);
  }
}

TEST_CASE("grid evaluation matches pointwise evaluation and integrates to one") {
  DensityMatrix rho = DensityMatrix::pure(cat_state(std::sqrt(2.0), CatParity::odd, 28));
  std::vector<Complex> pts = square_grid(4.0, 81);
  WignerGrid g = wigner_grid(rho, pts);
  REQUIRE(static_cast<int>(g.points.size()) == 81 * 81);
  REQUIRE(g.values.size() == 81 * 81);
  CHECK(g.extent == 4.0);
  CHECK(g.side == 81);
  CHECK(g.shots == 0);

  // outer loop over the imaginary part
  CHECK(std::abs(g.points.front() - Complex(-4.0, -4.0)) <= 1e-12);
  CHECK(std::abs(g.points[1] - Complex(-3.9, -4.0)) <= 1e-12);
  CHECK(std::abs(g.points.back() - Complex(4.0, 4.0)) <= 1e-12);

  for (int k : {0, 40, 81 * 40 + 40, 81 * 81 - 1})
    CHECK(std::abs(g.values(k) - wigner(rho, g.points[k])) <= 1e-12);

  double cell = std::pow(8.0 / 80.0, 2);
  CHECK(std::abs(g.values.sum() * cell - 1.0) <= 0.02);
}

// ---------- simulated tomography ----------

TEST_CASE("ideal Ramsey tomography reproduces the exact Wigner function") {
  SystemParams p;
  p.cavity_dim = 16;
  StateVector state = binomial_state(16);
  std::vector<Complex> pts = {Complex(0, 0), Complex(0.7, 0.0), Complex(-0.4, 0.9),
                              Complex(1.5, -1.1)};
  TomographyOptions opt;
  opt.decoherent = false;
  WignerGrid g =
      simulate_tomography(ground_joint(state), pts, p, CoherenceParams::none(), opt);
  DensityMatrix rho = DensityMatrix::pure(state);
  for (std::size_t k = 0; k < pts.size(); ++k)
    CHECK(std::abs(g.values(static_cast<int>(k)) - wigner(rho, pts[k])) <= 1e-8);
  CHECK(std::abs(g.scale - 1.0) <= 1e-8);
}

TEST_CASE("finite shot counts stay consistent with the exact value") {
  SystemParams p;
  p.cavity_dim = 8;
  TomographyOptions opt;
  opt.decoherent = false;
  opt.shots = 400;
  opt.seed = 11;
  WignerGrid g = simulate_tomography(ground_joint(fock_state(0, 8)), {Complex(0, 0)}, p,
                                     CoherenceParams::none(), opt);
  CHECK(g.shots == 400);
  CHECK(std::abs(g.values(0) - 2.0 / kPi) <= 0.05);

  // same seed, same draw
  WignerGrid g2 = simulate_tomography(ground_joint(fock_state(0, 8)), {Complex(0, 0)}, p,
                                      CoherenceParams::none(), opt);
  CHECK(g2.values(0) == g.values(0));
}

TEST_CASE("decoherence during the parity wait lowers the contrast") {
  SystemParams p;
  p.cavity_dim = 16;
  StateVector state = fock_state(2, 16);
  WignerGrid g = simulate_tomography(ground_joint(state), {Complex(0, 0)}, p, CoherenceParams{});
  CHECK(g.values(0) < 2.0 / kPi - 1e-4);
  CHECK(g.values(0) > 0.5);  // but not wildly off for a single parity wait
}

TEST_CASE("tomography input validation") {
  SystemParams p;
  p.cavity_dim = 8;
  Matrix wrong = Matrix::Identity(8, 8);  // should be 16x16
  CHECK_THROWS_AS(
      simulate_tomography(wrong, {Complex(0, 0)}, p, CoherenceParams::none()),
      std::invalid_argument);
  CHECK_THROWS_AS(simulate_tomography(ground_joint(fock_state(0, 8)), {}, p,
                                      CoherenceParams::none()),
                  DegenerateInput);
}

// ---------- reconstruction ----------

TEST_CASE("maximum-likelihood round trip on a random pure state" * doctest::timeout(120)) {
  StateVector state = random_pure(8, 21);
  WignerGrid g = wigner_grid(DensityMatrix::pure(state), square_grid(3.0, 31));
  ReconstructionResult r = mle_reconstruct(g, 8);
  CHECK(fidelity(DensityMatrix(r.rho), state) >= 0.99);
  CHECK(r.residual <= 1e-4);
  CHECK(r.iterations > 0);
}

TEST_CASE("reconstruction reports an honest residual on flat data") {
  WignerGrid g;
  g.points = square_grid(2.0, 11);
  g.values = RealVector::Zero(121);
  ReconstructionResult r = mle_reconstruct(g, 4);
  DensityMatrix dm(r.rho);  // still a valid state
  CHECK(r.residual >= 0.0);
  CHECK(dm.dim() == 4);
}

TEST_CASE("stagnating far above the declared noise floor fails loudly") {
  WignerGrid g;
  g.points = square_grid(2.0, 9);
  g.values = RealVector::Constant(81, 0.9);  // not a Wigner function
  MleOptions opt;
  opt.noise_floor = 1e-10;
  opt.max_iters = 600;
  bool threw = false;
  try {
    mle_reconstruct(g, 4, opt);
  } catch (const ReconstructionFailure& e) {
    threw = true;
    CHECK(e.best.residual > 10.0 * opt.noise_floor);
    CHECK(std::abs(e.best.rho.trace().real() - 1.0) <= 1e-9);
  }
  CHECK(threw);
}

TEST_CASE("truncated fidelity projects and renormalizes") {
  StateVector cubic = cubic_phase_state(CubicSpec{});
  Matrix rho = DensityMatrix::pure(cubic).elements();
  double head = 0.0;
  for (int n = 0; n < 10; ++n) head += cubic.population(n);

  CHECK(std::abs(truncated_fidelity(rho, cubic) - 1.0) <= 1e-10);       // full space
  CHECK(std::abs(truncated_fidelity(rho, cubic, 32) - 1.0) <= 1e-10);   // cutoff = dim
  double f10 = truncated_fidelity(rho, cubic, 10);
  CHECK(f10 >= 0.999);  // within its own head the state matches itself

  // orthogonal-to-head state has no support below the cutoff
  Matrix up = DensityMatrix::pure(fock_state(12, 32)).elements();
  CHECK_THROWS_AS(truncated_fidelity(up, cubic, 10), DegenerateInput);
  CHECK(head > 0.95);  // sanity on the example state
}

TEST_CASE("bootstrap uncertainty scales with shot noise" * doctest::timeout(300)) {
  SystemParams p;
  p.cavity_dim = 8;
  StateVector state = fock_state(2, 8);
  std::vector<Complex> pts = square_grid(2.5, 15);

  WignerGrid exact = wigner_grid(DensityMatrix::pure(state), pts);
  double noiseless = bootstrap_uncertainty(exact, 8, 5, 8);
  CHECK(noiseless <= 1e-3);

  TomographyOptions opt;
  opt.decoherent = false;
  opt.shots = 400;
  opt.seed = 3;
  WignerGrid shot = simulate_tomography(ground_joint(state), pts, p, CoherenceParams::none(), opt);
  double noisy = bootstrap_uncertainty(shot, 8, 5, 8);
  CHECK(noisy >= 1e-3);
  CHECK(noisy <= 0.08);
  CHECK(bootstrap_uncertainty(shot, 8, 5, 8) == noisy);  // seeded
}
