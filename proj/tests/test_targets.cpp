#include <cmath>

#include "doctest.h"
#include "snapkit/fock.hpp"
#include "snapkit/targets.hpp"

using namespace snapkit;

TEST_CASE("fock states") {
  CHECK(fidelity(fock_state(0, 8), StateVector::basis(0, 8)) == doctest::Approx(1.0));
  CHECK(fock_state(2, 32).mean_photon_number() == doctest::Approx(2.0));
  CHECK(fock_state(10, 32).population(10) == doctest::Approx(1.0));
  CHECK_THROWS(fock_state(8, 8));
}

TEST_CASE("binomial state") {
  StateVector b = binomial_state(8);
  CHECK(b.mean_photon_number() == doctest::Approx(2.0).epsilon(1e-12));
  Complex par = b.amplitudes().dot(parity_operator(8).elements * b.amplitudes());
  CHECK(par.real() == doctest::Approx(1.0));
  CHECK(std::norm(b.amplitude(4)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("odd cat populations and mean photon number") {
  const double a2 = 2.0;
  StateVector cat = cat_state(Complex(std::sqrt(a2), 0), CatParity::odd, 32);
  for (int n = 0; n < 32; n += 2) CHECK(cat.population(n) <= 1e-12);
  // <n> for the normalized odd cat: |a|^2 (1 + e^{-2|a|^2}) / (1 - e^{-2|a|^2})
  double want = a2 * (1 + std::exp(-2 * a2)) / (1 - std::exp(-2 * a2));
  CHECK(std::abs(cat.mean_photon_number() - want) <= 1e-3);
}

TEST_CASE("small even cat approaches vacuum") {
  StateVector cat = cat_state(Complex(0.01, 0), CatParity::even, 8);
  CHECK(fidelity(cat, StateVector::basis(0, 8)) > 0.999);
}

TEST_CASE("grid state defaults") {
  StateVector g = gkp_state(GkpSpec{});
  CHECK(g.amplitudes().norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(g.mean_photon_number() - 4.0) <= 0.5);
}

TEST_CASE("wide-envelope grid state is vacuum dominated") {
  GkpSpec spec;
  spec.sigma = 1.0;
  spec.grid_range = 1;
  StateVector g = gkp_state(spec);
  CHECK(fidelity(g, StateVector::basis(0, g.dim())) >= 0.5);
}

TEST_CASE("grid sum is converged in the grid range") {
  GkpSpec base;      // R = 8
  GkpSpec wide = base;
  wide.grid_range = 10;
  double ov = std::abs(gkp_state(base).overlap(gkp_state(wide)));
  CHECK(ov > 1.0 - 1e-9);
}

TEST_CASE("cubic phase state limits") {
  CubicSpec trivial;
  trivial.cubicity = 0.0;
  trivial.squeezing = 0.0;
  trivial.displacement = 0.0;
  StateVector v = cubic_phase_state(trivial);
  CHECK(fidelity(v, StateVector::basis(0, v.dim())) == doctest::Approx(1.0).epsilon(1e-10));

  CubicSpec squeezed;
  squeezed.cubicity = 0.0;
  squeezed.squeezing = 0.5;
  squeezed.displacement = 0.0;
  squeezed.dim = 40;
  StateVector sq = cubic_phase_state(squeezed);
  for (int n = 1; n < 40; n += 2) CHECK(sq.population(n) <= 1e-12);
  CHECK(std::abs(sq.population(0) - 1.0 / std::cosh(0.5)) <= 1e-6);
}

TEST_CASE("default cubic target keeps 0.97 of its weight in the first 10 levels") {
  StateVector c = cubic_phase_state(CubicSpec{});
  double head = 0.0;
  for (int n = 0; n < 10; ++n) head += c.population(n);
  CHECK(std::abs(head - 0.97) <= 0.01);
}

TEST_CASE("truncate_to") {
  StateVector c = cubic_phase_state(CubicSpec{});
  StateVector same = truncate_to(c, c.dim());
  CHECK(std::abs(c.overlap(same)) == doctest::Approx(1.0).epsilon(1e-12));

  // norm^2 kept before renormalization equals the head occupation
  double head = 0.0;
  for (int n = 0; n < 10; ++n) head += c.population(n);
  StateVector cut = truncate_to(c, 10);
  Complex ov = c.overlap(cut);  // <c|cut> = sqrt(head)
  CHECK(std::norm(ov) == doctest::Approx(head).epsilon(1e-10));
  for (int n = 10; n < cut.dim(); ++n) CHECK(cut.population(n) == 0.0);

  CHECK_THROWS_AS(truncate_to(StateVector::basis(4, 8), 4), DegenerateInput);
}

TEST_CASE("coherent state mean photon number") {
  StateVector psi = coherent_state(Complex(1.2, -0.7), 40);
  CHECK(psi.mean_photon_number() == doctest::Approx(1.2 * 1.2 + 0.7 * 0.7).epsilon(1e-8));
}
