#include <cmath>

#include "doctest.h"
#include "snapkit/fock.hpp"
#include "snapkit/rng.hpp"
#include "snapkit/targets.hpp"
#include "test_util.hpp"

using namespace snapkit;
using namespace snapkit::testutil;

namespace {

Matrix random_density(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = Complex(rng.normal(), rng.normal());
  Matrix rho = m * m.adjoint();
  rho /= rho.trace();
  return rho;
}

}  // namespace

// ---------- states ----------

TEST_CASE("state vector normalizes and validates") {
  Vector v(3);
  v << Complex(3, 0), Complex(0, 4), Complex(0, 0);
  StateVector psi(v);
  CHECK(psi.amplitudes().norm() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(psi.population(0) == doctest::Approx(0.36));
  CHECK_THROWS_AS(StateVector(Vector::Zero(4)), DegenerateInput);
}

TEST_CASE("basis states and resize") {
  StateVector two = StateVector::basis(2, 8);
  CHECK(two.population(2) == doctest::Approx(1.0));
  CHECK(two.mean_photon_number() == doctest::Approx(2.0));
  StateVector padded = two.resized(16);
  CHECK(padded.dim() == 16);
  CHECK(std::abs(padded.overlap(StateVector::basis(2, 16))) == doctest::Approx(1.0));
}

TEST_CASE("density matrix invariants") {
  DensityMatrix rho(random_density(6, 7));
  CHECK((rho.elements() - rho.elements().adjoint()).norm() < 1e-10);
  CHECK(std::abs(rho.elements().trace() - Complex(1, 0)) < 1e-10);
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.elements());
  CHECK(es.eigenvalues().minCoeff() > -1e-8);

  // non-PSD input is rejected
  Matrix bad = Matrix::Identity(3, 3);
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;
  CHECK_THROWS(DensityMatrix(bad));
}

// ---------- displacement ----------

TEST_CASE("displacement at alpha=0 is the identity") {
  Operator d = displacement_operator(Complex(0, 0), 8);
  CHECK((d.elements - Matrix::Identity(8, 8)).norm() < 1e-12);
}

TEST_CASE("displacement of vacuum gives Poisson populations") {
  Operator d = displacement_operator(Complex(1, 0), 32);
  Vector psi = d.elements.col(0);
  double fact = 1.0;
  for (int n = 0; n <= 5; ++n) {
    if (n > 0) fact *= n;
    CHECK(std::norm(psi(n)) == doctest::Approx(std::exp(-1.0) / fact).epsilon(1e-8));
  }
}

TEST_CASE("first reference displacement reproduces the coherent state") {
  Operator d = displacement_operator(Complex(1.390, 0), 32);
  StateVector col((Vector(d.elements.col(0))));
  StateVector target = coherent_state(Complex(1.390, 0), 32);
  CHECK(std::abs(col.overlap(target)) > 1.0 - 1e-6);
}

TEST_CASE("displacement operators are unitary") {
  for (auto alpha : {Complex(0.3, -1.2), Complex(-2.0, 0.5)}) {
    Operator d = displacement_operator(alpha, 40);
    CHECK((d.elements.adjoint() * d.elements - Matrix::Identity(40, 40)).norm() < 1e-9);
  }
}

// ---------- SNAP ----------

TEST_CASE("zero-phase SNAP is the identity") {
  Operator s = snap_unitary(rv({0, 0, 0}), 8);
  CHECK((s.elements - Matrix::Identity(8, 8)).norm() == 0.0);
}

TEST_CASE("single pi phase flips the addressed level") {
  Vector v(4);
  v << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0, 0;
  Operator s = snap_unitary(rv({0, kPi}), 4);
  Vector out = s.elements * v;
  CHECK(std::abs(out(0) - v(0)) < 1e-12);
  CHECK(std::abs(out(1) + v(1)) < 1e-12);
}

TEST_CASE("SNAP diagonal matches e^{i theta}") {
  RealVector th = rv({2.049, -0.654, 1.130, -1.106});
  Operator s = snap_unitary(th, 32);
  for (int j = 0; j < 32; ++j) {
    Complex want = j < th.size() ? std::exp(Complex(0, th(j))) : Complex(1, 0);
    CHECK(std::abs(s.elements(j, j) - want) < 1e-12);
  }
  CHECK((s.elements - Matrix(s.elements.diagonal().asDiagonal())).norm() == 0.0);
}

// ---------- parity ----------

TEST_CASE("parity operator basics") {
  Operator p = parity_operator(2);
  CHECK(p.elements(0, 0) == Complex(1, 0));
  CHECK(p.elements(1, 1) == Complex(-1, 0));

  StateVector two = StateVector::basis(2, 8);
  Complex exp2 = two.amplitudes().dot(parity_operator(8).elements * two.amplitudes());
  CHECK(exp2.real() == doctest::Approx(1.0));
}

TEST_CASE("coherent-state parity is exp(-2|alpha|^2)") {
  StateVector psi = coherent_state(Complex(1, 0), 32);
  Complex e = psi.amplitudes().dot(parity_operator(32).elements * psi.amplitudes());
  CHECK(e.real() == doctest::Approx(std::exp(-2.0)).epsilon(1e-6));
  CHECK(std::abs(e.imag()) < 1e-10);
}

// ---------- fidelity ----------

TEST_CASE("fidelity of a state with itself is 1") {
  DensityMatrix rho(random_density(8, 11));
  CHECK(fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fidelity of orthogonal states is 0") {
  DensityMatrix a = DensityMatrix::pure(StateVector::basis(0, 4));
  DensityMatrix b = DensityMatrix::pure(StateVector::basis(1, 4));
  CHECK(fidelity(a, b) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fidelity between binomial and vacuum is one half") {
  StateVector bin = binomial_state(8);
  StateVector vac = StateVector::basis(0, 8);
  CHECK(fidelity(bin, vac) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(fidelity(DensityMatrix::pure(bin), vac) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("mixed-state fidelity agrees with pure overlap") {
  StateVector a = coherent_state(Complex(0.7, 0.2), 16);
  StateVector b = coherent_state(Complex(0.4, -0.3), 16);
  double overlap = std::norm(a.overlap(b));
  // the matrix square root of a rank-1 projector amplifies roundoff to ~sqrt(eps)
  CHECK(fidelity(DensityMatrix::pure(a), DensityMatrix::pure(b)) ==
        doctest::Approx(overlap).epsilon(1e-6));
}

// ---------- gate sequences ----------

TEST_CASE("sequence validation") {
  GateSequence seq = fock2_sequence();
  CHECK_NOTHROW(seq.validate());
  CHECK(seq.n_snaps() == 2);
  CHECK(seq.max_snap_index() == 6);

  GateSequence bad;
  bad.displacements = {Complex(1, 0)};
  bad.snaps = {rv({0.1}), rv({0.2})};
  CHECK_THROWS(bad.validate());

  GateSequence empty;
  CHECK_NOTHROW(empty.validate());
}

TEST_CASE("phase wrapping lands in (-pi, pi]") {
  GateSequence seq;
  seq.displacements = {Complex(0.1, 0), Complex(0, 0)};
  seq.snaps = {rv({3 * kPi, -kPi, kPi})};
  seq.wrap_phases();
  CHECK(seq.snaps[0](0) == doctest::Approx(kPi));
  CHECK(seq.snaps[0](1) == doctest::Approx(kPi));  // -pi wraps to +pi
  CHECK(seq.snaps[0](2) == doctest::Approx(kPi));
}

TEST_CASE("empty sequence leaves the input unchanged") {
  GateSequence seq;
  StateVector in = coherent_state(Complex(0.5, 0.5), 16);
  StateVector out = apply_gate_sequence(seq, in);
  CHECK(std::abs(in.overlap(out)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reference fock-2 parameters hit the target") {
  GateSequence seq = fock2_sequence();
  int wd = sequence_working_dim(seq);
  StateVector out = apply_gate_sequence(seq, StateVector::basis(0, wd));
  CHECK(fidelity(out, fock_state(2, wd)) > 0.99);
}

TEST_CASE("reference binomial parameters hit the target") {
  GateSequence seq = binomial_sequence();
  int wd = sequence_working_dim(seq);
  StateVector out = apply_gate_sequence(seq, StateVector::basis(0, wd));
  CHECK(fidelity(out, binomial_state(wd)) > 0.99);
}

TEST_CASE("snapshot list follows the gate order") {
  GateSequence seq = binomial_sequence();
  auto snaps = snapshot_states(seq, 0);
  REQUIRE(snaps.size() == 5);  // D S D S D, no trailing zero
  // first snapshot is the first displacement applied to vacuum
  StateVector coh = coherent_state(Complex(1.304, 0), snaps[0].dim());
  CHECK(std::abs(snaps[0].overlap(coh)) == doctest::Approx(1.0).epsilon(1e-9));
  // last snapshot is the full sequence
  StateVector full = apply_gate_sequence(seq, StateVector::basis(0, snaps[4].dim()));
  CHECK(std::abs(snaps[4].overlap(full)) == doctest::Approx(1.0).epsilon(1e-12));

  GateSequence empty;
  CHECK(snapshot_states(empty).empty());

  // a trailing zero displacement contributes no snapshot
  GateSequence tz = seq;
  tz.displacements.back() = Complex(0, 0);
  CHECK(snapshot_states(tz).size() == 4);
}

TEST_CASE("truncation guard fires on runaway displacement") {
  GateSequence seq;
  seq.displacements = {Complex(5.0, 0), Complex(0, 0)};
  seq.snaps = {rv({0.0})};
  CHECK_THROWS_AS(apply_gate_sequence(seq, StateVector::basis(0, 6)), TruncationError);
}

TEST_CASE("squeeze operator matches the analytic P(0)") {
  Matrix s = squeeze_operator(Complex(0.5, 0), 40);
  Vector sq = s.col(0);
  CHECK(std::norm(sq(0)) == doctest::Approx(1.0 / std::cosh(0.5)).epsilon(1e-6));
  CHECK((s.adjoint() * s - Matrix::Identity(40, 40)).norm() < 1e-8);
}
