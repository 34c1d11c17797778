#include <catch2/catch.hpp>

#include "qrt/model.hpp"
#include "test_util.hpp"

using namespace qrt;

namespace {

// small spec with pair and triple couplings for derivative checks
SystemSpec coupled_two_level() {
  SystemSpec spec;
  spec.dim = 2;
  spec.H0 = HermitianOperator(0.7 * pauli::z());
  spec.N_op = HermitianOperator::zero(2);
  spec.phi.emplace_back(pauli::x());
  spec.phi.emplace_back(pauli::z());
  spec.labels = {"a", "b"};
  spec.j_init = RealVector::Zero(2);
  spec.set_pair_coupling(0, 1, 0.4 * pauli::y());
  spec.set_pair_coupling(0, 0, 0.3 * pauli::z());
  spec.set_triple_coupling(0, 0, 1, 0.2 * pauli::x());
  spec.set_triple_coupling(1, 1, 1, 0.1 * pauli::z());
  return spec;
}

}  // namespace

TEST_CASE("hamiltonian_at reproduces the expansion point", "[model]") {
  SystemSpec spec = coupled_two_level();
  REQUIRE(max_abs(hamiltonian_at(spec, spec.j_init).mat - spec.H0.mat) == 0.0);

  SystemSpec qb = build_qubit(1.0);
  RealVector j(1);
  j << 0.1;
  ComplexMatrix expect = qb.H0.mat - 0.1 * pauli::x();
  REQUIRE(max_abs(hamiltonian_at(qb, j).mat - expect) < 1e-15);
}

TEST_CASE("second source derivative of H recovers the pair coupling", "[model]") {
  SystemSpec spec = coupled_two_level();
  const double h = 1e-3;
  // central second difference in the (0,1) direction pair
  auto H = [&](double a, double b) {
    RealVector j(2);
    j << a, b;
    return hamiltonian_at(spec, j).mat;
  };
  ComplexMatrix d2 = (H(h, h) - H(h, -h) - H(-h, h) + H(-h, -h)) / (4 * h * h);
  REQUIRE(max_abs(d2 + *spec.pair_coupling(0, 1)) < 1e-7);
}

TEST_CASE("observable_at equals minus the source gradient of H", "[model]") {
  SystemSpec spec = coupled_two_level();
  const double h = 1e-4;
  RealVector j(2);
  j << 0.17, -0.23;
  for (int m = 0; m < 2; ++m) {
    RealVector jp = j, jm = j;
    jp[m] += h;
    jm[m] -= h;
    ComplexMatrix fd =
        -(hamiltonian_at(spec, jp).mat - hamiltonian_at(spec, jm).mat) / (2 * h);
    ComplexMatrix an = observable_at(spec, m, j).mat;
    REQUIRE(max_abs(fd - an) < 1e-6 * std::max(1.0, max_abs(an)));
  }
  REQUIRE(max_abs(observable_at(spec, 0, spec.j_init).mat - spec.phi[0].mat) == 0.0);
}

TEST_CASE("observable_at with no tables is constant in j", "[model]") {
  SystemSpec qb = build_qubit(2.0);
  RealVector j(1);
  j << 0.6;
  REQUIRE(max_abs(observable_at(qb, 0, j).mat - pauli::x()) == 0.0);
  REQUIRE_THROWS_AS(observable_at(qb, 3, j), Error);
}

TEST_CASE("transverse Ising builder basics", "[model]") {
  SystemSpec s1 = build_transverse_ising(1, 0.8, 0.5);
  REQUIRE(s1.dim == 2);
  REQUIRE(max_abs(s1.H0.mat + 0.5 * pauli::x()) < 1e-15);

  SystemSpec s3 = build_transverse_ising(3, 1.0, 0.4);
  REQUIRE(s3.dim == 8);
  REQUIRE(s3.n_sources() == 6);
  REQUIRE_FALSE(s3.has_number());  // h != 0 leaves no conserved charge

  REQUIRE_THROWS_AS(build_transverse_ising(13, 1.0, 0.0), Error);
}

TEST_CASE("two-site Ising spectrum at h = 0", "[model]") {
  SystemSpec s2 = build_transverse_ising(2, 1.0, 0.0);
  EigenSystem es = eig_hermitian(s2.H0);
  RealVector expect(4);
  expect << -1, -1, 1, 1;
  for (int i = 0; i < 4; ++i)
    REQUIRE(es.eigenvalues[i] == Approx(expect[i]).margin(1e-12));
  REQUIRE(s2.has_number());
  REQUIRE(max_abs(commutator(s2.H0.mat, s2.N_op.mat)) < 1e-12);
}

TEST_CASE("qubit builder", "[model]") {
  SystemSpec qb = build_qubit(1.0);
  EigenSystem es = eig_hermitian(qb.H0);
  REQUIRE(es.eigenvalues[0] == Approx(-0.5));
  REQUIRE(es.eigenvalues[1] == Approx(0.5));
  // ground state is |down>
  REQUIRE(std::abs(es.vectors(1, 0)) == Approx(1.0));
  REQUIRE(qb.H0.mat.trace() == Complex(0, 0));
  REQUIRE(max_abs(commutator(qb.H0.mat, qb.N_op.mat)) == 0.0);
}

TEST_CASE("shipped builders satisfy the gradient identity", "[model]") {
  const double h = 1e-4;
  for (SystemSpec spec : {build_qubit(1.3), build_transverse_ising(3, 1.0, 0.7)}) {
    RealVector j = spec.j_init;
    for (int m = 0; m < spec.n_sources(); ++m) {
      RealVector jp = j, jm = j;
      jp[m] += h;
      jm[m] -= h;
      ComplexMatrix fd =
          -(hamiltonian_at(spec, jp).mat - hamiltonian_at(spec, jm).mat) / (2 * h);
      REQUIRE(max_abs(fd - observable_at(spec, m, j).mat) <
              1e-6 * std::max(1.0, max_abs(spec.phi[m].mat)));
    }
    REQUIRE(hermiticity_deviation(hamiltonian_at(spec, j).mat) < tols::hermiticity);
  }
}
