#include <catch2/catch.hpp>

#include "qrt/linalg.hpp"
#include "qrt/model.hpp"
#include "test_util.hpp"

using namespace qrt;
using qrt_test::random_hermitian;
using qrt_test::random_unitary;

TEST_CASE("eig_hermitian on diagonal and Pauli matrices", "[linalg]") {
  ComplexMatrix d2(2, 2);
  d2 << 1, 0, 0, 2;
  EigenSystem es = eig_hermitian(HermitianOperator(d2));
  REQUIRE(es.eigenvalues[0] == Approx(1.0));
  REQUIRE(es.eigenvalues[1] == Approx(2.0));
  REQUIRE(max_abs(es.vectors.cwiseAbs().cast<Complex>() -
                  ComplexMatrix::Identity(2, 2)) < 1e-12);

  EigenSystem sx = eig_hermitian(HermitianOperator(pauli::x()));
  REQUIRE(sx.eigenvalues[0] == Approx(-1.0));
  REQUIRE(sx.eigenvalues[1] == Approx(1.0));
}

TEST_CASE("eig_hermitian reconstructs a synthetic spectrum", "[linalg]") {
  // oracle: assemble A = U diag(lambda) U^dagger from a random unitary
  const Eigen::Index d = 8;
  ComplexMatrix u = random_unitary(d);
  RealVector lam(d);
  for (Eigen::Index i = 0; i < d; ++i) lam[i] = std::cos(3.7 * double(i)) * 2.0;
  ComplexMatrix a = u * lam.cast<Complex>().asDiagonal() * u.adjoint();
  HermitianOperator ha(0.5 * (a + a.adjoint()));
  EigenSystem es = eig_hermitian(ha);
  ComplexMatrix recon = es.vectors * es.eigenvalues.asDiagonal() * es.vectors.adjoint();
  REQUIRE(max_abs(recon - ha.mat) <= 1e-10 * max_abs(ha.mat));
  std::sort(lam.data(), lam.data() + d);
  for (Eigen::Index i = 0; i < d; ++i)
    REQUIRE(es.eigenvalues[i] == Approx(lam[i]).margin(1e-10));
}

TEST_CASE("eig_hermitian rejects non-hermitian input", "[linalg]") {
  ComplexMatrix bad(2, 2);
  bad << 0, 1, 0, 0;
  REQUIRE_THROWS_AS(HermitianOperator(bad), Error);
  try {
    HermitianOperator h(bad);
  } catch (const Error& e) {
    REQUIRE(e.code() == "NonHermitianInput");
  }
}

TEST_CASE("matrix_function basics", "[linalg]") {
  HermitianOperator a = random_hermitian(5);
  HermitianOperator id = matrix_function(a, [](double x) { return x; });
  REQUIRE(max_abs(id.mat - a.mat) < 1e-12 * std::max(1.0, max_abs(a.mat)));

  ComplexMatrix d2(2, 2);
  d2 << 0, 0, 0, std::log(2.0);
  HermitianOperator e = matrix_function(HermitianOperator(d2),
                                        [](double x) { return std::exp(x); });
  REQUIRE(e.mat(0, 0).real() == Approx(1.0));
  REQUIRE(e.mat(1, 1).real() == Approx(2.0));
}

TEST_CASE("matrix_function power splitting of a Gibbs state", "[linalg]") {
  // rho^0.3 rho^0.7 = rho, oracle is exponent addition in the eigenbasis
  HermitianOperator h = random_hermitian(6);
  HermitianOperator exph = matrix_function(h, [](double x) { return std::exp(-x); });
  const double z = exph.mat.trace().real();
  HermitianOperator rho(exph.mat / z);
  HermitianOperator r3 = matrix_function(rho, [](double x) { return std::pow(x, 0.3); });
  HermitianOperator r7 = matrix_function(rho, [](double x) { return std::pow(x, 0.7); });
  REQUIRE(max_abs(r3.mat * r7.mat - rho.mat) <= 1e-12);
}

TEST_CASE("matrix_function domain errors surface", "[linalg]") {
  ComplexMatrix d2(2, 2);
  d2 << -1, 0, 0, 1;
  REQUIRE_THROWS_AS(
      matrix_function(HermitianOperator(d2), [](double x) { return std::sqrt(x); }),
      Error);
}

namespace {

qrt::EigenSystem gibbs_eigensystem(const qrt::HermitianOperator& h, double beta,
                                   qrt::RealVector* weights) {
  using namespace qrt;
  EigenSystem es = eig_hermitian(h);
  RealVector w = (-(beta * (es.eigenvalues.array() - es.eigenvalues.minCoeff()))).exp();
  w /= w.sum();
  *weights = w;
  // density matrix eigensystem: weights ascending order mismatch is fine,
  // apply_kf only needs matching (eigenvalue, vector) pairs
  EigenSystem rho{w, es.vectors};
  return rho;
}

}  // namespace

TEST_CASE("apply_kf with f = 1 is right multiplication by rho", "[linalg]") {
  HermitianOperator h = random_hermitian(5);
  RealVector w;
  EigenSystem rho = gibbs_eigensystem(h, 0.9, &w);
  ComplexMatrix rho_mat = rho.from_basis(ComplexMatrix(w.cast<Complex>().asDiagonal()));
  HermitianOperator b = random_hermitian(5);
  ComplexMatrix kf = apply_kf(rho, b, MonotoneFunction::const1());
  REQUIRE(max_abs(kf - b.mat * rho_mat) < 1e-12);
}

TEST_CASE("apply_kf on commuting operators multiplies by rho", "[linalg]") {
  HermitianOperator h = random_hermitian(4);
  RealVector w;
  EigenSystem rho = gibbs_eigensystem(h, 1.3, &w);
  ComplexMatrix rho_mat = rho.from_basis(ComplexMatrix(w.cast<Complex>().asDiagonal()));
  // B = h commutes with rho
  for (auto f : {MonotoneFunction::symmetric(), MonotoneFunction::bkm(),
                 MonotoneFunction::power(0.4), MonotoneFunction::root_mean()}) {
    ComplexMatrix kf = apply_kf(rho, h, f);
    REQUIRE(max_abs(kf - h.mat * rho_mat) < 1e-11);
  }
}

TEST_CASE("apply_kf square-root tag gives sqrt(rho) B sqrt(rho)", "[linalg]") {
  SystemSpec qb = build_qubit(1.0);
  HermitianOperator exph =
      matrix_function(qb.H0, [](double x) { return std::exp(-x); });
  HermitianOperator rho_op(exph.mat / exph.mat.trace().real());
  EigenSystem rho = eig_hermitian(rho_op);
  HermitianOperator b = random_hermitian(2);
  HermitianOperator sqrt_rho =
      matrix_function(rho_op, [](double x) { return std::sqrt(std::max(x, 0.0)); });
  ComplexMatrix expect = sqrt_rho.mat * b.mat * sqrt_rho.mat;
  ComplexMatrix kf = apply_kf(rho, b, MonotoneFunction::power(0.5));
  REQUIRE(max_abs(kf - expect) <= 1e-12);
}

TEST_CASE("hermiticity is closed under sums and unitary conjugation", "[linalg]") {
  for (int trial = 0; trial < 4; ++trial) {
    HermitianOperator a = random_hermitian(6), b = random_hermitian(6);
    ComplexMatrix sum = 0.7 * a.mat - 1.9 * b.mat;
    REQUIRE(hermiticity_deviation(sum) < tols::hermiticity);
    ComplexMatrix u = random_unitary(6);
    REQUIRE(hermiticity_deviation(u * a.mat * u.adjoint()) < 1e-11);
  }
}

TEST_CASE("transpose relation between f and its dual", "[linalg]") {
  HermitianOperator h = random_hermitian(5);
  RealVector w;
  EigenSystem rho = gibbs_eigensystem(h, 0.7, &w);
  HermitianOperator a = random_hermitian(5), b = random_hermitian(5);
  for (auto f : {MonotoneFunction::const1(), MonotoneFunction::linear(),
                 MonotoneFunction::symmetric(), MonotoneFunction::power(0.3),
                 MonotoneFunction::bkm(), MonotoneFunction::root_mean()}) {
    Complex lhs = trace_prod(a.mat, apply_kf(rho, b, f));
    Complex rhs = trace_prod(b.mat, apply_kf(rho, a, f.dual()));
    REQUIRE(std::abs(lhs - rhs) < 1e-11);
  }
}

TEST_CASE("K^f preserves the trace of the identity", "[linalg]") {
  HermitianOperator h = random_hermitian(6);
  RealVector w;
  EigenSystem rho = gibbs_eigensystem(h, 1.1, &w);
  HermitianOperator one(ComplexMatrix::Identity(6, 6));
  for (auto f : {MonotoneFunction::const1(), MonotoneFunction::symmetric(),
                 MonotoneFunction::bkm(), MonotoneFunction::power(0.8),
                 MonotoneFunction::root_mean()}) {
    Complex tr = apply_kf(rho, one, f).trace();
    REQUIRE(tr.real() == Approx(1.0).margin(1e-12));
    REQUIRE(std::abs(tr.imag()) < 1e-13);
  }
}

TEST_CASE("whitelist rejects unknown tags and bad exponents", "[linalg]") {
  REQUIRE_THROWS_AS(MonotoneFunction::parse("cauchy"), Error);
  REQUIRE_THROWS_AS(MonotoneFunction::power(1.5), Error);
  REQUIRE(MonotoneFunction::parse("power:0.5").gamma() == Approx(0.5));
}

TEST_CASE("kernel small-log series joins the direct quotient", "[linalg]") {
  // values straddling the series switch point must agree smoothly
  for (double u : {1e-5, 5e-5, 2e-4, 1e-3}) {
    const double x = 0.3 * std::exp(u), y = 0.3;
    const double direct = (x - y) / std::log(x / y);
    REQUIRE(kernels::bkm_c(x, y) == Approx(direct).epsilon(1e-10));
    // lambda kernel against 2000-point midpoint quadrature
    double quad = 0.0;
    const int nq = 2000;
    for (int i = 0; i < nq; ++i) {
      const double s = (i + 0.5) / nq;
      quad += s * std::pow(x, 1.0 - s) * std::pow(y, s) / nq;
    }
    REQUIRE(kernels::bkm_lambda(x, y) == Approx(quad).epsilon(1e-7));
  }
  // divided3 against quadrature for distinct, nearly equal and zero weights;
  // the simplex is mapped to the unit square (l2 = (1-l1) u) so the midpoint
  // rule converges at second order
  auto quad3 = [](double x, double y, double z) {
    const int nq = 400;
    double acc = 0.0;
    for (int i = 0; i < nq; ++i)
      for (int jj = 0; jj < nq; ++jj) {
        const double l1 = (i + 0.5) / nq, u = (jj + 0.5) / nq;
        const double l2 = (1.0 - l1) * u;
        acc += (1.0 - l1) * std::pow(x, l1) * std::pow(y, l2) *
               std::pow(z, 1.0 - l1 - l2) / (nq * nq);
      }
    return acc;
  };
  REQUIRE(kernels::divided3(0.5, 0.3, 0.2) ==
          Approx(quad3(0.5, 0.3, 0.2)).epsilon(1e-5));
  REQUIRE(kernels::divided3(0.4, 0.4, 0.4) == Approx(0.2).margin(1e-12));
  REQUIRE(kernels::divided3(0.0, 0.3, 0.2) == 0.0);
}
