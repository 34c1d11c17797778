#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace qrt {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// Single exception type for the whole library; `code` is a stable,
// machine-readable tag ("NonHermitianInput", "SingularJacobian", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

namespace tols {
inline constexpr double hermiticity = 1e-12;     // relative, max-norm
inline constexpr double unitarity = 1e-10;       // max-norm
inline constexpr double reconstruction = 1e-10;  // relative, max-norm
inline constexpr double kernel_series = 1e-4;    // |log ratio| switch point
inline constexpr double degeneracy_rel = 1e-14;  // weight coincidence
inline constexpr double line_merge = 1e-10;      // frequency merge distance
inline constexpr double weight_floor = 1e-300;   // below this a weight is zero
}  // namespace tols

inline double max_abs(const ComplexMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

// Tr{A B} in O(dim^2).
inline Complex trace_prod(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a.transpose().array() * b.array()).sum();
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a * b - b * a;
}

inline double hermiticity_deviation(const ComplexMatrix& a) {
  const double scale = max_abs(a);
  if (scale == 0.0) return 0.0;
  return max_abs(a - a.adjoint()) / scale;
}

// Dense hermitian observable or Hamiltonian term. Construction checks the
// hermiticity invariant; use `trusted` for matrices that are hermitian by
// construction.
struct HermitianOperator {
  ComplexMatrix mat;

  HermitianOperator() = default;
  explicit HermitianOperator(ComplexMatrix m, double tol = tols::hermiticity)
      : mat(std::move(m)) {
    if (mat.rows() != mat.cols())
      throw Error("DimensionMismatch", "operator matrix must be square");
    if (!mat.allFinite())
      throw Error("NonHermitianInput", "operator has non-finite entries");
    if (hermiticity_deviation(mat) > tol)
      throw Error("NonHermitianInput", "deviation from A = A^dagger exceeds tolerance");
  }

  static HermitianOperator trusted(ComplexMatrix m) {
    HermitianOperator h;
    h.mat = std::move(m);
    return h;
  }
  static HermitianOperator zero(Eigen::Index dim) {
    return trusted(ComplexMatrix::Zero(dim, dim));
  }

  Eigen::Index dim() const { return mat.rows(); }
  bool is_zero() const { return max_abs(mat) == 0.0; }
};

// Eigendecomposition A = U diag(lambda) U^dagger, eigenvalues ascending.
struct EigenSystem {
  RealVector eigenvalues;
  ComplexMatrix vectors;  // unitary, eigenvectors in columns

  Eigen::Index dim() const { return eigenvalues.size(); }

  // A matrix expressed in this eigenbasis, U^dagger A U.
  ComplexMatrix to_basis(const ComplexMatrix& a) const {
    return vectors.adjoint() * a * vectors;
  }
  ComplexMatrix from_basis(const ComplexMatrix& a_tilde) const {
    return vectors * a_tilde * vectors.adjoint();
  }
};

inline EigenSystem eig_hermitian(const HermitianOperator& a,
                                 double tol = tols::hermiticity) {
  if (hermiticity_deviation(a.mat) > tol)
    throw Error("NonHermitianInput", "eig_hermitian requires a hermitian matrix");
  // The solver sees the exactly-hermitian average; the deviation allowance is
  // only in the input contract.
  ComplexMatrix sym = 0.5 * (a.mat + a.mat.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error("ConvergenceFailure", "hermitian eigensolver did not converge");
  EigenSystem es{solver.eigenvalues(), solver.eigenvectors()};
  const Eigen::Index d = es.dim();
  const double scale = std::max(1.0, max_abs(sym));
  ComplexMatrix recon = es.vectors * es.eigenvalues.asDiagonal() * es.vectors.adjoint();
  if (max_abs(recon - sym) > tols::reconstruction * scale ||
      max_abs(es.vectors.adjoint() * es.vectors - ComplexMatrix::Identity(d, d)) >
          tols::unitarity)
    throw Error("ConvergenceFailure", "eigendecomposition failed accuracy contract");
  return es;
}

// U f(lambda) U^dagger for a real scalar function on the spectrum.
inline HermitianOperator matrix_function(const HermitianOperator& a,
                                         const std::function<double(double)>& f) {
  EigenSystem es = eig_hermitian(a);
  RealVector fl(es.dim());
  for (Eigen::Index i = 0; i < es.dim(); ++i) {
    fl[i] = f(es.eigenvalues[i]);
    if (!std::isfinite(fl[i]))
      throw Error("DomainError", "scalar function undefined at eigenvalue " +
                                     std::to_string(es.eigenvalues[i]));
  }
  return HermitianOperator::trusted(es.vectors * fl.asDiagonal() * es.vectors.adjoint());
}

namespace kernels {

// int_0^1 x^{1-s} y^s ds = (x - y)/(log x - log y), the BKM kernel.
// Symmetric, c(p,p) = p, and zero whenever either weight vanishes.
inline double bkm_c(double x, double y) {
  if (x < tols::weight_floor || y < tols::weight_floor) {
    if (x < tols::weight_floor && y < tols::weight_floor) return 0.0;
    // one-sided limit (p - 0)/(log p - log 0) -> 0
    return 0.0;
  }
  const double u = std::log(x / y);
  if (std::abs(u) < tols::kernel_series) {
    const double u2 = u * u;
    return 0.5 * (x + y) * (1.0 - u2 / 12.0 + u2 * u2 / 120.0);
  }
  return (x - y) / u;
}

// int_0^1 s x^{1-s} y^s ds = [y (u - 1) + x]/u^2 with u = log(y/x).
// Appears in the temperature and chemical-potential derivatives of the BKM
// form. Not symmetric. Zero if either weight vanishes.
inline double bkm_lambda(double x, double y) {
  if (x < tols::weight_floor || y < tols::weight_floor) return 0.0;
  const double u = std::log(y / x);
  if (std::abs(u) < tols::kernel_series) {
    // x * sum_m (m+1)/(m+2)! u^m
    return x * (0.5 + u / 3.0 + u * u / 8.0 + u * u * u / 30.0);
  }
  return (y * (u - 1.0) + x) / (u * u);
}

// Second divided difference of exp over the logs of the three weights:
// int over the 2-simplex of x^{l1} y^{l2} z^{l3}. Fully symmetric,
// D(p,p,p) = p/2, zero when any weight vanishes.
inline double divided3(double x, double y, double z) {
  if (x < tols::weight_floor || y < tols::weight_floor || z < tols::weight_floor)
    return 0.0;
  double u[3] = {std::log(x), std::log(y), std::log(z)};
  // sort descending so differences are stable
  if (u[0] < u[1]) std::swap(u[0], u[1]);
  if (u[1] < u[2]) std::swap(u[1], u[2]);
  if (u[0] < u[1]) std::swap(u[0], u[1]);
  const double spread = u[0] - u[2];
  if (spread < tols::kernel_series) {
    // Taylor series around the mean: e^m * sum_k h_k(d)/(k+2)! with the
    // complete homogeneous symmetric polynomials h_k.
    const double m = (u[0] + u[1] + u[2]) / 3.0;
    const double d0 = u[0] - m, d1 = u[1] - m, d2 = u[2] - m;
    const double e1 = d0 + d1 + d2;  // = 0 up to rounding
    const double e2 = d0 * d1 + d0 * d2 + d1 * d2;
    const double e3 = d0 * d1 * d2;
    const double h2 = e1 * e1 - e2;
    const double h3 = e1 * e1 * e1 - 2.0 * e1 * e2 + e3;
    return std::exp(m) * (1.0 / 2.0 + e1 / 6.0 + h2 / 24.0 + h3 / 120.0);
  }
  // f[u0,u1] with confluent fallback per pair
  auto dd2 = [](double a, double b) {
    const double h = a - b;
    if (std::abs(h) < tols::kernel_series)
      return std::exp(0.5 * (a + b)) * (1.0 + h * h / 24.0);
    return (std::exp(a) - std::exp(b)) / h;
  };
  return (dd2(u[0], u[1]) - dd2(u[1], u[2])) / (u[0] - u[2]);
}

}  // namespace kernels

// Whitelisted operator-monotone functions f(z) indexing the generalized
// covariance K^f_rho. Arbitrary user functions are not accepted since
// operator monotonicity cannot be verified numerically.
class MonotoneFunction {
 public:
  enum class Tag { Const1, Linear, Symmetric, Power, Bkm, RootMean };

 private:
  Tag tag_;
  double gamma_;
  MonotoneFunction(Tag t, double g) : tag_(t), gamma_(g) {}

 public:

  static MonotoneFunction const1() { return {Tag::Const1, 0.0}; }
  static MonotoneFunction linear() { return {Tag::Linear, 0.0}; }
  static MonotoneFunction symmetric() { return {Tag::Symmetric, 0.0}; }
  static MonotoneFunction power(double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0))
      throw Error("UnknownFunctionTag", "power exponent must lie in [0, 1]");
    return {Tag::Power, gamma};
  }
  static MonotoneFunction bkm() { return {Tag::Bkm, 0.0}; }
  static MonotoneFunction root_mean() { return {Tag::RootMean, 0.0}; }

  static MonotoneFunction parse(const std::string& name) {
    if (name == "const1" || name == "wightman") return const1();
    if (name == "linear") return linear();
    if (name == "symmetric") return symmetric();
    if (name == "bkm") return bkm();
    if (name == "root_mean") return root_mean();
    if (name.rfind("power:", 0) == 0) return power(std::stod(name.substr(6)));
    throw Error("UnknownFunctionTag", "unknown monotone function tag '" + name + "'");
  }

  Tag tag() const { return tag_; }
  double gamma() const { return gamma_; }

  std::string name() const {
    switch (tag_) {
      case Tag::Const1: return "const1";
      case Tag::Linear: return "linear";
      case Tag::Symmetric: return "symmetric";
      case Tag::Power: return "power:" + std::to_string(gamma_);
      case Tag::Bkm: return "bkm";
      case Tag::RootMean: return "root_mean";
    }
    return "?";
  }

  // f(z) for z >= 0; the BKM tag takes f(1) = 1 by continuity.
  double eval(double z) const {
    switch (tag_) {
      case Tag::Const1: return 1.0;
      case Tag::Linear: return z;
      case Tag::Symmetric: return 0.5 * (1.0 + z);
      case Tag::Power: return std::pow(z, gamma_);
      case Tag::Bkm: {
        const double u = std::log(z);
        if (std::abs(u) < tols::kernel_series)
          return std::sqrt(z) * (1.0 + u * u / 24.0);
        return (z - 1.0) / u;
      }
      case Tag::RootMean: {
        const double s = std::sqrt(z) + 1.0;
        return 0.25 * s * s;
      }
    }
    return 0.0;
  }

  // Dual function f~(z) = z f(1/z); generalized covariances built on the dual
  // are the transposes of those built on f.
  MonotoneFunction dual() const {
    switch (tag_) {
      case Tag::Const1: return linear();
      case Tag::Linear: return const1();
      case Tag::Power: return power(1.0 - gamma_);
      default: return *this;  // symmetric, bkm, root_mean are self-dual
    }
  }

  // Matrix-element kernel f(pj/pk) pk in closed form. The closed forms carry
  // the degenerate and zero-weight conventions exactly: coinciding weights
  // give f(1) pk, a vanishing pk switches to the dual form f~(pk/pj) pj,
  // and the element is zero when both weights vanish.
  double weight(double pj, double pk) const {
    const bool zj = pj < tols::weight_floor, zk = pk < tols::weight_floor;
    if (zj && zk) return 0.0;
    switch (tag_) {
      case Tag::Const1: return pk;
      case Tag::Linear: return pj;
      case Tag::Symmetric: return 0.5 * (pj + pk);
      case Tag::Power:
        if (zj) return gamma_ == 0.0 ? pk : 0.0;
        if (zk) return gamma_ == 1.0 ? pj : 0.0;
        return std::pow(pj, gamma_) * std::pow(pk, 1.0 - gamma_);
      case Tag::Bkm: return kernels::bkm_c(pj, pk);
      case Tag::RootMean: {
        const double s = 0.5 * (std::sqrt(pj) + std::sqrt(pk));
        return s * s;
      }
    }
    return 0.0;
  }
};

// K^f_rho(B): in the rho eigenbasis <j|K(B)|k> = <j|B|k> f(pj/pk) pk.
// `rho` is the eigensystem of the density matrix itself, so its eigenvalues
// are the statistical weights.
inline ComplexMatrix apply_kf(const EigenSystem& rho, const HermitianOperator& b,
                              const MonotoneFunction& f) {
  const Eigen::Index d = rho.dim();
  if (b.dim() != d) throw Error("DimensionMismatch", "apply_kf operand dimension");
  RealVector p = rho.eigenvalues;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (p[j] < -1e-12)
      throw Error("NegativeWeight", "density matrix eigenvalue " + std::to_string(p[j]));
    p[j] = std::max(p[j], 0.0);
    sum += p[j];
  }
  if (std::abs(sum - 1.0) > 1e-8)
    throw Error("NegativeWeight", "density matrix weights do not sum to one");
  ComplexMatrix bt = rho.to_basis(b.mat);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = 0; k < d; ++k) bt(j, k) *= f.weight(p[j], p[k]);
  return rho.from_basis(bt);
}

}  // namespace qrt
