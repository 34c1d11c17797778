#pragma once

#include <array>
#include <iostream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "qrt/linalg.hpp"

namespace qrt {

// Intrinsic time parity of each source under the antiunitary reversal, plus
// the flag asserting that H and the couplings are real (even sources) or
// purely imaginary (odd sources) in the computational basis, so that the
// reversal is entrywise conjugation.
struct TimeParity {
  std::vector<int> eps;  // +1 or -1 per source
  bool basis_real = false;

  static TimeParity all_even(int n_sources, bool basis_real_flag = true) {
    return TimeParity{std::vector<int>(static_cast<size_t>(n_sources), 1),
                      basis_real_flag};
  }
};

// Finite-dimensional system with a source-dependent Hamiltonian expanded to
// cubic order around j_init:
//   H(j) = H0 - sum_m dj^m phi_m - 1/2 sum_mn dj^m dj^n phi_mn
//          - 1/6 sum_mnk dj^m dj^n dj^k phi_mnk,  dj = j - j_init.
// The pair and triple tables are optional and default to zero; they are kept
// under sorted keys so the index symmetry is structural.
struct SystemSpec {
  Eigen::Index dim = 0;
  HermitianOperator H0;
  HermitianOperator N_op;  // zero matrix when there is no conserved charge
  std::vector<HermitianOperator> phi;
  std::vector<std::string> labels;
  RealVector j_init;
  std::map<std::pair<int, int>, ComplexMatrix> phi2;
  std::map<std::tuple<int, int, int>, ComplexMatrix> phi3;

  int n_sources() const { return static_cast<int>(phi.size()); }
  bool has_number() const { return !N_op.is_zero(); }

  void set_pair_coupling(int m, int n, const ComplexMatrix& op) {
    check_source_index(m);
    check_source_index(n);
    if (op.rows() != dim || op.cols() != dim)
      throw Error("DimensionMismatch", "pair coupling dimension");
    auto key = std::minmax(m, n);
    ComplexMatrix sym = 0.5 * (op + op.adjoint());
    auto it = phi2.find(key);
    if (it != phi2.end() && max_abs(it->second - sym) >
                                tols::hermiticity * std::max(1.0, max_abs(sym))) {
      std::cerr << "qrt: warning: asymmetric pair coupling (" << m << "," << n
                << ") symmetrized\n";
      sym = 0.5 * (it->second + sym);
    }
    phi2[key] = HermitianOperator(sym).mat;
  }

  void set_triple_coupling(int m, int n, int k, const ComplexMatrix& op) {
    check_source_index(m);
    check_source_index(n);
    check_source_index(k);
    if (op.rows() != dim || op.cols() != dim)
      throw Error("DimensionMismatch", "triple coupling dimension");
    std::array<int, 3> idx{m, n, k};
    std::sort(idx.begin(), idx.end());
    phi3[{idx[0], idx[1], idx[2]}] = HermitianOperator(op).mat;
  }

  const ComplexMatrix* pair_coupling(int m, int n) const {
    auto it = phi2.find(std::minmax(m, n));
    return it == phi2.end() ? nullptr : &it->second;
  }

  void check_source_index(int m) const {
    if (m < 0 || m >= n_sources())
      throw Error("IndexOutOfRange", "source index " + std::to_string(m));
  }

  void validate() const {
    if (static_cast<int>(j_init.size()) != n_sources())
      throw Error("DimensionMismatch", "j_init length must match source count");
    if (has_number()) {
      const double scale = std::max(max_abs(H0.mat), max_abs(N_op.mat));
      if (max_abs(commutator(H0.mat, N_op.mat)) > 1e-10 * std::max(1.0, scale))
        throw Error("NonCommutingNumber", "[H0, N] != 0");
    }
  }
};

// H(j) from the cubic expansion. Multiplicities of the symmetric sums are
// folded into the sorted-key tables.
inline HermitianOperator hamiltonian_at(const SystemSpec& spec, const RealVector& j) {
  if (j.size() != spec.j_init.size())
    throw Error("DimensionMismatch", "source vector length");
  ComplexMatrix h = spec.H0.mat;
  RealVector dj = j - spec.j_init;
  for (int m = 0; m < spec.n_sources(); ++m)
    if (dj[m] != 0.0) h -= dj[m] * spec.phi[m].mat;
  for (const auto& [key, op] : spec.phi2) {
    const auto [m, n] = key;
    const double mult = (m == n) ? 1.0 : 2.0;
    h -= 0.5 * mult * dj[m] * dj[n] * op;
  }
  for (const auto& [key, op] : spec.phi3) {
    const auto [m, n, k] = key;
    double mult = 6.0;  // distinct indices: 3! orderings
    if (m == n && n == k) mult = 1.0;
    else if (m == n || n == k || m == k) mult = 3.0;
    h -= (mult / 6.0) * dj[m] * dj[n] * dj[k] * op;
  }
  return HermitianOperator(std::move(h));
}

// phi_m(j) = -dH/dj^m = phi_m + sum_n dj^n phi_mn + 1/2 sum_nk dj^n dj^k phi_mnk.
inline HermitianOperator observable_at(const SystemSpec& spec, int m,
                                       const RealVector& j) {
  spec.check_source_index(m);
  if (j.size() != spec.j_init.size())
    throw Error("DimensionMismatch", "source vector length");
  RealVector dj = j - spec.j_init;
  ComplexMatrix phi = spec.phi[m].mat;
  for (const auto& [key, op] : spec.phi2) {
    const auto [a, b] = key;
    if (a == m && b == m) phi += dj[m] * op;
    else if (a == m) phi += dj[b] * op;
    else if (b == m) phi += dj[a] * op;
  }
  for (const auto& [key, op] : spec.phi3) {
    const auto [a, b, c] = key;
    // remove one instance of m from the sorted triple; the remainder (x,y)
    // ranges over ordered pairs in the double sum
    std::array<int, 3> idx{a, b, c};
    int pos = -1;
    for (int q = 0; q < 3 && pos < 0; ++q)
      if (idx[static_cast<size_t>(q)] == m) pos = q;
    if (pos < 0) continue;
    std::array<int, 2> rest{};
    int r = 0;
    for (int q = 0; q < 3; ++q)
      if (q != pos) rest[static_cast<size_t>(r++)] = idx[static_cast<size_t>(q)];
    const double mult = (rest[0] == rest[1]) ? 1.0 : 2.0;
    phi += 0.5 * mult * dj[rest[0]] * dj[rest[1]] * op;
  }
  return HermitianOperator(std::move(phi));
}

namespace pauli {
inline ComplexMatrix i2() { return ComplexMatrix::Identity(2, 2); }
inline ComplexMatrix x() {
  ComplexMatrix s(2, 2);
  s << 0, 1, 1, 0;
  return s;
}
inline ComplexMatrix y() {
  ComplexMatrix s(2, 2);
  s << 0, Complex(0, -1), Complex(0, 1), 0;
  return s;
}
inline ComplexMatrix z() {
  ComplexMatrix s(2, 2);
  s << 1, 0, 0, -1;
  return s;
}
}  // namespace pauli

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Single-site operator embedded in an L-site spin-1/2 chain.
inline ComplexMatrix site_operator(int L, int site, const ComplexMatrix& op) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (int s = 0; s < L; ++s)
    out = kron(out, s == site ? op : pauli::i2());
  return out;
}

// Open transverse-field Ising chain,
//   H0 = -J sum sz_i sz_{i+1} - h sum sx_i,
// with per-site sx and sz source couplings. The number operator
// sum (1+sz_i)/2 commutes with H0 only for h = 0; for h != 0 the spec ships
// with no conserved charge.
inline SystemSpec build_transverse_ising(int L, double J, double h,
                                         bool periodic = false) {
  if (L < 1) throw Error("DomainError", "chain length must be >= 1");
  if (L > 12) throw Error("DimensionTooLarge", "dimension exceeds 2^12");
  SystemSpec spec;
  spec.dim = Eigen::Index(1) << L;
  ComplexMatrix h0 = ComplexMatrix::Zero(spec.dim, spec.dim);
  for (int i = 0; i + 1 < L; ++i)
    h0 -= J * site_operator(L, i, pauli::z()) * site_operator(L, i + 1, pauli::z());
  if (periodic && L > 2)
    h0 -= J * site_operator(L, L - 1, pauli::z()) * site_operator(L, 0, pauli::z());
  ComplexMatrix num = ComplexMatrix::Zero(spec.dim, spec.dim);
  for (int i = 0; i < L; ++i) {
    h0 -= h * site_operator(L, i, pauli::x());
    num += 0.5 * (ComplexMatrix::Identity(spec.dim, spec.dim) +
                  site_operator(L, i, pauli::z()));
  }
  spec.H0 = HermitianOperator(std::move(h0));
  spec.N_op = (h == 0.0) ? HermitianOperator(std::move(num))
                         : HermitianOperator::zero(spec.dim);
  for (int i = 0; i < L; ++i) {
    spec.phi.emplace_back(site_operator(L, i, pauli::x()));
    spec.labels.push_back("sx" + std::to_string(i));
  }
  for (int i = 0; i < L; ++i) {
    spec.phi.emplace_back(site_operator(L, i, pauli::z()));
    spec.labels.push_back("sz" + std::to_string(i));
  }
  spec.j_init = RealVector::Zero(spec.n_sources());
  spec.validate();
  return spec;
}

// Two-level system H0 = (omega0/2) sz with a sx source coupling and
// N = (1+sz)/2.
inline SystemSpec build_qubit(double omega0) {
  if (!(omega0 > 0)) throw Error("DomainError", "level splitting must be positive");
  SystemSpec spec;
  spec.dim = 2;
  spec.H0 = HermitianOperator(0.5 * omega0 * pauli::z());
  spec.N_op = HermitianOperator(0.5 * (pauli::i2() + pauli::z()));
  spec.phi.emplace_back(pauli::x());
  spec.labels.push_back("sx");
  spec.j_init = RealVector::Zero(1);
  spec.validate();
  return spec;
}

}  // namespace qrt
