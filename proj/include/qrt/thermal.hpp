#pragma once

#include <optional>
#include <vector>

#include "qrt/linalg.hpp"
#include "qrt/model.hpp"

namespace qrt {

// Grand-canonical state of H(j) - mu N at inverse temperature beta. The
// eigenbasis is refined inside degenerate clusters so that it diagonalizes N
// as well whenever [H(j), N] = 0; in that case `number` holds the per-level
// eigenvalues n_j.
struct ThermalState {
  double beta = 0.0, mu = 0.0, logZ = 0.0;
  RealVector j;         // source values the state was built at
  EigenSystem eig;      // of H(j) - mu N
  RealVector weights;   // p_j = exp(-beta w_j)/Z
  RealVector number;    // n_j, zeros when absent
  bool has_number = false;
  bool number_diagonal = false;

  Eigen::Index dim() const { return eig.dim(); }

  ComplexMatrix density_matrix() const {
    return eig.from_basis(ComplexMatrix(weights.cast<Complex>().asDiagonal()));
  }

  // Tr{rho A}; exact for any hermitian A, commuting or not.
  double expectation(const ComplexMatrix& a) const {
    Complex acc = 0.0;
    for (Eigen::Index c = 0; c < dim(); ++c)
      acc += weights[c] * (eig.vectors.col(c).adjoint() * a * eig.vectors.col(c))(0);
    return acc.real();
  }

  // real diagonal of U^dagger A U
  RealVector diag_in_basis(const ComplexMatrix& a) const {
    RealVector d(dim());
    for (Eigen::Index c = 0; c < dim(); ++c)
      d[c] = (eig.vectors.col(c).adjoint() * a * eig.vectors.col(c))(0).real();
    return d;
  }
};

namespace detail {

// classical centered moments over the level weights
inline double kappa2(const RealVector& p, const RealVector& a, const RealVector& b) {
  const double ma = p.dot(a), mb = p.dot(b);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) acc += p[i] * a[i] * b[i];
  return acc - ma * mb;
}

inline double kappa3(const RealVector& p, const RealVector& a, const RealVector& b,
                     const RealVector& c) {
  const double ma = p.dot(a), mb = p.dot(b), mc = p.dot(c);
  double mabc = 0.0, mab = 0.0, mac = 0.0, mbc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    mabc += p[i] * a[i] * b[i] * c[i];
    mab += p[i] * a[i] * b[i];
    mac += p[i] * a[i] * c[i];
    mbc += p[i] * b[i] * c[i];
  }
  return mabc - ma * mbc - mb * mac - mc * mab + 2.0 * ma * mb * mc;
}

// Rotate eigenvector columns inside (near-)degenerate clusters of the
// spectrum so that the basis also diagonalizes the commuting operator `op`.
inline RealVector codiagonalize_clusters(EigenSystem& es, const ComplexMatrix& op) {
  const Eigen::Index d = es.dim();
  const double span =
      d > 0 ? std::max(1.0, es.eigenvalues[d - 1] - es.eigenvalues[0]) : 1.0;
  const double ctol = 1e-8 * span;
  RealVector diag(d);
  Eigen::Index start = 0;
  while (start < d) {
    Eigen::Index stop = start + 1;
    while (stop < d && es.eigenvalues[stop] - es.eigenvalues[stop - 1] <= ctol) ++stop;
    const Eigen::Index g = stop - start;
    if (g == 1) {
      diag[start] =
          (es.vectors.col(start).adjoint() * op * es.vectors.col(start))(0).real();
    } else {
      ComplexMatrix block =
          es.vectors.middleCols(start, g).adjoint() * op * es.vectors.middleCols(start, g);
      block = 0.5 * (block + block.adjoint());
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> sub(block);
      es.vectors.middleCols(start, g) = es.vectors.middleCols(start, g) * sub.eigenvectors();
      diag.segment(start, g) = sub.eigenvalues();
    }
    start = stop;
  }
  return diag;
}

}  // namespace detail

// Thermal state at shifted sources j; the j_init overload is the common case.
inline ThermalState gibbs(const SystemSpec& spec, double beta, double mu,
                          const RealVector& j) {
  if (!(beta > 0)) throw Error("DomainError", "inverse temperature must be positive");
  spec.validate();  // NonCommutingNumber when [H0, N] != 0
  ThermalState st;
  st.beta = beta;
  st.mu = mu;
  st.j = j;
  st.has_number = spec.has_number();
  HermitianOperator h = hamiltonian_at(spec, j);
  ComplexMatrix k = h.mat;
  if (st.has_number) k -= mu * spec.N_op.mat;
  st.eig = eig_hermitian(HermitianOperator::trusted(0.5 * (k + k.adjoint())));
  st.number = RealVector::Zero(st.dim());
  if (st.has_number) {
    const double scale = std::max(1.0, std::max(max_abs(h.mat), max_abs(spec.N_op.mat)));
    if (max_abs(commutator(h.mat, spec.N_op.mat)) <= 1e-10 * scale) {
      st.number = detail::codiagonalize_clusters(st.eig, spec.N_op.mat);
      st.number_diagonal = true;
    }
  }
  const RealVector& w = st.eig.eigenvalues;
  const double wmin = w.minCoeff();
  RealVector expw = (-(beta * (w.array() - wmin))).exp();
  const double norm = expw.sum();
  st.weights = expw / norm;
  st.logZ = std::log(norm) - beta * wmin;
  return st;
}

inline ThermalState gibbs(const SystemSpec& spec, double beta, double mu) {
  return gibbs(spec, beta, mu, spec.j_init);
}

// Energy, particle number, entropy, grand potential and source expectation
// values of a thermal state.
struct ThermoPoint {
  double E = 0.0, N_val = 0.0, S = 0.0, Omega = 0.0;
  RealVector Phi;
};

inline ThermoPoint thermo_point(const ThermalState& st, const SystemSpec& spec) {
  ThermoPoint tp;
  const double k_mean = st.weights.dot(st.eig.eigenvalues);  // <H - mu N>
  tp.N_val = st.has_number ? st.expectation(spec.N_op.mat) : 0.0;
  tp.E = k_mean + st.mu * tp.N_val;
  tp.S = st.logZ + st.beta * k_mean;
  tp.Omega = -st.logZ / st.beta;
  tp.Phi = RealVector(spec.n_sources());
  for (int m = 0; m < spec.n_sources(); ++m)
    tp.Phi[m] = st.expectation(observable_at(spec, m, st.j).mat);
  return tp;
}

// BKM inner product <A;B> = int_0^1 ds Tr{A rho^{1-s} B rho^s}.
inline double bkm_inner(const ThermalState& st, const HermitianOperator& a,
                        const HermitianOperator& b) {
  if (a.dim() != st.dim() || b.dim() != st.dim())
    throw Error("DimensionMismatch", "bkm_inner operand dimension");
  ComplexMatrix at = st.eig.to_basis(a.mat);
  ComplexMatrix bt = st.eig.to_basis(b.mat);
  Complex acc = 0.0;
  for (Eigen::Index jj = 0; jj < st.dim(); ++jj)
    for (Eigen::Index kk = 0; kk < st.dim(); ++kk)
      acc += at(jj, kk) * bt(kk, jj) * kernels::bkm_c(st.weights[jj], st.weights[kk]);
  return acc.real();
}

// Symmetric BKM three-point function: simplex integral of
// Tr{A rho^{l1} B rho^{l2} C rho^{l3}} plus the (B <-> C) ordering, via the
// closed-form divided differences of exp over the log weights.
inline double bkm_three(const ThermalState& st, const HermitianOperator& a,
                        const HermitianOperator& b, const HermitianOperator& c) {
  if (a.dim() != st.dim() || b.dim() != st.dim() || c.dim() != st.dim())
    throw Error("DimensionMismatch", "bkm_three operand dimension");
  ComplexMatrix at = st.eig.to_basis(a.mat);
  ComplexMatrix bt = st.eig.to_basis(b.mat);
  ComplexMatrix ct = st.eig.to_basis(c.mat);
  const Eigen::Index d = st.dim();
  Complex acc = 0.0;
  for (Eigen::Index ia = 0; ia < d; ++ia)
    for (Eigen::Index ib = 0; ib < d; ++ib) {
      const Complex ab = at(ia, ib);
      if (ab == Complex(0, 0)) continue;
      for (Eigen::Index ic = 0; ic < d; ++ic) {
        const double dd =
            kernels::divided3(st.weights[ia], st.weights[ib], st.weights[ic]);
        if (dd == 0.0) continue;
        acc += (ab * bt(ib, ic) * ct(ic, ia) + ab * ct(ib, ic) * bt(ic, ia)) * dd;
      }
    }
  return acc.real();
}

inline double bkm_connected(const ThermalState& st, const HermitianOperator& a,
                            const HermitianOperator& b) {
  return bkm_inner(st, a, b) - st.expectation(a.mat) * st.expectation(b.mat);
}

inline double bkm_three_connected(const ThermalState& st, const HermitianOperator& a,
                                  const HermitianOperator& b,
                                  const HermitianOperator& c) {
  const double fa = st.expectation(a.mat), fb = st.expectation(b.mat),
               fc = st.expectation(c.mat);
  return bkm_three(st, a, b, c) - fa * bkm_connected(st, b, c) -
         fb * bkm_connected(st, a, c) - fc * bkm_connected(st, a, b) - fa * fb * fc;
}

// Dense symmetric rank-3 tensor over source indices.
struct Tensor3 {
  int n = 0;
  std::vector<double> v;
  explicit Tensor3(int nn = 0) : n(nn), v(static_cast<size_t>(nn) * nn * nn, 0.0) {}
  double& at(int a, int b, int c) { return v[(static_cast<size_t>(a) * n + b) * n + c]; }
  double at(int a, int b, int c) const {
    return v[(static_cast<size_t>(a) * n + b) * n + c];
  }
};

inline ComplexMatrix pair_coupling_or_zero(const SystemSpec& spec, int m, int n) {
  const ComplexMatrix* p = spec.pair_coupling(m, n);
  return p ? *p : ComplexMatrix::Zero(spec.dim, spec.dim);
}

inline ComplexMatrix triple_coupling_or_zero(const SystemSpec& spec, int m, int n,
                                             int k) {
  std::array<int, 3> idx{m, n, k};
  std::sort(idx.begin(), idx.end());
  auto it = spec.phi3.find({idx[0], idx[1], idx[2]});
  return it == spec.phi3.end() ? ComplexMatrix::Zero(spec.dim, spec.dim) : it->second;
}

// Isothermal susceptibility chi_mn = beta <phi_m ; phi_n>_c + <phi_mn>.
inline RealMatrix chi_t_mu(const SystemSpec& spec, const ThermalState& st) {
  const int M = spec.n_sources();
  RealMatrix chi(M, M);
  for (int m = 0; m < M; ++m)
    for (int n = m; n < M; ++n) {
      double x = st.beta * bkm_connected(st, spec.phi[m], spec.phi[n]);
      const ComplexMatrix* pc = spec.pair_coupling(m, n);
      if (pc) x += st.expectation(*pc);
      chi(m, n) = chi(n, m) = x;
    }
  return chi;
}

// Third-order isothermal susceptibility,
//   chi_mnk = beta^2 <m;n;k>_c + beta(<phi_mn;phi_k>_c + cyc.) + <phi_mnk>.
inline Tensor3 chi_t_mu_third(const SystemSpec& spec, const ThermalState& st) {
  const int M = spec.n_sources();
  Tensor3 chi(M);
  for (int m = 0; m < M; ++m)
    for (int n = m; n < M; ++n)
      for (int k = n; k < M; ++k) {
        double x =
            st.beta * st.beta *
            bkm_three_connected(st, spec.phi[m], spec.phi[n], spec.phi[k]);
        auto pair_term = [&](int a, int b, int c) {
          const ComplexMatrix* pc = spec.pair_coupling(a, b);
          if (!pc) return 0.0;
          HermitianOperator h = HermitianOperator::trusted(*pc);
          return st.beta * bkm_connected(st, h, spec.phi[c]);
        };
        x += pair_term(m, n, k) + pair_term(n, k, m) + pair_term(k, m, n);
        std::array<int, 3> idx{m, n, k};
        auto it = spec.phi3.find({idx[0], idx[1], idx[2]});
        if (it != spec.phi3.end()) x += st.expectation(it->second);
        // write all permutations
        int perm[6][3] = {{m, n, k}, {m, k, n}, {n, m, k}, {n, k, m}, {k, m, n}, {k, n, m}};
        for (auto& pr : perm) chi.at(pr[0], pr[1], pr[2]) = x;
      }
  return chi;
}

// Analytic T- and mu-derivative bundle evaluated in the common eigenbasis of
// H - mu N and N. Everything reduces to classical cumulants of the level
// quantities (w_j, n_j) and lambda-weighted Lehmann traces.
struct ThermoJacobian {
  RealMatrix dPhi;                        // n_src x 2, columns (d/dT, d/dmu)
  std::vector<Eigen::Matrix2d> hessPhi;   // per source, (T,mu) Hessian
  Eigen::Matrix2d A;                      // [[dS/dT, dS/dmu],[dN/dT, dN/dmu]]
  Eigen::Matrix2d Q1, Q2;                 // third-derivative slices of Omega
  RealMatrix dchi_dT, dchi_dmu;           // derivatives of chi^(T,mu)
  Eigen::Matrix2d Ainv;                   // rank-revealing pseudoinverse of A
  Eigen::Matrix2d range_proj;             // projector onto range(A)
  int rank = 0;
};

inline ThermoJacobian thermo_jacobian(const SystemSpec& spec, const ThermalState& st) {
  if (st.has_number && !st.number_diagonal)
    throw Error("NonCommutingNumber",
                "thermo_jacobian requires a commuting number operator");
  const int M = spec.n_sources();
  const Eigen::Index d = st.dim();
  const double beta = st.beta;
  const RealVector& p = st.weights;
  const RealVector& w = st.eig.eigenvalues;
  const RealVector& nn = st.number;

  std::vector<ComplexMatrix> phit(M);
  std::vector<RealVector> dg(M);
  for (int m = 0; m < M; ++m) {
    phit[m] = st.eig.to_basis(spec.phi[m].mat);
    dg[m] = phit[m].diagonal().real();
  }

  ThermoJacobian tj;
  tj.dPhi = RealMatrix(M, 2);
  tj.hessPhi.resize(M);
  const double b2 = beta * beta, b3 = b2 * beta, b4 = b3 * beta, b5 = b4 * beta;
  for (int m = 0; m < M; ++m) {
    const double kwd = detail::kappa2(p, w, dg[m]);
    const double knd = detail::kappa2(p, nn, dg[m]);
    tj.dPhi(m, 0) = b2 * kwd;
    tj.dPhi(m, 1) = beta * knd;
    Eigen::Matrix2d hp;
    hp(0, 0) = -2.0 * b3 * kwd + b4 * detail::kappa3(p, w, w, dg[m]);
    hp(0, 1) = -b2 * knd + b3 * detail::kappa3(p, w, nn, dg[m]);
    hp(1, 0) = hp(0, 1);
    hp(1, 1) = b2 * detail::kappa3(p, nn, nn, dg[m]);
    tj.hessPhi[m] = hp;
  }

  const double kww = detail::kappa2(p, w, w), kwn = detail::kappa2(p, w, nn),
               knn = detail::kappa2(p, nn, nn);
  tj.A << b3 * kww, b2 * kwn, b2 * kwn, beta * knn;
  // Omega_T = -S, Omega_mu = -N; Q1 = -Hess_S, Q2 = -Hess_N in (T, mu)
  const double S_TT = -3.0 * b4 * kww + b5 * detail::kappa3(p, w, w, w);
  const double S_Tmu = -2.0 * b3 * kwn + b4 * detail::kappa3(p, w, w, nn);
  const double S_mumu = -b2 * knn + b3 * detail::kappa3(p, w, nn, nn);
  const double N_TT = S_Tmu;
  const double N_Tmu = S_mumu;
  const double N_mumu = b2 * detail::kappa3(p, nn, nn, nn);
  tj.Q1 << -S_TT, -S_Tmu, -S_Tmu, -S_mumu;
  tj.Q2 << -N_TT, -N_Tmu, -N_Tmu, -N_mumu;

  // derivatives of chi^(T,mu): lambda-weighted traces plus cumulant pieces
  const double mean_w = p.dot(w), mean_n = p.dot(nn);
  RealVector Phi(M);
  for (int m = 0; m < M; ++m) Phi[m] = p.dot(dg[m]);
  tj.dchi_dT = RealMatrix::Zero(M, M);
  tj.dchi_dmu = RealMatrix::Zero(M, M);
  for (int m = 0; m < M; ++m)
    for (int n = m; n < M; ++n) {
      double C = 0.0, Jw = 0.0, Jn = 0.0;  // <m;n>, lambda-weighted traces
      for (Eigen::Index jj = 0; jj < d; ++jj)
        for (Eigen::Index kk = 0; kk < d; ++kk) {
          const Complex prod = phit[m](jj, kk) * phit[n](kk, jj);
          if (prod == Complex(0, 0)) continue;
          const double lam_kj = kernels::bkm_lambda(p[kk], p[jj]);
          const double lam_jk = kernels::bkm_lambda(p[jj], p[kk]);
          C += (prod * kernels::bkm_c(p[jj], p[kk])).real();
          // J_mn + J_nm with the non-symmetric lambda kernel
          Jw += prod.real() * (w[jj] * lam_kj + w[kk] * lam_jk);
          Jn += prod.real() * (nn[jj] * lam_kj + nn[kk] * lam_jk);
        }
      double dT = -b2 * C - b3 * mean_w * C + b3 * Jw;
      dT -= -b2 * Phi[m] * Phi[n] +
            beta * (tj.dPhi(m, 0) * Phi[n] + Phi[m] * tj.dPhi(n, 0));
      double dmu = b2 * Jn - b2 * mean_n * C;
      dmu -= beta * (tj.dPhi(m, 1) * Phi[n] + Phi[m] * tj.dPhi(n, 1));
      const ComplexMatrix* pc = spec.pair_coupling(m, n);
      if (pc) {
        RealVector dpc = st.diag_in_basis(*pc);
        dT += b2 * detail::kappa2(p, w, dpc);
        dmu += beta * detail::kappa2(p, nn, dpc);
      }
      tj.dchi_dT(m, n) = tj.dchi_dT(n, m) = dT;
      tj.dchi_dmu(m, n) = tj.dchi_dmu(n, m) = dmu;
    }

  // rank-revealing pseudoinverse of the symmetric 2x2
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(tj.A);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  tj.Ainv.setZero();
  tj.range_proj.setZero();
  for (int i = 0; i < 2; ++i) {
    if (std::abs(es.eigenvalues()[i]) > 1e-10 * std::max(lmax, 1e-300)) {
      const Eigen::Vector2d u = es.eigenvectors().col(i);
      tj.Ainv += u * u.transpose() / es.eigenvalues()[i];
      tj.range_proj += u * u.transpose();
      ++tj.rank;
    }
  }
  return tj;
}

namespace detail {
inline void check_in_range(const ThermoJacobian& tj, const Eigen::Vector2d& v,
                           double scale) {
  if (tj.rank == 2) return;
  const Eigen::Vector2d out = v - tj.range_proj * v;
  if (out.norm() > 1e-8 * std::max(scale, 1e-12))
    throw Error("SingularJacobian",
                "fixed-(S,N) correction undefined: derivative outside range of "
                "the (S,N) Jacobian");
}
}  // namespace detail

// Long-time (Suzuki) limit of the connected BKM correlator from the closed
// form: L_mn = v_m^T A^+ v_n with v_m = (dPhi_m/dT, dPhi_m/dmu). A singular
// Jacobian is accepted as long as every v_m lies in its range.
inline RealMatrix suzuki_limit(const SystemSpec& spec, const ThermalState& st) {
  ThermoJacobian tj = thermo_jacobian(spec, st);
  const int M = spec.n_sources();
  double scale = 0.0;
  for (int m = 0; m < M; ++m) scale = std::max(scale, tj.dPhi.row(m).norm());
  RealMatrix L(M, M);
  for (int m = 0; m < M; ++m) {
    detail::check_in_range(tj, tj.dPhi.row(m).transpose(), scale);
    for (int n = m; n < M; ++n)
      L(m, n) = L(n, m) =
          tj.dPhi.row(m) * tj.Ainv * tj.dPhi.row(n).transpose();
  }
  return L;
}

// Same limit evaluated as the Cesaro mean of beta <phi^H_m(t) ; phi_n>_c,
// i.e. the diagonal (equal-frequency) projection in the eigenbasis. For a
// finite system this is the honest t -> infinity reading; it agrees with the
// closed form when the diagonal parts of the couplings are spanned by the
// conserved quantities.
inline RealMatrix suzuki_limit_cesaro(const SystemSpec& spec, const ThermalState& st) {
  const int M = spec.n_sources();
  const Eigen::Index d = st.dim();
  const double span = std::max(1.0, st.eig.eigenvalues[d - 1] - st.eig.eigenvalues[0]);
  const double ctol = 1e-8 * span;
  std::vector<ComplexMatrix> phit(M);
  RealVector Phi(M);
  for (int m = 0; m < M; ++m) {
    phit[m] = st.eig.to_basis(spec.phi[m].mat);
    Phi[m] = phit[m].diagonal().real().dot(st.weights);
  }
  RealMatrix L(M, M);
  for (int m = 0; m < M; ++m)
    for (int n = m; n < M; ++n) {
      Complex acc = 0.0;
      for (Eigen::Index jj = 0; jj < d; ++jj)
        for (Eigen::Index kk = 0; kk < d; ++kk)
          if (std::abs(st.eig.eigenvalues[jj] - st.eig.eigenvalues[kk]) <= ctol)
            acc += phit[m](jj, kk) * phit[n](kk, jj) *
                   kernels::bkm_c(st.weights[jj], st.weights[kk]);
      L(m, n) = L(n, m) = st.beta * (acc.real() - Phi[m] * Phi[n]);
    }
  return L;
}

// Susceptibility at fixed entropy and particle number via the Legendre
// relation chi^(S,N) = chi^(T,mu) - v^T A^+ v.
inline RealMatrix chi_s_n(const SystemSpec& spec, const ThermalState& st) {
  return chi_t_mu(spec, st) - suzuki_limit(spec, st);
}

// Third-order fixed-(S,N) susceptibility assembled from the derivative
// bundle. All contractions run through the pseudoinverse B = A^+.
inline Tensor3 chi_s_n_third(const SystemSpec& spec, const ThermalState& st) {
  const int M = spec.n_sources();
  ThermoJacobian tj = thermo_jacobian(spec, st);
  double scale = 0.0;
  for (int m = 0; m < M; ++m) scale = std::max(scale, tj.dPhi.row(m).norm());
  for (int m = 0; m < M; ++m)
    detail::check_in_range(tj, tj.dPhi.row(m).transpose(), scale);
  Tensor3 chi3 = chi_t_mu_third(spec, st);
  const Eigen::Matrix2d& B = tj.Ainv;
  auto v = [&](int m) { return Eigen::Vector2d(tj.dPhi(m, 0), tj.dPhi(m, 1)); };
  auto wchi = [&](int a, int b) {
    return Eigen::Vector2d(tj.dchi_dT(a, b), tj.dchi_dmu(a, b));
  };
  Tensor3 out(M);
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < M; ++n)
      for (int k = 0; k < M; ++k) {
        double x = chi3.at(m, n, k);
        x -= wchi(m, n).dot(B * v(k)) + wchi(m, k).dot(B * v(n)) +
             wchi(n, k).dot(B * v(m));
        x += v(k).dot(B * tj.hessPhi[static_cast<size_t>(m)] * B * v(n)) +
             v(m).dot(B * tj.hessPhi[static_cast<size_t>(k)] * B * v(n)) +
             v(m).dot(B * tj.hessPhi[static_cast<size_t>(n)] * B * v(k));
        const Eigen::Vector2d bk = B * v(k);
        x += bk[0] * v(m).dot(B * tj.Q1 * B * v(n));
        x += bk[1] * v(m).dot(B * tj.Q2 * B * v(n));
        out.at(m, n, k) = x;
      }
  return out;
}

}  // namespace qrt
