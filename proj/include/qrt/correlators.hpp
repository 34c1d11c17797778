#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "qrt/thermal.hpp"

namespace qrt {

// Exact representation of a two-point function of a finite system as a sum
// of Dirac lines, F(w) = sum_l weight_l * delta(w - omega_l) * 2pi-normalized
// so that F(t) = (1/2pi) sum_l weight_l e^{-i omega_l t}.
struct SpectralLine {
  double omega;
  Complex weight;
};

struct SpectralComb {
  std::vector<SpectralLine> lines;  // sorted by omega, near-equal merged
  int m = -1, n = -1;

  Complex eval_time(double t) const {
    Complex acc = 0.0;
    for (const auto& l : lines) acc += l.weight * std::exp(Complex(0, -l.omega * t));
    return acc / (2.0 * M_PI);
  }
  double max_abs_weight() const {
    double w = 0.0;
    for (const auto& l : lines) w = std::max(w, std::abs(l.weight));
    return w;
  }
  double span() const {
    return lines.empty() ? 0.0 : lines.back().omega - lines.front().omega;
  }
};

namespace detail {

inline void merge_lines(std::vector<SpectralLine>& raw, double tol) {
  std::sort(raw.begin(), raw.end(),
            [](const SpectralLine& a, const SpectralLine& b) { return a.omega < b.omega; });
  std::vector<SpectralLine> merged;
  for (const auto& l : raw) {
    if (!merged.empty() && l.omega - merged.back().omega < tol) {
      // weight-average the position to keep exact degeneracies exact
      const double wa = std::abs(merged.back().weight), wb = std::abs(l.weight);
      if (wa + wb > 0)
        merged.back().omega = (merged.back().omega * wa + l.omega * wb) / (wa + wb);
      merged.back().weight += l.weight;
    } else {
      merged.push_back(l);
    }
  }
  double wmax = 0.0;
  for (const auto& l : merged) wmax = std::max(wmax, std::abs(l.weight));
  raw.clear();
  for (const auto& l : merged)
    if (std::abs(l.weight) > 1e-14 * wmax) raw.push_back(l);
}

}  // namespace detail

// Generic Lehmann comb for two operators with a level-pair kernel w(p_j, p_k):
// lines at omega = w_k - w_j with weight 2pi kernel(p_j, p_k) A_jk B_kj.
inline SpectralComb spectral_comb(const ThermalState& st, const ComplexMatrix& a,
                                  const ComplexMatrix& b,
                                  const std::function<double(double, double)>& kernel) {
  const Eigen::Index d = st.dim();
  ComplexMatrix at = st.eig.to_basis(a);
  ComplexMatrix bt = st.eig.to_basis(b);
  std::vector<SpectralLine> raw;
  raw.reserve(static_cast<size_t>(d) * static_cast<size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = 0; k < d; ++k) {
      const Complex w = 2.0 * M_PI * kernel(st.weights[j], st.weights[k]) *
                        at(j, k) * bt(k, j);
      if (w != Complex(0, 0))
        raw.push_back({st.eig.eigenvalues[k] - st.eig.eigenvalues[j], w});
    }
  detail::merge_lines(raw, tols::line_merge);
  SpectralComb comb;
  comb.lines = std::move(raw);
  return comb;
}

// Spectral function Delta^rho_mn: thermal commutator expectation,
// kernel p_j - p_k.
inline SpectralComb spectral_two_point(const ThermalState& st, const SystemSpec& spec,
                                       int m, int n) {
  spec.check_source_index(m);
  spec.check_source_index(n);
  SpectralComb c = spectral_comb(st, spec.phi[m].mat, spec.phi[n].mat,
                                 [](double pj, double pk) { return pj - pk; });
  c.m = m;
  c.n = n;
  return c;
}

// Generalized covariance Delta^f_mn for a whitelisted f: kernel
// f(e^{-beta w}) p_j = f(pk/pj) pj, evaluated in stable closed form.
inline SpectralComb generalized_covariance(const ThermalState& st,
                                           const SystemSpec& spec, int m, int n,
                                           const MonotoneFunction& f) {
  spec.check_source_index(m);
  spec.check_source_index(n);
  SpectralComb c = spectral_comb(st, spec.phi[m].mat, spec.phi[n].mat,
                                 [&](double pj, double pk) { return f.weight(pk, pj); });
  c.m = m;
  c.n = n;
  return c;
}

// Time-dependent BKM correlation comb (the f = (z-1)/log z member).
inline SpectralComb bkm_comb(const ThermalState& st, const ComplexMatrix& a,
                             const ComplexMatrix& b) {
  return spectral_comb(st, a, b, [](double pj, double pk) {
    return kernels::bkm_c(pj, pk);
  });
}

// Heisenberg operator at elapsed time t since the preparation time:
// e^{i t (H - mu N)} A e^{-i t (H - mu N)}.
inline ComplexMatrix heisenberg(const ThermalState& st, const ComplexMatrix& a,
                                double t) {
  ComplexMatrix at = st.eig.to_basis(a);
  for (Eigen::Index j = 0; j < st.dim(); ++j)
    for (Eigen::Index k = 0; k < st.dim(); ++k)
      at(j, k) *= std::exp(
          Complex(0, (st.eig.eigenvalues[j] - st.eig.eigenvalues[k]) * t));
  return st.eig.from_basis(at);
}

inline double default_regulator(const ThermalState& st) {
  const double span = st.eig.eigenvalues[st.dim() - 1] - st.eig.eigenvalues[0];
  return 1e-6 * std::max(1.0, 2.0 * span);
}

// Linear response of Phi_m to source n: instantaneous piece Tr{rho phi_mn}
// plus the delayed kernel i theta(t-t') Delta^rho_mn(t-t').
struct LinearResponseKernel {
  int m = -1, n = -1;
  double delta_inf = 0.0;
  SpectralComb rho;  // spectral comb of the pair
  double epsilon = 1e-6;

  // Delta^scr{R}(s), real for hermitian couplings
  double delayed_time(double s) const {
    if (s < 0.0) return 0.0;
    return (Complex(0, 1) * rho.eval_time(s)).real();
  }
};

inline LinearResponseKernel linear_response(const ThermalState& st,
                                            const SystemSpec& spec, int m, int n) {
  LinearResponseKernel k;
  k.m = m;
  k.n = n;
  k.rho = spectral_two_point(st, spec, m, n);
  const ComplexMatrix* pc = spec.pair_coupling(m, n);
  k.delta_inf = pc ? st.expectation(*pc) : 0.0;
  k.epsilon = default_regulator(st);
  return k;
}

// Two-frequency comb for three-point functions,
// F(u, v) = (1/2pi)^2 sum weight e^{-i w1 u - i w2 v}.
struct SpectralLine2D {
  double w1, w2;
  Complex weight;
};

struct SpectralComb2D {
  std::vector<SpectralLine2D> lines;
  int m = -1, n = -1, k = -1;

  Complex eval_time(double u, double v) const {
    Complex acc = 0.0;
    for (const auto& l : lines)
      acc += l.weight * std::exp(Complex(0, -l.w1 * u - l.w2 * v));
    return acc / (4.0 * M_PI * M_PI);
  }
  double max_abs_weight() const {
    double w = 0.0;
    for (const auto& l : lines) w = std::max(w, std::abs(l.weight));
    return w;
  }
};

namespace detail {

inline void merge_lines_2d(std::vector<SpectralLine2D>& raw, double tol) {
  std::sort(raw.begin(), raw.end(), [](const SpectralLine2D& a, const SpectralLine2D& b) {
    if (a.w1 != b.w1) return a.w1 < b.w1;
    return a.w2 < b.w2;
  });
  std::vector<SpectralLine2D> merged;
  for (const auto& l : raw) {
    if (!merged.empty() && std::abs(l.w1 - merged.back().w1) < tol &&
        std::abs(l.w2 - merged.back().w2) < tol) {
      merged.back().weight += l.weight;
    } else {
      merged.push_back(l);
    }
  }
  double wmax = 0.0;
  for (const auto& l : merged) wmax = std::max(wmax, std::abs(l.weight));
  raw.clear();
  for (const auto& l : merged)
    if (std::abs(l.weight) > 1e-14 * wmax) raw.push_back(l);
}

}  // namespace detail

// Second-order spectral density Delta^rho_ABC(t-t', t'-t'') =
// Tr{A^H(t) [[rho, B^H(t')], C^H(t'')]} as a two-frequency comb.
inline SpectralComb2D spectral_three_point_ops(const ThermalState& st,
                                               const ComplexMatrix& a,
                                               const ComplexMatrix& b,
                                               const ComplexMatrix& c) {
  const Eigen::Index d = st.dim();
  ComplexMatrix at = st.eig.to_basis(a);
  ComplexMatrix bt = st.eig.to_basis(b);
  ComplexMatrix ct = st.eig.to_basis(c);
  const RealVector& w = st.eig.eigenvalues;
  const RealVector& p = st.weights;
  const double two_pi_sq = 4.0 * M_PI * M_PI;
  std::vector<SpectralLine2D> raw;
  for (Eigen::Index ia = 0; ia < d; ++ia)
    for (Eigen::Index ib = 0; ib < d; ++ib) {
      if (at(ia, ib) == Complex(0, 0)) continue;
      for (Eigen::Index ic = 0; ic < d; ++ic) {
        // Tr{A rho B C} - Tr{A B rho C}: lines at (w_b - w_a, w_c - w_a)
        const Complex w1 = two_pi_sq * (p[ib] - p[ic]) * at(ia, ib) * bt(ib, ic) * ct(ic, ia);
        if (w1 != Complex(0, 0)) raw.push_back({w[ib] - w[ia], w[ic] - w[ia], w1});
        // Tr{A C B rho} - Tr{A C rho B}: lines at (w_b - w_a, w_b - w_c)
        const Complex w2 = two_pi_sq * (p[ia] - p[ic]) * at(ia, ib) * ct(ib, ic) * bt(ic, ia);
        if (w2 != Complex(0, 0)) raw.push_back({w[ib] - w[ia], w[ib] - w[ic], w2});
      }
    }
  detail::merge_lines_2d(raw, tols::line_merge);
  SpectralComb2D comb;
  comb.lines = std::move(raw);
  return comb;
}

inline SpectralComb2D spectral_three_point(const ThermalState& st,
                                           const SystemSpec& spec, int m, int n,
                                           int k) {
  spec.check_source_index(m);
  spec.check_source_index(n);
  spec.check_source_index(k);
  SpectralComb2D c =
      spectral_three_point_ops(st, spec.phi[m].mat, spec.phi[n].mat, spec.phi[k].mat);
  c.m = m;
  c.n = n;
  c.k = k;
  return c;
}

// Quadratic response bundle: fully instantaneous Tr{rho phi_mnk}, the two
// mixed instantaneous-delayed kernels, and the fully delayed double
// commutator in both time orderings.
struct QuadraticResponseKernel {
  int m = -1, n = -1, k = -1;
  double delta_inf3 = 0.0;
  SpectralComb mixed_nk;   // pair (phi_mn, phi_k), delayed in t''
  SpectralComb mixed_kn;   // pair (phi_mk, phi_n), delayed in t'
  SpectralComb2D rho_mnk;  // Delta^rho_mnk(t-t', t'-t'')
  SpectralComb2D rho_mkn;  // Delta^rho_mkn(t-t'', t''-t')
  double epsilon = 1e-6;

  // Delta^scr{R}_mnk(s1, s2) with s1 = t-t', s2 = t-t''. The iterated
  // evolution puts the earlier kick in the inner commutator: for t' > t''
  // the kernel is -Tr{phi_m^H(t) [[rho, phi_k^H(t'')], phi_n^H(t')]} and the
  // mirrored expression for t'' > t'.
  double delayed_time(double s1, double s2) const {
    if (s1 < 0.0 || s2 < 0.0) return 0.0;
    double acc = 0.0;
    if (s1 >= s2) acc -= rho_mnk.eval_time(s1, s2 - s1).real();
    if (s2 >= s1) acc -= rho_mkn.eval_time(s2, s1 - s2).real();
    if (s1 == s2)  // both sectors contribute half on the diagonal
      acc += 0.5 * (rho_mnk.eval_time(s1, 0.0).real() + rho_mkn.eval_time(s2, 0.0).real());
    return acc;
  }
  // Delta^{infty scr{R}}_mnk(s): response of phi_mn to a delayed phi_k kick
  double mixed_time(double s) const {
    if (s < 0.0) return 0.0;
    return (Complex(0, 1) * mixed_nk.eval_time(s)).real();
  }
  double mixed_time_swapped(double s) const {
    if (s < 0.0) return 0.0;
    return (Complex(0, 1) * mixed_kn.eval_time(s)).real();
  }
};

inline QuadraticResponseKernel quadratic_response(const ThermalState& st,
                                                  const SystemSpec& spec, int m,
                                                  int n, int k) {
  spec.check_source_index(m);
  spec.check_source_index(n);
  spec.check_source_index(k);
  QuadraticResponseKernel q;
  q.m = m;
  q.n = n;
  q.k = k;
  q.delta_inf3 = st.expectation(triple_coupling_or_zero(spec, m, n, k));
  ComplexMatrix phi_mn = pair_coupling_or_zero(spec, m, n);
  ComplexMatrix phi_mk = pair_coupling_or_zero(spec, m, k);
  auto commdiff = [](double pj, double pk) { return pj - pk; };
  q.mixed_nk = spectral_comb(st, phi_mn, spec.phi[k].mat, commdiff);
  q.mixed_kn = spectral_comb(st, phi_mk, spec.phi[n].mat, commdiff);
  q.rho_mnk = spectral_three_point(st, spec, m, n, k);
  q.rho_mkn = spectral_three_point(st, spec, m, k, n);
  q.epsilon = default_regulator(st);
  return q;
}

// Relaxation function Psi_mn(s): the response to a source step switched off
// at s = 0, expressed through the time-dependent BKM correlator,
//   Psi(s) = theta(s)[beta <phi^H_m(s); phi_n>_c - beta <phi_m; phi_n>_c
//            - <phi_mn>] + beta <phi_m; phi_n>_c + <phi_mn> - L_mn.
// The constant L_mn is the Cesaro (equal-frequency) projection, the honest
// finite-system reading of the infinite-time limit.
struct RelaxationKernel {
  double beta = 1.0, phi_m = 0.0, phi_n = 0.0, inst = 0.0, L = 0.0;
  SpectralComb bkm;

  double bkm_connected_at(double s) const {
    return bkm.eval_time(s).real() - phi_m * phi_n;
  }
  // Psi(0_-), the static fixed-(S,N) response
  double value_minus0() const {
    return beta * bkm_connected_at(0.0) + inst - L;
  }
  double value(double s) const {
    if (s < 0.0) return value_minus0();
    return beta * bkm_connected_at(s) - L;
  }
};

inline RelaxationKernel relaxation_kernel(const ThermalState& st,
                                          const SystemSpec& spec, int m, int n) {
  RelaxationKernel rk;
  rk.beta = st.beta;
  rk.bkm = bkm_comb(st, spec.phi[m].mat, spec.phi[n].mat);
  rk.phi_m = st.expectation(spec.phi[m].mat);
  rk.phi_n = st.expectation(spec.phi[n].mat);
  const ComplexMatrix* pc = spec.pair_coupling(m, n);
  rk.inst = pc ? st.expectation(*pc) : 0.0;
  rk.L = suzuki_limit_cesaro(spec, st)(m, n);
  return rk;
}

inline RealVector relaxation_function(const ThermalState& st, const SystemSpec& spec,
                                      int m, int n, const RealVector& t_grid) {
  for (Eigen::Index i = 1; i < t_grid.size(); ++i)
    if (t_grid[i] <= t_grid[i - 1])
      throw Error("DomainError", "relaxation grid must be ascending");
  RelaxationKernel rk = relaxation_kernel(st, spec, m, n);
  RealVector psi(t_grid.size());
  for (Eigen::Index i = 0; i < t_grid.size(); ++i) psi[i] = rk.value(t_grid[i]);
  return psi;
}

}  // namespace qrt
