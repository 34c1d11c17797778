#pragma once

#include "qrt/correlators.hpp"

namespace qrt {

// Uniform frequency grid, symmetric about zero, with complex samples.
struct FrequencyGrid {
  RealVector omegas;
  ComplexVector values;
  bool edge_leakage = false;  // warning-grade flag set by kramers_kronig

  static FrequencyGrid make(double half_span, Eigen::Index n) {
    FrequencyGrid g;
    g.omegas = RealVector::LinSpaced(n, -half_span, half_span);
    g.values = ComplexVector::Zero(n);
    return g;
  }
  double spacing() const { return omegas[1] - omegas[0]; }
};

namespace detail {

inline void validate_grid(const FrequencyGrid& g) {
  const Eigen::Index n = g.omegas.size();
  if (n < 4 || g.values.size() != n)
    throw Error("NonUniformGrid", "grid needs matching omega and value arrays");
  const double h = g.omegas[1] - g.omegas[0];
  for (Eigen::Index i = 1; i < n; ++i)
    if (std::abs(g.omegas[i] - g.omegas[i - 1] - h) > 1e-12 * std::max(1.0, std::abs(h)))
      throw Error("NonUniformGrid", "grid spacing is not uniform");
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(g.omegas[i] + g.omegas[n - 1 - i]) > 1e-9 * std::max(1.0, std::abs(h)))
      throw Error("NonUniformGrid", "grid must be symmetric about zero");
}

// int_W^inf (W^2/u^2) / (w - u) du in closed form; the building block of the
// inverse-square tail closure below.
inline double tail_kernel(double w, double W, double clamp) {
  const double x = w / W;
  if (std::abs(x) < 1e-3)
    return -(0.5 + x / 3.0 + x * x / 4.0 + x * x * x / 5.0);
  const double gap = std::max(W - w, clamp);
  return W / w - (W * W) / (w * w) * std::log(W / gap);
}

// Principal-value integral int f(w') / (w - w') dw' by odd-symmetric
// subtraction: the integrand minus its value at the pole is regular, and the
// pure pole integrates to log |(w - a)/(w - b)|. Outside the window the
// samples are closed with an inverse-square tail matched to the edge values,
// which removes the leading truncation error for response-like data.
inline double pv_integral(const RealVector& om, const RealVector& f, double w,
                          Eigen::Index iw) {
  const Eigen::Index n = om.size();
  const double h = om[1] - om[0];
  // slope at the pole for the removable value
  double fprime;
  if (iw == 0)
    fprime = (f[1] - f[0]) / h;
  else if (iw == n - 1)
    fprime = (f[n - 1] - f[n - 2]) / h;
  else
    fprime = (f[iw + 1] - f[iw - 1]) / (2.0 * h);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wq = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    const double g = (i == iw) ? -fprime : (f[i] - f[iw]) / (w - om[i]);
    acc += wq * g;
  }
  acc *= h;
  const double a = om[0], b = om[n - 1];
  if (iw != 0 && iw != n - 1)
    acc += f[iw] * std::log(std::abs((w - a) / (b - w)));
  // tail closure, clamped near the window edges where the split becomes
  // singular; the affected points are the outermost few
  const double W = b;
  acc += f[n - 1] * tail_kernel(w, W, h) - f[0] * tail_kernel(-w, W, h);
  return acc;
}

}  // namespace detail

// Hilbert-transform partner of a causal response sampled on a grid: the
// real part is rebuilt from the imaginary part and vice versa,
//   Re'(w) = -(1/pi) PV int Im(w')/(w - w') dw',
//   Im'(w) = +(1/pi) PV int Re(w')/(w - w') dw'.
inline FrequencyGrid kramers_kronig(const FrequencyGrid& grid) {
  detail::validate_grid(grid);
  const Eigen::Index n = grid.omegas.size();
  FrequencyGrid out;
  out.omegas = grid.omegas;
  out.values = ComplexVector::Zero(n);
  const double vmax = grid.values.cwiseAbs().maxCoeff();
  const double edge =
      std::max(std::abs(grid.values[0]), std::abs(grid.values[n - 1]));
  out.edge_leakage = edge >= 0.05 * vmax;
  RealVector re(n), im(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    re[i] = grid.values[i].real();
    im[i] = grid.values[i].imag();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = grid.omegas[i];
    const double re_out = -detail::pv_integral(grid.omegas, im, w, i) / M_PI;
    const double im_out = detail::pv_integral(grid.omegas, re, w, i) / M_PI;
    out.values[i] = Complex(re_out, im_out);
  }
  return out;
}

// Spectral representation G(z) = -sum weight / (2 pi (z - omega)); analytic
// off the real axis, with discontinuity i * weight across each line.
inline Complex spectral_reconstruct(const SpectralComb& comb, Complex z) {
  if (z.imag() == 0.0)
    throw Error("OnRealAxis", "spectral representation needs Im(z) != 0");
  Complex acc = 0.0;
  for (const auto& l : comb.lines) acc -= l.weight / (2.0 * M_PI * (z - l.omega));
  return acc;
}

// Retarded response at real frequency: Delta^R(w) = Delta^inf + G(w + i eps).
inline Complex response_freq(const LinearResponseKernel& k, double w) {
  return k.delta_inf + spectral_reconstruct(k.rho, Complex(w, k.epsilon));
}

// Lorentzian-broadened presentation of a comb: G(w + i eta) sampled on a
// grid. The broadening is a plotting device; exact identities always use the
// comb itself.
inline FrequencyGrid broadened_grid(const SpectralComb& comb, double half_span,
                                    Eigen::Index n, double eta) {
  FrequencyGrid g = FrequencyGrid::make(half_span, n);
  for (Eigen::Index i = 0; i < n; ++i)
    g.values[i] = spectral_reconstruct(comb, Complex(g.omegas[i], eta));
  return g;
}

// Series RC circuit: charge response to an applied voltage.
struct RcResponse {
  double R = 1.0, C = 1.0;
  RcResponse(double r, double c) : R(r), C(c) {
    if (!(r > 0.0) || !(c > 0.0))
      throw Error("DomainError", "R and C must be positive");
  }
  double time(double t) const {
    return t < 0.0 ? 0.0 : std::exp(-t / (R * C)) / R;
  }
  Complex freq(double w) const { return 1.0 / (Complex(0, -w) * R + 1.0 / C); }
  Complex pole() const { return Complex(0, -1.0 / (R * C)); }
};

// Underdamped harmonic oscillator response to a force per unit mass.
struct OscillatorResponse {
  double omega0 = 1.0, zeta = 0.0;
  OscillatorResponse(double w0, double z) : omega0(w0), zeta(z) {
    if (!(w0 > 0.0)) throw Error("DomainError", "omega0 must be positive");
    if (!(z >= 0.0) || z >= 1.0)
      throw Error("OverdampedUnsupported", "only 0 <= zeta < 1 is supported");
  }
  double damped_frequency() const { return std::sqrt(1.0 - zeta * zeta) * omega0; }
  double time(double t) const {
    if (t < 0.0) return 0.0;
    const double wd = damped_frequency();
    return std::exp(-zeta * omega0 * t) * std::sin(wd * t) / wd;
  }
  Complex freq(double w) const {
    return 1.0 / Complex(omega0 * omega0 - w * w, -2.0 * zeta * omega0 * w);
  }
  std::pair<Complex, Complex> poles() const {
    const double wd = damped_frequency();
    return {Complex(wd, -zeta * omega0), Complex(-wd, -zeta * omega0)};
  }
};

// Conserved-current response of a relaxing, diffusing charge density,
//   G^00 = i sigma p^2 / D(p),   G^0j = G^j0 = i sigma p0 p_j / D(p),
//   G^jk = i sigma p0 d_jk / (1 - i tau p0) + D sigma p0 p_j p_k / (D(p)(1 - i tau p0)),
// with D(p) = p0 - i tau p0^2 + i D p^2. Ward transversality holds with the
// mostly-plus index convention p_mu = (-p0, p).
struct FluidParams {
  double sigma = 1.0, D = 1.0, tau = 0.0;
  FluidParams(double s, double d, double t) : sigma(s), D(d), tau(t) {
    if (s < 0.0 || d < 0.0 || t < 0.0)
      throw Error("DomainError", "fluid parameters must be non-negative");
  }
};

inline Eigen::Matrix4cd fluid_current_response(const FluidParams& par, Complex p0,
                                               const Eigen::Vector3d& p) {
  const double p2 = p.squaredNorm();
  const Complex I(0, 1);
  Eigen::Matrix4cd g = Eigen::Matrix4cd::Zero();
  if (p0 == Complex(0, 0)) {
    // static limit: only the density-density component survives
    if (par.D <= 0.0)
      throw Error("DomainError", "static susceptibility needs D > 0");
    g(0, 0) = par.sigma / par.D;
    return g;
  }
  const Complex denom = p0 - I * par.tau * p0 * p0 + I * par.D * p2;
  const Complex trans = 1.0 - I * par.tau * p0;
  if (std::abs(denom) < 1e-14 || std::abs(trans) < 1e-14)
    throw Error("PoleHit", "response evaluated at a pole of the denominator");
  g(0, 0) = I * par.sigma * p2 / denom;
  for (int j = 0; j < 3; ++j) {
    g(0, j + 1) = I * par.sigma * p0 * p[j] / denom;
    g(j + 1, 0) = g(0, j + 1);
    for (int k = 0; k < 3; ++k) {
      g(j + 1, k + 1) = par.D * par.sigma * p0 * p[j] * p[k] / (denom * trans);
      if (j == k) g(j + 1, k + 1) += I * par.sigma * p0 / trans;
    }
  }
  return g;
}

// p_mu G^{mu nu} with p_mu = (-p0, p); vanishes by current conservation.
inline Eigen::Vector4cd fluid_ward_contraction(const Eigen::Matrix4cd& g, Complex p0,
                                               const Eigen::Vector3d& p) {
  Eigen::Vector4cd pmu;
  pmu << -p0, p[0], p[1], p[2];
  return g.transpose() * pmu;  // sum_mu p_mu G^{mu nu}
}

// Roots of p0 - i tau p0^2 + i D p^2 in the complex p0 plane.
inline std::pair<Complex, Complex> fluid_denominator_poles(const FluidParams& par,
                                                           double p2) {
  if (par.tau == 0.0) return {Complex(0, -par.D * p2), Complex(0, -1e300)};
  // tau p0^2 + i p0 - D p^2 = 0 after multiplying by i
  const Complex I(0, 1);
  const Complex disc = std::sqrt(Complex(-1.0 + 4.0 * par.tau * par.D * p2, 0.0));
  return {(-I + disc) / (2.0 * par.tau), (-I - disc) / (2.0 * par.tau)};
}

}  // namespace qrt
