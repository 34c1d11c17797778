#include <catch2/catch.hpp>

#include <random>

#include "qrt/analytic.hpp"
#include "test_util.hpp"

using namespace qrt;

namespace {

double rel_l2(const ComplexVector& a, const ComplexVector& b) {
  return (a - b).norm() / b.norm();
}

double rel_l2_real(const FrequencyGrid& got, const FrequencyGrid& expect) {
  RealVector g(got.values.size()), e(expect.values.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g[i] = got.values[i].real();
    e[i] = expect.values[i].real();
  }
  return (g - e).norm() / e.norm();
}

}  // namespace

TEST_CASE("kramers_kronig reconstructs the Lorentzian pair", "[analytic]") {
  // analytic Hilbert pair 1/(w0 - w - i gamma), centered so the symmetric
  // grid spans +/- 20 half-widths around the feature
  const double w0 = 0.0, gamma = 0.5;
  const Eigen::Index n = 4096;
  FrequencyGrid g = FrequencyGrid::make(20.0 * gamma, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = g.omegas[i];
    g.values[i] = 1.0 / Complex(w0 - w, -gamma);
  }
  FrequencyGrid partner = kramers_kronig(g);
  // the real part is rebuilt from the decaying imaginary part; the slowly
  // decaying real tail makes the reverse direction window-limited
  REQUIRE(rel_l2_real(partner, g) <= 1e-3);

  // zero input gives zero output
  FrequencyGrid z = FrequencyGrid::make(5.0, 256);
  FrequencyGrid zz = kramers_kronig(z);
  REQUIRE(zz.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kramers_kronig flags edge leakage and bad grids", "[analytic]") {
  FrequencyGrid g = FrequencyGrid::make(3.0, 128);
  for (Eigen::Index i = 0; i < 128; ++i)
    g.values[i] = 1.0 / Complex(1.0 - g.omegas[i], -1.0);  // wide Lorentzian
  FrequencyGrid out = kramers_kronig(g);
  REQUIRE(out.edge_leakage);

  FrequencyGrid bad = FrequencyGrid::make(3.0, 64);
  bad.omegas[10] += 1e-3;
  REQUIRE_THROWS_AS(kramers_kronig(bad), Error);
  FrequencyGrid asym;
  asym.omegas = RealVector::LinSpaced(64, 0.0, 5.0);
  asym.values = ComplexVector::Zero(64);
  REQUIRE_THROWS_AS(kramers_kronig(asym), Error);
}

TEST_CASE("RC response forms and their transform", "[analytic]") {
  const double R = 2.0, C = 0.7;
  RcResponse rc(R, C);
  REQUIRE(rc.time(-0.5) == 0.0);
  REQUIRE(rc.freq(0.0).real() == Approx(C));
  REQUIRE(rc.freq(0.0).imag() == Approx(0.0));
  REQUIRE(rc.pole().imag() < 0.0);

  // numerical Fourier transform of the time samples matches the closed form
  const int nt = 40000;
  const double t_max = 30.0 * R * C, dt = t_max / nt;
  const Eigen::Index nw = 201;
  FrequencyGrid expect = FrequencyGrid::make(4.0 / (R * C), nw);
  ComplexVector ft = ComplexVector::Zero(nw);
  for (Eigen::Index iw = 0; iw < nw; ++iw) {
    const double w = expect.omegas[iw];
    Complex acc = 0.0;
    for (int it = 0; it < nt; ++it) {
      const double t = (it + 0.5) * dt;
      acc += rc.time(t) * std::exp(Complex(0, w * t)) * dt;
    }
    ft[iw] = acc;
    expect.values[iw] = rc.freq(w);
  }
  REQUIRE(rel_l2(ft, expect.values) <= 1e-4);
}

TEST_CASE("oscillator response: boundary slope, poles, KK closure", "[analytic]") {
  const double w0 = 1.3, zeta = 0.35;
  OscillatorResponse osc(w0, zeta);
  REQUIRE(osc.time(-1.0) == 0.0);
  // pulse response has x(0) = 0 and unit initial slope
  const double h = 1e-6;
  REQUIRE(osc.time(0.0) == Approx(0.0).margin(1e-12));
  REQUIRE((osc.time(h) - osc.time(0.0)) / h == Approx(1.0).epsilon(1e-4));
  // undamped limit
  OscillatorResponse free(w0, 0.0);
  for (double t : {0.3, 1.9}) REQUIRE(free.time(t) == Approx(std::sin(w0 * t) / w0));
  REQUIRE_THROWS_AS(OscillatorResponse(1.0, 1.2), Error);

  auto [p1, p2] = osc.poles();
  const double wd = std::sqrt(1.0 - zeta * zeta) * w0;
  REQUIRE(p1.real() == Approx(wd).margin(1e-12));
  REQUIRE(p1.imag() == Approx(-zeta * w0).margin(1e-12));
  REQUIRE(p2.real() == Approx(-wd).margin(1e-12));
  // frequency samples obey the Kramers-Kronig relations
  const Eigen::Index n = 4096;
  FrequencyGrid g = FrequencyGrid::make(30.0 * w0, n);
  for (Eigen::Index i = 0; i < n; ++i) g.values[i] = osc.freq(g.omegas[i]);
  FrequencyGrid partner = kramers_kronig(g);
  REQUIRE(rel_l2_real(partner, g) <= 1e-3);
}

TEST_CASE("hilbert transform squares to minus one on band-limited data",
          "[analytic]") {
  const Eigen::Index n = 2048;
  FrequencyGrid g = FrequencyGrid::make(12.0, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = g.omegas[i];
    g.values[i] = Complex(w * std::exp(-w * w), 0.0);  // zero-mean, decaying
  }
  // the Im output of the map is the Hilbert transform of the Re input;
  // iterating it twice must give minus the original data
  FrequencyGrid h1 = kramers_kronig(g);
  FrequencyGrid g2 = g;
  for (Eigen::Index i = 0; i < n; ++i) g2.values[i] = Complex(h1.values[i].imag(), 0.0);
  FrequencyGrid h2 = kramers_kronig(g2);
  RealVector re0(n), hh(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    re0[i] = g.values[i].real();
    hh[i] = h2.values[i].imag();
  }
  REQUIRE((hh + re0).norm() / re0.norm() <= 1e-2);
}

TEST_CASE("spectral_reconstruct matches pole sums off the axis", "[analytic]") {
  SpectralComb comb;
  comb.lines.push_back({-1.0, Complex(-3.1, 0.4)});
  comb.lines.push_back({0.7, Complex(2.0, 0.0)});
  const Complex z(0.3, 0.8);
  Complex expect = 0.0;
  for (const auto& l : comb.lines) expect -= l.weight / (2.0 * M_PI * (z - l.omega));
  REQUIRE(std::abs(spectral_reconstruct(comb, z) - expect) < 1e-14);
  REQUIRE_THROWS_AS(spectral_reconstruct(comb, Complex(0.5, 0.0)), Error);

  // discontinuity across the axis at each line center: for a regulated line
  // the jump G(w + i eps) - G(w - i eps) = i weight / (pi eps) * (eps -> 0
  // divergent Dirac density); compare against the exact one-line expression
  const double eps = 1e-7;
  for (const auto& l : comb.lines) {
    Complex other = 0.0;
    for (const auto& r : comb.lines)
      if (&r != &l)
        other += (-r.weight / (2.0 * M_PI * (Complex(l.omega, eps) - r.omega))) -
                 (-r.weight / (2.0 * M_PI * (Complex(l.omega, -eps) - r.omega)));
    const Complex disc = spectral_reconstruct(comb, Complex(l.omega, eps)) -
                         spectral_reconstruct(comb, Complex(l.omega, -eps));
    const Complex self = -l.weight / (2.0 * M_PI) *
                         (1.0 / Complex(0, eps) - 1.0 / Complex(0, -eps));
    REQUIRE(std::abs(disc - (self + other)) <= 1e-9 * std::abs(self));
    // the self part is i * weight times the regulated Dirac density at 0
    REQUIRE(std::abs(self - Complex(0, 1) * l.weight / (M_PI * eps)) <=
            1e-12 * std::abs(self));
  }
}

TEST_CASE("cauchy-riemann residual of the reconstruction is small", "[analytic]") {
  SpectralComb comb;
  comb.lines.push_back({-0.9, Complex(1.0, -0.3)});
  comb.lines.push_back({0.4, Complex(-0.7, 0.1)});
  comb.lines.push_back({1.6, Complex(0.2, 0.9)});
  const double h = 1e-5;
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> ur(-2.0, 2.0), ui(0.1, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double x = ur(gen);
    const double y = (trial % 2 ? 1.0 : -1.0) * ui(gen);
    auto g = [&](double xx, double yy) {
      return spectral_reconstruct(comb, Complex(xx, yy));
    };
    const Complex dx = (g(x + h, y) - g(x - h, y)) / (2 * h);
    const Complex dy = (g(x, y + h) - g(x, y - h)) / (2 * h);
    // analytic function: d/dy = i d/dx
    REQUIRE(std::abs(dy - Complex(0, 1) * dx) <= 1e-6 * std::max(1.0, std::abs(dx)));
  }
}

TEST_CASE("static susceptibility from the comb matches chi_s_n", "[analytic]") {
  // isolated static response of the qubit: G(i eps) + Delta^inf = chi^(S,N)
  SystemSpec qb = build_qubit(1.0);
  ThermalState st = gibbs(qb, 1.0, 0.0);
  LinearResponseKernel k = linear_response(st, qb, 0, 0);
  const Complex g0 = spectral_reconstruct(k.rho, Complex(0, 1e-6));
  RealMatrix cs = chi_s_n(qb, st);
  REQUIRE(g0.real() + k.delta_inf == Approx(cs(0, 0)).margin(1e-6));
  REQUIRE(std::abs(g0.imag()) < 1e-6);
}

TEST_CASE("fluid current response: static limit, Ward identity, poles",
          "[analytic]") {
  FluidParams par(1.0, 0.5, 0.1);
  // static limit
  Eigen::Vector3d pv(0.4, -0.2, 0.7);
  Eigen::Matrix4cd gs = fluid_current_response(par, Complex(0, 0), pv);
  REQUIRE(gs(0, 0).real() == Approx(par.sigma / par.D));
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu)
      if (mu || nu) REQUIRE(std::abs(gs(mu, nu)) == 0.0);

  // Ward contraction at random points
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> ur(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Complex p0(ur(gen), 0.0);
    Eigen::Vector3d p(ur(gen), ur(gen), ur(gen));
    if (std::abs(p0) < 0.05) continue;
    Eigen::Matrix4cd g = fluid_current_response(par, p0, p);
    const double scale = g.cwiseAbs().maxCoeff();
    Eigen::Vector4cd w1 = fluid_ward_contraction(g, p0, p);
    Eigen::Vector4cd w2 =
        g * (Eigen::Vector4cd() << -p0, p[0], p[1], p[2]).finished();
    REQUIRE(w1.cwiseAbs().maxCoeff() <= 1e-12 * scale);
    REQUIRE(w2.cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }

  // all denominator roots sit in the lower half plane
  std::uniform_real_distribution<double> up(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    FluidParams pr(1.0, 0.1 + up(gen), 0.01 + 0.3 * up(gen));
    const double p2 = 0.01 + up(gen);
    auto [r1, r2] = fluid_denominator_poles(pr, p2);
    REQUIRE(r1.imag() < 0.0);
    REQUIRE(r2.imag() < 0.0);
    const Complex I(0, 1);
    const Complex res = r1 - I * pr.tau * r1 * r1 + I * pr.D * p2;
    REQUIRE(std::abs(res) < 1e-10);
  }
}

TEST_CASE("every reference model is causal", "[analytic]") {
  RcResponse rc(1.3, 0.4);
  OscillatorResponse osc(2.0, 0.2);
  for (double t = -5.0; t < 0.0; t += 0.37) {
    REQUIRE(rc.time(t) == 0.0);
    REQUIRE(osc.time(t) == 0.0);
  }
}
