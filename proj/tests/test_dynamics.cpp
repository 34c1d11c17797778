#include <catch2/catch.hpp>

#include "qrt/dynamics.hpp"
#include "test_util.hpp"

using namespace qrt;

namespace {

SystemSpec two_level_sz_source() {
  SystemSpec spec;
  spec.dim = 2;
  spec.H0 = HermitianOperator(0.5 * pauli::z());
  spec.N_op = HermitianOperator::zero(2);
  spec.phi.emplace_back(pauli::z());
  spec.labels = {"sz"};
  spec.j_init = RealVector::Zero(1);
  return spec;
}

// qubit with both transverse couplings, for the rotating-field drive
SystemSpec two_level_xy_sources(double omega0) {
  SystemSpec spec;
  spec.dim = 2;
  spec.H0 = HermitianOperator(0.5 * omega0 * pauli::z());
  spec.N_op = HermitianOperator::zero(2);
  spec.phi.emplace_back(pauli::x());
  spec.phi.emplace_back(pauli::y());
  spec.labels = {"sx", "sy"};
  spec.j_init = RealVector::Zero(2);
  return spec;
}

// coupling with no parity selection rule, so that every response order is
// populated
SystemSpec tilted_qubit() {
  SystemSpec spec;
  spec.dim = 2;
  spec.H0 = HermitianOperator(0.5 * pauli::z());
  spec.N_op = HermitianOperator::zero(2);
  spec.phi.emplace_back(ComplexMatrix(pauli::x() + 0.5 * pauli::z()));
  spec.labels = {"tilt"};
  spec.j_init = RealVector::Zero(1);
  return spec;
}

DriveProtocol constant_protocol(const SystemSpec& spec, double t_i, double t_f) {
  DriveProtocol p;
  p.t_i = t_i;
  p.t_f = t_f;
  for (int n = 0; n < spec.n_sources(); ++n)
    p.channels.push_back(DriveChannel::constant(spec.j_init[n]));
  return p;
}

}  // namespace

TEST_CASE("constant protocol leaves equilibrium stationary", "[dynamics]") {
  SystemSpec spec = build_transverse_ising(2, 1.0, 0.7);
  ThermalState st = gibbs(spec, 1.0, 0.0);
  DriveProtocol p = constant_protocol(spec, 0.0, 5.0);
  Trajectory tr = propagate(spec, st, p, 200);
  ThermoPoint tp = thermo_point(st, spec);
  for (Eigen::Index i = 0; i < tr.times.size(); ++i)
    for (int m = 0; m < spec.n_sources(); ++m)
      REQUIRE(tr.Phi(i, m) == Approx(tp.Phi[m]).margin(1e-10));
}

TEST_CASE("unitarity is preserved over many steps", "[dynamics]") {
  SystemSpec spec = tilted_qubit();
  ThermalState st = gibbs(spec, 1.0, 0.0);
  DriveProtocol p;
  p.t_i = 0.0;
  p.t_f = 20.0;
  p.channels.push_back(DriveChannel::sinusoid(0.0, 0.3, 1.1));
  PropagateOptions opt;
  opt.check_convergence = false;
  Trajectory tr = propagate(spec, st, p, 10000, opt);
  REQUIRE(max_abs(tr.U_final.adjoint() * tr.U_final -
                  ComplexMatrix::Identity(2, 2)) <= 1e-10);
}

TEST_CASE("rotating transverse field matches the closed-form evolution",
          "[dynamics]") {
  const double omega0 = 1.0, amp = 0.5, omega = 1.0;  // resonant drive
  SystemSpec spec = two_level_xy_sources(omega0);
  ThermalState st = gibbs(spec, 1.2, 0.0);
  DriveProtocol p;
  p.t_i = 0.0;
  p.t_f = 10.0;
  // H(t) = (omega0/2) sz - (amp/2)(cos(wt) sx + sin(wt) sy)
  p.channels.push_back(DriveChannel::sinusoid(0.0, 0.5 * amp, omega, 0.5 * M_PI));
  p.channels.push_back(DriveChannel::sinusoid(0.0, 0.5 * amp, omega, 0.0));
  PropagateOptions opt;
  opt.check_convergence = false;
  Trajectory tr = propagate(spec, st, p, 8000, opt);

  // exact propagator e^{-i w t sz/2} e^{-i Hbar t} with
  // Hbar = ((omega0 - w)/2) sz - (amp/2) sx
  ComplexMatrix hbar = 0.5 * (omega0 - omega) * pauli::z() - 0.5 * amp * pauli::x();
  EigenSystem eb = eig_hermitian(HermitianOperator(hbar));
  ComplexMatrix rho0 = st.density_matrix();
  for (Eigen::Index i = 0; i < tr.times.size(); i += 400) {
    const double t = tr.times[i];
    ComplexVector ph(2);
    for (int q = 0; q < 2; ++q) ph[q] = std::exp(Complex(0, -eb.eigenvalues[q] * t));
    ComplexMatrix ub = eb.vectors * ph.asDiagonal() * eb.vectors.adjoint();
    ComplexMatrix rz(2, 2);
    rz << std::exp(Complex(0, -0.5 * omega * t)), 0, 0,
        std::exp(Complex(0, 0.5 * omega * t));
    ComplexMatrix u = rz * ub;
    ComplexMatrix rho_t = u * rho0 * u.adjoint();
    REQUIRE(tr.Phi(i, 0) ==
            Approx(trace_prod(rho_t, pauli::x()).real()).margin(1e-6));
    REQUIRE(tr.Phi(i, 1) ==
            Approx(trace_prod(rho_t, pauli::y()).real()).margin(1e-6));
  }
}

TEST_CASE("entropy spectrum is invariant under driving", "[dynamics]") {
  SystemSpec spec = tilted_qubit();
  ThermalState st = gibbs(spec, 0.8, 0.0);
  DriveProtocol p;
  p.t_i = 0.0;
  p.t_f = 6.0;
  p.channels.push_back(DriveChannel::gaussian(0.0, 0.4, 3.0, 0.7));
  PropagateOptions opt;
  opt.check_convergence = false;
  Trajectory tr = propagate(spec, st, p, 1200, opt);
  ComplexMatrix rho_f = tr.U_final * st.density_matrix() * tr.U_final.adjoint();
  EigenSystem ef = eig_hermitian(HermitianOperator(0.5 * (rho_f + rho_f.adjoint())));
  RealVector wi = st.weights;
  std::sort(wi.data(), wi.data() + wi.size());
  for (int q = 0; q < 2; ++q)
    REQUIRE(ef.eigenvalues[q] == Approx(wi[q]).margin(1e-10));
}

TEST_CASE("StepTooCoarse triggers on under-resolved drives", "[dynamics]") {
  SystemSpec spec = tilted_qubit();
  ThermalState st = gibbs(spec, 1.0, 0.0);
  DriveProtocol p;
  p.t_i = 0.0;
  p.t_f = 10.0;
  p.channels.push_back(DriveChannel::sinusoid(0.0, 0.5, 4.0));
  PropagateOptions opt;
  opt.tolerance = 1e-8;
  REQUIRE_THROWS_AS(propagate(spec, st, p, 8, opt), Error);
}

TEST_CASE("volterra prediction is flat without perturbation", "[dynamics]") {
  SystemSpec spec = tilted_qubit();
  ThermalState st = gibbs(spec, 1.0, 0.0);
  VolterraModel vm = volterra_model(spec, st, 2);
  DriveProtocol p = constant_protocol(spec, 0.0, 4.0);
  RealVector times = RealVector::LinSpaced(101, 0.0, 4.0);
  RealMatrix pred = volterra_predict(vm, p, times, 2);
  for (Eigen::Index i = 0; i < times.size(); ++i)
    REQUIRE(pred(i, 0) == Approx(vm.phi_init[0]).margin(1e-12));
}

namespace {

// max |prediction - exact| over the evaluated rows
double prediction_error(const SystemSpec& spec, const ThermalState& st,
                        const VolterraModel& vm, double lambda, int order,
                        int grid, int stride) {
  DriveProtocol p;
  p.t_i = 0.0;
  p.t_f = 12.0;
  p.channels.push_back(DriveChannel::gaussian(0.0, lambda, 4.0, 1.0));
  PropagateOptions opt;
  opt.check_convergence = false;
  Trajectory tr = propagate(spec, st, p, grid, opt);
  RealMatrix pred = volterra_predict(vm, p, tr.times, order, stride);
  double err = 0.0;
  for (Eigen::Index i = 0; i < tr.times.size(); ++i) {
    if (std::isnan(pred(i, 0))) continue;
    err = std::max(err, std::abs(pred(i, 0) - tr.Phi(i, 0)));
  }
  return err;
}

double fit_exponent(const std::vector<double>& lambdas,
                    const std::vector<double>& errors) {
  // least-squares slope of log err against log lambda
  const size_t n = lambdas.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = std::log(lambdas[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("volterra prediction error scales at the expected order", "[dynamics]") {
  SystemSpec spec = tilted_qubit();
  ThermalState st = gibbs(spec, 1.0, 0.0);
  VolterraModel vm = volterra_model(spec, st, 2);
  std::vector<double> lambdas{0.02, 0.04, 0.08};
  std::vector<double> e1, e2;
  for (double l : lambdas) {
    e1.push_back(prediction_error(spec, st, vm, l, 1, 1600, 40));
    e2.push_back(prediction_error(spec, st, vm, l, 2, 1600, 40));
  }
  const double p1 = fit_exponent(lambdas, e1);
  const double p2 = fit_exponent(lambdas, e2);
  REQUIRE(p1 == Approx(2.0).margin(0.1));
  REQUIRE(p2 == Approx(3.0).margin(0.15));
}

TEST_CASE("prediction and propagation are causal", "[dynamics]") {
  SystemSpec spec = tilted_qubit();
  ThermalState st = gibbs(spec, 1.0, 0.0);
  VolterraModel vm = volterra_model(spec, st, 1);
  // two protocols identical until t* = 5, then diverging
  auto tabulated = [&](double late) {
    std::vector<double> tt, vv;
    for (int i = 0; i <= 40; ++i) {
      const double t = 10.0 * i / 40.0;
      tt.push_back(t);
      vv.push_back(t < 5.0 ? 0.05 * std::sin(1.3 * t) : late * (t - 5.0) / 5.0);
    }
    DriveProtocol p;
    p.t_i = 0.0;
    p.t_f = 10.0;
    p.channels.push_back(DriveChannel::tabulated(tt, vv));
    return p;
  };
  DriveProtocol pa = tabulated(0.08), pb = tabulated(-0.12);
  PropagateOptions opt;
  opt.check_convergence = false;
  Trajectory ta = propagate(spec, st, pa, 1000, opt);
  Trajectory tb = propagate(spec, st, pb, 1000, opt);
  RealMatrix qa = volterra_predict(vm, pa, ta.times, 1, 100);
  RealMatrix qb = volterra_predict(vm, pb, tb.times, 1, 100);
  for (Eigen::Index i = 0; i < ta.times.size(); ++i) {
    if (ta.times[i] > 5.0) break;
    REQUIRE(ta.Phi(i, 0) == Approx(tb.Phi(i, 0)).margin(1e-12));
    if (!std::isnan(qa(i, 0))) REQUIRE(qa(i, 0) == Approx(qb(i, 0)).margin(1e-12));
  }
}

TEST_CASE("mean work vanishes for constant protocols and bounds cyclic drives",
          "[dynamics]") {
  SystemSpec spec = tilted_qubit();
  ThermalState st = gibbs(spec, 1.0, 0.0);
  DriveProtocol p = constant_protocol(spec, 0.0, 3.0);
  Trajectory tr = propagate(spec, st, p, 300);
  REQUIRE(mean_work(tr, p, spec) == Approx(0.0).margin(1e-12));

  // cyclic pulse: j_f = j_i, dissipated work must be non-negative
  DriveProtocol pc;
  pc.t_i = 0.0;
  pc.t_f = 12.0;
  pc.channels.push_back(DriveChannel::gaussian(0.0, 0.35, 5.0, 0.8));
  Trajectory trc = propagate(spec, st, pc, 3000);
  REQUIRE(mean_work(trc, pc, spec) >= -1e-10);
}

TEST_CASE("sudden quench work matches the two-level closed form", "[dynamics]") {
  SystemSpec spec = two_level_sz_source();
  const double beta = 1.4, lambda = 0.3;
  ThermalState st = gibbs(spec, beta, 0.0);
  DriveProtocol p;
  p.t_i = 0.0;
  p.t_f = 4.0;
  p.channels.push_back(DriveChannel::step(0.0, lambda, 2.0));
  Trajectory tr = propagate(spec, st, p, 400);
  // quench along sz: W = -lambda <sz>_i with <sz>_i = -tanh(beta w0/2)
  const double expect = lambda * std::tanh(0.5 * beta);
  REQUIRE(mean_work(tr, p, spec) == Approx(expect).epsilon(1e-10));
  REQUIRE(work_energy_difference(tr, p, spec, st) == Approx(expect).epsilon(1e-10));
}

TEST_CASE("power integral and energy difference agree on smooth drives",
          "[dynamics]") {
  SystemSpec spec = build_transverse_ising(2, 1.0, 0.5);
  ThermalState st = gibbs(spec, 1.1, 0.0);
  DriveProtocol p;
  p.t_i = 0.0;
  p.t_f = 8.0;
  for (int n = 0; n < spec.n_sources(); ++n)
    p.channels.push_back(DriveChannel::constant(0.0));
  p.channels[0] = DriveChannel::gaussian(0.0, 0.25, 3.0, 0.9);
  p.channels[3] = DriveChannel::ramp(0.0, 0.15);
  PropagateOptions opt;
  opt.check_convergence = false;
  Trajectory tr = propagate(spec, st, p, 20000, opt);
  const double w1 = mean_work(tr, p, spec);
  const double w2 = work_energy_difference(tr, p, spec, st);
  REQUIRE(w1 == Approx(w2).margin(1e-6));
}
