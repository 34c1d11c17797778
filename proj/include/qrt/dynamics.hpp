#pragma once

#include <map>
#include <vector>

#include "qrt/correlators.hpp"

namespace qrt {

// One source channel j^n(t) on the window [t_i, t_f] in a named closed form.
// For t <= t_i the channel sits exactly on its start plateau; for t >= t_f it
// holds the value reached at t_f. A discontinuity at t_i (sudden switch-on)
// is allowed.
struct DriveChannel {
  enum class Form { Step, Ramp, GaussianPulse, Sinusoid, Tabulated };
  Form form = Form::Step;
  double j_start = 0.0;    // plateau for t <= t_i
  double j_end = 0.0;      // step/ramp target
  double t0 = 0.0;         // step time or pulse center
  double width = 1.0;      // pulse width
  double amplitude = 0.0;  // pulse/sinusoid amplitude
  double omega = 1.0;      // sinusoid angular frequency
  double phase = 0.0;      // sinusoid phase at t_i
  std::vector<double> tab_t, tab_v;  // strictly ascending samples

  static DriveChannel constant(double value) {
    DriveChannel c;
    c.j_start = c.j_end = value;
    c.t0 = -1e300;
    return c;
  }
  static DriveChannel step(double before, double after, double at) {
    DriveChannel c;
    c.j_start = before;
    c.j_end = after;
    c.t0 = at;
    return c;
  }
  static DriveChannel ramp(double from, double to) {
    DriveChannel c;
    c.form = Form::Ramp;
    c.j_start = from;
    c.j_end = to;
    return c;
  }
  static DriveChannel gaussian(double base, double amplitude, double center,
                               double width) {
    DriveChannel c;
    c.form = Form::GaussianPulse;
    c.j_start = c.j_end = base;
    c.amplitude = amplitude;
    c.t0 = center;
    c.width = width;
    return c;
  }
  static DriveChannel sinusoid(double base, double amplitude, double omega,
                               double phase = 0.0) {
    DriveChannel c;
    c.form = Form::Sinusoid;
    c.j_start = base;
    c.amplitude = amplitude;
    c.omega = omega;
    c.phase = phase;
    return c;
  }
  static DriveChannel tabulated(std::vector<double> t, std::vector<double> v) {
    if (t.size() != v.size() || t.size() < 2)
      throw Error("DomainError", "tabulated channel needs matching samples");
    for (size_t i = 1; i < t.size(); ++i)
      if (t[i] <= t[i - 1])
        throw Error("DomainError", "tabulated times must be strictly ascending");
    DriveChannel c;
    c.form = Form::Tabulated;
    c.tab_t = std::move(t);
    c.tab_v = std::move(v);
    c.j_start = c.tab_v.front();
    c.j_end = c.tab_v.back();
    return c;
  }
};

struct DriveProtocol {
  double t_i = 0.0, t_f = 1.0;
  std::vector<DriveChannel> channels;  // one per source

  int n_channels() const { return static_cast<int>(channels.size()); }

  double in_window(int n, double t) const {
    const DriveChannel& c = channels[static_cast<size_t>(n)];
    switch (c.form) {
      case DriveChannel::Form::Step:
        return t < c.t0 ? c.j_start : c.j_end;
      case DriveChannel::Form::Ramp:
        return c.j_start + (c.j_end - c.j_start) * (t - t_i) / (t_f - t_i);
      case DriveChannel::Form::GaussianPulse: {
        const double u = (t - c.t0) / c.width;
        return c.j_start + c.amplitude * std::exp(-0.5 * u * u);
      }
      case DriveChannel::Form::Sinusoid:
        return c.j_start + c.amplitude * std::sin(c.omega * (t - t_i) + c.phase);
      case DriveChannel::Form::Tabulated: {
        const auto& tt = c.tab_t;
        if (t <= tt.front()) return c.tab_v.front();
        if (t >= tt.back()) return c.tab_v.back();
        const auto it = std::upper_bound(tt.begin(), tt.end(), t);
        const size_t hi = static_cast<size_t>(it - tt.begin()), lo = hi - 1;
        const double f = (t - tt[lo]) / (tt[hi] - tt[lo]);
        return (1.0 - f) * c.tab_v[lo] + f * c.tab_v[hi];
      }
    }
    return 0.0;
  }

  double value(int n, double t) const {
    if (t <= t_i) return channels[static_cast<size_t>(n)].j_start;
    return in_window(n, std::min(t, t_f));
  }

  RealVector values(double t) const {
    RealVector j(n_channels());
    for (int n = 0; n < n_channels(); ++n) j[n] = value(n, t);
    return j;
  }
  RealVector initial_values() const {
    RealVector j(n_channels());
    for (int n = 0; n < n_channels(); ++n)
      j[n] = channels[static_cast<size_t>(n)].j_start;
    return j;
  }
  RealVector final_values() const { return values(t_f); }

  // smooth part of dj/dt; discontinuities are listed by jumps()
  double derivative(int n, double t) const {
    if (t <= t_i || t >= t_f) return 0.0;
    const DriveChannel& c = channels[static_cast<size_t>(n)];
    switch (c.form) {
      case DriveChannel::Form::Step:
        return 0.0;
      case DriveChannel::Form::Ramp:
        return (c.j_end - c.j_start) / (t_f - t_i);
      case DriveChannel::Form::GaussianPulse: {
        const double u = (t - c.t0) / c.width;
        return -c.amplitude * u / c.width * std::exp(-0.5 * u * u);
      }
      case DriveChannel::Form::Sinusoid:
        return c.amplitude * c.omega * std::cos(c.omega * (t - t_i) + c.phase);
      case DriveChannel::Form::Tabulated: {
        const auto& tt = c.tab_t;
        if (t <= tt.front() || t >= tt.back()) return 0.0;
        const auto it = std::upper_bound(tt.begin(), tt.end(), t);
        const size_t hi = static_cast<size_t>(it - tt.begin()), lo = hi - 1;
        return (c.tab_v[hi] - c.tab_v[lo]) / (tt[hi] - tt[lo]);
      }
    }
    return 0.0;
  }

  struct Jump {
    int channel;
    double t, before, after;
  };
  std::vector<Jump> jumps() const {
    std::vector<Jump> out;
    for (int n = 0; n < n_channels(); ++n) {
      const DriveChannel& c = channels[static_cast<size_t>(n)];
      // sudden switch-on at the window edge
      const double at_edge = in_window(n, t_i);
      if (std::abs(at_edge - c.j_start) > 1e-15)
        out.push_back({n, t_i, c.j_start, at_edge});
      if (c.form == DriveChannel::Form::Step && c.j_start != c.j_end &&
          c.t0 > t_i && c.t0 <= t_f)
        out.push_back({n, c.t0, c.j_start, c.j_end});
    }
    return out;
  }
};

// Expectation-value trajectory under the exact driven evolution. Density
// matrices are checkpointed at protocol jump times so work bookkeeping can
// use exact line integrals there.
struct Trajectory {
  RealVector times;
  RealMatrix Phi;         // times x sources
  ComplexMatrix U_final;  // full evolution operator over [t_i, t_f]
  std::vector<std::pair<double, ComplexMatrix>> rho_at_jumps;
};

struct PropagateOptions {
  bool check_convergence = true;
  double tolerance = 1e-6;  // allowed shift of any Phi sample under halving
};

namespace detail {

inline ComplexMatrix substep_unitary(const SystemSpec& spec, double mu,
                                     bool with_number, const RealVector& j,
                                     double dt,
                                     std::map<std::vector<double>, ComplexMatrix>* cache) {
  std::vector<double> key(j.data(), j.data() + j.size());
  key.push_back(dt);
  auto it = cache->find(key);
  if (it != cache->end()) return it->second;
  ComplexMatrix k = hamiltonian_at(spec, j).mat;
  if (with_number) k -= mu * spec.N_op.mat;
  EigenSystem es = eig_hermitian(HermitianOperator::trusted(0.5 * (k + k.adjoint())));
  ComplexVector phases(spec.dim);
  for (Eigen::Index i = 0; i < spec.dim; ++i)
    phases[i] = std::exp(Complex(0, -es.eigenvalues[i] * dt));
  ComplexMatrix step = es.vectors * phases.asDiagonal() * es.vectors.adjoint();
  return cache->emplace(std::move(key), std::move(step)).first->second;
}

inline RealVector phi_row(const SystemSpec& spec, const DriveProtocol& protocol,
                          const ComplexMatrix& rho, double t) {
  RealVector out(spec.n_sources());
  RealVector j = protocol.values(t);
  for (int m = 0; m < spec.n_sources(); ++m)
    out[m] = trace_prod(rho, observable_at(spec, m, j).mat).real();
  return out;
}

}  // namespace detail

inline Trajectory propagate(const SystemSpec& spec, const ThermalState& st,
                            const DriveProtocol& protocol, int steps,
                            const PropagateOptions& opt = {}) {
  if (steps < 1) throw Error("DomainError", "propagate needs at least one step");
  if (protocol.n_channels() != spec.n_sources())
    throw Error("DimensionMismatch", "protocol channels must match sources");
  if ((protocol.initial_values() - st.j).cwiseAbs().maxCoeff() > 1e-12)
    throw Error("ValidationError",
                "protocol start plateau must match the thermal state sources");
  const Eigen::Index d = spec.dim;
  const double dt = (protocol.t_f - protocol.t_i) / steps;

  Trajectory tr;
  tr.times = RealVector(steps + 1);
  tr.Phi = RealMatrix(steps + 1, spec.n_sources());
  ComplexMatrix rho = st.density_matrix();
  ComplexMatrix u = ComplexMatrix::Identity(d, d);
  std::map<std::vector<double>, ComplexMatrix> cache;

  auto jump_list = protocol.jumps();
  std::vector<bool> jump_done(jump_list.size(), false);
  auto checkpoint = [&](double t, const ComplexMatrix& rho_t) {
    for (size_t q = 0; q < jump_list.size(); ++q)
      if (!jump_done[q] && std::abs(jump_list[q].t - t) <= 0.5 * dt + 1e-12) {
        tr.rho_at_jumps.emplace_back(jump_list[q].t, rho_t);
        jump_done[q] = true;
      }
  };

  tr.times[0] = protocol.t_i;
  tr.Phi.row(0) = detail::phi_row(spec, protocol, rho, protocol.t_i);
  checkpoint(protocol.t_i, rho);
  for (int s = 0; s < steps; ++s) {
    const double tm = protocol.t_i + (s + 0.5) * dt;
    ComplexMatrix ustep =
        detail::substep_unitary(spec, st.mu, st.has_number, protocol.values(tm), dt, &cache);
    rho = ustep * rho * ustep.adjoint();
    u = ustep * u;
    const double t = protocol.t_i + (s + 1) * dt;
    tr.times[s + 1] = t;
    tr.Phi.row(s + 1) = detail::phi_row(spec, protocol, rho, t);
    checkpoint(t, rho);
  }
  tr.U_final = u;

  if (max_abs(u.adjoint() * u - ComplexMatrix::Identity(d, d)) > 1e-8)
    throw Error("NumericalFailure", "unitarity drift in propagation");

  if (opt.check_convergence && steps >= 2) {
    const int coarse = steps / 2;
    const double dtc = (protocol.t_f - protocol.t_i) / coarse;
    ComplexMatrix rho_c = st.density_matrix();
    for (int s = 0; s < coarse; ++s) {
      const double tm = protocol.t_i + (s + 0.5) * dtc;
      ComplexMatrix ustep = detail::substep_unitary(spec, st.mu, st.has_number,
                                                    protocol.values(tm), dtc, &cache);
      rho_c = ustep * rho_c * ustep.adjoint();
    }
    RealVector fine = tr.Phi.row(steps).transpose();
    RealVector coarse_phi = detail::phi_row(spec, protocol, rho_c, protocol.t_f);
    // halving the step changes Phi by O(dt^2); the 4/3 factor extrapolates
    // the coarse-fine gap to the exact error
    if (((coarse_phi - fine).cwiseAbs().maxCoeff()) * (4.0 / 3.0) > opt.tolerance)
      throw Error("StepTooCoarse",
                  "halving the time step moves Phi by more than the tolerance");
  }
  return tr;
}

// First- and second-order Volterra prediction built from exact response
// kernels, evaluated on a uniform grid with trapezoidal memory integrals and
// half-weight boundary samples.
struct VolterraModel {
  RealVector phi_init;
  std::vector<std::vector<LinearResponseKernel>> linear;                // [m][n]
  std::vector<std::vector<std::vector<QuadraticResponseKernel>>> quad;  // [m][n][k]
};

inline VolterraModel volterra_model(const SystemSpec& spec, const ThermalState& st,
                                    int order) {
  if (order != 1 && order != 2)
    throw Error("DomainError", "volterra order must be 1 or 2");
  VolterraModel vm;
  const int M = spec.n_sources();
  vm.phi_init = thermo_point(st, spec).Phi;
  vm.linear.resize(static_cast<size_t>(M));
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < M; ++n)
      vm.linear[static_cast<size_t>(m)].push_back(linear_response(st, spec, m, n));
  if (order >= 2) {
    vm.quad.resize(static_cast<size_t>(M));
    for (int m = 0; m < M; ++m) {
      vm.quad[static_cast<size_t>(m)].resize(static_cast<size_t>(M));
      for (int n = 0; n < M; ++n)
        for (int k = 0; k < M; ++k)
          vm.quad[static_cast<size_t>(m)][static_cast<size_t>(n)].push_back(
              quadratic_response(st, spec, m, n, k));
    }
  }
  return vm;
}

// Predicted Phi on the rows `times[i]` with i % eval_stride == 0 (and the
// final row); other rows are left untouched as NaN. The stride keeps the
// double memory integral affordable on fine grids.
inline RealMatrix volterra_predict(const VolterraModel& vm,
                                   const DriveProtocol& protocol,
                                   const RealVector& times, int order,
                                   int eval_stride = 1) {
  if (order != 1 && order != 2)
    throw Error("DomainError", "volterra order must be 1 or 2");
  const int M = static_cast<int>(vm.phi_init.size());
  const Eigen::Index G = times.size();
  if (G < 2) throw Error("GridMismatch", "prediction grid needs >= 2 samples");
  const double dt = times[1] - times[0];
  for (Eigen::Index i = 1; i < G; ++i)
    if (std::abs(times[i] - times[i - 1] - dt) > 1e-9 * std::abs(dt))
      throw Error("GridMismatch", "prediction grid must be uniform");
  const bool with_quad = order >= 2;
  if (with_quad && vm.quad.empty())
    throw Error("GridMismatch", "model was built without quadratic kernels");

  RealMatrix dj(G, M);
  for (Eigen::Index i = 0; i < G; ++i)
    for (int n = 0; n < M; ++n)
      dj(i, n) = protocol.value(n, times[i]) - protocol.channels[size_t(n)].j_start;

  std::vector<std::vector<RealVector>> lin_k(static_cast<size_t>(M));
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < M; ++n) {
      RealVector kk(G);
      for (Eigen::Index i = 0; i < G; ++i)
        kk[i] =
            vm.linear[static_cast<size_t>(m)][static_cast<size_t>(n)].delayed_time(i * dt);
      lin_k[static_cast<size_t>(m)].push_back(kk);
    }
  std::vector<std::vector<std::vector<RealVector>>> mix_k(static_cast<size_t>(M));
  std::vector<std::vector<std::vector<RealMatrix>>> quad_k(static_cast<size_t>(M));
  if (with_quad)
    for (int m = 0; m < M; ++m) {
      mix_k[static_cast<size_t>(m)].resize(static_cast<size_t>(M));
      quad_k[static_cast<size_t>(m)].resize(static_cast<size_t>(M));
      for (int n = 0; n < M; ++n)
        for (int k = 0; k < M; ++k) {
          const QuadraticResponseKernel& q =
              vm.quad[static_cast<size_t>(m)][static_cast<size_t>(n)][static_cast<size_t>(k)];
          RealVector mk(G);
          for (Eigen::Index i = 0; i < G; ++i) mk[i] = q.mixed_time(i * dt);
          mix_k[static_cast<size_t>(m)][static_cast<size_t>(n)].push_back(mk);
          RealMatrix qk(G, G);
          for (Eigen::Index i = 0; i < G; ++i)
            for (Eigen::Index l = 0; l < G; ++l) qk(i, l) = q.delayed_time(i * dt, l * dt);
          quad_k[static_cast<size_t>(m)][static_cast<size_t>(n)].push_back(qk);
        }
    }

  RealMatrix out = RealMatrix::Constant(G, M, std::nan(""));
  for (Eigen::Index i = 0; i < G; ++i) {
    if (eval_stride > 1 && i % eval_stride != 0 && i != G - 1) continue;
    for (int m = 0; m < M; ++m) {
      double phi = vm.phi_init[m];
      for (int n = 0; n < M; ++n) {
        phi += vm.linear[static_cast<size_t>(m)][static_cast<size_t>(n)].delta_inf *
               dj(i, n);
        double conv = 0.0;
        for (Eigen::Index l = 0; l <= i; ++l) {
          const double wq = (l == 0 || l == i) ? 0.5 : 1.0;
          conv += wq * lin_k[static_cast<size_t>(m)][static_cast<size_t>(n)][i - l] *
                  dj(l, n);
        }
        phi += conv * dt;
      }
      if (with_quad)
        for (int n = 0; n < M; ++n)
          for (int k = 0; k < M; ++k) {
            const QuadraticResponseKernel& q =
                vm.quad[static_cast<size_t>(m)][static_cast<size_t>(n)]
                       [static_cast<size_t>(k)];
            phi += 0.5 * q.delta_inf3 * dj(i, n) * dj(i, k);
            double mixed = 0.0;
            for (Eigen::Index l = 0; l <= i; ++l) {
              const double wq = (l == 0 || l == i) ? 0.5 : 1.0;
              mixed += wq *
                       mix_k[static_cast<size_t>(m)][static_cast<size_t>(n)]
                            [static_cast<size_t>(k)][i - l] *
                       dj(l, k);
            }
            phi += dj(i, n) * mixed * dt;
            double dbl = 0.0;
            const RealMatrix& qk = quad_k[static_cast<size_t>(m)][static_cast<size_t>(n)]
                                         [static_cast<size_t>(k)];
            for (Eigen::Index l1 = 0; l1 <= i; ++l1) {
              const double w1 = (l1 == 0 || l1 == i) ? 0.5 : 1.0;
              double inner = 0.0;
              for (Eigen::Index l2 = 0; l2 <= i; ++l2) {
                const double w2 = (l2 == 0 || l2 == i) ? 0.5 : 1.0;
                inner += w2 * qk(i - l1, i - l2) * dj(l2, k);
              }
              dbl += w1 * inner * dj(l1, n);
            }
            phi += 0.5 * dbl * dt * dt;
          }
      out(i, m) = phi;
    }
  }
  return out;
}

// Mean dissipated work <<W>> = -sum_m int Phi_m(t) dj^m/dt dt, with exact
// line-integral contributions at step discontinuities.
inline double mean_work(const Trajectory& tr, const DriveProtocol& protocol,
                        const SystemSpec& spec) {
  const Eigen::Index G = tr.times.size();
  const int M = spec.n_sources();
  const double dt = tr.times[1] - tr.times[0];
  double w = 0.0;
  for (int m = 0; m < M; ++m) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < G; ++i) {
      const double wq = (i == 0 || i == G - 1) ? 0.5 : 1.0;
      acc += wq * tr.Phi(i, m) * protocol.derivative(m, tr.times[i]);
    }
    w -= acc * dt;
  }
  // a step is an instantaneous quench: its work is the exact line integral
  // of -phi(j) dj at frozen state, i.e. Tr{rho (H_after - H_before)}
  for (const auto& jump : protocol.jumps()) {
    const ComplexMatrix* rho = nullptr;
    for (const auto& [t, r] : tr.rho_at_jumps)
      if (std::abs(t - jump.t) < 1e-9) rho = &r;
    if (!rho)
      throw Error("NumericalFailure",
                  "no density checkpoint recorded at a protocol jump");
    RealVector j_before = protocol.values(jump.t), j_after = j_before;
    j_before[jump.channel] = jump.before;
    j_after[jump.channel] = jump.after;
    w += trace_prod(*rho, hamiltonian_at(spec, j_after).mat -
                              hamiltonian_at(spec, j_before).mat)
             .real();
  }
  return w;
}

// Energy-difference route: Tr{rho_f (H_f - mu N)} - Tr{rho_i (H_i - mu N)}.
inline double work_energy_difference(const Trajectory& tr,
                                     const DriveProtocol& protocol,
                                     const SystemSpec& spec, const ThermalState& st) {
  ComplexMatrix rho_i = st.density_matrix();
  ComplexMatrix rho_f = tr.U_final * rho_i * tr.U_final.adjoint();
  ComplexMatrix ki = hamiltonian_at(spec, protocol.initial_values()).mat;
  ComplexMatrix kf = hamiltonian_at(spec, protocol.final_values()).mat;
  if (st.has_number) {
    ki -= st.mu * spec.N_op.mat;
    kf -= st.mu * spec.N_op.mat;
  }
  return trace_prod(rho_f, kf).real() - trace_prod(rho_i, ki).real();
}

}  // namespace qrt
