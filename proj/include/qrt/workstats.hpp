#pragma once

#include <vector>

#include "qrt/dynamics.hpp"

namespace qrt {

// Outcome distribution of the two-point-measurement work protocol:
// projective energy readings of H(j_i) - mu N before and H(j_f) - mu N after
// the drive, W = eps^f_b - eps^i_a with p = p_a |<b|U|a>|^2.
struct WorkDistribution {
  struct Outcome {
    double W, p;
  };
  std::vector<Outcome> outcomes;  // ascending in W, merged within 1e-10
  bool reversed = false;          // built from a time-reversed protocol

  double total() const {
    double s = 0.0;
    for (const auto& o : outcomes) s += o.p;
    return s;
  }
  double mean() const {
    double s = 0.0;
    for (const auto& o : outcomes) s += o.p * o.W;
    return s;
  }
  double support_min() const { return outcomes.empty() ? 0.0 : outcomes.front().W; }
  double support_max() const { return outcomes.empty() ? 0.0 : outcomes.back().W; }
  const Outcome* find(double w, double tol = 1e-9) const {
    for (const auto& o : outcomes)
      if (std::abs(o.W - w) <= tol) return &o;
    return nullptr;
  }
};

inline WorkDistribution work_distribution(const SystemSpec& spec,
                                          const ThermalState& st,
                                          const DriveProtocol& protocol,
                                          const ComplexMatrix& u_final) {
  ComplexMatrix kf = hamiltonian_at(spec, protocol.final_values()).mat;
  if (st.has_number) kf -= st.mu * spec.N_op.mat;
  EigenSystem ef = eig_hermitian(HermitianOperator::trusted(0.5 * (kf + kf.adjoint())));
  // amplitudes between initial and final eigenbases
  ComplexMatrix m = ef.vectors.adjoint() * u_final * st.eig.vectors;
  std::vector<WorkDistribution::Outcome> raw;
  for (Eigen::Index a = 0; a < st.dim(); ++a)
    for (Eigen::Index b = 0; b < st.dim(); ++b) {
      const double p = st.weights[a] * std::norm(m(b, a));
      if (p > 0.0)
        raw.push_back({ef.eigenvalues[b] - st.eig.eigenvalues[a], p});
    }
  std::sort(raw.begin(), raw.end(),
            [](const WorkDistribution::Outcome& x, const WorkDistribution::Outcome& y) {
              return x.W < y.W;
            });
  WorkDistribution dist;
  for (const auto& o : raw) {
    if (!dist.outcomes.empty() && o.W - dist.outcomes.back().W < 1e-10) {
      auto& last = dist.outcomes.back();
      last.W = (last.W * last.p + o.W * o.p) / (last.p + o.p);
      last.p += o.p;
    } else {
      dist.outcomes.push_back(o);
    }
  }
  return dist;
}

// Z_W(xi) = <<exp(-xi W)>>
inline double characteristic_zw(const WorkDistribution& dist, double xi) {
  double s = 0.0;
  for (const auto& o : dist.outcomes) s += o.p * std::exp(-xi * o.W);
  return s;
}

// Measurement partition function
// Z_M(beta, zeta) = Tr{e^{-beta(H_i - mu N)} U^dag e^{-zeta(H_f - mu N)} U}.
struct MeasurementPartition {
  double beta = 0.0, zeta = 0.0, mu = 0.0;
  double value = 0.0, log_value = 0.0;
};

inline MeasurementPartition measurement_partition(const SystemSpec& spec,
                                                  const ThermalState& st,
                                                  const DriveProtocol& protocol,
                                                  double beta, double zeta,
                                                  const ComplexMatrix& u_final) {
  ComplexMatrix kf = hamiltonian_at(spec, protocol.final_values()).mat;
  if (st.has_number) kf -= st.mu * spec.N_op.mat;
  EigenSystem ef = eig_hermitian(HermitianOperator::trusted(0.5 * (kf + kf.adjoint())));
  ComplexMatrix m = ef.vectors.adjoint() * u_final * st.eig.vectors;
  double acc = 0.0;
  for (Eigen::Index a = 0; a < st.dim(); ++a)
    for (Eigen::Index b = 0; b < st.dim(); ++b)
      acc += std::exp(-beta * st.eig.eigenvalues[a] - zeta * ef.eigenvalues[b]) *
             std::norm(m(b, a));
  MeasurementPartition zm;
  zm.beta = beta;
  zm.zeta = zeta;
  zm.mu = st.mu;
  zm.value = acc;
  zm.log_value = std::log(acc);
  return zm;
}

// Convenience overload at the state's own temperature.
inline MeasurementPartition measurement_partition(const SystemSpec& spec,
                                                  const ThermalState& st,
                                                  const DriveProtocol& protocol,
                                                  double zeta,
                                                  const ComplexMatrix& u_final) {
  return measurement_partition(spec, st, protocol, st.beta, zeta, u_final);
}

// Final-state expectation Phi_m(t_f) recovered from source derivatives of
// log Z_M at small zeta with one Richardson step.
inline double zm_final_expectation(const SystemSpec& spec, const ThermalState& st,
                                   const DriveProtocol& protocol, int m,
                                   const ComplexMatrix& u_final,
                                   double zeta = 1e-4) {
  spec.check_source_index(m);
  auto log_zm_at = [&](double dz, double jshift) {
    // shift only the generating observable's final source value
    SystemSpec s2 = spec;
    (void)s2;
    RealVector jf = protocol.final_values();
    jf[m] += jshift;
    ComplexMatrix kf = hamiltonian_at(spec, jf).mat;
    if (st.has_number) kf -= st.mu * spec.N_op.mat;
    EigenSystem ef =
        eig_hermitian(HermitianOperator::trusted(0.5 * (kf + kf.adjoint())));
    ComplexMatrix mm = ef.vectors.adjoint() * u_final * st.eig.vectors;
    double acc = 0.0;
    for (Eigen::Index a = 0; a < st.dim(); ++a)
      for (Eigen::Index b = 0; b < st.dim(); ++b)
        acc += std::exp(-st.beta * st.eig.eigenvalues[a] - dz * ef.eigenvalues[b]) *
               std::norm(mm(b, a));
    return std::log(acc);
  };
  auto g = [&](double z) {
    // h large enough that log Z roundoff divided by h * zeta stays small
    const double h = 1e-3;
    return (log_zm_at(z, h) - log_zm_at(z, -h)) / (2.0 * h) / z;
  };
  // g(z) = Phi + c z + O(z^2); one Richardson step removes the linear term
  return 2.0 * g(0.5 * zeta) - g(zeta);
}

// |<exp(-beta W)> - Z_f/Z_i|; the identity is exact for any protocol because
// both sides share the same unitary.
inline double jarzynski_check(const WorkDistribution& dist, const ThermalState& st,
                              const SystemSpec& spec, const DriveProtocol& protocol) {
  if (dist.reversed)
    throw Error("DomainError", "jarzynski_check expects the forward distribution");
  ThermalState stf = gibbs(spec, st.beta, st.mu, protocol.final_values());
  const double ratio = std::exp(stf.logZ - st.logZ);
  return std::abs(characteristic_zw(dist, st.beta) - ratio);
}

// Time-reversed source configuration: per-channel parity sign and mirror
// about the window midpoint, so the reversed window is again [t_i, t_f].
inline DriveProtocol time_reverse_protocol(const DriveProtocol& protocol,
                                           const TimeParity& parity) {
  if (static_cast<int>(parity.eps.size()) != protocol.n_channels())
    throw Error("DimensionMismatch", "parity list must match protocol channels");
  DriveProtocol rev;
  rev.t_i = protocol.t_i;
  rev.t_f = protocol.t_f;
  const double mirror = protocol.t_i + protocol.t_f;
  for (int n = 0; n < protocol.n_channels(); ++n) {
    const DriveChannel& c = protocol.channels[static_cast<size_t>(n)];
    const double eps = parity.eps[static_cast<size_t>(n)];
    DriveChannel r = c;
    switch (c.form) {
      case DriveChannel::Form::Step:
        r.j_start = eps * c.j_end;
        r.j_end = eps * c.j_start;
        r.t0 = mirror - c.t0;
        break;
      case DriveChannel::Form::Ramp:
        r.j_start = eps * c.j_end;
        r.j_end = eps * c.j_start;
        break;
      case DriveChannel::Form::GaussianPulse:
        r.j_start = r.j_end = eps * c.j_start;
        r.amplitude = eps * c.amplitude;
        r.t0 = mirror - c.t0;
        break;
      case DriveChannel::Form::Sinusoid:
        // eps (base + A sin(w (t_f - t) + phase)) re-expressed on (t - t_i)
        r.j_start = eps * c.j_start;
        r.amplitude = -eps * c.amplitude;
        r.phase = -(c.omega * (protocol.t_f - protocol.t_i) + c.phase);
        break;
      case DriveChannel::Form::Tabulated: {
        std::vector<double> tt, vv;
        for (size_t q = c.tab_t.size(); q-- > 0;) {
          tt.push_back(mirror - c.tab_t[q]);
          vv.push_back(eps * c.tab_v[q]);
        }
        r.tab_t = std::move(tt);
        r.tab_v = std::move(vv);
        r.j_start = r.tab_v.front();
        r.j_end = r.tab_v.back();
        break;
      }
    }
    rev.channels.push_back(r);
  }
  return rev;
}

namespace detail {

inline void require_time_reversal_symmetric(const SystemSpec& spec,
                                            const TimeParity& parity) {
  if (!parity.basis_real)
    throw Error("NotTimeReversalSymmetric", "basis_real flag is not set");
  const double tol = 1e-12 * std::max(1.0, max_abs(spec.H0.mat));
  if (max_abs(ComplexMatrix(spec.H0.mat.imag().cast<Complex>())) > tol)
    throw Error("NotTimeReversalSymmetric", "H0 is not real in this basis");
  for (int n = 0; n < spec.n_sources(); ++n) {
    const ComplexMatrix& phi = spec.phi[static_cast<size_t>(n)].mat;
    const double s = std::max(1.0, max_abs(phi));
    if (parity.eps[static_cast<size_t>(n)] > 0) {
      if (max_abs(ComplexMatrix(phi.imag().cast<Complex>())) > 1e-12 * s)
        throw Error("NotTimeReversalSymmetric",
                    "even source coupling must be real");
    } else {
      if (max_abs(ComplexMatrix(phi.real().cast<Complex>())) > 1e-12 * s)
        throw Error("NotTimeReversalSymmetric",
                    "odd source coupling must be purely imaginary");
    }
  }
  for (int n = 0; n < spec.n_sources(); ++n)
    if (parity.eps[static_cast<size_t>(n)] < 0 &&
        std::abs(spec.j_init[n]) > 1e-14)
      throw Error("NotTimeReversalSymmetric",
                  "odd sources must vanish at the expansion point");
}

}  // namespace detail

// Crooks fluctuation check: max over forward outcomes with p > 1e-12 of the
// relative deviation of p(W)[j] / p(-W)[j_T] from exp(beta (W - dOmega)).
struct CrooksResult {
  double max_deviation = 0.0;
  double delta_omega = 0.0;
  WorkDistribution forward, backward;
};

inline CrooksResult crooks_check(const SystemSpec& spec, const ThermalState& st,
                                 const DriveProtocol& protocol,
                                 const TimeParity& parity, int steps) {
  detail::require_time_reversal_symmetric(spec, parity);
  PropagateOptions opt;
  opt.check_convergence = false;
  Trajectory fwd = propagate(spec, st, protocol, steps, opt);
  CrooksResult res;
  res.forward = work_distribution(spec, st, protocol, fwd.U_final);

  DriveProtocol rev = time_reverse_protocol(protocol, parity);
  SystemSpec spec_rev = spec;  // same operators; the state starts at j_T(t_i)
  ThermalState st_rev = gibbs(spec_rev, st.beta, st.mu, rev.initial_values());
  Trajectory bwd = propagate(spec_rev, st_rev, rev, steps, opt);
  res.backward = work_distribution(spec_rev, st_rev, rev, bwd.U_final);
  res.backward.reversed = true;

  ThermalState stf = gibbs(spec, st.beta, st.mu, protocol.final_values());
  res.delta_omega = -(stf.logZ - st.logZ) / st.beta;

  for (const auto& o : res.forward.outcomes) {
    if (o.p <= 1e-12) continue;
    const WorkDistribution::Outcome* rev_o = res.backward.find(-o.W);
    if (!rev_o || rev_o->p <= 0.0) {
      res.max_deviation = std::numeric_limits<double>::infinity();
      continue;
    }
    const double expect = std::exp(st.beta * (o.W - res.delta_omega));
    res.max_deviation = std::max(
        res.max_deviation, std::abs(o.p / rev_o->p - expect) / std::abs(expect));
  }
  return res;
}

}  // namespace qrt
