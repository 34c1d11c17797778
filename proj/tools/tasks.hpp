#pragma once

#include <random>

#include "qrt/analytic.hpp"
#include "qrt/config.hpp"
#include "qrt/workstats.hpp"

namespace qrt::tasks {

inline Json task_options(const ExperimentContext& ctx, const std::string& name) {
  if (ctx.cfg.contains("task") && ctx.cfg["task"].contains(name))
    return ctx.cfg["task"][name];
  return Json::object();
}

inline ResultTable static_susc(const ExperimentContext& ctx) {
  ThermalState st = gibbs(ctx.spec, ctx.beta, ctx.mu);
  RealMatrix ct = chi_t_mu(ctx.spec, st);
  RealMatrix L = suzuki_limit(ctx.spec, st);
  RealMatrix cs = ct - L;
  ResultTable t;
  t.name = "static-susc";
  t.metadata = ctx.metadata();
  auto& cm = t.add_column("m");
  auto& cn = t.add_column("n");
  auto& c1 = t.add_column("chi_T_mu");
  auto& c2 = t.add_column("chi_S_N");
  auto& c3 = t.add_column("suzuki_L");
  for (int m = 0; m < ctx.spec.n_sources(); ++m)
    for (int n = 0; n < ctx.spec.n_sources(); ++n) {
      cm.num.push_back(m);
      cn.num.push_back(n);
      c1.num.push_back(ct(m, n));
      c2.num.push_back(cs(m, n));
      c3.num.push_back(L(m, n));
    }
  return t;
}

inline ResultTable spectrum(const ExperimentContext& ctx) {
  ThermalState st = gibbs(ctx.spec, ctx.beta, ctx.mu);
  ResultTable t;
  t.name = "spectrum";
  t.metadata = ctx.metadata();
  auto& cm = t.add_column("m");
  auto& cn = t.add_column("n");
  auto& cw = t.add_column("omega");
  auto& cr = t.add_column("weight_re");
  auto& ci = t.add_column("weight_im");
  for (int m = 0; m < ctx.spec.n_sources(); ++m)
    for (int n = 0; n < ctx.spec.n_sources(); ++n) {
      SpectralComb comb = spectral_two_point(st, ctx.spec, m, n);
      for (const auto& l : comb.lines) {
        cm.num.push_back(m);
        cn.num.push_back(n);
        cw.num.push_back(l.omega);
        cr.num.push_back(l.weight.real());
        ci.num.push_back(l.weight.imag());
      }
    }
  return t;
}

inline std::vector<ResultTable> respond(const ExperimentContext& ctx) {
  const Json opt = task_options(ctx, "respond");
  const int m = opt.value("m", 0), n = opt.value("n", 0);
  const double t_max = opt.value("t_max", 20.0);
  const int samples = opt.value("samples", 400);
  ThermalState st = gibbs(ctx.spec, ctx.beta, ctx.mu);
  LinearResponseKernel k = linear_response(st, ctx.spec, m, n);

  ResultTable td;
  td.name = "respond-time";
  td.metadata = ctx.metadata();
  auto& ct = td.add_column("t");
  auto& cv = td.add_column("delta_R_delayed");
  for (int i = 0; i < samples; ++i) {
    const double t = t_max * i / (samples - 1);
    ct.num.push_back(t);
    cv.num.push_back(k.delayed_time(t));
  }

  ResultTable tf;
  tf.name = "respond-freq";
  tf.metadata = ctx.metadata();
  const double span = opt.value("omega_max", 2.0 + 2.0 * k.rho.span());
  auto& cw = tf.add_column("omega");
  auto& cre = tf.add_column("re");
  auto& cim = tf.add_column("im");
  for (int i = 0; i < samples; ++i) {
    const double w = -span + 2.0 * span * i / (samples - 1);
    const Complex v = response_freq(k, w);
    cw.num.push_back(w);
    cre.num.push_back(v.real());
    cim.num.push_back(v.imag());
  }
  return {td, tf};
}

inline ResultTable fdr_check(const ExperimentContext& ctx) {
  const Json opt = task_options(ctx, "fdr-check");
  std::vector<MonotoneFunction> fs;
  if (opt.contains("f")) {
    fs.push_back(MonotoneFunction::parse(opt["f"].get<std::string>()));
  } else {
    fs = {MonotoneFunction::const1(),  MonotoneFunction::linear(),
          MonotoneFunction::symmetric(), MonotoneFunction::bkm(),
          MonotoneFunction::power(0.5),  MonotoneFunction::root_mean()};
  }
  ThermalState st = gibbs(ctx.spec, ctx.beta, ctx.mu);
  ResultTable t;
  t.name = "fdr-check";
  t.metadata = ctx.metadata();
  auto& cf = t.add_column("f");
  cf.str = {};
  auto& cm = t.add_column("m");
  auto& cn = t.add_column("n");
  auto& cw = t.add_column("omega");
  auto& cc = t.add_column("coefficient");
  auto& cd = t.add_column("deviation");
  auto& cmax = t.add_column("max_deviation");
  double maxdev = 0.0;
  std::vector<double> devs;
  for (const auto& f : fs)
    for (int m = 0; m < ctx.spec.n_sources(); ++m)
      for (int n = 0; n < ctx.spec.n_sources(); ++n) {
        SpectralComb rho = spectral_two_point(st, ctx.spec, m, n);
        SpectralComb gen = generalized_covariance(st, ctx.spec, m, n, f);
        for (const auto& l : rho.lines) {
          const double coeff = f.eval(std::exp(-st.beta * l.omega)) /
                               (1.0 - std::exp(-st.beta * l.omega));
          const SpectralLine* match = nullptr;
          for (const auto& g : gen.lines)
            if (std::abs(g.omega - l.omega) < 1e-9) match = &g;
          const double dev =
              match ? std::abs(match->weight - coeff * l.weight) /
                          std::max(1.0, std::abs(match->weight))
                    : 1.0;
          maxdev = std::max(maxdev, dev);
          cf.str.push_back(f.name());
          cm.num.push_back(m);
          cn.num.push_back(n);
          cw.num.push_back(l.omega);
          cc.num.push_back(coeff);
          cd.num.push_back(dev);
          devs.push_back(dev);
        }
      }
  for (size_t i = 0; i < devs.size(); ++i) cmax.num.push_back(maxdev);
  if (maxdev > ctx.tols.identity)
    throw Error("NumericalFailure", "fluctuation-dissipation deviation " +
                                        std::to_string(maxdev));
  return t;
}

inline std::vector<ResultTable> volterra_check(const ExperimentContext& ctx) {
  const Json opt = task_options(ctx, "volterra-check");
  std::vector<int> orders{1, 2};
  if (opt.contains("orders")) {
    orders.clear();
    for (const auto& o : opt["orders"])
      orders.push_back(o.is_string() ? std::stoi(o.get<std::string>())
                                     : o.get<int>());
  }
  std::vector<double> amps{0.02, 0.04, 0.08};
  if (opt.contains("amplitudes")) {
    amps.clear();
    for (const auto& a : opt["amplitudes"])
      amps.push_back(a.is_string() ? std::stod(a.get<std::string>())
                                   : a.get<double>());
  }
  const int grid = opt.value("steps", 1600);
  const int stride = opt.value("stride", 40);
  const int channel = opt.value("channel", 0);
  ThermalState st = gibbs(ctx.spec, ctx.beta, ctx.mu);
  VolterraModel vm =
      volterra_model(ctx.spec, st,
                     *std::max_element(orders.begin(), orders.end()));

  ResultTable errors;
  errors.name = "volterra-errors";
  errors.metadata = ctx.metadata();
  auto& eo = errors.add_column("order");
  auto& ea = errors.add_column("amplitude");
  auto& ee = errors.add_column("max_error");
  ResultTable summary;
  summary.name = "volterra-exponents";
  summary.metadata = ctx.metadata();
  auto& so = summary.add_column("order");
  auto& se = summary.add_column("fitted_exponent");

  for (int order : orders) {
    std::vector<double> lx, ly;
    for (double amp : amps) {
      DriveProtocol p = ctx.protocol;
      p.channels[static_cast<size_t>(channel)] = DriveChannel::gaussian(
          ctx.spec.j_init[channel], amp, 0.5 * (p.t_i + p.t_f),
          0.1 * (p.t_f - p.t_i));
      PropagateOptions popt;
      popt.check_convergence = false;
      Trajectory tr = propagate(ctx.spec, st, p, grid, popt);
      RealMatrix pred = volterra_predict(vm, p, tr.times, order, stride);
      double err = 0.0;
      for (Eigen::Index i = 0; i < tr.times.size(); ++i) {
        if (std::isnan(pred(i, channel))) continue;
        err = std::max(err, std::abs(pred(i, channel) - tr.Phi(i, channel)));
      }
      eo.num.push_back(order);
      ea.num.push_back(amp);
      ee.num.push_back(err);
      lx.push_back(std::log(amp));
      ly.push_back(std::log(err));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
      sx += lx[i];
      sy += ly[i];
      sxx += lx[i] * lx[i];
      sxy += lx[i] * ly[i];
    }
    const double nn = static_cast<double>(lx.size());
    so.num.push_back(order);
    se.num.push_back((nn * sxy - sx * sy) / (nn * sxx - sx * sx));
  }
  return {errors, summary};
}

inline std::vector<ResultTable> work_stats(const ExperimentContext& ctx) {
  ThermalState st = gibbs(ctx.spec, ctx.beta, ctx.mu);
  PropagateOptions popt;
  popt.check_convergence = false;
  Trajectory tr = propagate(ctx.spec, st, ctx.protocol, ctx.steps, popt);
  WorkDistribution dist = work_distribution(ctx.spec, st, ctx.protocol, tr.U_final);

  ResultTable td;
  td.name = "work-distribution";
  td.metadata = ctx.metadata();
  auto& cw = td.add_column("W");
  auto& cp = td.add_column("p");
  for (const auto& o : dist.outcomes) {
    cw.num.push_back(o.W);
    cp.num.push_back(o.p);
  }

  ResultTable ts;
  ts.name = "work-summary";
  ts.metadata = ctx.metadata();
  auto& ck = ts.add_column("quantity");
  ck.str = {};
  auto& cv = ts.add_column("value");
  ck.str.push_back("mean_work");
  cv.num.push_back(dist.mean());
  ck.str.push_back("mean_work_power_integral");
  cv.num.push_back(mean_work(tr, ctx.protocol, ctx.spec));
  ck.str.push_back("jarzynski_residual");
  cv.num.push_back(jarzynski_check(dist, st, ctx.spec, ctx.protocol));
  ThermalState stf = gibbs(ctx.spec, ctx.beta, ctx.mu, ctx.protocol.final_values());
  ck.str.push_back("delta_omega");
  cv.num.push_back(-(stf.logZ - st.logZ) / st.beta);
  for (double frac : {0.1, 0.5, 1.0}) {
    ck.str.push_back("Z_W(" + std::to_string(frac) + "*beta)");
    cv.num.push_back(characteristic_zw(dist, frac * st.beta));
  }
  bool crooks_ok = ctx.parity.basis_real;
  if (crooks_ok) {
    try {
      CrooksResult cr = crooks_check(ctx.spec, st, ctx.protocol, ctx.parity, ctx.steps);
      ck.str.push_back("crooks_max_deviation");
      cv.num.push_back(cr.max_deviation);
    } catch (const Error&) {
      // reference state not time-reversal symmetric; skip the ratio row
    }
  }
  return {td, ts};
}

inline std::vector<ResultTable> kk(const ExperimentContext& ctx) {
  const Json opt = task_options(ctx, "kk");
  const std::string source = opt.value("source", "lorentzian");
  const Eigen::Index n = opt.value("points", 4096);
  FrequencyGrid g;
  if (source == "lorentzian") {
    const double gamma = opt.value("gamma", 0.5);
    g = FrequencyGrid::make(20.0 * gamma, n);
    for (Eigen::Index i = 0; i < n; ++i)
      g.values[i] = 1.0 / Complex(-g.omegas[i], -gamma);
  } else if (source == "oscillator") {
    OscillatorResponse osc(opt.value("omega0", 1.0), opt.value("zeta", 0.3));
    g = FrequencyGrid::make(30.0 * osc.omega0, n);
    for (Eigen::Index i = 0; i < n; ++i) g.values[i] = osc.freq(g.omegas[i]);
  } else if (source == "comb") {
    ThermalState st = gibbs(ctx.spec, ctx.beta, ctx.mu);
    LinearResponseKernel k =
        linear_response(st, ctx.spec, opt.value("m", 0), opt.value("n", 0));
    const double eta = opt.value("eta", 0.05 * std::max(1.0, k.rho.span()));
    // 20 line widths beyond the outermost line
    g = broadened_grid(k.rho, k.rho.span() * 0.5 + 40.0 * eta, n, eta);
  } else {
    throw Error("ValidationError", "kk.source must be lorentzian|oscillator|comb");
  }
  FrequencyGrid partner = kramers_kronig(g);
  ResultTable t;
  t.name = "kk";
  t.metadata = ctx.metadata(source);
  auto& cw = t.add_column("omega");
  auto& cre = t.add_column("re");
  auto& cim = t.add_column("im");
  auto& cre2 = t.add_column("re_from_im");
  auto& cim2 = t.add_column("im_from_re");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cw.num.push_back(g.omegas[i]);
    cre.num.push_back(g.values[i].real());
    cim.num.push_back(g.values[i].imag());
    cre2.num.push_back(partner.values[i].real());
    cim2.num.push_back(partner.values[i].imag());
    num += std::norm(partner.values[i].real() - g.values[i].real());
    den += std::norm(g.values[i].real());
  }
  ResultTable s;
  s.name = "kk-summary";
  s.metadata = ctx.metadata(source);
  auto& ck = s.add_column("quantity");
  ck.str = {"rel_l2_re_from_im", "edge_leakage"};
  auto& cv = s.add_column("value");
  cv.num.push_back(std::sqrt(num / den));
  cv.num.push_back(partner.edge_leakage ? 1.0 : 0.0);
  return {t, s};
}

inline std::vector<ResultTable> reference_models(const ExperimentContext& ctx) {
  const Json opt = task_options(ctx, "reference-models");
  RcResponse rc(opt.value("R", 1.0), opt.value("C", 1.0));
  OscillatorResponse osc(opt.value("omega0", 1.0), opt.value("zeta", 0.3));
  const int samples = opt.value("samples", 200);
  ResultTable t;
  t.name = "reference-models";
  t.metadata = ctx.metadata();
  auto& cmodel = t.add_column("model");
  cmodel.str = {};
  auto& cd = t.add_column("domain");
  cd.str = {};
  auto& cx = t.add_column("x");
  auto& cre = t.add_column("re");
  auto& cim = t.add_column("im");
  const double t_max = 8.0 * rc.R * rc.C, w_max = 6.0 / (rc.R * rc.C);
  for (int i = 0; i < samples; ++i) {
    const double tt = t_max * i / (samples - 1);
    cmodel.str.push_back("rc");
    cd.str.push_back("time");
    cx.num.push_back(tt);
    cre.num.push_back(rc.time(tt));
    cim.num.push_back(0.0);
  }
  for (int i = 0; i < samples; ++i) {
    const double w = -w_max + 2 * w_max * i / (samples - 1);
    const Complex v = rc.freq(w);
    cmodel.str.push_back("rc");
    cd.str.push_back("freq");
    cx.num.push_back(w);
    cre.num.push_back(v.real());
    cim.num.push_back(v.imag());
  }
  for (int i = 0; i < samples; ++i) {
    const double tt = 12.0 / osc.omega0 * i / (samples - 1);
    cmodel.str.push_back("oscillator");
    cd.str.push_back("time");
    cx.num.push_back(tt);
    cre.num.push_back(osc.time(tt));
    cim.num.push_back(0.0);
  }
  for (int i = 0; i < samples; ++i) {
    const double w = -4.0 * osc.omega0 + 8.0 * osc.omega0 * i / (samples - 1);
    const Complex v = osc.freq(w);
    cmodel.str.push_back("oscillator");
    cd.str.push_back("freq");
    cx.num.push_back(w);
    cre.num.push_back(v.real());
    cim.num.push_back(v.imag());
  }
  return {t};
}

inline std::vector<ResultTable> fluid_current(const ExperimentContext& ctx) {
  const Json opt = task_options(ctx, "fluid-current");
  FluidParams par(opt.value("sigma", 1.0), opt.value("D", 0.5),
                  opt.value("tau", 0.1));
  const int n_points = opt.value("points", 100);
  std::mt19937_64 gen(ctx.seed);
  std::uniform_real_distribution<double> ur(-2.0, 2.0);
  ResultTable t;
  t.name = "fluid-current";
  t.metadata = ctx.metadata();
  auto& c0 = t.add_column("p0");
  auto& c1 = t.add_column("px");
  auto& c2 = t.add_column("py");
  auto& c3 = t.add_column("pz");
  auto& cg = t.add_column("G00_re");
  auto& cwr = t.add_column("ward_residual");
  // static row first
  {
    Eigen::Vector3d p(0.3, -0.4, 0.5);
    Eigen::Matrix4cd g = fluid_current_response(par, Complex(0, 0), p);
    c0.num.push_back(0.0);
    c1.num.push_back(p[0]);
    c2.num.push_back(p[1]);
    c3.num.push_back(p[2]);
    cg.num.push_back(g(0, 0).real());
    cwr.num.push_back(0.0);
  }
  for (int i = 0; i < n_points; ++i) {
    double p0r = ur(gen);
    if (std::abs(p0r) < 0.05) p0r += 0.2;
    const Complex p0(p0r, 0.0);
    Eigen::Vector3d p(ur(gen), ur(gen), ur(gen));
    Eigen::Matrix4cd g = fluid_current_response(par, p0, p);
    const double scale = g.cwiseAbs().maxCoeff();
    const double res =
        fluid_ward_contraction(g, p0, p).cwiseAbs().maxCoeff() / scale;
    c0.num.push_back(p0r);
    c1.num.push_back(p[0]);
    c2.num.push_back(p[1]);
    c3.num.push_back(p[2]);
    cg.num.push_back(g(0, 0).real());
    cwr.num.push_back(res);
    if (res > ctx.tols.identity)
      throw Error("NumericalFailure", "Ward residual " + std::to_string(res));
  }
  return {t};
}

inline std::vector<ResultTable> run_task(const ExperimentContext& ctx,
                                         const std::string& name) {
  if (name == "static-susc") return {static_susc(ctx)};
  if (name == "spectrum") return {spectrum(ctx)};
  if (name == "respond") return respond(ctx);
  if (name == "fdr-check") return {fdr_check(ctx)};
  if (name == "volterra-check") return volterra_check(ctx);
  if (name == "work-stats") return work_stats(ctx);
  if (name == "kk") return kk(ctx);
  if (name == "reference-models") return reference_models(ctx);
  if (name == "fluid-current") return fluid_current(ctx);
  throw Error("ValidationError", "unknown task '" + name + "'");
}

}  // namespace qrt::tasks
