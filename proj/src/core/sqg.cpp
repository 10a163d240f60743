#include "core/sqg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <utility>

#include "core/ul_spaces.hpp"

namespace sflow {

namespace {

// Frozen by `serfati-calibrate sqg-monitors`: maxima of the per-run implied
// constants over the calibration corpus (sqg_monitor_run 0..9), padded 1.3x
// so the disjoint test corpus sits below ratio 1. Measured maxima were
// 1.000000 / 0.015604 / 0.962487.
constexpr double kShortTimeC = 1.3;
constexpr double kGronwallC = 0.020285;
constexpr double kVelocityHsulC = 1.251233;

constexpr double kRunHolder = 1.5;  // C^r exponent tracked by the solver
constexpr double kHaltFloor = 0.1;  // remaining fraction of the window
constexpr double kLpResidualTol = 1e-8;
constexpr double kMonitorRatioTol = 1.05;

void vaxpy(VectorField& y, double a, const VectorField& x) {
  for (int c = 0; c < y.ncomp(); ++c) axpy(y.comp[c], a, x.comp[c]);
}

// far *. (theta u), the rate of change of the far-field velocity part
VectorField far_integrand(const ScalarField& theta, const VectorField& u,
                          const KernelSet& ks) {
  VectorField q(theta.grid(), 2);
  q.comp[0] = pointwise_product(theta, u.comp[0]);
  q.comp[1] = pointwise_product(theta, u.comp[1]);
  return far_conv_contract(q, ks);
}

void recenter(ScalarField& f, double target_mean) {
  const double shift = target_mean - mean(f);
  if (shift == 0.0) return;
  for (double& v : f.mutate()) v += shift;
}

void check_step_count(long steps, double dt, double T) {
  require(steps >= 1 && std::abs(steps * dt - T) <= 1e-9 * std::max(1.0, T),
          "T must be a whole number of steps");
}

VectorField low_pass_vec(const DyadicFamily& fam, const VectorField& v, int n) {
  VectorField out(v.grid(), v.ncomp());
  for (int c = 0; c < v.ncomp(); ++c) out.comp[c] = low_pass(fam, v.comp[c], n);
  return out;
}

}  // namespace

const char* sqg_mode_name(SqgMode m) {
  return m == SqgMode::spectral ? "spectral" : "serfati";
}

VectorField constitutive_spectral(const ScalarField& theta) {
  const Grid& g = theta.grid();
  require(g.dim == 2, "constitutive law is two-dimensional");
  const auto& th = theta.spectrum();
  const double fs = g.freq_step();
  const int half = g.n / 2;
  std::vector<cplx> s0(th.size(), cplx(0.0)), s1(th.size(), cplx(0.0));
  std::int64_t flat = 0;
  for (int t0 = 0; t0 < g.n; ++t0) {
    const int m0 = g.signed_index(t0);
    for (int t1 = 0; t1 < g.n; ++t1, ++flat) {
      const int m1 = g.signed_index(t1);
      if (m0 == half || m1 == half || (m0 == 0 && m1 == 0)) continue;
      const double x0 = fs * m0, x1 = fs * m1;
      const cplx v = cplx(0.0, 1.0) * th[flat] / std::hypot(x0, x1);
      s0[flat] = -x1 * v;
      s1[flat] = x0 * v;
    }
  }
  VectorField u(g, 2);
  u.comp[0] = ScalarField::from_spectrum(g, s0);
  u.comp[1] = ScalarField::from_spectrum(g, s1);
  return u;
}

ScalarField transport_step(const ScalarField& theta, const VectorField& u,
                           double dt) {
  const Grid& g = theta.grid();
  require(g.dim == 2, "transport is two-dimensional");
  require(u.ncomp() == 2 && u.grid() == g, "velocity grid mismatch");
  require(dt > 0.0 && dt <= 0.1, "step size outside the stability contract");
  ScalarField out(g);
  auto& ov = out.mutate();
  const auto& v0 = u.comp[0].values();
  const auto& v1 = u.comp[1].values();
  std::int64_t flat = 0;
  for (int i0 = 0; i0 < g.n; ++i0) {
    const double x0 = g.coord(i0);
    for (int i1 = 0; i1 < g.n; ++i1, ++flat) {
      const double x1 = g.coord(i1);
      double mid[2] = {x0 - 0.5 * dt * v0[flat], x1 - 0.5 * dt * v1[flat]};
      const double m0 = interp_cubic(u.comp[0], mid, false);
      const double m1 = interp_cubic(u.comp[1], mid, false);
      double foot[2] = {x0 - dt * m0, x1 - dt * m1};
      // zero displacement stays on the node (keeps still fields bit-exact)
      if (foot[0] == x0 && foot[1] == x1)
        ov[flat] = theta.values()[flat];
      else
        ov[flat] = interp_cubic(theta, foot, true);
    }
  }
  return out;
}

VectorField serfati_velocity(const SqgState& s, const KernelSet& ks) {
  require(s.theta0 && s.u0, "state carries no initial data");
  require(s.theta.grid() == ks.grid, "state grid does not match the kernels");
  require(std::abs(s.accumulator_time - s.t) <= 0.5 * s.dt + 1e-12,
          "far-field accumulator is stale for this state");
  if (s.t == 0.0) return *s.u0;
  ScalarField dth = s.theta;
  axpy(dth, -1.0, *s.theta0);
  VectorField out = near_conv_perp(dth, ks);
  for (int c = 0; c < 2; ++c) {
    auto& ov = out.comp[c].mutate();
    const auto& b = s.u0->comp[c].values();
    const auto& f = s.far_accumulator.comp[c].values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += b[i] - f[i];
  }
  return out;
}

SqgRunResult run_sqg(const ScalarField& theta0, double T, double dt,
                     SqgMode mode, double lambda, int output_every) {
  const Grid& g = theta0.grid();
  require(g.dim == 2, "sqg runs on 2d grids");
  require(T > 0.0 && dt > 0.0 && dt <= 0.1, "need 0 < dt <= 0.1 and T > 0");
  require(output_every >= 1, "output cadence must be positive");
  const long steps = std::lround(T / dt);
  check_step_count(steps, dt, T);

  const KernelSet ks = build_kernel_set(g, lambda, KernelKind::sqg2d);
  const DyadicFamily fam = make_dyadic_family(g);

  SqgRunResult res;
  res.mode = mode;
  res.lambda = lambda;
  res.dt = dt;
  res.T = T;
  res.output_every = output_every;

  auto th0 = std::make_shared<const ScalarField>(theta0);
  auto u0 = std::make_shared<const VectorField>(constitutive_spectral(theta0));
  res.initial_size = sup_norm(*u0) + holder_norm(fam, theta0, kRunHolder).value;

  ScalarField th = theta0;
  VectorField u = *u0;
  VectorField uprev;  // previous step's velocity, for time centering
  VectorField facc(g, 2);
  const double mean0 = mean(theta0);

  auto push = [&](double t) {
    SqgState s;
    s.t = t;
    s.dt = dt;
    s.theta = th;
    s.u = u;
    s.far_accumulator = facc;
    s.accumulator_time = t;
    s.theta0 = th0;
    s.u0 = u0;
    res.states.push_back(std::move(s));
  };
  push(0.0);

  // Continuation guard. Each anchored leg certifies 90% of the existence
  // window 1 / (C * norms-at-anchor); when a leg is spent the anchor renews
  // on the current norms, so bounded solutions run forever and the halt
  // fires only when a fresh window cannot cover even one step.
  double anchor_t = 0.0;
  double anchor_b = res.initial_size;

  for (long k = 0; k < steps; ++k) {
    if (1.0 - kShortTimeC * ((k + 1) * dt - anchor_t) * anchor_b <=
        kHaltFloor) {
      anchor_t = k * dt;
      anchor_b = sup_norm(u) + holder_norm(fam, th, kRunHolder).value;
      if (1.0 - kShortTimeC * dt * anchor_b <= kHaltFloor) {
        res.halted = true;
        res.halted_at = k * dt;
        if (res.states.back().t < res.halted_at) push(res.halted_at);
        break;
      }
    }
    // transport wants the velocity at midstep; extrapolate from the last
    // two levels (first step settles for the initial field)
    VectorField umid = u;
    if (k > 0) {
      for (int c = 0; c < 2; ++c) {
        auto& mv = umid.comp[c].mutate();
        const auto& pv = uprev.comp[c].values();
        for (std::size_t i = 0; i < mv.size(); ++i)
          mv[i] = 1.5 * mv[i] - 0.5 * pv[i];
      }
    }
    const VectorField rate0 = far_integrand(th, u, ks);
    ScalarField thn = transport_step(th, umid, dt);
    // transport conserves the mean; the foot interpolation drifts it at
    // quadrature order, so put it back
    recenter(thn, mean0);

    VectorField un;
    if (mode == SqgMode::spectral) {
      un = constitutive_spectral(thn);
      const VectorField rate1 = far_integrand(thn, un, ks);
      vaxpy(facc, 0.5 * dt, rate0);
      vaxpy(facc, 0.5 * dt, rate1);
    } else {
      ScalarField dth = thn;
      axpy(dth, -1.0, theta0);
      VectorField base = near_conv_perp(dth, ks);
      vaxpy(base, 1.0, *u0);
      // rectangle predictor for the far integral, then close the trapezoid
      VectorField upred = base;
      vaxpy(upred, -1.0, facc);
      vaxpy(upred, -dt, rate0);
      const VectorField rate1 = far_integrand(thn, upred, ks);
      vaxpy(facc, 0.5 * dt, rate0);
      vaxpy(facc, 0.5 * dt, rate1);
      un = base;
      vaxpy(un, -1.0, facc);
    }
    uprev = std::move(u);
    u = std::move(un);
    th = std::move(thn);
    if ((k + 1) % output_every == 0 || k + 1 == steps) push((k + 1) * dt);
  }
  return res;
}

void IterationLedger::append(const IterationRow& row) {
  require(row.diff >= 0.0, "iterate differences are nonnegative");
  require(rows_.empty() || row.n == rows_.back().n + 1,
          "ledger rows are appended in iterate order");
  rows_.push_back(row);
}

PicardResult picard_iterate(const ScalarField& theta0, const VectorField& u0,
                            int n_max, double T, double dt,
                            const DyadicFamily& family, const KernelSet& ks) {
  const Grid& g = theta0.grid();
  require(g.dim == 2 && g == ks.grid && g == family.grid,
          "grids of data, kernels, and family must agree");
  require(u0.ncomp() == 2 && u0.grid() == g, "u0 must be a 2d velocity");
  require(n_max >= 1, "need at least one iterate");
  require(T > 0.0 && dt > 0.0 && dt <= 0.1, "need 0 < dt <= 0.1 and T > 0");
  const long steps = std::lround(T / dt);
  check_step_count(steps, dt, T);

  const double guard = 50.0 * (1.0 + sup_norm(u0) + sup_norm(theta0));

  PicardResult out;

  // iterate 1: low-passed initial data, constant in time
  std::vector<VectorField> useries(steps + 1);
  ScalarField th_prev_final = low_pass(family, theta0, 2);
  {
    const VectorField u1 = low_pass_vec(family, u0, 2);
    for (long k = 0; k <= steps; ++k) useries[k] = u1;
    IterationRow row;
    row.n = 1;
    row.sup_u = sup_norm(u1);
    row.holder_theta = holder_norm(family, th_prev_final, kRunHolder).value;
    out.ledger.append(row);
    out.theta_final = th_prev_final;
    out.u_final = u1;
  }
  VectorField u_prev_final = out.u_final;

  for (int n = 1; n < n_max; ++n) {
    // iterate n+1: transport under the frozen series of iterate n, then
    // rebuild the velocity through the kernel split
    ScalarField th = low_pass(family, theta0, n + 2);
    const ScalarField th_init = th;
    const VectorField u_init = low_pass_vec(family, u0, n + 2);
    const double mean0 = mean(th_init);
    VectorField facc(g, 2);
    std::vector<VectorField> unext(steps + 1);
    unext[0] = u_init;
    VectorField rate0 = far_integrand(th, useries[0], ks);
    for (long k = 0; k < steps; ++k) {
      VectorField umid = useries[k];
      for (int c = 0; c < 2; ++c) {
        auto& mv = umid.comp[c].mutate();
        const auto& nv = useries[k + 1].comp[c].values();
        for (std::size_t i = 0; i < mv.size(); ++i)
          mv[i] = 0.5 * (mv[i] + nv[i]);
      }
      th = transport_step(th, umid, dt);
      recenter(th, mean0);
      VectorField rate1 = far_integrand(th, useries[k + 1], ks);
      vaxpy(facc, 0.5 * dt, rate0);
      vaxpy(facc, 0.5 * dt, rate1);
      rate0 = std::move(rate1);

      ScalarField dth = th;
      axpy(dth, -1.0, th_init);
      VectorField uk = near_conv_perp(dth, ks);
      vaxpy(uk, 1.0, u_init);
      vaxpy(uk, -1.0, facc);
      require(sup_norm(uk) <= guard, "iterate velocity blew up");
      unext[k + 1] = std::move(uk);
    }

    ScalarField eta = th;
    axpy(eta, -1.0, th_prev_final);
    VectorField vdiff = unext[steps];
    vaxpy(vdiff, -1.0, u_prev_final);
    IterationRow row;
    row.n = n + 1;
    row.sup_u = sup_norm(unext[steps]);
    row.holder_theta = holder_norm(family, th, kRunHolder).value;
    row.diff = sup_norm(vdiff) + holder_norm(family, eta, kRunHolder - 1.0).value;
    out.ledger.append(row);

    th_prev_final = std::move(th);
    u_prev_final = unext[steps];
    useries = std::move(unext);
    out.theta_final = th_prev_final;
    out.u_final = u_prev_final;
  }
  return out;
}

namespace {

// per-state norms shared by the monitor report and the calibration pass
struct MonitorTrace {
  std::vector<double> t, sup_u, holder, ct1, grad_th, hs_th, hs_u, lp_res;
  std::vector<double> integral;  // cumulative trapezoid of ct1 + grad_th
  double b0 = 0.0;
};

MonitorTrace monitor_trace(const SqgRunResult& run, double r, int s,
                           double lambda_window) {
  require(!run.states.empty(), "run has no stored states");
  require(r > 1.0 && r < 4.0, "holder exponent out of range");
  const Grid& g = run.states.front().theta.grid();
  const DyadicFamily fam = make_dyadic_family(g);
  const std::size_t m = run.states.size();
  MonitorTrace tr;
  tr.t.resize(m);
  tr.sup_u.resize(m);
  tr.holder.resize(m);
  tr.ct1.resize(m);
  tr.grad_th.resize(m);
  tr.hs_th.resize(m);
  tr.hs_u.resize(m);
  tr.lp_res.resize(m);
  tr.integral.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const SqgState& st = run.states[i];
    tr.t[i] = st.t;
    tr.sup_u[i] = sup_norm(st.u);
    tr.holder[i] = holder_norm(fam, st.theta, r).value;
    tr.ct1[i] = classical_ck_norm(st.u, 1);
    tr.grad_th[i] = sup_norm(gradient(st.theta));
    tr.hs_th[i] = hs_ul_norm(st.theta, s, lambda_window).value;
    tr.hs_u[i] = hs_ul_norm(st.u.comp[0], s, lambda_window).value +
                 hs_ul_norm(st.u.comp[1], s, lambda_window).value;
    const VectorField w = constitutive_spectral(st.theta);
    double worst = 0.0;
    for (int c = 0; c < 2; ++c) {
      ScalarField d = st.u.comp[c];
      axpy(d, -1.0, w.comp[c]);
      for (int j = -fam.j_max; j <= fam.j_max; ++j)
        worst = std::max(worst, sup_norm(lp_block_dot(fam, d, j)));
    }
    tr.lp_res[i] = worst;
    if (i > 0) {
      const double a = tr.ct1[i - 1] + tr.grad_th[i - 1];
      const double b = tr.ct1[i] + tr.grad_th[i];
      tr.integral[i] =
          tr.integral[i - 1] + 0.5 * (tr.t[i] - tr.t[i - 1]) * (a + b);
    }
  }
  tr.b0 = tr.sup_u[0] + tr.holder[0];
  return tr;
}

void finish_series(MonitorSeries& ser, bool gate) {
  ser.max_ratio = 0.0;
  for (double q : ser.ratio) ser.max_ratio = std::max(ser.max_ratio, q);
  ser.pass = !gate || ser.max_ratio <= kMonitorRatioTol;
}

}  // namespace

MonitorReport estimate_monitors(const SqgRunResult& run, double r, int s,
                                double lambda_window) {
  const MonitorTrace tr = monitor_trace(run, r, s, lambda_window);
  const std::size_t m = tr.t.size();
  const double inf = std::numeric_limits<double>::infinity();

  MonitorReport rep;
  rep.r = r;
  rep.s = s;
  rep.lambda_window = lambda_window;
  rep.mode = run.mode;

  auto ratio_of = [](double lhs, double rhs) {
    if (lhs == 0.0) return 0.0;
    return lhs / rhs;  // rhs = +inf gives 0, rhs = 0 gives +inf
  };

  MonitorSeries st;
  st.name = "short_time";
  st.frozen_constant = kShortTimeC;
  for (std::size_t i = 0; i < m; ++i) {
    const double lhs = tr.sup_u[i] + tr.holder[i];
    const double den = 1.0 - kShortTimeC * tr.t[i] * tr.b0;
    const double rhs = den > 0.0 ? kShortTimeC * tr.b0 / den : inf;
    st.times.push_back(tr.t[i]);
    st.lhs.push_back(lhs);
    st.rhs.push_back(rhs);
    st.ratio.push_back(ratio_of(lhs, rhs));
  }
  finish_series(st, true);

  MonitorSeries gr;
  gr.name = "gronwall";
  gr.frozen_constant = kGronwallC;
  const double base = tr.hs_th[0] * tr.hs_th[0];
  for (std::size_t i = 0; i < m; ++i) {
    const double lhs = tr.hs_th[i] * tr.hs_th[i];
    const double rhs = base * std::exp(kGronwallC * tr.integral[i]);
    gr.times.push_back(tr.t[i]);
    gr.lhs.push_back(lhs);
    gr.rhs.push_back(rhs);
    gr.ratio.push_back(ratio_of(lhs, rhs));
  }
  finish_series(gr, true);

  MonitorSeries ve;
  ve.name = "velocity_hsul";
  ve.frozen_constant = kVelocityHsulC;
  for (std::size_t i = 0; i < m; ++i) {
    const double lhs = tr.hs_u[i];
    const double rhs = kVelocityHsulC * (tr.hs_th[i] + tr.ct1[i]);
    ve.times.push_back(tr.t[i]);
    ve.lhs.push_back(lhs);
    ve.rhs.push_back(rhs);
    ve.ratio.push_back(ratio_of(lhs, rhs));
  }
  finish_series(ve, true);

  MonitorSeries lp;
  lp.name = "lp_residual";
  for (std::size_t i = 0; i < m; ++i) {
    lp.times.push_back(tr.t[i]);
    lp.lhs.push_back(tr.lp_res[i]);
    lp.rhs.push_back(kLpResidualTol);
    lp.ratio.push_back(ratio_of(tr.lp_res[i], kLpResidualTol));
  }
  // the residual tolerance is a spectral-mode contract; split-mode runs
  // report the series for information only
  finish_series(lp, run.mode == SqgMode::spectral);

  rep.series = {std::move(st), std::move(gr), std::move(ve), std::move(lp)};
  rep.pass = true;
  for (const auto& ser : rep.series) rep.pass = rep.pass && ser.pass;
  return rep;
}

std::string MonitorReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "t,name,lhs,rhs,ratio\n";
  for (const auto& ser : series)
    for (std::size_t i = 0; i < ser.times.size(); ++i)
      os << ser.times[i] << ',' << ser.name << ',' << ser.lhs[i] << ','
         << ser.rhs[i] << ',' << ser.ratio[i] << '\n';
  return os.str();
}

MonitorCalibration monitor_calibration(const SqgRunResult& run, double r,
                                       int s, double lambda_window) {
  const MonitorTrace tr = monitor_trace(run, r, s, lambda_window);
  MonitorCalibration c;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    const double lhs = tr.sup_u[i] + tr.holder[i];
    // smallest C with lhs <= C b0 / (1 - C t b0)
    if (tr.b0 > 0.0)
      c.short_time =
          std::max(c.short_time, lhs / (tr.b0 * (1.0 + tr.t[i] * lhs)));
    if (i > 0 && tr.integral[i] > 0.0 && tr.hs_th[0] > 0.0 &&
        tr.hs_th[i] > tr.hs_th[0])
      c.gronwall = std::max(
          c.gronwall, 2.0 * std::log(tr.hs_th[i] / tr.hs_th[0]) / tr.integral[i]);
    const double den = tr.hs_th[i] + tr.ct1[i];
    if (den > 0.0) c.velocity = std::max(c.velocity, tr.hs_u[i] / den);
  }
  return c;
}

SqgRunResult sqg_monitor_run(int index) {
  require(index >= 0 && index < 20, "corpus index out of range");
  const Grid g = make_grid(2, 2.0 * kPi, 128);
  RngStream rng = substream(9200 + index, "sqg monitor corpus");
  // amplitudes cycle so the calibration half (0..9) and the test half
  // (10..19) sample the same size range with disjoint draws
  const double amp = 0.12 + 0.02 * (index % 10);
  const ScalarField th0 = random_band_limited(g, rng, 0.5, 3.0, 1.5, amp);
  return run_sqg(th0, 12.0 / 64.0, 1.0 / 64.0, SqgMode::spectral, 0.75, 3);
}

}  // namespace sflow
