#include "pinchlab/warped.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

#include "pinchlab/curvature.hpp"
#include "pinchlab/tensor.hpp"

namespace pinchlab::warped {

void WarpedState::validate() const {
  const std::size_t n = f.size();
  if (n < 16 || n % 2 != 0) throw DomainError("warped state: N must be even and at least 16");
  if (psi.size() != n || alpha.size() != n || beta.size() != n)
    throw DomainError("warped state: field lengths differ");
  for (std::size_t j = 0; j < n; ++j) {
    if (!(f[j] > 0.0) || !(psi[j] > 0.0) || !std::isfinite(f[j]) || !std::isfinite(psi[j]))
      throw DomainError("warped state: f and psi must be positive and finite");
    if (!std::isfinite(alpha[j]) || !std::isfinite(beta[j]))
      throw DomainError("warped state: h is not finite");
  }
  if (!(rho >= 0.0)) throw DomainError("warped state: rho must be nonnegative");
}

WarpedState WarpedState::from_profiles(std::size_t n, const Profile& f, const Profile& psi,
                                       const Profile& alpha, const Profile& beta, double rho) {
  WarpedState s;
  s.rho = rho;
  s.f.resize(n);
  s.psi.resize(n);
  s.alpha.resize(n);
  s.beta.resize(n);
  const double dx = kPeriod / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = dx * static_cast<double>(j);
    s.f[j] = f(x);
    s.psi[j] = psi(x);
    s.alpha[j] = alpha(x);
    s.beta[j] = beta(x);
  }
  s.validate();
  return s;
}

namespace {

struct HComponents {
  Field u, w;
};

HComponents orthonormal_h(const WarpedState& s) {
  HComponents h{Field(s.size()), Field(s.size())};
  for (std::size_t j = 0; j < s.size(); ++j) {
    h.u[j] = s.alpha[j] / (s.f[j] * s.f[j]);
    h.w[j] = s.beta[j] / (s.psi[j] * s.psi[j]);
  }
  return h;
}

// Delta q = q_ss + 2 k q_s for a radial scalar.
double scalar_laplacian(const Field& q, std::size_t j, double dx, double f, double fx, double k) {
  const auto d = arc_derivatives(f, fx, d1(q, j, dx), d2(q, j, dx));
  return d.ss + 2.0 * k * d.s;
}

SymTensor3 curvature_term(double u, double w, double r_s, double r_o) {
  const SymTensor3 id = SymTensor3::identity();
  const SymTensor3 rc = SymTensor3::diagonal(r_s, r_o, r_o);
  return lichnerowicz_curvature_part(SymTensor3::diagonal(u, w, w), rc, riemann_from_ricci(rc, id),
                                     id);
}

double reaction_P(double u, double w, double r_s, double r_o, double rho) {
  const SymTensor3 id = SymTensor3::identity();
  return pinch_reaction_P(SymTensor3::diagonal(r_s, r_o, r_o), SymTensor3::diagonal(u, w, w), id,
                          rho);
}

std::vector<Dual> with_rate(const Field& value, const Field& rate) {
  std::vector<Dual> out(value.size());
  for (std::size_t j = 0; j < value.size(); ++j) out[j] = Dual(value[j], rate[j]);
  return out;
}

}  // namespace

FieldDiagnostics curvature_warped(const WarpedState& s) {
  s.validate();
  const std::size_t n = s.size();
  const auto curv = curvature_fields(s.f, s.psi, s.dx());
  const auto h = orthonormal_h(s);
  FieldDiagnostics d;
  d.R.resize(n);
  d.r_s.resize(n);
  d.r_o.resize(n);
  d.h_norm_sq.resize(n);
  d.Phi.assign(n, 0.0);
  d.Cbound.assign(n, 0.0);
  d.P.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = curv[j];
    d.R[j] = c.R;
    d.r_s[j] = c.r_s;
    d.r_o[j] = c.r_o;
    d.h_norm_sq[j] = h.u[j] * h.u[j] + 2.0 * h.w[j] * h.w[j];
    const double denom = c.R + s.rho;
    if (denom > 0.0) {
      d.Phi[j] = d.h_norm_sq[j] / (denom * denom);
      d.Cbound[j] = std::sqrt(c.r_s * c.r_s + 2.0 * c.r_o * c.r_o) / denom;
      d.P[j] = reaction_P(h.u[j], h.w[j], c.r_s, c.r_o, s.rho);
    }
  }
  return d;
}

void ricci_flow_rates(const WarpedState& s, const std::vector<PointCurvature<double>>& curv,
                      Field& f_t, Field& psi_t) {
  const std::size_t n = s.size();
  f_t.resize(n);
  psi_t.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    f_t[j] = -s.f[j] * curv[j].r_s;
    psi_t[j] = -s.psi[j] * curv[j].r_o;
  }
}

namespace {

std::pair<Field, Field> lichnerowicz_with(const WarpedState& s,
                                          const std::vector<PointCurvature<double>>& curv) {
  const std::size_t n = s.size();
  const double dx = s.dx();
  const auto h = orthonormal_h(s);
  Field a_t(n), b_t(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = curv[j];
    const double fx = d1(s.f, j, dx);
    const double k2 = c.k * c.k;
    const double diff = h.u[j] - h.w[j];
    const double rough_ss = scalar_laplacian(h.u, j, dx, s.f[j], fx, c.k) - 4.0 * k2 * diff;
    const double rough_oo = scalar_laplacian(h.w, j, dx, s.f[j], fx, c.k) + 2.0 * k2 * diff;
    const SymTensor3 curvature = curvature_term(h.u[j], h.w[j], c.r_s, c.r_o);
    const double scale = std::max(1.0, curvature.max_abs());
    if (std::abs(curvature(0, 1)) + std::abs(curvature(0, 2)) + std::abs(curvature(1, 2)) >
            1e-10 * scale ||
        std::abs(curvature(1, 1) - curvature(2, 2)) > 1e-10 * scale)
      throw ReductionViolation("lichnerowicz_warped: curvature part left the symmetric class");
    a_t[j] = s.f[j] * s.f[j] * (rough_ss + curvature(0, 0));
    b_t[j] = s.psi[j] * s.psi[j] * (rough_oo + curvature(1, 1));
  }
  return {std::move(a_t), std::move(b_t)};
}

Rates rates_with(const WarpedState& s, const std::vector<PointCurvature<double>>& curv) {
  Rates r;
  ricci_flow_rates(s, curv, r.f, r.psi);
  auto [a, b] = lichnerowicz_with(s, curv);
  r.alpha = std::move(a);
  r.beta = std::move(b);
  return r;
}

}  // namespace

std::pair<Field, Field> lichnerowicz_warped(const WarpedState& s) {
  s.validate();
  return lichnerowicz_with(s, curvature_fields(s.f, s.psi, s.dx()));
}

Rates flow_rhs(const WarpedState& s) {
  s.validate();
  return rates_with(s, curvature_fields(s.f, s.psi, s.dx()));
}

double cfl_bound(const WarpedState& s) {
  const auto curv = curvature_fields(s.f, s.psi, s.dx());
  double fmin = std::numeric_limits<double>::infinity();
  double rc = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    fmin = std::min(fmin, s.f[j]);
    rc = std::max({rc, std::abs(curv[j].r_s), std::abs(curv[j].r_o)});
  }
  const double h = fmin * s.dx();
  return 0.2 * h * h / std::max(1.0, rc);
}

namespace {

WarpedState advance(const WarpedState& s, const Rates& r, double dt) {
  WarpedState out = s;
  for (std::size_t j = 0; j < s.size(); ++j) {
    out.f[j] += dt * r.f[j];
    out.psi[j] += dt * r.psi[j];
    out.alpha[j] += dt * r.alpha[j];
    out.beta[j] += dt * r.beta[j];
  }
  out.t += dt;
  return out;
}

bool usable(const WarpedState& s) {
  for (std::size_t j = 0; j < s.size(); ++j)
    if (!(s.f[j] > 0.0) || !(s.psi[j] > 0.0) || !std::isfinite(s.f[j]) ||
        !std::isfinite(s.psi[j]) || !std::isfinite(s.alpha[j]) || !std::isfinite(s.beta[j]))
      return false;
  return true;
}

}  // namespace

StepResult step(const WarpedState& s, double dt) {
  s.validate();
  if (dt == 0.0) return {s, StepStatus::Accepted};
  if (!(dt > 0.0) || dt > cfl_bound(s) * (1.0 + 1e-12)) return {s, StepStatus::Rejected};

  try {
    const Rates k1 = flow_rhs(s);
    const WarpedState s2 = advance(s, k1, 0.5 * dt);
    if (!usable(s2)) return {s, StepStatus::Singular};
    const Rates k2 = flow_rhs(s2);
    const WarpedState s3 = advance(s, k2, 0.5 * dt);
    if (!usable(s3)) return {s, StepStatus::Singular};
    const Rates k3 = flow_rhs(s3);
    const WarpedState s4 = advance(s, k3, dt);
    if (!usable(s4)) return {s, StepStatus::Singular};
    const Rates k4 = flow_rhs(s4);

    WarpedState out = s;
    const double w = dt / 6.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      out.f[j] += w * (k1.f[j] + 2.0 * k2.f[j] + 2.0 * k3.f[j] + k4.f[j]);
      out.psi[j] += w * (k1.psi[j] + 2.0 * k2.psi[j] + 2.0 * k3.psi[j] + k4.psi[j]);
      out.alpha[j] += w * (k1.alpha[j] + 2.0 * k2.alpha[j] + 2.0 * k3.alpha[j] + k4.alpha[j]);
      out.beta[j] += w * (k1.beta[j] + 2.0 * k2.beta[j] + 2.0 * k3.beta[j] + k4.beta[j]);
    }
    out.t = s.t + dt;
    if (!usable(out)) return {s, StepStatus::Singular};
    return {std::move(out), StepStatus::Accepted};
  } catch (const DomainError&) {
    return {s, StepStatus::Singular};
  }
}

namespace {

struct Residuals {
  Field bochner, dR;
};

Residuals residuals(const WarpedState& s, const FieldDiagnostics& diag) {
  const std::size_t n = s.size();
  const double dx = s.dx();
  const auto curv = curvature_fields(s.f, s.psi, dx);
  const Rates rates = rates_with(s, curv);

  // Exact directional derivatives of the discrete quantities along the flow.
  const auto fd = with_rate(s.f, rates.f);
  const auto pd = with_rate(s.psi, rates.psi);
  const auto ad = with_rate(s.alpha, rates.alpha);
  const auto bd = with_rate(s.beta, rates.beta);
  const auto curv_d = curvature_fields(fd, pd, dx);

  const auto h = orthonormal_h(s);
  Residuals out{Field(n), Field(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = curv[j];
    const double fx = d1(s.f, j, dx);
    const double denom = c.R + s.rho;

    // dR/dt = Delta R + 2 |Rc|^2
    const double rc_sq = c.r_s * c.r_s + 2.0 * c.r_o * c.r_o;
    out.dR[j] = curv_d[j].R.d - (scalar_laplacian(diag.R, j, dx, s.f[j], fx, c.k) + 2.0 * rc_sq);

    const Dual u = ad[j] / (fd[j] * fd[j]);
    const Dual w = bd[j] / (pd[j] * pd[j]);
    const Dual dn = curv_d[j].R + s.rho;
    const Dual phi = (u * u + 2.0 * w * w) / (dn * dn);

    const auto phi_d = arc_derivatives(s.f[j], fx, d1(diag.Phi, j, dx), d2(diag.Phi, j, dx));
    const double lap_phi = phi_d.ss + 2.0 * c.k * phi_d.s;
    const double R_s = d1(diag.R, j, dx) / s.f[j];
    const double u_s = d1(h.u, j, dx) / s.f[j];
    const double w_s = d1(h.w, j, dx) / s.f[j];
    const double t1 = denom * u_s - R_s * h.u[j];
    const double t2 = denom * w_s - R_s * h.w[j];
    const double t3 = denom * c.k * (h.u[j] - h.w[j]);
    const double grad_sq = t1 * t1 + 2.0 * t2 * t2 + 4.0 * t3 * t3;
    const double d4 = denom * denom * denom * denom;

    out.bochner[j] = phi.d - lap_phi - (2.0 / denom) * R_s * phi_d.s + 2.0 * grad_sq / d4 -
                     4.0 * diag.P[j];
  }
  return out;
}

void require_positive_denominator(const WarpedState& s, const FieldDiagnostics& d) {
  for (std::size_t j = 0; j < s.size(); ++j)
    if (!(d.R[j] + s.rho > 0.0))
      throw HypothesisError("R + rho must be positive on the whole grid");
}

}  // namespace

FieldDiagnostics diagnose(const WarpedState& s) {
  FieldDiagnostics d = curvature_warped(s);
  require_positive_denominator(s, d);
  Residuals r = residuals(s, d);
  d.bochner = std::move(r.bochner);
  d.dR = std::move(r.dR);
  return d;
}

Field bochner_residual(const WarpedState& s) { return diagnose(s).bochner; }

Field scalar_curvature_residual(const WarpedState& s) {
  FieldDiagnostics d = curvature_warped(s);
  return residuals(s, d).dR;
}

WarpedState with_h_equal_rc(WarpedState s) {
  const auto curv = curvature_fields(s.f, s.psi, s.dx());
  for (std::size_t j = 0; j < s.size(); ++j) {
    s.alpha[j] = s.f[j] * s.f[j] * curv[j].r_s;
    s.beta[j] = s.psi[j] * s.psi[j] * curv[j].r_o;
  }
  return s;
}

double rc_tracking_gap(const WarpedState& s) {
  const auto curv = curvature_fields(s.f, s.psi, s.dx());
  const auto h = orthonormal_h(s);
  double gap = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    gap = std::max({gap, std::abs(h.u[j] - curv[j].r_s), std::abs(h.w[j] - curv[j].r_o)});
    scale = std::max({scale, std::abs(curv[j].r_s), std::abs(curv[j].r_o)});
  }
  return gap / scale;
}

namespace {

PinchSample sample_row(const WarpedState& s, const FieldDiagnostics& d) {
  const std::size_t at =
      static_cast<std::size_t>(std::max_element(d.Phi.begin(), d.Phi.end()) - d.Phi.begin());
  PinchSample row;
  row.t = s.t;
  row.A = s.f[at] * s.f[at];
  row.B = row.C = s.psi[at] * s.psi[at];
  row.a = s.alpha[at];
  row.b = row.c = s.beta[at];
  row.R = d.R[at];
  row.Phi = d.Phi[at];
  row.Cbound = *std::max_element(d.Cbound.begin(), d.Cbound.end());
  row.P = d.P[at];
  double dr = 0.0;
  for (double v : d.dR) dr = std::max(dr, std::abs(v));
  row.dR_residual = dr;
  return row;
}

double min_of(const Field& q) { return *std::min_element(q.begin(), q.end()); }

}  // namespace

MaxPrincipleReport run_max_principle(const WarpedState& s0, const RunControls& controls) {
  s0.validate();
  {
    const FieldDiagnostics d = curvature_warped(s0);
    for (std::size_t j = 0; j < s0.size(); ++j)
      if (!(d.R[j] + s0.rho > 0.0))
        throw HypothesisError("run_max_principle: min R(0) + rho must be positive");
  }

  MaxPrincipleReport report;
  report.trace.rho = s0.rho;
  const double psi_min0 = min_of(s0.psi);
  WarpedState s = s0;
  std::size_t steps = 0;
  double next_snapshot = 0.0;

  auto record = [&](bool force) {
    if (controls.snapshot_every > 0.0 && s.t >= next_snapshot - 1e-15) {
      report.snapshots.push_back(s);
      next_snapshot += controls.snapshot_every;
    }
    report.max_rc_gap = std::max(report.max_rc_gap, rc_tracking_gap(s));
    if (force || steps % std::max<std::size_t>(1, controls.sample_every) == 0) {
      FieldDiagnostics d = curvature_warped(s);
      d.dR = residuals(s, d).dR;
      report.trace.rows.push_back(sample_row(s, d));
    }
  };

  record(true);
  const double eps = 1e-12 * std::max(1.0, controls.horizon);
  while (s.t < controls.horizon - eps) {
    if (steps >= controls.max_steps) {
      report.trace.status = RunStatus::SingularityReached;
      break;
    }
    const double dt = std::min({controls.cfl_safety * cfl_bound(s), controls.max_dt,
                                controls.horizon - s.t});
    StepResult res = step(s, dt);
    if (res.status != StepStatus::Accepted) {
      report.trace.status = RunStatus::SingularityReached;
      break;
    }
    s = std::move(res.state);
    ++steps;
    const bool done = s.t >= controls.horizon - eps;
    const bool pinched = min_of(s.psi) < controls.neckpinch_ratio * psi_min0;
    const FieldDiagnostics d = curvature_warped(s);
    bool lost_hypothesis = false;
    for (std::size_t j = 0; j < s.size(); ++j) lost_hypothesis |= !(d.R[j] + s.rho > 0.0);
    if (lost_hypothesis) {
      report.passed = false;
      report.failure = "R + rho became nonpositive at t = " + std::to_string(s.t);
      report.counterexample = s;
      report.trace.status = RunStatus::SingularityReached;
      break;
    }
    record(done || pinched);
    if (pinched) {
      report.trace.status = RunStatus::SingularityReached;
      break;
    }
  }
  if (report.trace.rows.back().t != s.t) record(true);
  report.final_state = s;

  // Check the pinching bound along the recorded samples.
  const auto& rows = report.trace.rows;
  const double phi0 = rows.front().Phi;
  if (s0.rho == 0.0) {
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const double dt = rows[k].t - rows[k - 1].t;
      if (dt <= 0.0) continue;
      const double rate = (rows[k].Phi - rows[k - 1].Phi) / dt;
      report.worst_growth_rate = std::max(report.worst_growth_rate, rate);
      if (rate > controls.monotone_tolerance && report.passed) {
        report.passed = false;
        char buf[160];
        std::snprintf(buf, sizeof buf, "Phi grew at rate %.3e near t = %.6g", rate, rows[k].t);
        report.failure = buf;
      }
    }
  } else {
    const double c = report.trace.sup_cbound();
    for (const auto& row : rows) {
      const double bound = phi0 * std::exp(4.0 * c * s0.rho * row.t);
      const double ratio = bound > 0.0 ? row.Phi / bound : (row.Phi > 0.0 ? INFINITY : 0.0);
      report.worst_bound_ratio = std::max(report.worst_bound_ratio, ratio);
      if (ratio > 1.0 + controls.bound_tolerance && report.passed) {
        report.passed = false;
        char buf[160];
        std::snprintf(buf, sizeof buf, "Phi exceeded Phi(0) exp(4 C rho t) by factor %.6g at t = %.6g",
                      ratio, row.t);
        report.failure = buf;
      }
    }
  }
  if (!report.passed && !report.counterexample) report.counterexample = s;
  return report;
}

void write_snapshot_csv(std::ostream& out, const WarpedState& s) {
  const FieldDiagnostics d = curvature_warped(s);
  out << kSnapshotCsvHeader << '\n';
  char buf[512];
  for (std::size_t j = 0; j < s.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.x(j), s.f[j],
                  s.psi[j], s.alpha[j], s.beta[j], d.R[j], d.Phi[j]);
    out << buf;
  }
}

}  // namespace pinchlab::warped
