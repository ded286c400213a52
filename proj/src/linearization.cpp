#include "pinchlab/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "pinchlab/errors.hpp"

namespace pinchlab::linearization {

using warped::d1;

namespace {

Field squared_field(const Field& q) {
  Field out(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) out[j] = q[j] * q[j];
  return out;
}

}  // namespace

void WarpedMetric::validate() const {
  if (f.size() < 16 || psi.size() != f.size())
    throw DomainError("warped metric: need two fields of equal length >= 16");
  for (std::size_t j = 0; j < f.size(); ++j)
    if (!(f[j] > 0.0) || !(psi[j] > 0.0) || !std::isfinite(f[j]) || !std::isfinite(psi[j]))
      throw DomainError("warped metric: f and psi must be positive and finite");
}

Field VariationField::trace(const WarpedMetric& g) const {
  Field v(g.size());
  for (std::size_t j = 0; j < g.size(); ++j)
    v[j] = alpha[j] / (g.f[j] * g.f[j]) + 2.0 * beta[j] / (g.psi[j] * g.psi[j]);
  return v;
}

VariationField VariationField::metric(const WarpedMetric& g) {
  VariationField v = zero(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    v.alpha[j] = g.f[j] * g.f[j];
    v.beta[j] = g.psi[j] * g.psi[j];
  }
  return v;
}

VariationField einstein_op(const VariationField& v, const WarpedMetric& g) {
  g.validate();
  const Field tr = v.trace(g);
  VariationField out = v;
  for (std::size_t j = 0; j < g.size(); ++j) {
    out.alpha[j] -= 0.5 * tr[j] * g.f[j] * g.f[j];
    out.beta[j] -= 0.5 * tr[j] * g.psi[j] * g.psi[j];
  }
  return out;
}

OneFormField divergence(const VariationField& t, const WarpedMetric& g) {
  g.validate();
  const std::size_t n = g.size();
  const double dx = g.dx();
  // delta(T)_x = -(1/psi^2) [ (u psi^2)_x - w (psi^2)_x ] with u, w orthonormal.
  Field flux(n), w(n);
  for (std::size_t j = 0; j < n; ++j) {
    flux[j] = t.alpha[j] / (g.f[j] * g.f[j]) * g.psi[j] * g.psi[j];
    w[j] = t.beta[j] / (g.psi[j] * g.psi[j]);
  }
  const Field psi_sq = squared_field(g.psi);
  OneFormField out{Field(n)};
  for (std::size_t j = 0; j < n; ++j)
    out.x[j] = -(d1(flux, j, dx) - w[j] * d1(psi_sq, j, dx)) / psi_sq[j];
  return out;
}

VariationField div_adjoint(const OneFormField& w, const WarpedMetric& g) {
  g.validate();
  const std::size_t n = g.size();
  const double dx = g.dx();
  Field sigma(n);  // unit-normal component of w
  for (std::size_t j = 0; j < n; ++j) sigma[j] = w.x[j] / g.f[j];
  const Field psi_sq = squared_field(g.psi);
  VariationField out = VariationField::zero(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = d1(sigma, j, dx) / g.f[j];
    // psi_x is taken as (psi^2)_x / (2 psi), matching divergence().
    const double ww = sigma[j] * d1(psi_sq, j, dx) / (2.0 * g.f[j] * psi_sq[j]);
    out.alpha[j] = g.f[j] * g.f[j] * u;
    out.beta[j] = g.psi[j] * g.psi[j] * ww;
  }
  return out;
}

double inner(const VariationField& a, const VariationField& b, const WarpedMetric& g) {
  double sum = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double f2 = g.f[j] * g.f[j], p2 = g.psi[j] * g.psi[j];
    const double dens = g.f[j] * p2;
    sum += ((a.alpha[j] / f2) * (b.alpha[j] / f2) + 2.0 * (a.beta[j] / p2) * (b.beta[j] / p2)) * dens;
  }
  return sum * g.dx();
}

double inner(const OneFormField& a, const OneFormField& b, const WarpedMetric& g) {
  double sum = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j)
    sum += a.x[j] * b.x[j] / (g.f[j] * g.f[j]) * g.f[j] * g.psi[j] * g.psi[j];
  return sum * g.dx();
}

VariationField ricci(const WarpedMetric& g) {
  g.validate();
  const auto curv = warped::curvature_fields(g.f, g.psi, g.dx());
  VariationField out = VariationField::zero(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    out.alpha[j] = g.f[j] * g.f[j] * curv[j].r_s;
    out.beta[j] = g.psi[j] * g.psi[j] * curv[j].r_o;
  }
  return out;
}

namespace {

// g^ij Gamma[b]^x_ij for the metric g and a second metric b (same sphere factor).
Field christoffel_trace(const WarpedMetric& g, const WarpedMetric& b) {
  const double dx = g.dx();
  Field out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double gamma_xxx = d1(b.f, j, dx) / b.f[j];
    const double gamma_xoo = -b.psi[j] * d1(b.psi, j, dx) / (b.f[j] * b.f[j]);
    out[j] = gamma_xxx / (g.f[j] * g.f[j]) + 2.0 * gamma_xoo / (g.psi[j] * g.psi[j]);
  }
  return out;
}

}  // namespace

OneFormField deturck_w(const WarpedMetric& g, const WarpedMetric& g0) {
  g.validate();
  g0.validate();
  if (g0.size() != g.size()) throw DomainError("deturck_w: grids differ");
  const Field own = christoffel_trace(g, g);
  const Field bg = christoffel_trace(g, g0);
  OneFormField w{Field(g.size())};
  for (std::size_t j = 0; j < g.size(); ++j) w.x[j] = g.f[j] * g.f[j] * (own[j] - bg[j]);
  return w;
}

OneFormField deturck_w_closed_form(const WarpedMetric& g, const WarpedMetric& g0) {
  g.validate();
  g0.validate();
  if (g0.size() != g.size()) throw DomainError("deturck_w_closed_form: grids differ");
  const OneFormField div = divergence(einstein_op(VariationField::metric(g0), g), g);
  OneFormField w{Field(g.size())};
  for (std::size_t j = 0; j < g.size(); ++j)
    w.x[j] = g.f[j] * g.f[j] / (g0.f[j] * g0.f[j]) * div.x[j];
  return w;
}

std::pair<Field, Field> modified_ricci_rates(const WarpedMetric& g, const WarpedMetric& g0) {
  g.validate();
  const auto curv = warped::curvature_fields(g.f, g.psi, g.dx());
  const VariationField lie = div_adjoint(deturck_w(g, g0), g);  // half of L_W g
  Field f_t(g.size()), psi_t(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double u = lie.alpha[j] / (g.f[j] * g.f[j]);
    const double w = lie.beta[j] / (g.psi[j] * g.psi[j]);
    f_t[j] = -g.f[j] * curv[j].r_s + g.f[j] * u;
    psi_t[j] = -g.psi[j] * curv[j].r_o + g.psi[j] * w;
  }
  return {std::move(f_t), std::move(psi_t)};
}

VariationCheck variation_of_ricci_check(const WarpedMetric& g, const VariationField& v, double s) {
  g.validate();
  if (!(s != 0.0) || !std::isfinite(s)) throw DomainError("variation_of_ricci_check: s must be nonzero");
  const std::size_t n = g.size();
  WarpedMetric gs{Field(n), Field(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const double a = g.f[j] * g.f[j] + s * v.alpha[j];
    const double b = g.psi[j] * g.psi[j] + s * v.beta[j];
    if (!(a > 0.0) || !(b > 0.0))
      throw DomainError("variation_of_ricci_check: g + s v is not positive definite");
    gs.f[j] = std::sqrt(a);
    gs.psi[j] = std::sqrt(b);
  }

  const VariationField rc = ricci(g), rcs = ricci(gs);
  VariationCheck out;
  out.s = s;
  out.finite_difference = VariationField::zero(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.finite_difference.alpha[j] = -2.0 * (rcs.alpha[j] - rc.alpha[j]) / s;
    out.finite_difference.beta[j] = -2.0 * (rcs.beta[j] - rc.beta[j]) / s;
  }

  warped::WarpedState state;
  state.f = g.f;
  state.psi = g.psi;
  state.alpha = v.alpha;
  state.beta = v.beta;
  auto [la, lb] = warped::lichnerowicz_warped(state);
  const VariationField gauge = div_adjoint(divergence(einstein_op(v, g), g), g);
  out.linearized = VariationField::zero(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.linearized.alpha[j] = la[j] + 2.0 * gauge.alpha[j];
    out.linearized.beta[j] = lb[j] + 2.0 * gauge.beta[j];
    const double da = (out.finite_difference.alpha[j] - out.linearized.alpha[j]) / (g.f[j] * g.f[j]);
    const double db = (out.finite_difference.beta[j] - out.linearized.beta[j]) / (g.psi[j] * g.psi[j]);
    out.discrepancy = std::max({out.discrepancy, std::abs(da), std::abs(db)});
  }
  return out;
}

nlohmann::json to_json(const ResidualReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [s, gap] : r.gap_vs_s) pairs.push_back({s, gap});
  return {{"max_gap", r.max_gap},
          {"gap_vs_s", pairs},
          {"grid", r.grid},
          {"horizon", r.horizon},
          {"achieved_horizon", r.achieved_horizon},
          {"complete", r.complete},
          {"one_sided", r.one_sided}};
}

ResidualReport variation_of_ricci_study(const WarpedMetric& g, const VariationField& v,
                                        const std::vector<double>& s_values) {
  ResidualReport r;
  r.grid = g.size();
  for (double s : s_values) {
    const double gap = variation_of_ricci_check(g, v, s).discrepancy;
    r.gap_vs_s.emplace_back(s, gap);
    r.max_gap = std::max(r.max_gap, gap);
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

WarpedMetric advance(const WarpedMetric& g, const Field& f_t, const Field& psi_t, double dt) {
  WarpedMetric out = g;
  for (std::size_t j = 0; j < g.size(); ++j) {
    out.f[j] += dt * f_t[j];
    out.psi[j] += dt * psi_t[j];
  }
  return out;
}

std::pair<Field, Field> plain_rates(const WarpedMetric& g) {
  g.validate();
  warped::WarpedState s;
  s.f = g.f;
  s.psi = g.psi;
  std::pair<Field, Field> out;
  warped::ricci_flow_rates(s, warped::curvature_fields(g.f, g.psi, g.dx()), out.first, out.second);
  return out;
}

}  // namespace

std::pair<WarpedMetric, WarpedMetric> modified_pair_step(const WarpedMetric& g,
                                                         const WarpedMetric& g0, double dt) {
  const auto k1 = modified_ricci_rates(g, g0);
  const auto b1 = plain_rates(g0);
  const WarpedMetric g2 = advance(g, k1.first, k1.second, 0.5 * dt);
  const WarpedMetric h2 = advance(g0, b1.first, b1.second, 0.5 * dt);
  const auto k2 = modified_ricci_rates(g2, h2);
  const auto b2 = plain_rates(h2);
  const WarpedMetric g3 = advance(g, k2.first, k2.second, 0.5 * dt);
  const WarpedMetric h3 = advance(g0, b2.first, b2.second, 0.5 * dt);
  const auto k3 = modified_ricci_rates(g3, h3);
  const auto b3 = plain_rates(h3);
  const WarpedMetric g4 = advance(g, k3.first, k3.second, dt);
  const WarpedMetric h4 = advance(g0, b3.first, b3.second, dt);
  const auto k4 = modified_ricci_rates(g4, h4);
  const auto b4 = plain_rates(h4);

  WarpedMetric out = g, out0 = g0;
  const double w = dt / 6.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    out.f[j] += w * (k1.first[j] + 2.0 * k2.first[j] + 2.0 * k3.first[j] + k4.first[j]);
    out.psi[j] += w * (k1.second[j] + 2.0 * k2.second[j] + 2.0 * k3.second[j] + k4.second[j]);
    out0.f[j] += w * (b1.first[j] + 2.0 * b2.first[j] + 2.0 * b3.first[j] + b4.first[j]);
    out0.psi[j] += w * (b1.second[j] + 2.0 * b2.second[j] + 2.0 * b3.second[j] + b4.second[j]);
  }
  return {std::move(out), std::move(out0)};
}

namespace {

// Coordinate metric components (f^2, psi^2) after every step.
struct Trajectory {
  std::vector<VariationField> states;
  bool complete = true;
};

VariationField squared(const WarpedMetric& g) { return VariationField::metric(g); }

double cfl(const WarpedMetric& g) {
  warped::WarpedState s;
  s.f = g.f;
  s.psi = g.psi;
  return warped::cfl_bound(s);
}

bool healthy(const WarpedMetric& g) {
  try {
    g.validate();
    return true;
  } catch (const DomainError&) {
    return false;
  }
}

Trajectory modified_run(WarpedMetric g, WarpedMetric g0, double dt, std::size_t steps) {
  Trajectory tr;
  tr.states.push_back(squared(g));
  for (std::size_t k = 0; k < steps; ++k) {
    if (!healthy(g) || !healthy(g0) || dt > cfl(g) * (1.0 + 1e-12)) {
      tr.complete = false;
      break;
    }
    try {
      std::tie(g, g0) = modified_pair_step(g, g0, dt);
    } catch (const DomainError&) {
      tr.complete = false;
      break;
    }
    if (!healthy(g)) {
      tr.complete = false;
      break;
    }
    tr.states.push_back(squared(g));
  }
  return tr;
}

struct LinearizedRun {
  std::vector<VariationField> metric;  // g0(t) as (f^2, psi^2)
  std::vector<VariationField> v;       // v(t)
  bool complete = true;
};

LinearizedRun linearized_run(const WarpedMetric& g0, const VariationField& v0, double dt,
                             std::size_t steps) {
  warped::WarpedState s;
  s.f = g0.f;
  s.psi = g0.psi;
  s.alpha = v0.alpha;
  s.beta = v0.beta;
  LinearizedRun run;
  run.metric.push_back(squared(g0));
  run.v.push_back(v0);
  for (std::size_t k = 0; k < steps; ++k) {
    auto res = warped::step(s, dt);
    if (res.status != warped::StepStatus::Accepted) {
      run.complete = false;
      break;
    }
    s = std::move(res.state);
    run.metric.push_back(squared(WarpedMetric::of(s)));
    run.v.push_back({s.alpha, s.beta});
  }
  return run;
}

VariationField family_tangent(const MetricFamily& family) {
  // Fourth-order central difference in s of (f^2, psi^2).
  const double h = 1e-3;
  const auto p1 = squared(family(h)), m1 = squared(family(-h));
  const auto p2 = squared(family(2 * h)), m2 = squared(family(-2 * h));
  VariationField v = VariationField::zero(p1.alpha.size());
  for (std::size_t j = 0; j < v.alpha.size(); ++j) {
    v.alpha[j] = (8.0 * (p1.alpha[j] - m1.alpha[j]) - (p2.alpha[j] - m2.alpha[j])) / (12.0 * h);
    v.beta[j] = (8.0 * (p1.beta[j] - m1.beta[j]) - (p2.beta[j] - m2.beta[j])) / (12.0 * h);
  }
  return v;
}

}  // namespace

ResidualReport proposition_check(const MetricFamily& family, const std::vector<double>& s_values,
                                 const PropositionControls& controls) {
  const WarpedMetric g0 = family(0.0);
  g0.validate();
  const VariationField v0 = family_tangent(family);
  double v_scale = 0.0;
  for (std::size_t j = 0; j < g0.size(); ++j)
    v_scale = std::max({v_scale, std::abs(v0.alpha[j]), std::abs(v0.beta[j])});

  // Central differences need the mirrored member; fall back per s when it is not a metric.
  std::vector<bool> mirrored(s_values.size(), false);
  double bound = cfl(g0);
  for (std::size_t i = 0; i < s_values.size(); ++i) {
    const WarpedMetric gp = family(s_values[i]);
    gp.validate();
    bound = std::min(bound, cfl(gp));
    if (controls.scheme != Scheme::Central) continue;
    try {
      const WarpedMetric gm = family(-s_values[i]);
      gm.validate();
      bound = std::min(bound, cfl(gm));
      mirrored[i] = true;
    } catch (const DomainError&) {
    }
  }
  const double target = controls.cfl_safety * bound;
  const auto steps = static_cast<std::size_t>(std::ceil(controls.horizon / target));
  const double dt = steps > 0 ? controls.horizon / static_cast<double>(steps) : 0.0;

  // All integrations are independent until the comparison.
  auto lin = std::async(std::launch::async, linearized_run, g0, v0, dt, steps);
  std::vector<std::future<Trajectory>> plus, minus(s_values.size());
  for (std::size_t i = 0; i < s_values.size(); ++i) {
    plus.push_back(std::async(std::launch::async, modified_run, family(s_values[i]), g0, dt, steps));
    if (mirrored[i])
      minus[i] = std::async(std::launch::async, modified_run, family(-s_values[i]), g0, dt, steps);
  }
  const LinearizedRun base = lin.get();

  ResidualReport r;
  r.grid = g0.size();
  r.horizon = controls.horizon;
  r.complete = base.complete;
  std::size_t reached = base.v.size();
  for (std::size_t i = 0; i < s_values.size(); ++i) {
    const double s = s_values[i];
    const Trajectory p = plus[i].get();
    r.complete = r.complete && p.complete;
    std::size_t len = std::min(base.v.size(), p.states.size());
    bool use_central = mirrored[i];
    Trajectory m;
    if (use_central) {
      m = minus[i].get();
      if (m.states.size() < len) use_central = false;
    }
    if (controls.scheme == Scheme::Central && !use_central) r.one_sided = true;
    reached = std::min(reached, len);

    double gap = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const auto& gp = p.states[k];
      const auto& lower = use_central ? m.states[k] : base.metric[k];
      const double denom = use_central ? 2.0 * s : s;
      for (std::size_t j = 0; j < g0.size(); ++j) {
        const double fa = (gp.alpha[j] - lower.alpha[j]) / denom;
        const double fb = (gp.beta[j] - lower.beta[j]) / denom;
        gap = std::max({gap, std::abs(fa - base.v[k].alpha[j]), std::abs(fb - base.v[k].beta[j])});
      }
    }
    gap = v_scale > 0.0 ? gap / v_scale : gap;
    r.gap_vs_s.emplace_back(s, gap);
    r.max_gap = std::max(r.max_gap, gap);
  }
  r.achieved_horizon = reached == 0 ? 0.0 : dt * static_cast<double>(reached - 1);
  return r;
}

}  // namespace pinchlab::linearization
