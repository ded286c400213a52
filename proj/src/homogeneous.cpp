#include "pinchlab/homogeneous.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pinchlab::homogeneous {

MilnorClass MilnorClass::by_name(const std::string& name) {
  for (const auto& c : {su2(), sl2(), e2(), sol(), nil(), flat()})
    if (c.name == name) return c;
  throw ConfigError("unknown Milnor class '" + name + "'");
}

FrameTable orthonormal_structure(const MilnorClass& cls, const std::array<double, 3>& metric) {
  for (double m : metric)
    if (!(m > 0.0)) throw DomainError("orthonormal_structure: metric coefficients must be positive");
  const double vol = std::sqrt(metric[0] * metric[1] * metric[2]);
  FrameTable c{};
  // [f_j, f_k] = mu_i f_i for (i, j, k) cyclic.
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t j = (i + 1) % 3, k = (i + 2) % 3;
    const double mu = cls.lambda[i] * metric[i] / vol;
    c[j][k][i] = mu;
    c[k][j][i] = -mu;
  }
  return c;
}

FrameTable levi_civita(const FrameTable& c) {
  FrameTable g{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) g[i][j][k] = 0.5 * (c[i][j][k] - c[j][k][i] + c[k][i][j]);
  return g;
}

SymTensor3 ricci_from_structure(const FrameTable& c) {
  const FrameTable gam = levi_civita(c);
  // <R(f_a, f_b) f_c, f_n>
  auto riem = [&](std::size_t a, std::size_t b, std::size_t cc, std::size_t n) {
    double s = 0.0;
    for (std::size_t m = 0; m < 3; ++m)
      s += gam[b][cc][m] * gam[a][m][n] - gam[a][cc][m] * gam[b][m][n] - c[a][b][m] * gam[m][cc][n];
    return s;
  };
  SymTensor3 ric;
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t cc = b; cc < 3; ++cc) {
      double s = 0.0;
      for (std::size_t a = 0; a < 3; ++a) s += riem(a, b, cc, a);
      ric(b, cc) = s;
    }
  return ric;
}

namespace {

using Tensor3 = FrameTable;

// (nabla_i h)_jk for constant orthonormal components.
Tensor3 covariant_derivative(const FrameTable& gam, const SymTensor3& h) {
  Tensor3 d{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) {
        double s = 0.0;
        for (std::size_t m = 0; m < 3; ++m) s -= gam[i][j][m] * h(m, k) + gam[i][k][m] * h(j, m);
        d[i][j][k] = s;
      }
  return d;
}

}  // namespace

SymTensor3 rough_laplacian(const FrameTable& gam, const SymTensor3& h) {
  const Tensor3 dh = covariant_derivative(gam, h);
  SymTensor3 out;
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t k = j; k < 3; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t m = 0; m < 3; ++m)
          s -= gam[i][i][m] * dh[m][j][k] + gam[i][j][m] * dh[i][m][k] + gam[i][k][m] * dh[i][j][m];
      out(j, k) = s;
    }
  return out;
}

std::array<double, 3> divergence(const FrameTable& gam, const SymTensor3& t) {
  const Tensor3 dt = covariant_derivative(gam, t);
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) out[i] -= dt[k][k][i];
  return out;
}

SymTensor3 div_adjoint(const FrameTable& gam, const std::array<double, 3>& w) {
  // (nabla_i w)_j = -Gamma_ijm w_m
  Mat3 dw{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t m = 0; m < 3; ++m) dw[i][j] -= gam[i][j][m] * w[m];
  return SymTensor3::from_matrix(dw);
}

namespace {

SymTensor3 to_orthonormal(const SymTensor3& t, const std::array<double, 3>& metric) {
  SymTensor3 out;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i; j < 3; ++j) out(i, j) = t(i, j) / std::sqrt(metric[i] * metric[j]);
  return out;
}

SymTensor3 to_frame(const SymTensor3& t, const std::array<double, 3>& metric) {
  SymTensor3 out;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i; j < 3; ++j) out(i, j) = t(i, j) * std::sqrt(metric[i] * metric[j]);
  return out;
}

SymTensor3 lichnerowicz_orthonormal(const MilnorClass& cls, const std::array<double, 3>& metric,
                                    const SymTensor3& h_on) {
  const auto ric = ricci_milnor<double>(cls, metric);
  const SymTensor3 rc =
      SymTensor3::diagonal(ric.orthonormal[0], ric.orthonormal[1], ric.orthonormal[2]);
  const SymTensor3 g = SymTensor3::identity();
  const Riemann3 riem = riemann_from_ricci(rc, g);
  const FrameTable gam = levi_civita(orthonormal_structure(cls, metric));
  return rough_laplacian(gam, h_on) + lichnerowicz_curvature_part(h_on, rc, riem, g);
}

}  // namespace

SymTensor3 lichnerowicz(const MilnorClass& cls, const std::array<double, 3>& metric,
                        const SymTensor3& h_frame) {
  return to_frame(lichnerowicz_orthonormal(cls, metric, to_orthonormal(h_frame, metric)), metric);
}

HomogeneousState with_h_equal_rc(const MilnorClass& cls, const std::array<double, 3>& metric,
                                 double rho) {
  HomogeneousState s;
  s.metric = metric;
  s.h = ricci_milnor<double>(cls, metric).frame;
  s.rho = rho;
  return s;
}

Derivative flow_rhs(const MilnorClass& cls, const HomogeneousState& s) {
  const auto ric = ricci_milnor<double>(cls, s.metric);
  const SymTensor3 h = SymTensor3::diagonal(s.h[0], s.h[1], s.h[2]);
  const SymTensor3 lich = lichnerowicz(cls, s.metric, h);

  const double diag_scale = std::max({std::abs(lich(0, 0)), std::abs(lich(1, 1)),
                                      std::abs(lich(2, 2)), 1e-300});
  const double off = std::max({std::abs(lich(0, 1)), std::abs(lich(0, 2)), std::abs(lich(1, 2))});
  if (off > 1e-10 * diag_scale) {
    std::ostringstream msg;
    msg << "flow_rhs: reduced Lichnerowicz operator left the diagonal ansatz (off-diagonal "
        << off << " vs diagonal " << diag_scale << ")";
    throw ReductionViolation(msg.str());
  }
  return {-2.0 * ric.frame[0], -2.0 * ric.frame[1], -2.0 * ric.frame[2],
          lich(0, 0),          lich(1, 1),          lich(2, 2)};
}

PinchSample sample(const MilnorClass& cls, const HomogeneousState& s) {
  const auto ric = ricci_milnor<double>(cls, s.metric);
  PinchSample out;
  out.t = s.t;
  out.A = s.metric[0];
  out.B = s.metric[1];
  out.C = s.metric[2];
  out.a = s.h[0];
  out.b = s.h[1];
  out.c = s.h[2];
  out.R = ric.scalar;

  const double denom = ric.scalar + s.rho;
  double h_sq = 0.0, rc_sq = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double hi = s.h[i] / s.metric[i];
    h_sq += hi * hi;
    rc_sq += ric.orthonormal[i] * ric.orthonormal[i];
  }
  out.Phi = h_sq / (denom * denom);
  out.Cbound = std::sqrt(rc_sq) / denom;

  const SymTensor3 rc =
      SymTensor3::diagonal(ric.orthonormal[0], ric.orthonormal[1], ric.orthonormal[2]);
  const SymTensor3 h_on =
      SymTensor3::diagonal(s.h[0] / s.metric[0], s.h[1] / s.metric[1], s.h[2] / s.metric[2]);
  out.P = denom > 0.0 ? pinch_reaction_P(rc, h_on, SymTensor3::identity(), s.rho) : 0.0;

  // dR/dt along the flow, exactly, via a dual-number directional derivative.
  std::array<Dual, 3> g_dual;
  for (std::size_t i = 0; i < 3; ++i) g_dual[i] = Dual(s.metric[i], -2.0 * ric.frame[i]);
  const double dR_dt = ricci_milnor<Dual>(cls, g_dual).scalar.d;
  const double expected = 2.0 * rc_sq;
  const double scale = std::max(std::abs(dR_dt), std::abs(expected));
  out.dR_residual = scale > 0.0 ? std::abs(dR_dt - expected) / scale : 0.0;
  return out;
}

namespace {

HomogeneousState unpack(const ode::State<6>& y, double t, double rho) {
  HomogeneousState s;
  s.t = t;
  s.metric = {y[0], y[1], y[2]};
  s.h = {y[3], y[4], y[5]};
  s.rho = rho;
  return s;
}

template <class Visit>
RunStatus run(const MilnorClass& cls, const HomogeneousState& s0, const IntegrateControls& ctl,
              Visit&& visit) {
  const auto ric0 = ricci_milnor<double>(cls, s0.metric);
  const double initial = ric0.scalar + s0.rho;
  if (!(initial > 0.0)) {
    std::ostringstream msg;
    msg << "hypothesis R_min(0) > -rho fails: R(0) = " << ric0.scalar << ", rho = " << s0.rho;
    throw HypothesisError(msg.str());
  }

  ode::State<6> y{s0.metric[0], s0.metric[1], s0.metric[2], s0.h[0], s0.h[1], s0.h[2]};
  double t = s0.t;
  bool blew_up = false;
  auto rhs = [&](double tt, const ode::State<6>& yy) { return flow_rhs(cls, unpack(yy, tt, s0.rho)); };
  auto observe = [&](double tt, const ode::State<6>& yy) {
    const HomogeneousState s = unpack(yy, tt, s0.rho);
    visit(s);
    const double scale = ricci_milnor<double>(cls, s.metric).scalar + s.rho;
    if (scale > ctl.blowup_factor * initial) {
      blew_up = true;
      return false;
    }
    return true;
  };
  const ode::Stop stop = ode::dopri5<6>(rhs, t, y, s0.t + ctl.horizon, ctl.ode, observe);
  if (blew_up || stop != ode::Stop::Horizon) return RunStatus::SingularityReached;
  return RunStatus::Completed;
}

}  // namespace

PinchTrace integrate(const MilnorClass& cls, const HomogeneousState& s0,
                     const IntegrateControls& controls) {
  PinchTrace trace;
  trace.rho = s0.rho;
  trace.status = run(cls, s0, controls,
                     [&](const HomogeneousState& s) { trace.rows.push_back(sample(cls, s)); });
  return trace;
}

std::vector<HomogeneousState> integrate_states(const MilnorClass& cls,
                                               const HomogeneousState& s0,
                                               const IntegrateControls& controls) {
  std::vector<HomogeneousState> states;
  run(cls, s0, controls, [&](const HomogeneousState& s) { states.push_back(s); });
  return states;
}

GaugeGap ricci_variation_gap(const MilnorClass& cls, const std::array<double, 3>& metric,
                             const std::array<double, 3>& v, double s) {
  std::array<double, 3> perturbed;
  for (std::size_t i = 0; i < 3; ++i) perturbed[i] = metric[i] + s * v[i];
  const auto r0 = ricci_milnor<double>(cls, metric);
  const auto r1 = ricci_milnor<double>(cls, perturbed);

  GaugeGap gap;
  gap.finite_difference = SymTensor3::diagonal(-2.0 * (r1.frame[0] - r0.frame[0]) / s,
                                               -2.0 * (r1.frame[1] - r0.frame[1]) / s,
                                               -2.0 * (r1.frame[2] - r0.frame[2]) / s);
  const SymTensor3 v_frame = SymTensor3::diagonal(v[0], v[1], v[2]);
  gap.lichnerowicz = lichnerowicz(cls, metric, v_frame);

  // Einstein operator in the orthonormal frame: G(v) = v - tr(v)/2 g.
  const SymTensor3 v_on = to_orthonormal(v_frame, metric);
  const double tr = v_on(0, 0) + v_on(1, 1) + v_on(2, 2);
  const SymTensor3 g_v = v_on - 0.5 * tr * SymTensor3::identity();
  const FrameTable gam = levi_civita(orthonormal_structure(cls, metric));
  gap.gauge = to_frame(2.0 * div_adjoint(gam, divergence(gam, g_v)), metric);

  gap.discrepancy = (gap.finite_difference - gap.lichnerowicz - gap.gauge).max_abs();
  return gap;
}

double trajectory_gap(const MilnorClass& cls, const std::array<double, 3>& metric0,
                      const std::array<double, 3>& v0, double s, double horizon,
                      const ode::Controls& controls) {
  // y = (g_s, g_0, v)
  ode::State<9> y{};
  for (std::size_t i = 0; i < 3; ++i) {
    y[i] = metric0[i] + s * v0[i];
    y[3 + i] = metric0[i];
    y[6 + i] = v0[i];
  }
  auto rhs = [&](double, const ode::State<9>& yy) {
    ode::State<9> d{};
    const auto rs = ricci_milnor<double>(cls, {yy[0], yy[1], yy[2]});
    HomogeneousState base;
    base.metric = {yy[3], yy[4], yy[5]};
    base.h = {yy[6], yy[7], yy[8]};
    const Derivative lin = flow_rhs(cls, base);
    for (std::size_t i = 0; i < 3; ++i) {
      d[i] = -2.0 * rs.frame[i];
      d[3 + i] = lin[i];
      d[6 + i] = lin[3 + i];
    }
    return d;
  };
  const double v_scale = std::max({std::abs(v0[0]), std::abs(v0[1]), std::abs(v0[2])});
  double worst = 0.0;
  auto observe = [&](double, const ode::State<9>& yy) {
    for (std::size_t i = 0; i < 3; ++i)
      worst = std::max(worst, std::abs((yy[i] - yy[3 + i]) / s - yy[6 + i]) / v_scale);
    return true;
  };
  double t = 0.0;
  ode::dopri5<9>(rhs, t, y, horizon, controls, observe);
  return worst;
}

}  // namespace pinchlab::homogeneous
