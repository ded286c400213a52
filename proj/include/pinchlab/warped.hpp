#pragma once

// Rotationally symmetric metrics g = f(x)^2 dx^2 + psi(x)^2 g_S2 on S^1 x S^2,
// x periodic with period 2 pi, together with a symmetric tensor
// h = alpha(x) dx^2 + beta(x) g_S2 that shares the symmetry.
//
// Orthonormal components are written u = alpha / f^2 and w = beta / psi^2.
// Derivatives along the unit normal ds = f dx are written with a subscript s.

#include <cmath>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pinchlab/dual.hpp"
#include "pinchlab/errors.hpp"
#include "pinchlab/trace.hpp"

namespace pinchlab::warped {

inline constexpr double kPeriod = 2.0 * std::numbers::pi;

using Field = std::vector<double>;
using Profile = std::function<double(double)>;

struct WarpedState {
  double t = 0.0;
  Field f, psi;      // metric
  Field alpha, beta; // h
  double rho = 0.0;

  std::size_t size() const { return f.size(); }
  double dx() const { return kPeriod / static_cast<double>(f.size()); }
  double x(std::size_t j) const { return dx() * static_cast<double>(j); }

  /// Throws DomainError unless N >= 16 is even, all fields have length N,
  /// f and psi are positive and every value is finite.
  void validate() const;

  static WarpedState from_profiles(std::size_t n, const Profile& f, const Profile& psi,
                                   const Profile& alpha, const Profile& beta, double rho = 0.0);
};

// ---------------------------------------------------------------------------
// Periodic centred stencils.

template <class T>
T d1(const std::vector<T>& q, std::size_t j, double dx) {
  const std::size_t n = q.size();
  return (q[(j + 1) % n] - q[(j + n - 1) % n]) * (0.5 / dx);
}

template <class T>
T d2(const std::vector<T>& q, std::size_t j, double dx) {
  const std::size_t n = q.size();
  return (q[(j + 1) % n] - 2.0 * q[j] + q[(j + n - 1) % n]) * (1.0 / (dx * dx));
}

template <class T>
std::vector<T> d1(const std::vector<T>& q, double dx) {
  std::vector<T> out(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) out[j] = d1(q, j, dx);
  return out;
}

/// Arclength derivatives of a scalar q from its coordinate derivatives.
template <class T>
struct ArcDerivatives {
  T s, ss;
};

template <class T>
ArcDerivatives<T> arc_derivatives(const T& f, const T& fx, const T& qx, const T& qxx) {
  return {qx / f, qxx / (f * f) - fx * qx / (f * f * f)};
}

// ---------------------------------------------------------------------------
// Curvature.

/// Pointwise Ricci eigenvalues (r_s on ds, r_o on the two sphere directions).
template <class T>
struct PointCurvature {
  T psi_s, psi_ss;
  T k;  // psi_s / psi
  T r_s, r_o, R;
};

template <class T>
PointCurvature<T> point_curvature(const T& f, const T& fx, const T& psi, const T& psix,
                                  const T& psixx) {
  if (!(value_of(f) > 0.0) || !(value_of(psi) > 0.0))
    throw DomainError("warped curvature: f and psi must be positive");
  const auto d = arc_derivatives(f, fx, psix, psixx);
  PointCurvature<T> c;
  c.psi_s = d.s;
  c.psi_ss = d.ss;
  c.k = d.s / psi;
  c.r_s = -2.0 * d.ss / psi;
  c.r_o = -1.0 * d.ss / psi + (1.0 - d.s * d.s) / (psi * psi);
  c.R = c.r_s + 2.0 * c.r_o;
  return c;
}

template <class T>
std::vector<PointCurvature<T>> curvature_fields(const std::vector<T>& f, const std::vector<T>& psi,
                                                double dx) {
  std::vector<PointCurvature<T>> out;
  out.reserve(f.size());
  for (std::size_t j = 0; j < f.size(); ++j)
    out.push_back(point_curvature(f[j], d1(f, j, dx), psi[j], d1(psi, j, dx), d2(psi, j, dx)));
  return out;
}

struct FieldDiagnostics {
  Field R, r_s, r_o;
  Field h_norm_sq;  // u^2 + 2 w^2
  Field Phi;        // |h|^2 / (R + rho)^2, zero where R + rho <= 0
  Field Cbound;     // |Rc| / (R + rho)
  Field P;          // reaction term, filled where R + rho > 0
  Field bochner;    // filled by diagnose() only
  Field dR;         // dR/dt - (Delta R + 2|Rc|^2), filled by diagnose() only
};

/// Curvature and pinching quantities. Throws DomainError for invalid states.
FieldDiagnostics curvature_warped(const WarpedState& s);

/// curvature_warped plus the Bochner and scalar-curvature residuals.
/// Throws HypothesisError if R + rho <= 0 somewhere.
FieldDiagnostics diagnose(const WarpedState& s);

// ---------------------------------------------------------------------------
// Evolution.

struct Rates {
  Field f, psi, alpha, beta;
};

/// d/dt (f, psi) under Ricci flow: f_t = -f r_s, psi_t = -psi r_o.
void ricci_flow_rates(const WarpedState& s, const std::vector<PointCurvature<double>>& curv,
                      Field& f_t, Field& psi_t);

/// Coordinate rates (d alpha/dt, d beta/dt) = Lichnerowicz Laplacian of h.
/// Throws ReductionViolation if the curvature part leaves the symmetric class.
std::pair<Field, Field> lichnerowicz_warped(const WarpedState& s);

/// Full right-hand side of the linearized system.
Rates flow_rhs(const WarpedState& s);

/// 0.2 (min f dx)^2 / max(1, max |Rc|).
double cfl_bound(const WarpedState& s);

enum class StepStatus { Accepted, Rejected, Singular };

struct StepResult {
  WarpedState state;
  StepStatus status = StepStatus::Accepted;
};

/// One classical RK4 step. dt above the CFL bound is rejected and the state is
/// returned unchanged; loss of positivity or finiteness yields Singular.
StepResult step(const WarpedState& s, double dt);

/// Pointwise residual of the evolution identity for |h|^2 / (R + rho)^2.
/// Throws HypothesisError if R + rho <= 0 somewhere.
Field bochner_residual(const WarpedState& s);

/// Pointwise dR/dt - Delta R - 2 |Rc|^2.
Field scalar_curvature_residual(const WarpedState& s);

/// h = Rc of the state's own metric.
WarpedState with_h_equal_rc(WarpedState s);

/// sup over the grid of the orthonormal difference between h and Rc divided by max |Rc|.
double rc_tracking_gap(const WarpedState& s);

// ---------------------------------------------------------------------------
// Maximum-principle runs.

struct RunControls {
  double horizon = 0.1;
  double cfl_safety = 1.0;       // dt = cfl_safety * cfl_bound
  double max_dt = 1e-3;
  std::size_t max_steps = 2'000'000;
  double neckpinch_ratio = 1e-3; // stop once min psi < ratio * min psi(0)
  std::size_t sample_every = 1;  // steps between trace rows
  double snapshot_every = 0.0;   // time between snapshots; 0 disables
  double monotone_tolerance = 1e-5;  // allowed growth of Phi per unit time when rho = 0
  double bound_tolerance = 1e-3;     // relative slack in Phi <= Phi(0) exp(4 C rho t)
};

struct MaxPrincipleReport {
  PinchTrace trace;
  bool passed = true;
  std::string failure;
  double worst_growth_rate = 0.0;  // rho = 0: largest d Phi / dt between samples
  double worst_bound_ratio = 0.0;  // rho > 0: max Phi(t) / (Phi(0) exp(4 C rho t))
  std::optional<WarpedState> counterexample;
  std::vector<WarpedState> snapshots;
  WarpedState final_state;
  double max_rc_gap = 0.0;  // sup_t rc_tracking_gap, meaningful when h(0) = Rc(0)
};

/// Integrates the linearized system and checks the pinching bound. Throws
/// HypothesisError when min R(0) + rho <= 0; a violated bound is reported
/// through `passed`, `failure` and `counterexample`.
MaxPrincipleReport run_max_principle(const WarpedState& s0, const RunControls& controls);

/// Columns: x,f,psi,alpha,beta,R,Phi.
inline constexpr const char* kSnapshotCsvHeader = "x,f,psi,alpha,beta,R,Phi";
void write_snapshot_csv(std::ostream& out, const WarpedState& s);

}  // namespace pinchlab::warped
