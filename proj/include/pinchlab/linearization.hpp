#pragma once

// Gauge and linearization operators on the warped reduction
// g = f^2 dx^2 + psi^2 g_S2. Symmetric tensors are stored by coordinate
// components (alpha, beta) of alpha dx^2 + beta g_S2; one-forms by the single
// surviving component W dx.
//
// Sign conventions: delta(T)_i = -g^{jk} nabla_k T_ij and
// delta*(w)_ij = (nabla_i w_j + nabla_j w_i) / 2.

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pinchlab/warped.hpp"

namespace pinchlab::linearization {

using warped::Field;

struct WarpedMetric {
  Field f, psi;

  std::size_t size() const { return f.size(); }
  double dx() const { return warped::kPeriod / static_cast<double>(f.size()); }
  /// Throws DomainError unless both fields are positive, finite and the same length >= 16.
  void validate() const;

  static WarpedMetric of(const warped::WarpedState& s) { return {s.f, s.psi}; }
};

struct VariationField {
  Field alpha, beta;

  /// V = tr_g v.
  Field trace(const WarpedMetric& g) const;
  static VariationField zero(std::size_t n) { return {Field(n, 0.0), Field(n, 0.0)}; }
  static VariationField metric(const WarpedMetric& g);
};

struct OneFormField {
  Field x;
};

/// G(v) = v - (tr_g v) g / 2.
VariationField einstein_op(const VariationField& v, const WarpedMetric& g);

/// Covariant divergence, written in flux form so that it is the exact
/// discrete adjoint of div_adjoint under the inner products below.
OneFormField divergence(const VariationField& t, const WarpedMetric& g);

VariationField div_adjoint(const OneFormField& w, const WarpedMetric& g);

/// L^2 inner products with the volume density f psi^2 dx (the constant area of
/// the unit sphere is dropped).
double inner(const VariationField& a, const VariationField& b, const WarpedMetric& g);
double inner(const OneFormField& a, const OneFormField& b, const WarpedMetric& g);

/// Coordinate components of Rc(g).
VariationField ricci(const WarpedMetric& g);

/// W_l = g_lk g^ij (Gamma[g]^k_ij - Gamma[g0]^k_ij). Exactly zero when g == g0.
OneFormField deturck_w(const WarpedMetric& g, const WarpedMetric& g0);

/// The same vector field through the Einstein operator:
/// W = (f^2 / f0^2) delta_g(G_g(g0)).
OneFormField deturck_w_closed_form(const WarpedMetric& g, const WarpedMetric& g0);

/// d/dt (f, psi) for dg/dt = -2 Rc(g) + L_W g with W = deturck_w(g, g0).
std::pair<Field, Field> modified_ricci_rates(const WarpedMetric& g, const WarpedMetric& g0);

/// [-2 Rc(g + s v) + 2 Rc(g)] / s against Delta_L v + 2 delta*(delta(G(v))).
struct VariationCheck {
  double s = 0.0;
  double discrepancy = 0.0;  // max over the grid, orthonormal components
  VariationField finite_difference;
  VariationField linearized;
};

/// Throws DomainError if g + s v is not positive definite.
VariationCheck variation_of_ricci_check(const WarpedMetric& g, const VariationField& v, double s);

struct ResidualReport {
  double max_gap = 0.0;
  std::vector<std::pair<double, double>> gap_vs_s;
  std::size_t grid = 0;
  double horizon = 0.0;          // requested
  double achieved_horizon = 0.0;
  bool complete = true;          // every integration reached the horizon
  bool one_sided = false;        // a one-sided s-difference was used
};

nlohmann::json to_json(const ResidualReport& r);

ResidualReport variation_of_ricci_study(const WarpedMetric& g, const VariationField& v,
                                        const std::vector<double>& s_values);

enum class Scheme { Central, Forward };

struct PropositionControls {
  double horizon = 0.1;
  double cfl_safety = 0.5;  // fixed dt = cfl_safety * min CFL bound at t = 0
  Scheme scheme = Scheme::Central;
};

/// Initial metrics g_{s,0} of a one-parameter family.
using MetricFamily = std::function<WarpedMetric(double s)>;

/// Runs the modified Ricci flow from g_{s,0} (and g_{-s,0} for central
/// differences) against the background Ricci flow from g_{0,0}, and compares
/// the difference quotient with the Lichnerowicz evolution of
/// v(0) = d/ds g_{s,0}. The gap is sup_t max_x |v_fd - v| / max |v(0)|.
ResidualReport proposition_check(const MetricFamily& family, const std::vector<double>& s_values,
                                 const PropositionControls& controls);

/// One RK4 step of the pair (g, g0) where g follows the modified flow with
/// background g0 and g0 follows plain Ricci flow. Exposed for tests.
std::pair<WarpedMetric, WarpedMetric> modified_pair_step(const WarpedMetric& g,
                                                         const WarpedMetric& g0, double dt);

}  // namespace pinchlab::linearization
