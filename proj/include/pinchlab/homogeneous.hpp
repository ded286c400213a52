#pragma once

// Linearized Ricci flow on left-invariant diagonal metrics of a unimodular
// three-dimensional Lie group. In a Milnor frame {e_i} with
//
//   [e2, e3] = l1 e1,  [e3, e1] = l2 e2,  [e1, e2] = l3 e3,
//
// the metric g = diag(A, B, C) and a diagonal h = diag(a, b, c) stay diagonal
// under the flow, and the PDE system reduces to six ODEs.

#include <array>
#include <string>
#include <vector>

#include "pinchlab/curvature.hpp"
#include "pinchlab/dual.hpp"
#include "pinchlab/errors.hpp"
#include "pinchlab/ode.hpp"
#include "pinchlab/tensor.hpp"
#include "pinchlab/trace.hpp"

namespace pinchlab::homogeneous {

/// Structure constants of a Milnor frame. The unit round S^3 is SU(2) with
/// lambda = (2, 2, 2) and A = B = C = 1, which gives Rc = 2g.
struct MilnorClass {
  std::string name;
  std::array<double, 3> lambda{};

  static MilnorClass su2() { return {"su2", {2.0, 2.0, 2.0}}; }
  static MilnorClass sl2() { return {"sl2", {2.0, 2.0, -2.0}}; }
  static MilnorClass e2() { return {"e2", {2.0, 2.0, 0.0}}; }
  static MilnorClass sol() { return {"sol", {2.0, -2.0, 0.0}}; }
  static MilnorClass nil() { return {"nil", {2.0, 0.0, 0.0}}; }
  static MilnorClass flat() { return {"flat", {0.0, 0.0, 0.0}}; }
  /// Throws ConfigError for unknown names.
  static MilnorClass by_name(const std::string& name);
};

struct HomogeneousState {
  double t = 0.0;
  std::array<double, 3> metric{1.0, 1.0, 1.0};  // (A, B, C)
  std::array<double, 3> h{};                    // (a, b, c)
  double rho = 0.0;
};

/// Ricci coefficients in the Milnor frame: Rc = diag(frame[0], frame[1], frame[2]).
template <class T>
struct MilnorRicci {
  std::array<T, 3> frame{};
  std::array<T, 3> orthonormal{};  // Rc(f_i, f_i) for the unit frame f_i = e_i / sqrt(g_ii)
  T scalar{};
};

template <class T>
MilnorRicci<T> ricci_milnor(const MilnorClass& cls, const std::array<T, 3>& metric) {
  using std::sqrt;
  for (const auto& m : metric)
    if (!(value_of(m) > 0.0)) throw DomainError("ricci_milnor: metric coefficients must be positive");
  const T vol = sqrt(metric[0] * metric[1] * metric[2]);
  std::array<T, 3> mu;
  for (std::size_t i = 0; i < 3; ++i) mu[i] = cls.lambda[i] * metric[i] / vol;
  const T half = (mu[0] + mu[1] + mu[2]) * 0.5;
  std::array<T, 3> nu;
  for (std::size_t i = 0; i < 3; ++i) nu[i] = half - mu[i];

  MilnorRicci<T> out;
  out.orthonormal = {2.0 * nu[1] * nu[2], 2.0 * nu[0] * nu[2], 2.0 * nu[0] * nu[1]};
  for (std::size_t i = 0; i < 3; ++i) out.frame[i] = metric[i] * out.orthonormal[i];
  out.scalar = out.orthonormal[0] + out.orthonormal[1] + out.orthonormal[2];
  return out;
}

/// c_ijk = <[f_i, f_j], f_k> or a connection table Gamma_ijk = <nabla_{f_i} f_j, f_k>
/// in an orthonormal frame.
using FrameTable = std::array<std::array<std::array<double, 3>, 3>, 3>;

FrameTable orthonormal_structure(const MilnorClass& cls, const std::array<double, 3>& metric);

/// Levi-Civita connection of a left-invariant metric from its orthonormal
/// structure constants (Koszul formula).
FrameTable levi_civita(const FrameTable& structure);

/// Ricci tensor in the orthonormal frame, computed from the connection table
/// and R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z.
/// Independent of the Milnor closed form.
SymTensor3 ricci_from_structure(const FrameTable& structure);

/// Rough Laplacian sum_i (nabla^2_{f_i, f_i} h) of a left-invariant symmetric
/// tensor with orthonormal components h on a unimodular group.
SymTensor3 rough_laplacian(const FrameTable& connection, const SymTensor3& h);

/// delta(T)_i = -sum_k (nabla_k T)_ki in an orthonormal frame.
std::array<double, 3> divergence(const FrameTable& connection, const SymTensor3& t);

/// delta*(w)_ij = (nabla_i w_j + nabla_j w_i) / 2.
SymTensor3 div_adjoint(const FrameTable& connection, const std::array<double, 3>& w);

/// Full Lichnerowicz Laplacian of a left-invariant h given by its Milnor-frame
/// components; result in Milnor-frame components.
SymTensor3 lichnerowicz(const MilnorClass& cls, const std::array<double, 3>& metric,
                        const SymTensor3& h_frame);

/// State with h(0) = Rc(g(0)) in Milnor-frame components.
HomogeneousState with_h_equal_rc(const MilnorClass& cls, const std::array<double, 3>& metric,
                                 double rho = 0.0);

using Derivative = std::array<double, 6>;

/// d/dt (A, B, C, a, b, c). Throws ReductionViolation if the reduced
/// Lichnerowicz operator produces off-diagonal terms.
Derivative flow_rhs(const MilnorClass& cls, const HomogeneousState& s);

/// Pointwise diagnostics of a state.
PinchSample sample(const MilnorClass& cls, const HomogeneousState& s);

struct IntegrateControls {
  double horizon = 0.1;
  ode::Controls ode{};
  /// Stop once R + rho exceeds this multiple of its initial value.
  double blowup_factor = 1e8;
};

/// Adaptive integration of the linearized system. Throws HypothesisError when
/// R(0) + rho <= 0.
PinchTrace integrate(const MilnorClass& cls, const HomogeneousState& s0,
                     const IntegrateControls& controls);

/// Same run, returning the states at every accepted step (for oracle checks).
std::vector<HomogeneousState> integrate_states(const MilnorClass& cls,
                                               const HomogeneousState& s0,
                                               const IntegrateControls& controls);

/// Instantaneous comparison of the variation of -2Rc with the Lichnerowicz
/// Laplacian plus the gauge term 2 delta*(delta(G(v))), Milnor-frame components.
struct GaugeGap {
  SymTensor3 finite_difference;  // [-2Rc(g + s v) + 2Rc(g)] / s
  SymTensor3 lichnerowicz;       // Delta_L v
  SymTensor3 gauge;              // 2 delta*(delta G(v))
  double discrepancy = 0.0;      // max |fd - lichnerowicz - gauge|
};

GaugeGap ricci_variation_gap(const MilnorClass& cls, const std::array<double, 3>& metric,
                             const std::array<double, 3>& v, double s);

/// Integrates Ricci flow from g0 and g0 + s v0 alongside the linearized
/// evolution of v0 and returns sup_t max_i |(g_s - g_0)/s - v| / max|v0|.
double trajectory_gap(const MilnorClass& cls, const std::array<double, 3>& metric0,
                      const std::array<double, 3>& v0, double s, double horizon,
                      const ode::Controls& controls = {});

}  // namespace pinchlab::homogeneous
