#pragma once

#include "pinchlab/tensor.hpp"

namespace pinchlab {

/// Default relative tolerance for Riemann/Ricci consistency checks.
inline constexpr double kConsistencyTolerance = 1e-8;

/// Reconstructs the full curvature tensor from Ricci in dimension 3, where the
/// Weyl part vanishes:
///
///   R_ijkl = R_il g_jk + R_jk g_il - R_ik g_jl - R_jl g_ik
///            - R/2 (g_il g_jk - g_ik g_jl).
///
/// With this convention R_kijl g^{kl} = R_ij and the sectional curvature of
/// the (i,j) plane in an orthonormal frame is R_ijji.
Riemann3 riemann_from_ricci(const SymTensor3& rc, const SymTensor3& g);

/// R_ij = g^{kl} R_kijl.
SymTensor3 ricci_contraction(const Riemann3& riem, const SymTensor3& g);

/// Zeroth-order part of the Lichnerowicz Laplacian,
/// 2 R_kijl h^kl - R_i^k h_kj - R_j^k h_ki.
/// Throws ConsistencyError when riem does not contract to rc within
/// `tolerance` (relative to the size of rc).
SymTensor3 lichnerowicz_curvature_part(const SymTensor3& h, const SymTensor3& rc,
                                       const Riemann3& riem, const SymTensor3& g,
                                       double tolerance = kConsistencyTolerance);

/// |h|^2 |Rc|^2 - 2 R H (Rc.h) + 2 R (Rc.h^2) + R^2/2 (H^2 - |h|^2),
/// all contractions with respect to g. Nonnegative for every input.
double quartic_form(const SymTensor3& rc, const SymTensor3& h, const SymTensor3& g);

/// Reaction term P in the evolution of |h|^2/(R+rho)^2, split as
/// (R+rho)^-3 { [R-part] + rho [rho-part] }. Throws DomainError if R + rho <= 0.
double pinch_reaction_P(const SymTensor3& rc, const SymTensor3& h, const SymTensor3& g,
                        double rho);

/// The rho-part alone, (R+rho)^-3 [2 (Rc.h) H - 2 Rc.h^2 + R/2 (|h|^2 - H^2)],
/// without the factor rho. Used for the pointwise C rho Phi comparison.
double pinch_reaction_rho_part(const SymTensor3& rc, const SymTensor3& h, const SymTensor3& g,
                               double rho);

}  // namespace pinchlab
