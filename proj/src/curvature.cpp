#include "pinchlab/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pinchlab/errors.hpp"

namespace pinchlab {

Riemann3 riemann_from_ricci(const SymTensor3& rc, const SymTensor3& g) {
  require_metric(g, "riemann_from_ricci");
  const double R = trace_g(rc, g);
  Riemann3 riem;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l) {
          riem(i, j, k, l) = rc(i, l) * g(j, k) + rc(j, k) * g(i, l) - rc(i, k) * g(j, l) -
                             rc(j, l) * g(i, k) -
                             0.5 * R * (g(i, l) * g(j, k) - g(i, k) * g(j, l));
        }
  return riem;
}

SymTensor3 ricci_contraction(const Riemann3& riem, const SymTensor3& g) {
  const SymTensor3 gi = g.inverse();
  SymTensor3 out;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l) s += gi(k, l) * riem(k, i, j, l);
      out(i, j) = s;
    }
  return out;
}

SymTensor3 lichnerowicz_curvature_part(const SymTensor3& h, const SymTensor3& rc,
                                       const Riemann3& riem, const SymTensor3& g,
                                       double tolerance) {
  require_metric(g, "lichnerowicz_curvature_part");
  const SymTensor3 contracted = ricci_contraction(riem, g);
  const double scale = std::max({rc.max_abs(), riem.max_abs(), 1e-300});
  const double mismatch = (contracted - rc).max_abs();
  if (mismatch > tolerance * scale) {
    std::ostringstream msg;
    msg << "lichnerowicz_curvature_part: curvature tensor contracts to a different Ricci tensor"
        << " (mismatch " << mismatch << ", scale " << scale << ")";
    throw ConsistencyError(msg.str());
  }

  const SymTensor3 gi = g.inverse();
  const Mat3 gim = gi.matrix();
  // h^{kl} = g^{ka} h_ab g^{bl}
  const Mat3 h_up = matmul(gim, matmul(h.matrix(), gim));
  // R_i^k = R_ip g^{pk}
  const Mat3 rc_mixed = matmul(rc.matrix(), gim);
  const Mat3 hm = h.matrix();

  SymTensor3 out;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l) s += 2.0 * riem(k, i, j, l) * h_up[k][l];
      for (std::size_t k = 0; k < 3; ++k) s -= rc_mixed[i][k] * hm[k][j] + rc_mixed[j][k] * hm[k][i];
      out(i, j) = s;
    }
  return out;
}

namespace {

struct Invariants {
  double R, H, h_sq, rc_sq, rc_dot_h, rc_dot_h2;
};

Invariants invariants(const SymTensor3& rc, const SymTensor3& h, const SymTensor3& g) {
  return {trace_g(rc, g),     trace_g(h, g),   norm_sq_g(h, g),
          norm_sq_g(rc, g),   dot_g(rc, h, g), dot_square_g(rc, h, g)};
}

}  // namespace

double quartic_form(const SymTensor3& rc, const SymTensor3& h, const SymTensor3& g) {
  require_metric(g, "quartic_form");
  const auto v = invariants(rc, h, g);
  return v.h_sq * v.rc_sq - 2.0 * v.R * v.H * v.rc_dot_h + 2.0 * v.R * v.rc_dot_h2 +
         0.5 * v.R * v.R * (v.H * v.H - v.h_sq);
}

double pinch_reaction_rho_part(const SymTensor3& rc, const SymTensor3& h, const SymTensor3& g,
                               double rho) {
  require_metric(g, "pinch_reaction_rho_part");
  const auto v = invariants(rc, h, g);
  const double denom = v.R + rho;
  if (!(denom > 0.0)) throw DomainError("pinch_reaction_rho_part: R + rho must be positive");
  const double bracket =
      2.0 * v.rc_dot_h * v.H - 2.0 * v.rc_dot_h2 + 0.5 * v.R * (v.h_sq - v.H * v.H);
  return bracket / (denom * denom * denom);
}

double pinch_reaction_P(const SymTensor3& rc, const SymTensor3& h, const SymTensor3& g,
                        double rho) {
  require_metric(g, "pinch_reaction_P");
  const auto v = invariants(rc, h, g);
  const double denom = v.R + rho;
  if (!(denom > 0.0)) throw DomainError("pinch_reaction_P: R + rho must be positive");
  const double r_part = 2.0 * v.R * v.rc_dot_h * v.H - 2.0 * v.R * v.rc_dot_h2 +
                        0.5 * v.R * v.R * (v.h_sq - v.H * v.H) - v.h_sq * v.rc_sq;
  const double rho_part =
      2.0 * v.rc_dot_h * v.H - 2.0 * v.rc_dot_h2 + 0.5 * v.R * (v.h_sq - v.H * v.H);
  return (r_part + rho * rho_part) / (denom * denom * denom);
}

}  // namespace pinchlab
