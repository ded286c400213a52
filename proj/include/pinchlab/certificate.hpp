#pragma once

// Positivity certificate for the quartic Q(r, h) obtained from the pinching
// quartic after diagonalizing h and discarding the off-diagonal Ricci entries.
// Q is a quadratic form in h whose Hessian depends only on r, so Q >= 0
// reduces to positive semidefiniteness of that 3x3 matrix, which is checked
// through its leading principal minors.
//
// The algebra is templated on the scalar so identities can be checked exactly
// with rationals and sampled in bulk with doubles.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include <json.hpp>

namespace pinchlab::cert {

using Rational = boost::multiprecision::cpp_rational;

template <class T>
using Triple = std::array<T, 3>;

template <class T>
using Matrix3 = std::array<std::array<T, 3>, 3>;

template <class T>
struct CertificatePoint {
  Triple<T> r{};
  Triple<T> h{};
};

template <class T>
struct PowerSums {
  T x{};  // r1 + r2 + r3
  T y{};  // r1^2 + r2^2 + r3^2
  T z{};  // r1^3 + r2^3 + r3^3

  static PowerSums from(const Triple<T>& r) {
    PowerSums p;
    p.x = r[0] + r[1] + r[2];
    p.y = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    p.z = r[0] * r[0] * r[0] + r[1] * r[1] * r[1] + r[2] * r[2] * r[2];
    return p;
  }
};

template <class T>
struct Minors {
  T d1{};
  T d2{};
  T d3{};
};

/// Q as a quadratic form: sum_i Y h_i^2 plus the three mixed terms.
template <class T>
T q_poly(const CertificatePoint<T>& p) {
  const auto& [r1, r2, r3] = p.r;
  const auto& [h1, h2, h3] = p.h;
  const T y = r1 * r1 + r2 * r2 + r3 * r3;
  return y * (h1 * h1 + h2 * h2 + h3 * h3) +
         (-r1 * r1 - r2 * r2 + r3 * r3 - 2 * r1 * r2) * h1 * h2 +
         (r1 * r1 - r2 * r2 - r3 * r3 - 2 * r2 * r3) * h2 * h3 +
         (-r1 * r1 + r2 * r2 - r3 * r3 - 2 * r1 * r3) * h1 * h3;
}

/// Q in its unexpanded form, as products of sums:
/// |h|^2 Y - 2 X H (r.h) + 2 X (r.h^2) + X^2 (h1 h2 + h1 h3 + h2 h3).
template <class T>
T q_poly_four_term(const CertificatePoint<T>& p) {
  const auto& [r1, r2, r3] = p.r;
  const auto& [h1, h2, h3] = p.h;
  const T x = r1 + r2 + r3;
  const T y = r1 * r1 + r2 * r2 + r3 * r3;
  const T hh = h1 * h1 + h2 * h2 + h3 * h3;
  const T H = h1 + h2 + h3;
  const T rh = r1 * h1 + r2 * h2 + r3 * h3;
  const T rh2 = r1 * h1 * h1 + r2 * h2 * h2 + r3 * h3 * h3;
  const T sigma2 = h1 * h2 + h1 * h3 + h2 * h3;
  return hh * y - 2 * x * H * rh + 2 * x * rh2 + x * x * sigma2;
}

/// d^2 Q / dh_i dh_j. Independent of h.
template <class T>
Matrix3<T> q_hessian(const Triple<T>& r) {
  const auto& [r1, r2, r3] = r;
  const T diag = 2 * (r1 * r1 + r2 * r2 + r3 * r3);
  const T m12 = r3 * r3 - r1 * r1 - r2 * r2 - 2 * r1 * r2;
  const T m13 = r2 * r2 - r1 * r1 - r3 * r3 - 2 * r1 * r3;
  const T m23 = r1 * r1 - r2 * r2 - r3 * r3 - 2 * r2 * r3;
  return {{{diag, m12, m13}, {m12, diag, m23}, {m13, m23, diag}}};
}

/// Leading principal minors of m.
template <class T>
Minors<T> minors(const Matrix3<T>& m) {
  Minors<T> out;
  out.d1 = m[0][0];
  out.d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  out.d3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  return out;
}

/// (2X^6 - 6X^4 Y - 24 X^2 Y^2 + 24 Y^3 + 16 X^3 Z) / 3.
template <class T>
T delta3_via_power_sums(const PowerSums<T>& ps) {
  const T x2 = ps.x * ps.x;
  const T x3 = x2 * ps.x;
  const T x4 = x2 * x2;
  const T three_d3 = 2 * x4 * x2 - 6 * x4 * ps.y - 24 * x2 * ps.y * ps.y +
                     24 * ps.y * ps.y * ps.y + 16 * x3 * ps.z;
  return three_d3 / 3;
}

/// Third minor restricted to r = (x, x, 1): 4 (8x^2 + 1)(x - 1)^2.
template <class T>
T delta3_two_equal(const T& x) {
  const T xm1 = x - 1;
  return 4 * (8 * x * x + 1) * xm1 * xm1;
}

/// Q(r, h) = 1/2 h^T H(r) h.
template <class T>
T half_hessian_form(const Matrix3<T>& m, const Triple<T>& h) {
  T s = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) s += m[i][j] * h[i] * h[j];
  return s / 2;
}

// ---------------------------------------------------------------------------
// Two-equal-coordinates reduction on the circle {sum r = X, sum r^2 = Y}.

struct Extremizer {
  Triple<double> r{};
  double z = 0.0;
  bool is_max = false;
  double distance_to_two_equal = 0.0;
};

struct LagrangeReport {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
  std::vector<Extremizer> extremizers;
  double max_distance = 0.0;
  bool passed = false;
};

/// Samples the circle at `samples` angles, refines every bracketed critical
/// point of Z to machine precision, and keeps all extremizers whose Z lies
/// within 1e-9 (relative) of the extreme values. Throws DomainError when
/// Y < X^2/3, since the constraint set is then empty.
LagrangeReport lagrange_reduction_check(double x, double y, std::size_t samples,
                                        double distance_tolerance = 1e-6);

/// Distance from r to the nearest point of the same circle having two equal
/// coordinates.
double distance_to_two_equal(const Triple<double>& r);

// ---------------------------------------------------------------------------
// Bulk sampling.

struct SamplingPlan {
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 42;
  double lo = -10.0;
  double hi = 10.0;
  /// Fraction of samples drawn reciprocal-uniform (heavy tailed) instead of uniform.
  double heavy_tail_fraction = 0.0;
  unsigned workers = 1;
};

struct CertReport {
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  /// Minimum of Q / (|r|^2 |h|^2).
  double min_q = 0.0;
  CertificatePoint<double> argmin_q;
  /// Minima of D_k / |r|^(2k).
  double min_d1 = 0.0;
  double min_d2 = 0.0;
  double min_d3 = 0.0;
  /// Max normalized disagreement between the expanded and unexpanded forms of Q,
  /// and between the determinant and the power-sum formula for D3.
  double identity_max_err = 0.0;
  /// "ok", "violated" or "vacuous".
  std::string status = "vacuous";
};

/// Deterministic given plan.seed, independent of plan.workers.
CertReport certify(const SamplingPlan& plan);

/// Exhaustive search over values^6 in exact rational arithmetic.
struct GridReport {
  Rational min_q;
  /// Grid points (with r != 0 and h != 0) attaining the minimum, in lexicographic order.
  std::vector<CertificatePoint<int>> nontrivial_minimizers;
  std::size_t points = 0;
  bool identity_exact = true;
  bool minors_nonnegative = true;
};

GridReport certify_grid(const std::vector<int>& values);

nlohmann::json to_json(const CertReport& report);
nlohmann::json to_json(const LagrangeReport& report);

}  // namespace pinchlab::cert
