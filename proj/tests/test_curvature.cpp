#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pinchlab/certificate.hpp"
#include "pinchlab/curvature.hpp"
#include "pinchlab/errors.hpp"
#include "random_tensors.hpp"

using namespace pinchlab;
using pinchlab::testing::random_metric;
using pinchlab::testing::random_rotation;
using pinchlab::testing::random_sym;

namespace {

const SymTensor3 kId = SymTensor3::identity();
const SymTensor3 kSphereRc = 2.0 * SymTensor3::identity();    // unit round S^3
const SymTensor3 kCylinderRc = SymTensor3::diagonal(0, 1, 1);  // R x unit S^2

double rel_err(const SymTensor3& a, const SymTensor3& b) {
  return (a - b).max_abs() / std::max(b.max_abs(), 1e-300);
}

}  // namespace

TEST_CASE("riemann_from_ricci: flat metric gives zero curvature") {
  const Riemann3 riem = riemann_from_ricci(SymTensor3::zero(), kId);
  CHECK(riem.max_abs() == 0.0);
}

TEST_CASE("riemann_from_ricci: unit round sphere has all sectional curvatures 1") {
  const Riemann3 riem = riemann_from_ricci(kSphereRc, kId);
  CHECK(riem(0, 1, 1, 0) == doctest::Approx(1.0));
  CHECK(riem(0, 2, 2, 0) == doctest::Approx(1.0));
  CHECK(riem(1, 2, 2, 1) == doctest::Approx(1.0));
  CHECK(riem(0, 1, 0, 1) == doctest::Approx(-1.0));
  CHECK(riem(0, 1, 2, 0) == doctest::Approx(0.0));
}

TEST_CASE("riemann_from_ricci: unit cylinder matches the product metric") {
  // R x S^2: only the sphere plane is curved.
  const Riemann3 riem = riemann_from_ricci(kCylinderRc, kId);
  CHECK(riem(1, 2, 2, 1) == doctest::Approx(1.0));
  CHECK(riem(0, 1, 1, 0) == doctest::Approx(0.0));
  CHECK(riem(0, 2, 2, 0) == doctest::Approx(0.0));
}

TEST_CASE("riemann_from_ricci: curvature symmetries") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const SymTensor3 g = random_metric(rng);
    const Riemann3 riem = riemann_from_ricci(random_sym(rng), g);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 3; ++k)
          for (std::size_t l = 0; l < 3; ++l) {
            CHECK(riem(i, j, k, l) == doctest::Approx(-riem(j, i, k, l)));
            CHECK(riem(i, j, k, l) == doctest::Approx(-riem(i, j, l, k)));
            CHECK(riem(i, j, k, l) == doctest::Approx(riem(k, l, i, j)));
          }
  }
}

TEST_CASE("riemann_from_ricci: contraction recovers Ricci") {
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const SymTensor3 g = random_metric(rng);
    const SymTensor3 rc = random_sym(rng, 3.0);
    worst = std::max(worst, rel_err(ricci_contraction(riemann_from_ricci(rc, g), g), rc));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("riemann_from_ricci: indefinite metric is a domain error") {
  CHECK_THROWS_AS(riemann_from_ricci(kSphereRc, SymTensor3::diagonal(1, -1, 1)), DomainError);
  CHECK_THROWS_AS(riemann_from_ricci(kSphereRc, SymTensor3::zero()), DomainError);
}

TEST_CASE("lichnerowicz_curvature_part: vanishes on the metric") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const SymTensor3 g = random_metric(rng);
    const SymTensor3 rc = random_sym(rng, 2.0);
    const Riemann3 riem = riemann_from_ricci(rc, g);
    CHECK(lichnerowicz_curvature_part(g, rc, riem, g).max_abs() < 1e-12 * (1.0 + rc.max_abs()));
  }
  const Riemann3 sphere = riemann_from_ricci(kSphereRc, kId);
  CHECK(lichnerowicz_curvature_part(kSphereRc, kSphereRc, sphere, kId).max_abs() < 1e-15);
}

TEST_CASE("lichnerowicz_curvature_part: flat direction of the cylinder is uncoupled") {
  const Riemann3 riem = riemann_from_ricci(kCylinderRc, kId);
  const SymTensor3 out =
      lichnerowicz_curvature_part(SymTensor3::diagonal(1, 0, 0), kCylinderRc, riem, kId);
  CHECK(out.max_abs() < 1e-15);
}

TEST_CASE("lichnerowicz_curvature_part: linear in h") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const SymTensor3 g = random_metric(rng);
    const SymTensor3 rc = random_sym(rng, 2.0);
    const Riemann3 riem = riemann_from_ricci(rc, g);
    const SymTensor3 h1 = random_sym(rng), h2 = random_sym(rng);
    const double a = u(rng);
    const SymTensor3 lhs = lichnerowicz_curvature_part(h1 + a * h2, rc, riem, g);
    const SymTensor3 rhs = lichnerowicz_curvature_part(h1, rc, riem, g) +
                           a * lichnerowicz_curvature_part(h2, rc, riem, g);
    const double scale =
        std::max({lhs.max_abs(), rhs.max_abs(), rc.max_abs() * (h1.max_abs() + std::abs(a))});
    CHECK((lhs - rhs).max_abs() <= 1e-12 * scale * 10);
  }
}

TEST_CASE("lichnerowicz_curvature_part: inconsistent curvature is rejected") {
  const Riemann3 sphere = riemann_from_ricci(kSphereRc, kId);
  CHECK_THROWS_AS(lichnerowicz_curvature_part(kId, kCylinderRc, sphere, kId), ConsistencyError);
  // A loose tolerance accepts it.
  CHECK_NOTHROW(lichnerowicz_curvature_part(kId, kCylinderRc, sphere, kId, 10.0));
}

TEST_CASE("quartic_form: worked values") {
  CHECK(quartic_form(kSphereRc, kId, kId) == doctest::Approx(0.0));
  CHECK(quartic_form(kSphereRc, SymTensor3::zero(), kId) == 0.0);
  const SymTensor3 off_diag(0, 1, 0, 0, 0, 0);
  CHECK(quartic_form(off_diag, kId, kId) == doctest::Approx(6.0));
}

TEST_CASE("quartic_form: nonnegative on 10^6 random samples") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> mag(-2.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1'000'000; ++trial) {
    const SymTensor3 g = random_metric(rng);
    const SymTensor3 rc = random_sym(rng, std::pow(10.0, mag(rng)));
    const SymTensor3 h = random_sym(rng, std::pow(10.0, mag(rng)));
    const double scale = std::max({std::sqrt(norm_sq_g(rc, g)), std::sqrt(norm_sq_g(h, g)),
                                   std::abs(trace_g(rc, g))});
    if (scale == 0.0) continue;
    worst = std::min(worst, quartic_form(rc, h, g) / std::pow(scale, 4));
  }
  CHECK(worst >= -1e-9);
}

TEST_CASE("quartic_form: invariant under simultaneous rotation") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 10000; ++trial) {
    const SymTensor3 rc = random_sym(rng, 2.0), h = random_sym(rng);
    const Mat3 q = random_rotation(rng);
    const double a = quartic_form(rc, h, kId);
    const double b = quartic_form(conjugate(rc, q), conjugate(h, q), kId);
    const double scale = std::pow(std::max(rc.max_abs(), h.max_abs()), 4);
    CHECK(std::abs(a - b) <= 1e-10 * std::max(std::abs(a), scale));
  }
}

TEST_CASE("quartic_form dominates the diagonal polynomial Q") {
  // For diagonal h, the only dependence on off-diagonal Ricci entries is
  // through |Rc|^2, which only grows.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 100'000; ++trial) {
    const SymTensor3 rc = random_sym(rng, 5.0);
    const SymTensor3 h = SymTensor3::diagonal(u(rng), u(rng), u(rng));
    cert::CertificatePoint<double> p{{rc(0, 0), rc(1, 1), rc(2, 2)}, {h(0, 0), h(1, 1), h(2, 2)}};
    const double q = cert::q_poly(p);
    const double full = quartic_form(rc, h, kId);
    CHECK(full >= q - 1e-9 * std::max(1.0, std::abs(full)));
  }
}

TEST_CASE("pinch_reaction_P: worked values") {
  CHECK(pinch_reaction_P(kSphereRc, kId, kId, 0.0) == doctest::Approx(0.0));
  CHECK(pinch_reaction_P(kSphereRc, SymTensor3::zero(), kId, 3.0) == 0.0);
  CHECK(pinch_reaction_P(kCylinderRc, SymTensor3::diagonal(1, 0, 0), kId, 0.0) ==
        doctest::Approx(-0.25));
}

TEST_CASE("pinch_reaction_P: equals -quartic/R^3 at rho = 0") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 1000; ++trial) {
    const SymTensor3 g = random_metric(rng);
    SymTensor3 rc = random_sym(rng);
    rc += 2.0 * g;  // keep R away from 0
    const double R = trace_g(rc, g);
    if (R <= 0.1) continue;
    const SymTensor3 h = random_sym(rng);
    const double p = pinch_reaction_P(rc, h, g, 0.0);
    const double q = quartic_form(rc, h, g);
    CHECK(p == doctest::Approx(-q / (R * R * R)).epsilon(1e-10));
    CHECK(p <= 1e-12);
  }
}

TEST_CASE("pinch_reaction_P: R + rho must be positive") {
  CHECK_THROWS_AS(pinch_reaction_P(-1.0 * kSphereRc, kId, kId, 1.0), DomainError);
  CHECK_NOTHROW(pinch_reaction_P(-1.0 * kSphereRc, kId, kId, 7.0));
}
