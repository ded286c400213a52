#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "coordinate_oracle.hpp"
#include "pinchlab/homogeneous.hpp"

using namespace pinchlab;
using namespace pinchlab::homogeneous;

namespace {

// Left-invariant metric sum_i (A_i / 4) sigma_i^2 on SU(2) in Euler angles
// (theta, phi, psi); equals the Milnor metric (A, B, C) with lambda = (2,2,2).
testing::MetricFn su2_euler_metric(std::array<double, 3> coeff) {
  return [coeff](const testing::Coord& x) {
    const double th = x[0], ps = x[2];
    // rows: sigma_i = s[i][0] dtheta + s[i][1] dphi + s[i][2] dpsi
    const double s[3][3] = {{std::sin(ps), -std::cos(ps) * std::sin(th), 0.0},
                            {std::cos(ps), std::sin(ps) * std::sin(th), 0.0},
                            {0.0, std::cos(th), 1.0}};
    testing::CoordMatrix g{};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int i = 0; i < 3; ++i) g[a][b] += 0.25 * coeff[i] * s[i][a] * s[i][b];
    return g;
  };
}

// Invariants (trace, second elementary function, determinant) of g^{-1} Ric.
std::array<double, 3> invariants(const testing::CoordMatrix& ric, const testing::CoordMatrix& g) {
  const auto gi = testing::inverse3(g);
  testing::CoordMatrix m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) m[i][j] += gi[i][k] * ric[k][j];
  double c2 = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) c2 += m[i][i] * m[j][j] - m[i][j] * m[j][i];
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  return {m[0][0] + m[1][1] + m[2][2], c2, det};
}

std::array<double, 3> invariants(const std::array<double, 3>& e) {
  return {e[0] + e[1] + e[2], e[0] * e[1] + e[0] * e[2] + e[1] * e[2], e[0] * e[1] * e[2]};
}

HomogeneousState state(std::array<double, 3> metric, std::array<double, 3> h, double rho = 0.0) {
  HomogeneousState s;
  s.metric = metric;
  s.h = h;
  s.rho = rho;
  return s;
}

}  // namespace

TEST_CASE("ricci_milnor: SU(2) calibration gives the unit round sphere") {
  const auto ric = ricci_milnor<double>(MilnorClass::su2(), {1.0, 1.0, 1.0});
  for (double r : ric.frame) CHECK(r == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ric.scalar == doctest::Approx(6.0).epsilon(1e-15));
  const Riemann3 riem =
      riemann_from_ricci(SymTensor3::diagonal(ric.frame[0], ric.frame[1], ric.frame[2]),
                         SymTensor3::identity());
  CHECK(riem(0, 1, 1, 0) == doctest::Approx(1.0));
  CHECK(riem(1, 2, 2, 1) == doctest::Approx(1.0));
  CHECK(riem(0, 2, 2, 0) == doctest::Approx(1.0));
}

TEST_CASE("ricci_milnor: flat class has zero curvature") {
  for (auto metric : {std::array<double, 3>{1, 2, 3}, std::array<double, 3>{0.1, 5, 0.3}}) {
    const auto ric = ricci_milnor<double>(MilnorClass::flat(), metric);
    CHECK(ric.scalar == 0.0);
    for (double r : ric.frame) CHECK(r == 0.0);
  }
}

TEST_CASE("ricci_milnor: non-positive coefficient is a domain error") {
  CHECK_THROWS_AS(ricci_milnor<double>(MilnorClass::su2(), {1.0, 0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(ricci_milnor<double>(MilnorClass::su2(), {1.0, 1.0, -2.0}), DomainError);
}

TEST_CASE("ricci_milnor agrees with the Koszul-formula Ricci on every class") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (const auto& cls : {MilnorClass::su2(), MilnorClass::sl2(), MilnorClass::e2(),
                          MilnorClass::sol(), MilnorClass::nil(), MilnorClass::flat()}) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::array<double, 3> metric{u(rng), u(rng), u(rng)};
      const auto ric = ricci_milnor<double>(cls, metric);
      const SymTensor3 koszul = ricci_from_structure(orthonormal_structure(cls, metric));
      const double scale = std::max(1.0, koszul.max_abs());
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(koszul(i, i) - ric.orthonormal[i]) < 1e-12 * scale);
        for (std::size_t j = i + 1; j < 3; ++j) CHECK(std::abs(koszul(i, j)) < 1e-12 * scale);
      }
    }
  }
}

TEST_CASE("ricci_milnor: Berger spheres match a finite-difference coordinate oracle") {
  const testing::Coord point{1.1, 0.3, 0.7};
  for (const auto& metric : {std::array<double, 3>{1.0, 1.0, 1.0}, std::array<double, 3>{1.0, 1.0, 0.5},
                             std::array<double, 3>{1.0, 1.0, 0.1}, std::array<double, 3>{1.0, 1.0, 2.5},
                             std::array<double, 3>{0.7, 1.3, 0.4}}) {
    const auto g = su2_euler_metric(metric);
    const auto oracle = invariants(testing::ricci_oracle(g, point, 2e-3), g(point));
    const auto expected = invariants(ricci_milnor<double>(MilnorClass::su2(), metric).orthonormal);
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(oracle[i] - expected[i]) < 1e-8 * std::max(1.0, std::abs(expected[i])));
  }
}

TEST_CASE("rough Laplacian and Lichnerowicz Laplacian annihilate the metric") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (const auto& cls : {MilnorClass::su2(), MilnorClass::sl2(), MilnorClass::sol(),
                          MilnorClass::nil()}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::array<double, 3> metric{u(rng), u(rng), u(rng)};
      const FrameTable gam = levi_civita(orthonormal_structure(cls, metric));
      CHECK(rough_laplacian(gam, SymTensor3::identity()).max_abs() < 1e-12);
      const SymTensor3 g = SymTensor3::diagonal(metric[0], metric[1], metric[2]);
      CHECK(lichnerowicz(cls, metric, g).max_abs() < 1e-12 * (1.0 + g.max_abs()));

      // h = g: h is momentarily stationary while g moves.
      const Derivative d = flow_rhs(cls, state(metric, metric));
      CHECK(std::abs(d[3]) + std::abs(d[4]) + std::abs(d[5]) < 1e-11);
    }
  }
  const Derivative d = flow_rhs(MilnorClass::su2(), state({1, 1, 1}, {1, 1, 1}));
  CHECK(d[0] == doctest::Approx(-4.0));
}

TEST_CASE("reduced Lichnerowicz operator preserves diagonal tensors") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0.2, 3.0), v(-2.0, 2.0);
  for (const auto& cls : {MilnorClass::su2(), MilnorClass::sl2(), MilnorClass::e2(),
                          MilnorClass::sol(), MilnorClass::nil()}) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::array<double, 3> metric{u(rng), u(rng), u(rng)};
      const SymTensor3 h = SymTensor3::diagonal(v(rng), v(rng), v(rng));
      const SymTensor3 out = lichnerowicz(cls, metric, h);
      const double scale = std::max(1e-12, out.max_abs());
      CHECK(std::abs(out(0, 1)) < 1e-12 * scale);
      CHECK(std::abs(out(0, 2)) < 1e-12 * scale);
      CHECK(std::abs(out(1, 2)) < 1e-12 * scale);
      CHECK_NOTHROW(flow_rhs(cls, state(metric, {h(0, 0), h(1, 1), h(2, 2)})));
    }
  }
}

TEST_CASE("variation of -2Rc equals Lichnerowicz plus gauge term, to O(s)") {
  // This checks the hand-derived rough Laplacian against the curvature
  // formulas, independently of any time integration.
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> u(0.3, 2.0), v(-1.0, 1.0);
  for (const auto& cls : {MilnorClass::su2(), MilnorClass::sl2(), MilnorClass::sol()}) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::array<double, 3> metric{u(rng), u(rng), u(rng)};
      const std::array<double, 3> dir{v(rng), v(rng), v(rng)};
      const auto g1 = ricci_variation_gap(cls, metric, dir, 1e-3);
      const auto g2 = ricci_variation_gap(cls, metric, dir, 5e-4);
      CHECK(g1.gauge.max_abs() < 1e-12);  // no gauge term on diagonal invariant tensors
      CHECK(g1.discrepancy < 1e-2 * std::max(1.0, g1.lichnerowicz.max_abs()));
      if (g1.discrepancy > 1e-9) CHECK(g1.discrepancy / g2.discrepancy == doctest::Approx(2.0).epsilon(0.05));
    }
  }
}

TEST_CASE("trajectory gap between perturbed flows and the linearized flow is O(s)") {
  const std::array<double, 3> metric{1.0, 1.0, 0.6};
  const std::array<double, 3> v{0.3, -0.2, 0.5};
  const double a = trajectory_gap(MilnorClass::su2(), metric, v, 1e-2, 0.1);
  const double b = trajectory_gap(MilnorClass::su2(), metric, v, 5e-3, 0.1);
  CHECK(a < 0.05);
  CHECK(a / b == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("round sphere: closed-form Ricci flow and Phi = 1/3") {
  IntegrateControls ctl;
  ctl.horizon = 0.2;
  const auto states = integrate_states(MilnorClass::su2(), with_h_equal_rc(MilnorClass::su2(), {1, 1, 1}), ctl);
  REQUIRE(states.size() > 2);
  CHECK(states.back().t == doctest::Approx(0.2));
  for (const auto& s : states) {
    const double expected = 1.0 - 4.0 * s.t;
    for (double m : s.metric) CHECK(std::abs(m - expected) / expected < 1e-6);
  }
  const auto trace = integrate(MilnorClass::su2(), with_h_equal_rc(MilnorClass::su2(), {1, 1, 1}), ctl);
  CHECK(trace.status == RunStatus::Completed);
  for (const auto& row : trace.rows) {
    CHECK(std::abs(row.R - 6.0 / (1.0 - 4.0 * row.t)) / row.R < 1e-6);
    CHECK(std::abs(row.Phi - 1.0 / 3.0) < 1e-8);
    CHECK(row.dR_residual < 1e-8);
  }
}

TEST_CASE("round sphere flow stops at the singular time") {
  IntegrateControls ctl;
  ctl.horizon = 0.3;
  const auto trace = integrate(MilnorClass::su2(), with_h_equal_rc(MilnorClass::su2(), {1, 1, 1}), ctl);
  CHECK(trace.status == RunStatus::SingularityReached);
  CHECK(trace.final_time() < 0.25);
  CHECK(trace.final_time() > 0.249);
}

TEST_CASE("h = Rc is propagated by the linearized flow on Berger spheres") {
  for (double eps : {0.5, 0.2, 1.6}) {
    IntegrateControls ctl;
    ctl.horizon = 0.1;
    const auto states =
        integrate_states(MilnorClass::su2(), with_h_equal_rc(MilnorClass::su2(), {1.0, 1.0, eps}), ctl);
    double worst = 0.0;
    for (const auto& s : states) {
      const auto ric = ricci_milnor<double>(MilnorClass::su2(), s.metric);
      double num = 0.0, den = 0.0;
      for (int i = 0; i < 3; ++i) {
        num = std::max(num, std::abs(s.h[i] - ric.frame[i]) / s.metric[i]);
        den = std::max(den, std::abs(ric.frame[i]) / s.metric[i]);
      }
      worst = std::max(worst, num / den);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("h = Rc tracking converges at high order under step halving") {
  // Fixed steps: tolerances are disabled so every step is accepted.
  auto gap_with_step = [](double step) {
    IntegrateControls ctl;
    ctl.horizon = 0.1;
    ctl.ode.rtol = 1e6;
    ctl.ode.atol = 1e6;
    ctl.ode.initial_step = step;
    ctl.ode.max_step = step;
    const auto states =
        integrate_states(MilnorClass::su2(), with_h_equal_rc(MilnorClass::su2(), {1.0, 1.0, 0.3}), ctl);
    const auto& s = states.back();
    const auto ric = ricci_milnor<double>(MilnorClass::su2(), s.metric);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(s.h[i] - ric.frame[i]) / s.metric[i]);
    return worst;
  };
  const double e1 = gap_with_step(0.01), e2 = gap_with_step(0.005);
  CHECK(e1 > 0.0);
  CHECK(std::log2(e1 / e2) >= 4.0);
}

TEST_CASE("Berger sphere with rho = 0: Phi is nonincreasing") {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> v(-1.0, 1.0);
  for (double eps : {0.3, 0.7, 1.5}) {
    IntegrateControls ctl;
    ctl.horizon = 0.1;
    const auto trace = integrate(MilnorClass::su2(), state({1.0, 1.0, eps}, {v(rng), v(rng), v(rng)}), ctl);
    REQUIRE(trace.rows.size() > 2);
    CHECK(trace.rows.front().R > 0.0);
    CHECK(trace.max_phi_increment() <= 1e-8);
    for (const auto& row : trace.rows) CHECK(row.P <= 1e-12);
  }
}

TEST_CASE("rho > 0: Phi stays under Phi(0) exp(4 C rho t)") {
  std::mt19937_64 rng(36);
  std::uniform_real_distribution<double> v(-1.0, 1.0);
  for (const auto& [cls, metric] :
       {std::pair{MilnorClass::su2(), std::array<double, 3>{1.0, 1.0, 0.2}},
        std::pair{MilnorClass::sl2(), std::array<double, 3>{1.0, 1.0, 1.0}},
        std::pair{MilnorClass::sol(), std::array<double, 3>{1.0, 2.0, 1.0}}}) {
    const double R0 = ricci_milnor<double>(cls, metric).scalar;
    const double rho = std::max(1.0, -R0 + 1.0);
    IntegrateControls ctl;
    ctl.horizon = 0.1;
    const auto trace = integrate(cls, state(metric, {v(rng), v(rng), v(rng)}, rho), ctl);
    const double c = trace.sup_cbound();
    const double phi0 = trace.rows.front().Phi;
    for (const auto& row : trace.rows)
      CHECK(row.Phi <= phi0 * std::exp(4.0 * c * rho * row.t) * (1.0 + 1e-8));
  }
}

TEST_CASE("integrate: hypothesis R(0) > -rho is enforced") {
  IntegrateControls ctl;
  CHECK_THROWS_AS(integrate(MilnorClass::flat(), state({1, 1, 1}, {1, 0, 0}), ctl), HypothesisError);
  const double R0 = ricci_milnor<double>(MilnorClass::sl2(), {1, 1, 1}).scalar;
  REQUIRE(R0 < 0.0);
  CHECK_THROWS_AS(integrate(MilnorClass::sl2(), state({1, 1, 1}, {1, 0, 0}, -R0 * 0.5), ctl),
                  HypothesisError);
  CHECK_NOTHROW(integrate(MilnorClass::sl2(), state({1, 1, 1}, {1, 0, 0}, -R0 + 0.5), ctl));
}

TEST_CASE("dual-number dR/dt matches a finite difference") {
  const MilnorClass cls = MilnorClass::su2();
  const std::array<double, 3> metric{1.0, 0.8, 0.4};
  const std::array<double, 3> dir{0.3, -0.1, 0.7};
  std::array<Dual, 3> gd;
  for (int i = 0; i < 3; ++i) gd[i] = Dual(metric[i], dir[i]);
  const double exact = ricci_milnor<Dual>(cls, gd).scalar.d;
  const double h = 1e-6;
  std::array<double, 3> p = metric, m = metric;
  for (int i = 0; i < 3; ++i) {
    p[i] += h * dir[i];
    m[i] -= h * dir[i];
  }
  const double fd = (ricci_milnor<double>(cls, p).scalar - ricci_milnor<double>(cls, m).scalar) / (2 * h);
  CHECK(exact == doctest::Approx(fd).epsilon(1e-7));
}
