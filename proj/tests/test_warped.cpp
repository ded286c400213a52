#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "coordinate_oracle.hpp"
#include "pinchlab/warped.hpp"

using namespace pinchlab;
using namespace pinchlab::warped;

namespace {

double max_abs(const Field& q) {
  double m = 0.0;
  for (double v : q) m = std::max(m, std::abs(v));
  return m;
}

// c0 + sum_m a_m cos(m x + p_m) with analytic derivatives.
struct Trig {
  double c0 = 1.0;
  std::vector<double> a, p;

  double operator()(double x, int order = 0) const {
    double s = order == 0 ? c0 : 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) {
      const double k = static_cast<double>(m + 1);
      const double arg = k * x + p[m];
      switch (order) {
        case 0: s += a[m] * std::cos(arg); break;
        case 1: s -= a[m] * k * std::sin(arg); break;
        default: s -= a[m] * k * k * std::cos(arg); break;
      }
    }
    return s;
  }
};

Trig random_trig(std::mt19937_64& rng, double c0, double amp, int modes) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), ph(0.0, kPeriod);
  Trig t;
  t.c0 = c0;
  for (int m = 0; m < modes; ++m) {
    t.a.push_back(amp * u(rng) / (m + 1));
    t.p.push_back(ph(rng));
  }
  return t;
}

Profile constant(double c) {
  return [c](double) { return c; };
}

WarpedState perturbed_cylinder(std::size_t n, double eps = 0.1, double rho = 0.0) {
  return with_h_equal_rc(WarpedState::from_profiles(
      n, constant(1.0), [eps](double x) { return 1.0 + eps * std::cos(x); }, constant(0.0),
      constant(0.0), rho));
}

WarpedState generic_state(std::size_t n, double rho = 0.0) {
  return WarpedState::from_profiles(
      n, [](double x) { return 1.0 + 0.05 * std::sin(x); },
      [](double x) { return 1.0 + 0.1 * std::cos(x); },
      [](double x) { return 0.3 + 0.2 * std::sin(x) + 0.1 * std::cos(2 * x); },
      [](double x) { return -0.2 + 0.15 * std::cos(x) + 0.1 * std::sin(3 * x); }, rho);
}

}  // namespace

TEST_CASE("curvature_warped: exact cylinders") {
  for (double a : {0.25, 1.0, 3.0}) {
    const auto s = WarpedState::from_profiles(32, constant(1.0), constant(std::sqrt(a)),
                                              constant(0.0), constant(0.0));
    const auto d = curvature_warped(s);
    for (std::size_t j = 0; j < s.size(); ++j) {
      CHECK(std::abs(d.r_s[j]) < 1e-14);
      CHECK(d.r_o[j] == doctest::Approx(1.0 / a).epsilon(1e-14));
      CHECK(d.R[j] == doctest::Approx(2.0 / a).epsilon(1e-14));
      CHECK(d.R[j] > 0.0);
    }
  }
}

TEST_CASE("curvature_warped: invalid states are domain errors") {
  CHECK_THROWS_AS(WarpedState::from_profiles(32, constant(1.0), constant(0.0), constant(0.0),
                                             constant(0.0)),
                  DomainError);
  CHECK_THROWS_AS(WarpedState::from_profiles(32, constant(-1.0), constant(1.0), constant(0.0),
                                             constant(0.0)),
                  DomainError);
  CHECK_THROWS_AS(WarpedState::from_profiles(15, constant(1.0), constant(1.0), constant(0.0),
                                             constant(0.0)),
                  DomainError);
  CHECK_THROWS_AS(WarpedState::from_profiles(33, constant(1.0), constant(1.0), constant(0.0),
                                             constant(0.0)),
                  DomainError);
  auto s = perturbed_cylinder(32);
  s.psi[3] = -0.1;
  CHECK_THROWS_AS(curvature_warped(s), DomainError);
}

TEST_CASE("point curvature matches a finite-difference Christoffel oracle") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ux(0.0, kPeriod), uth(0.5, 2.5);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Trig f = random_trig(rng, 1.0, 0.2, 3);
    const Trig psi = random_trig(rng, 1.2, 0.3, 3);
    // Coordinates (x, theta, phi) on S^1 x S^2.
    const testing::MetricFn g = [&](const testing::Coord& c) {
      testing::CoordMatrix m{};
      m[0][0] = f(c[0]) * f(c[0]);
      m[1][1] = psi(c[0]) * psi(c[0]);
      m[2][2] = m[1][1] * std::sin(c[1]) * std::sin(c[1]);
      return m;
    };
    const testing::Coord at{ux(rng), uth(rng), 0.3};
    const auto ric = testing::ricci_oracle(g, at, 2e-3);
    const auto pc = point_curvature(f(at[0]), f(at[0], 1), psi(at[0]), psi(at[0], 1), psi(at[0], 2));
    const double r_s = ric[0][0] / g(at)[0][0];
    const double r_o = ric[1][1] / g(at)[1][1];
    const double r_o2 = ric[2][2] / g(at)[2][2];
    const double scale = std::max(1.0, std::abs(pc.R));
    worst = std::max({worst, std::abs(r_s - pc.r_s) / scale, std::abs(r_o - pc.r_o) / scale,
                      std::abs(r_o2 - pc.r_o) / scale, std::abs(ric[0][1]) / scale,
                      std::abs(ric[1][2]) / scale});
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("curvature_warped converges at second order on smooth profiles") {
  std::mt19937_64 rng(42);
  const Trig f = random_trig(rng, 1.0, 0.2, 3);
  const Trig psi = random_trig(rng, 1.2, 0.3, 3);
  std::vector<double> errors;
  for (std::size_t n : {64, 128, 256, 512}) {
    const auto s = WarpedState::from_profiles(
        n, [&](double x) { return f(x); }, [&](double x) { return psi(x); }, constant(0.0),
        constant(0.0));
    const auto d = curvature_warped(s);
    double e = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = s.x(j);
      const auto exact = point_curvature(f(x), f(x, 1), psi(x), psi(x, 1), psi(x, 2));
      e = std::max(e, std::abs(d.R[j] - exact.R));
    }
    errors.push_back(e);
  }
  for (std::size_t i = 0; i + 1 < errors.size(); ++i)
    CHECK(std::log2(errors[i] / errors[i + 1]) > 1.9);
}

TEST_CASE("lichnerowicz_warped: parallel and metric tensors are stationary") {
  // Exact cylinder, h = c ds^2.
  const auto cyl = WarpedState::from_profiles(32, constant(1.0), constant(1.3), constant(0.7),
                                              constant(0.0));
  auto [a1, b1] = lichnerowicz_warped(cyl);
  CHECK(max_abs(a1) < 1e-14);
  CHECK(max_abs(b1) < 1e-14);

  // h = g on a generic metric.
  auto s = generic_state(64);
  s.alpha = Field(s.size());
  s.beta = Field(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    s.alpha[j] = s.f[j] * s.f[j];
    s.beta[j] = s.psi[j] * s.psi[j];
  }
  auto [a2, b2] = lichnerowicz_warped(s);
  CHECK(max_abs(a2) < 1e-12);
  CHECK(max_abs(b2) < 1e-12);
}

TEST_CASE("step: exact cylinder shrinks at the closed-form rate") {
  const auto cyl = WarpedState::from_profiles(32, constant(1.0), constant(1.0), constant(0.0),
                                              constant(0.0));
  const auto r = step(cyl, 1e-5);
  REQUIRE(r.status == StepStatus::Accepted);
  for (double p : r.state.psi) CHECK(std::abs(p * p - (1.0 - 2e-5)) < 1e-10);
  CHECK(r.state.t == doctest::Approx(1e-5));

  // Longer run: psi^2 = a0 - 2t and R = 2 / (a0 - 2t).
  WarpedState s = WarpedState::from_profiles(16, constant(1.0), constant(std::sqrt(0.8)),
                                             constant(0.0), constant(0.0));
  while (s.t < 0.2 - 1e-12) s = step(s, std::min({cfl_bound(s), 1e-3, 0.2 - s.t})).state;
  const auto d = curvature_warped(s);
  for (std::size_t j = 0; j < s.size(); ++j) {
    CHECK(s.psi[j] * s.psi[j] == doctest::Approx(0.8 - 0.4).epsilon(1e-12));
    CHECK(d.R[j] == doctest::Approx(2.0 / 0.4).epsilon(1e-12));
  }
}

TEST_CASE("step: zero dt is the identity and oversized dt is rejected") {
  const auto s = generic_state(32);
  const auto same = step(s, 0.0);
  CHECK(same.status == StepStatus::Accepted);
  CHECK(same.state.f == s.f);
  CHECK(same.state.psi == s.psi);
  CHECK(same.state.alpha == s.alpha);
  CHECK(same.state.beta == s.beta);
  CHECK(same.state.t == s.t);

  const auto rejected = step(s, 2.0 * cfl_bound(s));
  CHECK(rejected.status == StepStatus::Rejected);
  CHECK(rejected.state.psi == s.psi);
  CHECK(step(s, cfl_bound(s)).status == StepStatus::Accepted);
}

TEST_CASE("step: self-convergence under grid refinement is second order") {
  const double horizon = 0.05;
  const std::size_t finest = 256;
  const double dt = cfl_bound(generic_state(finest)) * 0.5;
  std::vector<WarpedState> finals;
  for (std::size_t n : {32, 64, 128, 256}) {
    WarpedState s = generic_state(n);
    while (s.t < horizon - 1e-14) {
      const auto r = step(s, std::min(dt, horizon - s.t));
      REQUIRE(r.status == StepStatus::Accepted);
      s = r.state;
    }
    finals.push_back(s);
  }
  auto diff = [](const WarpedState& coarse, const WarpedState& fine) {
    double e = 0.0;
    for (std::size_t j = 0; j < coarse.size(); ++j) {
      e = std::max(e, std::abs(coarse.psi[j] - fine.psi[2 * j]));
      e = std::max(e, std::abs(coarse.f[j] - fine.f[2 * j]));
      e = std::max(e, std::abs(coarse.alpha[j] - fine.alpha[2 * j]));
      e = std::max(e, std::abs(coarse.beta[j] - fine.beta[2 * j]));
    }
    return e;
  };
  const double e1 = diff(finals[0], finals[1]);
  const double e2 = diff(finals[1], finals[2]);
  const double e3 = diff(finals[2], finals[3]);
  CHECK(std::log2(e1 / e2) >= 1.9);
  CHECK(std::log2(e2 / e3) >= 1.9);
}

TEST_CASE("bochner_residual: homogeneous cases") {
  const auto zero = WarpedState::from_profiles(64, [](double x) { return 1.0 + 0.1 * std::sin(x); },
                                               [](double x) { return 1.0 + 0.2 * std::cos(x); },
                                               constant(0.0), constant(0.0));
  CHECK(max_abs(bochner_residual(zero)) == 0.0);

  // Cylinder with h = c ds^2: dPhi/dt = 4P = -c^2 when a0 = 1.
  const auto cyl = WarpedState::from_profiles(32, constant(1.0), constant(1.0), constant(0.7),
                                              constant(0.0));
  CHECK(max_abs(bochner_residual(cyl)) < 1e-14);
  const auto d = curvature_warped(cyl);
  for (double p : d.P) CHECK(4.0 * p == doctest::Approx(-0.49));
}

TEST_CASE("bochner_residual converges at second order for generic smooth h") {
  std::vector<double> r;
  for (std::size_t n : {128, 256, 512}) r.push_back(max_abs(bochner_residual(generic_state(n))));
  CHECK(std::log2(r[0] / r[1]) >= 1.9);
  CHECK(std::log2(r[1] / r[2]) >= 1.9);

  std::vector<double> rho1;
  for (std::size_t n : {128, 256, 512})
    rho1.push_back(max_abs(bochner_residual(generic_state(n, 1.0))));
  CHECK(std::log2(rho1[0] / rho1[1]) >= 1.9);
  CHECK(std::log2(rho1[1] / rho1[2]) >= 1.9);
}

TEST_CASE("bochner_residual requires R + rho > 0") {
  // A thin neck with large psi elsewhere has negative R near the fat part.
  const auto s = WarpedState::from_profiles(64, constant(0.2), [](double x) { return 2.0 + 1.5 * std::cos(x); },
                                            constant(1.0), constant(0.0));
  const auto d = curvature_warped(s);
  REQUIRE(*std::min_element(d.R.begin(), d.R.end()) < 0.0);
  CHECK_THROWS_AS(bochner_residual(s), HypothesisError);
  auto shifted = s;
  shifted.rho = 1.0 - *std::min_element(d.R.begin(), d.R.end());
  CHECK_NOTHROW(bochner_residual(shifted));
}

TEST_CASE("scalar curvature evolution residual converges at second order") {
  std::vector<double> r;
  for (std::size_t n : {64, 128, 256}) r.push_back(max_abs(scalar_curvature_residual(generic_state(n))));
  CHECK(std::log2(r[0] / r[1]) >= 1.9);
  CHECK(std::log2(r[1] / r[2]) >= 1.9);
}

TEST_CASE("pointwise reaction bound 4P <= 4 C rho Phi") {
  for (double rho : {0.0, 0.5, 1.0}) {
    const auto s = generic_state(128, rho);
    const auto d = curvature_warped(s);
    const double c = *std::max_element(d.Cbound.begin(), d.Cbound.end());
    for (std::size_t j = 0; j < s.size(); ++j)
      CHECK(d.P[j] <= c * rho * d.Phi[j] + 1e-12);
  }
}

TEST_CASE("run_max_principle: cylinder with h = Rc keeps Phi = 1/2") {
  const auto cyl = with_h_equal_rc(WarpedState::from_profiles(32, constant(1.0), constant(1.0),
                                                              constant(0.0), constant(0.0)));
  RunControls c;
  c.horizon = 0.2;
  const auto rep = run_max_principle(cyl, c);
  CHECK(rep.passed);
  CHECK(rep.trace.status == RunStatus::Completed);
  CHECK(rep.trace.final_time() == doctest::Approx(0.2));
  for (const auto& row : rep.trace.rows) {
    CHECK(std::abs(row.Phi - 0.5) < 1e-6);
    CHECK(row.R == doctest::Approx(2.0 / (1.0 - 2.0 * row.t)).epsilon(1e-10));
  }
}

TEST_CASE("run_max_principle: perturbed cylinder, rho = 0, h = Rc") {
  RunControls c;
  c.horizon = 0.1;
  std::vector<double> gaps;
  for (std::size_t n : {64, 128, 256}) {
    const auto rep = run_max_principle(perturbed_cylinder(n), c);
    CHECK(rep.passed);
    CHECK(rep.worst_growth_rate <= 1e-5);
    CHECK(rep.trace.status == RunStatus::Completed);
    gaps.push_back(rep.max_rc_gap);
  }
  CHECK(gaps.back() < 1e-3);
  CHECK(gaps[0] / gaps[1] > 3.5);
  CHECK(gaps[1] / gaps[2] > 3.5);
}

TEST_CASE("run_max_principle: rho = 1 bound with generic h") {
  RunControls c;
  c.horizon = 0.1;
  c.sample_every = 5;
  const auto rep = run_max_principle(generic_state(128, 1.0), c);
  CHECK(rep.passed);
  CHECK(rep.worst_bound_ratio <= 1.0 + 1e-3);
}

TEST_CASE("run_max_principle: hypothesis gate and counterexample reporting") {
  const auto neg = WarpedState::from_profiles(64, constant(0.2), [](double x) { return 2.0 + 1.5 * std::cos(x); },
                                              constant(1.0), constant(0.0));
  RunControls c;
  CHECK_THROWS_AS(run_max_principle(neg, c), HypothesisError);

  c.horizon = 0.02;
  c.monotone_tolerance = -1e3;  // demand impossible decay to force a failure
  const auto rep = run_max_principle(perturbed_cylinder(32), c);
  CHECK_FALSE(rep.passed);
  CHECK_FALSE(rep.failure.empty());
  REQUIRE(rep.counterexample.has_value());
  CHECK(rep.counterexample->size() == 32);
}

TEST_CASE("run_max_principle: neckpinch ends with a singularity status") {
  const auto s = with_h_equal_rc(WarpedState::from_profiles(
      32, constant(1.0), [](double x) { return 1.0 + 0.7 * std::cos(x); }, constant(0.0),
      constant(0.0)));
  RunControls c;
  c.horizon = 2.0;
  c.sample_every = 100;
  c.max_steps = 200'000;
  const auto rep = run_max_principle(s, c);
  CHECK(rep.trace.status == RunStatus::SingularityReached);
  CHECK(rep.trace.final_time() < 2.0);
}

TEST_CASE("run_max_principle is reproducible bit for bit") {
  RunControls c;
  c.horizon = 0.02;
  c.snapshot_every = 0.01;
  const auto a = run_max_principle(generic_state(64, 1.0), c);
  const auto b = run_max_principle(generic_state(64, 1.0), c);
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  std::ostringstream ca, cb;
  write_csv(ca, a.trace);
  write_csv(cb, b.trace);
  CHECK(ca.str() == cb.str());
  CHECK(a.final_state.psi == b.final_state.psi);
  CHECK(a.snapshots.size() == 3);
}

TEST_CASE("write_snapshot_csv layout") {
  std::ostringstream out;
  write_snapshot_csv(out, generic_state(16));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,f,psi,alpha,beta,R,Phi");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(rows == 16);
}
