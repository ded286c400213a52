#include "pinchlab/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include <boost/math/tools/roots.hpp>

#include "pinchlab/errors.hpp"

namespace pinchlab::cert {

namespace {

using Vec3 = Triple<double>;

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
const double kInvSqrt6 = 1.0 / std::sqrt(6.0);

// Orthonormal basis of the plane orthogonal to (1,1,1).
const Vec3 kE1{kInvSqrt2, -kInvSqrt2, 0.0};
const Vec3 kE2{kInvSqrt6, kInvSqrt6, -2.0 * kInvSqrt6};

// In-plane unit directions of the lines {r_i = r_j} through the circle centre.
const std::array<Vec3, 3> kTwoEqualDirections{{{kInvSqrt6, kInvSqrt6, -2.0 * kInvSqrt6},
                                               {kInvSqrt6, -2.0 * kInvSqrt6, kInvSqrt6},
                                               {-2.0 * kInvSqrt6, kInvSqrt6, kInvSqrt6}}};

struct Circle {
  double centre;  // each coordinate of the centre equals X/3
  double radius;

  Vec3 point(double theta) const {
    const double c = std::cos(theta), s = std::sin(theta);
    Vec3 r;
    for (std::size_t i = 0; i < 3; ++i) r[i] = centre + radius * (c * kE1[i] + s * kE2[i]);
    return r;
  }

  double z(double theta) const {
    const Vec3 r = point(theta);
    return r[0] * r[0] * r[0] + r[1] * r[1] * r[1] + r[2] * r[2] * r[2];
  }

  double dz(double theta) const {
    const double c = std::cos(theta), s = std::sin(theta);
    const Vec3 r = point(theta);
    double d = 0.0;
    for (std::size_t i = 0; i < 3; ++i) d += 3.0 * r[i] * r[i] * radius * (-s * kE1[i] + c * kE2[i]);
    return d;
  }
};

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

}  // namespace

double distance_to_two_equal(const Triple<double>& r) {
  const double x = r[0] + r[1] + r[2];
  const double c = x / 3.0;
  const Vec3 offset{r[0] - c, r[1] - c, r[2] - c};
  const double radius = norm(offset);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : kTwoEqualDirections) {
    for (double sign : {1.0, -1.0}) {
      Vec3 diff;
      for (std::size_t i = 0; i < 3; ++i) diff[i] = offset[i] - sign * radius * d[i];
      best = std::min(best, norm(diff));
    }
  }
  return best;
}

LagrangeReport lagrange_reduction_check(double x, double y, std::size_t samples,
                                        double distance_tolerance) {
  LagrangeReport report;
  report.x = x;
  report.y = y;
  const double radius_sq = y - x * x / 3.0;
  const double scale = std::max({1.0, std::abs(y), x * x});
  if (radius_sq < -1e-12 * scale)
    throw DomainError("lagrange_reduction_check: empty constraint set (Y < X^2/3)");

  const Circle circle{x / 3.0, std::sqrt(std::max(0.0, radius_sq))};
  report.radius = circle.radius;

  if (circle.radius <= 1e-12 * std::sqrt(scale)) {
    const Vec3 r = circle.point(0.0);
    const double z = r[0] * r[0] * r[0] + r[1] * r[1] * r[1] + r[2] * r[2] * r[2];
    report.z_min = report.z_max = z;
    report.extremizers.push_back({r, z, true, 0.0});
    report.passed = true;
    return report;
  }

  const std::size_t n = std::max<std::size_t>(samples, 64);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);

  std::vector<double> critical;
  std::vector<double> node(n + 1), dz(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    node[k] = step * static_cast<double>(k);
    dz[k] = circle.dz(node[k]);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double a = node[k], b = node[k + 1];
    const double fa = dz[k], fb = dz[k + 1];
    if (fa == 0.0) {
      critical.push_back(a);
      continue;
    }
    if ((fa < 0.0) == (fb < 0.0) || fb == 0.0) continue;
    std::uintmax_t iters = 200;
    auto [lo, hi] = boost::math::tools::toms748_solve(
        [&](double t) { return circle.dz(t); }, a, b, fa, fb,
        boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 2), iters);
    critical.push_back(0.5 * (lo + hi));
  }

  // A root sitting on a bracket endpoint can be found from both sides.
  std::sort(critical.begin(), critical.end());
  const double same_angle = 1e-9;
  critical.erase(std::unique(critical.begin(), critical.end(),
                             [&](double a, double b) { return b - a < same_angle; }),
                 critical.end());
  if (critical.size() > 1 &&
      critical.front() + 2.0 * std::numbers::pi - critical.back() < same_angle)
    critical.pop_back();

  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -std::numeric_limits<double>::infinity();
  for (double t : critical) {
    z_min = std::min(z_min, circle.z(t));
    z_max = std::max(z_max, circle.z(t));
  }
  report.z_min = z_min;
  report.z_max = z_max;

  const double z_scale = std::max({1.0, std::abs(z_min), std::abs(z_max)});
  for (double t : critical) {
    const double z = circle.z(t);
    const bool at_max = std::abs(z - z_max) <= 1e-9 * z_scale;
    const bool at_min = std::abs(z - z_min) <= 1e-9 * z_scale;
    if (!at_max && !at_min) continue;
    const Vec3 r = circle.point(t);
    const double dist = distance_to_two_equal(r);
    report.extremizers.push_back({r, z, at_max, dist});
    report.max_distance = std::max(report.max_distance, dist);
  }
  report.passed = !report.extremizers.empty() && report.max_distance < distance_tolerance;
  return report;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kBlockSize = 4096;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Partial {
  double min_q = std::numeric_limits<double>::infinity();
  std::uint64_t argmin_index = std::numeric_limits<std::uint64_t>::max();
  CertificatePoint<double> argmin;
  double min_d1 = std::numeric_limits<double>::infinity();
  double min_d2 = std::numeric_limits<double>::infinity();
  double min_d3 = std::numeric_limits<double>::infinity();
  double identity_max_err = 0.0;

  void merge(const Partial& o) {
    if (o.min_q < min_q || (o.min_q == min_q && o.argmin_index < argmin_index)) {
      min_q = o.min_q;
      argmin_index = o.argmin_index;
      argmin = o.argmin;
    }
    min_d1 = std::min(min_d1, o.min_d1);
    min_d2 = std::min(min_d2, o.min_d2);
    min_d3 = std::min(min_d3, o.min_d3);
    identity_max_err = std::max(identity_max_err, o.identity_max_err);
  }
};

void evaluate(const CertificatePoint<double>& p, std::uint64_t index, Partial& acc) {
  const auto& r = p.r;
  const auto& h = p.h;
  const double r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
  const double h2 = h[0] * h[0] + h[1] * h[1] + h[2] * h[2];
  if (r2 > 0.0 && h2 > 0.0) {
    const double scale = r2 * h2;
    const double q = q_poly(p) / scale;
    const double q4 = q_poly_four_term(p) / scale;
    if (q < acc.min_q) {
      acc.min_q = q;
      acc.argmin_index = index;
      acc.argmin = p;
    }
    acc.identity_max_err = std::max(acc.identity_max_err, std::abs(q - q4));
  }
  if (r2 > 0.0) {
    const auto m = minors(q_hessian(r));
    const double r4 = r2 * r2, r6 = r4 * r2;
    acc.min_d1 = std::min(acc.min_d1, m.d1 / r2);
    acc.min_d2 = std::min(acc.min_d2, m.d2 / r4);
    acc.min_d3 = std::min(acc.min_d3, m.d3 / r6);
    const double d3_ps = delta3_via_power_sums(PowerSums<double>::from(r));
    acc.identity_max_err = std::max(acc.identity_max_err, std::abs(m.d3 - d3_ps) / r6);
  }
}

void run_block(const SamplingPlan& plan, std::uint64_t block, Partial& acc) {
  std::mt19937_64 rng(splitmix64(plan.seed ^ splitmix64(block)));
  std::uniform_real_distribution<double> uniform(plan.lo, plan.hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::uint64_t begin = block * kBlockSize;
  const std::uint64_t end = std::min(plan.samples, begin + kBlockSize);
  for (std::uint64_t i = begin; i < end; ++i) {
    const bool heavy = plan.heavy_tail_fraction > 0.0 && unit(rng) < plan.heavy_tail_fraction;
    CertificatePoint<double> p;
    for (std::size_t k = 0; k < 6; ++k) {
      double v;
      if (heavy) {
        const double u = std::max(unit(rng), 1e-12);
        v = (unit(rng) < 0.5 ? -1.0 : 1.0) / u;
      } else {
        v = uniform(rng);
      }
      (k < 3 ? p.r[k] : p.h[k - 3]) = v;
    }
    evaluate(p, i, acc);
  }
}

}  // namespace

CertReport certify(const SamplingPlan& plan) {
  CertReport report;
  report.samples = plan.samples;
  report.seed = plan.seed;
  if (plan.samples == 0) {
    report.status = "vacuous";
    return report;
  }

  const std::uint64_t blocks = (plan.samples + kBlockSize - 1) / kBlockSize;
  const unsigned workers =
      static_cast<unsigned>(std::clamp<std::uint64_t>(plan.workers, 1, blocks));
  std::vector<Partial> partials(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint64_t b = w; b < blocks; b += workers) run_block(plan, b, partials[w]);
      });
    }
  }
  Partial total;
  for (const auto& p : partials) total.merge(p);

  report.min_q = total.min_q;
  report.argmin_q = total.argmin;
  report.min_d1 = total.min_d1;
  report.min_d2 = total.min_d2;
  report.min_d3 = total.min_d3;
  report.identity_max_err = total.identity_max_err;
  const double floor = -1e-9;
  const bool ok = report.min_q >= floor && report.min_d1 >= floor && report.min_d2 >= floor &&
                  report.min_d3 >= floor;
  report.status = ok ? "ok" : "violated";
  return report;
}

GridReport certify_grid(const std::vector<int>& values) {
  GridReport report;
  const std::size_t n = values.size();
  if (n == 0) return report;
  bool first = true;
  std::array<std::size_t, 6> idx{};
  for (;;) {
    CertificatePoint<int> pi;
    CertificatePoint<Rational> pr;
    for (std::size_t k = 0; k < 3; ++k) {
      pi.r[k] = values[idx[k]];
      pi.h[k] = values[idx[k + 3]];
      pr.r[k] = pi.r[k];
      pr.h[k] = pi.h[k];
    }
    ++report.points;

    const Rational q = q_poly(pr);
    if (q != q_poly_four_term(pr)) report.identity_exact = false;
    const auto m = minors(q_hessian(pr.r));
    if (m.d3 != delta3_via_power_sums(PowerSums<Rational>::from(pr.r))) report.identity_exact = false;
    if (m.d1 < 0 || m.d2 < 0 || m.d3 < 0) report.minors_nonnegative = false;

    const bool nontrivial = (pi.r != Triple<int>{0, 0, 0}) && (pi.h != Triple<int>{0, 0, 0});
    if (first || q < report.min_q) {
      report.min_q = q;
      report.nontrivial_minimizers.clear();
      first = false;
    }
    if (q == report.min_q && nontrivial) report.nontrivial_minimizers.push_back(pi);

    std::size_t k = 6;
    while (k > 0) {
      --k;
      if (++idx[k] < n) break;
      idx[k] = 0;
      if (k == 0) return report;
    }
  }
}

nlohmann::json to_json(const CertReport& report) {
  auto nan_safe = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json j;
  j["min_q"] = nan_safe(report.min_q);
  j["argmin_q"] = {{"r", report.argmin_q.r}, {"h", report.argmin_q.h}};
  j["min_d1"] = nan_safe(report.min_d1);
  j["min_d2"] = nan_safe(report.min_d2);
  j["min_d3"] = nan_safe(report.min_d3);
  j["identity_max_err"] = report.identity_max_err;
  j["samples"] = report.samples;
  j["seed"] = report.seed;
  j["status"] = report.status;
  return j;
}

nlohmann::json to_json(const LagrangeReport& report) {
  nlohmann::json ext = nlohmann::json::array();
  for (const auto& e : report.extremizers)
    ext.push_back({{"r", e.r}, {"z", e.z}, {"is_max", e.is_max},
                   {"distance_to_two_equal", e.distance_to_two_equal}});
  return {{"X", report.x},           {"Y", report.y},
          {"radius", report.radius}, {"z_min", report.z_min},
          {"z_max", report.z_max},   {"extremizers", ext},
          {"max_distance", report.max_distance}, {"passed", report.passed}};
}

}  // namespace pinchlab::cert
