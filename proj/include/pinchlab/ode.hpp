#pragma once

// Embedded Dormand-Prince 5(4) integrator with PI step-size control.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "pinchlab/errors.hpp"

namespace pinchlab::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct Controls {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 1e-4;
  double min_step = 1e-14;
  double max_step = 1e-1;
  std::size_t max_steps = 2'000'000;
};

enum class Stop {
  Horizon,        // reached t_end
  Observer,       // observer asked to stop
  StepUnderflow,  // step size fell below min_step
  MaxSteps,
};

/// Integrates y' = rhs(t, y) from t0 to t_end. `observe(t, y)` is called at t0
/// and after every accepted step; returning false stops the integration.
/// A DomainError thrown by rhs during a trial step is treated as a rejected
/// step, so trajectories heading into a singularity shrink the step instead
/// of aborting.
template <std::size_t N, class Rhs, class Observer>
Stop dopri5(Rhs&& rhs, double& t, State<N>& y, double t_end, const Controls& ctl,
            Observer&& observe) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                   a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  // PI controller constants (Hairer & Wanner defaults).
  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  constexpr double fac_min = 0.1, fac_max = 5.0;

  if (!observe(t, y)) return Stop::Observer;

  double h = std::min(ctl.initial_step, t_end - t);
  double fac_old = 1e-4;
  State<N> k1 = rhs(t, y);
  std::size_t steps = 0;

  auto combo = [&](std::initializer_list<std::pair<double, const State<N>*>> terms) {
    State<N> out = y;
    for (const auto& [coef, k] : terms)
      for (std::size_t i = 0; i < N; ++i) out[i] += h * coef * (*k)[i];
    return out;
  };

  while (t < t_end) {
    if (steps++ >= ctl.max_steps) return Stop::MaxSteps;
    bool last = false;
    if (t + h >= t_end) {
      h = t_end - t;
      last = true;
    } else if (h < ctl.min_step) {
      return Stop::StepUnderflow;
    }

    State<N> k2, k3, k4, k5, k6, k7, y_new;
    bool failed = false;
    try {
      k2 = rhs(t + c2 * h, combo({{a21, &k1}}));
      k3 = rhs(t + c3 * h, combo({{a31, &k1}, {a32, &k2}}));
      k4 = rhs(t + c4 * h, combo({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
      k5 = rhs(t + c5 * h, combo({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
      k6 = rhs(t + h, combo({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
      y_new = combo({{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
      k7 = rhs(t + h, y_new);
    } catch (const DomainError&) {
      failed = true;
    }
    if (failed) {
      h *= 0.25;
      continue;
    }

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = ctl.atol + ctl.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                            e7 * k7[i]);
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / static_cast<double>(N));
    if (!std::isfinite(err)) {
      h *= 0.25;
      continue;
    }

    const double fac11 = std::pow(std::max(err, 1e-300), expo1);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(fac_old, beta);
      fac = std::clamp(fac / safe, 1.0 / fac_max, 1.0 / fac_min);
      fac_old = std::max(err, 1e-4);
      t = last ? t_end : t + h;
      y = y_new;
      k1 = k7;
      if (!observe(t, y)) return Stop::Observer;
      h = std::min(h / fac, ctl.max_step);
    } else {
      h /= std::min(1.0 / fac_min, fac11 / safe);
    }
  }
  return Stop::Horizon;
}

}  // namespace pinchlab::ode
