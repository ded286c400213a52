#pragma once

// Test-only curvature oracle: Ricci tensor of a 3-metric given in coordinates,
// from Christoffel symbols obtained by finite differences of the metric and a
// second round of finite differences of those symbols. It knows nothing about
// Milnor frames or warped products.

#include <array>
#include <functional>

namespace pinchlab::testing {

using Coord = std::array<double, 3>;
using CoordMatrix = std::array<std::array<double, 3>, 3>;
using MetricFn = std::function<CoordMatrix(const Coord&)>;

inline CoordMatrix inverse3(const CoordMatrix& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  CoordMatrix inv;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int a = (j + 1) % 3, b = (j + 2) % 3, c = (i + 1) % 3, d = (i + 2) % 3;
      inv[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
    }
  return inv;
}

// (45 (a1 - b1) - 9 (a2 - b2) + (a3 - b3)) / (60 h), elementwise on nested arrays.
inline double stencil6(double a1, double b1, double a2, double b2, double a3, double b3, double h) {
  return (45.0 * (a1 - b1) - 9.0 * (a2 - b2) + (a3 - b3)) / (60.0 * h);
}

template <class T, std::size_t N>
std::array<T, N> stencil6(const std::array<T, N>& a1, const std::array<T, N>& b1,
                          const std::array<T, N>& a2, const std::array<T, N>& b2,
                          const std::array<T, N>& a3, const std::array<T, N>& b3, double h) {
  std::array<T, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = stencil6(a1[i], b1[i], a2[i], b2[i], a3[i], b3[i], h);
  return out;
}

// Sixth-order central first derivative of an array-valued function along axis k.
template <class F>
auto central_derivative(F&& fn, const Coord& x, int k, double step) {
  auto at = [&](double off) {
    Coord y = x;
    y[k] += off;
    return fn(y);
  };
  return stencil6(at(step), at(-step), at(2 * step), at(-2 * step), at(3 * step), at(-3 * step),
                  step);
}

using Christoffel = std::array<CoordMatrix, 3>;  // Gamma[k][i][j] = Gamma^k_ij

inline Christoffel christoffel(const MetricFn& g, const Coord& x, double step) {
  std::array<CoordMatrix, 3> dg;  // dg[k][i][j] = d_k g_ij
  for (int k = 0; k < 3; ++k) dg[k] = central_derivative(g, x, k, step);
  const CoordMatrix gi = inverse3(g(x));
  Christoffel out{};
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int l = 0; l < 3; ++l) s += gi[k][l] * (dg[j][l][i] + dg[i][l][j] - dg[l][i][j]);
        out[k][i][j] = 0.5 * s;
      }
  return out;
}

/// Coordinate components R_ij of the Ricci tensor at x.
inline CoordMatrix ricci_oracle(const MetricFn& g, const Coord& x, double step = 1e-3) {
  const Christoffel gam = christoffel(g, x, step);
  std::array<Christoffel, 3> dgam;  // dgam[m] = d_m Gamma
  for (int m = 0; m < 3; ++m)
    dgam[m] = central_derivative([&](const Coord& y) { return christoffel(g, y, step); }, x, m,
                                 step);
  CoordMatrix ric{};
  // R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) {
        s += dgam[k][k][i][j] - dgam[j][k][i][k];
        for (int l = 0; l < 3; ++l) s += gam[k][k][l] * gam[l][i][j] - gam[k][j][l] * gam[l][i][k];
      }
      ric[i][j] = s;
    }
  return ric;
}

}  // namespace pinchlab::testing
