#pragma once

#include <array>
#include <cstddef>

namespace pinchlab {

/// Plain row-major 3x3 matrix, used for mixed (one index raised) tensors.
using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 matmul(const Mat3& a, const Mat3& b);
double trace(const Mat3& m);

/// Symmetric bilinear form at a point. Only the six independent components
/// are stored, so symmetry holds by construction.
class SymTensor3 {
 public:
  SymTensor3() = default;
  SymTensor3(double xx, double xy, double xz, double yy, double yz, double zz)
      : c_{xx, xy, xz, yy, yz, zz} {}

  static SymTensor3 identity() { return {1, 0, 0, 1, 0, 1}; }
  static SymTensor3 zero() { return {}; }
  static SymTensor3 diagonal(double a, double b, double c) { return {a, 0, 0, b, 0, c}; }
  static SymTensor3 from_matrix(const Mat3& m);  // symmetrizes

  double operator()(std::size_t i, std::size_t j) const { return c_[index(i, j)]; }
  double& operator()(std::size_t i, std::size_t j) { return c_[index(i, j)]; }

  Mat3 matrix() const;
  double determinant() const;

  /// Closed-form adjugate inverse. Throws DomainError when singular.
  SymTensor3 inverse() const;

  /// All three leading principal minors strictly positive.
  bool positive_definite() const;

  SymTensor3& operator+=(const SymTensor3& o);
  SymTensor3& operator-=(const SymTensor3& o);
  SymTensor3& operator*=(double s);

  friend SymTensor3 operator+(SymTensor3 a, const SymTensor3& b) { return a += b; }
  friend SymTensor3 operator-(SymTensor3 a, const SymTensor3& b) { return a -= b; }
  friend SymTensor3 operator*(SymTensor3 a, double s) { return a *= s; }
  friend SymTensor3 operator*(double s, SymTensor3 a) { return a *= s; }

  /// Largest absolute component.
  double max_abs() const;

  const std::array<double, 6>& components() const { return c_; }

 private:
  static constexpr std::size_t index(std::size_t i, std::size_t j) {
    constexpr std::size_t map[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
    return map[i][j];
  }
  std::array<double, 6> c_{};
};

/// Throws DomainError unless g is positive definite.
void require_metric(const SymTensor3& g, const char* what);

/// g^{-1} a as a mixed tensor a^i_j.
Mat3 raise(const SymTensor3& a, const SymTensor3& g_inv);

/// tr_g a = g^{ij} a_ij.
double trace_g(const SymTensor3& a, const SymTensor3& g);

/// a . b = g^{ik} g^{jl} a_ij b_kl.
double dot_g(const SymTensor3& a, const SymTensor3& b, const SymTensor3& g);

/// |a|^2 with respect to g.
double norm_sq_g(const SymTensor3& a, const SymTensor3& g);

/// a . b^2 = a_ij g^{ik} g^{jl} (b g^{-1} b)_kl.
double dot_square_g(const SymTensor3& a, const SymTensor3& b, const SymTensor3& g);

/// Q^T a Q for an orthogonal Q (test helper for invariance checks).
SymTensor3 conjugate(const SymTensor3& a, const Mat3& q);

/// Covariant 4-tensor with the symmetries of a curvature tensor in dimension 3.
/// All 81 components are stored for simple indexing.
class Riemann3 {
 public:
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return c_[((i * 3 + j) * 3 + k) * 3 + l];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return c_[((i * 3 + j) * 3 + k) * 3 + l];
  }
  double max_abs() const;

 private:
  std::array<double, 81> c_{};
};

}  // namespace pinchlab
