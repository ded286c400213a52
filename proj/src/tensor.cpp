#include "pinchlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pinchlab/errors.hpp"

namespace pinchlab {

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

double trace(const Mat3& m) { return m[0][0] + m[1][1] + m[2][2]; }

SymTensor3 SymTensor3::from_matrix(const Mat3& m) {
  SymTensor3 s;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i; j < 3; ++j) s(i, j) = 0.5 * (m[i][j] + m[j][i]);
  return s;
}

Mat3 SymTensor3::matrix() const {
  Mat3 m{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) m[i][j] = (*this)(i, j);
  return m;
}

double SymTensor3::determinant() const {
  const auto& [xx, xy, xz, yy, yz, zz] = c_;
  return xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz);
}

SymTensor3 SymTensor3::inverse() const {
  const auto& [xx, xy, xz, yy, yz, zz] = c_;
  const double det = determinant();
  if (det == 0.0 || !std::isfinite(det)) throw DomainError("SymTensor3::inverse: singular tensor");
  const double inv = 1.0 / det;
  return {(yy * zz - yz * yz) * inv, (xz * yz - xy * zz) * inv, (xy * yz - xz * yy) * inv,
          (xx * zz - xz * xz) * inv, (xy * xz - xx * yz) * inv, (xx * yy - xy * xy) * inv};
}

bool SymTensor3::positive_definite() const {
  const double m1 = c_[0];
  const double m2 = c_[0] * c_[3] - c_[1] * c_[1];
  return m1 > 0.0 && m2 > 0.0 && determinant() > 0.0;
}

SymTensor3& SymTensor3::operator+=(const SymTensor3& o) {
  for (std::size_t i = 0; i < 6; ++i) c_[i] += o.c_[i];
  return *this;
}

SymTensor3& SymTensor3::operator-=(const SymTensor3& o) {
  for (std::size_t i = 0; i < 6; ++i) c_[i] -= o.c_[i];
  return *this;
}

SymTensor3& SymTensor3::operator*=(double s) {
  for (auto& v : c_) v *= s;
  return *this;
}

double SymTensor3::max_abs() const {
  double m = 0.0;
  for (double v : c_) m = std::max(m, std::abs(v));
  return m;
}

void require_metric(const SymTensor3& g, const char* what) {
  if (!g.positive_definite())
    throw DomainError(std::string(what) + ": metric is not positive definite");
}

Mat3 raise(const SymTensor3& a, const SymTensor3& g_inv) {
  return matmul(g_inv.matrix(), a.matrix());
}

double trace_g(const SymTensor3& a, const SymTensor3& g) { return trace(raise(a, g.inverse())); }

double dot_g(const SymTensor3& a, const SymTensor3& b, const SymTensor3& g) {
  const SymTensor3 gi = g.inverse();
  return trace(matmul(raise(a, gi), raise(b, gi)));
}

double norm_sq_g(const SymTensor3& a, const SymTensor3& g) { return dot_g(a, a, g); }

double dot_square_g(const SymTensor3& a, const SymTensor3& b, const SymTensor3& g) {
  const SymTensor3 gi = g.inverse();
  const Mat3 bm = raise(b, gi);
  return trace(matmul(raise(a, gi), matmul(bm, bm)));
}

SymTensor3 conjugate(const SymTensor3& a, const Mat3& q) {
  Mat3 qt{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) qt[i][j] = q[j][i];
  return SymTensor3::from_matrix(matmul(qt, matmul(a.matrix(), q)));
}

double Riemann3::max_abs() const {
  double m = 0.0;
  for (double v : c_) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace pinchlab
