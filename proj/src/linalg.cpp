#include "nusar/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "nusar/error.hpp"

namespace nusar {

double Matrix2::frobenius() const noexcept { return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22); }

Matrix2 operator+(const Matrix2& a, const Matrix2& b) noexcept {
  return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}

Matrix2 operator-(const Matrix2& a, const Matrix2& b) noexcept {
  return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}

Matrix2 operator*(const Matrix2& a, const Matrix2& b) noexcept {
  return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
          a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

Matrix2 operator*(double c, const Matrix2& a) noexcept { return {c * a.a11, c * a.a12, c * a.a21, c * a.a22}; }

Vec2 operator*(const Matrix2& a, const Vec2& v) noexcept {
  return {a.a11 * v[0] + a.a12 * v[1], a.a21 * v[0] + a.a22 * v[1]};
}

double det2(const Matrix2& m) noexcept { return m.a11 * m.a22 - m.a12 * m.a21; }

Matrix2 adjugate2(const Matrix2& m) noexcept { return {m.a22, -m.a12, -m.a21, m.a11}; }

DenseMatrix::DenseMatrix(std::size_t n, std::vector<double> rows) : n_(n), data_(std::move(rows)) {
  if (data_.size() != n * n) throw Error(ErrorCode::OutOfRange, "matrix data does not match its dimension");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

namespace {

std::optional<DenseMatrix> try_cholesky(const DenseMatrix& m, double shift) {
  const std::size_t n = m.dim();
  DenseMatrix l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j) + shift;
    for (std::size_t p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    if (!(d > 0.0)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = m(i, j);
      for (std::size_t p = 0; p < j; ++p) v -= l(i, p) * l(j, p);
      l(i, j) = v / ljj;
    }
  }
  return l;
}

}  // namespace

CholeskyResult chol_spd(const DenseMatrix& m, JitterPolicy policy) {
  const std::size_t n = m.dim();
  if (n == 0) throw Error(ErrorCode::OutOfRange, "cannot factor an empty matrix");
  if (auto l = try_cholesky(m, 0.0)) return {std::move(*l), 0.0};
  if (policy == JitterPolicy::Escalate) {
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
    for (double rel : {1e-12, 1e-10, 1e-8}) {
      const double shift = rel * max_diag;
      if (auto l = try_cholesky(m, shift)) return {std::move(*l), shift};
    }
  }
  std::ostringstream msg;
  msg << n << "x" << n << " matrix is not positive definite"
      << (policy == JitterPolicy::Escalate ? " even after jitter escalation" : "");
  throw Error(ErrorCode::NotSPD, msg.str());
}

void lower_mul(const DenseMatrix& lower, std::span<const double> z, std::span<double> y) noexcept {
  const std::size_t n = lower.dim();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p <= i; ++p) acc += lower(i, p) * z[p];
    y[i] = acc;
  }
}

}  // namespace nusar
