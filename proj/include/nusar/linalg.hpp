#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace nusar {

struct Matrix2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a21 = 0.0;
  double a22 = 0.0;

  static Matrix2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }
  static Matrix2 symmetric(double diag, double off) noexcept { return {diag, off, off, diag}; }

  Matrix2 transpose() const noexcept { return {a11, a21, a12, a22}; }
  double trace() const noexcept { return a11 + a22; }
  double frobenius() const noexcept;

  friend bool operator==(const Matrix2&, const Matrix2&) = default;
};

using Vec2 = std::array<double, 2>;

Matrix2 operator+(const Matrix2& a, const Matrix2& b) noexcept;
Matrix2 operator-(const Matrix2& a, const Matrix2& b) noexcept;
Matrix2 operator*(const Matrix2& a, const Matrix2& b) noexcept;
Matrix2 operator*(double c, const Matrix2& a) noexcept;
Vec2 operator*(const Matrix2& a, const Vec2& v) noexcept;

double det2(const Matrix2& m) noexcept;
/// [[a,b],[c,d]] -> [[d,-b],[-c,a]].
Matrix2 adjugate2(const Matrix2& m) noexcept;

/// Row-major square matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  DenseMatrix(std::size_t n, std::vector<double> rows);

  static DenseMatrix identity(std::size_t n);

  std::size_t dim() const noexcept { return n_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * n_ + c]; }
  std::span<const double> data() const noexcept { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

enum class JitterPolicy { None, Escalate };

struct CholeskyResult {
  DenseMatrix lower;
  /// Absolute diagonal shift that was added; 0 when M factored as given.
  double jitter = 0.0;
};

/// Lower factor L with L L^T = M (+ jitter I). With Escalate, a failed
/// factorization is retried with 1e-12, 1e-10 and 1e-8 times the largest
/// diagonal entry. Throws NotSPD when every attempt fails.
CholeskyResult chol_spd(const DenseMatrix& m, JitterPolicy policy = JitterPolicy::Escalate);

/// y = L z for lower-triangular L.
void lower_mul(const DenseMatrix& lower, std::span<const double> z, std::span<double> y) noexcept;

}  // namespace nusar
