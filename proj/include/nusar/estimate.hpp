#pragma once

#include <optional>

#include "nusar/linalg.hpp"
#include "nusar/model.hpp"

namespace nusar {

/// Sums over the triangle of w with x1 = X(i-1,j), x2 = X(i,j-1), y = X(i,j):
/// B = sum [[x1^2, x1 x2], [x1 x2, x2^2]], C = sum (x1 y, x2 y), and, when the
/// field carries innovations, the score A = sum (x1 eps, x2 eps).
struct WindowSums {
  Matrix2 B;
  Vec2 C{};
  std::optional<Vec2> A;
};

/// One compensated pass over the triangle. w may be any window whose hull lies
/// inside the field's hull; throws MissingValues otherwise.
WindowSums window_sums(const Field& f, TriangleWindow w);

struct NormalEquations {
  Matrix2 B;
  Vec2 C{};
};

NormalEquations normal_equations(const Field& f, TriangleWindow w);

/// Throws MissingInnovations when the field has none.
Vec2 score_vector(const Field& f, TriangleWindow w);

struct EstimateResult {
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  Matrix2 B;
  Vec2 C{};
  /// Score vector; present only when the field carries innovations.
  std::optional<Vec2> A;
  double detB = 0.0;
};

/// theta = adj(B) C / det B. Throws SingularDesign when
/// |det B| <= 1e-12 (B11 B22 + B12^2).
EstimateResult solve_normal_equations(const WindowSums& sums);
EstimateResult lse(const Field& f, TriangleWindow w);

bool is_singular_design(const Matrix2& B) noexcept;

}  // namespace nusar
