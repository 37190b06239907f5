#pragma once

#include "nusar/linalg.hpp"
#include "nusar/model.hpp"

namespace nusar {

/// [[1, sgn(ab)], [sgn(ab), 1]] with sgn(0) = 0.
Matrix2 psi_matrix(const BoundaryPoint& bp) noexcept;
Matrix2 psi_adjugate(const BoundaryPoint& bp) noexcept;

/// 2^(9/2) / (15 sqrt(pi |a| (1 - |a|))); OutOfRange unless 0 < |a| < 1.
double sigma_alpha_sq(double alpha);

/// alpha gamma / delta + beta delta / gamma for a boundary point with
/// |alpha| in {0, 1}. Only one term is active. A zero denominator gives a
/// signed infinity; 0/0 throws Indeterminate.
double omega_n(const BoundaryPoint& bp, double gamma_m, double delta_m);

/// -(alpha + beta) sgn(omega) / (|omega| + sqrt(omega^2 - 1)), and 0 when
/// omega is infinite. OutOfRange for |omega| < 1.
double theta_scalar(const BoundaryPoint& bp, double omega);

/// (1/4) [[1, theta], [theta, 1]]; OutOfRange for |theta| > 1.
Matrix2 theta_matrix(double theta);

/// Inverse of a symmetric positive definite 2x2 matrix; Singular otherwise.
Matrix2 invert_spd2(const Matrix2& m);
/// The symmetric PSD S with S S = m, for symmetric PSD m.
Matrix2 sqrt_spd2(const Matrix2& m);

/// Rate and limit covariance of the scaled estimation error for a design.
struct LimitLaw {
  LimitCase case_tag = LimitCase::Interior;
  Matrix2 covariance;
  /// Interior: always (rank one). Boundary: only when |omega| = 1.
  bool singular = false;
  /// Boundary only; NaN in the interior case.
  double omega = 0.0;
  double theta = 0.0;
  /// omega at the probe index and at four times it agree to 1e-3 relative.
  bool omega_settled = true;
  /// |omega| = 1: the limit is offered only in normalized form (identity).
  bool normalized_only = false;

  NearlyUnstableDesign design{BoundaryPoint(0.5, 1), Schedule::constant(1.0), Schedule::constant(1.0)};

  /// Interior: s. Boundary: s sqrt(m) |gamma(m)^2 - delta(m)^2|^(-1/4);
  /// RateUndefined when gamma(m)^2 = delta(m)^2.
  double rate(long m, long s) const;

  /// Theta^(1/2) at the finite-m omega, for the normalized error of the
  /// boundary case. Throws for interior designs.
  Matrix2 normalizer_at(long m) const;
};

/// Throws RateUndefined in the boundary case when gamma^2 = delta^2 at m_probe.
LimitLaw limit_law(const NearlyUnstableDesign& design, long m_probe);

/// Interior: s m^(-1/2) (|gamma|+|delta|)^(1/2); boundary: s m^(-1) |gamma^2-delta^2|^(1/2).
double condition_statistic(const NearlyUnstableDesign& design, long m, long s);

/// (s(s+1)/2) sigma^2 [[1, D], [D, 1]], D the product of the two boundary factors.
Matrix2 expected_B(const ModelParams& p, long s);

/// Factor that maps B (and E[B]) to its limit: condition_statistic / s^3.
double information_scale(const NearlyUnstableDesign& design, long m, long s);

/// Limit of information_scale * E[B]: (32|a||b|)^(-1/2) Psi in the interior,
/// Theta(theta(omega)) on the boundary (probe index for omega as in limit_law).
Matrix2 information_limit(const NearlyUnstableDesign& design, long m_probe);

struct FisherScaleConstants {
  double sigma_sq_ab = 0.0;
  double rho = 0.0;
  /// NaN unless 0 < |alpha| < 1 at a boundary point.
  double sigma_alpha_sq = 0.0;
  Matrix2 gamma_matrix;
  double info_exponent = 2.0;
};

/// Constants of a stable point (exponent 2).
FisherScaleConstants fisher_constants(const ModelParams& p);
/// Constants along a design at index m (exponent 5/2 or 3).
FisherScaleConstants fisher_constants(const NearlyUnstableDesign& design, long m);

}  // namespace nusar
