#include "nusar/limits.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nusar/covariance.hpp"
#include "nusar/error.hpp"

namespace nusar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOmegaSettleTol = 1e-3;

double sgn(double x) noexcept { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_boundary(const BoundaryPoint& bp) {
  const double a = std::abs(bp.alpha());
  if (a != 0.0 && a != 1.0) throw Error(ErrorCode::OutOfRange, "omega is defined only for |alpha| in {0, 1}");
}

double ratio_or_infinity(double num, double den) {
  if (den == 0.0) {
    if (num == 0.0) throw Error(ErrorCode::Indeterminate, "omega is 0/0 for this schedule pair");
    return sgn(num) * kInf;
  }
  return num / den;
}

double gap(const NearlyUnstableDesign& d, long m) {
  const double g = d.gamma_at(m);
  const double h = d.delta_at(m);
  return std::abs(g * g - h * h);
}

bool omega_close(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= kOmegaSettleTol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

Matrix2 psi_matrix(const BoundaryPoint& bp) noexcept {
  return Matrix2::symmetric(1.0, sgn(bp.alpha() * bp.beta()));
}

Matrix2 psi_adjugate(const BoundaryPoint& bp) noexcept { return adjugate2(psi_matrix(bp)); }

double sigma_alpha_sq(double alpha) {
  const double a = std::abs(alpha);
  if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::OutOfRange, "sigma_alpha^2 needs 0 < |alpha| < 1");
  return std::pow(2.0, 4.5) / (15.0 * std::sqrt(std::numbers::pi * a * (1.0 - a)));
}

double omega_n(const BoundaryPoint& bp, double gamma_m, double delta_m) {
  require_boundary(bp);
  // With |alpha| in {0, 1} exactly one of alpha, beta is nonzero.
  if (bp.alpha() != 0.0) return ratio_or_infinity(bp.alpha() * gamma_m, delta_m);
  return ratio_or_infinity(bp.beta() * delta_m, gamma_m);
}

double theta_scalar(const BoundaryPoint& bp, double omega) {
  if (std::isnan(omega) || std::abs(omega) < 1.0) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "theta needs |omega| >= 1, got " << omega;
    throw Error(ErrorCode::OutOfRange, msg.str());
  }
  if (std::isinf(omega)) return 0.0;
  const double w = std::abs(omega);
  return -(bp.alpha() + bp.beta()) * sgn(omega) / (w + std::sqrt(w * w - 1.0));
}

Matrix2 theta_matrix(double theta) {
  if (!(std::abs(theta) <= 1.0)) throw Error(ErrorCode::OutOfRange, "theta must satisfy |theta| <= 1");
  return Matrix2::symmetric(0.25, 0.25 * theta);
}

Matrix2 invert_spd2(const Matrix2& m) {
  const double det = det2(m);
  if (!(m.a11 > 0.0) || !(det > 1e-14 * (m.a11 * m.a22 + m.a12 * m.a21)))
    throw Error(ErrorCode::Singular, "matrix is not positive definite");
  return (1.0 / det) * adjugate2(m);
}

Matrix2 sqrt_spd2(const Matrix2& m) {
  // For 2x2 PSD M, (M + sqrt(det M) I)^2 = (tr M + 2 sqrt(det M)) M.
  const double det = det2(m);
  const double tr = m.trace();
  if (tr < 0.0 || det < -1e-14 * (m.a11 * m.a22 + m.a12 * m.a21))
    throw Error(ErrorCode::Singular, "matrix is not positive semidefinite");
  const double root_det = std::sqrt(std::max(det, 0.0));
  const double denom = std::sqrt(tr + 2.0 * root_det);
  if (denom == 0.0) return {};
  return (1.0 / denom) * (m + root_det * Matrix2::identity());
}

double LimitLaw::rate(long m, long s) const {
  if (case_tag == LimitCase::Interior) return static_cast<double>(s);
  const double g = gap(design, m);
  if (g == 0.0) throw Error(ErrorCode::RateUndefined, "gamma(m)^2 = delta(m)^2, so the boundary rate is undefined");
  return static_cast<double>(s) * std::sqrt(static_cast<double>(m)) * std::pow(g, -0.25);
}

Matrix2 LimitLaw::normalizer_at(long m) const {
  if (case_tag == LimitCase::Interior)
    throw Error(ErrorCode::OutOfRange, "the normalized form applies to boundary designs only");
  const BoundaryPoint& bp = design.boundary();
  return sqrt_spd2(theta_matrix(theta_scalar(bp, omega_n(bp, design.gamma_at(m), design.delta_at(m)))));
}

LimitLaw limit_law(const NearlyUnstableDesign& design, long m_probe) {
  const BoundaryPoint& bp = design.boundary();
  // gamma^2 = delta^2 on the boundary is reported as such, even though the
  // same design is also nonstationary at every index.
  if (design.case_tag() == LimitCase::Boundary && gap(design, m_probe) == 0.0)
    throw Error(ErrorCode::RateUndefined, "gamma(m)^2 = delta(m)^2 at the probe index");
  design.params_at(m_probe);
  if (design.case_tag() == LimitCase::Interior) {
    return LimitLaw{LimitCase::Interior,
                    std::abs(bp.alpha() * bp.beta()) * psi_adjugate(bp),
                    true,
                    std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(),
                    true,
                    false,
                    design};
  }

  const double w_probe = omega_n(bp, design.gamma_at(m_probe), design.delta_at(m_probe));
  const double w = omega_n(bp, design.gamma_at(4 * m_probe), design.delta_at(4 * m_probe));
  const double theta = theta_scalar(bp, w);
  LimitLaw law{LimitCase::Boundary, {}, false, w, theta, omega_close(w_probe, w), false, design};
  if (std::abs(w) == 1.0) {
    // Theta is singular here; only Theta^(1/2)-normalized errors have a limit.
    law.singular = true;
    law.normalized_only = true;
    law.covariance = Matrix2::identity();
  } else {
    law.covariance = invert_spd2(theta_matrix(theta));
  }
  return law;
}

double condition_statistic(const NearlyUnstableDesign& design, long m, long s) {
  const double dm = static_cast<double>(m);
  const double ds = static_cast<double>(s);
  if (design.case_tag() == LimitCase::Interior)
    return ds / std::sqrt(dm) * std::sqrt(std::abs(design.gamma_at(m)) + std::abs(design.delta_at(m)));
  return ds / dm * std::sqrt(gap(design, m));
}

Matrix2 expected_B(const ModelParams& p, long s) {
  if (s < 1) throw Error(ErrorCode::OutOfRange, "expected_B needs s >= 1");
  const double count = 0.5 * static_cast<double>(s) * static_cast<double>(s + 1);
  const double s2 = sigma_sq(p);
  return (count * s2) * Matrix2::symmetric(1.0, boundary_factors(p).product());
}

double information_scale(const NearlyUnstableDesign& design, long m, long s) {
  const double ds = static_cast<double>(s);
  return condition_statistic(design, m, s) / (ds * ds * ds);
}

Matrix2 information_limit(const NearlyUnstableDesign& design, long m_probe) {
  const BoundaryPoint& bp = design.boundary();
  if (design.case_tag() == LimitCase::Interior)
    return (1.0 / std::sqrt(32.0 * std::abs(bp.alpha() * bp.beta()))) * psi_matrix(bp);
  return theta_matrix(limit_law(design, m_probe).theta);
}

FisherScaleConstants fisher_constants(const ModelParams& p) {
  FisherScaleConstants c;
  c.sigma_sq_ab = sigma_sq(p);
  c.rho = rho_corr(p);
  c.sigma_alpha_sq = std::numeric_limits<double>::quiet_NaN();
  c.gamma_matrix = 2.0 * Matrix2::symmetric(1.0, -c.rho);
  c.info_exponent = 2.0;
  return c;
}

FisherScaleConstants fisher_constants(const NearlyUnstableDesign& design, long m) {
  FisherScaleConstants c = fisher_constants(design.params_at(m));
  if (design.case_tag() == LimitCase::Interior) {
    c.sigma_alpha_sq = sigma_alpha_sq(design.boundary().alpha());
    c.info_exponent = 2.5;
  } else {
    c.info_exponent = 3.0;
  }
  return c;
}

}  // namespace nusar
