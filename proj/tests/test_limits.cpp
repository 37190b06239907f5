#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "nusar/covariance.hpp"
#include "nusar/error.hpp"
#include "nusar/limits.hpp"
#include "oracles.hpp"

using namespace nusar;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

void check_close(const Matrix2& a, const Matrix2& b, double tol) {
  CHECK(std::abs(a.a11 - b.a11) < tol);
  CHECK(std::abs(a.a12 - b.a12) < tol);
  CHECK(std::abs(a.a21 - b.a21) < tol);
  CHECK(std::abs(a.a22 - b.a22) < tol);
}

NearlyUnstableDesign design(double a, double b, Schedule g, Schedule d) {
  return NearlyUnstableDesign(BoundaryPoint::from_pair(a, b), g, d);
}

const double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_SUITE("limits") {
  TEST_CASE("psi matrices") {
    CHECK(psi_matrix(BoundaryPoint::from_pair(0.5, 0.5)) == Matrix2{1, 1, 1, 1});
    CHECK(psi_adjugate(BoundaryPoint::from_pair(0.5, 0.5)) == Matrix2{1, -1, -1, 1});
    CHECK(psi_matrix(BoundaryPoint::from_pair(0.5, -0.5)) == Matrix2{1, -1, -1, 1});
    CHECK(psi_matrix(BoundaryPoint::from_pair(1, 0)) == Matrix2::identity());
    for (double a : {-0.9, -0.3, 0.2, 0.7})
      for (int sign : {-1, 1}) {
        const BoundaryPoint bp(a, sign);
        CHECK(psi_adjugate(bp) == adjugate2(psi_matrix(bp)));
        CHECK(det2(psi_matrix(bp)) == 0.0);
      }
  }

  TEST_CASE("sigma_alpha_sq") {
    CHECK(sigma_alpha_sq(0.5) == doctest::Approx(std::pow(2.0, 4.5) / (15.0 * std::sqrt(std::numbers::pi / 4))).epsilon(1e-15));
    // The tabulated 1.7021564 is off in the sixth digit; the formula gives 1.7021537.
    CHECK(sigma_alpha_sq(0.5) == doctest::Approx(1.7021537).epsilon(1e-7));
    CHECK(sigma_alpha_sq(0.5) == doctest::Approx(1.7021564).epsilon(2e-6));
    CHECK(sigma_alpha_sq(-0.5) == sigma_alpha_sq(0.5));
    for (double a = 0.05; a < 1.0; a += 0.05) CHECK(sigma_alpha_sq(a) >= sigma_alpha_sq(0.5));
    CHECK(code_of([] { sigma_alpha_sq(1.0); }) == ErrorCode::OutOfRange);
    CHECK(code_of([] { sigma_alpha_sq(0.0); }) == ErrorCode::OutOfRange);
  }

  TEST_CASE("omega examples") {
    CHECK(omega_n(BoundaryPoint(1, 1), 2, 1) == 2.0);
    CHECK(omega_n(BoundaryPoint(0, 1), 1, 2) == 2.0);
    CHECK(omega_n(BoundaryPoint(1, 1), 1, 0) == kInf);
    CHECK(omega_n(BoundaryPoint(-1, 1), 1, 0) == -kInf);
    CHECK(omega_n(BoundaryPoint(0, -1), 0, 3) == -kInf);
    // Only the active term matters: beta = 0 ignores delta/gamma.
    CHECK(omega_n(BoundaryPoint(1, 1), 0, 5) == 0.0);
    CHECK(code_of([] { omega_n(BoundaryPoint(1, 1), 0, 0); }) == ErrorCode::Indeterminate);
    CHECK(code_of([] { omega_n(BoundaryPoint(0.5, 1), 1, 1); }) == ErrorCode::OutOfRange);
  }

  TEST_CASE("theta examples") {
    const BoundaryPoint bp(1, 1);
    CHECK(theta_scalar(bp, 2) == doctest::Approx(-0.2679492).epsilon(1e-7));
    CHECK(theta_scalar(bp, 2) == doctest::Approx(-(2 - std::sqrt(3.0))).epsilon(1e-15));
    CHECK(theta_scalar(bp, -2) == doctest::Approx(0.2679492).epsilon(1e-7));
    CHECK(theta_scalar(bp, kInf) == 0.0);
    CHECK(theta_scalar(bp, -kInf) == 0.0);
    CHECK(theta_scalar(bp, 1.0) == -1.0);
    CHECK(theta_scalar(BoundaryPoint(0, -1), 3.0) == doctest::Approx(1.0 / (3 + std::sqrt(8.0))).epsilon(1e-15));
    CHECK(code_of([&] { theta_scalar(bp, 0.5); }) == ErrorCode::OutOfRange);
    // Rounding just above one takes the finite branch.
    CHECK(std::abs(theta_scalar(bp, 1.0 + 1e-12) + 1.0) < 1e-5);
  }

  TEST_CASE("theta matrix inverse and square root") {
    const double th = -(2 - std::sqrt(3.0));
    const Matrix2 inv = invert_spd2(theta_matrix(th));
    CHECK(inv.a11 == doctest::Approx(4.3094011).epsilon(1e-7));
    CHECK(inv.a12 == doctest::Approx(1.1547005).epsilon(1e-7));
    CHECK(inv.a21 == inv.a12);
    CHECK(invert_spd2(theta_matrix(0)) == 4.0 * Matrix2::identity());
    check_close(sqrt_spd2(theta_matrix(0)), 0.5 * Matrix2::identity(), 1e-15);
    CHECK(code_of([] { invert_spd2(theta_matrix(1)); }) == ErrorCode::Singular);
    CHECK(code_of([] { theta_matrix(1.5); }) == ErrorCode::OutOfRange);
  }

  TEST_CASE("inverse and square root identities") {
    for (double th = -0.99; th <= 0.99; th += 0.01) {
      const Matrix2 t = theta_matrix(th);
      check_close(t * invert_spd2(t), Matrix2::identity(), 1e-12);
      const Matrix2 r = sqrt_spd2(t);
      CHECK(r.a12 == r.a21);
      CHECK(r.a11 >= 0.0);
      CHECK(det2(r) >= 0.0);
      check_close(r * r, t, 1e-12);
    }
    oracle::Gen gen(31);
    for (int n = 0; n < 200; ++n) {
      const double a = gen.uniform(0.1, 5), c = gen.uniform(0.1, 5);
      const double b = gen.uniform(-0.99, 0.99) * std::sqrt(a * c);
      const Matrix2 m{a, b, b, c};
      check_close(sqrt_spd2(m) * sqrt_spd2(m), m, 1e-12 * (a + c));
      check_close(m * invert_spd2(m), Matrix2::identity(), 1e-9);
    }
    check_close(sqrt_spd2(theta_matrix(1)) * sqrt_spd2(theta_matrix(1)), theta_matrix(1), 1e-15);
  }

  TEST_CASE("interior limit law") {
    const LimitLaw law = limit_law(design(0.5, 0.5, Schedule::constant(1), Schedule::constant(1)), 100);
    CHECK(law.case_tag == LimitCase::Interior);
    CHECK(law.singular);
    CHECK(law.covariance == 0.25 * Matrix2{1, -1, -1, 1});
    CHECK(law.rate(16, 64) == 64.0);
    CHECK(std::isnan(law.omega));
    CHECK(code_of([&] { law.normalizer_at(10); }) == ErrorCode::OutOfRange);
  }

  TEST_CASE("boundary limit law") {
    const LimitLaw law = limit_law(design(1, 0, Schedule::constant(2), Schedule::constant(1)), 16);
    CHECK(law.case_tag == LimitCase::Boundary);
    CHECK_FALSE(law.singular);
    CHECK(law.omega == 2.0);
    CHECK(law.omega_settled);
    CHECK_FALSE(law.normalized_only);
    CHECK(law.rate(16, 64) == doctest::Approx(194.5177).epsilon(2e-6));
    CHECK(law.rate(16, 64) == doctest::Approx(256.0 * std::pow(3.0, -0.25)).epsilon(1e-15));
    check_close(law.covariance, Matrix2{4.3094011, 1.1547005, 1.1547005, 4.3094011}, 1e-7);
    check_close(law.normalizer_at(16) * law.normalizer_at(16), theta_matrix(law.theta), 1e-15);

    CHECK(code_of([] { limit_law(design(1, 0, Schedule::constant(1), Schedule::constant(1)), 16); }) ==
          ErrorCode::RateUndefined);
    const LimitLaw flip = limit_law(design(0, 1, Schedule::constant(1), Schedule::constant(2)), 16);
    CHECK(flip.omega == 2.0);
  }

  TEST_CASE("omega that keeps drifting is flagged") {
    const LimitLaw law = limit_law(design(1, 0, Schedule::log(2), Schedule::constant(1)), 100);
    CHECK_FALSE(law.omega_settled);
    CHECK(law.omega == doctest::Approx(2 * std::log(400.0)).epsilon(1e-15));
  }

  TEST_CASE("unit omega gives the normalized form only") {
    // gamma(m) = 20/sqrt(m) equals delta = 1 at m = 400, the probe 4 * 100.
    const NearlyUnstableDesign d = design(1, 0, Schedule::power(20, -0.5), Schedule::constant(1));
    const LimitLaw law = limit_law(d, 100);
    CHECK(law.omega == 1.0);
    CHECK(law.theta == -1.0);
    CHECK(law.singular);
    CHECK(law.normalized_only);
    CHECK_FALSE(law.omega_settled);
    CHECK(law.covariance == Matrix2::identity());
    CHECK(law.rate(100, 1000) > 0.0);
  }

  TEST_CASE("condition statistic examples") {
    CHECK(condition_statistic(design(0.5, 0.5, Schedule::constant(1), Schedule::constant(1)), 100, 100) ==
          doctest::Approx(14.142136).epsilon(1e-7));
    const NearlyUnstableDesign b = design(1, 0, Schedule::constant(2), Schedule::constant(1));
    CHECK(condition_statistic(b, 16, 64) == doctest::Approx(6.9282032).epsilon(1e-7));
    for (long m : {4L, 64L, 1024L}) CHECK(condition_statistic(b, m, m) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
    CHECK(information_scale(b, 16, 64) == doctest::Approx(6.9282032 / (64.0 * 64 * 64)).epsilon(1e-7));
  }

  TEST_CASE("expected B examples") {
    check_close(expected_B({0.25, 0.25}, 2), Matrix2{3.4641016, 0.2487113, 0.2487113, 3.4641016}, 1e-7);
    CHECK(expected_B({0, 0}, 7) == 28.0 * Matrix2::identity());
    CHECK(code_of([] { expected_B({0.7, 0.3}, 2); }) == ErrorCode::NonStationary);
  }

  TEST_CASE("expected B equals the sum over the triangle") {
    oracle::Gen gen(32);
    for (int n = 0; n < 30; ++n) {
      const ModelParams p = gen.params(0.95);
      const int s = gen.integer(1, 30);
      const CovKernel kernel(p);
      double b11 = 0, b12 = 0;
      for (const LatticeIndex q : triangle_indices(TriangleWindow::balanced(s))) {
        (void)q;
        b11 += kernel(0, 0);
        b12 += kernel(-1, 1);
      }
      const Matrix2 e = expected_B(p, s);
      CHECK(e.a11 == doctest::Approx(b11).epsilon(1e-12));
      CHECK(e.a12 == doctest::Approx(b12).epsilon(1e-12));
      CHECK(boundary_factors(p).product() == doctest::Approx(kernel(1, -1) / kernel(0, 0)).epsilon(1e-12));
    }
  }

  TEST_CASE("anti-diagonal correlation tends to theta") {
    const NearlyUnstableDesign d = design(1, 0, Schedule::constant(2), Schedule::constant(1));
    const double theta = theta_scalar(d.boundary(), 2.0);
    double last = 1.0;
    for (long m : {32L, 128L, 512L}) {
      const double gap = std::abs(boundary_factors(d.params_at(m)).product() - theta);
      CHECK(gap < last);
      last = gap;
    }
    CHECK(last < 0.01);
  }

  TEST_CASE("scaled expected information approaches its limit") {
    const auto deviation = [](const NearlyUnstableDesign& d, long m, long s) {
      const Matrix2 scaled = information_scale(d, m, s) * expected_B(d.params_at(m), s);
      const Matrix2 target = information_limit(d, m);
      return (scaled - target).frobenius() / target.frobenius();
    };
    const NearlyUnstableDesign in = design(0.5, 0.5, Schedule::constant(1), Schedule::constant(1));
    check_close(information_limit(in, 64), 0.3535534 * Matrix2{1, 1, 1, 1}, 1e-7);
    CHECK(deviation(in, 256, 256) < deviation(in, 64, 64));

    const NearlyUnstableDesign bd = design(1, 0, Schedule::constant(2), Schedule::constant(1));
    CHECK(deviation(bd, 256, 1024) < deviation(bd, 16, 32));
    CHECK(deviation(bd, 256, 1024) < 0.05);
  }

  TEST_CASE("fisher constants") {
    const FisherScaleConstants stable = fisher_constants({0.25, 0.25});
    CHECK(stable.info_exponent == 2.0);
    CHECK(std::isnan(stable.sigma_alpha_sq));
    CHECK(stable.sigma_sq_ab == doctest::Approx(1.1547005).epsilon(1e-7));
    CHECK(stable.gamma_matrix == 2.0 * Matrix2::symmetric(1.0, -stable.rho));

    const FisherScaleConstants in = fisher_constants(design(0.5, 0.5, Schedule::constant(1), Schedule::constant(1)), 100);
    CHECK(in.info_exponent == 2.5);
    CHECK(in.sigma_alpha_sq == sigma_alpha_sq(0.5));
    CHECK(fisher_constants(design(1, 0, Schedule::constant(2), Schedule::constant(1)), 100).info_exponent == 3.0);
  }
}
