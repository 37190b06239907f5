#include "nusar/estimate.hpp"

#include <cmath>
#include <sstream>

#include "nusar/error.hpp"

namespace nusar {

namespace {

// Neumaier compensated accumulator.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) noexcept {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const noexcept { return sum + comp; }
};

struct Accumulators {
  KahanSum b11, b12, b22, c1, c2, a1, a2;

  void add(double x1, double x2, double y) noexcept {
    b11.add(x1 * x1);
    b12.add(x1 * x2);
    b22.add(x2 * x2);
    c1.add(x1 * y);
    c2.add(x2 * y);
  }
  void add_score(double x1, double x2, double eps) noexcept {
    a1.add(x1 * eps);
    a2.add(x2 * eps);
  }
};

}  // namespace

WindowSums window_sums(const Field& f, TriangleWindow w) {
  Accumulators acc;
  const bool with_eps = f.has_innovations();
  if (w == f.window()) {
    const HullLayout& layout = f.layout();
    for (int e = 1; e <= layout.sum(); ++e) {
      const auto prev = f.layer(e - 1);
      const auto cur = f.layer(e);
      for (std::size_t o = 0; o < cur.size(); ++o) {
        acc.add(prev[o], prev[o + 1], cur[o]);
        if (with_eps) acc.add_score(prev[o], prev[o + 1], f.innovation(e, static_cast<int>(o)));
      }
    }
  } else {
    for (const LatticeIndex p : triangle_indices(w)) {
      const double x1 = f.at({p.i - 1, p.j});
      const double x2 = f.at({p.i, p.j - 1});
      acc.add(x1, x2, f.at(p));
      if (with_eps) acc.add_score(x1, x2, f.innovation_at(p));
    }
  }
  WindowSums out;
  const double b12 = acc.b12.value();
  out.B = {acc.b11.value(), b12, b12, acc.b22.value()};
  out.C = {acc.c1.value(), acc.c2.value()};
  if (with_eps) out.A = Vec2{acc.a1.value(), acc.a2.value()};
  return out;
}

NormalEquations normal_equations(const Field& f, TriangleWindow w) {
  const WindowSums s = window_sums(f, w);
  return {s.B, s.C};
}

Vec2 score_vector(const Field& f, TriangleWindow w) {
  if (!f.has_innovations()) throw Error(ErrorCode::MissingInnovations, "score vector needs the innovations");
  return *window_sums(f, w).A;
}

bool is_singular_design(const Matrix2& B) noexcept {
  return std::abs(det2(B)) <= 1e-12 * (B.a11 * B.a22 + B.a12 * B.a12);
}

EstimateResult solve_normal_equations(const WindowSums& sums) {
  EstimateResult r;
  r.B = sums.B;
  r.C = sums.C;
  r.A = sums.A;
  r.detB = det2(sums.B);
  if (is_singular_design(sums.B)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "normal-equation matrix is singular (det B = " << r.detB << ")";
    throw Error(ErrorCode::SingularDesign, msg.str());
  }
  const Vec2 num = adjugate2(sums.B) * sums.C;
  r.alpha_hat = num[0] / r.detB;
  r.beta_hat = num[1] / r.detB;
  return r;
}

EstimateResult lse(const Field& f, TriangleWindow w) { return solve_normal_equations(window_sums(f, w)); }

}  // namespace nusar
