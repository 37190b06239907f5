#include "nusar/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nusar/error.hpp"
#include "nusar/tail_bound.hpp"

namespace nusar {

namespace {

constexpr double kNonGaussianTailTol = 1e-12;

void require_nonempty(TriangleWindow w) {
  if (w.sum() < 1) throw Error(ErrorCode::OutOfRange, "simulation needs a window with k + l >= 1");
}

// cur[o] = a prev[o] + b prev[o + 1] + eps[o]; prev has one more entry than cur.
void sweep(double a, double b, std::span<const double> prev, std::span<double> cur,
           std::span<const double> eps) noexcept {
  for (std::size_t o = 0; o < cur.size(); ++o) cur[o] = a * prev[o] + b * prev[o + 1] + (eps.empty() ? 0.0 : eps[o]);
}

}  // namespace

SimMethod SimMethod::truncated_series(int margin) {
  if (margin < 0) throw Error(ErrorCode::OutOfRange, "series margin must be nonnegative");
  return {Kind::TruncatedSeries, margin};
}

SimMethod SimMethod::series_boundary(int margin) {
  if (margin < 0) throw Error(ErrorCode::OutOfRange, "series margin must be nonnegative");
  return {Kind::SeriesBoundary, margin};
}

const char* to_string(SimMethod::Kind k) noexcept {
  switch (k) {
    case SimMethod::Kind::BoundaryCholesky: return "boundary_cholesky";
    case SimMethod::Kind::FullCholesky: return "full_cholesky";
    case SimMethod::Kind::TruncatedSeries: return "truncated_series";
    case SimMethod::Kind::SeriesBoundary: return "series_boundary";
  }
  return "boundary_cholesky";
}

SimMethod::Kind sim_method_kind_from_string(const std::string& name) {
  if (name == "boundary_cholesky") return SimMethod::Kind::BoundaryCholesky;
  if (name == "full_cholesky") return SimMethod::Kind::FullCholesky;
  if (name == "truncated_series") return SimMethod::Kind::TruncatedSeries;
  if (name == "series_boundary") return SimMethod::Kind::SeriesBoundary;
  throw Error(ErrorCode::InvalidConfig, "unknown simulation method '" + name + "'");
}

SimMethod default_method(const ModelParams& p, InnovationDist dist) {
  require_stationary(p);
  if (dist == InnovationDist::Gaussian) return SimMethod::boundary_cholesky();
  return SimMethod::series_boundary(margin_for_tolerance(p.radius(), kNonGaussianTailTol));
}

FieldSampler::FieldSampler(ModelParams p, TriangleWindow w, SimMethod method, InnovationDist dist)
    : params_(p), window_(w), method_(method), dist_(dist) {
  require_stationary(p);
  require_nonempty(w);
  if (method.uses_cholesky() && dist != InnovationDist::Gaussian)
    throw Error(ErrorCode::MethodUnsupported,
                std::string("Cholesky coloring is exact only for Gaussian innovations, not ") + to_string(dist));

  const CovKernel kernel(p);
  const HullLayout layout(w);
  if (method.kind == SimMethod::Kind::BoundaryCholesky) {
    // Layer 0 points differ by (d, -d); the covariance is Toeplitz in the offset.
    const std::size_t n = layout.layer_size(0);
    DenseMatrix cov(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        const int d = static_cast<int>(r) - static_cast<int>(c);
        cov(r, c) = kernel(d, -d);
      }
    factor_ = chol_spd(cov);
  } else if (method.kind == SimMethod::Kind::FullCholesky) {
    const auto pts = hull_indices(w);
    const std::size_t n = pts.size();
    DenseMatrix cov(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c <= r; ++c) {
        const double v = kernel(pts[r].i - pts[c].i, pts[r].j - pts[c].j);
        cov(r, c) = v;
        cov(c, r) = v;
      }
    factor_ = chol_spd(cov);
  }
}

Field FieldSampler::sample(const RngStream& stream) const {
  switch (method_.kind) {
    case SimMethod::Kind::BoundaryCholesky: return sample_boundary(stream);
    case SimMethod::Kind::FullCholesky: return sample_full(stream);
    case SimMethod::Kind::TruncatedSeries: return sample_series(stream, false);
    case SimMethod::Kind::SeriesBoundary: return sample_series(stream, true);
  }
  return sample_boundary(stream);
}

Field FieldSampler::sample_boundary(const RngStream& stream) const {
  const HullLayout layout(window_);
  const std::size_t n0 = layout.layer_size(0);
  std::vector<double> z(n0);
  for (std::size_t t = 0; t < n0; ++t) z[t] = stream.gaussian_at(t);
  std::vector<double> boundary(n0);
  lower_mul(factor_.lower, z, boundary);

  // The boundary is a function of innovations on i + j <= 0 only, so drawing
  // the triangle innovations independently keeps the joint law exact.
  std::vector<double> eps(layout.triangle_size());
  for (std::size_t t = 0; t < eps.size(); ++t) eps[t] = stream.gaussian_at(n0 + t);
  return propagate_from_boundary(params_, window_, boundary, eps);
}

Field FieldSampler::sample_full(const RngStream& stream) const {
  const HullLayout layout(window_);
  const std::size_t n = layout.size();
  std::vector<double> z(n);
  for (std::size_t t = 0; t < n; ++t) z[t] = stream.gaussian_at(t);
  // hull_indices() enumerates in storage order, so L z is already laid out.
  std::vector<double> values(n);
  lower_mul(factor_.lower, z, values);

  const int s = layout.sum();
  std::vector<double> eps(layout.triangle_size());
  for (int e = 1; e <= s; ++e)
    for (int o = 0; o < static_cast<int>(layout.layer_size(e)); ++o)
      eps[layout.triangle_index(e, o)] = values[layout.index(e, o)] - params_.alpha * values[layout.index(e - 1, o)] -
                                         params_.beta * values[layout.index(e - 1, o + 1)];
  return Field(window_, std::move(values), std::move(eps));
}

Field FieldSampler::sample_series(const RngStream& stream, bool recursion_above) const {
  const HullLayout layout(window_);
  const int s = layout.sum();
  const int margin = method_.margin;
  const auto layer_size = [s](int e) { return static_cast<std::size_t>(s - e + 1); };

  // Innovations on layers -margin..s of {i <= k, j <= l}, layer-major.
  std::vector<std::size_t> start(static_cast<std::size_t>(margin + s) + 2, 0);
  for (int e = -margin; e <= s; ++e) {
    const auto idx = static_cast<std::size_t>(e + margin);
    start[idx + 1] = start[idx] + layer_size(e);
  }
  std::vector<double> draws(start.back());
  for (std::size_t t = 0; t < draws.size(); ++t) draws[t] = stream.draw_at(t, dist_);
  const auto eps_layer = [&](int e) {
    return std::span<const double>(draws).subspan(start[static_cast<std::size_t>(e + margin)], layer_size(e));
  };

  std::vector<double> values(layout.size());
  std::vector<double> eps(layout.triangle_size());
  for (int e = 1; e <= s; ++e) {
    const auto src = eps_layer(e);
    std::copy(src.begin(), src.end(), eps.begin() + static_cast<std::ptrdiff_t>(layout.triangle_index(e, 0)));
  }

  const double a = params_.alpha;
  const double b = params_.beta;
  if (recursion_above) {
    std::vector<double> prev(eps_layer(-margin).begin(), eps_layer(-margin).end());
    std::vector<double> cur;
    for (int e = -margin + 1; e <= 0; ++e) {
      cur.resize(layer_size(e));
      sweep(a, b, prev, cur, eps_layer(e));
      std::swap(prev, cur);
    }
    std::copy(prev.begin(), prev.end(), values.begin());
    std::span<double> all(values);
    for (int e = 1; e <= s; ++e)
      sweep(a, b, all.subspan(layout.layer_start(e - 1), layout.layer_size(e - 1)),
            all.subspan(layout.layer_start(e), layout.layer_size(e)), eps_layer(e));
    return Field(window_, std::move(values), std::move(eps));
  }

  // Literal truncated moving average: X(i,j) = sum_{u+v<=margin} W(u,v) eps(i-u, j-v)
  // with W(u,v) = C(u+v,u) a^u b^v.
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(margin) + 1);
  weights[0] = {1.0};
  for (int t = 1; t <= margin; ++t) {
    auto& row = weights[static_cast<std::size_t>(t)];
    const auto& below = weights[static_cast<std::size_t>(t - 1)];
    row.assign(static_cast<std::size_t>(t) + 1, 0.0);
    for (int u = 0; u <= t; ++u)
      row[static_cast<std::size_t>(u)] = (u > 0 ? a * below[static_cast<std::size_t>(u - 1)] : 0.0) +
                                         (u < t ? b * below[static_cast<std::size_t>(u)] : 0.0);
  }
  const int l = window_.l;
  for (int e = 0; e <= s; ++e)
    for (int o = 0; o < static_cast<int>(layout.layer_size(e)); ++o) {
      const LatticeIndex p = layout.point(e, o);
      double acc = 0.0;
      for (int t = 0; t <= margin; ++t)
        for (int u = 0; u <= t; ++u) {
          const int j2 = p.j - (t - u);
          acc += weights[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)] *
                 eps_layer(e - t)[static_cast<std::size_t>(l - j2)];
        }
      values[layout.index(e, o)] = acc;
    }
  return Field(window_, std::move(values), std::move(eps));
}

Field simulate(const ModelParams& p, TriangleWindow w, SimMethod method, InnovationDist dist,
               const RngStream& stream) {
  return FieldSampler(p, w, method, dist).sample(stream);
}

Field propagate_from_boundary(const ModelParams& p, TriangleWindow w, std::span<const double> boundary,
                              std::span<const double> innovations) {
  require_nonempty(w);
  const HullLayout layout(w);
  if (boundary.size() != layout.layer_size(0)) {
    std::ostringstream msg;
    msg << "boundary layer needs " << layout.layer_size(0) << " values, got " << boundary.size();
    throw Error(ErrorCode::MissingValues, msg.str());
  }
  if (!innovations.empty() && innovations.size() != layout.triangle_size()) {
    std::ostringstream msg;
    msg << "innovations must cover " << layout.triangle_size() << " triangle points, got " << innovations.size();
    throw Error(ErrorCode::MissingInnovations, msg.str());
  }
  std::vector<double> values(layout.size());
  std::copy(boundary.begin(), boundary.end(), values.begin());
  std::span<double> all(values);
  for (int e = 1; e <= layout.sum(); ++e) {
    const auto eps = innovations.empty() ? innovations
                                         : innovations.subspan(layout.triangle_index(e, 0), layout.layer_size(e));
    sweep(p.alpha, p.beta, all.subspan(layout.layer_start(e - 1), layout.layer_size(e - 1)),
          all.subspan(layout.layer_start(e), layout.layer_size(e)), eps);
  }
  return Field(w, std::move(values), std::vector<double>(innovations.begin(), innovations.end()));
}

double max_recursion_residual(const ModelParams& p, const Field& f) {
  if (!f.has_innovations()) throw Error(ErrorCode::MissingInnovations, "residual check needs innovations");
  const HullLayout& layout = f.layout();
  double worst = 0.0;
  for (int e = 1; e <= layout.sum(); ++e)
    for (int o = 0; o < static_cast<int>(layout.layer_size(e)); ++o) {
      const double r = f.value(e, o) - p.alpha * f.value(e - 1, o) - p.beta * f.value(e - 1, o + 1) - f.innovation(e, o);
      worst = std::max(worst, std::abs(r));
    }
  return worst;
}

}  // namespace nusar
