#pragma once

#include <span>
#include <string>

#include "nusar/covariance.hpp"
#include "nusar/linalg.hpp"
#include "nusar/model.hpp"
#include "nusar/rng.hpp"

namespace nusar {

/// How the stationary law is reached on the hull.
///
/// BoundaryCholesky colors the d = 0 layer with the Cholesky factor of its
/// covariance and runs the recursion above it. FullCholesky colors the whole
/// hull at once (validation only). TruncatedSeries evaluates every hull value
/// as its own moving-average sum cut at depth `margin`. SeriesBoundary runs
/// the recursion from zero starting `margin` layers below the hull, which gives
/// the same depth-`margin` truncation on layer 0 and the exact recursion above.
struct SimMethod {
  enum class Kind { BoundaryCholesky, FullCholesky, TruncatedSeries, SeriesBoundary };

  Kind kind = Kind::BoundaryCholesky;
  int margin = 0;

  static SimMethod boundary_cholesky() noexcept { return {Kind::BoundaryCholesky, 0}; }
  static SimMethod full_cholesky() noexcept { return {Kind::FullCholesky, 0}; }
  static SimMethod truncated_series(int margin);
  static SimMethod series_boundary(int margin);

  bool uses_cholesky() const noexcept { return kind == Kind::BoundaryCholesky || kind == Kind::FullCholesky; }

  friend bool operator==(const SimMethod&, const SimMethod&) = default;
};

const char* to_string(SimMethod::Kind k) noexcept;
SimMethod::Kind sim_method_kind_from_string(const std::string& name);

/// BoundaryCholesky for Gaussian innovations, otherwise SeriesBoundary with the
/// smallest margin whose tail variance bound is at most 1e-12.
SimMethod default_method(const ModelParams& p, InnovationDist dist);

/// Sampler for one (params, window, method, dist). The Cholesky factor is
/// built once; sample() is const and may be called from many threads.
class FieldSampler {
 public:
  FieldSampler(ModelParams p, TriangleWindow w, SimMethod method, InnovationDist dist);

  const ModelParams& params() const noexcept { return params_; }
  TriangleWindow window() const noexcept { return window_; }
  SimMethod method() const noexcept { return method_; }
  InnovationDist dist() const noexcept { return dist_; }
  /// Jitter the Cholesky step had to add (0 for the series methods).
  double applied_jitter() const noexcept { return factor_.jitter; }

  /// Draw t of `stream` is consumed at position t of the method's draw order,
  /// independent of the stream's own counter.
  Field sample(const RngStream& stream) const;

 private:
  Field sample_boundary(const RngStream& stream) const;
  Field sample_full(const RngStream& stream) const;
  Field sample_series(const RngStream& stream, bool recursion_above) const;

  ModelParams params_;
  TriangleWindow window_;
  SimMethod method_;
  InnovationDist dist_;
  CholeskyResult factor_;
};

Field simulate(const ModelParams& p, TriangleWindow w, SimMethod method, InnovationDist dist,
               const RngStream& stream);

/// The deterministic recursion from a given d = 0 layer (s + 1 values, offset
/// order). innovations: triangle values in layer order, or empty for zeros.
Field propagate_from_boundary(const ModelParams& p, TriangleWindow w, std::span<const double> boundary,
                              std::span<const double> innovations = {});

/// Largest |X - alpha X(i-1,j) - beta X(i,j-1) - eps| over the triangle.
double max_recursion_residual(const ModelParams& p, const Field& f);

}  // namespace nusar
