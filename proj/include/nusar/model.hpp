#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nusar {

/// Coefficients of X(k,l) = alpha X(k-1,l) + beta X(k,l-1) + eps(k,l).
struct ModelParams {
  double alpha = 0.0;
  double beta = 0.0;

  /// |alpha| + |beta|; the field is stationary iff this is below one.
  double radius() const noexcept;
  bool is_stationary() const noexcept;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Throws NonStationary unless |alpha| + |beta| < 1.
void require_stationary(const ModelParams& p);

struct LatticeIndex {
  int i = 0;
  int j = 0;

  friend auto operator<=>(const LatticeIndex&, const LatticeIndex&) = default;
};

/// T(k,l) = {(i,j) : i + j >= 1, i <= k, j <= l}.
struct TriangleWindow {
  int k = 0;
  int l = 0;

  int sum() const noexcept { return k + l; }

  /// The split k = floor(s/2), l = ceil(s/2) used by every experiment.
  static TriangleWindow balanced(int s) noexcept { return {s / 2, s - s / 2}; }

  friend bool operator==(const TriangleWindow&, const TriangleWindow&) = default;
};

/// Points of the triangle, by anti-diagonal d = i + j and then by i.
std::vector<LatticeIndex> triangle_indices(TriangleWindow w);

/// The triangle plus every regressor (i-1,j), (i,j-1) it references, in the
/// same order. This is {(i,j) : 0 <= i + j <= s, i <= k, j <= l}.
std::vector<LatticeIndex> hull_indices(TriangleWindow w);

/// Addressing for values stored by anti-diagonal layers.
///
/// Layer e (0 <= e <= s) holds s - e + 1 points; offset o maps to
/// (i, j) = (e - l + o, l - o). The regressors of (e, o) are (e - 1, o) for
/// X(i-1,j) and (e - 1, o + 1) for X(i,j-1), so one layer is filled from the
/// previous one with a contiguous sweep.
class HullLayout {
 public:
  explicit HullLayout(TriangleWindow w) noexcept;

  TriangleWindow window() const noexcept { return window_; }
  int sum() const noexcept { return s_; }
  bool empty() const noexcept { return s_ <= 0; }

  /// Number of hull points, (s+1)(s+2)/2 (zero for an empty window).
  std::size_t size() const noexcept;
  /// Number of triangle points, s(s+1)/2.
  std::size_t triangle_size() const noexcept;

  std::size_t layer_size(int e) const noexcept { return static_cast<std::size_t>(s_ - e + 1); }
  std::size_t layer_start(int e) const noexcept;
  std::size_t index(int e, int o) const noexcept { return layer_start(e) + static_cast<std::size_t>(o); }

  LatticeIndex point(int e, int o) const noexcept { return {e - window_.l + o, window_.l - o}; }
  bool contains(LatticeIndex p) const noexcept;
  /// Hull position of p; p must be contained.
  std::size_t index_of(LatticeIndex p) const noexcept;
  /// Position of a triangle point (layer >= 1) in triangle-only storage.
  std::size_t triangle_index(int e, int o) const noexcept { return index(e, o) - layer_size(0); }

 private:
  TriangleWindow window_;
  int s_;
};

/// Realized field values on a window hull, optionally with the innovations
/// that drove the triangle part.
class Field {
 public:
  /// values: one per hull point in layer order; innovations: empty or one per
  /// triangle point in layer order (layers 1..s).
  Field(TriangleWindow w, std::vector<double> values, std::vector<double> innovations = {});

  TriangleWindow window() const noexcept { return layout_.window(); }
  const HullLayout& layout() const noexcept { return layout_; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> layer(int e) const noexcept;
  double value(int e, int o) const noexcept { return values_[layout_.index(e, o)]; }
  /// Throws MissingValues if p is outside the hull.
  double at(LatticeIndex p) const;

  bool has_innovations() const noexcept { return !innovations_.empty(); }
  std::span<const double> innovations() const noexcept { return innovations_; }
  double innovation(int e, int o) const noexcept { return innovations_[layout_.triangle_index(e, o)]; }
  /// Throws MissingInnovations if absent or p is not a triangle point.
  double innovation_at(LatticeIndex p) const;

  /// The same field multiplied by c (innovations scaled too).
  Field scaled(double c) const;

 private:
  HullLayout layout_;
  std::vector<double> values_;
  std::vector<double> innovations_;
};

/// Closed-form index schedules for gamma(m) and delta(m).
struct Schedule {
  enum class Kind { Constant, Log, Power };

  Kind kind = Kind::Constant;
  double c = 0.0;
  double p = 0.0;  // exponent for Power, must be < 1

  double operator()(double m) const noexcept;

  static Schedule constant(double c) noexcept { return {Kind::Constant, c, 0.0}; }
  static Schedule log(double c) noexcept { return {Kind::Log, c, 0.0}; }
  static Schedule power(double c, double p);

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

const char* to_string(Schedule::Kind kind) noexcept;
Schedule::Kind schedule_kind_from_string(const std::string& name);

/// A point with |alpha| + |beta| = 1, stored as alpha and the sign of beta so
/// the constraint holds exactly.
class BoundaryPoint {
 public:
  /// Throws OutOfRange if |alpha| > 1.
  BoundaryPoint(double alpha, int beta_sign);
  /// Throws OutOfRange unless |alpha| + |beta| = 1 to 1e-12.
  static BoundaryPoint from_pair(double alpha, double beta);

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept;
  int beta_sign() const noexcept { return beta_sign_; }

  friend bool operator==(const BoundaryPoint&, const BoundaryPoint&) = default;

 private:
  double alpha_;
  int beta_sign_;
};

enum class LimitCase { Interior, Boundary };

const char* to_string(LimitCase c) noexcept;

/// alpha_m = alpha - gamma(m)/m, beta_m = beta - delta(m)/m approaching a
/// boundary point.
class NearlyUnstableDesign {
 public:
  NearlyUnstableDesign(BoundaryPoint boundary, Schedule gamma, Schedule delta);

  const BoundaryPoint& boundary() const noexcept { return boundary_; }
  const Schedule& gamma() const noexcept { return gamma_; }
  const Schedule& delta() const noexcept { return delta_; }

  /// Interior iff 0 < |alpha| < 1.
  LimitCase case_tag() const noexcept;

  double gamma_at(long m) const noexcept { return gamma_(static_cast<double>(m)); }
  double delta_at(long m) const noexcept { return delta_(static_cast<double>(m)); }

  /// Throws OutOfRange for m < 1 and NonStationary when m is too small for
  /// the schedules.
  ModelParams params_at(long m) const;

 private:
  BoundaryPoint boundary_;
  Schedule gamma_;
  Schedule delta_;
};

}  // namespace nusar
