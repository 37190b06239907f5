#include "nusar/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nusar/error.hpp"

namespace nusar {

double ModelParams::radius() const noexcept { return std::abs(alpha) + std::abs(beta); }

bool ModelParams::is_stationary() const noexcept {
  return std::isfinite(alpha) && std::isfinite(beta) && radius() < 1.0;
}

void require_stationary(const ModelParams& p) {
  if (!p.is_stationary()) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "|alpha| + |beta| must be < 1 (alpha=" << p.alpha << ", beta=" << p.beta << ")";
    throw Error(ErrorCode::NonStationary, msg.str());
  }
}

std::vector<LatticeIndex> triangle_indices(TriangleWindow w) {
  std::vector<LatticeIndex> out;
  const int s = w.sum();
  if (s <= 0) return out;
  out.reserve(static_cast<std::size_t>(s) * static_cast<std::size_t>(s + 1) / 2);
  for (int d = 1; d <= s; ++d)
    for (int i = d - w.l; i <= w.k; ++i) out.push_back({i, d - i});
  return out;
}

std::vector<LatticeIndex> hull_indices(TriangleWindow w) {
  std::vector<LatticeIndex> out;
  const int s = w.sum();
  if (s <= 0) return out;
  out.reserve(static_cast<std::size_t>(s + 1) * static_cast<std::size_t>(s + 2) / 2);
  for (int d = 0; d <= s; ++d)
    for (int i = d - w.l; i <= w.k; ++i) out.push_back({i, d - i});
  return out;
}

HullLayout::HullLayout(TriangleWindow w) noexcept : window_(w), s_(w.sum()) {}

std::size_t HullLayout::size() const noexcept {
  if (s_ <= 0) return 0;
  const auto s = static_cast<std::size_t>(s_);
  return (s + 1) * (s + 2) / 2;
}

std::size_t HullLayout::triangle_size() const noexcept {
  if (s_ <= 0) return 0;
  const auto s = static_cast<std::size_t>(s_);
  return s * (s + 1) / 2;
}

std::size_t HullLayout::layer_start(int e) const noexcept {
  const auto ue = static_cast<std::size_t>(e);
  const auto s = static_cast<std::size_t>(s_);
  return ue * (s + 1) - ue * (ue - (ue > 0 ? 1 : 0)) / 2;
}

bool HullLayout::contains(LatticeIndex p) const noexcept {
  const int e = p.i + p.j;
  return s_ > 0 && e >= 0 && e <= s_ && p.i <= window_.k && p.j <= window_.l;
}

std::size_t HullLayout::index_of(LatticeIndex p) const noexcept {
  return index(p.i + p.j, window_.l - p.j);
}

Field::Field(TriangleWindow w, std::vector<double> values, std::vector<double> innovations)
    : layout_(w), values_(std::move(values)), innovations_(std::move(innovations)) {
  if (values_.size() != layout_.size()) {
    std::ostringstream msg;
    msg << "field for window (" << w.k << "," << w.l << ") needs " << layout_.size()
        << " hull values, got " << values_.size();
    throw Error(ErrorCode::MissingValues, msg.str());
  }
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); }))
    throw Error(ErrorCode::MissingValues, "field contains non-finite values");
  if (!innovations_.empty() && innovations_.size() != layout_.triangle_size()) {
    std::ostringstream msg;
    msg << "innovations must cover the " << layout_.triangle_size() << " triangle points, got "
        << innovations_.size();
    throw Error(ErrorCode::MissingInnovations, msg.str());
  }
}

std::span<const double> Field::layer(int e) const noexcept {
  return std::span<const double>(values_).subspan(layout_.layer_start(e), layout_.layer_size(e));
}

double Field::at(LatticeIndex p) const {
  if (!layout_.contains(p)) {
    std::ostringstream msg;
    msg << "no value at (" << p.i << "," << p.j << ")";
    throw Error(ErrorCode::MissingValues, msg.str());
  }
  return values_[layout_.index_of(p)];
}

double Field::innovation_at(LatticeIndex p) const {
  if (!has_innovations()) throw Error(ErrorCode::MissingInnovations, "field carries no innovations");
  if (!layout_.contains(p) || p.i + p.j < 1) {
    std::ostringstream msg;
    msg << "no innovation at (" << p.i << "," << p.j << ")";
    throw Error(ErrorCode::MissingInnovations, msg.str());
  }
  return innovations_[layout_.index_of(p) - layout_.layer_size(0)];
}

Field Field::scaled(double c) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= c;
  std::vector<double> e(innovations_);
  for (double& x : e) x *= c;
  return Field(window(), std::move(v), std::move(e));
}

double Schedule::operator()(double m) const noexcept {
  switch (kind) {
    case Kind::Constant: return c;
    case Kind::Log: return c * std::log(m);
    case Kind::Power: return c * std::pow(m, p);
  }
  return c;
}

Schedule Schedule::power(double c, double p) {
  if (!(p < 1.0)) throw Error(ErrorCode::OutOfRange, "power schedule exponent must be < 1");
  return {Kind::Power, c, p};
}

const char* to_string(Schedule::Kind kind) noexcept {
  switch (kind) {
    case Schedule::Kind::Constant: return "constant";
    case Schedule::Kind::Log: return "log";
    case Schedule::Kind::Power: return "power";
  }
  return "constant";
}

Schedule::Kind schedule_kind_from_string(const std::string& name) {
  if (name == "constant") return Schedule::Kind::Constant;
  if (name == "log") return Schedule::Kind::Log;
  if (name == "power") return Schedule::Kind::Power;
  throw Error(ErrorCode::InvalidConfig, "unknown schedule kind '" + name + "'");
}

BoundaryPoint::BoundaryPoint(double alpha, int beta_sign)
    : alpha_(alpha), beta_sign_(beta_sign < 0 ? -1 : 1) {
  if (!(std::abs(alpha) <= 1.0)) throw Error(ErrorCode::OutOfRange, "boundary alpha must satisfy |alpha| <= 1");
  if (std::abs(alpha) == 1.0) beta_sign_ = 1;
}

BoundaryPoint BoundaryPoint::from_pair(double alpha, double beta) {
  if (!(std::abs(std::abs(alpha) + std::abs(beta) - 1.0) <= 1e-12)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "(" << alpha << ", " << beta << ") is not on |alpha| + |beta| = 1";
    throw Error(ErrorCode::OutOfRange, msg.str());
  }
  return BoundaryPoint(alpha, beta < 0.0 ? -1 : 1);
}

double BoundaryPoint::beta() const noexcept {
  const double mag = 1.0 - std::abs(alpha_);
  return mag == 0.0 ? 0.0 : beta_sign_ * mag;
}

const char* to_string(LimitCase c) noexcept {
  return c == LimitCase::Interior ? "interior" : "boundary";
}

NearlyUnstableDesign::NearlyUnstableDesign(BoundaryPoint boundary, Schedule gamma, Schedule delta)
    : boundary_(boundary), gamma_(gamma), delta_(delta) {}

LimitCase NearlyUnstableDesign::case_tag() const noexcept {
  const double a = std::abs(boundary_.alpha());
  return (a > 0.0 && a < 1.0) ? LimitCase::Interior : LimitCase::Boundary;
}

ModelParams NearlyUnstableDesign::params_at(long m) const {
  if (m < 1) throw Error(ErrorCode::OutOfRange, "model index must be >= 1");
  const double dm = static_cast<double>(m);
  ModelParams p{boundary_.alpha() - gamma_(dm) / dm, boundary_.beta() - delta_(dm) / dm};
  if (!p.is_stationary()) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "index m=" << m << " gives (" << p.alpha << ", " << p.beta
        << ") outside the stationary region; use a larger m";
    throw Error(ErrorCode::NonStationary, msg.str());
  }
  return p;
}

}  // namespace nusar
