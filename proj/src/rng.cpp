#include "nusar/rng.hpp"

#include <cmath>
#include <numbers>

#include "nusar/error.hpp"

namespace nusar {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint64_t x) noexcept {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

const char* to_string(InnovationDist d) noexcept {
  switch (d) {
    case InnovationDist::Gaussian: return "gaussian";
    case InnovationDist::Rademacher: return "rademacher";
    case InnovationDist::UniformUnitVar: return "uniform";
  }
  return "gaussian";
}

InnovationDist innovation_dist_from_string(const std::string& name) {
  if (name == "gaussian") return InnovationDist::Gaussian;
  if (name == "rademacher") return InnovationDist::Rademacher;
  if (name == "uniform") return InnovationDist::UniformUnitVar;
  throw Error(ErrorCode::InvalidConfig, "unknown innovation distribution '" + name + "'");
}

std::array<double, 2> RngStream::uniform_pair(std::uint64_t block) const noexcept {
  const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                                         static_cast<std::uint32_t>(rep_), static_cast<std::uint32_t>(rep_ >> 32)};
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
  const auto out = philox4x32(ctr, key);
  const std::uint64_t x0 = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  const std::uint64_t x1 = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  return {to_unit(x0), to_unit(x1)};
}

double RngStream::uniform_at(std::uint64_t t) const noexcept { return uniform_pair(t / 2)[t % 2]; }

double RngStream::gaussian_at(std::uint64_t t) const noexcept {
  const auto u = uniform_pair(t / 2);
  const double radius = std::sqrt(-2.0 * std::log(u[0]));
  const double angle = 2.0 * std::numbers::pi * u[1];
  return radius * (t % 2 == 0 ? std::cos(angle) : std::sin(angle));
}

double RngStream::draw_at(std::uint64_t t, InnovationDist d) const noexcept {
  switch (d) {
    case InnovationDist::Gaussian: return gaussian_at(t);
    case InnovationDist::Rademacher: return uniform_at(t) < 0.5 ? -1.0 : 1.0;
    case InnovationDist::UniformUnitVar: return std::numbers::sqrt3 * (2.0 * uniform_at(t) - 1.0);
  }
  return gaussian_at(t);
}

}  // namespace nusar
