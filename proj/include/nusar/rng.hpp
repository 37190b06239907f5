#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace nusar {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

enum class InnovationDist { Gaussian, Rademacher, UniformUnitVar };

const char* to_string(InnovationDist d) noexcept;
InnovationDist innovation_dist_from_string(const std::string& name);

/// Stateless draws indexed by (master_seed, replication_id, t).
///
/// Draw t uses Philox block t/2 of the replication; the block's 128 bits make
/// two doubles, so draws 2b and 2b+1 share a block. Gaussian draws come from
/// Box-Muller on that pair. next() walks t = 0, 1, 2, ... for convenience.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t replication_id) noexcept
      : seed_(master_seed), rep_(replication_id) {}

  std::uint64_t master_seed() const noexcept { return seed_; }
  std::uint64_t replication_id() const noexcept { return rep_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Uniform on (0,1), never 0 or 1.
  double uniform_at(std::uint64_t t) const noexcept;
  double gaussian_at(std::uint64_t t) const noexcept;
  double draw_at(std::uint64_t t, InnovationDist d) const noexcept;

  double next(InnovationDist d) noexcept { return draw_at(counter_++, d); }
  void seek(std::uint64_t t) noexcept { counter_ = t; }

 private:
  std::array<double, 2> uniform_pair(std::uint64_t block) const noexcept;

  std::uint64_t seed_;
  std::uint64_t rep_;
  std::uint64_t counter_ = 0;
};

}  // namespace nusar
