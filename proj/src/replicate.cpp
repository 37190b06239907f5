#include "nusar/replicate.hpp"

#include <omp.h>

#include "nusar/error.hpp"

namespace nusar {

const char* to_string(ExecPolicy p) noexcept { return p == ExecPolicy::Serial ? "serial" : "openmp"; }

ExecPolicy exec_policy_from_string(const std::string& name) {
  if (name == "serial") return ExecPolicy::Serial;
  if (name == "openmp") return ExecPolicy::OpenMP;
  throw Error(ErrorCode::InvalidConfig, "unknown execution policy '" + name + "'");
}

void set_worker_count(int n) {
  if (n < 0) throw Error(ErrorCode::InvalidConfig, "worker count must be nonnegative");
  if (n > 0) omp_set_num_threads(n);
}

int worker_count() noexcept { return omp_get_max_threads(); }

CovTable covariance_table(const CovKernel& kernel, int kmax, int lmax, ExecPolicy policy) {
  if (kmax < 0 || lmax < 0) throw Error(ErrorCode::OutOfRange, "table extents must be nonnegative");
  const std::size_t width = static_cast<std::size_t>(2 * lmax + 1);
  const std::size_t cells = static_cast<std::size_t>(2 * kmax + 1) * width;
  CovTable t{kmax, lmax, {}};
  t.values = run_replications<double>(
      cells,
      [&](std::size_t c) {
        const int k = static_cast<int>(c / width) - kmax;
        const int l = static_cast<int>(c % width) - lmax;
        return kernel.evaluate(k, l);
      },
      policy);
  return t;
}

}  // namespace nusar
