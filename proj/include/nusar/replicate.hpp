#pragma once

#include <cstddef>
#include <exception>
#include <string>
#include <vector>

#include "nusar/covariance.hpp"

namespace nusar {

/// Serial is the reference path; OpenMP must match it bit for bit.
enum class ExecPolicy { Serial, OpenMP };

const char* to_string(ExecPolicy p) noexcept;
ExecPolicy exec_policy_from_string(const std::string& name);

/// Sets the OpenMP worker count (0 leaves the runtime default).
void set_worker_count(int n);
int worker_count() noexcept;

/// out[r] = fn(r) for r = 0..n-1. Results land in their own slot, so the
/// output does not depend on scheduling. If any call throws, the exception
/// of the lowest failing r is rethrown after all workers finish.
template <class T, class Fn>
std::vector<T> run_replications(std::size_t n, Fn&& fn, ExecPolicy policy) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  const auto body = [&](std::size_t r) {
    try {
      out[r] = fn(r);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  if (policy == ExecPolicy::OpenMP) {
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long r = 0; r < count; ++r) body(static_cast<std::size_t>(r));
  } else {
    for (std::size_t r = 0; r < n; ++r) body(r);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// R(k,l) for k in [-kmax, kmax], l in [-lmax, lmax], row-major in k.
struct CovTable {
  int kmax = 0;
  int lmax = 0;
  std::vector<double> values;

  double at(int k, int l) const noexcept {
    return values[static_cast<std::size_t>(k + kmax) * static_cast<std::size_t>(2 * lmax + 1) +
                  static_cast<std::size_t>(l + lmax)];
  }
};

/// Uncached evaluation of every entry, split across workers under OpenMP.
CovTable covariance_table(const CovKernel& kernel, int kmax, int lmax, ExecPolicy policy);

}  // namespace nusar
