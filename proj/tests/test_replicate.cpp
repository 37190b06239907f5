#include <doctest.h>

#include <cstring>

#include "nusar/error.hpp"
#include "nusar/estimate.hpp"
#include "nusar/replicate.hpp"
#include "nusar/simulate.hpp"

using namespace nusar;

namespace {

struct Outcome {
  double alpha = 0.0;
  double beta = 0.0;
  double b11 = 0.0;
};

std::vector<Outcome> run(ExecPolicy policy) {
  const FieldSampler sampler({0.45, 0.45}, TriangleWindow::balanced(40), SimMethod::boundary_cholesky(),
                             InnovationDist::Gaussian);
  return run_replications<Outcome>(
      37,
      [&](std::size_t r) {
        const EstimateResult e = lse(sampler.sample(RngStream(99, r)), sampler.window());
        return Outcome{e.alpha_hat, e.beta_hat, e.B.a11};
      },
      policy);
}

bool same_bits(const std::vector<Outcome>& a, const std::vector<Outcome>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(Outcome)) == 0;
}

}  // namespace

TEST_SUITE("replicate") {
  TEST_CASE("openmp matches the serial reference bit for bit") {
    const int before = worker_count();
    const auto serial = run(ExecPolicy::Serial);
    for (int workers : {1, 2, 4}) {
      set_worker_count(workers);
      CHECK(worker_count() == workers);
      CHECK(same_bits(run(ExecPolicy::OpenMP), serial));
    }
    set_worker_count(before);
  }

  TEST_CASE("the lowest failing replication is rethrown") {
    for (ExecPolicy policy : {ExecPolicy::Serial, ExecPolicy::OpenMP}) {
      set_worker_count(4);
      try {
        run_replications<int>(
            50,
            [](std::size_t r) -> int {
              if (r == 31 || r == 12 || r == 40) throw Error(ErrorCode::SingularDesign, "rep " + std::to_string(r));
              return static_cast<int>(r);
            },
            policy);
        FAIL("expected an exception");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularDesign);
        CHECK(std::string(e.what()).find("rep 12") != std::string::npos);
      }
    }
    CHECK(run_replications<int>(0, [](std::size_t) { return 1; }, ExecPolicy::OpenMP).empty());
  }

  TEST_CASE("covariance table") {
    const CovKernel kernel({0.3, -0.5});
    const CovTable serial = covariance_table(kernel, 6, 4, ExecPolicy::Serial);
    CHECK(serial.values.size() == 13u * 9u);
    for (int k = -6; k <= 6; ++k)
      for (int l = -4; l <= 4; ++l) {
        CHECK(serial.at(k, l) == kernel(k, l));
        CHECK(serial.at(k, l) == serial.at(-k, -l));
      }
    set_worker_count(3);
    const CovTable par = covariance_table(kernel, 6, 4, ExecPolicy::OpenMP);
    CHECK(par.values == serial.values);
  }

  TEST_CASE("policy names") {
    CHECK(exec_policy_from_string("openmp") == ExecPolicy::OpenMP);
    CHECK(std::string(to_string(ExecPolicy::Serial)) == "serial");
    CHECK_THROWS_AS(exec_policy_from_string("gpu"), Error);
  }
}
