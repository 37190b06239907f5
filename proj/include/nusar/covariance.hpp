#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "nusar/model.hpp"

namespace nusar {

/// Stationary variance R(0,0) =
/// ((1+a+b)(1+a-b)(1-a+b)(1-a-b))^(-1/2).
double sigma_sq(const ModelParams& p);

/// ((1 - a^2 - b^2) sigma^2 - 1) / (2 a b sigma^2) for ab != 0, else 0.
double rho_corr(const ModelParams& p);

/// The two geometric factors of the opposite-quadrant covariance:
/// R(k,l) = sigma^2 along_k^|k| along_l^|l| whenever k*l <= 0.
struct BoundaryFactors {
  double along_k = 0.0;
  double along_l = 0.0;

  /// R(1,-1) / sigma^2, the lag-one correlation along an anti-diagonal.
  double product() const noexcept { return along_k * along_l; }
};

BoundaryFactors boundary_factors(const ModelParams& p);

/// R(k,l) in closed form.
///
/// k*l <= 0: sigma^2 times the two geometric factors. k*l > 0: a finite sum
/// over the anti-diagonal through the origin,
///   R(k,l) = sigma^2 sum_{i=-l..k} C(k+l, k-i) a^(k-i) b^(l+i) D^|i|,
/// with D = R(1,-1)/sigma^2. If ab = 0 the AR(1) formula on the active axis.
double cov_closed(const ModelParams& p, int k, int l);

/// R(0,|k-l|) - sum_{i<min(|k|,|l|)} C(|k-l|+2i, i) a^i b^(|k-l|+i) for
/// k*l >= 0. This shortcut is exact only when alpha == beta; throws
/// OutOfRange otherwise.
double cov_equal_coeff_sum(const ModelParams& p, int k, int l);

/// Appell F4(a,b,c,d; x,y) for positive integer parameters, summed by total
/// degree until an a priori tail bound drops below tol. Throws Divergent
/// unless sqrt|x| + sqrt|y| < 1.
double f4_series(int a, int b, int c, int d, double x, double y, double tol);

/// R(k,l) through the F4 representation. Requires ab != 0.
double cov_f4(const ModelParams& p, int k, int l, double tol = 1e-14);

/// P(Bin(n, nu) + Bin(m, 1 - nu) = j), 0 outside [0, n + m].
double pmf_s(int n, int m, double nu, int j);

/// All of P(Bin(n, nu) + Bin(m, 1 - nu) = j), j = 0..n+m.
std::vector<double> pmf_s_table(int n, int m, double nu);

/// R(k,l) for k*l >= 0 through the binomial-mixture representation, truncated
/// once q^(2i)/(1-q^2) < tol. Throws WrongQuadrant for k*l < 0 and OutOfRange
/// for ab = 0.
double cov_binrep(const ModelParams& p, int k, int l, double tol = 1e-14);

/// Brute-force covariance of the moving-average representation: inner product
/// of the weight arrays of X(k,l) and X(0,0), cut at diagonal depth `margin`.
/// The truncation error is at most tail_variance_bound(q, margin).
double cov_series_oracle(const ModelParams& p, int k, int l, int margin);

enum class CovMethod { ClosedForm, AppellF4, BinomialRep, SeriesOracle };

const char* to_string(CovMethod m) noexcept;
CovMethod cov_method_from_string(const std::string& name);

/// Memoizing evaluator of R(k,l) for one parameter point.
///
/// Keys are reduced with R(k,l) = R(-k,-l) before lookup, so symmetric
/// requests return the identical double. Series methods use `tolerance`;
/// BinomialRep answers the k*l < 0 quadrant through AppellF4, and the F4 and
/// binomial methods fall back to the axis formula when ab = 0. Concurrent
/// calls are safe.
class CovKernel {
 public:
  explicit CovKernel(ModelParams p, CovMethod method = CovMethod::ClosedForm, double tolerance = 1e-14);

  CovKernel(const CovKernel& other);
  CovKernel& operator=(const CovKernel& other);

  const ModelParams& params() const noexcept { return params_; }
  CovMethod method() const noexcept { return method_; }
  double tolerance() const noexcept { return tolerance_; }

  double operator()(int k, int l) const;
  /// Evaluation without touching the cache.
  double evaluate(int k, int l) const;
  std::size_t cache_size() const;

 private:
  ModelParams params_;
  CovMethod method_;
  double tolerance_;
  int oracle_margin_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::pair<int, int>, double> cache_;
};

}  // namespace nusar
