#include "nusar/covariance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "nusar/error.hpp"
#include "nusar/tail_bound.hpp"

namespace nusar {

namespace {

constexpr long kFactorialTableSize = 256;

int sign_of(double x) noexcept { return x < 0.0 ? -1 : 1; }

// (-1)^n style power of a sign.
int sign_pow(int sign, long n) noexcept { return (sign < 0 && (n & 1)) ? -1 : 1; }

// Reduce with R(k,l) = R(-k,-l) so that k + l > 0, or k + l == 0 and k >= 0.
std::pair<int, int> canonical_lag(int k, int l) noexcept {
  if (k + l < 0 || (k + l == 0 && k < 0)) return {-k, -l};
  return {k, l};
}

bool opposite_quadrant(int k, int l) noexcept {
  return static_cast<long long>(k) * static_cast<long long>(l) <= 0;
}

double axis_covariance(const ModelParams& p, int k, int l) {
  const double a = p.alpha;
  const double b = p.beta;
  if (a == 0.0 && b == 0.0) return (k == 0 && l == 0) ? 1.0 : 0.0;
  if (b == 0.0) return l == 0 ? std::pow(a, std::abs(k)) / (1.0 - a * a) : 0.0;
  return k == 0 ? std::pow(b, std::abs(l)) / (1.0 - b * b) : 0.0;
}

void require_both_nonzero(const ModelParams& p, const char* what) {
  if (p.alpha == 0.0 || p.beta == 0.0)
    throw Error(ErrorCode::OutOfRange, std::string(what) + " requires alpha != 0 and beta != 0");
}

double log_binomial_pmf(long n, long u, double log_p, double log_q) {
  double out = log_binomial(n, u);
  if (u > 0) out += static_cast<double>(u) * log_p;
  if (n - u > 0) out += static_cast<double>(n - u) * log_q;
  return out;
}

}  // namespace

double tail_variance_bound(double q, int margin) {
  return std::pow(q, 2.0 * (margin + 1)) / (1.0 - q * q);
}

int margin_for_tolerance(double q, double tol) {
  if (q <= 0.0) return 0;
  // Solve q^(2(M+1)) <= tol (1 - q^2), then walk to the exact smallest M.
  const double target = std::log(tol * (1.0 - q * q));
  int m = std::max(0, static_cast<int>(std::ceil(target / (2.0 * std::log(q)))) - 1);
  while (m > 0 && tail_variance_bound(q, m - 1) <= tol) --m;
  while (tail_variance_bound(q, m) > tol) ++m;
  return m;
}

double log_factorial(long n) {
  static const std::array<double, kFactorialTableSize> table = [] {
    std::array<double, kFactorialTableSize> t{};
    for (long i = 0; i < kFactorialTableSize; ++i) t[static_cast<std::size_t>(i)] = std::lgamma(i + 1.0);
    return t;
  }();
  if (n < kFactorialTableSize) return table[static_cast<std::size_t>(n)];
  // Stirling series; the first omitted term is below 1e-20 for n >= 256.
  const double x = static_cast<double>(n);
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return x * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi * x) +
         inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
}

double log_binomial(long n, long k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double sigma_sq(const ModelParams& p) {
  require_stationary(p);
  const double a = p.alpha;
  const double b = p.beta;
  return 1.0 / std::sqrt((1.0 + a + b) * (1.0 + a - b) * (1.0 - a + b) * (1.0 - a - b));
}

double rho_corr(const ModelParams& p) {
  const double s2 = sigma_sq(p);
  const double a = p.alpha;
  const double b = p.beta;
  if (a * b == 0.0) return 0.0;
  return ((1.0 - a * a - b * b) * s2 - 1.0) / (2.0 * a * b * s2);
}

BoundaryFactors boundary_factors(const ModelParams& p) {
  const double inv_s2 = 1.0 / sigma_sq(p);
  const double a = p.alpha;
  const double b = p.beta;
  // (1 + a^2 - b^2 - 1/sigma^2) / (2a) rewritten with
  // 1/sigma^4 = (1 + a^2 - b^2)^2 - 4a^2; no cancellation as a -> 0.
  return {2.0 * a / (1.0 + a * a - b * b + inv_s2), 2.0 * b / (1.0 + b * b - a * a + inv_s2)};
}

double cov_closed(const ModelParams& p, int k, int l) {
  require_stationary(p);
  if (p.alpha == 0.0 || p.beta == 0.0) return axis_covariance(p, k, l);

  const double s2 = sigma_sq(p);
  const BoundaryFactors f = boundary_factors(p);
  if (opposite_quadrant(k, l))
    return s2 * std::pow(f.along_k, std::abs(k)) * std::pow(f.along_l, std::abs(l));

  if (k < 0) {
    k = -k;
    l = -l;
  }
  const long n = static_cast<long>(k) + l;
  const double d = f.product();
  const double log_a = std::log(std::abs(p.alpha));
  const double log_b = std::log(std::abs(p.beta));
  const double log_d = std::log(std::abs(d));
  const int sa = sign_of(p.alpha);
  const int sb = sign_of(p.beta);
  const int sd = sign_of(d);

  double sum = 0.0;
  for (long i = -l; i <= k; ++i) {
    const long pa = k - i;
    const long pb = l + i;
    const long pd = std::abs(i);
    const double lg = log_binomial(n, pa) + static_cast<double>(pa) * log_a +
                      static_cast<double>(pb) * log_b + static_cast<double>(pd) * log_d;
    const int sign = sign_pow(sa, pa) * sign_pow(sb, pb) * sign_pow(sd, pd);
    sum += sign * std::exp(lg);
  }
  return s2 * sum;
}

double cov_equal_coeff_sum(const ModelParams& p, int k, int l) {
  require_stationary(p);
  if (p.alpha != p.beta) throw Error(ErrorCode::OutOfRange, "the equal-coefficient shortcut needs alpha == beta");
  if (!(static_cast<long long>(k) * l >= 0))
    throw Error(ErrorCode::WrongQuadrant, "the equal-coefficient shortcut needs k*l >= 0");
  require_both_nonzero(p, "cov_equal_coeff_sum");
  const int d = std::abs(k - l);
  const int terms = std::min(std::abs(k), std::abs(l));
  const double a = p.alpha;
  const double log_a = std::log(std::abs(a));
  double sum = 0.0;
  for (int i = 0; i < terms; ++i) {
    const long power = 2L * i + d;
    sum += sign_pow(sign_of(a), power) * std::exp(log_binomial(d + 2L * i, i) + static_cast<double>(power) * log_a);
  }
  return cov_closed(p, 0, d) - sum;
}

double f4_series(int a, int b, int c, int d, double x, double y, double tol) {
  if (a < 1 || b < 1 || c < 1 || d < 1)
    throw Error(ErrorCode::OutOfRange, "F4 parameters must be positive integers");
  const double r = std::sqrt(std::abs(x)) + std::sqrt(std::abs(y));
  if (!(r < 1.0)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "sqrt|x| + sqrt|y| = " << r << " is not below 1";
    throw Error(ErrorCode::Divergent, msg.str());
  }
  if (x == 0.0 && y == 0.0) return 1.0;

  // Diagonal N (m + n = N) is bounded in absolute sum by
  // g_N = (a)_N (b)_N r^(2N) / (N!)^2, and g_{N+1}/g_N is nonincreasing in N.
  const double log_r2 = 2.0 * std::log(r);
  const auto ratio = [&](long n) {
    return (a + static_cast<double>(n)) * (b + static_cast<double>(n)) * r * r /
           ((n + 1.0) * (n + 1.0));
  };

  constexpr long kMaxDiagonals = 200000;
  std::vector<double> prev{1.0};
  std::vector<double> cur;
  double sum = 1.0;
  double comp = 0.0;
  double log_g = 0.0;  // log g_N for the diagonal just summed
  for (long n_total = 1; n_total <= kMaxDiagonals; ++n_total) {
    cur.assign(static_cast<std::size_t>(n_total) + 1, 0.0);
    const double num = (a + n_total - 1.0) * (b + n_total - 1.0);
    for (long m = 0; m <= n_total; ++m) {
      const long n = n_total - m;
      double t;
      if (n > 0)
        t = prev[static_cast<std::size_t>(m)] * num / ((d + n - 1.0) * n) * y;
      else
        t = prev[static_cast<std::size_t>(m - 1)] * num / ((c + m - 1.0) * m) * x;
      cur[static_cast<std::size_t>(m)] = t;
      // Neumaier summation.
      const double s = sum + t;
      comp += std::abs(sum) >= std::abs(t) ? (sum - s) + t : (t - s) + sum;
      sum = s;
    }
    std::swap(prev, cur);

    log_g += std::log(num) + log_r2 - 2.0 * std::log(static_cast<double>(n_total));
    const double rho_next = ratio(n_total + 1);
    if (rho_next < 1.0) {
      const double log_g_next = log_g + std::log(ratio(n_total));
      if (std::exp(log_g_next) / (1.0 - rho_next) < tol) return sum + comp;
    }
  }
  throw Error(ErrorCode::Divergent, "F4 series did not reach the requested tolerance");
}

double cov_f4(const ModelParams& p, int k, int l, double tol) {
  require_stationary(p);
  require_both_nonzero(p, "cov_f4");
  const int kk = std::abs(k);
  const int ll = std::abs(l);
  const double a2 = p.alpha * p.alpha;
  const double b2 = p.beta * p.beta;
  const int sign = sign_pow(sign_of(p.alpha), kk) * sign_pow(sign_of(p.beta), ll);
  const double log_mag = kk * std::log(std::abs(p.alpha)) + ll * std::log(std::abs(p.beta));
  if (opposite_quadrant(k, l))
    return sign * std::exp(log_mag) * f4_series(kk + 1, ll + 1, kk + 1, ll + 1, a2, b2, tol);
  return sign * std::exp(log_mag + log_binomial(kk + ll, kk)) *
         f4_series(kk + ll + 1, 1, kk + 1, ll + 1, a2, b2, tol);
}

double pmf_s(int n, int m, double nu, int j) {
  if (n < 0 || m < 0) throw Error(ErrorCode::OutOfRange, "binomial sizes must be nonnegative");
  if (!(nu > 0.0 && nu < 1.0)) throw Error(ErrorCode::OutOfRange, "nu must lie in (0,1)");
  if (j < 0 || j > n + m) return 0.0;
  const double log_nu = std::log(nu);
  const double log_mu = std::log1p(-nu);
  double sum = 0.0;
  for (int u = std::max(0, j - m); u <= std::min(n, j); ++u)
    sum += std::exp(log_binomial_pmf(n, u, log_nu, log_mu) + log_binomial_pmf(m, j - u, log_mu, log_nu));
  return std::clamp(sum, 0.0, 1.0);
}

std::vector<double> pmf_s_table(int n, int m, double nu) {
  if (n < 0 || m < 0) throw Error(ErrorCode::OutOfRange, "binomial sizes must be nonnegative");
  if (!(nu > 0.0 && nu < 1.0)) throw Error(ErrorCode::OutOfRange, "nu must lie in (0,1)");
  const double log_nu = std::log(nu);
  const double log_mu = std::log1p(-nu);
  std::vector<double> first(static_cast<std::size_t>(n) + 1);
  std::vector<double> second(static_cast<std::size_t>(m) + 1);
  for (int u = 0; u <= n; ++u) first[static_cast<std::size_t>(u)] = std::exp(log_binomial_pmf(n, u, log_nu, log_mu));
  for (int v = 0; v <= m; ++v) second[static_cast<std::size_t>(v)] = std::exp(log_binomial_pmf(m, v, log_mu, log_nu));
  std::vector<double> out(static_cast<std::size_t>(n + m) + 1, 0.0);
  for (int u = 0; u <= n; ++u)
    for (int v = 0; v <= m; ++v)
      out[static_cast<std::size_t>(u + v)] += first[static_cast<std::size_t>(u)] * second[static_cast<std::size_t>(v)];
  for (double& x : out) x = std::clamp(x, 0.0, 1.0);
  return out;
}

double cov_binrep(const ModelParams& p, int k, int l, double tol) {
  require_stationary(p);
  if (static_cast<long long>(k) * l < 0)
    throw Error(ErrorCode::WrongQuadrant, "the binomial representation needs k*l >= 0");
  require_both_nonzero(p, "cov_binrep");
  const int kk = std::abs(k);
  const int ll = std::abs(l);
  const double q = p.radius();
  const double nu = std::abs(p.alpha) / q;
  const double log_q = std::log(q);
  const int sign = sign_pow(sign_of(p.alpha), kk) * sign_pow(sign_of(p.beta), ll);

  double sum = 0.0;
  for (int i = 0;; ++i) {
    if (std::exp(2.0 * i * log_q) / (1.0 - q * q) < tol) break;
    sum += std::exp((kk + ll + 2.0 * i) * log_q) * pmf_s(i, kk + ll + i, nu, ll + i);
  }
  return sign * sum;
}

double cov_series_oracle(const ModelParams& p, int k, int l, int margin) {
  require_stationary(p);
  if (margin < 0) throw Error(ErrorCode::OutOfRange, "margin must be nonnegative");
  std::tie(k, l) = canonical_lag(k, l);
  const int top = margin + k + l;

  // weights[t][u]: coefficient of eps at offset (u, t-u) below the target,
  // C(t,u) a^u b^(t-u), built by the recursion itself.
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(top) + 1);
  weights[0] = {1.0};
  for (int t = 1; t <= top; ++t) {
    auto& row = weights[static_cast<std::size_t>(t)];
    const auto& below = weights[static_cast<std::size_t>(t - 1)];
    row.assign(static_cast<std::size_t>(t) + 1, 0.0);
    for (int u = 0; u <= t; ++u) {
      double w = 0.0;
      if (u > 0) w += p.alpha * below[static_cast<std::size_t>(u - 1)];
      if (u < t) w += p.beta * below[static_cast<std::size_t>(u)];
      row[static_cast<std::size_t>(u)] = w;
    }
  }

  double sum = 0.0;
  for (int t = 0; t <= margin; ++t) {
    const auto& near = weights[static_cast<std::size_t>(t)];
    const auto& far = weights[static_cast<std::size_t>(t + k + l)];
    for (int u = 0; u <= t; ++u) {
      const int u2 = u + k;
      const int v2 = t - u + l;
      if (u2 < 0 || v2 < 0) continue;
      sum += near[static_cast<std::size_t>(u)] * far[static_cast<std::size_t>(u2)];
    }
  }
  return sum;
}

const char* to_string(CovMethod m) noexcept {
  switch (m) {
    case CovMethod::ClosedForm: return "closed";
    case CovMethod::AppellF4: return "f4";
    case CovMethod::BinomialRep: return "binrep";
    case CovMethod::SeriesOracle: return "series";
  }
  return "closed";
}

CovMethod cov_method_from_string(const std::string& name) {
  if (name == "closed") return CovMethod::ClosedForm;
  if (name == "f4") return CovMethod::AppellF4;
  if (name == "binrep") return CovMethod::BinomialRep;
  if (name == "series") return CovMethod::SeriesOracle;
  throw Error(ErrorCode::InvalidConfig, "unknown covariance method '" + name + "'");
}

CovKernel::CovKernel(ModelParams p, CovMethod method, double tolerance)
    : params_(p), method_(method), tolerance_(tolerance), oracle_margin_(0) {
  require_stationary(p);
  if (!(tolerance > 0.0)) throw Error(ErrorCode::OutOfRange, "tolerance must be positive");
  if (method == CovMethod::SeriesOracle) oracle_margin_ = margin_for_tolerance(p.radius(), tolerance);
}

CovKernel::CovKernel(const CovKernel& other)
    : params_(other.params_),
      method_(other.method_),
      tolerance_(other.tolerance_),
      oracle_margin_(other.oracle_margin_) {
  std::shared_lock lock(other.mutex_);
  cache_ = other.cache_;
}

CovKernel& CovKernel::operator=(const CovKernel& other) {
  if (this == &other) return *this;
  std::map<std::pair<int, int>, double> copy;
  {
    std::shared_lock lock(other.mutex_);
    copy = other.cache_;
  }
  std::unique_lock lock(mutex_);
  params_ = other.params_;
  method_ = other.method_;
  tolerance_ = other.tolerance_;
  oracle_margin_ = other.oracle_margin_;
  cache_ = std::move(copy);
  return *this;
}

double CovKernel::evaluate(int k, int l) const {
  std::tie(k, l) = canonical_lag(k, l);
  const bool axis = params_.alpha == 0.0 || params_.beta == 0.0;
  switch (method_) {
    case CovMethod::ClosedForm:
      return cov_closed(params_, k, l);
    case CovMethod::AppellF4:
      return axis ? cov_closed(params_, k, l) : cov_f4(params_, k, l, tolerance_);
    case CovMethod::BinomialRep:
      if (axis) return cov_closed(params_, k, l);
      return static_cast<long long>(k) * l < 0 ? cov_f4(params_, k, l, tolerance_)
                                               : cov_binrep(params_, k, l, tolerance_);
    case CovMethod::SeriesOracle:
      return cov_series_oracle(params_, k, l, oracle_margin_);
  }
  return cov_closed(params_, k, l);
}

double CovKernel::operator()(int k, int l) const {
  const auto key = canonical_lag(k, l);
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double value = evaluate(key.first, key.second);
  std::unique_lock lock(mutex_);
  return cache_.emplace(key, value).first->second;
}

std::size_t CovKernel::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

}  // namespace nusar
