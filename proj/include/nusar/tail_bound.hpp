#pragma once

namespace nusar {

/// Upper bound q^(2(margin+1)) / (1 - q^2) on the variance left out when the
/// moving-average representation of X is cut at diagonal depth `margin`.
///
/// The weights at depth d are C(d,j) alpha^j beta^(d-j), and
/// sum_j C(d,j)^2 alpha^(2j) beta^(2(d-j)) <= (|alpha| + |beta|)^(2d).
double tail_variance_bound(double q, int margin);

/// Smallest depth whose tail_variance_bound is at most tol.
int margin_for_tolerance(double q, double tol);

/// log(n!) accurate to a few ulp; safe to call concurrently.
double log_factorial(long n);

/// log C(n, k) for 0 <= k <= n.
double log_binomial(long n, long k);

}  // namespace nusar
