#pragma once

// Closed-form Black-Scholes quantities and distribution functions.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dualhedge {

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Inputs of a European vanilla price at valuation time t <= maturity.
struct BsQuote {
  double t = 0.0;
  double spot = 0.0;
  double strike = 0.0;
  double maturity = 0.0;
  double rate = 0.0;
  double sigma = 0.0;
  double dividend = 0.0;
};

namespace detail {

inline constexpr double kDegenerateStdDev = 1e-12;

template <bool IsCall>
double bs_vanilla(const BsQuote& q) {
  const double tau = std::max(0.0, q.maturity - q.t);
  const double df = std::exp(-q.rate * tau);
  const double carry = std::exp(-q.dividend * tau);
  const double sd = q.sigma * std::sqrt(tau);
  if (sd < kDegenerateStdDev) {
    // Deterministic forward.
    const double fwd_value = q.spot * carry;
    const double k_value = q.strike * df;
    return IsCall ? std::max(fwd_value - k_value, 0.0) : std::max(k_value - fwd_value, 0.0);
  }
  const double d1 =
      (std::log(q.spot / q.strike) + (q.rate - q.dividend + 0.5 * q.sigma * q.sigma) * tau) / sd;
  const double d2 = d1 - sd;
  if constexpr (IsCall)
    return q.spot * carry * norm_cdf(d1) - q.strike * df * norm_cdf(d2);
  else
    return q.strike * df * norm_cdf(-d2) - q.spot * carry * norm_cdf(-d1);
}

}  // namespace detail

inline double bs_put(const BsQuote& q) { return detail::bs_vanilla<false>(q); }
inline double bs_call(const BsQuote& q) { return detail::bs_vanilla<true>(q); }

/// CDF at `x` of the lognormal law whose mean and variance are given.
/// A zero variance is a point mass at `mean` (value 0 at x <= mean).
inline double lognormal_cdf_from_moments(double mean, double variance, double x) {
  if (!(mean > 0.0)) throw std::invalid_argument("lognormal_cdf_from_moments: mean must be > 0");
  if (!(variance > 0.0)) return x > mean ? 1.0 : 0.0;
  if (x <= 0.0) return 0.0;
  const double s2 = std::log1p(variance / (mean * mean));
  const double mu = std::log(mean) - 0.5 * s2;
  return norm_cdf((std::log(x) - mu) / std::sqrt(s2));
}

/// CDF at `x` of the normal law with the given moments (point mass if the
/// variance is zero, same convention as the lognormal version).
inline double normal_cdf_from_moments(double mean, double variance, double x) {
  if (!(variance > 0.0)) return x > mean ? 1.0 : 0.0;
  return norm_cdf((x - mean) / std::sqrt(variance));
}

}  // namespace dualhedge
