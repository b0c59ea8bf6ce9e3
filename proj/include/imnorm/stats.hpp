#pragma once

// Distribution functions used by the tests: standard normal, chi-square upper
// tail and the limiting Kolmogorov distribution.

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace imnorm {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// log Phi(x), accurate far into the lower tail.
inline double normal_log_cdf(double x) {
  if (x > -20.0) return std::log(normal_cdf(x));
  // Asymptotic series of the Mills ratio.
  const double z2 = x * x;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

inline double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

/// P(chi2_k > x).
inline double chi2_sf(double x, double k) {
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * k, 0.5 * x);
}

/// P(K > lambda) for the limiting Kolmogorov distribution.
inline double kolmogorov_sf(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  if (lambda < 1.0) {
    // Theta-function form converges fast for small lambda.
    double cdf = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double m = 2.0 * k - 1.0;
      const double term = std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-300) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sf += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

}  // namespace imnorm
