#pragma once

// Test statistics of the residual normality tests, without p-values.

#include "imnorm/core.hpp"
#include "imnorm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace imnorm {

enum class ClassicalTest { JB, KS, CVM, AD, LL };

inline std::string to_string(ClassicalTest t) {
  switch (t) {
    case ClassicalTest::JB: return "jb";
    case ClassicalTest::KS: return "ks";
    case ClassicalTest::CVM: return "cvm";
    case ClassicalTest::AD: return "ad";
    case ClassicalTest::LL: return "ll";
  }
  return "?";
}

inline ClassicalTest parse_classical_test(std::string_view s) {
  for (ClassicalTest t : {ClassicalTest::JB, ClassicalTest::KS, ClassicalTest::CVM, ClassicalTest::AD,
                          ClassicalTest::LL}) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorKind::Parse, "unknown test '" + std::string(s) + "' (expected jb, ks, cvm, ad, ll)");
}

inline constexpr std::size_t kMinClassicalObs = 8;

namespace statistic {

inline void require_size(std::size_t n) {
  if (n < kMinClassicalObs) {
    throw Error(ErrorKind::TooFewObservations,
                "normality tests need at least 8 observations, got " + std::to_string(n));
  }
}

/// n/6 (b1^2 + (b2 - 3)^2 / 4) with moment estimators of skewness and kurtosis.
inline double jarque_bera(std::span<const double> x) {
  require_size(x.size());
  const double n = static_cast<double>(x.size());
  const double m = sample_mean(x);
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double c = v - m;
    const double c2 = c * c;
    m2 += c2;
    m3 += c2 * c;
    m4 += c2 * c2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw Error(ErrorKind::NonFiniteData, "constant sample has no skewness or kurtosis");
  const double b1 = m3 / std::pow(m2, 1.5);
  const double b2 = m4 / (m2 * m2);
  return n / 6.0 * (b1 * b1 + 0.25 * (b2 - 3.0) * (b2 - 3.0));
}

/// sup |F_n - Phi| given Phi at the sorted sample.
inline double ks_from_cdf(std::span<const double> u) {
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double k = static_cast<double>(i);
    d = std::max({d, (k + 1.0) / n - u[i], u[i] - k / n});
  }
  return d;
}

inline double cvm_from_cdf(std::span<const double> u) {
  const double n = static_cast<double>(u.size());
  double w = 1.0 / (12.0 * n);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double c = u[i] - (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n);
    w += c * c;
  }
  return w;
}

/// Anderson-Darling A^2 from the sorted standardized sample (log Phi is taken
/// directly so extreme residuals do not produce log 0).
inline double ad_from_sorted(std::span<const double> z) {
  const std::size_t n = z.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += (2.0 * static_cast<double>(i) + 1.0) * (normal_log_cdf(z[i]) + normal_log_cdf(-z[n - 1 - i]));
  }
  return -static_cast<double>(n) - s / static_cast<double>(n);
}

inline std::vector<double> sorted_copy(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return s;
}

inline std::vector<double> cdf_values(std::span<const double> sorted) {
  std::vector<double> u(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) u[i] = normal_cdf(sorted[i]);
  return u;
}

inline double kolmogorov_smirnov(std::span<const double> x) {
  require_size(x.size());
  return ks_from_cdf(cdf_values(sorted_copy(x)));
}

inline double cramer_von_mises(std::span<const double> x) {
  require_size(x.size());
  return cvm_from_cdf(cdf_values(sorted_copy(x)));
}

inline double anderson_darling(std::span<const double> x) {
  require_size(x.size());
  return ad_from_sorted(sorted_copy(x));
}

/// KS distance to N(mean, s^2) with s^2 the n-1 sample variance.
inline double lilliefors(std::span<const double> x) {
  require_size(x.size());
  std::vector<double> z = sorted_copy(x);
  const double m = sample_mean(z);
  const double s = std::sqrt(sample_variance(z));
  if (!(s > 0.0)) throw Error(ErrorKind::NonFiniteData, "constant sample has no scale");
  for (double& v : z) v = normal_cdf((v - m) / s);
  return ks_from_cdf(z);
}

}  // namespace statistic
}  // namespace imnorm
