#pragma once

// Innovation distributions: N(0,1) under the null and six alternatives, all
// scaled to zero mean and unit variance.

#include "imnorm/core.hpp"
#include "imnorm/rng.hpp"

#include <boost/random/chi_squared_distribution.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace imnorm {

enum class ErrorDist : std::uint8_t { N01, T15, LD, NM1, NM2, NM3, GLD };

inline constexpr std::array<ErrorDist, 7> kAllDists = {ErrorDist::N01, ErrorDist::T15, ErrorDist::LD,
                                                       ErrorDist::NM1, ErrorDist::NM2, ErrorDist::NM3,
                                                       ErrorDist::GLD};
inline constexpr std::array<ErrorDist, 6> kAlternativeDists = {
    ErrorDist::T15, ErrorDist::LD, ErrorDist::NM1, ErrorDist::NM2, ErrorDist::NM3, ErrorDist::GLD};

/// Written into every simulation report header.
inline constexpr std::string_view kGldNote =
    "GLD uses the Ramberg-Schmeiser quantile Q(u)=l1+(u^l3-(1-u)^l4)/l2 with (0,1,0.2,0.2), "
    "divided by its standard deviation";

inline std::string to_string(ErrorDist d) {
  switch (d) {
    case ErrorDist::N01: return "n01";
    case ErrorDist::T15: return "t15";
    case ErrorDist::LD: return "ld";
    case ErrorDist::NM1: return "nm1";
    case ErrorDist::NM2: return "nm2";
    case ErrorDist::NM3: return "nm3";
    case ErrorDist::GLD: return "gld";
  }
  return "?";
}

inline ErrorDist parse_error_dist(std::string_view s) {
  for (ErrorDist d : kAllDists) {
    if (to_string(d) == s) return d;
  }
  throw Error(ErrorKind::Parse, "unknown error distribution '" + std::string(s) +
                                    "' (expected n01, t15, ld, nm1, nm2, nm3, gld)");
}

namespace gld {
inline constexpr double kLambda3 = 0.2;
inline constexpr double kLambda4 = 0.2;

/// Standard deviation of the unscaled symmetric GLD(0,1,a,a):
/// E[Q^2] = 2/(2a+1) - 2 B(a+1, a+1).
inline double raw_sd() {
  const double a = kLambda3;
  return std::sqrt(2.0 / (2.0 * a + 1.0) - 2.0 * std::beta(a + 1.0, a + 1.0));
}

inline double quantile(double u) { return std::pow(u, kLambda3) - std::pow(1.0 - u, kLambda4); }
}  // namespace gld

/// Factor that makes the raw draw unit-variance.
inline double unit_variance_scale(ErrorDist d) {
  switch (d) {
    case ErrorDist::N01: return 1.0;
    case ErrorDist::T15: return std::sqrt(13.0 / 15.0);
    case ErrorDist::LD: return std::numbers::sqrt3 / std::numbers::pi;
    case ErrorDist::NM1: return 1.0;
    case ErrorDist::NM2: return 1.0 / std::sqrt(1.49);
    case ErrorDist::NM3: return 1.0 / std::sqrt(3.0);
    case ErrorDist::GLD: return 1.0 / gld::raw_sd();
  }
  return 1.0;
}

inline double draw(ErrorDist d, Engine& rng) {
  const double scale = unit_variance_scale(d);
  switch (d) {
    case ErrorDist::N01:
      return standard_normal(rng);
    case ErrorDist::T15: {
      const double z = standard_normal(rng);
      boost::random::chi_squared_distribution<double> chi2(15.0);
      return scale * z / std::sqrt(chi2(rng) / 15.0);
    }
    case ErrorDist::LD: {
      const double u = open_uniform(rng);
      return scale * std::log(u / (1.0 - u));
    }
    case ErrorDist::NM1: {
      const bool wide = open_uniform(rng) < 0.2;
      const double z = standard_normal(rng);
      return wide ? std::sqrt(2.0) * z : std::sqrt(0.75) * z;
    }
    case ErrorDist::NM2: {
      const double centre = open_uniform(rng) < 0.5 ? 0.7 : -0.7;
      return scale * (centre + standard_normal(rng));
    }
    case ErrorDist::NM3: {
      const double centre = open_uniform(rng) < 0.5 ? 1.0 : -1.0;
      return scale * (centre + std::sqrt(2.0) * standard_normal(rng));
    }
    case ErrorDist::GLD:
      return scale * gld::quantile(open_uniform(rng));
  }
  return 0.0;
}

inline std::vector<double> sample(ErrorDist d, std::size_t n, Engine& rng) {
  std::vector<double> out(n);
  for (auto& x : out) x = draw(d, rng);
  return out;
}

/// Sample kurtosis m4/m2^2 of `draws` variates from a fixed seed.
inline double excess_kurtosis_check(ErrorDist d, std::size_t draws = 1'000'000,
                                    std::uint64_t seed = 20240601) {
  Engine rng = make_engine(seed);
  const std::vector<double> x = sample(d, draws, rng);
  const double m = sample_mean(x);
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double c = (v - m) * (v - m);
    m2 += c;
    m4 += c * c;
  }
  m2 /= static_cast<double>(x.size());
  m4 /= static_cast<double>(x.size());
  return m4 / (m2 * m2);
}

}  // namespace imnorm
