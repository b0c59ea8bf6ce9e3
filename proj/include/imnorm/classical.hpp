#pragma once

// Residual normality tests with p-values: Jarque-Bera, Kolmogorov-Smirnov,
// Cramer-von Mises, Anderson-Darling (all three against the fully specified
// N(0,1)) and Lilliefors (mean and variance estimated).

#include "imnorm/classical_statistics.hpp"
#include "imnorm/null_tables.hpp"
#include "imnorm/stats.hpp"

#include <cmath>
#include <span>

namespace imnorm {

struct ClassicalReport {
  ClassicalTest test = ClassicalTest::JB;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;

  [[nodiscard]] bool reject(double level) const { return p_value < level; }
};

inline ClassicalReport jb(std::span<const double> x) {
  const double s = statistic::jarque_bera(x);
  return {ClassicalTest::JB, s, chi2_sf(s, 2.0), x.size()};
}

/// Asymptotic Kolmogorov p-value at sqrt(n) D_n.
inline ClassicalReport ks(std::span<const double> x) {
  const double d = statistic::kolmogorov_smirnov(x);
  return {ClassicalTest::KS, d, kolmogorov_sf(std::sqrt(static_cast<double>(x.size())) * d), x.size()};
}

inline ClassicalReport cvm(std::span<const double> x, const NullTable& table = default_null_table()) {
  const double w = statistic::cramer_von_mises(x);
  return {ClassicalTest::CVM, w, table.p_value(ClassicalTest::CVM, w, x.size()), x.size()};
}

inline ClassicalReport ad(std::span<const double> x, const NullTable& table = default_null_table()) {
  const double a = statistic::anderson_darling(x);
  return {ClassicalTest::AD, a, table.p_value(ClassicalTest::AD, a, x.size()), x.size()};
}

inline ClassicalReport lilliefors(std::span<const double> x, const NullTable& table = default_null_table()) {
  const double d = statistic::lilliefors(x);
  return {ClassicalTest::LL, d, table.p_value(ClassicalTest::LL, d, x.size()), x.size()};
}

inline ClassicalReport run_classical(ClassicalTest t, std::span<const double> x) {
  switch (t) {
    case ClassicalTest::JB: return jb(x);
    case ClassicalTest::KS: return ks(x);
    case ClassicalTest::CVM: return cvm(x);
    case ClassicalTest::AD: return ad(x);
    case ClassicalTest::LL: return lilliefors(x);
  }
  return jb(x);
}

}  // namespace imnorm
