#include "imnorm/classical.hpp"
#include "imnorm/error_dists.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

using namespace imnorm;
using Catch::Approx;

namespace {

// 50 draws used for the reference values below (scipy 1.15, statsmodels 0.14).
std::vector<double> reference_sample() {
  std::ifstream in(IMNORM_TEST_DATA_DIR "/x50.txt");
  std::vector<double> x;
  for (double v; in >> v;) x.push_back(v);
  return x;
}

std::vector<double> normal_grid(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return x;
}

const NullTable& small_table() {
  static const NullTable t = generate_null_tables({20240607, {50, 1000}, 20000, 1});
  return t;
}

}  // namespace

TEST_CASE("reference values on a 50-point sample", "[classical]") {
  const auto x = reference_sample();
  REQUIRE(x.size() == 50);
  const auto j = jb(x);
  CHECK(j.statistic == Approx(3.4611252755181434).epsilon(1e-12));
  CHECK(j.p_value == Approx(0.17718469112215915).epsilon(1e-10));
  const auto k = ks(x);
  CHECK(k.statistic == Approx(0.12188477271280129).epsilon(1e-12));
  CHECK(k.p_value == Approx(0.447489052318105).epsilon(1e-9));
  CHECK(statistic::cramer_von_mises(x) == Approx(0.12354565896595278).epsilon(1e-12));
  CHECK(statistic::anderson_darling(x) == Approx(0.8891149886455594).epsilon(1e-12));
  CHECK(statistic::lilliefors(x) == Approx(0.09876400274093572).epsilon(1e-12));
}

TEST_CASE("Jarque-Bera vanishes on a symmetric sample with kurtosis 3", "[classical]") {
  const double phi = std::numbers::phi;
  const std::vector<double> x{-phi, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, phi};
  const auto r = jb(x);
  CHECK(r.statistic == Approx(0.0).margin(1e-13));
  CHECK(r.p_value == Approx(1.0).margin(1e-13));
}

TEST_CASE("quantile grid gives the minimal KS and CVM distances", "[classical]") {
  for (std::size_t n : {8u, 100u, 1000u}) {
    const auto x = normal_grid(n);
    const double dn = static_cast<double>(n);
    CHECK(statistic::kolmogorov_smirnov(x) == Approx(0.5 / dn).epsilon(1e-10));
    CHECK(statistic::cramer_von_mises(x) == Approx(1.0 / (12.0 * dn)).epsilon(1e-10));
  }
}

TEST_CASE("Lilliefors is affine invariant, the fixed-null tests are not", "[classical]") {
  const auto x = reference_sample();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.0 + 2.5 * x[i];
  CHECK(statistic::lilliefors(y) == Approx(statistic::lilliefors(x)).epsilon(1e-12));
  CHECK(statistic::kolmogorov_smirnov(y) > 2.0 * statistic::kolmogorov_smirnov(x));
  CHECK(statistic::cramer_von_mises(y) > 2.0 * statistic::cramer_von_mises(x));
  CHECK(statistic::anderson_darling(y) > 2.0 * statistic::anderson_darling(x));
}

TEST_CASE("too few observations", "[classical]") {
  const std::vector<double> x{0.1, -0.3, 0.5, 1.2, -0.7, 0.0, 0.4};
  for (ClassicalTest t : {ClassicalTest::JB, ClassicalTest::KS}) {
    try {
      run_classical(t, x);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::TooFewObservations);
    }
  }
  CHECK_THROWS_AS(lilliefors(x, small_table()), Error);
  CHECK_THROWS_AS(cvm(x, small_table()), Error);
  CHECK_THROWS_AS(ad(x, small_table()), Error);
}

TEST_CASE("tabulated critical values agree with asymptotic ones", "[classical]") {
  const NullTable& t = small_table();
  CHECK(t.quantile(ClassicalTest::CVM, 0.95, 1000) == Approx(0.46136).epsilon(0.04));
  CHECK(t.quantile(ClassicalTest::AD, 0.95, 1000) == Approx(2.4924).epsilon(0.04));
  CHECK(std::sqrt(1000.0) * t.quantile(ClassicalTest::LL, 0.95, 1000) == Approx(0.895).epsilon(0.03));
  CHECK(cvm(normal_grid(1000), t).p_value ==
        Approx(1.0 - 0.001 * (1.0 / 12000.0) / t.quantile(ClassicalTest::CVM, 0.001, 1000)));
}

TEST_CASE("tests hold their size on i.i.d. normal data", "[classical][mc]") {
  const NullTable& t = small_table();
  const int reps = 2000;
  std::array<int, 5> rej{};
  for (int r = 0; r < reps; ++r) {
    Engine rng = make_engine(substream_seed(777, 1000, 0, static_cast<std::uint64_t>(r)));
    const auto x = sample(ErrorDist::N01, 1000, rng);
    rej[0] += jb(x).reject(0.05);
    rej[1] += ks(x).reject(0.05);
    rej[2] += cvm(x, t).reject(0.05);
    rej[3] += ad(x, t).reject(0.05);
    rej[4] += lilliefors(x, t).reject(0.05);
  }
  for (std::size_t k = 0; k < rej.size(); ++k) {
    const double rate = rej[k] / static_cast<double>(reps);
    CAPTURE(k, rate);
    CHECK(rate > 0.03);
    CHECK(rate < 0.07);
  }
}

TEST_CASE("every test rejects clearly non-normal samples", "[classical][mc]") {
  const NullTable& t = small_table();
  Engine rng = make_engine(888);
  auto x = sample(ErrorDist::LD, 2000, rng);
  CHECK(jb(x).reject(0.05));
  CHECK(lilliefors(x, t).reject(0.05));
  for (double& v : x) v = v * v;  // far from N(0,1)
  CHECK(ks(x).reject(0.01));
  CHECK(cvm(x, t).reject(0.01));
  CHECK(ad(x, t).reject(0.01));
}

TEST_CASE("p-values decrease in the statistic", "[classical]") {
  const NullTable& t = small_table();
  for (ClassicalTest test : kTabulatedTests) {
    double prev = 1.0;
    const double top = test == ClassicalTest::LL ? 0.2 : 6.0;
    for (int k = 1; k <= 400; ++k) {
      const double p = t.p_value(test, top * k / 400.0, 1000);
      CHECK(p <= prev);
      CHECK(p >= 0.0);
      prev = p;
    }
    CHECK(prev < 1e-3);
  }
}
