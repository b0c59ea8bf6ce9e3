#include "imnorm/model.hpp"
#include "imnorm/tma1.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace imnorm;
using Catch::Approx;

namespace {

TimeSeries design_series(std::size_t n, std::uint64_t seed) {
  return simulate(Tma1(0.5), Eigen::Vector3d(0.2, 0.7, 1.0), n, ErrorDist::N01, seed).series;
}

}  // namespace

TEST_CASE("tma1 hand recursion", "[tma1]") {
  const Tma1 model(0.0);
  const TimeSeries x(std::vector<double>{1.0, 2.0});
  const auto st = model.eps_recursion(x, Eigen::Vector3d(0.5, 0.0, 1.0));
  REQUIRE(st.size() == 2);
  CHECK(st[0].eps == Approx(1.0));
  CHECK(st[1].eps == Approx(1.5));
  CHECK(st[0].d_eps(0) == 0.0);
  CHECK(st[1].d_eps(0) == Approx(-1.0));
}

TEST_CASE("tma1 recursion equals the truncated series form", "[tma1]") {
  const Tma1 model(0.5);
  const TimeSeries x = design_series(200, 11);
  const Eigen::Vector3d theta(0.3, -0.5, 1.7);
  const auto st = model.eps_recursion(x, theta);
  const double sigma = std::sqrt(theta(2));
  // A_s = -(phi + xi I(X_{s-1} <= u)), with the indicator at the first index set to 0.
  auto a = [&](std::size_t s) { return -(theta(0) + ((s > 0 && x[s - 1] <= 0.5) ? theta(1) : 0.0)); };
  double worst = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    double sum = x[t];
    double prod = 1.0;
    for (std::size_t j = 1; j <= t; ++j) {
      prod *= a(t - j + 1);
      sum += prod * x[t - j];
    }
    worst = std::max(worst, std::abs(st[t].eps - sum / sigma));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("tma1 contributions at a zero series", "[tma1]") {
  const Tma1 model(-1.0);
  const TimeSeries x(std::vector<double>(5, 0.0));
  const auto c = model_contribs(model, x, Eigen::Vector3d(0.3, 0.1, 1.0));
  REQUIRE(c.size() == 5);
  for (const auto& k : c) {
    CHECK(k.loglik == 0.0);
    CHECK(k.grad(0) == 0.0);
    CHECK(k.grad(2) == Approx(-0.5));
    CHECK(k.hess(0, 1) == k.hess(1, 0));
  }
}

TEST_CASE("tma1 summed contributions equal the total log-likelihood", "[tma1]") {
  const Tma1 model(0.5);
  const TimeSeries x = design_series(500, 3);
  const Eigen::Vector3d theta(0.1, 0.4, 0.9);
  double sum = 0.0;
  for (const auto& c : model_contribs(model, x, theta)) sum += c.loglik;
  CHECK(std::abs(sum - model.loglik(x, theta)) < 1e-12 * std::abs(sum));
}

TEST_CASE("tma1 analytic derivatives match finite differences", "[tma1][fd]") {
  const Tma1 model(0.5);
  const TimeSeries x = design_series(300, 5);
  Engine rng = make_engine(101);
  CHECK(testing::check_derivatives(model, x, Eigen::Vector3d(0.2, 0.7, 1.0)).grad_err < 1e-6);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd theta = testing::random_interior(model, rng);
    const auto chk = testing::check_derivatives(model, x, theta);
    INFO("theta = " << theta.transpose());
    CHECK(chk.grad_err < 1e-6);
    CHECK(chk.hess_err < 1e-4);
  }
}

TEST_CASE("tma1 simulation", "[tma1][sim]") {
  SECTION("white noise variance") {
    const auto sim = simulate(Tma1(0.5), Eigen::Vector3d(0.0, 0.0, 4.0), 10000, ErrorDist::N01, 9);
    const double v = sample_variance(sim.series.values());
    CHECK(v > 3.8);
    CHECK(v < 4.2);
  }
  SECTION("determinism") {
    const auto a = design_series(100, 42);
    const auto b = design_series(100, 42);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  }
  SECTION("lag-1 autocovariance against a long-run oracle") {
    // The indicator depends on e_{t-1}, so sigma^2 E[phi + xi I(X <= u)] is not the
    // autocovariance; the oracle is the same statistic on an independent 10^6 run.
    const auto lag1 = [](const TimeSeries& x) {
      const double m = sample_mean(x.values());
      std::vector<double> prods;
      for (std::size_t t = 1; t < x.size(); ++t) prods.push_back((x[t] - m) * (x[t - 1] - m));
      return prods;
    };
    const double oracle = sample_mean(lag1(design_series(1'000'000, 777)));

    const std::vector<double> prods = lag1(design_series(100'000, 778));
    const double acov = sample_mean(prods);
    // Batch-means standard error of the lag-1 product series.
    const std::size_t batches = 100;
    const std::size_t len = prods.size() / batches;
    std::vector<double> bm;
    for (std::size_t b = 0; b < batches; ++b) {
      bm.push_back(sample_mean(std::span<const double>(prods).subspan(b * len, len)));
    }
    const double se = std::sqrt(sample_variance(bm) / batches);
    INFO("acov " << acov << " oracle " << oracle << " se " << se);
    CHECK(std::abs(acov - oracle) < 3.0 * se);
  }
  SECTION("infeasible parameters") {
    CHECK_THROWS_AS(simulate(Tma1(0.5), Eigen::Vector3d(0.5, 0.6, 1.0), 10, ErrorDist::N01, 1), Error);
  }
}

TEST_CASE("tma1 filter forgets its starting value", "[tma1]") {
  const Tma1 model(0.5);
  const TimeSeries x = design_series(400, 21);
  const Eigen::Vector3d theta(0.2, 0.7, 1.0);
  const auto a = model.eps_recursion(x, theta, 0.0);
  const auto b = model.eps_recursion(x, theta, 3.0);
  double worst = 0.0;
  for (std::size_t t = 100; t < x.size(); ++t) worst = std::max(worst, std::abs(a[t].eps - b[t].eps));
  CHECK(worst < 1e-8);
}

TEST_CASE("tma1 residuals recover innovations after the start-up", "[tma1]") {
  const Tma1 model(0.5);
  const Eigen::Vector3d theta(0.2, 0.7, 1.0);
  const auto sim = simulate(model, theta, 1000, ErrorDist::N01, 8);
  const auto r = residuals(model, sim.series, theta);
  REQUIRE(r.values.size() == 1000);
  double worst = 0.0;
  for (std::size_t t = 200; t < 1000; ++t) worst = std::max(worst, std::abs(r.values[t] - sim.innovations[t]));
  CHECK(worst < 1e-6);
}

TEST_CASE("tma1 information-matrix equality at the true parameter", "[tma1][im]") {
  const Tma1 model(0.5);
  const Eigen::Vector3d theta(0.2, 0.7, 1.0);
  const auto x = simulate(model, theta, 100'000, ErrorDist::N01, 2024).series;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(3, 3);
  std::size_t n = 0;
  model.for_each_contrib(x, theta, [&](std::size_t, double, const Eigen::VectorXd& g, const Eigen::MatrixXd& h) {
    const Eigen::MatrixXd d = g * g.transpose() + h;
    sum += d;
    sum2 += d.cwiseProduct(d);
    ++n;
  });
  const Eigen::MatrixXd mean = sum / static_cast<double>(n);
  const Eigen::MatrixXd se =
      ((sum2 / static_cast<double>(n) - mean.cwiseProduct(mean)) / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(mean(i, j)) < 3.0 * se(i, j));
}
