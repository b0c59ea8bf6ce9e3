#include "imnorm/dar1.hpp"
#include "imnorm/model.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace imnorm;
using Catch::Approx;

namespace {

TimeSeries design_series(const Eigen::Vector3d& theta, std::size_t n, std::uint64_t seed) {
  return simulate(Dar1(), theta, n, ErrorDist::N01, seed).series;
}

}  // namespace

TEST_CASE("dar1 single contribution by hand", "[dar1]") {
  const Dar1 model;
  const TimeSeries x(std::vector<double>{0.0, 1.0});
  const auto c = model_contribs(model, x, Eigen::Vector3d(0.0, 1.0, 1.0));
  REQUIRE(c.size() == 1);
  CHECK(c[0].loglik == Approx(-0.5));
  CHECK(c[0].grad(0) == 0.0);
  CHECK(c[0].grad(1) == 0.0);
  CHECK(c[0].grad(2) == 0.0);
  // y = 0, Lambda = 1, h = 1, r = 1
  CHECK(c[0].hess(0, 0) == 0.0);
  CHECK(c[0].hess(1, 1) == Approx(-0.5));
  CHECK(c[0].hess(1, 2) == 0.0);
  CHECK(c[0].hess(0, 1) == c[0].hess(1, 0));
}

TEST_CASE("dar1 summed contributions equal the total log-likelihood", "[dar1]") {
  const Dar1 model;
  const auto x = design_series({0.2, 0.5, 0.3}, 500, 3);
  const Eigen::Vector3d theta(0.1, 0.4, 0.5);
  double sum = 0.0;
  for (const auto& c : model_contribs(model, x, theta)) sum += c.loglik;
  CHECK(std::abs(sum - model.loglik(x, theta)) < 1e-12 * std::abs(sum));
}

TEST_CASE("dar1 analytic derivatives match finite differences", "[dar1][fd]") {
  const Dar1 model;
  const auto x = design_series({0.4, 0.5, 0.5}, 300, 5);
  CHECK(testing::check_derivatives(model, x, Eigen::Vector3d(0.4, 0.5, 0.5)).hess_err < 1e-4);
  Engine rng = make_engine(303);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd theta = testing::random_interior(model, rng);
    const auto chk = testing::check_derivatives(model, x, theta);
    INFO("theta = " << theta.transpose());
    CHECK(chk.grad_err < 1e-6);
    CHECK(chk.hess_err < 1e-4);
  }
}

TEST_CASE("dar1 simulation", "[dar1][sim]") {
  SECTION("near white noise") {
    const auto x = design_series({0.0, 1.0, 1e-6}, 100'000, 8);
    CHECK(sample_variance(x.values()) == Approx(1.0).epsilon(0.02));
  }
  SECTION("stationary variance against a long-run oracle") {
    // omega / (1 - phi^2 - alpha) = 0.5 / 0.66
    const double oracle = sample_variance(design_series({0.2, 0.5, 0.3}, 1'000'000, 9).values());
    CHECK(oracle == Approx(0.5 / 0.66).epsilon(0.02));
    const auto x = design_series({0.2, 0.5, 0.3}, 200'000, 10);
    std::vector<double> batches;
    for (std::size_t b = 0; b < 100; ++b) batches.push_back(sample_variance(x.values().subspan(b * 2000, 2000)));
    const double se = std::sqrt(sample_variance(batches) / 100.0);
    CHECK(std::abs(sample_variance(x.values()) - oracle) < 3.0 * se);
  }
  SECTION("Lyapunov exponent") {
    CHECK(dar1_lyapunov_exponent(0.5, 0.7) < 0.0);
    CHECK(dar1_lyapunov_exponent(0.2, 0.3) < 0.0);
    CHECK(dar1_lyapunov_exponent(0.5, 5.0) > 0.0);
    CHECK_THROWS_AS(design_series({0.5, 0.5, 5.0}, 10, 1), Error);
    try {
      (void)design_series({0.5, 0.5, 5.0}, 10, 1);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonstationaryRegion);
    }
  }
  SECTION("determinism") {
    const auto a = design_series({0.2, 0.5, 0.3}, 100, 42);
    const auto b = design_series({0.2, 0.5, 0.3}, 100, 42);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  }
}

TEST_CASE("dar1 residuals reproduce the innovations exactly", "[dar1]") {
  const Dar1 model;
  const Eigen::Vector3d theta(0.5, 0.5, 0.7);
  const auto sim = simulate(model, theta, 2000, ErrorDist::T15, 12);
  const auto r = residuals(model, sim.series, theta);
  REQUIRE(r.values.size() == 1999);
  double worst = 0.0;
  for (std::size_t t = 0; t < r.values.size(); ++t) {
    worst = std::max(worst, std::abs(r.values[t] - sim.innovations[t + 1]));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("dar1 information-matrix equality at the true parameter", "[dar1][im]") {
  const Dar1 model;
  const Eigen::Vector3d theta(0.2, 0.5, 0.3);
  const auto x = design_series(theta, 100'000, 2024);
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
