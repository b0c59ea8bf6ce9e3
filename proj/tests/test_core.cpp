#include "imnorm/io.hpp"
#include "imnorm/model.hpp"
#include "imnorm/qmle.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace imnorm;
using Catch::Approx;

namespace {

std::filesystem::path scratch_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "imnorm_test_core";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("time series rejects non-finite values", "[core]") {
  CHECK_NOTHROW(TimeSeries(std::vector<double>{1.0, -2.0}));
  try {
    TimeSeries(std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()});
    FAIL("NaN accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteData);
  }
  CHECK_THROWS_AS(TimeSeries(std::vector<double>{std::numeric_limits<double>::infinity()}), Error);
}

TEST_CASE("require_valid reports the failing precondition", "[core]") {
  const Garch g(1, 1);
  const TimeSeries x(std::vector<double>(10, 0.5));
  auto kind_of = [&](const TimeSeries& s, const Eigen::VectorXd& th) {
    try {
      require_valid(g, s, th);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Usage;
  };
  CHECK(kind_of(x, Eigen::Vector3d(0.1, 0.1, 0.1)) == ErrorKind::Usage);
  CHECK(kind_of(x, Eigen::Vector3d(-0.1, 0.1, 0.1)) == ErrorKind::InfeasibleTheta);
  CHECK(kind_of(x, Eigen::Vector2d(0.1, 0.1)) == ErrorKind::InfeasibleTheta);
  CHECK(kind_of(TimeSeries(std::vector<double>{1.0}), Eigen::Vector3d(0.1, 0.1, 0.1)) == ErrorKind::SeriesTooShort);
  CHECK_THROWS_AS(g.loglik(x, Eigen::Vector3d(0.1, -0.2, 0.1)), Error);
}

TEST_CASE("DAR(1) single contribution by hand", "[core]") {
  const Dar1 model;
  const TimeSeries x(std::vector<double>{0.0, 1.0});
  const auto c = model_contribs(model, x, Eigen::Vector3d(0.0, 1.0, 1.0));
  REQUIRE(c.size() == 1);
  CHECK(c[0].loglik == Approx(-0.5).margin(1e-15));
}

TEST_CASE("contributions sum to the total log-likelihood", "[core]") {
  auto check = [](const auto& model, const Eigen::VectorXd& theta) {
    const TimeSeries x = simulate(model, theta, 500, ErrorDist::T15, 3).series;
    const auto c = model_contribs(model, x, theta);
    CHECK(c.size() == x.size() - model.presample());
    double s = 0.0;
    for (const auto& k : c) {
      s += k.loglik;
      CHECK((k.hess - k.hess.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(std::abs(s - model.loglik(x, theta)) <= 1e-12 * std::max(1.0, std::abs(s)));
  };
  check(Tma1(0.5), Eigen::Vector3d(0.2, 0.7, 1.0));
  check(Garch(1, 1), Eigen::Vector3d(0.2, 0.1, 0.8));
  check(Garch(2, 1), (Eigen::VectorXd(4) << 0.2, 0.1, 0.05, 0.6).finished());
  check(Dar1(), Eigen::Vector3d(0.2, 0.5, 0.3));
}

TEST_CASE("fitted residuals are standardized", "[core]") {
  auto check = [](const auto& model, const Eigen::VectorXd& theta, std::uint64_t seed) {
    const TimeSeries x = simulate(model, theta, 2000, ErrorDist::N01, seed).series;
    const FitResult f = fit(model, x);
    const ResidualSeries r = residuals(model, x, f.theta_hat.theta);
    CHECK(r.theta_hat.model_id == model.id());
    CHECK(r.values.size() == x.size() - model.presample());
    const double m = sample_mean(r.values);
    const double v = sample_variance(r.values);
    CHECK(m > -0.1);
    CHECK(m < 0.1);
    CHECK(v > 0.9);
    CHECK(v < 1.1);
  };
  check(Tma1(0.5), Eigen::Vector3d(0.2, 0.7, 1.0), 21);
  check(Garch(1, 1), Eigen::Vector3d(0.2, 0.3, 0.2), 22);
  check(Dar1(), Eigen::Vector3d(0.2, 0.5, 0.3), 23);
}

TEST_CASE("model registry", "[core]") {
  CHECK(model_id(make_model("garch21")) == "garch21");
  CHECK(model_dim(make_model("garch21")) == 4);
  CHECK(model_dim(make_model("tma1")) == 3);
  CHECK(model_id(make_model("dar1")) == "dar1");
  CHECK_THROWS_AS(make_model("arma11"), Error);
  CHECK_THROWS_AS(make_model("garch1"), Error);
}

TEST_CASE("linear constraints", "[core]") {
  const LinearConstraints c = ConstraintBuilder(2).lower(0, 0.0).row({{0, 1.0}, {1, 1.0}}, 1.0).build();
  CHECK(c.contains(Eigen::Vector2d(0.2, 0.3)));
  CHECK_FALSE(c.contains(Eigen::Vector2d(-0.1, 0.3)));
  CHECK_FALSE(c.contains(Eigen::Vector2d(0.6, 0.6)));
  CHECK_FALSE(c.contains(Eigen::Vector3d(0.1, 0.1, 0.1)));
  CHECK(c.slack(Eigen::Vector2d(0.2, 0.3))(1) == Approx(0.5));
}

TEST_CASE("series CSV round trip", "[core][io]") {
  const std::vector<double> v{0.1, -2.5, 1e-300, 3.141592653589793, -0.0};
  const auto path = scratch_file("series.csv");
  write_series_csv(path.string(), v, OutputHeader{"test", {{"k", "v"}}, true});
  const TimeSeries s = read_series_csv(path.string());
  REQUIRE(s.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(s[i] == v[i]);
  CHECK(std::holds_alternative<Ingested>(s.origin()));

  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("# imnorm ", 0) == 0);
}

TEST_CASE("series CSV with a date column", "[core][io]") {
  const auto path = scratch_file("dated.csv");
  write_text(path, "date,value\n2001-01-02,1.5\n2001-01-03,-0.25\n");
  const TimeSeries s = read_series_csv(path.string());
  REQUIRE(s.size() == 2);
  CHECK(s[1] == -0.25);
}

TEST_CASE("series CSV errors", "[core][io]") {
  auto kind_of = [](const std::string& path) {
    try {
      read_series_csv(path);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Usage;
  };
  CHECK(kind_of(scratch_file("does_not_exist.csv").string()) == ErrorKind::Io);
  const auto nocol = scratch_file("nocol.csv");
  write_text(nocol, "price\n1\n");
  CHECK(kind_of(nocol.string()) == ErrorKind::Io);
  const auto bad = scratch_file("bad.csv");
  write_text(bad, "value\n1.0\nabc\n");
  CHECK(kind_of(bad.string()) == ErrorKind::Parse);
  const auto nan = scratch_file("nan.csv");
  write_text(nan, "value\n1.0\nnan\n");
  CHECK(kind_of(nan.string()) != ErrorKind::Usage);
}

TEST_CASE("log returns", "[core][io]") {
  const std::vector<double> p{100.0, 101.0};
  const auto r = log_returns(p);
  REQUIRE(r.size() == 1);
  CHECK(r[0] == Approx(0.995033085).epsilon(1e-9));
  CHECK(log_returns(std::vector<double>{1.0, 2.0, 4.0, 8.0}, 1.0).size() == 3);
  CHECK_THROWS_AS(log_returns(std::vector<double>{1.0, 0.0}), Error);
}

TEST_CASE("simulation is deterministic per seed", "[core]") {
  const Garch g(1, 1);
  const Eigen::Vector3d th(0.2, 0.3, 0.2);
  const auto a = simulate(g, th, 300, ErrorDist::GLD, 99).series;
  const auto b = simulate(g, th, 300, ErrorDist::GLD, 99).series;
  const auto c = simulate(g, th, 300, ErrorDist::GLD, 100).series;
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  const auto* origin = std::get_if<Simulated>(&a.origin());
  REQUIRE(origin != nullptr);
  CHECK(origin->seed == 99);
  CHECK(origin->model_id == "garch11");
}
