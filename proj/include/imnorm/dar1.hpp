#pragma once

// First-order double autoregression
//
//   X_t = phi X_{t-1} + e_t sqrt(omega + alpha X_{t-1}^2),   theta = (phi, omega, alpha).
//
// The likelihood conditions on X_1, so contributions run over t = 2..n and
// need no presample approximation.

#include "imnorm/core.hpp"
#include "imnorm/rng.hpp"
#include "imnorm/tma1.hpp"  // SimPath

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace imnorm {

struct Dar1Params {
  double phi = 0.0;
  double omega = 1.0;
  double alpha = 0.0;

  static Dar1Params from_vector(const Eigen::VectorXd& theta) { return {theta(0), theta(1), theta(2)}; }
  [[nodiscard]] Eigen::VectorXd to_vector() const { return Eigen::Vector3d(phi, omega, alpha); }
};

/// |phi| <= c1, c2 <= omega <= c3, c4 <= alpha <= c5.
struct Dar1Bounds {
  double c1 = 5.0;
  double c2 = 1e-6;
  double c3 = 1e6;
  double c4 = 1e-6;
  double c5 = 10.0;
};

/// Monte Carlo estimate of E log|phi + e sqrt(alpha)| for e ~ N(0,1).
inline double dar1_lyapunov_exponent(double phi, double alpha, std::size_t draws = 100'000,
                                     std::uint64_t seed = 0x5EEDDA21ULL) {
  Engine rng = make_engine(seed);
  const double root = std::sqrt(alpha);
  double acc = 0.0;
  for (std::size_t i = 0; i < draws; ++i) acc += std::log(std::abs(phi + root * standard_normal(rng)));
  return acc / static_cast<double>(draws);
}

class Dar1 {
 public:
  explicit Dar1(Dar1Bounds bounds = {}) : bounds_(bounds) {}

  [[nodiscard]] std::string id() const { return "dar1"; }
  [[nodiscard]] Eigen::Index dim() const { return 3; }
  [[nodiscard]] std::size_t presample() const { return 1; }
  [[nodiscard]] std::size_t min_length() const { return 2; }
  [[nodiscard]] const Dar1Bounds& bounds() const { return bounds_; }
  [[nodiscard]] std::vector<std::string> param_names() const { return {"phi", "omega", "alpha"}; }

  [[nodiscard]] LinearConstraints constraints() const {
    return ConstraintBuilder(3)
        .upper(0, bounds_.c1)
        .lower(0, -bounds_.c1)
        .lower(1, bounds_.c2)
        .upper(1, bounds_.c3)
        .lower(2, bounds_.c4)
        .upper(2, bounds_.c5)
        .build();
  }

  [[nodiscard]] bool feasible(const Eigen::VectorXd& theta) const {
    return theta.size() == 3 && theta.allFinite() && constraints().contains(theta);
  }

  template <class Visitor>
  void for_each_contrib(const TimeSeries& series, const Eigen::VectorXd& theta, Visitor&& visit) const {
    require_valid(*this, series, theta);
    const double phi = theta(0);
    const double omega = theta(1);
    const double alpha = theta(2);
    Eigen::VectorXd grad(3);
    Eigen::MatrixXd hess(3, 3);
    for (std::size_t t = 1; t < series.size(); ++t) {
      const double y = series[t - 1];
      const double y2 = y * y;
      const double h = omega + alpha * y2;
      const double lam = series[t] - phi * y;
      const double r = lam * lam / h;
      const double loglik = -0.5 * std::log(h) - 0.5 * r;

      const double g_var = -0.5 * (1.0 - r) / h;  // d l / d h
      grad(0) = lam * y / h;
      grad(1) = g_var;
      grad(2) = g_var * y2;

      const double h_var = 0.5 * (1.0 - 2.0 * r) / (h * h);  // d^2 l / d h^2
      const double cross = -lam * y / (h * h);            // d^2 l / d phi d h
      hess(0, 0) = -y2 / h;
      hess(0, 1) = hess(1, 0) = cross;
      hess(0, 2) = hess(2, 0) = cross * y2;
      hess(1, 1) = h_var;
      hess(1, 2) = hess(2, 1) = h_var * y2;
      hess(2, 2) = h_var * y2 * y2;
      visit(t - 1, loglik, std::as_const(grad), std::as_const(hess));
    }
  }

  [[nodiscard]] double loglik(const TimeSeries& series, const Eigen::VectorXd& theta) const {
    require_valid(*this, series, theta);
    double total = 0.0;
    for (std::size_t t = 1; t < series.size(); ++t) {
      const double y = series[t - 1];
      const double h = theta(1) + theta(2) * y * y;
      const double lam = series[t] - theta(0) * y;
      total += -0.5 * std::log(h) - 0.5 * lam * lam / h;
    }
    return total;
  }

  [[nodiscard]] std::vector<double> residuals(const TimeSeries& series, const Eigen::VectorXd& theta) const {
    require_valid(*this, series, theta);
    std::vector<double> out;
    out.reserve(series.size() - 1);
    for (std::size_t t = 1; t < series.size(); ++t) {
      const double y = series[t - 1];
      out.push_back((series[t] - theta(0) * y) / std::sqrt(theta(1) + theta(2) * y * y));
    }
    return out;
  }

  /// (lag-1 autocorrelation, s^2 / 2, 0.25), kept strictly inside the box.
  [[nodiscard]] Eigen::VectorXd default_init(const TimeSeries& series) const {
    const auto x = series.values();
    const double m = sample_mean(x);
    double c0 = 0.0;
    double c1 = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      c0 += (x[t] - m) * (x[t] - m);
      if (t > 0) c1 += (x[t] - m) * (x[t - 1] - m);
    }
    const double rho = c0 > 0.0 ? c1 / c0 : 0.0;
    const double s2 = sample_variance(x);
    const double lim = 0.99 * bounds_.c1;
    return Eigen::Vector3d(std::clamp(rho, -lim, lim),
                           std::clamp(0.5 * s2, 10.0 * bounds_.c2, 0.1 * bounds_.c3),
                           std::clamp(0.25, 10.0 * bounds_.c4, 0.5 * bounds_.c5));
  }

  [[nodiscard]] bool lyapunov_stable(const Eigen::VectorXd& theta) const {
    return dar1_lyapunov_exponent(theta(0), theta(2)) < 0.0;
  }

  void require_simulable(const Eigen::VectorXd& theta) const {
    if (!feasible(theta)) throw Error(ErrorKind::InfeasibleTheta, "dar1 simulation parameters");
    if (!lyapunov_stable(theta)) {
      throw Error(ErrorKind::NonstationaryRegion, "E log|phi + e sqrt(alpha)| >= 0");
    }
  }

  [[nodiscard]] std::size_t innovations_needed(std::size_t n, std::size_t burn_in) const {
    return n + burn_in;
  }

  /// X_0 = 0, then one step per innovation; the last n values are kept.
  /// The Lyapunov condition is checked by require_simulable, not here.
  [[nodiscard]] SimPath simulate_path(const Eigen::VectorXd& theta, std::span<const double> e,
                                      std::size_t n) const {
    if (!feasible(theta)) throw Error(ErrorKind::InfeasibleTheta, "dar1 simulation parameters");
    if (e.size() < n) throw Error(ErrorKind::Usage, "dar1 simulation needs at least n innovations");
    SimPath path;
    path.x.reserve(n);
    path.e.reserve(n);
    double x_prev = 0.0;
    for (std::size_t t = 0; t < e.size(); ++t) {
      const double x = theta(0) * x_prev + e[t] * std::sqrt(theta(1) + theta(2) * x_prev * x_prev);
      if (t + n >= e.size()) {
        path.x.push_back(x);
        path.e.push_back(e[t]);
      }
      x_prev = x;
    }
    return path;
  }

 private:
  Dar1Bounds bounds_;
};

}  // namespace imnorm
