#pragma once

// First-order threshold moving-average model
//
//   X_t = (phi + xi I(X_{t-1} <= u)) sigma e_{t-1} + sigma e_t,
//
// parameterised by theta = (phi, xi, sigma2) with the threshold u fixed.
// The innovation filter eps_t = X_t / sigma - (phi + xi I(X_{t-1} <= u)) eps_{t-1}
// starts from eps_0 = 0 and its first and second derivatives are propagated
// alongside it.

#include "imnorm/core.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace imnorm {

struct Tma1Params {
  double phi = 0.0;
  double xi = 0.0;
  double sigma2 = 1.0;

  static Tma1Params from_vector(const Eigen::VectorXd& theta) { return {theta(0), theta(1), theta(2)}; }
  [[nodiscard]] Eigen::VectorXd to_vector() const { return Eigen::Vector3d(phi, xi, sigma2); }
};

/// Parameter-space constants: |phi| <= c1, |phi + xi| <= c1, c2 <= sigma2 <= c3.
struct Tma1Bounds {
  double c1 = 0.99;
  double c2 = 1e-6;
  double c3 = 1e6;
};

/// eps_t and its derivatives with respect to (phi, xi, sigma2).
struct EpsState {
  double eps = 0.0;
  Eigen::Vector3d d_eps = Eigen::Vector3d::Zero();
  Eigen::Matrix3d dd_eps = Eigen::Matrix3d::Zero();
};

/// Simulated path with the innovations aligned to the kept observations.
struct SimPath {
  std::vector<double> x;
  std::vector<double> e;
};

class Tma1 {
 public:
  explicit Tma1(double threshold = 0.5, Tma1Bounds bounds = {}) : u_(threshold), bounds_(bounds) {}

  [[nodiscard]] std::string id() const { return "tma1"; }
  [[nodiscard]] Eigen::Index dim() const { return 3; }
  [[nodiscard]] std::size_t presample() const { return 0; }
  [[nodiscard]] std::size_t min_length() const { return 2; }
  [[nodiscard]] double threshold() const { return u_; }
  [[nodiscard]] const Tma1Bounds& bounds() const { return bounds_; }
  [[nodiscard]] std::vector<std::string> param_names() const { return {"phi", "xi", "sigma2"}; }

  [[nodiscard]] LinearConstraints constraints() const {
    const double c1 = bounds_.c1;
    return ConstraintBuilder(3)
        .upper(0, c1)
        .lower(0, -c1)
        .row({{0, 1.0}, {1, 1.0}}, c1)
        .row({{0, -1.0}, {1, -1.0}}, c1)
        .lower(2, bounds_.c2)
        .upper(2, bounds_.c3)
        .build();
  }

  [[nodiscard]] bool feasible(const Eigen::VectorXd& theta) const {
    return theta.size() == 3 && theta.allFinite() && constraints().contains(theta);
  }

  /// States for t = 1..n. `eps0` replaces the zero start value; the
  /// indicator at t = 1 is taken as 0 because X_0 is unobserved.
  [[nodiscard]] std::vector<EpsState> eps_recursion(const TimeSeries& series, const Eigen::VectorXd& theta,
                                                    double eps0 = 0.0) const {
    require_valid(*this, series, theta);
    std::vector<EpsState> out;
    out.reserve(series.size());
    EpsState state;
    state.eps = eps0;
    for (std::size_t t = 0; t < series.size(); ++t) {
      step(series, t, theta, state);
      out.push_back(state);
    }
    return out;
  }

  template <class Visitor>
  void for_each_contrib(const TimeSeries& series, const Eigen::VectorXd& theta, Visitor&& visit) const {
    require_valid(*this, series, theta);
    const double s2 = theta(2);
    const double half_log_s2 = 0.5 * std::log(s2);
    Eigen::VectorXd grad(3);
    Eigen::MatrixXd hess(3, 3);
    EpsState st;
    for (std::size_t t = 0; t < series.size(); ++t) {
      step(series, t, theta, st);
      const double e = st.eps;
      const double loglik = -half_log_s2 - 0.5 * e * e;
      grad = -e * st.d_eps;
      grad(2) -= 0.5 / s2;
      hess = -(st.d_eps * st.d_eps.transpose()) - e * st.dd_eps;
      hess(2, 2) += 0.5 / (s2 * s2);
      visit(t, loglik, std::as_const(grad), std::as_const(hess));
    }
  }

  [[nodiscard]] double loglik(const TimeSeries& series, const Eigen::VectorXd& theta) const {
    require_valid(*this, series, theta);
    const double sigma = std::sqrt(theta(2));
    const double half_log_s2 = 0.5 * std::log(theta(2));
    double eps = 0.0;
    double total = 0.0;
    for (std::size_t t = 0; t < series.size(); ++t) {
      eps = series[t] / sigma - coefficient(series, t, theta) * eps;
      total += -half_log_s2 - 0.5 * eps * eps;
    }
    return total;
  }

  /// e_hat_t = (X_t - mu_t) / sigma, which equals eps_t.
  [[nodiscard]] std::vector<double> residuals(const TimeSeries& series, const Eigen::VectorXd& theta) const {
    require_valid(*this, series, theta);
    const double sigma = std::sqrt(theta(2));
    std::vector<double> out(series.size());
    double eps = 0.0;
    for (std::size_t t = 0; t < series.size(); ++t) {
      eps = series[t] / sigma - coefficient(series, t, theta) * eps;
      out[t] = eps;
    }
    return out;
  }

  [[nodiscard]] Eigen::VectorXd default_init(const TimeSeries& series) const {
    const double s2 = std::clamp(sample_variance(series.values()), 10.0 * bounds_.c2, 0.1 * bounds_.c3);
    return Eigen::Vector3d(0.0, 0.0, s2);
  }

  [[nodiscard]] std::size_t innovations_needed(std::size_t n, std::size_t burn_in) const {
    return n + burn_in + 1;
  }

  /// Runs the recursion from X_0 = sigma e_0 over all supplied innovations and
  /// keeps the last n values.
  [[nodiscard]] SimPath simulate_path(const Eigen::VectorXd& theta, std::span<const double> e,
                                      std::size_t n) const {
    if (!feasible(theta)) throw Error(ErrorKind::InfeasibleTheta, "tma1 simulation parameters");
    if (e.size() < n + 1) throw Error(ErrorKind::Usage, "tma1 simulation needs n + 1 innovations");
    const double phi = theta(0);
    const double xi = theta(1);
    const double sigma = std::sqrt(theta(2));
    const std::size_t total = e.size();
    SimPath path;
    path.x.reserve(n);
    path.e.reserve(n);
    double x_prev = sigma * e[0];
    for (std::size_t t = 1; t < total; ++t) {
      const double a = phi + (x_prev <= u_ ? xi : 0.0);
      const double x = a * sigma * e[t - 1] + sigma * e[t];
      if (t + n >= total) {
        path.x.push_back(x);
        path.e.push_back(e[t]);
      }
      x_prev = x;
    }
    return path;
  }

  void require_simulable(const Eigen::VectorXd& theta) const {
    if (!feasible(theta)) throw Error(ErrorKind::InfeasibleTheta, "tma1 simulation parameters");
  }

 private:
  [[nodiscard]] double coefficient(const TimeSeries& series, std::size_t t, const Eigen::VectorXd& theta) const {
    const bool below = t > 0 && series[t - 1] <= u_;
    return theta(0) + (below ? theta(1) : 0.0);
  }

  // Advances `st` from eps_{t-1} to eps_t (0-based t).
  void step(const TimeSeries& series, std::size_t t, const Eigen::VectorXd& theta, EpsState& st) const {
    const double s2 = theta(2);
    const double sigma = std::sqrt(s2);
    const double x = series[t];
    const bool below = t > 0 && series[t - 1] <= u_;
    const double a = theta(0) + (below ? theta(1) : 0.0);
    const Eigen::Vector3d da(1.0, below ? 1.0 : 0.0, 0.0);

    Eigen::Vector3d d_base(0.0, 0.0, -0.5 * x / (s2 * sigma));
    Eigen::Matrix3d dd_base = Eigen::Matrix3d::Zero();
    dd_base(2, 2) = 0.75 * x / (s2 * s2 * sigma);

    const double eps_prev = st.eps;
    const Eigen::Vector3d d_prev = st.d_eps;
    st.eps = x / sigma - a * eps_prev;
    st.d_eps = d_base - eps_prev * da - a * d_prev;
    const Eigen::Matrix3d cross = da * d_prev.transpose();
    st.dd_eps = dd_base - cross - cross.transpose() - a * st.dd_eps;
  }

  double u_;
  Tma1Bounds bounds_;
};

}  // namespace imnorm
