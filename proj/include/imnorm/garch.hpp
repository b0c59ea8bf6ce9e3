#pragma once

// GARCH(p,q):  X_t = sigma_t e_t,
//   sigma_t^2 = omega + sum_i alpha_i X_{t-i}^2 + sum_j beta_j sigma_{t-j}^2,
// with theta = (omega, alpha_1..alpha_p, beta_1..beta_q).
//
// The filter treats the first m = max(p,q) observations as presample: their
// variance slots hold the in-sample mean of X^2 and have zero derivatives.
// Likelihood contributions run over t = m+1..n.

#include "imnorm/core.hpp"
#include "imnorm/tma1.hpp"  // SimPath

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace imnorm {

struct GarchParams {
  double omega = 0.0;
  std::vector<double> alpha;
  std::vector<double> beta;

  static GarchParams from_vector(const Eigen::VectorXd& theta, int p, int q) {
    GarchParams g;
    g.omega = theta(0);
    for (int i = 0; i < p; ++i) g.alpha.push_back(theta(1 + i));
    for (int j = 0; j < q; ++j) g.beta.push_back(theta(1 + p + j));
    return g;
  }

  [[nodiscard]] Eigen::VectorXd to_vector() const {
    Eigen::VectorXd v(1 + alpha.size() + beta.size());
    v(0) = omega;
    for (std::size_t i = 0; i < alpha.size(); ++i) v(1 + i) = alpha[i];
    for (std::size_t j = 0; j < beta.size(); ++j) v(1 + alpha.size() + j) = beta[j];
    return v;
  }
};

struct GarchBounds {
  double omega_min = 1e-8;
  double omega_max = 1e6;
  double alpha_max = 10.0;
  double beta_sum_max = 1.0 - 1e-6;
};

/// sigma_t^2 with its first and second derivatives in theta.
struct SigmaState {
  double sigma2 = 0.0;
  Eigen::VectorXd d_sigma2;
  Eigen::MatrixXd dd_sigma2;
};

class Garch {
 public:
  explicit Garch(int p = 1, int q = 1, GarchBounds bounds = {}) : p_(p), q_(q), bounds_(bounds) {
    if (p < 1 || q < 0) throw Error(ErrorKind::Usage, "GARCH orders need p >= 1 and q >= 0");
  }

  [[nodiscard]] std::string id() const {
    return "garch" + std::to_string(p_) + std::to_string(q_);
  }
  [[nodiscard]] int p() const { return p_; }
  [[nodiscard]] int q() const { return q_; }
  [[nodiscard]] Eigen::Index dim() const { return 1 + p_ + q_; }
  [[nodiscard]] std::size_t presample() const { return static_cast<std::size_t>(std::max(p_, q_)); }
  [[nodiscard]] std::size_t min_length() const { return presample() + 1; }

  [[nodiscard]] std::vector<std::string> param_names() const {
    std::vector<std::string> names{"omega"};
    for (int i = 1; i <= p_; ++i) names.push_back(p_ == 1 ? "alpha" : "alpha" + std::to_string(i));
    for (int j = 1; j <= q_; ++j) names.push_back(q_ == 1 ? "beta" : "beta" + std::to_string(j));
    return names;
  }

  [[nodiscard]] LinearConstraints constraints() const {
    ConstraintBuilder cb(dim());
    cb.lower(0, bounds_.omega_min).upper(0, bounds_.omega_max);
    for (int i = 0; i < p_; ++i) cb.lower(1 + i, 0.0).upper(1 + i, bounds_.alpha_max);
    for (int j = 0; j < q_; ++j) cb.lower(1 + p_ + j, 0.0);
    if (q_ > 0) {
      std::vector<std::pair<Eigen::Index, double>> row;
      for (int j = 0; j < q_; ++j) row.emplace_back(1 + p_ + j, 1.0);
      cb.row(row, bounds_.beta_sum_max);
    }
    return cb.build();
  }

  [[nodiscard]] bool feasible(const Eigen::VectorXd& theta) const {
    return theta.size() == dim() && theta.allFinite() && constraints().contains(theta);
  }

  /// sum(alpha) + sum(beta) < 1 on top of feasibility.
  [[nodiscard]] bool second_order_stationary(const Eigen::VectorXd& theta) const {
    return feasible(theta) && theta.tail(p_ + q_).sum() < 1.0;
  }

  /// Variance filter for t = 1..n. `init` overrides the presample fill
  /// (mean of X^2 by default).
  [[nodiscard]] std::vector<SigmaState> sigma2_filter(const TimeSeries& series, const Eigen::VectorXd& theta,
                                                      std::optional<double> init = std::nullopt) const {
    require_valid(*this, series, theta);
    std::vector<SigmaState> states(series.size());
    run_filter(series, theta, init, true, [&](std::size_t t, const Buffers& b) {
      states[t] = SigmaState{b.h[t], b.dh.col(static_cast<Eigen::Index>(t)), b.ddh_at(t)};
    });
    return states;
  }

  template <class Visitor>
  void for_each_contrib(const TimeSeries& series, const Eigen::VectorXd& theta, Visitor&& visit) const {
    require_valid(*this, series, theta);
    const Eigen::Index k = dim();
    Eigen::VectorXd grad(k);
    Eigen::MatrixXd hess(k, k);
    const std::size_t m = presample();
    run_filter(series, theta, std::nullopt, true, [&](std::size_t t, const Buffers& b) {
      if (t < m) return;
      const double h = b.h[t];
      const double x2 = series[t] * series[t];
      const double r = x2 / h;
      const double loglik = -0.5 * (std::log(h) + r);
      const auto dh = b.dh.col(static_cast<Eigen::Index>(t));
      grad = (-0.5 * (1.0 - r) / h) * dh;
      const double c1 = -0.5 * (1.0 - r) / h;
      const double c2 = -0.5 * (2.0 * r - 1.0) / (h * h);
      for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
          const double v = c1 * b.ddh_entry(t, i, j) + c2 * dh(i) * dh(j);
          hess(i, j) = v;
          hess(j, i) = v;
        }
      }
      visit(t - m, loglik, std::as_const(grad), std::as_const(hess));
    });
  }

  [[nodiscard]] double loglik(const TimeSeries& series, const Eigen::VectorXd& theta) const {
    require_valid(*this, series, theta);
    double total = 0.0;
    const std::size_t m = presample();
    run_filter(series, theta, std::nullopt, false, [&](std::size_t t, const Buffers& b) {
      if (t < m) return;
      const double h = b.h[t];
      total += -0.5 * (std::log(h) + series[t] * series[t] / h);
    });
    return total;
  }

  /// X_t / sigma_t for t = m+1..n.
  [[nodiscard]] std::vector<double> residuals(const TimeSeries& series, const Eigen::VectorXd& theta,
                                              std::optional<double> init = std::nullopt) const {
    require_valid(*this, series, theta);
    std::vector<double> out;
    out.reserve(series.size());
    const std::size_t m = presample();
    run_filter(series, theta, init, false, [&](std::size_t t, const Buffers& b) {
      if (t >= m) out.push_back(series[t] / std::sqrt(b.h[t]));
    });
    return out;
  }

  /// (0.1 s^2, 0.05, 0.85) for GARCH(1,1); the ARCH and GARCH mass is split
  /// evenly across lags for higher orders.
  [[nodiscard]] Eigen::VectorXd default_init(const TimeSeries& series) const {
    const double s2 = std::max(sample_variance(series.values()), 1e-4);
    Eigen::VectorXd theta(dim());
    theta(0) = std::clamp(0.1 * s2, 10.0 * bounds_.omega_min, 0.1 * bounds_.omega_max);
    for (int i = 0; i < p_; ++i) theta(1 + i) = 0.05 / p_;
    for (int j = 0; j < q_; ++j) theta(1 + p_ + j) = 0.85 / q_;
    return theta;
  }

  [[nodiscard]] std::size_t innovations_needed(std::size_t n, std::size_t burn_in) const {
    return n + burn_in;
  }

  void require_simulable(const Eigen::VectorXd& theta) const {
    if (!second_order_stationary(theta)) {
      throw Error(ErrorKind::InfeasibleTheta, "GARCH simulation needs sum(alpha)+sum(beta) < 1");
    }
  }

  /// Presample X^2 and sigma^2 start at omega / (1 - sum alpha - sum beta).
  [[nodiscard]] SimPath simulate_path(const Eigen::VectorXd& theta, std::span<const double> e,
                                      std::size_t n) const {
    require_simulable(theta);
    if (e.size() < n) throw Error(ErrorKind::Usage, "GARCH simulation needs at least n innovations");
    const double omega = theta(0);
    const double persistence = theta.tail(p_ + q_).sum();
    const double h0 = omega / (1.0 - persistence);
    const std::size_t lag = static_cast<std::size_t>(std::max(p_, q_));
    std::vector<double> x2(lag, h0);
    std::vector<double> h(lag, h0);
    SimPath path;
    path.x.reserve(n);
    path.e.reserve(n);
    for (std::size_t t = 0; t < e.size(); ++t) {
      const std::size_t now = lag + t;
      double ht = omega;
      for (int i = 1; i <= p_; ++i) ht += theta(i) * x2[now - static_cast<std::size_t>(i)];
      for (int j = 1; j <= q_; ++j) ht += theta(p_ + j) * h[now - static_cast<std::size_t>(j)];
      const double x = std::sqrt(ht) * e[t];
      h.push_back(ht);
      x2.push_back(x * x);
      if (t + n >= e.size()) {
        path.x.push_back(x);
        path.e.push_back(e[t]);
      }
    }
    return path;
  }

 private:
  // Column t of dh holds d sigma_t^2 / d theta; ddh holds the packed lower
  // triangle of the second derivative matrix per t.
  struct Buffers {
    std::vector<double> h;
    Eigen::MatrixXd dh;
    Eigen::MatrixXd ddh;  // rows: packed (i,j), j <= i
    Eigen::Index k = 0;

    static Eigen::Index packed(Eigen::Index i, Eigen::Index j) {
      if (j > i) std::swap(i, j);
      return i * (i + 1) / 2 + j;
    }
    [[nodiscard]] double ddh_entry(std::size_t t, Eigen::Index i, Eigen::Index j) const {
      return ddh(packed(i, j), static_cast<Eigen::Index>(t));
    }
    [[nodiscard]] Eigen::MatrixXd ddh_at(std::size_t t) const {
      Eigen::MatrixXd out(k, k);
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) out(i, j) = ddh_entry(t, i, j);
      return out;
    }
  };

  template <class OnStep>
  void run_filter(const TimeSeries& series, const Eigen::VectorXd& theta, std::optional<double> init,
                  bool with_derivatives, OnStep&& on_step) const {
    const std::size_t n = series.size();
    const std::size_t m = presample();
    const Eigen::Index k = dim();
    double fill = 0.0;
    if (init) {
      fill = *init;
    } else {
      for (double x : series.values()) fill += x * x;
      fill /= static_cast<double>(n);
    }

    Buffers b;
    b.k = k;
    b.h.assign(n, fill);
    if (with_derivatives) {
      b.dh = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(n));
      b.ddh = Eigen::MatrixXd::Zero(k * (k + 1) / 2, static_cast<Eigen::Index>(n));
    }
    const double omega = theta(0);
    for (std::size_t t = 0; t < n; ++t) {
      if (t >= m) {
        double ht = omega;
        for (int i = 1; i <= p_; ++i) {
          const double x = series[t - static_cast<std::size_t>(i)];
          ht += theta(i) * x * x;
        }
        for (int j = 1; j <= q_; ++j) ht += theta(p_ + j) * b.h[t - static_cast<std::size_t>(j)];
        b.h[t] = ht;

        if (with_derivatives) {
          const auto col = static_cast<Eigen::Index>(t);
          // first derivatives: direct term plus sum_j beta_j d h_{t-j}
          b.dh(0, col) = 1.0;
          for (int i = 1; i <= p_; ++i) {
            const double x = series[t - static_cast<std::size_t>(i)];
            b.dh(i, col) = x * x;
          }
          for (int j = 1; j <= q_; ++j) b.dh(p_ + j, col) = b.h[t - static_cast<std::size_t>(j)];
          for (int j = 1; j <= q_; ++j) {
            b.dh.col(col) += theta(p_ + j) * b.dh.col(col - j);
          }
          // second derivatives: only beta-indexed direct terms are nonzero
          for (int j = 1; j <= q_; ++j) {
            b.ddh.col(col) += theta(p_ + j) * b.ddh.col(col - j);
          }
          for (int kk = 1; kk <= q_; ++kk) {
            const Eigen::Index bk = p_ + kk;
            for (Eigen::Index a = 0; a < k; ++a) {
              // d/d theta_a of the direct term h_{t-k} in d h_t / d beta_k;
              // the diagonal (beta_k, beta_k) receives it from both factors
              const double term = b.dh(a, col - kk);
              b.ddh(Buffers::packed(bk, a), col) += (a == bk) ? 2.0 * term : term;
            }
          }
        }
      }
      on_step(t, std::as_const(b));
    }
  }

  int p_;
  int q_;
  GarchBounds bounds_;
};

}  // namespace imnorm
