#pragma once

// Gaussian quasi-maximum-likelihood fitting under linear inequality
// constraints A theta <= b.
//
// Each iteration restricts the step to the null space of the active
// constraints, takes a Newton step on that subspace (falling back to the
// outer-product-of-gradients matrix when the Hessian is not negative definite
// there), truncates it at the first blocking constraint and backtracks until
// the Armijo condition holds.

#include "imnorm/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace imnorm {

struct FitOptions {
  int max_iter = 500;
  double gtol = 1e-6;
  double armijo_c = 1e-4;
  /// Extra Newton steps taken after the tolerance is first met.
  int polish_steps = 2;
  /// Throw NoConvergence instead of returning converged = false.
  bool throw_on_no_convergence = true;
  /// Per-coordinate overrides of the starting point (0-based index -> value).
  std::map<Eigen::Index, double> init_overrides;
};

struct FitResult {
  ParamVector theta_hat;
  double loglik = 0.0;
  std::size_t n = 0;
  Eigen::MatrixXd J_hat;         // -(1/n) sum hess
  Eigen::MatrixXd I_hat;         // (1/n) sum grad grad'
  Eigen::MatrixXd sandwich_cov;  // J^-1 I J^-1 / n
  Eigen::VectorXd std_errors;
  Eigen::VectorXd grad;          // total gradient at theta_hat
  double projected_grad_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> loglik_path;  // loglik after each accepted step, starting point first
};

namespace detail {

inline double condition_number(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
  const double lo = ev.minCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / lo;
}

// Orthonormal basis of { d : A_W d = 0 }.
inline Eigen::MatrixXd null_space(const Eigen::MatrixXd& aw, Eigen::Index p) {
  if (aw.rows() == 0) return Eigen::MatrixXd::Identity(p, p);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aw.transpose());
  const Eigen::Index rank = qr.rank();
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  return q.rightCols(p - rank);
}

struct ActiveSet {
  std::vector<Eigen::Index> rows;
  Eigen::MatrixXd Z;
};

// Near-active constraints whose multipliers are nonnegative for the gradient g
// (ascent problem: g = A_W' lambda with lambda >= 0 holds the point in place).
inline ActiveSet active_set(const LinearConstraints& c, const Eigen::VectorXd& theta, const Eigen::VectorXd& g,
                            std::vector<Eigen::Index> forced = {}) {
  const Eigen::Index p = theta.size();
  const Eigen::VectorXd slack = c.slack(theta);
  std::vector<Eigen::Index> rows = forced;
  for (Eigen::Index k = 0; k < c.rows(); ++k) {
    const double tol = 1e-9 * (1.0 + std::abs(c.b(k)));
    if (slack(k) <= tol && c.A.row(k).dot(g) > 0.0 && std::find(rows.begin(), rows.end(), k) == rows.end()) {
      rows.push_back(k);
    }
  }
  while (!rows.empty()) {
    Eigen::MatrixXd aw(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t i = 0; i < rows.size(); ++i) aw.row(static_cast<Eigen::Index>(i)) = c.A.row(rows[i]);
    const Eigen::VectorXd lambda = aw.transpose().colPivHouseholderQr().solve(g);
    // Rows forced in by a blocking step stay for this iteration.
    Eigen::Index worst = -1;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      const bool is_forced = std::find(forced.begin(), forced.end(), rows[static_cast<std::size_t>(i)]) != forced.end();
      if (!is_forced && lambda(i) < 0.0 && (worst < 0 || lambda(i) < lambda(worst))) worst = i;
    }
    if (worst < 0) break;
    rows.erase(rows.begin() + worst);
  }
  Eigen::MatrixXd aw(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) aw.row(static_cast<Eigen::Index>(i)) = c.A.row(rows[i]);
  return ActiveSet{std::move(rows), null_space(aw, p)};
}

}  // namespace detail

template <LikelihoodModel M>
Eigen::VectorXd default_init(const M& model, const TimeSeries& series) {
  return model.default_init(series);
}

/// Maximizes the quasi-log-likelihood from `init` (model default when absent).
template <LikelihoodModel M>
FitResult fit(const M& model, const TimeSeries& series, std::optional<Eigen::VectorXd> init = std::nullopt,
              const FitOptions& opts = {}) {
  const Eigen::Index p = model.dim();
  Eigen::VectorXd theta = init ? *init : model.default_init(series);
  for (const auto& [i, v] : opts.init_overrides) {
    if (i < 0 || i >= p) throw Error(ErrorKind::Usage, "init override index out of range");
    theta(i) = v;
  }
  require_valid(model, series, theta);
  const LinearConstraints cons = model.constraints();

  FitResult res;
  LikMoments mom = lik_moments(model, series, theta);
  res.loglik_path.push_back(mom.loglik);
  int polish_left = -1;
  bool converged = false;
  int iter = 0;

  for (; iter < opts.max_iter; ++iter) {
    const double n = static_cast<double>(mom.n);
    const double tol = opts.gtol * (1.0 + std::abs(mom.loglik) / n);

    std::vector<Eigen::Index> forced;
    Eigen::VectorXd step;
    detail::ActiveSet act;
    double alpha_max = 1.0;
    Eigen::Index blocking = -1;
    // Constraints that block a nonzero step immediately join the active set.
    for (int attempt = 0; attempt <= cons.rows(); ++attempt) {
      act = detail::active_set(cons, theta, mom.grad, forced);
      const Eigen::MatrixXd& Z = act.Z;
      if (Z.cols() == 0) {
        step = Eigen::VectorXd::Zero(p);
        break;
      }
      const Eigen::VectorXd gz = Z.transpose() * mom.grad;
      const Eigen::MatrixXd neg_h = -(Z.transpose() * mom.hess * Z);
      Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
      if (llt.info() == Eigen::Success && detail::condition_number(neg_h) < 1e12) {
        step = Z * llt.solve(gz);
      } else {
        Eigen::MatrixXd b = Z.transpose() * mom.opg * Z;
        b.diagonal().array() += 1e-8 * (1.0 + b.diagonal().cwiseAbs().maxCoeff());
        step = Z * b.ldlt().solve(gz);
      }
      alpha_max = 1.0;
      blocking = -1;
      const Eigen::VectorXd slack = cons.slack(theta);
      for (Eigen::Index k = 0; k < cons.rows(); ++k) {
        if (std::find(act.rows.begin(), act.rows.end(), k) != act.rows.end()) continue;
        const double ad = cons.A.row(k).dot(step);
        if (ad > 0.0) {
          const double a = std::max(slack(k), 0.0) / ad;
          if (a < alpha_max) {
            alpha_max = a;
            blocking = k;
          }
        }
      }
      if (blocking >= 0 && alpha_max < 1e-10) {
        forced = act.rows;
        forced.push_back(blocking);
        continue;
      }
      break;
    }

    const Eigen::VectorXd pg = act.Z * (act.Z.transpose() * mom.grad);
    const double pg_norm = pg.cwiseAbs().maxCoeff();
    res.projected_grad_norm = pg_norm;
    if (pg_norm < tol) {
      converged = true;
      if (polish_left < 0) polish_left = opts.polish_steps;
      if (polish_left == 0) break;
      --polish_left;
    }
    if (step.cwiseAbs().maxCoeff() == 0.0) break;

    // Stay strictly on the feasible side of a blocking constraint.
    double alpha = blocking >= 0 ? std::min(1.0, alpha_max * (1.0 - 1e-12)) : 1.0;
    const double slope = mom.grad.dot(step);
    // Below the resolution of the log-likelihood the Armijo test is noise;
    // the full step is then taken if it loses no more than rounding.
    const double resolution = 1e-13 * (1.0 + std::abs(mom.loglik));
    const bool below_resolution = 0.5 * slope <= resolution;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_ll = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      trial = theta + alpha * step;
      if (model.feasible(trial)) {
        trial_ll = model.loglik(series, trial);
        const bool armijo = trial_ll >= mom.loglik + opts.armijo_c * alpha * slope;
        const bool rounding = below_resolution && bt == 0 && trial_ll >= mom.loglik - 100.0 * resolution;
        if (std::isfinite(trial_ll) && (armijo || rounding)) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No representable improvement left; accept only if already near stationary.
      if (pg_norm < 1e3 * tol) converged = true;
      break;
    }
    theta = trial;
    mom = lik_moments(model, series, theta);
    res.loglik_path.push_back(mom.loglik);
  }

  res.iterations = iter;
  res.converged = converged;
  if (!converged && opts.throw_on_no_convergence) {
    throw Error(ErrorKind::NoConvergence, model.id() + " fit did not converge in " + std::to_string(iter) +
                                              " iterations (projected gradient " +
                                              std::to_string(res.projected_grad_norm) + ")");
  }

  const double n = static_cast<double>(mom.n);
  res.theta_hat = ParamVector{model.id(), theta};
  res.loglik = mom.loglik;
  res.n = mom.n;
  res.grad = mom.grad;
  res.J_hat = -mom.hess / n;
  res.I_hat = mom.opg / n;
  if (detail::condition_number(res.J_hat) > 1e12) {
    throw Error(ErrorKind::SingularHessian, "J_hat is numerically singular at the optimum");
  }
  const Eigen::MatrixXd j_inv = res.J_hat.inverse();
  res.sandwich_cov = j_inv * res.I_hat * j_inv.transpose() / n;
  res.sandwich_cov = 0.5 * (res.sandwich_cov + res.sandwich_cov.transpose()).eval();
  res.std_errors = res.sandwich_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return res;
}

}  // namespace imnorm
