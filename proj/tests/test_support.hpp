#pragma once

#include "imnorm/core.hpp"
#include "imnorm/model.hpp"
#include "imnorm/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace imnorm::testing {

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd dn = x;
    up(i) += h;
    dn(i) -= h;
    g(i) = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

/// Central differences of an analytic gradient.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::MatrixXd out(x.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd dn = x;
    up(j) += h;
    dn(j) -= h;
    out.col(j) = (g(up) - g(dn)) / (2.0 * h);
  }
  return out;
}

/// Largest |a - b| / max(1, |b|) over all entries.
inline double max_rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / std::max(1.0, std::abs(b(i, j))));
  return worst;
}

inline double uniform(Engine& rng, double lo, double hi) {
  return lo + (hi - lo) * open_uniform(rng);
}

/// Interior parameter drawn away from every constraint.
inline Eigen::VectorXd random_interior(const Tma1&, Engine& rng) {
  const double phi = uniform(rng, -0.6, 0.6);
  const double xi = uniform(rng, -0.8 - phi, 0.8 - phi);
  return Eigen::Vector3d(phi, xi, uniform(rng, 0.5, 2.0));
}

inline Eigen::VectorXd random_interior(const Garch&, Engine& rng) {
  const double alpha = uniform(rng, 0.02, 0.4);
  const double beta = uniform(rng, 0.1, 0.97 - alpha);
  return Eigen::Vector3d(uniform(rng, 0.05, 0.5), alpha, beta);
}

inline Eigen::VectorXd random_interior(const Dar1&, Engine& rng) {
  return Eigen::Vector3d(uniform(rng, -0.8, 0.8), uniform(rng, 0.2, 1.0), uniform(rng, 0.05, 0.8));
}

struct DerivativeCheck {
  double grad_err = 0.0;
  double hess_err = 0.0;
};

/// Compares summed analytic derivatives with central differences of the
/// model's total log-likelihood (gradient) and of the summed gradient (Hessian).
template <class M>
DerivativeCheck check_derivatives(const M& model, const TimeSeries& series, const Eigen::VectorXd& theta) {
  const LikMoments mom = lik_moments(model, series, theta);
  const auto ll = [&](const Eigen::VectorXd& th) { return model.loglik(series, th); };
  const auto gr = [&](const Eigen::VectorXd& th) { return lik_moments(model, series, th).grad; };
  return DerivativeCheck{max_rel_error(mom.grad, fd_gradient(ll, theta)),
                         max_rel_error(mom.hess, fd_jacobian(gr, theta))};
}

}  // namespace imnorm::testing
