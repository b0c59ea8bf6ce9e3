#pragma once

// Model-agnostic building blocks: series container, parameter vectors with
// linear feasible regions, per-observation likelihood contributions and the
// compile-time contract every model satisfies.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace imnorm {

enum class ErrorKind {
  InfeasibleTheta,
  SeriesTooShort,
  NonFiniteData,
  NonstationaryRegion,
  NoConvergence,
  SingularHessian,
  SingularV,
  SingularScoreMatrix,
  BadPairIndex,
  TooFewObservations,
  Io,
  Parse,
  Usage,
  BreakerTripped,
};

inline const char* to_string(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::InfeasibleTheta: return "InfeasibleTheta";
    case ErrorKind::SeriesTooShort: return "SeriesTooShort";
    case ErrorKind::NonFiniteData: return "NonFiniteData";
    case ErrorKind::NonstationaryRegion: return "NonstationaryRegion";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::SingularV: return "SingularV";
    case ErrorKind::SingularScoreMatrix: return "SingularScoreMatrix";
    case ErrorKind::BadPairIndex: return "BadPairIndex";
    case ErrorKind::TooFewObservations: return "TooFewObservations";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Usage: return "Usage";
    case ErrorKind::BreakerTripped: return "BreakerTripped";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct Simulated {
  std::uint64_t seed = 0;
  std::string model_id;
};

struct Ingested {
  std::string source_path;
};

using Origin = std::variant<Simulated, Ingested>;

/// Ordered finite observations. Construction rejects NaN/Inf.
class TimeSeries {
 public:
  TimeSeries() = default;

  explicit TimeSeries(std::vector<double> values, Origin origin = Ingested{})
      : values_(std::move(values)), origin_(std::move(origin)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw Error(ErrorKind::NonFiniteData,
                    "observation " + std::to_string(i + 1) + " is not finite");
      }
    }
  }

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] bool empty() const noexcept { return values_.empty(); }
  [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }
  [[nodiscard]] const Origin& origin() const noexcept { return origin_; }

 private:
  std::vector<double> values_;
  Origin origin_;
};

/// Parameter vector tagged with the model it belongs to.
struct ParamVector {
  std::string model_id;
  Eigen::VectorXd theta;
};

/// One observation's quasi-log-likelihood value with its gradient and Hessian.
struct LikContrib {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

struct ResidualSeries {
  std::vector<double> values;
  ParamVector theta_hat;
};

/// Feasible region { theta : A theta <= b }. Bounds are written as rows too.
struct LinearConstraints {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  [[nodiscard]] Eigen::Index rows() const noexcept { return A.rows(); }

  [[nodiscard]] bool contains(const Eigen::VectorXd& theta) const {
    if (theta.size() != A.cols()) return false;
    for (Eigen::Index k = 0; k < A.rows(); ++k) {
      const double lhs = A.row(k).dot(theta);
      if (!(lhs <= b(k))) return false;
    }
    return true;
  }

  [[nodiscard]] Eigen::VectorXd slack(const Eigen::VectorXd& theta) const { return b - A * theta; }
};

/// Small helper to assemble constraint rows one at a time.
class ConstraintBuilder {
 public:
  explicit ConstraintBuilder(Eigen::Index dim) : dim_(dim) {}

  ConstraintBuilder& upper(Eigen::Index i, double value) { return row({{i, 1.0}}, value); }
  ConstraintBuilder& lower(Eigen::Index i, double value) { return row({{i, -1.0}}, -value); }

  ConstraintBuilder& row(std::vector<std::pair<Eigen::Index, double>> coeffs, double rhs) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(dim_);
    for (auto [i, c] : coeffs) a(i) += c;
    rows_.push_back(std::move(a));
    rhs_.push_back(rhs);
    return *this;
  }

  [[nodiscard]] LinearConstraints build() const {
    LinearConstraints c;
    c.A.resize(static_cast<Eigen::Index>(rows_.size()), dim_);
    c.b.resize(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      c.A.row(static_cast<Eigen::Index>(k)) = rows_[k].transpose();
      c.b(static_cast<Eigen::Index>(k)) = rhs_[k];
    }
    return c;
  }

 private:
  Eigen::Index dim_;
  std::vector<Eigen::VectorXd> rows_;
  std::vector<double> rhs_;
};

/// Callback shape used by LikelihoodModel::for_each_contrib. The grad and hess
/// references point into buffers reused across observations.
using ContribVisitorSignature = void(std::size_t, double, const Eigen::VectorXd&,
                                     const Eigen::MatrixXd&);

namespace detail {
struct NullContribVisitor {
  void operator()(std::size_t, double, const Eigen::VectorXd&, const Eigen::MatrixXd&) const {}
};
}  // namespace detail

/// Contract shared by the TMA(1), GARCH(p,q) and DAR(1) models.
template <class M>
concept LikelihoodModel = requires(const M& m, const TimeSeries& s, const Eigen::VectorXd& th,
                                   detail::NullContribVisitor v) {
  { m.id() } -> std::convertible_to<std::string>;
  { m.dim() } -> std::convertible_to<Eigen::Index>;
  { m.presample() } -> std::convertible_to<std::size_t>;
  { m.min_length() } -> std::convertible_to<std::size_t>;
  { m.constraints() } -> std::convertible_to<LinearConstraints>;
  { m.feasible(th) } -> std::convertible_to<bool>;
  { m.loglik(s, th) } -> std::convertible_to<double>;
  { m.residuals(s, th) } -> std::convertible_to<std::vector<double>>;
  { m.default_init(s) } -> std::convertible_to<Eigen::VectorXd>;
  { m.param_names() } -> std::convertible_to<std::vector<std::string>>;
  m.for_each_contrib(s, th, v);
};

/// Throws InfeasibleTheta / SeriesTooShort when preconditions fail.
template <LikelihoodModel M>
void require_valid(const M& model, const TimeSeries& series, const Eigen::VectorXd& theta) {
  if (theta.size() != model.dim()) {
    throw Error(ErrorKind::InfeasibleTheta, model.id() + " expects " + std::to_string(model.dim()) +
                                                " parameters, got " + std::to_string(theta.size()));
  }
  if (!model.feasible(theta)) {
    throw Error(ErrorKind::InfeasibleTheta, "theta outside the " + model.id() + " parameter space");
  }
  if (series.size() < model.min_length()) {
    throw Error(ErrorKind::SeriesTooShort, model.id() + " needs at least " +
                                               std::to_string(model.min_length()) +
                                               " observations, got " + std::to_string(series.size()));
  }
}

/// One LikContrib per usable time index, in time order.
template <LikelihoodModel M>
std::vector<LikContrib> model_contribs(const M& model, const TimeSeries& series,
                                       const Eigen::VectorXd& theta) {
  std::vector<LikContrib> out;
  out.reserve(series.size());
  model.for_each_contrib(series, theta,
                         [&](std::size_t, double l, const Eigen::VectorXd& g, const Eigen::MatrixXd& h) {
                           out.push_back(LikContrib{l, g, h});
                         });
  return out;
}

template <LikelihoodModel M>
ResidualSeries residuals(const M& model, const TimeSeries& series, const Eigen::VectorXd& theta) {
  return ResidualSeries{model.residuals(series, theta), ParamVector{model.id(), theta}};
}

/// Sufficient statistics of one likelihood evaluation.
struct LikMoments {
  std::size_t n = 0;
  double loglik = 0.0;
  Eigen::VectorXd grad;  // sum of per-observation gradients
  Eigen::MatrixXd hess;  // sum of per-observation Hessians
  Eigen::MatrixXd opg;   // sum of grad grad'
};

template <LikelihoodModel M>
LikMoments lik_moments(const M& model, const TimeSeries& series, const Eigen::VectorXd& theta) {
  const Eigen::Index p = model.dim();
  LikMoments m;
  m.grad = Eigen::VectorXd::Zero(p);
  m.hess = Eigen::MatrixXd::Zero(p, p);
  m.opg = Eigen::MatrixXd::Zero(p, p);
  model.for_each_contrib(series, theta,
                         [&](std::size_t, double l, const Eigen::VectorXd& g, const Eigen::MatrixXd& h) {
                           ++m.n;
                           m.loglik += l;
                           m.grad += g;
                           m.hess += h;
                           m.opg.noalias() += g * g.transpose();
                         });
  return m;
}

inline double sample_mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

/// Sample variance with divisor n - 1.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace imnorm
