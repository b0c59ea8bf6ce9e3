#pragma once

// Runtime model selection and seeded simulation shared by all models.

#include "imnorm/core.hpp"
#include "imnorm/dar1.hpp"
#include "imnorm/error_dists.hpp"
#include "imnorm/garch.hpp"
#include "imnorm/rng.hpp"
#include "imnorm/tma1.hpp"

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace imnorm {

inline constexpr std::size_t kDefaultBurnIn = 500;

using AnyModel = std::variant<Tma1, Garch, Dar1>;

/// Accepts "tma1", "dar1" and "garchPQ" with single-digit orders (e.g. "garch11").
inline AnyModel make_model(std::string_view id, double threshold = 0.5) {
  if (id == "tma1") return Tma1(threshold);
  if (id == "dar1") return Dar1();
  if (id.size() == 7 && id.substr(0, 5) == "garch" && std::isdigit(static_cast<unsigned char>(id[5])) &&
      std::isdigit(static_cast<unsigned char>(id[6]))) {
    return Garch(id[5] - '0', id[6] - '0');
  }
  throw Error(ErrorKind::Parse, "unknown model '" + std::string(id) + "' (expected tma1, garchPQ, dar1)");
}

inline std::string model_id(const AnyModel& m) {
  return std::visit([](const auto& x) { return x.id(); }, m);
}

inline Eigen::Index model_dim(const AnyModel& m) {
  return std::visit([](const auto& x) { return x.dim(); }, m);
}

/// A simulated series together with the innovations aligned to it.
struct Simulation {
  TimeSeries series;
  std::vector<double> innovations;
};

/// Drives the model recursion with caller-supplied innovations; the burn-in is
/// whatever precedes the last n values. Stationarity checks are the caller's
/// job (see require_simulable).
template <class M>
Simulation simulate_from(const M& model, const Eigen::VectorXd& theta, std::span<const double> e, std::size_t n,
                         Origin origin = Simulated{}) {
  if (n == 0) throw Error(ErrorKind::Usage, "simulation length must be positive");
  SimPath path = model.simulate_path(theta, e, n);
  return Simulation{TimeSeries(std::move(path.x), std::move(origin)), std::move(path.e)};
}

/// Draws n + burn_in (+ any model-specific extra) innovations from `dist`
/// using an engine seeded with `seed`.
template <class M>
Simulation simulate(const M& model, const Eigen::VectorXd& theta, std::size_t n, ErrorDist dist,
                    std::uint64_t seed, std::size_t burn_in = kDefaultBurnIn, bool check_stationarity = true) {
  if (check_stationarity) model.require_simulable(theta);
  Engine rng = make_engine(seed);
  const std::vector<double> e = sample(dist, model.innovations_needed(n, burn_in), rng);
  return simulate_from(model, theta, e, n, Simulated{seed, model.id()});
}

}  // namespace imnorm
