#pragma once

// Monte Carlo size and power experiments: simulate, fit, test, tabulate.

#include "imnorm/classical.hpp"
#include "imnorm/imtest.hpp"
#include "imnorm/io.hpp"
#include "imnorm/model.hpp"
#include "imnorm/qmle.hpp"
#include "imnorm/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace imnorm {

/// One test applied in every replication: the IM test with a pair set, or a
/// classical residual test.
struct TestSpec {
  bool is_im = true;
  PairSet pairs;
  ClassicalTest classical = ClassicalTest::JB;

  static TestSpec im(PairSet p) { return TestSpec{true, std::move(p), ClassicalTest::JB}; }
  static TestSpec of(ClassicalTest t) { return TestSpec{false, {}, t}; }

  [[nodiscard]] std::string name() const { return is_im ? "im" : to_string(classical); }
  [[nodiscard]] std::string pairs_str() const { return is_im ? pairs.str(';') : ""; }

  /// "im@1:1;2:2", "im" (diagonal of a p-parameter model) or a classical id.
  static TestSpec parse(std::string_view s, Eigen::Index p) {
    if (s == "im") return im(PairSet::diagonal(static_cast<int>(p)));
    if (s.starts_with("im@")) return im(PairSet::parse(s.substr(3)));
    return of(parse_classical_test(s));
  }

  [[nodiscard]] std::string str() const { return is_im ? "im@" + pairs.str(';') : name(); }
};

struct McDesign {
  std::string model_id = "garch11";
  double threshold = 0.5;
  Eigen::VectorXd theta0;
  std::vector<std::size_t> n_list;
  std::vector<ErrorDist> dists;
  std::vector<TestSpec> tests;
  std::size_t R = 2000;
  std::vector<double> levels = {0.05, 0.10};
  std::uint64_t base_seed = 1;
  std::size_t burn_in = kDefaultBurnIn;
  unsigned workers = 1;
  double breaker_rate = 0.20;
};

/// Outcome of one test in one replication.
struct TestOutcome {
  bool ok = false;
  double statistic = 0.0;
  double p_value = 1.0;
  std::string reason;
};

struct Replication {
  std::size_t r = 0;
  std::vector<TestOutcome> outcomes;  // one per design test
};

struct McCell {
  std::size_t n = 0;
  ErrorDist dist = ErrorDist::N01;
  std::vector<Replication> reps;
  double wall_seconds = 0.0;

  [[nodiscard]] std::size_t failures(std::size_t test) const {
    std::size_t f = 0;
    for (const auto& rep : reps) f += rep.outcomes[test].ok ? 0 : 1;
    return f;
  }

  /// Rejection frequency among successful replications.
  [[nodiscard]] double rate(std::size_t test, double level) const {
    std::size_t ok = 0;
    std::size_t rej = 0;
    for (const auto& rep : reps) {
      const auto& o = rep.outcomes[test];
      if (!o.ok) continue;
      ++ok;
      rej += o.p_value < level ? 1 : 0;
    }
    return ok == 0 ? 0.0 : static_cast<double>(rej) / static_cast<double>(ok);
  }

  [[nodiscard]] std::vector<double> statistics(std::size_t test) const {
    std::vector<double> s;
    for (const auto& rep : reps)
      if (rep.outcomes[test].ok) s.push_back(rep.outcomes[test].statistic);
    return s;
  }
};

struct McResult {
  McDesign design;
  std::vector<McCell> cells;
  std::optional<std::string> breaker;  // set when a cell exceeded the failure limit

  [[nodiscard]] const McCell& cell(std::size_t n, ErrorDist d) const {
    for (const auto& c : cells)
      if (c.n == n && c.dist == d) return c;
    throw Error(ErrorKind::Usage, "no cell for n=" + std::to_string(n) + " dist=" + to_string(d));
  }

  [[nodiscard]] std::size_t test_index(const std::string& spec) const {
    for (std::size_t k = 0; k < design.tests.size(); ++k)
      if (design.tests[k].str() == spec || design.tests[k].name() == spec) return k;
    throw Error(ErrorKind::Usage, "test '" + spec + "' is not part of the design");
  }
};

inline void validate(const McDesign& d) {
  if (d.R < 1) throw Error(ErrorKind::Usage, "R must be at least 1");
  if (d.n_list.empty()) throw Error(ErrorKind::Usage, "the n list is empty");
  if (d.dists.empty()) throw Error(ErrorKind::Usage, "the distribution list is empty");
  if (d.tests.empty()) throw Error(ErrorKind::Usage, "the test list is empty");
  if (d.levels.empty()) throw Error(ErrorKind::Usage, "the level list is empty");
  for (double a : d.levels)
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorKind::Usage, "levels must lie in (0, 1)");
  const AnyModel model = make_model(d.model_id, d.threshold);
  std::visit(
      [&](const auto& m) {
        if (d.theta0.size() != m.dim() || !m.feasible(d.theta0)) {
          throw Error(ErrorKind::InfeasibleTheta, "theta0 outside the " + m.id() + " parameter space");
        }
        m.require_simulable(d.theta0);
        for (const auto& t : d.tests)
          if (t.is_im) t.pairs.validate(m.dim());
        for (std::size_t n : d.n_list)
          if (n < std::max(m.min_length(), kMinClassicalObs + m.presample()))
            throw Error(ErrorKind::Usage, "n=" + std::to_string(n) + " is too short for " + m.id());
      },
      model);
}

namespace detail {

inline bool needs_null_table(const McDesign& d) {
  return std::any_of(d.tests.begin(), d.tests.end(), [](const TestSpec& t) {
    return !t.is_im && (t.classical == ClassicalTest::CVM || t.classical == ClassicalTest::AD ||
                        t.classical == ClassicalTest::LL);
  });
}

inline ClassicalReport run_with_table(ClassicalTest t, std::span<const double> x, const NullTable* table) {
  switch (t) {
    case ClassicalTest::CVM: return cvm(x, *table);
    case ClassicalTest::AD: return ad(x, *table);
    case ClassicalTest::LL: return lilliefors(x, *table);
    default: return run_classical(t, x);
  }
}

}  // namespace detail

/// Runs a single replication; the result depends only on (design, n, dist, r).
template <LikelihoodModel M>
Replication run_replication(const M& model, const McDesign& d, std::size_t n, ErrorDist dist, std::size_t r,
                            const NullTable* table) {
  Replication rep;
  rep.r = r;
  rep.outcomes.resize(d.tests.size());
  auto fail_all = [&](const std::string& why) {
    for (auto& o : rep.outcomes) o = TestOutcome{false, 0.0, 1.0, why};
  };
  const std::uint64_t seed = substream_seed(d.base_seed, n, static_cast<std::uint64_t>(dist), r);
  FitResult fr;
  Simulation sim;
  try {
    sim = simulate(model, d.theta0, n, dist, seed, d.burn_in, false);
    fr = fit(model, sim.series);
  } catch (const Error& e) {
    fail_all(e.what());
    return rep;
  }
  const Eigen::VectorXd& th = fr.theta_hat.theta;
  std::optional<ImMoments> moments;
  std::vector<double> resid;
  for (std::size_t k = 0; k < d.tests.size(); ++k) {
    const TestSpec& t = d.tests[k];
    try {
      if (t.is_im) {
        if (!moments) moments = im_moments(model, sim.series, th, PairSet::all(static_cast<int>(model.dim())));
        std::vector<std::size_t> idx;
        for (const auto& pr : t.pairs.pairs()) {
          const auto& all = moments->pairs.pairs();
          idx.push_back(static_cast<std::size_t>(std::find(all.begin(), all.end(), pr) - all.begin()));
        }
        const ImTestReport rpt = im_from_moments(moments->subset(idx));
        rep.outcomes[k] = TestOutcome{true, rpt.statistic, rpt.p_value, {}};
      } else {
        if (resid.empty()) resid = model.residuals(sim.series, th);
        const ClassicalReport rpt = detail::run_with_table(t.classical, resid, table);
        rep.outcomes[k] = TestOutcome{true, rpt.statistic, rpt.p_value, {}};
      }
    } catch (const Error& e) {
      rep.outcomes[k] = TestOutcome{false, 0.0, 1.0, e.what()};
    }
  }
  return rep;
}

/// Replications of one (n, dist) cell spread over `workers` threads; each
/// replication writes its own slot, so the result is independent of scheduling.
template <LikelihoodModel M>
McCell run_cell(const M& model, const McDesign& d, std::size_t n, ErrorDist dist, const NullTable* table) {
  McCell cell;
  cell.n = n;
  cell.dist = dist;
  cell.reps.resize(d.R);
  const auto t0 = std::chrono::steady_clock::now();
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < d.R; r = next++) cell.reps[r] = run_replication(model, d, n, dist, r, table);
  };
  const unsigned w = std::max(1u, std::min<unsigned>(d.workers, static_cast<unsigned>(d.R)));
  if (w == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
  }
  cell.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

/// Runs every (n, dist) cell of the design. A cell whose failure rate for any
/// test exceeds the breaker rate stops the run and sets `breaker`.
inline McResult run(const McDesign& d) {
  validate(d);
  const NullTable* table = detail::needs_null_table(d) ? &default_null_table() : nullptr;
  McResult res;
  res.design = d;
  const AnyModel model = make_model(d.model_id, d.threshold);
  for (std::size_t n : d.n_list) {
    for (ErrorDist dist : d.dists) {
      McCell cell = std::visit([&](const auto& m) { return run_cell(m, d, n, dist, table); }, model);
      for (std::size_t k = 0; k < d.tests.size(); ++k) {
        const double rate = static_cast<double>(cell.failures(k)) / static_cast<double>(d.R);
        if (rate > d.breaker_rate && !res.breaker) {
          char buf[200];
          std::snprintf(buf, sizeof buf, "cell n=%zu dist=%s test=%s failed in %zu of %zu replications", n,
                        to_string(dist).c_str(), d.tests[k].str().c_str(), cell.failures(k), d.R);
          res.breaker = buf;
        }
      }
      res.cells.push_back(std::move(cell));
      if (res.breaker) return res;
    }
  }
  return res;
}

/// As run, over the alternatives (plus N(0,1) as a size control when asked).
inline McResult power_curve(McDesign d, bool include_null = true) {
  d.dists.assign(kAlternativeDists.begin(), kAlternativeDists.end());
  if (include_null) d.dists.insert(d.dists.begin(), ErrorDist::N01);
  return run(d);
}

inline std::string theta_str(const Eigen::VectorXd& th) {
  std::string s;
  char buf[32];
  for (Eigen::Index i = 0; i < th.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", th(i));
    if (i) s += ';';
    s += buf;
  }
  return s;
}

/// Resolved design as key=value pairs. Worker count is left out so that
/// outputs do not depend on it.
inline std::vector<std::pair<std::string, std::string>> design_config(const McDesign& d) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto join = [](const auto& xs, auto fmt) {
    std::string s;
    for (const auto& x : xs) {
      if (!s.empty()) s += ',';
      s += fmt(x);
    }
    return s;
  };
  kv.emplace_back("model", d.model_id);
  if (d.model_id == "tma1") kv.emplace_back("threshold", format_value(d.threshold));
  kv.emplace_back("theta", theta_str(d.theta0));
  kv.emplace_back("n", join(d.n_list, [](std::size_t n) { return std::to_string(n); }));
  kv.emplace_back("dists", join(d.dists, [](ErrorDist e) { return to_string(e); }));
  kv.emplace_back("tests", join(d.tests, [](const TestSpec& t) { return t.str(); }));
  kv.emplace_back("R", std::to_string(d.R));
  kv.emplace_back("levels", join(d.levels, [](double a) { return format_value(a); }));
  kv.emplace_back("base_seed", std::to_string(d.base_seed));
  kv.emplace_back("burn_in", std::to_string(d.burn_in));
  kv.emplace_back("breaker_rate", format_value(d.breaker_rate));
  return kv;
}

/// Header shared by the outputs of one or more runs that differ only in theta0.
inline OutputHeader mc_header(std::span<const McResult> results, const std::string& what) {
  OutputHeader h{"mc " + what, {}, true};
  if (results.empty()) return h;
  h.config = design_config(results.front().design);
  std::string thetas;
  for (const auto& r : results) thetas += (thetas.empty() ? "" : "|") + theta_str(r.design.theta0);
  for (auto& [k, v] : h.config)
    if (k == "theta") v = thetas;
  return h;
}

inline void write_table_csv(std::ostream& out, std::span<const McResult> results) {
  out << mc_header(results, "table").str();
  out << "model,theta0,n,dist,test,pairs,level,rate,failures,R,base_seed\n";
  char buf[64];
  for (const auto& res : results) {
    const McDesign& d = res.design;
    for (const auto& c : res.cells) {
      for (std::size_t k = 0; k < d.tests.size(); ++k) {
        for (double a : d.levels) {
          std::snprintf(buf, sizeof buf, "%.6f", c.rate(k, a));
          out << d.model_id << ',' << theta_str(d.theta0) << ',' << c.n << ',' << to_string(c.dist) << ','
              << d.tests[k].name() << ',' << d.tests[k].pairs_str() << ',' << format_value(a) << ',' << buf << ','
              << c.failures(k) << ',' << d.R << ',' << d.base_seed << '\n';
        }
      }
    }
  }
}

/// One row per (theta0, dist, test, n) at the given level (10% by default).
inline void write_figure_csv(std::ostream& out, std::span<const McResult> results, double level = 0.10) {
  out << mc_header(results, "figure-data").str();
  out << "model,theta0,dist,test,pairs,n,level,power,failures,R\n";
  char buf[64];
  for (const auto& res : results) {
    const McDesign& d = res.design;
    for (ErrorDist dist : d.dists) {
      for (std::size_t k = 0; k < d.tests.size(); ++k) {
        for (std::size_t n : d.n_list) {
          const auto it = std::find_if(res.cells.begin(), res.cells.end(),
                                       [&](const McCell& c) { return c.n == n && c.dist == dist; });
          if (it == res.cells.end()) continue;
          std::snprintf(buf, sizeof buf, "%.6f", it->rate(k, level));
          out << d.model_id << ',' << theta_str(d.theta0) << ',' << to_string(dist) << ',' << d.tests[k].name()
              << ',' << d.tests[k].pairs_str() << ',' << n << ',' << format_value(level) << ',' << buf << ','
              << it->failures(k) << ',' << d.R << '\n';
        }
      }
    }
  }
}

/// Failed replications with their reasons, one row per (cell, r, test).
inline void write_failures_csv(std::ostream& out, std::span<const McResult> results) {
  out << mc_header(results, "failures").str();
  out << "theta0,n,dist,r,test,reason\n";
  for (const auto& res : results) {
    const McDesign& d = res.design;
    for (const auto& c : res.cells) {
      for (const auto& rep : c.reps) {
        for (std::size_t k = 0; k < d.tests.size(); ++k) {
          const auto& o = rep.outcomes[k];
          if (o.ok) continue;
          std::string reason = o.reason;
          std::replace(reason.begin(), reason.end(), ',', ';');
          std::replace(reason.begin(), reason.end(), '\n', ' ');
          out << theta_str(d.theta0) << ',' << c.n << ',' << to_string(c.dist) << ',' << rep.r << ','
              << d.tests[k].str() << ',' << reason << '\n';
        }
      }
    }
  }
}

inline std::string table_csv(const McResult& res) {
  std::ostringstream os;
  write_table_csv(os, std::span<const McResult>(&res, 1));
  return os.str();
}

}  // namespace imnorm
