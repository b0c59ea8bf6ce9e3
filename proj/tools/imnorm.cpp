// imnorm command-line tool.
//
// Exit codes: 0 ok, 1 usage, 2 infeasible or bad data, 3 I/O, 4 no
// convergence, 5 singular matrix, 6 Monte Carlo failure breaker.

#include "imnorm/classical.hpp"
#include "imnorm/imtest.hpp"
#include "imnorm/io.hpp"
#include "imnorm/model.hpp"
#include "imnorm/montecarlo.hpp"
#include "imnorm/null_tables.hpp"
#include "imnorm/qmle.hpp"
#include "imnorm/scan.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace imnorm;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kBadData = 2, kIo = 3, kNoConvergence = 4, kSingular = 5, kBreaker = 6 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage:
    case ErrorKind::BadPairIndex: return kUsage;
    case ErrorKind::Io: return kIo;
    case ErrorKind::NoConvergence: return kNoConvergence;
    case ErrorKind::SingularHessian:
    case ErrorKind::SingularV:
    case ErrorKind::SingularScoreMatrix: return kSingular;
    case ErrorKind::BreakerTripped: return kBreaker;
    default: return kBadData;
  }
}

/// Re-raises argument parsing problems as usage errors.
template <class F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InfeasibleTheta || e.kind() == ErrorKind::NonstationaryRegion) throw;
    throw Error(ErrorKind::Usage, e.what());
  }
}

std::string join(const std::vector<std::string>& xs, const std::string& sep = ",") {
  std::string s;
  for (const auto& x : xs) s += (s.empty() ? "" : sep) + x;
  return s;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Opens `path` for writing; "-" means stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    }
    path_ = path;
  }
  std::ostream& get() { return path_ == "-" ? std::cout : file_; }
  void close() {
    if (path_ == "-") {
      std::cout.flush();
      return;
    }
    file_.close();
    if (!file_) throw Error(ErrorKind::Io, "write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream file_;
};

/// Applies key=value lines from `path` to options of `cmd` not given on the
/// command line. Unknown keys are an error.
void apply_config(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorKind::Usage, "config '" + path + "': " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty()) {
      throw Error(ErrorKind::Usage, "config '" + path + "': sections are not supported (" + item.fullname() + ")");
    }
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = cmd->get_option_no_throw("--" + name);
    if (opt == nullptr || name == "config") {
      throw Error(ErrorKind::Usage, "config '" + path + "': unknown key '" + item.name + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw Error(ErrorKind::Usage, "config '" + path + "': key '" + item.name + "': " + e.what());
    }
  }
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string model = "garch11";
  double threshold = 0.5;
  std::vector<double> theta;
  std::size_t n = 1000;
  std::string dist = "n01";
  std::uint64_t seed = 1;
  std::size_t burn_in = kDefaultBurnIn;
  std::string out = "-";
};

int cmd_simulate(const SimulateArgs& a) {
  const AnyModel model = as_usage([&] { return make_model(a.model, a.threshold); });
  const ErrorDist dist = as_usage([&] { return parse_error_dist(a.dist); });
  if (a.n == 0) throw Error(ErrorKind::Usage, "--n must be positive");
  const Eigen::VectorXd theta = to_vector(a.theta);
  const Simulation sim = std::visit(
      [&](const auto& m) {
        if (theta.size() != m.dim() || !m.feasible(theta)) {
          throw Error(ErrorKind::InfeasibleTheta, "theta outside the " + m.id() + " parameter space");
        }
        return simulate(m, theta, a.n, dist, a.seed, a.burn_in);
      },
      model);
  OutputHeader h{"simulate",
                 {{"model", a.model},
                  {"theta", theta_str(theta)},
                  {"n", std::to_string(a.n)},
                  {"dist", a.dist},
                  {"seed", std::to_string(a.seed)},
                  {"burn_in", std::to_string(a.burn_in)}},
                 true};
  if (a.model == "tma1") h.config.emplace_back("threshold", format_value(a.threshold));
  Sink sink(a.out);
  write_series_csv(sink.get(), sim.series.values(), h);
  sink.close();
  return kOk;
}

// ---------------------------------------------------------------- fit-test

struct FitTestArgs {
  std::string in;
  std::string model = "garch11";
  double threshold = 0.5;
  std::string pairs;
  std::vector<std::string> tests;
  std::string csv;
  std::string config;
  int max_iter = 500;
  double gtol = 1e-6;
  std::vector<std::string> init;  // "i=value", 1-based
};

FitOptions fit_options(const FitTestArgs& a) {
  if (a.max_iter < 1) throw Error(ErrorKind::Usage, "max-iter must be positive");
  if (!(a.gtol > 0.0)) throw Error(ErrorKind::Usage, "gtol must be positive");
  FitOptions opts;
  opts.max_iter = a.max_iter;
  opts.gtol = a.gtol;
  opts.throw_on_no_convergence = false;
  for (const auto& item : a.init) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Usage, "init entries look like 2=0.05, got '" + item + "'");
    const double idx = as_usage([&] { return parse_double(item.substr(0, eq)); });
    const double v = as_usage([&] { return parse_double(item.substr(eq + 1)); });
    if (idx < 1.0 || idx != std::floor(idx)) throw Error(ErrorKind::Usage, "init index must be 1, 2, ...");
    opts.init_overrides[static_cast<Eigen::Index>(idx) - 1] = v;
  }
  return opts;
}

void print_fit(std::ostream& os, const std::vector<std::string>& names, const FitResult& f) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "Gaussian QMLE, n = %zu, loglik = %.6f, iterations = %d%s\n", f.n, f.loglik,
                f.iterations, f.converged ? "" : " (NOT CONVERGED)");
  os << buf;
  for (Eigen::Index i = 0; i < f.theta_hat.theta.size(); ++i) {
    std::snprintf(buf, sizeof buf, "  %-8s %12.6f  (%.6f)\n", names[static_cast<std::size_t>(i)].c_str(),
                  f.theta_hat.theta(i), f.std_errors.size() ? f.std_errors(i) : 0.0);
    os << buf;
  }
}

int cmd_fit_test(const FitTestArgs& a) {
  const AnyModel model = as_usage([&] { return make_model(a.model, a.threshold); });
  std::vector<ClassicalTest> tests;
  for (const auto& t : a.tests) tests.push_back(as_usage([&] { return parse_classical_test(t); }));
  const TimeSeries series = read_series_csv(a.in);

  return std::visit(
      [&](const auto& m) {
        const PairSet pairs = a.pairs.empty() ? PairSet::diagonal(static_cast<int>(m.dim()))
                                              : as_usage([&] { return PairSet::parse(a.pairs); });
        as_usage([&] {
          pairs.validate(m.dim());
          return 0;
        });
        const FitOptions opts = fit_options(a);
        const FitResult f = fit(m, series, std::nullopt, opts);
        if (!f.converged) {
          print_fit(std::cerr, m.param_names(), f);
          throw Error(ErrorKind::NoConvergence, "the optimizer did not converge; partial fit above");
        }
        print_fit(std::cout, m.param_names(), f);
        std::cout << '\n';
        std::ostringstream csv;
        std::vector<std::pair<std::string, std::string>> cfg{{"input", a.in}, {"model", a.model}};
        if (a.model == "tma1") cfg.emplace_back("threshold", format_value(a.threshold));
        cfg.emplace_back("pairs", pairs.str(';'));
        std::string tlist;
        for (ClassicalTest t : tests) tlist += (tlist.empty() ? "" : ";") + to_string(t);
        cfg.emplace_back("tests", tlist);
        cfg.emplace_back("max_iter", std::to_string(opts.max_iter));
        cfg.emplace_back("gtol", format_value(opts.gtol));
        std::string init;
        for (const auto& [i, v] : opts.init_overrides)
          init += (init.empty() ? "" : ";") + std::to_string(i + 1) + "=" + format_value(v);
        if (!init.empty()) cfg.emplace_back("init", init);
        csv << OutputHeader{"fit-test", cfg, false}.str();
        csv << "model,theta_hat,test,pairs,q,statistic,p_value,v_condition\n";
        const std::string th = theta_str(f.theta_hat.theta);
        int status = kOk;
        try {
          const ImTestReport r = im_statistic(m, series, f.theta_hat.theta, pairs);
          std::cout << im_text(r);
          csv << a.model << ',' << th << ",im," << r.pairs.str(';') << ',' << r.q << ',' << format_value(r.statistic)
              << ',' << format_value(r.p_value) << ',' << format_value(r.v_condition) << '\n';
        } catch (const Error& e) {
          std::cerr << "IM test failed: " << e.what() << '\n';
          status = exit_code(e.kind());
        }
        if (!tests.empty()) {
          const std::vector<double> resid = m.residuals(series, f.theta_hat.theta);
          for (ClassicalTest t : tests) {
            try {
              const ClassicalReport r = run_classical(t, resid);
              char buf[160];
              std::snprintf(buf, sizeof buf, "%-4s statistic = %.6f  p-value = %.6g\n", to_string(t).c_str(),
                            r.statistic, r.p_value);
              std::cout << buf;
              csv << a.model << ',' << th << ',' << to_string(t) << ",,," << format_value(r.statistic) << ','
                  << format_value(r.p_value) << ",\n";
            } catch (const Error& e) {
              std::cerr << to_string(t) << " failed: " << e.what() << '\n';
              if (status == kOk) status = exit_code(e.kind());
            }
          }
        }
        if (!a.csv.empty()) {
          Sink sink(a.csv);
          sink.get() << csv.str();
          sink.close();
        }
        return status;
      },
      model);
}

// ---------------------------------------------------------------- returns

struct ReturnsArgs {
  std::string in;
  std::string column = "close";
  std::string out = "-";
  double scale = 100.0;
};

int cmd_returns(const ReturnsArgs& a) {
  const std::vector<double> prices = read_csv_column(a.in, a.column);
  const std::vector<double> r = log_returns(prices, a.scale);
  OutputHeader h{"returns", {{"input", a.in}, {"column", a.column}, {"scale", format_value(a.scale)}}, false};
  Sink sink(a.out);
  write_series_csv(sink.get(), r, h);
  sink.close();
  return kOk;
}

// ---------------------------------------------------------------- mc

struct McArgs {
  std::string config;
  std::string model = "garch11";
  double threshold = 0.5;
  std::vector<std::string> theta;
  std::vector<std::size_t> n{1000, 2000, 3000};
  std::vector<std::string> dists{"n01"};
  std::vector<std::string> tests{"im", "jb", "ks", "cvm", "ad", "ll"};
  std::size_t R = 2000;
  std::vector<double> levels{0.05, 0.10};
  std::uint64_t seed = 20240607;
  std::size_t burn_in = kDefaultBurnIn;
  unsigned workers = 1;
  double breaker = 0.20;
  bool fast = false;
  bool power = false;
  std::string out = "mc";
};

/// theta values come comma-separated; design points are separated by '|'.
std::vector<Eigen::VectorXd> parse_theta_list(const std::vector<std::string>& parts) {
  std::vector<Eigen::VectorXd> out;
  const std::string all = join(parts);
  std::size_t start = 0;
  while (start <= all.size()) {
    const std::size_t bar = std::min(all.find('|', start), all.size());
    out.push_back(to_vector(as_usage([&] { return parse_double_list(all.substr(start, bar - start), "theta"); })));
    start = bar + 1;
  }
  return out;
}

int cmd_mc(const McArgs& a) {
  if (a.theta.empty()) throw Error(ErrorKind::Usage, "mc needs --theta");
  McDesign base;
  base.model_id = a.model;
  base.threshold = a.threshold;
  const AnyModel model = as_usage([&] { return make_model(a.model, a.threshold); });
  base.n_list = a.fast ? std::vector<std::size_t>{1000} : a.n;
  for (const auto& d : a.dists)
    if (!d.empty()) base.dists.push_back(as_usage([&] { return parse_error_dist(d); }));
  if (a.power) {
    for (ErrorDist d : kAlternativeDists)
      if (std::find(base.dists.begin(), base.dists.end(), d) == base.dists.end()) base.dists.push_back(d);
  }
  for (const auto& t : a.tests)
    if (!t.empty()) base.tests.push_back(as_usage([&] { return TestSpec::parse(t, model_dim(model)); }));
  base.R = a.fast ? std::min<std::size_t>(a.R, 500) : a.R;
  base.levels = a.levels;
  base.base_seed = a.seed;
  base.burn_in = a.burn_in;
  base.workers = a.workers;
  base.breaker_rate = a.breaker;

  std::vector<McDesign> designs;
  for (const auto& th : parse_theta_list(a.theta)) {
    McDesign d = base;
    d.theta0 = th;
    as_usage([&] {
      validate(d);
      return 0;
    });
    designs.push_back(std::move(d));
  }
  std::vector<McResult> results;
  std::optional<std::string> breaker;
  for (const auto& d : designs) {
    std::cerr << "mc: " << d.model_id << " theta=" << theta_str(d.theta0) << " ...\n";
    results.push_back(run(d));
    for (const auto& c : results.back().cells) {
      std::fprintf(stderr, "  n=%zu dist=%s done in %.1f s\n", c.n, to_string(c.dist).c_str(), c.wall_seconds);
    }
    if (results.back().breaker) {
      breaker = results.back().breaker;
      break;
    }
  }
  Sink table(a.out + "_table.csv");
  write_table_csv(table.get(), results);
  table.close();
  Sink figure(a.out + "_figure.csv");
  write_figure_csv(figure.get(), results);
  figure.close();
  Sink failures(a.out + "_failures.csv");
  write_failures_csv(failures.get(), results);
  failures.close();
  if (breaker) throw Error(ErrorKind::BreakerTripped, *breaker);
  return kOk;
}

// ---------------------------------------------------------------- gen-null-tables

struct GenArgs {
  NullTableSpec spec;
  std::string out = "null_tables.csv";
};

int cmd_gen_null_tables(const GenArgs& a) {
  const NullTable table = generate_null_tables(a.spec);
  Sink sink(a.out);
  write_null_table(sink.get(), table, null_table_comment(a.spec));
  sink.close();
  return kOk;
}

// ---------------------------------------------------------------- scan-pairs

struct ScanArgs {
  std::string config;
  ScanDesign design;
  std::vector<double> theta;
  std::string model = "garch11";
  std::vector<std::string> dists;
  std::string out = "-";
};

int cmd_scan_pairs(ScanArgs a) {
  a.design.model_id = a.model;
  as_usage([&] { return make_model(a.model, a.design.threshold); });
  a.design.theta0 = to_vector(a.theta);
  if (!a.dists.empty()) {
    a.design.alternatives.clear();
    for (const auto& d : a.dists) a.design.alternatives.push_back(as_usage([&] { return parse_error_dist(d); }));
  }
  if (a.design.max_q < 1) throw Error(ErrorKind::Usage, "--max-q must be at least 1");
  const auto ranking = scan_pairs(a.design);
  Sink sink(a.out);
  write_scan_csv(sink.get(), a.design, ranking);
  sink.close();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-matrix normality tests for TMA(1), GARCH(p,q) and DAR(1) innovations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  std::function<int()> action;

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate a series and write it as CSV");
  s->add_option("--model", sim.model, "tma1, garchPQ or dar1")->capture_default_str();
  s->add_option("--theta", sim.theta, "Parameter vector, comma separated")->delimiter(',')->required();
  s->add_option("--n", sim.n, "Series length")->capture_default_str();
  s->add_option("--dist", sim.dist, "n01, t15, ld, nm1, nm2, nm3, gld")->capture_default_str();
  s->add_option("--seed", sim.seed)->capture_default_str();
  s->add_option("--burn-in", sim.burn_in)->capture_default_str();
  s->add_option("--threshold", sim.threshold, "TMA(1) threshold u")->capture_default_str();
  s->add_option("--out", sim.out, "Output path ('-' for stdout)")->capture_default_str();
  s->callback([&] { action = [&] { return cmd_simulate(sim); }; });

  FitTestArgs ft;
  auto* f = app.add_subcommand("fit-test", "Fit a model by Gaussian QMLE and test normality of its innovations");
  f->add_option("input", ft.in, "Series CSV (header 'value' or 'date,value')")->required();
  f->add_option("--model", ft.model)->capture_default_str();
  f->add_option("--threshold", ft.threshold)->capture_default_str();
  f->add_option("--pairs", ft.pairs, "IM pairs such as 1:1,2:2 (default: diagonal)");
  f->add_option("--tests", ft.tests, "Residual tests: jb, ks, cvm, ad, ll")->delimiter(',');
  f->add_option("--csv", ft.csv, "Also write the results as CSV");
  f->add_option("--config", ft.config, "key=value file; command-line flags take precedence");
  f->add_option("--max-iter", ft.max_iter, "Optimizer iteration limit")->capture_default_str();
  f->add_option("--gtol", ft.gtol, "Projected-gradient tolerance")->capture_default_str();
  f->add_option("--init", ft.init, "Starting-value overrides such as 2=0.05 (1-based)")->delimiter(',');
  f->callback([&] { action = [&] { return cmd_fit_test(ft); }; });

  ReturnsArgs ra;
  auto* r = app.add_subcommand("returns", "Turn a price column into scaled log returns");
  r->add_option("input", ra.in, "Prices CSV")->required();
  r->add_option("--column", ra.column)->capture_default_str();
  r->add_option("--scale", ra.scale)->capture_default_str();
  r->add_option("--out", ra.out)->capture_default_str();
  r->callback([&] { action = [&] { return cmd_returns(ra); }; });

  McArgs mc;
  auto* m = app.add_subcommand("mc", "Monte Carlo size/power experiment");
  m->add_option("--config", mc.config, "key=value file; command-line flags take precedence");
  m->add_option("--model", mc.model)->capture_default_str();
  m->add_option("--threshold", mc.threshold)->capture_default_str();
  m->add_option("--theta", mc.theta, "theta0; several design points separated by '|'")->delimiter(',');
  m->add_option("--n", mc.n)->delimiter(',')->capture_default_str();
  m->add_option("--dists", mc.dists)->delimiter(',')->capture_default_str();
  m->add_option("--tests", mc.tests, "im, im@i:j;k:l, jb, ks, cvm, ad, ll")->delimiter(',')->capture_default_str();
  m->add_option("--R", mc.R)->capture_default_str();
  m->add_option("--levels", mc.levels)->delimiter(',')->capture_default_str();
  m->add_option("--seed", mc.seed)->capture_default_str();
  m->add_option("--burn-in", mc.burn_in)->capture_default_str();
  m->add_option("--workers", mc.workers)->capture_default_str();
  m->add_option("--breaker", mc.breaker, "Failure rate above which a cell stops the run")->capture_default_str();
  m->add_flag("--fast", mc.fast, "R=500 and n=1000 only");
  m->add_flag("--power", mc.power, "Add every alternative distribution");
  m->add_option("--out", mc.out, "Output prefix for _table.csv, _figure.csv, _failures.csv")->capture_default_str();
  m->callback([&] { action = [&] { return cmd_mc(mc); }; });

  GenArgs gen;
  auto* g = app.add_subcommand("gen-null-tables", "Regenerate the CVM/AD/Lilliefors null-quantile tables");
  g->add_option("--seed", gen.spec.seed)->capture_default_str();
  g->add_option("--n-grid", gen.spec.n_grid)->delimiter(',')->capture_default_str();
  g->add_option("--reps", gen.spec.reps)->capture_default_str();
  g->add_option("--workers", gen.spec.workers)->capture_default_str();
  g->add_option("--out", gen.out)->capture_default_str();
  g->callback([&] { action = [&] { return cmd_gen_null_tables(gen); }; });

  ScanArgs sc;
  auto* p = app.add_subcommand("scan-pairs", "Rank IM pair subsets by simulated size and power");
  p->add_option("--config", sc.config, "key=value file; command-line flags take precedence");
  p->add_option("--model", sc.model)->capture_default_str();
  p->add_option("--threshold", sc.design.threshold)->capture_default_str();
  p->add_option("--theta", sc.theta)->delimiter(',')->required();
  p->add_option("--n", sc.design.n)->capture_default_str();
  p->add_option("--R", sc.design.R)->capture_default_str();
  p->add_option("--dists", sc.dists, "Alternatives (default: all six)")->delimiter(',');
  p->add_option("--level", sc.design.level)->capture_default_str();
  p->add_option("--max-q", sc.design.max_q)->capture_default_str();
  p->add_option("--size-tolerance", sc.design.size_tolerance)->capture_default_str();
  p->add_option("--seed", sc.design.base_seed)->capture_default_str();
  p->add_option("--burn-in", sc.design.burn_in)->capture_default_str();
  p->add_option("--workers", sc.design.workers)->capture_default_str();
  p->add_option("--out", sc.out)->capture_default_str();
  p->callback([&] { action = [&] { return cmd_scan_pairs(sc); }; });

  try {
    // Required-ness of --theta is checked after any config file is applied.
    p->get_option("--theta")->required(false);
    app.parse(argc, argv);
    if (f->parsed() && !ft.config.empty()) apply_config(f, ft.config);
    if (m->parsed() && !mc.config.empty()) apply_config(m, mc.config);
    if (p->parsed() && !sc.config.empty()) apply_config(p, sc.config);
    if (p->parsed() && sc.theta.empty()) throw Error(ErrorKind::Usage, "scan-pairs needs --theta");
    return action ? action() : kUsage;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  } catch (const Error& e) {
    std::cerr << "imnorm: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "imnorm: " << e.what() << '\n';
    return kIo;
  }
}
