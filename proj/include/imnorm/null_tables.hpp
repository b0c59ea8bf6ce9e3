#pragma once

// Simulated null quantiles of the CVM, AD and Lilliefors statistics and the
// p-value lookup built on them.
//
// File format (CSV, '#' lines are comments):
//   # seed=<u64> reps=<count>
//   test,n,prob,quantile
//   cvm,100,0.001,0.0198...
//
// Between grid sizes quantiles are interpolated linearly in log n (the
// Lilliefors statistic after scaling by sqrt(n)); sizes outside the grid use
// the nearest grid size.

#include "imnorm/classical_statistics.hpp"
#include "imnorm/core.hpp"
#include "imnorm/rng.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace imnorm {

/// Probabilities at which quantiles are tabulated.
inline std::vector<double> null_prob_grid() {
  std::vector<double> p{0.001, 0.0025};
  for (int k = 1; k <= 199; ++k) p.push_back(0.005 * k);
  p.push_back(0.9975);
  p.push_back(0.999);
  return p;
}

inline const std::vector<std::size_t>& default_null_n_grid() {
  static const std::vector<std::size_t> grid{100, 250, 500, 1000, 2000, 3000, 5000};
  return grid;
}

inline constexpr std::array<ClassicalTest, 3> kTabulatedTests = {ClassicalTest::CVM, ClassicalTest::AD,
                                                                 ClassicalTest::LL};

class NullTable {
 public:
  struct Block {
    std::vector<std::size_t> n;
    std::vector<double> prob;
    std::vector<std::vector<double>> quantile;  // [n index][prob index]
  };

  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::map<ClassicalTest, Block> blocks;

  [[nodiscard]] bool has(ClassicalTest t) const { return blocks.count(t) != 0; }

  /// Interpolated quantile at probability index j for sample size n, on the
  /// scale used for interpolation.
  [[nodiscard]] std::vector<double> scaled_quantiles(ClassicalTest t, std::size_t n) const {
    const Block& b = block(t);
    const double ln = std::log(static_cast<double>(n));
    std::size_t lo = 0;
    std::size_t hi = 0;
    double w = 0.0;
    if (n <= b.n.front()) {
      lo = hi = 0;
    } else if (n >= b.n.back()) {
      lo = hi = b.n.size() - 1;
    } else {
      hi = static_cast<std::size_t>(std::upper_bound(b.n.begin(), b.n.end(), n) - b.n.begin());
      lo = hi - 1;
      const double l0 = std::log(static_cast<double>(b.n[lo]));
      const double l1 = std::log(static_cast<double>(b.n[hi]));
      w = (ln - l0) / (l1 - l0);
    }
    std::vector<double> q(b.prob.size());
    for (std::size_t j = 0; j < q.size(); ++j) {
      q[j] = (1.0 - w) * scale(t, b.n[lo]) * b.quantile[lo][j] + w * scale(t, b.n[hi]) * b.quantile[hi][j];
    }
    return q;
  }

  [[nodiscard]] double quantile(ClassicalTest t, double prob, std::size_t n) const {
    const Block& b = block(t);
    const std::vector<double> q = scaled_quantiles(t, n);
    const auto it = std::lower_bound(b.prob.begin(), b.prob.end(), prob);
    std::size_t j = static_cast<std::size_t>(it - b.prob.begin());
    if (j == 0) return q.front() / scale(t, n);
    if (j >= q.size()) return q.back() / scale(t, n);
    const double f = (prob - b.prob[j - 1]) / (b.prob[j] - b.prob[j - 1]);
    return ((1.0 - f) * q[j - 1] + f * q[j]) / scale(t, n);
  }

  /// Upper-tail probability of `stat`. Below the first tabulated quantile the
  /// CDF falls linearly to 0 at 0; above the last one log(1 - F) continues
  /// linearly with the slope of the last two grid points.
  [[nodiscard]] double p_value(ClassicalTest t, double stat, std::size_t n) const {
    const Block& b = block(t);
    const std::vector<double> q = scaled_quantiles(t, n);
    const std::vector<double>& p = b.prob;
    const double s = stat * scale(t, n);
    const std::size_t m = q.size();
    if (!(s > 0.0)) return 1.0;
    if (s <= q.front()) return 1.0 - p.front() * s / q.front();
    if (s >= q.back()) {
      const double slope = (std::log(1.0 - p[m - 1]) - std::log(1.0 - p[m - 2])) / (q[m - 1] - q[m - 2]);
      return (1.0 - p[m - 1]) * std::exp(slope * (s - q[m - 1]));
    }
    const std::size_t j = static_cast<std::size_t>(std::upper_bound(q.begin(), q.end(), s) - q.begin());
    const double width = q[j] - q[j - 1];
    const double f = width > 0.0 ? (s - q[j - 1]) / width : 1.0;
    return 1.0 - (p[j - 1] + f * (p[j] - p[j - 1]));
  }

 private:
  [[nodiscard]] const Block& block(ClassicalTest t) const {
    const auto it = blocks.find(t);
    if (it == blocks.end()) throw Error(ErrorKind::Io, "null table has no rows for " + to_string(t));
    return it->second;
  }

  static double scale(ClassicalTest t, std::size_t n) {
    return t == ClassicalTest::LL ? std::sqrt(static_cast<double>(n)) : 1.0;
  }
};

inline NullTable parse_null_table(std::istream& in) {
  NullTable table;
  std::map<ClassicalTest, std::map<std::size_t, std::map<double, double>>> rows;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        if (tok.rfind("seed=", 0) == 0) table.seed = std::stoull(tok.substr(5));
        if (tok.rfind("reps=", 0) == 0) table.reps = std::stoull(tok.substr(5));
      }
      continue;
    }
    if (!header_seen) {
      if (line != "test,n,prob,quantile") {
        throw Error(ErrorKind::Parse, "null table header must be 'test,n,prob,quantile'");
      }
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::string test, n, prob, quant;
    if (!std::getline(ss, test, ',') || !std::getline(ss, n, ',') || !std::getline(ss, prob, ',') ||
        !std::getline(ss, quant)) {
      throw Error(ErrorKind::Parse, "null table line " + std::to_string(lineno) + " is malformed");
    }
    try {
      rows[parse_classical_test(test)][std::stoul(n)][std::stod(prob)] = std::stod(quant);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Parse, "null table line " + std::to_string(lineno) + " is malformed");
    }
  }
  for (auto& [test, by_n] : rows) {
    NullTable::Block b;
    for (auto& [n, by_p] : by_n) {
      std::vector<double> probs;
      std::vector<double> qs;
      for (auto [p, q] : by_p) {
        probs.push_back(p);
        qs.push_back(q);
      }
      if (b.prob.empty()) b.prob = probs;
      if (probs != b.prob) throw Error(ErrorKind::Parse, "null table probability grids differ between sizes");
      if (probs.size() < 2) throw Error(ErrorKind::Parse, "null table needs at least two probabilities");
      b.n.push_back(n);
      b.quantile.push_back(std::move(qs));
    }
    table.blocks[test] = std::move(b);
  }
  return table;
}

inline NullTable load_null_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open null table '" + path + "'");
  return parse_null_table(in);
}

/// IMNORM_NULL_TABLES if set, otherwise the data directory configured at build time.
inline std::string default_null_table_path() {
  if (const char* env = std::getenv("IMNORM_NULL_TABLES"); env != nullptr && *env != '\0') return env;
#ifdef IMNORM_DATA_DIR
  return std::string(IMNORM_DATA_DIR) + "/null_tables.csv";
#else
  return "data/null_tables.csv";
#endif
}

/// Loaded once on first use and shared read-only afterwards.
inline const NullTable& default_null_table() {
  static const NullTable table = load_null_table(default_null_table_path());
  return table;
}

struct NullTableSpec {
  std::uint64_t seed = 20240607;
  std::vector<std::size_t> n_grid = default_null_n_grid();
  std::size_t reps = 1'000'000;
  unsigned workers = 1;
};

/// CVM, AD and Lilliefors statistics of one N(0,1) sample of size n drawn
/// from `rng`.
inline std::array<double, 3> null_replication(std::size_t n, Engine& rng) {
  std::vector<double> z(n);
  for (double& v : z) v = standard_normal(rng);
  std::sort(z.begin(), z.end());
  const double cvm = statistic::cvm_from_cdf(statistic::cdf_values(z));
  const double ad = statistic::ad_from_sorted(z);
  const double ll = statistic::lilliefors(z);
  return {cvm, ad, ll};
}

/// Type-7 sample quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// Replication r at size n uses the substream seed(seed, n, 0, r), so the
/// result does not depend on `workers`.
inline NullTable generate_null_tables(const NullTableSpec& spec) {
  if (spec.reps < 2) throw Error(ErrorKind::Usage, "null tables need at least 2 replications");
  if (spec.n_grid.empty()) throw Error(ErrorKind::Usage, "null-table size grid is empty");
  NullTable table;
  table.seed = spec.seed;
  table.reps = spec.reps;
  const std::vector<double> probs = null_prob_grid();
  std::vector<std::size_t> grid = spec.n_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (ClassicalTest t : kTabulatedTests) table.blocks[t].prob = probs;

  for (std::size_t n : grid) {
    statistic::require_size(n);
    std::array<std::vector<double>, 3> draws;
    for (auto& d : draws) d.resize(spec.reps);
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
      constexpr std::size_t chunk = 256;
      for (;;) {
        const std::size_t start = next.fetch_add(chunk);
        if (start >= spec.reps) return;
        const std::size_t stop = std::min(spec.reps, start + chunk);
        for (std::size_t r = start; r < stop; ++r) {
          Engine rng = make_engine(substream_seed(spec.seed, n, 0, r));
          const auto s = null_replication(n, rng);
          for (std::size_t k = 0; k < 3; ++k) draws[k][r] = s[k];
        }
      }
    };
    const unsigned workers = std::max(1u, spec.workers);
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    for (std::size_t k = 0; k < 3; ++k) {
      std::sort(draws[k].begin(), draws[k].end());
      NullTable::Block& b = table.blocks[kTabulatedTests[k]];
      std::vector<double> q;
      q.reserve(probs.size());
      for (double p : probs) q.push_back(sorted_quantile(draws[k], p));
      b.n.push_back(n);
      b.quantile.push_back(std::move(q));
    }
  }
  return table;
}

/// Provenance line written into generated tables (worker count excluded).
inline std::string null_table_comment(const NullTableSpec& spec) {
  std::string grid;
  for (std::size_t n : spec.n_grid) grid += (grid.empty() ? "" : ";") + std::to_string(n);
#ifdef IMNORM_VERSION
  const std::string version = IMNORM_VERSION;
#else
  const std::string version = "dev";
#endif
  return "imnorm " + version + " gen-null-tables n_grid=" + grid;
}

inline void write_null_table(std::ostream& out, const NullTable& table, const std::string& comment = "") {
  out << "# imnorm null-quantile table (CVM and AD against N(0,1); Lilliefors with estimated mean and sd)\n";
  out << "# seed=" << table.seed << " reps=" << table.reps << "\n";
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "test,n,prob,quantile\n";
  char buf[64];
  for (ClassicalTest t : kTabulatedTests) {
    const auto it = table.blocks.find(t);
    if (it == table.blocks.end()) continue;
    const NullTable::Block& b = it->second;
    for (std::size_t i = 0; i < b.n.size(); ++i) {
      for (std::size_t j = 0; j < b.prob.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.4f,%.10g", b.prob[j], b.quantile[i][j]);
        out << to_string(t) << ',' << b.n[i] << ',' << buf << '\n';
      }
    }
  }
}

}  // namespace imnorm
