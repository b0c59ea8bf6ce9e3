#pragma once

// Preliminary simulation over candidate pair sets of the IM test: empirical
// size under N(0,1) and mean power over the alternatives for each subset.

#include "imnorm/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace imnorm {

struct ScanDesign {
  std::string model_id = "garch11";
  double threshold = 0.5;
  Eigen::VectorXd theta0;
  std::size_t n = 1000;
  std::size_t R = 500;
  std::vector<ErrorDist> alternatives{kAlternativeDists.begin(), kAlternativeDists.end()};
  double level = 0.05;
  std::size_t max_q = 3;
  double size_tolerance = 0.02;
  std::uint64_t base_seed = 1;
  std::size_t burn_in = kDefaultBurnIn;
  unsigned workers = 1;
};

struct ScanEntry {
  PairSet pairs;
  double size = 0.0;
  double mean_power = 0.0;
  std::size_t failures = 0;
  bool size_ok = false;
};

/// Every non-empty subset of the p(p+1)/2 pairs with at most max_q elements,
/// followed by the full diagonal when it is not already among them.
inline std::vector<PairSet> candidate_pair_sets(int p, std::size_t max_q) {
  const auto all = PairSet::all(p).pairs();
  const std::size_t m = all.size();
  std::vector<PairSet> out;
  std::vector<std::size_t> idx;
  // Lexicographic enumeration of k-subsets for k = 1..max_q.
  for (std::size_t k = 1; k <= std::min(max_q, m); ++k) {
    idx.resize(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      std::vector<std::pair<int, int>> sel;
      for (std::size_t i : idx) sel.push_back(all[i]);
      out.emplace_back(std::move(sel));
      std::size_t i = k;
      while (i > 0 && idx[i - 1] == m - k + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  const PairSet diag = PairSet::diagonal(p);
  if (std::find(out.begin(), out.end(), diag) == out.end()) out.push_back(diag);
  return out;
}

inline McDesign scan_mc_design(const ScanDesign& s) {
  McDesign d;
  d.model_id = s.model_id;
  d.threshold = s.threshold;
  d.theta0 = s.theta0;
  d.n_list = {s.n};
  d.dists = {ErrorDist::N01};
  d.dists.insert(d.dists.end(), s.alternatives.begin(), s.alternatives.end());
  const int p = static_cast<int>(model_dim(make_model(s.model_id, s.threshold)));
  for (auto& ps : candidate_pair_sets(p, s.max_q)) d.tests.push_back(TestSpec::im(std::move(ps)));
  d.R = s.R;
  d.levels = {s.level};
  d.base_seed = s.base_seed;
  d.burn_in = s.burn_in;
  d.workers = s.workers;
  d.breaker_rate = 1.0;  // failures are reported per subset, never fatal
  return d;
}

/// Ranked candidates: subsets with size within the tolerance of the level
/// first, each group ordered by mean power (ties by smaller q).
inline std::vector<ScanEntry> rank_pair_sets(const McResult& res, const ScanDesign& s) {
  std::vector<ScanEntry> out;
  const McDesign& d = res.design;
  for (std::size_t k = 0; k < d.tests.size(); ++k) {
    ScanEntry e;
    e.pairs = d.tests[k].pairs;
    double power = 0.0;
    std::size_t count = 0;
    for (const auto& c : res.cells) {
      e.failures += c.failures(k);
      if (c.dist == ErrorDist::N01) {
        e.size = c.rate(k, s.level);
      } else {
        power += c.rate(k, s.level);
        ++count;
      }
    }
    e.mean_power = count ? power / static_cast<double>(count) : 0.0;
    e.size_ok = std::abs(e.size - s.level) <= s.size_tolerance + 1e-12;
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const ScanEntry& a, const ScanEntry& b) {
    if (a.size_ok != b.size_ok) return a.size_ok;
    if (a.mean_power != b.mean_power) return a.mean_power > b.mean_power;
    return a.pairs.q() < b.pairs.q();
  });
  return out;
}

inline std::vector<ScanEntry> scan_pairs(const ScanDesign& s, McResult* raw = nullptr) {
  McResult res = run(scan_mc_design(s));
  auto ranking = rank_pair_sets(res, s);
  if (raw) *raw = std::move(res);
  return ranking;
}

inline void write_scan_csv(std::ostream& out, const ScanDesign& s, const std::vector<ScanEntry>& ranking) {
  OutputHeader h{"scan-pairs", design_config(scan_mc_design(s)), true};
  h.config.emplace_back("max_q", std::to_string(s.max_q));
  h.config.emplace_back("size_tolerance", format_value(s.size_tolerance));
  out << h.str();
  out << "rank,pairs,q,size,mean_power,size_ok,failures\n";
  char buf[96];
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& e = ranking[i];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%d,%zu", e.size, e.mean_power, e.size_ok ? 1 : 0, e.failures);
    out << i + 1 << ',' << e.pairs.str(';') << ',' << e.pairs.q() << ',' << buf << '\n';
  }
}

}  // namespace imnorm
