#pragma once

// Information-matrix normality test.
//
// For selected index pairs (i_k, j_k) the per-observation discrepancy is
//   d_{t,k} = hess_{i_k j_k} + grad_{i_k} grad_{j_k},
// T_n = n^{-1/2} sum_t d_t and
//   V_n = (1/n) sum d d' + (1/n) [sum d g'] [sum g g']^{-1} [sum g d'],
// a covariance estimate that needs no third derivatives. The statistic
// T_n' V_n^{-1} T_n is referred to chi-square with q degrees of freedom.

#include "imnorm/core.hpp"
#include "imnorm/stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace imnorm {

inline constexpr double kMaxCondition = 1e12;

/// Ordered list of 1-based (i, j) pairs with i <= j.
class PairSet {
 public:
  PairSet() = default;

  explicit PairSet(std::vector<std::pair<int, int>> pairs) {
    for (auto [i, j] : pairs) {
      if (i > j) std::swap(i, j);
      if (i < 1) throw Error(ErrorKind::BadPairIndex, "pair indices start at 1");
      if (std::find(pairs_.begin(), pairs_.end(), std::pair{i, j}) != pairs_.end()) {
        throw Error(ErrorKind::BadPairIndex,
                    "duplicate pair " + std::to_string(i) + ":" + std::to_string(j));
      }
      pairs_.emplace_back(i, j);
    }
    if (pairs_.empty()) throw Error(ErrorKind::BadPairIndex, "a pair set needs at least one pair");
  }

  /// Parses "1:1,2:2" (';' also accepted as separator).
  static PairSet parse(std::string_view text) {
    std::vector<std::pair<int, int>> out;
    std::string item;
    auto flush = [&] {
      if (item.empty()) return;
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw Error(ErrorKind::Parse, "pair '" + item + "' must look like i:j");
      try {
        std::size_t used_i = 0;
        std::size_t used_j = 0;
        const std::string si = item.substr(0, colon);
        const std::string sj = item.substr(colon + 1);
        const int i = std::stoi(si, &used_i);
        const int j = std::stoi(sj, &used_j);
        if (used_i != si.size() || used_j != sj.size()) throw std::invalid_argument("trailing");
        out.emplace_back(i, j);
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::Parse, "pair '" + item + "' must look like i:j");
      }
      item.clear();
    };
    for (char c : text) {
      if (c == ',' || c == ';') {
        flush();
      } else if (c != ' ') {
        item.push_back(c);
      }
    }
    flush();
    return PairSet(std::move(out));
  }

  static PairSet diagonal(int p) {
    std::vector<std::pair<int, int>> v;
    for (int i = 1; i <= p; ++i) v.emplace_back(i, i);
    return PairSet(std::move(v));
  }

  /// All p(p+1)/2 pairs in row-major upper-triangle order.
  static PairSet all(int p) {
    std::vector<std::pair<int, int>> v;
    for (int i = 1; i <= p; ++i)
      for (int j = i; j <= p; ++j) v.emplace_back(i, j);
    return PairSet(std::move(v));
  }

  [[nodiscard]] std::size_t q() const noexcept { return pairs_.size(); }
  [[nodiscard]] const std::vector<std::pair<int, int>>& pairs() const noexcept { return pairs_; }
  [[nodiscard]] const std::pair<int, int>& operator[](std::size_t k) const { return pairs_[k]; }

  void validate(Eigen::Index p) const {
    for (auto [i, j] : pairs_) {
      if (j > p) {
        throw Error(ErrorKind::BadPairIndex, "pair " + std::to_string(i) + ":" + std::to_string(j) +
                                                 " exceeds the parameter dimension " + std::to_string(p));
      }
    }
  }

  [[nodiscard]] std::string str(char sep = ',') const {
    std::string s;
    for (auto [i, j] : pairs_) {
      if (!s.empty()) s.push_back(sep);
      s += std::to_string(i) + ":" + std::to_string(j);
    }
    return s;
  }

  friend bool operator==(const PairSet&, const PairSet&) = default;

 private:
  std::vector<std::pair<int, int>> pairs_;
};

/// d_t for every usable t.
template <LikelihoodModel M>
std::vector<Eigen::VectorXd> d_vectors(const M& model, const TimeSeries& series, const Eigen::VectorXd& theta,
                                       const PairSet& pairs) {
  pairs.validate(model.dim());
  std::vector<Eigen::VectorXd> out;
  out.reserve(series.size());
  const std::size_t q = pairs.q();
  model.for_each_contrib(series, theta, [&](std::size_t, double, const Eigen::VectorXd& g, const Eigen::MatrixXd& h) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(q));
    for (std::size_t k = 0; k < q; ++k) {
      const int i = pairs[k].first - 1;
      const int j = pairs[k].second - 1;
      d(static_cast<Eigen::Index>(k)) = h(i, j) + g(i) * g(j);
    }
    out.push_back(std::move(d));
  });
  return out;
}

/// Sums needed by the statistic; sub-selecting pairs from them is exact, so
/// many pair sets can be evaluated from one pass over the data.
struct ImMoments {
  std::size_t n = 0;
  PairSet pairs;
  Eigen::VectorXd sum_d;
  Eigen::MatrixXd sum_dd;
  Eigen::MatrixXd sum_dg;
  Eigen::MatrixXd sum_gg;

  [[nodiscard]] ImMoments subset(const std::vector<std::size_t>& idx) const {
    ImMoments s;
    s.n = n;
    std::vector<std::pair<int, int>> sel;
    const auto q = static_cast<Eigen::Index>(idx.size());
    s.sum_d.resize(q);
    s.sum_dd.resize(q, q);
    s.sum_dg.resize(q, sum_dg.cols());
    for (Eigen::Index a = 0; a < q; ++a) {
      const auto ia = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]);
      sel.push_back(pairs[static_cast<std::size_t>(ia)]);
      s.sum_d(a) = sum_d(ia);
      s.sum_dg.row(a) = sum_dg.row(ia);
      for (Eigen::Index b = 0; b < q; ++b) {
        s.sum_dd(a, b) = sum_dd(ia, static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
      }
    }
    s.pairs = PairSet(std::move(sel));
    s.sum_gg = sum_gg;
    return s;
  }
};

template <LikelihoodModel M>
ImMoments im_moments(const M& model, const TimeSeries& series, const Eigen::VectorXd& theta, const PairSet& pairs) {
  pairs.validate(model.dim());
  const auto q = static_cast<Eigen::Index>(pairs.q());
  const Eigen::Index p = model.dim();
  ImMoments m;
  m.pairs = pairs;
  m.sum_d = Eigen::VectorXd::Zero(q);
  m.sum_dd = Eigen::MatrixXd::Zero(q, q);
  m.sum_dg = Eigen::MatrixXd::Zero(q, p);
  m.sum_gg = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd d(q);
  model.for_each_contrib(series, theta, [&](std::size_t, double, const Eigen::VectorXd& g, const Eigen::MatrixXd& h) {
    for (Eigen::Index k = 0; k < q; ++k) {
      const auto& [i, j] = pairs[static_cast<std::size_t>(k)];
      d(k) = h(i - 1, j - 1) + g(i - 1) * g(j - 1);
    }
    ++m.n;
    m.sum_d += d;
    m.sum_dd.noalias() += d * d.transpose();
    m.sum_dg.noalias() += d * g.transpose();
    m.sum_gg.noalias() += g * g.transpose();
  });
  return m;
}

struct ImTestReport {
  Eigen::VectorXd T_n;
  Eigen::MatrixXd V_hat;
  double statistic = 0.0;
  std::size_t q = 0;
  double p_value = 1.0;
  PairSet pairs;
  double v_condition = 0.0;
  std::size_t n = 0;

  [[nodiscard]] bool reject(double level) const { return p_value < level; }
};

namespace detail {
inline double sym_condition(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}
}  // namespace detail

inline ImTestReport im_from_moments(const ImMoments& m) {
  if (m.n == 0) throw Error(ErrorKind::SeriesTooShort, "no likelihood contributions");
  const double n = static_cast<double>(m.n);
  if (detail::sym_condition(m.sum_gg) > kMaxCondition) {
    throw Error(ErrorKind::SingularScoreMatrix, "sum of score outer products is numerically singular");
  }
  ImTestReport r;
  r.n = m.n;
  r.q = m.pairs.q();
  r.pairs = m.pairs;
  r.T_n = m.sum_d / std::sqrt(n);
  const Eigen::MatrixXd cross = m.sum_dg * m.sum_gg.ldlt().solve(m.sum_dg.transpose());
  r.V_hat = (m.sum_dd + cross) / n;
  r.V_hat = (0.5 * (r.V_hat + r.V_hat.transpose())).eval();
  r.v_condition = detail::sym_condition(r.V_hat);
  if (r.v_condition > kMaxCondition) {
    throw Error(ErrorKind::SingularV, "V_hat condition number " + std::to_string(r.v_condition) +
                                          " exceeds 1e12 for pairs " + m.pairs.str());
  }
  r.statistic = std::max(0.0, r.T_n.dot(r.V_hat.ldlt().solve(r.T_n)));
  r.p_value = chi2_sf(r.statistic, static_cast<double>(r.q));
  return r;
}

template <LikelihoodModel M>
ImTestReport im_statistic(const M& model, const TimeSeries& series, const Eigen::VectorXd& theta_hat,
                          const PairSet& pairs) {
  return im_from_moments(im_moments(model, series, theta_hat, pairs));
}

inline std::string im_csv_header() { return "model,theta_hat,pairs,q,statistic,p_value,v_condition"; }

inline std::string im_csv_row(const std::string& model_id, const Eigen::VectorXd& theta_hat, const ImTestReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << model_id << ',';
  for (Eigen::Index i = 0; i < theta_hat.size(); ++i) os << (i ? ";" : "") << theta_hat(i);
  os << ',' << r.pairs.str(';') << ',' << r.q << ',' << r.statistic << ',' << r.p_value << ',' << r.v_condition;
  return os.str();
}

inline std::string im_text(const ImTestReport& r) {
  std::ostringstream os;
  char buf[160];
  os << "IM test, pairs " << r.pairs.str() << " (q = " << r.q << ", n = " << r.n << ")\n";
  for (std::size_t k = 0; k < r.q; ++k) {
    std::snprintf(buf, sizeof buf, "  T_n[%d:%d] = %12.6f\n", r.pairs[k].first, r.pairs[k].second,
                  r.T_n(static_cast<Eigen::Index>(k)));
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "  statistic = %.6f  p-value = %.6g  cond(V) = %.3g\n", r.statistic, r.p_value,
                r.v_condition);
  os << buf;
  return os.str();
}

}  // namespace imnorm
