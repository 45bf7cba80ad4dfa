#pragma once

// Cox-Ross-Rubinstein binomial oracle: Snell envelope, Doob-Meyer
// decomposition and deltas of a one-dimensional Bermudan, plus an exact
// increment source over all 2^steps paths for solver fixtures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dualhedge/instruments.hpp"
#include "dualhedge/payoffs.hpp"

namespace dualhedge {

struct BinomialModel {
  double s0 = 100.0;
  double up = 1.0;
  double down = 1.0;
  double prob = 0.5;  // risk-neutral up probability
  double rate = 0.0;
  double dividend = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<bool> exercise;  // steps + 1 flags

  double spot(std::size_t n, std::size_t j) const {
    if (up == down) return s0 * std::pow(up, static_cast<double>(n));
    return s0 * std::pow(up, static_cast<double>(j)) * std::pow(down, static_cast<double>(n - j));
  }
  double time(std::size_t n) const { return dt * static_cast<double>(n); }
};

/// CRR tree with `steps` steps over [0, maturity]; Bermudan dates T_n = n T/N
/// are mapped to the nearest tree steps round(n steps / N).
inline BinomialModel make_crr(double s0, double sigma, double rate, double dividend, double maturity,
                              std::size_t steps, std::size_t exercise_intervals) {
  if (steps == 0 || exercise_intervals == 0) throw std::invalid_argument("crr: steps must be >= 1");
  if (!(s0 > 0.0) || !(maturity > 0.0) || sigma < 0.0) throw std::invalid_argument("crr: bad parameters");
  BinomialModel m;
  m.s0 = s0;
  m.rate = rate;
  m.dividend = dividend;
  m.steps = steps;
  m.dt = maturity / static_cast<double>(steps);
  const double growth = std::exp((rate - dividend) * m.dt);
  if (sigma * std::sqrt(m.dt) < 1e-14) {
    m.up = m.down = growth;
    m.prob = 0.5;
  } else {
    m.up = std::exp(sigma * std::sqrt(m.dt));
    m.down = 1.0 / m.up;
    m.prob = (growth - m.down) / (m.up - m.down);
  }
  if (!(m.prob > 0.0 && m.prob < 1.0)) throw std::invalid_argument("crr: no risk-neutral probability");
  m.exercise.assign(steps + 1, false);
  for (std::size_t n = 0; n <= exercise_intervals; ++n) {
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n * steps) /
                                                         static_cast<double>(exercise_intervals)));
    m.exercise[k] = true;
  }
  return m;
}

/// Discounted Snell envelope U, discounted exercise value Z and
/// continuation C = E[U_{n+1} | node] on every node (row n has n+1 nodes).
struct SnellTable {
  BinomialModel model;
  std::vector<std::vector<double>> U, Z, C;

  double value() const { return U[0][0]; }
  bool stop(std::size_t n, std::size_t j) const { return model.exercise[n] && U[n][j] <= Z[n][j]; }
};

inline SnellTable snell_solve(const BinomialModel& m, const PayoffSpec& payoff) {
  SnellTable t{m, {}, {}, {}};
  const std::size_t T = m.steps;
  t.U.resize(T + 1);
  t.Z.resize(T + 1);
  t.C.resize(T + 1);
  for (std::size_t n = 0; n <= T; ++n) {
    t.Z[n].resize(n + 1);
    const double df = std::exp(-m.rate * m.time(n));
    for (std::size_t j = 0; j <= n; ++j) {
      const double s = m.spot(n, j);
      t.Z[n][j] = m.exercise[n] ? df * evaluate_payoff(payoff, std::span<const double>(&s, 1)) : 0.0;
    }
  }
  t.U[T] = t.Z[T];
  t.C[T].assign(T + 1, 0.0);
  for (std::size_t n = T; n-- > 0;) {
    t.U[n].resize(n + 1);
    t.C[n].resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
      const double c = m.prob * t.U[n + 1][j + 1] + (1.0 - m.prob) * t.U[n + 1][j];
      t.C[n][j] = c;
      t.U[n][j] = m.exercise[n] ? std::max(t.Z[n][j], c) : c;
    }
  }
  return t;
}

/// Doob-Meyer increments of the transition from node (n, j) to its child
/// (n+1, j + up): dM* = U_child - C_node and dA* = U_node - C_node.
struct DoobMeyerStep {
  double dM;
  double dA;
};

inline DoobMeyerStep doob_meyer(const SnellTable& t, std::size_t n, std::size_t j, bool up) {
  if (n >= t.model.steps || j > n) throw std::out_of_range("doob_meyer: not a transition");
  const double child = t.U[n + 1][j + (up ? 1 : 0)];
  return {child - t.C[n][j], t.U[n][j] - t.C[n][j]};
}

/// Hedge ratio (shares) at a non-leaf node from undiscounted child values.
inline double delta(const SnellTable& t, std::size_t n, std::size_t j) {
  const auto& m = t.model;
  if (n >= m.steps || j > n) throw std::out_of_range("delta: leaf node");
  const double s_up = m.spot(n + 1, j + 1);
  const double s_dn = m.spot(n + 1, j);
  if (s_up == s_dn) return 0.0;
  const double grow = std::exp(m.rate * m.time(n + 1));
  return grow * (t.U[n + 1][j + 1] - t.U[n + 1][j]) / (s_up - s_dn);
}

/// Delta at an arbitrary (t, S): tree step floor(t / dt), linear in log-spot
/// between the deltas of neighbouring nodes, flat beyond the extreme nodes.
inline double delta_at(const SnellTable& t, double time, double spot) {
  const auto& m = t.model;
  auto n = static_cast<std::size_t>(std::floor(time / m.dt + 1e-9));
  n = std::min(n, m.steps - 1);
  if (m.up == m.down) return delta(t, n, 0);
  const double x = std::log(spot / m.s0);
  const double lu = std::log(m.up), ld = std::log(m.down);
  // node j sits at j lu + (n - j) ld
  const double pos = (x - static_cast<double>(n) * ld) / (lu - ld);
  if (pos <= 0.0) return delta(t, n, 0);
  if (pos >= static_cast<double>(n)) return delta(t, n, n);
  const auto j = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * delta(t, n, j) + w * delta(t, n, std::min(j + 1, n));
}

/// All 2^steps paths of a small tree with their exact probabilities.
/// Path q takes an up move at step n iff bit n of q is set.
struct TreePaths {
  std::size_t steps = 0;
  std::vector<double> weights;

  static TreePaths enumerate(const BinomialModel& m) {
    if (m.steps > 20) throw std::invalid_argument("tree paths: at most 20 steps");
    TreePaths p;
    p.steps = m.steps;
    const std::size_t count = std::size_t{1} << m.steps;
    p.weights.resize(count);
    for (std::size_t q = 0; q < count; ++q) {
      double w = 1.0;
      for (std::size_t n = 0; n < m.steps; ++n) w *= (q >> n & 1U) ? m.prob : 1.0 - m.prob;
      p.weights[q] = w;
    }
    return p;
  }

  std::size_t count() const { return weights.size(); }
  bool up(std::size_t q, std::size_t n) const { return (q >> n & 1U) != 0; }
  /// Node index (number of up moves) of path q at step n.
  std::size_t node(std::size_t q, std::size_t n) const {
    const std::size_t mask = n >= 64 ? ~std::size_t{0} : (std::size_t{1} << n) - 1;
    return static_cast<std::size_t>(__builtin_popcountll(q & mask));
  }
};

/// Discounted rewards Z on the tree's exercise steps, which must be every
/// `subticks`-th step; shape paths x (steps/subticks + 1).
inline RewardMatrix tree_rewards(const SnellTable& t, const TreePaths& paths, std::size_t subticks) {
  const std::size_t dates = t.model.steps / subticks + 1;
  RewardMatrix z{paths.count(), dates, std::vector<double>(paths.count() * dates)};
  for (std::size_t q = 0; q < paths.count(); ++q)
    for (std::size_t n = 0; n < dates; ++n) {
      const std::size_t s = n * subticks;
      z.at(q, n) = t.Z[s][paths.node(q, s)];
    }
  return z;
}

/// Exact increments on the enumerated tree with the discounted stock as the
/// single instrument and a node-indicator basis, optionally coarsened
/// (bin = node / coarsen) or collapsed to one constant function.
class TreeIncrementSource {
 public:
  TreeIncrementSource(const BinomialModel& m, const TreePaths& paths, std::size_t subticks,
                      std::size_t coarsen = 1, bool constant = false)
      : model_(m), paths_(&paths), subticks_(subticks), coarsen_(coarsen), constant_(constant) {
    if (subticks == 0 || m.steps % subticks != 0)
      throw std::invalid_argument("tree increments: steps must be a multiple of subticks");
    if (coarsen == 0) throw std::invalid_argument("tree increments: coarsening must be >= 1");
  }

  std::size_t path_count() const { return paths_->count(); }
  std::size_t intervals() const { return model_.steps / subticks_; }
  std::size_t subticks() const { return subticks_; }
  std::size_t instrument_count() const { return 1; }
  std::size_t basis_size() const { return constant_ ? 1 : (model_.steps + coarsen_ - 1) / coarsen_; }
  bool local() const { return true; }

  /// Discounted dividend-adjusted stock at node (n, j).
  double tradable(std::size_t n, std::size_t j) const {
    return std::exp((model_.dividend - model_.rate) * model_.time(n)) * model_.spot(n, j);
  }

  void fill(std::size_t i, ChunkRange r, IntervalIncrements& out) const {
    out.reshape(r.size(), subticks_, 1, basis_size(), true);
    for (std::size_t row = 0; row < r.size(); ++row) {
      const std::size_t q = r.begin + row;
      for (std::size_t j = 0; j < subticks_; ++j) {
        const std::size_t n = i * subticks_ + j;
        const std::size_t node = paths_->node(q, n);
        const std::size_t next = node + (paths_->up(q, n) ? 1 : 0);
        out.bins[j * out.rows + row] = constant_ ? 0U : static_cast<std::uint32_t>(node / coarsen_);
        out.increment(j, row)[0] = tradable(n + 1, next) - tradable(n, node);
      }
    }
  }

 private:
  BinomialModel model_;
  const TreePaths* paths_;
  std::size_t subticks_;
  std::size_t coarsen_;
  bool constant_;
};

/// Optimal stopping index tau* = first exercise date (in date units of
/// `subticks` steps) where U = Z, per enumerated path.
inline std::vector<std::size_t> tree_stopping_times(const SnellTable& t, const TreePaths& paths,
                                                    std::size_t subticks) {
  const std::size_t dates = t.model.steps / subticks + 1;
  std::vector<std::size_t> tau(paths.count(), dates - 1);
  for (std::size_t q = 0; q < paths.count(); ++q)
    for (std::size_t n = 0; n < dates; ++n) {
      const std::size_t s = n * subticks;
      if (t.stop(s, paths.node(q, s))) {
        tau[q] = n;
        break;
      }
    }
  return tau;
}

}  // namespace dualhedge
