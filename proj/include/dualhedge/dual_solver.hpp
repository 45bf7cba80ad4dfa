#pragma once

// Backward least-squares construction of the hedging martingale.
//
// For i = N-1 .. 0 and each subtick j independently, alpha_{i,j} solves the
// sample normal equations of (V_{i+1} - Z_i) regressed on the increment
// columns dX_{i,j}; then V <- max(Z_i, V - sum_j alpha_{i,j} . dX_{i,j}).
// After stage 0, V is the pathwise max_m {Z_m - M_m} and its mean is the
// in-sample dual price.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dualhedge/instruments.hpp"
#include "dualhedge/linalg.hpp"
#include "dualhedge/parallel.hpp"
#include "dualhedge/payoffs.hpp"
#include "dualhedge/statistics.hpp"

namespace dualhedge {

/// alpha_{i,j}^{p,k} for i < N, j = 1..subticks, stored [i][j-1][p][k].
struct AlphaTensor {
  std::size_t intervals = 0;
  std::size_t subticks = 0;
  std::size_t basis = 0;
  std::size_t instruments = 0;
  std::optional<std::uint64_t> train_seed;
  std::vector<double> data;

  AlphaTensor() = default;
  AlphaTensor(std::size_t n, std::size_t s, std::size_t p, std::size_t l)
      : intervals(n), subticks(s), basis(p), instruments(l), data(n * s * p * l, 0.0) {}

  std::size_t block() const { return basis * instruments; }
  double* coefficients(std::size_t i, std::size_t j) {
    return data.data() + (i * subticks + (j - 1)) * block();
  }
  const double* coefficients(std::size_t i, std::size_t j) const {
    return data.data() + (i * subticks + (j - 1)) * block();
  }
  double at(std::size_t i, std::size_t j, std::size_t p, std::size_t k) const {
    return coefficients(i, j)[p * instruments + k];
  }
};

/// Running dual target V of the backward recursion.
struct DualTarget {
  std::size_t stage = 0;  // V currently holds V_stage
  std::vector<double> v;
};

struct DualSolverOptions {
  RidgeOptions ridge{};
  Execution exec{};
};

/// Normal-equation accumulators of one subtick: one d-bar block per bin for
/// local bases, a single dense block otherwise (lower triangle filled).
struct GramSystem {
  std::size_t blocks = 0;
  std::size_t dim = 0;
  std::vector<double> gram;               // blocks x dim x dim
  std::vector<double> rhs;                // blocks x dim
  std::vector<std::size_t> samples;       // blocks

  GramSystem() = default;
  GramSystem(std::size_t b, std::size_t n)
      : blocks(b), dim(n), gram(b * n * n, 0.0), rhs(b * n, 0.0), samples(b, 0) {}

  void merge(const GramSystem& o) {
    for (std::size_t x = 0; x < gram.size(); ++x) gram[x] += o.gram[x];
    for (std::size_t x = 0; x < rhs.size(); ++x) rhs[x] += o.rhs[x];
    for (std::size_t x = 0; x < samples.size(); ++x) samples[x] += o.samples[x];
  }
};

namespace detail {

inline double weight_of(std::span<const double> w, std::size_t q) { return w.empty() ? 1.0 : w[q]; }

/// Folds the rows of one chunk into the per-subtick systems.
inline void accumulate_gram(const IntervalIncrements& inc, std::span<const double> y,
                            std::span<const double> w, std::size_t q0,
                            std::vector<GramSystem>& sys, Eigen::MatrixXd& scratch) {
  const std::size_t L = inc.instruments;
  for (std::size_t j = 0; j < inc.subticks; ++j) {
    GramSystem& g = sys[j];
    if (inc.local) {
      for (std::size_t row = 0; row < inc.rows; ++row) {
        const double wq = weight_of(w, q0 + row);
        if (wq == 0.0) continue;
        const std::size_t p = inc.bin(j, row);
        const double* da = inc.increment(j, row);
        double* G = g.gram.data() + p * L * L;
        double* b = g.rhs.data() + p * L;
        const double yw = wq * y[q0 + row];
        for (std::size_t k = 0; k < L; ++k) {
          b[k] += yw * da[k];
          for (std::size_t l = 0; l <= k; ++l) G[k * L + l] += wq * da[k] * da[l];
        }
        ++g.samples[p];
      }
      continue;
    }
    const std::size_t D = g.dim;
    const std::size_t P = inc.basis;
    scratch.resize(static_cast<Eigen::Index>(inc.rows), static_cast<Eigen::Index>(D));
    Eigen::VectorXd yv(static_cast<Eigen::Index>(inc.rows));
    std::size_t used = 0;
    for (std::size_t row = 0; row < inc.rows; ++row) {
      const double wq = weight_of(w, q0 + row);
      const double sw = std::sqrt(wq);
      const double* u = inc.activation(j, row);
      const double* da = inc.increment(j, row);
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t k = 0; k < L; ++k)
          scratch(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(p * L + k)) = sw * u[p] * da[k];
      yv(static_cast<Eigen::Index>(row)) = sw * y[q0 + row];
      if (wq != 0.0) ++used;
    }
    Eigen::Map<Eigen::MatrixXd> G(g.gram.data(), static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
    Eigen::Map<Eigen::VectorXd> b(g.rhs.data(), static_cast<Eigen::Index>(D));
    G.selfadjointView<Eigen::Lower>().rankUpdate(scratch.transpose());
    b.noalias() += scratch.transpose() * yv;
    g.samples[0] += used;
  }
}

/// Solves every block of a system into `coef` ([p][k] layout).
inline void solve_system(const GramSystem& g, std::size_t instruments, bool local,
                         const RidgeOptions& ridge, double* coef) {
  const std::size_t n = g.dim;
  for (std::size_t blk = 0; blk < g.blocks; ++blk) {
    double* out = coef + blk * n;
    std::fill(out, out + n, 0.0);
    if (local && g.samples[blk] < instruments + 1) continue;
    Eigen::MatrixXd G(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    // gram blocks are row-major lower (local) or column-major lower (dense);
    // both read the same when taking the lower triangle as (max, min).
    const double* src = g.gram.data() + blk * n * n;
    for (std::size_t r = 0; r < n; ++r) {
      b(static_cast<Eigen::Index>(r)) = g.rhs[blk * n + r];
      for (std::size_t c = 0; c <= r; ++c) {
        const double v = local ? src[r * n + c] : src[c * n + r];
        G(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        G(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = v;
      }
    }
    const Eigen::VectorXd x = ridge_solve(G, b, ridge);
    std::copy(x.data(), x.data() + n, out);
  }
}

}  // namespace detail

template <IncrementSource Source>
void check_shapes(const Source& src, const RewardMatrix& z, std::span<const double> weights) {
  if (z.paths != src.path_count() || z.dates != src.intervals() + 1)
    throw std::invalid_argument("dual solver: reward matrix shape does not match the increments");
  if (!weights.empty() && weights.size() != src.path_count())
    throw std::invalid_argument("dual solver: weight count does not match the path count");
}

/// One backward stage: fits alpha_{i,j} for all subticks of interval i and
/// advances `target` from V_{i+1} to V_i.
template <IncrementSource Source>
void solve_stage(const Source& src, std::size_t i, const RewardMatrix& z, DualTarget& target,
                 AlphaTensor& alpha, const DualSolverOptions& opt = {},
                 std::span<const double> weights = {}) {
  if (target.stage != i + 1) throw std::logic_error("solve_stage: target is not at stage i+1");
  const std::size_t Q = src.path_count();
  const std::size_t S = src.subticks();
  const std::size_t L = src.instrument_count();
  const std::size_t P = src.basis_size();
  const bool local = src.local();

  std::vector<double> y(Q);
  for (std::size_t q = 0; q < Q; ++q) y[q] = target.v[q] - z.at(q, i);

  const std::size_t blocks = local ? P : 1;
  const std::size_t dim = local ? L : P * L;
  auto make = [&] { return std::vector<GramSystem>(S, GramSystem(blocks, dim)); };
  auto accumulate = [&](std::vector<GramSystem>& acc, ChunkRange r) {
    thread_local IntervalIncrements inc;
    thread_local Eigen::MatrixXd scratch;
    src.fill(i, r, inc);
    detail::accumulate_gram(inc, y, weights, r.begin, acc, scratch);
  };
  auto merge = [](std::vector<GramSystem>& into, const std::vector<GramSystem>& from) {
    for (std::size_t j = 0; j < into.size(); ++j) into[j].merge(from[j]);
  };
  const auto systems = ordered_reduce<std::vector<GramSystem>>(Q, opt.exec, make, accumulate, merge);

  parallel_for(S, opt.exec.workers, [&](std::size_t j) {
    detail::solve_system(systems[j], L, local, opt.ridge, alpha.coefficients(i, j + 1));
  });

  for_each_chunk(Q, opt.exec, [&](ChunkRange r) {
    thread_local IntervalIncrements inc;
    src.fill(i, r, inc);
    for (std::size_t row = 0; row < r.size(); ++row) {
      double dm = 0.0;
      for (std::size_t j = 0; j < S; ++j) dm += inc.gain(j, row, alpha.coefficients(i, j + 1));
      const std::size_t q = r.begin + row;
      target.v[q] = std::max(z.at(q, i), target.v[q] - dm);
    }
  });
  target.stage = i;
}

struct BackwardResult {
  AlphaTensor alpha;
  DualTarget target;  // stage 0
  Estimate price;     // in-sample U_0^Q
};

inline Estimate dual_price_in_sample(const DualTarget& target, std::span<const double> weights = {}) {
  if (target.stage != 0) throw std::logic_error("dual_price_in_sample: recursion not finished");
  return estimate_mean(target.v, weights);
}

/// Full backward recursion from V_N = Z_N down to stage 0.
template <IncrementSource Source>
BackwardResult run_backward(const Source& src, const RewardMatrix& z, const DualSolverOptions& opt = {},
                            std::span<const double> weights = {}) {
  check_shapes(src, z, weights);
  const std::size_t N = src.intervals();
  BackwardResult res{AlphaTensor(N, src.subticks(), src.basis_size(), src.instrument_count()),
                     DualTarget{N, std::vector<double>(src.path_count())}, {}};
  for (std::size_t q = 0; q < src.path_count(); ++q) res.target.v[q] = z.at(q, N);
  for (std::size_t i = N; i-- > 0;) solve_stage(src, i, z, res.target, res.alpha, opt, weights);
  res.price = dual_price_in_sample(res.target, weights);
  return res;
}

/// Per-path quantities of a frozen martingale M = sum alpha . dX.
struct FrozenEvaluation {
  std::vector<double> pathwise_max;  // max_{0<=m<=N} (Z_m - M_m)
  std::vector<double> gains;         // M_tau, when stopping times are given
};

template <IncrementSource Source>
void check_alpha(const Source& src, const AlphaTensor& a) {
  if (a.intervals != src.intervals() || a.subticks != src.subticks() || a.basis != src.basis_size() ||
      a.instruments != src.instrument_count())
    throw std::invalid_argument("alpha tensor shape does not match the increments");
}

template <IncrementSource Source>
FrozenEvaluation evaluate_frozen(const Source& src, const RewardMatrix& z, const AlphaTensor& alpha,
                                 const Execution& exec = {},
                                 std::span<const std::size_t> stopping = {}) {
  check_shapes(src, z, {});
  check_alpha(src, alpha);
  const std::size_t Q = src.path_count();
  const std::size_t N = src.intervals();
  const std::size_t S = src.subticks();
  if (!stopping.empty() && stopping.size() != Q)
    throw std::invalid_argument("evaluate_frozen: stopping time count does not match the path count");
  FrozenEvaluation out;
  out.pathwise_max.resize(Q);
  if (!stopping.empty()) out.gains.resize(Q);
  for_each_chunk(Q, exec, [&](ChunkRange r) {
    thread_local IntervalIncrements inc;
    std::vector<double> m(r.size(), 0.0);
    for (std::size_t row = 0; row < r.size(); ++row) {
      out.pathwise_max[r.begin + row] = z.at(r.begin + row, 0);
      if (!stopping.empty() && stopping[r.begin + row] == 0) out.gains[r.begin + row] = 0.0;
    }
    for (std::size_t i = 0; i < N; ++i) {
      src.fill(i, r, inc);
      for (std::size_t row = 0; row < r.size(); ++row) {
        const std::size_t q = r.begin + row;
        for (std::size_t j = 0; j < S; ++j) m[row] += inc.gain(j, row, alpha.coefficients(i, j + 1));
        out.pathwise_max[q] = std::max(out.pathwise_max[q], z.at(q, i + 1) - m[row]);
        if (!stopping.empty() && stopping[q] == i + 1) out.gains[q] = m[row];
      }
    }
  });
  return out;
}

/// Martingale increments dM_{i+1} = sum_j alpha_{i,j} . dX_{i,j}, Q x N.
template <IncrementSource Source>
std::vector<double> interval_increments(const Source& src, const AlphaTensor& alpha,
                                        const Execution& exec = {}) {
  check_alpha(src, alpha);
  const std::size_t Q = src.path_count();
  const std::size_t N = src.intervals();
  std::vector<double> out(Q * N, 0.0);
  for_each_chunk(Q, exec, [&](ChunkRange r) {
    IntervalIncrements inc;
    for (std::size_t i = 0; i < N; ++i) {
      src.fill(i, r, inc);
      for (std::size_t row = 0; row < r.size(); ++row)
        for (std::size_t j = 0; j < src.subticks(); ++j)
          out[(r.begin + row) * N + i] += inc.gain(j, row, alpha.coefficients(i, j + 1));
    }
  });
  return out;
}

/// Out-of-sample price: mean pathwise max of Z - M on fresh paths.
inline Estimate dual_price_out_of_sample(const MarketIncrementSource& fresh, const RewardMatrix& z,
                                         const AlphaTensor& alpha, const Execution& exec = {}) {
  if (alpha.train_seed && *alpha.train_seed == fresh.paths().seed())
    throw std::invalid_argument("out-of-sample paths reuse the training seed");
  const auto eval = evaluate_frozen(fresh, z, alpha, exec);
  return estimate_mean(eval.pathwise_max);
}

}  // namespace dualhedge
