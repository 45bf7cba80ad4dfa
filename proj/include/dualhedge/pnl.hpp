#pragma once

// Seller's hedged P&L: price + hedge gains up to the exercise date - payoff.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "dualhedge/dual_solver.hpp"
#include "dualhedge/lattice.hpp"
#include "dualhedge/market_model.hpp"
#include "dualhedge/statistics.hpp"

namespace dualhedge {

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max]; a constant sample lands in bin 0.
inline Histogram histogram(std::span<const double> samples, std::size_t bins) {
  if (samples.empty()) throw std::invalid_argument("histogram: empty sample");
  if (bins == 0) throw std::invalid_argument("histogram: bins must be >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it, hi = *hi_it;
  Histogram h;
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges[bins] = hi;
  for (double x : samples) {
    std::size_t b = 0;
    if (width > 0.0) b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    ++h.counts[b];
  }
  return h;
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double level) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = level * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(i);
  return i + 1 < v.size() ? (1.0 - w) * v[i] + w * v[i + 1] : v[i];
}

struct PnlReport {
  std::vector<double> samples;
  double mean = 0.0;
  double std_error = 0.0;
  double variance = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  Histogram hist;
};

inline PnlReport summarize_pnl(std::vector<double> samples, std::size_t bins = 80) {
  PnlReport r;
  const auto est = estimate_mean(samples);
  r.mean = est.mean;
  r.std_error = est.std_error;
  r.variance = sample_variance(samples);
  r.q05 = quantile(samples, 0.05);
  r.q95 = quantile(samples, 0.95);
  r.hist = histogram(samples, bins);
  r.samples = std::move(samples);
  return r;
}

/// P&L of the dual hedge: price + M_tau - Z_tau per path.
template <IncrementSource Source>
PnlReport simulate_pnl(const Source& src, const RewardMatrix& z, const AlphaTensor& alpha,
                       std::span<const std::size_t> tau, double price, const Execution& exec = {},
                       std::size_t bins = 80) {
  if (tau.size() != src.path_count()) throw std::invalid_argument("simulate_pnl: stopping time count mismatch");
  const auto eval = evaluate_frozen(src, z, alpha, exec, tau);
  std::vector<double> pnl(tau.size());
  for (std::size_t q = 0; q < tau.size(); ++q) pnl[q] = price + eval.gains[q] - z.at(q, tau[q]);
  return summarize_pnl(std::move(pnl), bins);
}

/// P&L of the tree delta hedge rebalanced at every fine time, price = tree
/// value. One-dimensional models only.
inline PnlReport delta_hedge_pnl(const PathSet& paths, const SnellTable& tree,
                                 std::span<const std::size_t> tau, const RewardMatrix& z,
                                 const Execution& exec = {}, std::size_t bins = 80) {
  if (paths.asset_count() != 1) throw std::invalid_argument("delta_hedge_pnl: one-dimensional models only");
  if (tau.size() != paths.path_count()) throw std::invalid_argument("delta_hedge_pnl: stopping time count mismatch");
  const auto& grid = paths.grid();
  const auto& m = paths.model();
  const double price = tree.value();
  std::vector<double> pnl(paths.path_count());
  for_each_chunk(paths.path_count(), exec, [&](ChunkRange r) {
    std::vector<double> spots;
    for (std::size_t q = r.begin; q < r.end; ++q) {
      const std::size_t stop_k = grid.exercise_index(tau[q]);
      spots.resize(stop_k + 1);
      paths.fill_spots(q, q + 1, 0, stop_k, spots);
      double gains = 0.0;
      for (std::size_t k = 0; k < stop_k; ++k) {
        const double t0 = grid.time(k), t1 = grid.time(k + 1);
        const double a0 = std::exp((m.dividend[0] - m.rate) * t0) * spots[k];
        const double a1 = std::exp((m.dividend[0] - m.rate) * t1) * spots[k + 1];
        gains += std::exp(-m.dividend[0] * t0) * delta_at(tree, t0, spots[k]) * (a1 - a0);
      }
      pnl[q] = price + gains - z.at(q, tau[q]);
    }
  });
  return summarize_pnl(std::move(pnl), bins);
}

}  // namespace dualhedge
