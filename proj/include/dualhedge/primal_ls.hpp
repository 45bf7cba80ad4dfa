#pragma once

// Longstaff-Schwartz exercise policy: continuation values regressed on
// monomials of the affinely mapped exercise-date spots, in-the-money paths
// only (all paths when fewer than kMinItm are in the money).

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dualhedge/basis.hpp"
#include "dualhedge/linalg.hpp"
#include "dualhedge/market_model.hpp"
#include "dualhedge/parallel.hpp"
#include "dualhedge/payoffs.hpp"
#include "dualhedge/statistics.hpp"

namespace dualhedge {

struct ExercisePolicy {
  std::size_t degree = 0;
  std::size_t dates = 0;   // N + 1
  std::size_t assets = 0;
  std::size_t terms = 0;   // binom(d + degree, degree)
  std::vector<double> lower, upper;  // mapping bounds per date x asset
  std::vector<double> coef;          // dates x terms (date N unused)
  std::vector<std::vector<unsigned>> exps;

  /// Rebuilds the monomial table from (assets, degree).
  void prepare() {
    terms = binomial(assets + degree, degree);
    exps = monomial_exponents(assets, degree);
  }

  double continuation(std::size_t n, std::span<const double> spot) const {
    thread_local std::vector<double> u;
    u.resize(terms);
    activations(n, spot, u);
    double c = 0.0;
    for (std::size_t p = 0; p < terms; ++p) c += coef[n * terms + p] * u[p];
    return c;
  }

  void activations(std::size_t n, std::span<const double> spot, std::span<double> out) const {
    double x[16];
    for (std::size_t a = 0; a < assets; ++a) {
      const double lo = lower[n * assets + a], hi = upper[n * assets + a];
      x[a] = hi > lo ? (2.0 * spot[a] - hi - lo) / (hi - lo) : 0.0;
    }
    for (std::size_t p = 0; p < exps.size(); ++p) {
      double v = 1.0;
      for (std::size_t a = 0; a < assets; ++a)
        for (unsigned e = 0; e < exps[p][a]; ++e) v *= x[a];
      out[p] = v;
    }
  }
};

inline constexpr std::size_t kMinItm = 100;

inline ExercisePolicy fit_policy(const PathSet& paths, const RewardMatrix& z, std::size_t degree,
                                 const Execution& exec = {}, const RidgeOptions& ridge = {}) {
  const auto& grid = paths.grid();
  const std::size_t N = grid.intervals();
  const std::size_t Q = paths.path_count();
  const std::size_t d = paths.asset_count();
  if (d > 16) throw std::invalid_argument("fit_policy: at most 16 assets");
  if (z.paths != Q || z.dates != N + 1) throw std::invalid_argument("fit_policy: reward shape mismatch");

  ExercisePolicy pol;
  pol.degree = degree;
  pol.dates = N + 1;
  pol.assets = d;
  pol.prepare();
  const auto bounds = polynomial_mapping(paths.model(), grid);
  pol.lower.resize((N + 1) * d);
  pol.upper.resize((N + 1) * d);
  for (std::size_t n = 0; n <= N; ++n)
    for (std::size_t a = 0; a < d; ++a) {
      pol.lower[n * d + a] = bounds.first[grid.exercise_index(n) * d + a];
      pol.upper[n * d + a] = bounds.second[grid.exercise_index(n) * d + a];
    }
  pol.coef.assign((N + 1) * pol.terms, 0.0);

  std::vector<double> cash(Q);
  for (std::size_t q = 0; q < Q; ++q) cash[q] = z.at(q, N);
  const std::size_t T = pol.terms;

  struct Normal {
    Eigen::MatrixXd G;
    Eigen::VectorXd b;
    std::size_t itm = 0;
  };
  for (std::size_t n = N; n-- > 0;) {
    std::size_t itm = 0;
    for (std::size_t q = 0; q < Q; ++q) itm += z.at(q, n) > 0.0;
    const bool all_paths = itm < kMinItm;
    auto make = [&] { return Normal{Eigen::MatrixXd::Zero(T, T), Eigen::VectorXd::Zero(T), 0}; };
    auto accumulate = [&](Normal& acc, ChunkRange r) {
      std::vector<double> spot(d), u(T);
      Eigen::Map<Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(T));
      for (std::size_t q = r.begin; q < r.end; ++q) {
        if (!all_paths && !(z.at(q, n) > 0.0)) continue;
        for (std::size_t a = 0; a < d; ++a) spot[a] = paths.exercise_spot(q, n, a);
        pol.activations(n, spot, u);
        acc.G.selfadjointView<Eigen::Lower>().rankUpdate(uv);
        acc.b += cash[q] * uv;
      }
    };
    auto merge = [](Normal& into, const Normal& from) {
      into.G += from.G;
      into.b += from.b;
    };
    Normal ne = ordered_reduce<Normal>(Q, exec, make, accumulate, merge);
    const Eigen::MatrixXd G = ne.G.selfadjointView<Eigen::Lower>();
    const Eigen::VectorXd c = ridge_solve(G, ne.b, ridge);
    std::copy(c.data(), c.data() + T, pol.coef.begin() + static_cast<std::ptrdiff_t>(n * T));

    for_each_chunk(Q, exec, [&](ChunkRange r) {
      std::vector<double> spot(d);
      for (std::size_t q = r.begin; q < r.end; ++q) {
        const double zn = z.at(q, n);
        if (!(zn > 0.0)) continue;
        for (std::size_t a = 0; a < d; ++a) spot[a] = paths.exercise_spot(q, n, a);
        if (zn >= pol.continuation(n, spot)) cash[q] = zn;
      }
    });
  }
  return pol;
}

/// First date n < N with Z_n > 0 and Z_n >= fitted continuation, else N.
inline std::vector<std::size_t> stopping_times(const ExercisePolicy& pol, const PathSet& paths,
                                               const RewardMatrix& z, const Execution& exec = {}) {
  const std::size_t N = paths.grid().intervals();
  const std::size_t d = paths.asset_count();
  if (pol.dates != N + 1 || pol.assets != d) throw std::invalid_argument("stopping_times: policy shape mismatch");
  if (z.paths != paths.path_count() || z.dates != N + 1)
    throw std::invalid_argument("stopping_times: reward shape mismatch");
  std::vector<std::size_t> tau(paths.path_count(), N);
  for_each_chunk(paths.path_count(), exec, [&](ChunkRange r) {
    std::vector<double> spot(d);
    for (std::size_t q = r.begin; q < r.end; ++q)
      for (std::size_t n = 0; n < N; ++n) {
        const double zn = z.at(q, n);
        if (!(zn > 0.0)) continue;
        for (std::size_t a = 0; a < d; ++a) spot[a] = paths.exercise_spot(q, n, a);
        if (zn >= pol.continuation(n, spot)) {
          tau[q] = n;
          break;
        }
      }
  });
  return tau;
}

inline Estimate price_lower_bound(std::span<const std::size_t> tau, const RewardMatrix& z) {
  if (tau.size() != z.paths) throw std::invalid_argument("price_lower_bound: stopping time count mismatch");
  std::vector<double> v(tau.size());
  for (std::size_t q = 0; q < tau.size(); ++q) v[q] = z.at(q, tau[q]);
  return estimate_mean(v);
}

inline Estimate price_lower_bound(const ExercisePolicy& pol, const PathSet& fresh, const RewardMatrix& z,
                                  const Execution& exec = {}) {
  const auto tau = stopping_times(pol, fresh, z, exec);
  return price_lower_bound(tau, z);
}

}  // namespace dualhedge
