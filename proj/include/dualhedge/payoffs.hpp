#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dualhedge/market_model.hpp"

namespace dualhedge {

enum class PayoffKind { put, butterfly, max_call, min_put, basket_put };

inline PayoffKind parse_payoff_kind(std::string_view s) {
  if (s == "put") return PayoffKind::put;
  if (s == "butterfly") return PayoffKind::butterfly;
  if (s == "max_call") return PayoffKind::max_call;
  if (s == "min_put") return PayoffKind::min_put;
  if (s == "basket_put") return PayoffKind::basket_put;
  throw std::invalid_argument("unknown payoff kind: " + std::string(s));
}

inline std::string to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::put: return "put";
    case PayoffKind::butterfly: return "butterfly";
    case PayoffKind::max_call: return "max_call";
    case PayoffKind::min_put: return "min_put";
    case PayoffKind::basket_put: return "basket_put";
  }
  return "?";
}

/// Exercise payoff. `strike` is K (or K1 for the butterfly, whose upper
/// strike is `strike_high`). Basket weights default to 1/d.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::put;
  double strike = 100.0;
  double strike_high = 0.0;
  std::vector<double> weights;

  double mid_strike() const { return 0.5 * (strike + strike_high); }
  bool one_dimensional() const { return kind == PayoffKind::put || kind == PayoffKind::butterfly; }
};

namespace detail {
inline std::atomic<std::size_t>& negative_payoff_counter() {
  static std::atomic<std::size_t> count{0};
  return count;
}
inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }
}  // namespace detail

/// Number of payoff evaluations that came out negative and were clamped.
inline std::size_t negative_payoff_clamps() { return detail::negative_payoff_counter().load(); }

/// Payoff before the nonnegativity clamp.
inline double raw_payoff(const PayoffSpec& spec, std::span<const double> s) {
  using detail::positive_part;
  const std::size_t d = s.size();
  if (d == 0) throw std::invalid_argument("payoff: empty spot vector");
  switch (spec.kind) {
    case PayoffKind::put:
      if (d != 1) throw std::invalid_argument("payoff: put expects one asset");
      return positive_part(spec.strike - s[0]);
    case PayoffKind::butterfly: {
      if (d != 1) throw std::invalid_argument("payoff: butterfly expects one asset");
      const double x = s[0];
      return positive_part(spec.strike - x) - 2.0 * positive_part(spec.mid_strike() - x) +
             positive_part(spec.strike_high - x);
    }
    case PayoffKind::max_call:
      return positive_part(*std::max_element(s.begin(), s.end()) - spec.strike);
    case PayoffKind::min_put:
      return positive_part(spec.strike - *std::min_element(s.begin(), s.end()));
    case PayoffKind::basket_put: {
      if (!spec.weights.empty() && spec.weights.size() != d)
        throw std::invalid_argument("payoff: basket weight count does not match dimension");
      double basket = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        basket += (spec.weights.empty() ? 1.0 / static_cast<double>(d) : spec.weights[k]) * s[k];
      return positive_part(spec.strike - basket);
    }
  }
  throw std::invalid_argument("payoff: unknown kind");
}

inline double evaluate_payoff(const PayoffSpec& spec, std::span<const double> s) {
  const double v = raw_payoff(spec, s);
  if (v < 0.0) {
    detail::negative_payoff_counter().fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  return v;
}

/// Checks the strikes and, for one-dimensional payoffs, that the formula is
/// nonnegative on a dense grid of S in [0, 2 max K].
inline void validate(const PayoffSpec& spec) {
  if (!(spec.strike > 0.0)) throw std::invalid_argument("payoff: strike must be positive");
  if (spec.kind == PayoffKind::butterfly && !(spec.strike < spec.strike_high))
    throw std::invalid_argument("payoff: butterfly needs K1 < K2");
  if (spec.one_dimensional()) {
    const double top = 2.0 * std::max(spec.strike, spec.strike_high);
    constexpr int kPoints = 20001;
    for (int i = 0; i < kPoints; ++i) {
      const double x = top * i / (kPoints - 1);
      if (raw_payoff(spec, std::span<const double>(&x, 1)) < 0.0)
        throw std::logic_error("payoff: formula is negative at S = " + std::to_string(x));
    }
  }
}

/// Discounted exercise values Z[q][n] = e^{-r T_n} Psi(S_{T_n}), Q x (N+1).
struct RewardMatrix {
  std::size_t paths = 0;
  std::size_t dates = 0;
  std::vector<double> z;

  double at(std::size_t q, std::size_t n) const { return z[q * dates + n]; }
  double& at(std::size_t q, std::size_t n) { return z[q * dates + n]; }
  std::span<const double> row(std::size_t q) const { return {z.data() + q * dates, dates}; }
};

inline RewardMatrix reward_matrix(const PayoffSpec& spec, const PathSet& paths,
                                  const Execution& exec = {}) {
  const auto& grid = paths.grid();
  const std::size_t dates = grid.intervals() + 1;
  const std::size_t d = paths.asset_count();
  const double r = paths.model().rate;
  RewardMatrix rm{paths.path_count(), dates, std::vector<double>(paths.path_count() * dates)};
  std::vector<double> df(dates);
  for (std::size_t n = 0; n < dates; ++n) df[n] = discount_factor(r, grid.exercise_time(n));
  for_each_chunk(paths.path_count(), exec, [&](ChunkRange range) {
    std::vector<double> spots(range.size() * dates * d);
    paths.fill_exercise_spots(range.begin, range.end, spots);
    for (std::size_t q = range.begin; q < range.end; ++q)
      for (std::size_t n = 0; n < dates; ++n) {
        const double* s = spots.data() + ((q - range.begin) * dates + n) * d;
        rm.at(q, n) = df[n] * evaluate_payoff(spec, std::span<const double>(s, d));
      }
  });
  return rm;
}

}  // namespace dualhedge
