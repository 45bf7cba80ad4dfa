#pragma once

// Hedging instruments and elementary martingale increments
//
//   dX^{p,k}_{i,j} = u^p(S_{t_{i,j-1}}) (A^k_{t_{i,j}} - A^k_{t_{i,j-1}})
//
// where A^k is the discounted value of instrument k: the dividend-adjusted
// asset e^{(delta-r)t} S, or a European vanilla valued in closed form.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dualhedge/analytics.hpp"
#include "dualhedge/basis.hpp"
#include "dualhedge/market_model.hpp"
#include "dualhedge/parallel.hpp"
#include "dualhedge/payoffs.hpp"

namespace dualhedge {

enum class InstrumentKind { asset, vanilla_call, vanilla_put, european_butterfly };

inline std::string to_string(InstrumentKind k) {
  switch (k) {
    case InstrumentKind::asset: return "asset";
    case InstrumentKind::vanilla_call: return "call";
    case InstrumentKind::vanilla_put: return "put";
    case InstrumentKind::european_butterfly: return "butterfly";
  }
  return "?";
}

inline InstrumentKind parse_vanilla_kind(std::string_view s) {
  if (s == "call") return InstrumentKind::vanilla_call;
  if (s == "put") return InstrumentKind::vanilla_put;
  if (s == "butterfly") return InstrumentKind::european_butterfly;
  throw std::invalid_argument("unknown vanilla kind: " + std::string(s));
}

/// One tradable. Vanillas mature at the model horizon; the butterfly uses
/// (strike, strike_high) like the payoff of the same name.
struct Instrument {
  InstrumentKind kind = InstrumentKind::asset;
  std::size_t asset = 0;
  double strike = 0.0;
  double strike_high = 0.0;
};

struct InstrumentSet {
  std::vector<Instrument> items;

  std::size_t size() const { return items.size(); }

  static InstrumentSet assets_only(std::size_t d) {
    InstrumentSet s;
    for (std::size_t k = 0; k < d; ++k) s.items.push_back({InstrumentKind::asset, k, 0.0, 0.0});
    return s;
  }

  /// Assets plus an at-the-money call on each asset (d-bar = 2d).
  static InstrumentSet with_atm_calls(const ModelParams& m) {
    auto s = assets_only(m.dimension());
    for (std::size_t k = 0; k < m.dimension(); ++k)
      s.items.push_back({InstrumentKind::vanilla_call, k, m.s0[k], 0.0});
    return s;
  }

  /// Asset plus one bespoke European on it (one-dimensional experiments).
  static InstrumentSet with_vanilla(InstrumentKind kind, double strike, double strike_high = 0.0) {
    auto s = assets_only(1);
    s.items.push_back({kind, 0, strike, strike_high});
    return s;
  }

  /// Default instrument set of an experiment: the asset-matching vanilla of
  /// the payoff in one dimension, ATM calls otherwise.
  static InstrumentSet for_payoff(const ModelParams& m, const PayoffSpec& payoff, bool vanilla) {
    if (!vanilla) return assets_only(m.dimension());
    if (m.dimension() == 1) {
      if (payoff.kind == PayoffKind::butterfly)
        return with_vanilla(InstrumentKind::vanilla_call, payoff.mid_strike());
      if (payoff.kind == PayoffKind::put)
        return with_vanilla(InstrumentKind::vanilla_put, payoff.strike);
    }
    return with_atm_calls(m);
  }
};

inline void validate(const InstrumentSet& set, const ModelParams& m) {
  if (set.items.empty()) throw std::invalid_argument("instruments: empty instrument set");
  for (const auto& it : set.items) {
    if (it.asset >= m.dimension()) throw std::invalid_argument("instruments: asset index out of range");
    if (it.kind != InstrumentKind::asset && !(it.strike > 0.0))
      throw std::invalid_argument("instruments: vanilla strike must be positive");
    if (it.kind == InstrumentKind::european_butterfly && !(it.strike < it.strike_high))
      throw std::invalid_argument("instruments: butterfly needs K1 < K2");
  }
}

/// Discounted value of one instrument at time t given the spot vector.
inline double instrument_value(const Instrument& it, const ModelParams& m, double t,
                               std::span<const double> spot) {
  const std::size_t a = it.asset;
  if (a >= spot.size()) throw std::out_of_range("instrument_value: asset index out of range");
  if (it.kind == InstrumentKind::asset) return std::exp((m.dividend[a] - m.rate) * t) * spot[a];
  BsQuote q{t, spot[a], it.strike, m.maturity, m.rate, m.sigma[a], m.dividend[a]};
  double v = 0.0;
  switch (it.kind) {
    case InstrumentKind::vanilla_call: v = bs_call(q); break;
    case InstrumentKind::vanilla_put: v = bs_put(q); break;
    case InstrumentKind::european_butterfly: {
      const double mid = 0.5 * (it.strike + it.strike_high);
      v = bs_put(q);
      q.strike = mid;
      v -= 2.0 * bs_put(q);
      q.strike = it.strike_high;
      v += bs_put(q);
      break;
    }
    case InstrumentKind::asset: break;
  }
  return std::exp(-m.rate * t) * v;
}

/// Discounted values of all instruments on every path at fine time `k`,
/// layout [path][instrument].
inline std::vector<double> instrument_values(const InstrumentSet& set, const PathSet& paths,
                                             std::size_t k) {
  const std::size_t d = paths.asset_count();
  const double t = paths.grid().time(k);
  std::vector<double> out(paths.path_count() * set.size());
  std::vector<double> spot(d);
  for (std::size_t q = 0; q < paths.path_count(); ++q) {
    paths.fill_spots(q, q + 1, k, k, spot);
    for (std::size_t l = 0; l < set.size(); ++l)
      out[q * set.size() + l] = instrument_value(set.items[l], paths.model(), t, spot);
  }
  return out;
}

/// Increments of one exercise interval for a chunk of paths. Per subtick j,
/// local families store the active bin of each row, dense families the
/// activation rows; dA holds the raw instrument increments.
struct IntervalIncrements {
  std::size_t rows = 0;
  std::size_t subticks = 0;
  std::size_t instruments = 0;
  std::size_t basis = 0;
  bool local = true;
  std::vector<std::uint32_t> bins;  // subticks x rows
  std::vector<double> act;          // subticks x rows x basis
  std::vector<double> dA;           // subticks x rows x instruments

  void reshape(std::size_t r, std::size_t s, std::size_t l, std::size_t p, bool is_local) {
    rows = r;
    subticks = s;
    instruments = l;
    basis = p;
    local = is_local;
    dA.resize(s * r * l);
    if (local) {
      bins.resize(s * r);
      act.clear();
    } else {
      act.resize(s * r * p);
      bins.clear();
    }
  }

  std::uint32_t bin(std::size_t j, std::size_t row) const { return bins[j * rows + row]; }
  const double* activation(std::size_t j, std::size_t row) const {
    return act.data() + (j * rows + row) * basis;
  }
  const double* increment(std::size_t j, std::size_t row) const {
    return dA.data() + (j * rows + row) * instruments;
  }
  double* increment(std::size_t j, std::size_t row) { return dA.data() + (j * rows + row) * instruments; }

  /// alpha_{j} . dX_{j} on one row, `coef` laid out [p][k].
  double gain(std::size_t j, std::size_t row, const double* coef) const {
    const double* da = increment(j, row);
    double g = 0.0;
    if (local) {
      const double* c = coef + static_cast<std::size_t>(bin(j, row)) * instruments;
      for (std::size_t k = 0; k < instruments; ++k) g += c[k] * da[k];
      return g;
    }
    const double* u = activation(j, row);
    for (std::size_t p = 0; p < basis; ++p) {
      double s = 0.0;
      for (std::size_t k = 0; k < instruments; ++k) s += coef[p * instruments + k] * da[k];
      g += u[p] * s;
    }
    return g;
  }
};

/// Anything that yields, per exercise interval and path chunk, the
/// increments consumed by the dual solver.
template <class S>
concept IncrementSource = requires(const S& s, std::size_t i, ChunkRange r, IntervalIncrements& out) {
  { s.path_count() } -> std::convertible_to<std::size_t>;
  { s.intervals() } -> std::convertible_to<std::size_t>;
  { s.subticks() } -> std::convertible_to<std::size_t>;
  { s.instrument_count() } -> std::convertible_to<std::size_t>;
  { s.basis_size() } -> std::convertible_to<std::size_t>;
  { s.local() } -> std::convertible_to<bool>;
  s.fill(i, r, out);
};

/// Increments computed from a simulated PathSet, a frozen basis and an
/// instrument set.
class MarketIncrementSource {
 public:
  MarketIncrementSource(const PathSet& paths, const InstrumentSet& instruments, const Basis& basis)
      : paths_(&paths), instruments_(&instruments), basis_(&basis) {
    validate(instruments, paths.model());
    if (basis.assets() != paths.asset_count())
      throw std::invalid_argument("increments: basis dimension does not match the paths");
    if (basis.mapping().times != paths.grid().size())
      throw std::invalid_argument("increments: basis mapping grid does not match the paths");
    const auto& grid = paths.grid();
    const auto& m = paths.model();
    scale_.assign(grid.size() * instruments.size(), 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (std::size_t l = 0; l < instruments.size(); ++l) {
        const auto& it = instruments.items[l];
        if (it.kind == InstrumentKind::asset)
          scale_[k * instruments.size() + l] = std::exp((m.dividend[it.asset] - m.rate) * grid.time(k));
      }
  }

  std::size_t path_count() const { return paths_->path_count(); }
  std::size_t intervals() const { return paths_->grid().intervals(); }
  std::size_t subticks() const { return paths_->grid().subticks(); }
  std::size_t instrument_count() const { return instruments_->size(); }
  std::size_t basis_size() const { return basis_->size(); }
  bool local() const { return basis_->local(); }
  const PathSet& paths() const { return *paths_; }

  void fill(std::size_t i, ChunkRange r, IntervalIncrements& out) const {
    const auto& grid = paths_->grid();
    const auto& model = paths_->model();
    const std::size_t d = paths_->asset_count();
    const std::size_t S = grid.subticks();
    const std::size_t L = instruments_->size();
    const std::size_t P = basis_->size();
    const std::size_t k0 = grid.index(i, 0);
    const std::size_t nt = S + 1;
    out.reshape(r.size(), S, L, P, basis_->local());

    spots_.resize(r.size() * nt * d);
    paths_->fill_spots(r.begin, r.end, k0, k0 + S, spots_);
    prev_.resize(L);
    next_.resize(L);
    for (std::size_t row = 0; row < r.size(); ++row) {
      const double* path = spots_.data() + row * nt * d;
      values(model, grid, k0, std::span<const double>(path, d), prev_);
      for (std::size_t j = 0; j < S; ++j) {
        const std::span<const double> here(path + j * d, d);
        values(model, grid, k0 + j + 1, std::span<const double>(path + (j + 1) * d, d), next_);
        double* da = out.increment(j, row);
        for (std::size_t k = 0; k < L; ++k) da[k] = snap(next_[k], prev_[k]);
        if (out.local)
          out.bins[j * out.rows + row] = static_cast<std::uint32_t>(basis_->bin(k0 + j, here));
        else
          basis_->activations(k0 + j, here,
                              std::span<double>(out.act.data() + (j * out.rows + row) * P, P));
        prev_.swap(next_);
      }
    }
  }

 private:
  // Differences at rounding level of the values are zero (e.g. sigma = 0).
  static double snap(double next, double prev) {
    const double diff = next - prev;
    return std::abs(diff) <= kRoundingLevel * std::max(std::abs(next), std::abs(prev)) ? 0.0 : diff;
  }
  static constexpr double kRoundingLevel = 1e-13;

  void values(const ModelParams& m, const TimeGrid& grid, std::size_t k, std::span<const double> spot,
              std::vector<double>& out) const {
    const std::size_t L = out.size();
    for (std::size_t l = 0; l < L; ++l) {
      const auto& it = instruments_->items[l];
      out[l] = it.kind == InstrumentKind::asset ? scale_[k * L + l] * spot[it.asset]
                                                : instrument_value(it, m, grid.time(k), spot);
    }
  }

  const PathSet* paths_;
  const InstrumentSet* instruments_;
  const Basis* basis_;
  std::vector<double> scale_;  // e^{(delta-r)t} per fine time and asset instrument
  // Scratch, one per thread.
  static inline thread_local std::vector<double> spots_, prev_, next_;
};

}  // namespace dualhedge
