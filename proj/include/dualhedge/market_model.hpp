#pragma once

// Correlated multi-asset Black-Scholes model on the exercise/subtick grid.
//
//   dS^k = S^k ((r - delta^k) dt + sigma^k dW^k),  d<W^k, W^l> = rho dt (k != l)
//
// Paths are sampled exactly: S_t = S_0 exp((r - delta - sigma^2/2) t + Y_t)
// where Y is the correlated, volatility-scaled Brownian level, advanced one
// fine step at a time with Philox normals keyed by (seed, path, step).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualhedge/parallel.hpp"
#include "dualhedge/rng.hpp"

namespace dualhedge {

struct ModelParams {
  std::vector<double> s0;
  std::vector<double> sigma;
  std::vector<double> dividend;
  double rate = 0.0;
  double rho = 0.0;
  double maturity = 1.0;

  std::size_t dimension() const { return s0.size(); }

  /// Same scalar parameters replicated over `d` assets.
  static ModelParams uniform(std::size_t d, double s0, double sigma, double dividend, double rate,
                             double rho, double maturity) {
    return {std::vector<double>(d, s0), std::vector<double>(d, sigma),
            std::vector<double>(d, dividend), rate, rho, maturity};
  }
};

inline void validate(const ModelParams& m) {
  const std::size_t d = m.dimension();
  if (d == 0) throw std::invalid_argument("model: at least one asset is required");
  if (m.sigma.size() != d || m.dividend.size() != d)
    throw std::invalid_argument("model: s0, sigma and dividend must have the same length");
  for (std::size_t k = 0; k < d; ++k) {
    if (!(m.s0[k] > 0.0)) throw std::invalid_argument("model: s0 must be positive");
    if (!(m.sigma[k] >= 0.0)) throw std::invalid_argument("model: sigma must be nonnegative");
  }
  if (!(m.maturity > 0.0)) throw std::invalid_argument("model: maturity must be positive");
  if (d >= 2) {
    const double lower = -1.0 / static_cast<double>(d - 1);
    if (!(m.rho >= lower && m.rho <= 1.0))
      throw std::invalid_argument("model: rho outside [-1/(d-1), 1], correlation not PSD");
  }
}

/// Lower-triangular square-root factor of the equicorrelation matrix
/// (row-major d x d). Zero pivots (rho on the PSD boundary) yield zero
/// columns; a negative pivot rejects the parameters.
inline std::vector<double> correlation_factor(std::size_t d, double rho) {
  std::vector<double> L(d * d, 0.0);
  auto corr = [&](std::size_t i, std::size_t j) { return i == j ? 1.0 : rho; };
  for (std::size_t j = 0; j < d; ++j) {
    double pivot = corr(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= L[j * d + k] * L[j * d + k];
    if (pivot < -1e-12) throw std::invalid_argument("model: correlation matrix is not PSD");
    const double diag = pivot > 1e-14 ? std::sqrt(pivot) : 0.0;
    L[j * d + j] = diag;
    for (std::size_t i = j + 1; i < d; ++i) {
      double s = corr(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L[i * d + k] * L[j * d + k];
      L[i * d + j] = diag > 0.0 ? s / diag : 0.0;
    }
  }
  return L;
}

inline double discount_factor(double rate, double t) {
  if (t < 0.0) throw std::invalid_argument("discount_factor: negative time");
  return std::exp(-rate * t);
}

/// Exercise dates T_i = iT/N, each interval split into `subticks` fine steps:
/// t_{i,j} = T_i + (j / subticks)(T / N); fine index k = i * subticks + j.
class TimeGrid {
 public:
  TimeGrid(double maturity, std::size_t intervals, std::size_t subticks)
      : maturity_(maturity), intervals_(intervals), subticks_(subticks) {
    if (!(maturity > 0.0)) throw std::invalid_argument("grid: maturity must be positive");
    if (intervals == 0 || subticks == 0)
      throw std::invalid_argument("grid: interval and subtick counts must be >= 1");
  }

  double maturity() const { return maturity_; }
  std::size_t intervals() const { return intervals_; }
  std::size_t subticks() const { return subticks_; }
  std::size_t size() const { return intervals_ * subticks_ + 1; }

  std::size_t index(std::size_t i, std::size_t j) const { return i * subticks_ + j; }
  std::size_t exercise_index(std::size_t n) const { return n * subticks_; }

  double time(std::size_t k) const {
    return maturity_ * static_cast<double>(k) / static_cast<double>(intervals_ * subticks_);
  }
  double time(std::size_t i, std::size_t j) const { return time(index(i, j)); }
  double exercise_time(std::size_t n) const { return time(exercise_index(n)); }

 private:
  double maturity_;
  std::size_t intervals_;
  std::size_t subticks_;
};

enum class ProviderMode { automatic, in_memory, regenerate };

/// Per fine time, shifted sums of spot levels over all paths, plus the same
/// for the equally weighted basket mean. Shifts are the deterministic
/// forwards, which keeps variances exact when paths are deterministic.
struct MomentTable {
  std::size_t times = 0;
  std::size_t assets = 0;
  std::size_t paths = 0;
  std::vector<double> shift, sum, sum_sq;                     // times x assets
  std::vector<double> basket_shift, basket_sum, basket_sum_sq;  // times

  double mean(std::size_t k, std::size_t a) const {
    const std::size_t at = k * assets + a;
    return shift[at] + sum[at] / static_cast<double>(paths);
  }
  double variance(std::size_t k, std::size_t a) const {
    const std::size_t at = k * assets + a;
    return centered(sum[at], sum_sq[at]);
  }
  double basket_mean(std::size_t k) const {
    return basket_shift[k] + basket_sum[k] / static_cast<double>(paths);
  }
  double basket_variance(std::size_t k) const { return centered(basket_sum[k], basket_sum_sq[k]); }

 private:
  double centered(double s, double ss) const {
    const auto n = static_cast<double>(paths);
    const double m = s / n;
    return std::max(0.0, ss / n - m * m);
  }
};

struct SimulationOptions {
  ProviderMode mode = ProviderMode::automatic;
  std::size_t memory_budget_bytes = std::size_t{1} << 30;
  Execution exec{};
};

/// Q simulated trajectories on a TimeGrid.
///
/// In-memory mode stores every spot. Regenerate mode stores only the
/// Brownian levels at exercise dates and re-simulates the subticks of an
/// interval on demand; both modes return bit-identical spots.
class PathSet {
 public:
  std::size_t path_count() const { return paths_; }
  std::size_t asset_count() const { return model_.dimension(); }
  const TimeGrid& grid() const { return grid_; }
  const ModelParams& model() const { return model_; }
  std::uint64_t seed() const { return seed_; }
  ProviderMode mode() const { return mode_; }
  const MomentTable& moments() const { return moments_; }

  /// Spots of paths [q0, q1) at fine times [k0, k1], layout [path][time][asset].
  void fill_spots(std::size_t q0, std::size_t q1, std::size_t k0, std::size_t k1,
                  std::span<double> out) const {
    const std::size_t d = asset_count();
    const std::size_t nt = k1 - k0 + 1;
    if (q1 > paths_ || q0 > q1 || k1 >= grid_.size() || k0 > k1)
      throw std::out_of_range("PathSet::fill_spots: index out of range");
    if (out.size() < (q1 - q0) * nt * d)
      throw std::invalid_argument("PathSet::fill_spots: output too small");
    if (mode_ == ProviderMode::in_memory) {
      const std::size_t K = grid_.size();
      for (std::size_t q = q0; q < q1; ++q) {
        const double* src = spots_.data() + (q * K + k0) * d;
        std::copy(src, src + nt * d, out.data() + (q - q0) * nt * d);
      }
      return;
    }
    const NormalStream normals(seed_);
    std::vector<double> level(d), z(d);
    const std::size_t n0 = k0 / grid_.subticks();
    const std::size_t start = grid_.exercise_index(n0);
    for (std::size_t q = q0; q < q1; ++q) {
      const double* stored = levels_.data() + (q * (grid_.intervals() + 1) + n0) * d;
      std::copy(stored, stored + d, level.begin());
      double* dst = out.data() + (q - q0) * nt * d;
      for (std::size_t k = start; k <= k1; ++k) {
        if (k >= k0) spot_from_level(k, level, dst + (k - k0) * d);
        if (k < k1) advance(normals, q, k, level, z);
      }
    }
  }

  /// Spot of asset `a` on path `q` at exercise date `n`.
  double exercise_spot(std::size_t q, std::size_t n, std::size_t a) const {
    const std::size_t d = asset_count();
    if (q >= paths_ || n > grid_.intervals() || a >= d)
      throw std::out_of_range("PathSet::exercise_spot: index out of range");
    const std::size_t k = grid_.exercise_index(n);
    if (mode_ == ProviderMode::in_memory) return spots_[(q * grid_.size() + k) * d + a];
    const double y = levels_[(q * (grid_.intervals() + 1) + n) * d + a];
    return model_.s0[a] * std::exp(drift_[a] * grid_.time(k) + y);
  }

  /// Exercise-date spots of paths [q0, q1), layout [path][date][asset].
  void fill_exercise_spots(std::size_t q0, std::size_t q1, std::span<double> out) const {
    const std::size_t d = asset_count();
    const std::size_t dates = grid_.intervals() + 1;
    if (out.size() < (q1 - q0) * dates * d)
      throw std::invalid_argument("PathSet::fill_exercise_spots: output too small");
    for (std::size_t q = q0; q < q1; ++q)
      for (std::size_t n = 0; n < dates; ++n)
        for (std::size_t a = 0; a < d; ++a)
          out[((q - q0) * dates + n) * d + a] = exercise_spot(q, n, a);
  }

 private:
  friend PathSet simulate_paths(const ModelParams&, const TimeGrid&, std::size_t, std::uint64_t,
                                const SimulationOptions&);

  PathSet(ModelParams model, TimeGrid grid, std::size_t paths, std::uint64_t seed)
      : model_(std::move(model)), grid_(grid), paths_(paths), seed_(seed) {
    const std::size_t d = model_.dimension();
    drift_.resize(d);
    for (std::size_t a = 0; a < d; ++a)
      drift_[a] = model_.rate - model_.dividend[a] - 0.5 * model_.sigma[a] * model_.sigma[a];
    const auto L = correlation_factor(d, model_.rho);
    factor_.resize(d * d);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) factor_[a * d + b] = model_.sigma[a] * L[a * d + b];
    sqrt_dt_.resize(grid_.size() - 1);
    for (std::size_t k = 0; k + 1 < grid_.size(); ++k)
      sqrt_dt_[k] = std::sqrt(grid_.time(k + 1) - grid_.time(k));
  }

  void spot_from_level(std::size_t k, const std::vector<double>& level, double* out) const {
    const double t = grid_.time(k);
    for (std::size_t a = 0; a < level.size(); ++a)
      out[a] = model_.s0[a] * std::exp(drift_[a] * t + level[a]);
  }

  void advance(const NormalStream& normals, std::size_t q, std::size_t k, std::vector<double>& level,
               std::vector<double>& z) const {
    const std::size_t d = level.size();
    normals.fill(q, static_cast<std::uint32_t>(k), z.data(), d);
    for (std::size_t a = 0; a < d; ++a) {
      double shock = 0.0;
      for (std::size_t b = 0; b <= a; ++b) shock += factor_[a * d + b] * z[b];
      level[a] += sqrt_dt_[k] * shock;
    }
  }

  ModelParams model_;
  TimeGrid grid_;
  std::size_t paths_;
  std::uint64_t seed_;
  ProviderMode mode_ = ProviderMode::in_memory;
  std::vector<double> drift_, factor_, sqrt_dt_;
  std::vector<double> spots_;   // in-memory: Q x K x d
  std::vector<double> levels_;  // regenerate: Q x (N+1) x d
  MomentTable moments_;
};

inline PathSet simulate_paths(const ModelParams& model, const TimeGrid& grid, std::size_t paths,
                              std::uint64_t seed, const SimulationOptions& options = {}) {
  validate(model);
  if (paths == 0) throw std::invalid_argument("simulate_paths: path count must be positive");
  if (std::abs(grid.maturity() - model.maturity) > 1e-12 * model.maturity)
    throw std::invalid_argument("simulate_paths: grid and model maturities differ");
  PathSet set(model, grid, paths, seed);
  const std::size_t d = model.dimension();
  const std::size_t K = grid.size();
  const std::size_t dates = grid.intervals() + 1;

  ProviderMode mode = options.mode;
  if (mode == ProviderMode::automatic) {
    const double bytes = static_cast<double>(paths) * K * d * sizeof(double);
    mode = bytes <= static_cast<double>(options.memory_budget_bytes) ? ProviderMode::in_memory
                                                                     : ProviderMode::regenerate;
  }
  set.mode_ = mode;
  if (mode == ProviderMode::in_memory)
    set.spots_.resize(paths * K * d);
  else
    set.levels_.resize(paths * dates * d);

  MomentTable proto;
  proto.times = K;
  proto.assets = d;
  proto.paths = paths;
  proto.shift.resize(K * d);
  proto.basket_shift.assign(K, 0.0);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t a = 0; a < d; ++a) {
      const double fwd = model.s0[a] * std::exp((model.rate - model.dividend[a]) * grid.time(k));
      proto.shift[k * d + a] = fwd;
      proto.basket_shift[k] += fwd / static_cast<double>(d);
    }
  proto.sum.assign(K * d, 0.0);
  proto.sum_sq.assign(K * d, 0.0);
  proto.basket_sum.assign(K, 0.0);
  proto.basket_sum_sq.assign(K, 0.0);

  const NormalStream normals(seed);
  auto accumulate = [&](MomentTable& acc, ChunkRange r) {
    std::vector<double> level(d), z(d), spot(d);
    for (std::size_t q = r.begin; q < r.end; ++q) {
      std::fill(level.begin(), level.end(), 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        set.spot_from_level(k, level, spot.data());
        if (mode == ProviderMode::in_memory)
          std::copy(spot.begin(), spot.end(), set.spots_.begin() + (q * K + k) * d);
        else if (k % grid.subticks() == 0)
          std::copy(level.begin(), level.end(),
                    set.levels_.begin() + (q * dates + k / grid.subticks()) * d);
        double basket = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          const double x = spot[a] - acc.shift[k * d + a];
          acc.sum[k * d + a] += x;
          acc.sum_sq[k * d + a] += x * x;
          basket += spot[a];
        }
        const double xb = basket / static_cast<double>(d) - acc.basket_shift[k];
        acc.basket_sum[k] += xb;
        acc.basket_sum_sq[k] += xb * xb;
        if (k + 1 < K) set.advance(normals, q, k, level, z);
      }
    }
  };
  auto merge = [](MomentTable& into, const MomentTable& from) {
    for (std::size_t i = 0; i < into.sum.size(); ++i) {
      into.sum[i] += from.sum[i];
      into.sum_sq[i] += from.sum_sq[i];
    }
    for (std::size_t i = 0; i < into.basket_sum.size(); ++i) {
      into.basket_sum[i] += from.basket_sum[i];
      into.basket_sum_sq[i] += from.basket_sum_sq[i];
    }
  };
  set.moments_ = ordered_reduce<MomentTable>(
      paths, options.exec, [&] { return proto; }, accumulate, merge);
  return set;
}

/// Discounted value e^{(delta^k - r) t} S^k_t of asset `k` on every path.
inline std::vector<double> tradable_value(const PathSet& paths, std::size_t time_index,
                                          std::size_t k) {
  const auto& grid = paths.grid();
  if (time_index >= grid.size() || k >= paths.asset_count())
    throw std::out_of_range("tradable_value: index out of range");
  const auto& m = paths.model();
  const double scale = std::exp((m.dividend[k] - m.rate) * grid.time(time_index));
  const std::size_t d = paths.asset_count();
  std::vector<double> out(paths.path_count());
  std::vector<double> buf(d);
  for (std::size_t q = 0; q < out.size(); ++q) {
    paths.fill_spots(q, q + 1, time_index, time_index, buf);
    out[q] = scale * buf[k];
  }
  return out;
}

}  // namespace dualhedge
