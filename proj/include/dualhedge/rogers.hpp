#pragma once

// Rogers' baseline: the best constant multiple of one reference martingale,
//   g(a) = mean_q max_j (Z_j - a (A_j - A_0)),
// minimised by golden-section search (g is convex piecewise linear).

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dualhedge/instruments.hpp"
#include "dualhedge/parallel.hpp"
#include "dualhedge/payoffs.hpp"
#include "dualhedge/statistics.hpp"

namespace dualhedge {

struct RogersResult {
  double alpha_star = 0.0;
  Estimate price;
};

/// Discounted reference values A_n at every exercise date, Q x (N+1).
inline std::vector<double> reference_values(const PathSet& paths, const Instrument& reference,
                                            const Execution& exec = {}) {
  const auto& grid = paths.grid();
  const std::size_t dates = grid.intervals() + 1;
  const std::size_t d = paths.asset_count();
  std::vector<double> out(paths.path_count() * dates);
  for_each_chunk(paths.path_count(), exec, [&](ChunkRange r) {
    std::vector<double> spots(r.size() * dates * d);
    paths.fill_exercise_spots(r.begin, r.end, spots);
    for (std::size_t q = r.begin; q < r.end; ++q)
      for (std::size_t n = 0; n < dates; ++n)
        out[q * dates + n] = instrument_value(
            reference, paths.model(), grid.exercise_time(n),
            std::span<const double>(spots.data() + ((q - r.begin) * dates + n) * d, d));
  });
  return out;
}

/// Per-path objective values max_j (Z_j - a (A_j - A_0)).
inline std::vector<double> rogers_pathwise(const RewardMatrix& z, std::span<const double> ref, double a) {
  std::vector<double> v(z.paths);
  for (std::size_t q = 0; q < z.paths; ++q) {
    const double* A = ref.data() + q * z.dates;
    double best = z.at(q, 0);
    for (std::size_t n = 1; n < z.dates; ++n) best = std::max(best, z.at(q, n) - a * (A[n] - A[0]));
    v[q] = best;
  }
  return v;
}

inline double rogers_objective(const RewardMatrix& z, std::span<const double> ref, double a) {
  const auto v = rogers_pathwise(z, ref, a);
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Golden-section minimum of a convex function on [lo, hi]; the bracket is
/// expanded while the minimiser sits on its edge.
inline double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int expand = 0; expand < 40; ++expand) {
    double a = lo, b = hi;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + invphi * (b - a);
        fd = f(d);
      }
    }
    const double x = 0.5 * (a + b);
    const double width = hi - lo;
    if (x - lo < 2.0 * tol) {
      lo -= width;
    } else if (hi - x < 2.0 * tol) {
      hi += width;
    } else {
      return x;
    }
  }
  throw std::runtime_error("golden_section: bracket expansion failed");
}

inline RogersResult minimize_scalar_dual(const RewardMatrix& z, std::span<const double> ref,
                                         double lo = -1.0, double hi = 3.0, double tol = 1e-6) {
  if (ref.size() != z.paths * z.dates) throw std::invalid_argument("rogers: reference shape mismatch");
  const double a = golden_section([&](double x) { return rogers_objective(z, ref, x); }, lo, hi, tol);
  return {a, estimate_mean(rogers_pathwise(z, ref, a))};
}

}  // namespace dualhedge
