#pragma once

// Regression families u^p used to build elementary martingale increments.
//
//  * local_hypercube:     indicators of the P^d cells of [0,1)^d after mapping
//                         each asset through its moment-matched lognormal CDF;
//  * local_signed_payoff: indicators of P cells of [0,1) after mapping the
//                         signed basket payoff K - mean(S) through a normal CDF;
//  * polynomial:          all monomials of total degree <= eta in the assets,
//                         each affinely mapped from [C^-, C^+] to [-1, 1].
//
// Mapping parameters are per fine time, frozen once calibrated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "dualhedge/analytics.hpp"
#include "dualhedge/market_model.hpp"
#include "dualhedge/payoffs.hpp"

namespace dualhedge {

enum class BasisFamily { local_hypercube, local_signed_payoff, polynomial };

inline BasisFamily parse_basis_family(std::string_view s) {
  if (s == "local_hypercube" || s == "local") return BasisFamily::local_hypercube;
  if (s == "local_signed_payoff" || s == "signed_payoff") return BasisFamily::local_signed_payoff;
  if (s == "polynomial") return BasisFamily::polynomial;
  throw std::invalid_argument("unknown basis family: " + std::string(s));
}

inline std::string to_string(BasisFamily f) {
  switch (f) {
    case BasisFamily::local_hypercube: return "local_hypercube";
    case BasisFamily::local_signed_payoff: return "local_signed_payoff";
    case BasisFamily::polynomial: return "polynomial";
  }
  return "?";
}

inline std::size_t binomial(std::size_t n, std::size_t k) {
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct BasisSpec {
  BasisFamily family = BasisFamily::local_hypercube;
  std::size_t bins = 1;    // P, local families
  std::size_t degree = 0;  // eta, polynomial family

  bool local() const { return family != BasisFamily::polynomial; }

  /// Basis size P-bar for `d` assets.
  std::size_t size(std::size_t d) const {
    switch (family) {
      case BasisFamily::local_hypercube: {
        std::size_t s = 1;
        for (std::size_t a = 0; a < d; ++a) s *= bins;
        return s;
      }
      case BasisFamily::local_signed_payoff: return bins;
      case BasisFamily::polynomial: return binomial(d + degree, degree);
    }
    return 0;
  }
};

inline void validate(const BasisSpec& b) {
  if (b.local() && b.bins == 0) throw std::invalid_argument("basis: bins must be >= 1");
}

enum class MomentSource { empirical, closed_form };

/// Frozen state mapping: per fine time k and asset a, either moment pairs
/// (local families) or affine bounds (polynomial).
struct StateMapping {
  BasisFamily family = BasisFamily::local_hypercube;
  std::size_t times = 0;
  std::size_t assets = 0;
  double strike = 0.0;       // signed payoff K
  std::vector<double> first;   // mean, or C^- (times x assets; times for signed payoff)
  std::vector<double> second;  // variance, or C^+
};

/// Exponent tuples of all monomials of total degree <= `degree` in `d`
/// variables, in graded order (constant first).
inline std::vector<std::vector<unsigned>> monomial_exponents(std::size_t d, std::size_t degree) {
  std::vector<std::vector<unsigned>> out;
  std::vector<unsigned> cur(d, 0);
  for (std::size_t total = 0; total <= degree; ++total) {
    // All tuples summing exactly to `total`, lexicographically descending.
    auto rec = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
      if (pos + 1 == d) {
        cur[pos] = static_cast<unsigned>(left);
        out.push_back(cur);
        return;
      }
      for (std::size_t e = left + 1; e-- > 0;) {
        cur[pos] = static_cast<unsigned>(e);
        self(self, pos + 1, left - e);
      }
    };
    rec(rec, 0, total);
  }
  return out;
}

/// Polynomial bounds C^{k,pm}_t = S0 exp((r - delta - sigma^2/2) t pm 4 sigma sqrt(t)).
inline StateMapping polynomial_mapping(const ModelParams& model, const TimeGrid& grid) {
  const std::size_t d = model.dimension();
  StateMapping m{BasisFamily::polynomial, grid.size(), d, 0.0, {}, {}};
  m.first.resize(grid.size() * d);
  m.second.resize(grid.size() * d);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.time(k);
    for (std::size_t a = 0; a < d; ++a) {
      const double s = model.sigma[a];
      const double centre = std::log(model.s0[a]) + (model.rate - model.dividend[a] - 0.5 * s * s) * t;
      m.first[k * d + a] = std::exp(centre - 4.0 * s * std::sqrt(t));
      m.second[k * d + a] = std::exp(centre + 4.0 * s * std::sqrt(t));
    }
  }
  return m;
}

/// Calibrates the mapping of `spec` on a training path set.
inline StateMapping calibrate_mapping(const BasisSpec& spec, const PathSet& paths,
                                      const PayoffSpec& payoff,
                                      MomentSource source = MomentSource::empirical) {
  const auto& model = paths.model();
  const auto& grid = paths.grid();
  const std::size_t d = model.dimension();
  const std::size_t K = grid.size();
  if (spec.family == BasisFamily::polynomial) return polynomial_mapping(model, grid);

  const auto& mom = paths.moments();
  auto fwd = [&](std::size_t k, std::size_t a) {
    return model.s0[a] * std::exp((model.rate - model.dividend[a]) * grid.time(k));
  };
  auto cov = [&](std::size_t k, std::size_t a, std::size_t b) {
    const double rho = a == b ? 1.0 : model.rho;
    return fwd(k, a) * fwd(k, b) * std::expm1(rho * model.sigma[a] * model.sigma[b] * grid.time(k));
  };

  StateMapping m{spec.family, K, d, payoff.strike, {}, {}};
  if (spec.family == BasisFamily::local_hypercube) {
    m.first.resize(K * d);
    m.second.resize(K * d);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t a = 0; a < d; ++a) {
        if (source == MomentSource::empirical) {
          m.first[k * d + a] = mom.mean(k, a);
          m.second[k * d + a] = mom.variance(k, a);
        } else {
          m.first[k * d + a] = fwd(k, a);
          m.second[k * d + a] = cov(k, a, a);
        }
      }
    return m;
  }
  // Signed payoff K - (1/d) sum S.
  m.first.resize(K);
  m.second.resize(K);
  const double w = 1.0 / static_cast<double>(d);
  for (std::size_t k = 0; k < K; ++k) {
    if (source == MomentSource::empirical) {
      m.first[k] = payoff.strike - mom.basket_mean(k);
      m.second[k] = mom.basket_variance(k);
    } else {
      double mean = 0.0, var = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        mean += w * fwd(k, a);
        for (std::size_t b = 0; b < d; ++b) var += w * w * cov(k, a, b);
      }
      m.first[k] = payoff.strike - mean;
      m.second[k] = var;
    }
  }
  return m;
}

/// A basis family with its frozen mapping, evaluated at fine time indices.
class Basis {
 public:
  Basis(BasisSpec spec, StateMapping mapping)
      : spec_(spec), mapping_(std::move(mapping)) {
    validate(spec_);
    if (spec_.family != mapping_.family)
      throw std::invalid_argument("basis: mapping family does not match the basis family");
    if (spec_.family == BasisFamily::polynomial)
      exponents_ = monomial_exponents(mapping_.assets, spec_.degree);
    else
      build_edges();
  }

  const BasisSpec& spec() const { return spec_; }
  const StateMapping& mapping() const { return mapping_; }
  bool local() const { return spec_.local(); }
  std::size_t size() const { return spec_.size(mapping_.assets); }
  std::size_t assets() const { return mapping_.assets; }

  /// Active cell of a local family at fine time `k`: floor(P F(x)) for the
  /// mapping CDF F, found among the precomputed quantiles F^{-1}(b/P).
  std::size_t bin(std::size_t k, std::span<const double> spot) const {
    const std::size_t P = spec_.bins;
    if (spec_.family == BasisFamily::local_signed_payoff) {
      double basket = 0.0;
      for (double s : spot) basket += s;
      return cell(k, mapping_.strike - basket / static_cast<double>(spot.size()));
    }
    const std::size_t d = mapping_.assets;
    std::size_t flat = 0, stride = 1;
    for (std::size_t a = 0; a < d; ++a) {
      flat += cell(k * d + a, spot[a]) * stride;
      stride *= P;
    }
    return flat;
  }

  /// Mapped coordinates of the polynomial family (0 where C^- == C^+).
  void mapped(std::size_t k, std::span<const double> spot, std::span<double> out) const {
    const std::size_t d = mapping_.assets;
    for (std::size_t a = 0; a < d; ++a) {
      const double lo = mapping_.first[k * d + a];
      const double hi = mapping_.second[k * d + a];
      out[a] = hi > lo ? (2.0 * spot[a] - hi - lo) / (hi - lo) : 0.0;
    }
  }

  /// All basis activations at fine time `k` (one-hot for local families).
  void activations(std::size_t k, std::span<const double> spot, std::span<double> out) const {
    if (local()) {
      std::fill(out.begin(), out.end(), 0.0);
      out[bin(k, spot)] = 1.0;
      return;
    }
    const std::size_t d = mapping_.assets;
    const std::size_t deg = spec_.degree;
    double x[16];
    double pow_table[16 * 32];
    if (d > 16 || deg >= 32) throw std::invalid_argument("basis: polynomial too large");
    mapped(k, spot, std::span<double>(x, d));
    for (std::size_t a = 0; a < d; ++a) {
      pow_table[a * 32] = 1.0;
      for (std::size_t e = 1; e <= deg; ++e) pow_table[a * 32 + e] = pow_table[a * 32 + e - 1] * x[a];
    }
    for (std::size_t p = 0; p < exponents_.size(); ++p) {
      double v = 1.0;
      for (std::size_t a = 0; a < d; ++a) v *= pow_table[a * 32 + exponents_[p][a]];
      out[p] = v;
    }
  }

 private:
  std::size_t cell(std::size_t row, double x) const {
    const std::size_t n = spec_.bins - 1;
    const double* e = edges_.data() + row * n;
    return static_cast<std::size_t>(std::upper_bound(e, e + n, x) - e);
  }

  // Inner cell edges per (time, asset) row; a point mass sits just above its
  // mean so that x == mean falls in cell 0.
  void build_edges() {
    const std::size_t P = spec_.bins;
    const bool lognormal = spec_.family == BasisFamily::local_hypercube;
    const std::size_t rows = lognormal ? mapping_.times * mapping_.assets : mapping_.times;
    if (mapping_.first.size() != rows || mapping_.second.size() != rows)
      throw std::invalid_argument("basis: mapping size does not match its shape");
    std::vector<double> z(P > 0 ? P - 1 : 0);
    for (std::size_t b = 1; b < P; ++b)
      z[b - 1] = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * static_cast<double>(b) / static_cast<double>(P));
    edges_.resize(rows * z.size());
    for (std::size_t r = 0; r < rows; ++r) {
      const double mean = mapping_.first[r], var = mapping_.second[r];
      if (lognormal && !(mean > 0.0)) throw std::invalid_argument("basis: lognormal mapping needs a positive mean");
      for (std::size_t b = 0; b < z.size(); ++b) {
        double e;
        if (!(var > 0.0)) {
          e = std::nextafter(mean, std::numeric_limits<double>::infinity());
        } else if (lognormal) {
          const double s2 = std::log1p(var / (mean * mean));
          e = std::exp(std::log(mean) - 0.5 * s2 + std::sqrt(s2) * z[b]);
        } else {
          e = mean + std::sqrt(var) * z[b];
        }
        edges_[r * z.size() + b] = e;
      }
    }
  }

  BasisSpec spec_;
  StateMapping mapping_;
  std::vector<std::vector<unsigned>> exponents_;
  std::vector<double> edges_;
};

/// Activation vector u^p_{i,j}(spot), length P-bar.
inline std::vector<double> evaluate_basis(const Basis& basis, const TimeGrid& grid, std::size_t i,
                                          std::size_t j, std::span<const double> spot) {
  std::vector<double> out(basis.size());
  basis.activations(grid.index(i, j), spot, out);
  return out;
}

}  // namespace dualhedge
