#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dualhedge/analytics.hpp"
#include "dualhedge/lattice.hpp"

using namespace dualhedge;

namespace {

const PayoffSpec kPut{PayoffKind::put, 100.0};

double binom_coeff(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

}  // namespace

TEST(Crr, ParametersAndExerciseMapping) {
  const auto m = make_crr(100.0, 0.4, 0.06, 0.0, 0.5, 500, 10);
  EXPECT_GT(m.prob, 0.0);
  EXPECT_LT(m.prob, 1.0);
  EXPECT_NEAR(m.up * m.down, 1.0, 1e-15);
  std::size_t dates = 0;
  for (bool e : m.exercise) dates += e;
  EXPECT_EQ(dates, 11u);
  for (std::size_t n = 0; n <= 10; ++n) EXPECT_TRUE(m.exercise[n * 50]);
  // A one-step risk-neutral expectation of the discounted asset is exact.
  const double g = std::exp(0.06 * m.dt);
  EXPECT_NEAR(m.prob * m.up + (1 - m.prob) * m.down, g, 1e-14);
}

TEST(Snell, ZeroPayoffIsZero) {
  const auto t = snell_solve(make_crr(100.0, 0.3, 0.05, 0.0, 1.0, 50, 10), PayoffSpec{PayoffKind::put, 1e-6});
  for (const auto& row : t.U)
    for (double v : row) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(delta(t, 3, 1), 0.0);
}

TEST(Snell, MaturityOnlyIsEuropeanTreePrice) {
  const std::size_t n = 200;
  const auto m = make_crr(100.0, 0.4, 0.06, 0.0, 0.5, n, 1);
  const auto t = snell_solve(m, kPut);
  double euro = 0.0;
  for (std::size_t j = 0; j <= n; ++j)
    euro += binom_coeff(static_cast<int>(n), static_cast<int>(j)) * std::pow(m.prob, j) *
            std::pow(1.0 - m.prob, n - j) * std::max(100.0 - m.spot(n, j), 0.0);
  euro *= std::exp(-0.06 * 0.5);
  EXPECT_NEAR(t.value(), euro, 1e-10);
  // and the tree converges to Black-Scholes
  EXPECT_NEAR(t.value(), bs_put({0.0, 100.0, 100.0, 0.5, 0.06, 0.4, 0.0}), 0.03);
}

TEST(Snell, BermudanPutConvergence) {
  const double v500 = snell_solve(make_crr(100.0, 0.4, 0.06, 0.0, 0.5, 500, 10), kPut).value();
  const double v1000 = snell_solve(make_crr(100.0, 0.4, 0.06, 0.0, 0.5, 1000, 10), kPut).value();
  EXPECT_NEAR(v500, 9.90, 0.02);
  EXPECT_NEAR(v500, v1000, 0.01);
}

TEST(DoobMeyer, DecompositionOnEveryPath) {
  const auto m = make_crr(100.0, 0.4, 0.06, 0.0, 0.5, 10, 10);
  const auto t = snell_solve(m, kPut);
  const auto paths = TreePaths::enumerate(m);
  for (std::size_t q = 0; q < paths.count(); ++q) {
    double M = 0.0, A = 0.0, prevA = 0.0;
    for (std::size_t n = 0; n < m.steps; ++n) {
      const auto step = doob_meyer(t, n, paths.node(q, n), paths.up(q, n));
      EXPECT_GE(step.dA, -1e-14);
      M += step.dM;
      A += step.dA;
      EXPECT_GE(A, prevA - 1e-14);
      prevA = A;
      EXPECT_NEAR(t.U[n + 1][paths.node(q, n + 1)], t.value() + M - A, 1e-12);
    }
  }
  // Martingale increments have zero conditional mean node by node.
  for (std::size_t n = 0; n < m.steps; ++n)
    for (std::size_t j = 0; j <= n; ++j)
      EXPECT_NEAR(m.prob * doob_meyer(t, n, j, true).dM + (1 - m.prob) * doob_meyer(t, n, j, false).dM, 0.0, 1e-13);
}

TEST(DoobMeyer, DeterministicModelHasNoMartingalePart) {
  const auto m = make_crr(90.0, 0.0, 0.06, 0.0, 1.0, 8, 8);
  const auto t = snell_solve(m, kPut);
  for (std::size_t n = 0; n < 8; ++n)
    for (std::size_t j = 0; j <= n; ++j) {
      EXPECT_EQ(doob_meyer(t, n, j, true).dM, 0.0);
      EXPECT_EQ(doob_meyer(t, n, j, false).dM, 0.0);
    }
}

TEST(DoobMeyer, SurelyOptimalIdentity) {
  const auto m = make_crr(100.0, 0.4, 0.06, 0.0, 0.5, 12, 12);
  const auto t = snell_solve(m, kPut);
  const auto paths = TreePaths::enumerate(m);
  for (std::size_t q = 0; q < paths.count(); ++q) {
    std::vector<double> M(m.steps + 1, 0.0);
    for (std::size_t n = 0; n < m.steps; ++n)
      M[n + 1] = M[n] + doob_meyer(t, n, paths.node(q, n), paths.up(q, n)).dM;
    for (std::size_t n = 0; n <= m.steps; ++n) {
      double best = -1e300;
      for (std::size_t j = n; j <= m.steps; ++j) best = std::max(best, t.Z[j][paths.node(q, j)] - (M[j] - M[n]));
      ASSERT_NEAR(best, t.U[n][paths.node(q, n)], 1e-12);
    }
  }
}

TEST(DoobMeyer, TelescopicIdentityForAnyMartingale) {
  // For the martingale M = c * discounted stock, E[max_j(Z_j - M_j)] equals
  // the European value plus the expected sum of positive excess rewards,
  // computed backwards pathwise.
  const auto m = make_crr(100.0, 0.3, 0.05, 0.0, 1.0, 8, 8);
  const auto t = snell_solve(m, kPut);
  const auto paths = TreePaths::enumerate(m);
  const TreeIncrementSource src(m, paths, 1);
  const double c = -0.37;
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t q = 0; q < paths.count(); ++q) {
    std::vector<double> M(m.steps + 1, 0.0);
    for (std::size_t n = 0; n < m.steps; ++n)
      M[n + 1] = M[n] + c * (src.tradable(n + 1, paths.node(q, n + 1)) - src.tradable(n, paths.node(q, n)));
    double best = -1e300;
    for (std::size_t j = 0; j <= m.steps; ++j) best = std::max(best, t.Z[j][paths.node(q, j)] - M[j]);
    // Z_N - M_N + sum_n (Z_n - M_n - max_{j>n}(Z_j - M_j))_+
    double tail = t.Z[m.steps][paths.node(q, m.steps)] - M[m.steps];
    double excess = 0.0;
    for (std::size_t n = m.steps; n-- > 0;) {
      const double here = t.Z[n][paths.node(q, n)] - M[n];
      excess += std::max(here - tail, 0.0);
      tail = std::max(tail, here);
    }
    lhs += paths.weights[q] * best;
    rhs += paths.weights[q] * (t.Z[m.steps][paths.node(q, m.steps)] - M[m.steps] + excess);
  }
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Delta, DeepInTheMoneyPutIsMinusOne) {
  const auto t = snell_solve(make_crr(50.0, 0.05, 0.06, 0.0, 1.0, 40, 40), kPut);
  EXPECT_NEAR(delta(t, 10, 5), -1.0, 1e-9);
  EXPECT_THROW(delta(t, 40, 0), std::out_of_range);
}

TEST(Delta, EuropeanCallMatchesBlackScholes) {
  const std::size_t n = 2000;
  const auto t = snell_solve(make_crr(100.0, 0.25, 0.05, 0.02, 1.0, n, 1), PayoffSpec{PayoffKind::max_call, 100.0});
  const double sd = 0.25;
  const double d1 = (std::log(1.0) + (0.05 - 0.02 + 0.5 * sd * sd)) / sd;
  EXPECT_NEAR(delta(t, 0, 0), std::exp(-0.02) * norm_cdf(d1), 5.0 / n);
}

TEST(Delta, InterpolationHitsNodes) {
  const auto m = make_crr(100.0, 0.3, 0.05, 0.0, 1.0, 20, 5);
  const auto t = snell_solve(m, kPut);
  for (std::size_t j = 0; j <= 7; ++j) EXPECT_NEAR(delta_at(t, m.time(7), m.spot(7, j)), delta(t, 7, j), 1e-9);
  EXPECT_EQ(delta_at(t, m.time(7), 1e-3), delta(t, 7, 0));
}

TEST(TreePaths, WeightsSumToOneAndNodesCount) {
  const auto m = make_crr(100.0, 0.3, 0.05, 0.0, 1.0, 10, 10);
  const auto p = TreePaths::enumerate(m);
  double s = 0.0;
  for (double w : p.weights) s += w;
  EXPECT_NEAR(s, 1.0, 1e-13);
  EXPECT_EQ(p.node(0b1011, 3), 2u);
  EXPECT_EQ(p.node(0b1011, 4), 3u);
}
