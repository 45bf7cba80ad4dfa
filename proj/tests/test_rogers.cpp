#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dualhedge/lattice.hpp"
#include "dualhedge/rogers.hpp"

using namespace dualhedge;

namespace {
const PayoffSpec kPut{PayoffKind::put, 100.0};
}

TEST(GoldenSection, FindsConvexMinimumAndExpands) {
  EXPECT_NEAR(golden_section([](double x) { return std::abs(x - 1.3); }, -1.0, 3.0, 1e-9), 1.3, 1e-8);
  EXPECT_NEAR(golden_section([](double x) { return (x + 4.0) * (x + 4.0); }, -1.0, 3.0, 1e-9), -4.0, 1e-6);
  EXPECT_NEAR(golden_section([](double x) { return std::abs(x - 9.0); }, -1.0, 3.0, 1e-9), 9.0, 1e-8);
}

TEST(Rogers, ZeroCoefficientIsMeanPathwiseMax) {
  const auto m = ModelParams::uniform(1, 100.0, 0.4, 0.0, 0.06, 0.0, 0.5);
  const auto p = simulate_paths(m, TimeGrid(0.5, 10, 1), 5000, 1);
  const auto z = reward_matrix(kPut, p);
  const auto ref = reference_values(p, {InstrumentKind::vanilla_put, 0, 100.0});
  double crude = 0.0;
  for (std::size_t q = 0; q < z.paths; ++q) {
    double b = 0.0;
    for (std::size_t n = 0; n < z.dates; ++n) b = std::max(b, z.at(q, n));
    crude += b;
  }
  EXPECT_NEAR(rogers_objective(z, ref, 0.0), crude / z.paths, 1e-12);
}

TEST(Rogers, GoldenSectionMatchesGridScan) {
  const auto m = ModelParams::uniform(1, 100.0, 0.4, 0.0, 0.06, 0.0, 0.5);
  const auto p = simulate_paths(m, TimeGrid(0.5, 10, 1), 20000, 2);
  const auto z = reward_matrix(kPut, p);
  const auto ref = reference_values(p, {InstrumentKind::vanilla_put, 0, 100.0});
  const auto r = minimize_scalar_dual(z, ref);
  double best = 1e300;
  for (int i = 0; i <= 3000; ++i) best = std::min(best, rogers_objective(z, ref, 3.0 * i / 3000.0));
  EXPECT_LE(r.price.mean, best + 1e-6);
  EXPECT_GE(r.price.mean, best - 1e-3);
  // Upper bound on the tree value.
  const double tree = snell_solve(make_crr(100.0, 0.4, 0.06, 0.0, 0.5, 1000, 10), kPut).value();
  EXPECT_GE(r.price.mean, tree - 2.0 * r.price.std_error);
}
