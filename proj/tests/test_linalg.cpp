#include <gtest/gtest.h>

#include <random>

#include "dualhedge/linalg.hpp"

using namespace dualhedge;

TEST(RidgeSolve, WellConditionedSystemIsExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(200, 6);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = nd(rng);
  const Eigen::MatrixXd G = X.transpose() * X;
  Eigen::VectorXd x(6);
  x << 1, -2, 3, 0.5, 0, 7;
  const Eigen::VectorXd b = G * x;
  EXPECT_LT((ridge_solve(G, b) - x).norm(), 1e-12);
}

TEST(RidgeSolve, ZeroTraceGivesZero) {
  const Eigen::MatrixXd G = Eigen::MatrixXd::Zero(3, 3);
  EXPECT_EQ(ridge_solve(G, Eigen::VectorXd::Ones(3)).norm(), 0.0);
}

TEST(RidgeSolve, SingularSystemStaysFiniteAndConsistent) {
  // Duplicate column: rank 1 Gram, right-hand side in its range.
  Eigen::MatrixXd G(2, 2);
  G << 4, 4, 4, 4;
  Eigen::VectorXd b(2);
  b << 8, 8;
  const Eigen::VectorXd x = ridge_solve(G, b);
  EXPECT_TRUE(x.allFinite());
  EXPECT_NEAR((G * x - b).norm(), 0.0, 1e-8);
  EXPECT_NEAR(x(0), x(1), 1e-9);  // near minimum-norm split
}

TEST(RidgeSolve, RarelyActiveDirectionIsShrunk) {
  // Column 1 is non-zero on 3 of 10000 rows; the unregularised fit would put
  // a coefficient of 1000 on it.
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(10000, 2);
  Eigen::VectorXd y(10000);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (Eigen::Index q = 0; q < X.rows(); ++q) {
    X(q, 0) = 10.0 * nd(rng);
    y(q) = 0.5 * X(q, 0);
  }
  for (Eigen::Index q : {10, 20, 30}) {
    X(q, 1) = 1e-3;
    y(q) += 1.0;
  }
  const Eigen::MatrixXd G = X.transpose() * X;
  const Eigen::VectorXd x = ridge_solve(G, X.transpose() * y);
  EXPECT_NEAR(x(0), X.col(0).dot(y) / X.col(0).squaredNorm(), 1e-8);  // fit without the rare column
  EXPECT_LT(std::abs(x(1)), 1.0);
}
