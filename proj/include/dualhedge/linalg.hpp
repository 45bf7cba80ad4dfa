#pragma once

#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

namespace dualhedge {

struct RidgeOptions {
  double relative_shift = 1e-6;  // lambda = relative_shift * trace(G) / dim(G)
  int refinement_steps = 2;
};

/// Solves the normal equations G x = b of a symmetric positive semidefinite
/// Gram matrix with a small ridge shift, then removes most of the shift bias
/// by iterated Tikhonov refinement x += (G + lambda)^{-1} (b - G x).
/// A zero (or non-finite) trace yields x = 0.
inline Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                                   const RidgeOptions& opt = {}) {
  const Eigen::Index n = G.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (n == 0) return x;
  const double trace = G.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) return x;
  const double lambda = opt.relative_shift * trace / static_cast<double>(n);
  Eigen::MatrixXd shifted = G;
  shifted.diagonal().array() += lambda;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) return x;
  x = ldlt.solve(b);
  for (int s = 0; s < opt.refinement_steps; ++s) x += ldlt.solve(b - G * x);
  if (!x.allFinite()) x.setZero();
  return x;
}

}  // namespace dualhedge
