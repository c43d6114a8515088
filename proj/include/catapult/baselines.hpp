#pragma once

#include "catapult/models.hpp"

#include <Eigen/Core>

namespace catapult::baselines {

struct Interpolant {
  Eigen::VectorXd w;
  double test_loss = 0.0;
  long iterations = 0;
  bool converged = true;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

// Least-norm w with X w = y through the Gram matrix X X^T. Falls back to a pseudo-inverse
// (eigenvalues below 1e-10 times the largest are dropped) when the Cholesky factor fails.
Interpolant min_l2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
Interpolant min_l2_baseline(const models::RegressionDataset& data);

struct AdmmOptions {
  double tol = 1e-8;
  long max_iters = 100000;
  double rho = 1.0;
  double relaxation = 1.5;
};

// Basis pursuit min ||w||_1 s.t. X w = y by ADMM. The returned w is the x-iterate, which is
// exactly feasible up to the accuracy of the projection.
Interpolant min_l1(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const AdmmOptions& options = {});
Interpolant min_l1_baseline(const models::RegressionDataset& data, const AdmmOptions& options = {});

}  // namespace catapult::baselines
