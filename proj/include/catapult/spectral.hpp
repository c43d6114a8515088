#pragma once

#include "catapult/models.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>

namespace catapult::spectral {

// Largest Hessian eigenvalue and its unit eigenvector.
struct SharpnessEstimate {
  double value = 0.0;
  Eigen::VectorXd eigvec;
  long iterations = 0;
  double residual = 0.0;  // ||H v - value v||
  bool converged = true;
};

// Flips sign so the first component with magnitude above 1e-12 is positive.
void normalize_sign(Eigen::VectorXd& v);

SharpnessEstimate sharpness_exact_2x2(const Eigen::Matrix2d& h);

// Both eigenvalues of a symmetric 2x2, descending.
Eigen::Vector2d eigenvalues_2x2(const Eigen::Matrix2d& h);

using Hvp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct PowerOptions {
  double tol = 1e-8;
  long max_iters = 10000;
  std::uint64_t seed = 0;
  std::optional<Eigen::VectorXd> initial;  // warm start
};

// Shifted power iteration on H + cI with c taken from ||Hv|| probes, so the algebraically
// largest eigenvalue is returned even when a negative eigenvalue dominates in magnitude.
SharpnessEstimate sharpness_power(const Hvp& hvp, Eigen::Index dim, const PowerOptions& options = {});

struct SharpnessGradient {
  Eigen::VectorXd grad;
  bool degenerate = false;  // top-two eigenvalue gap < 10 h somewhere along the stencil
  double min_gap = 0.0;
};

using HessianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Central differences of S(theta) per coordinate. h <= 0 selects 1e-4 (1 + ||theta||).
SharpnessGradient grad_sharpness_fd(const HessianFn& hessian, const Eigen::VectorXd& theta, double h = 0.0);

// Sharpness of a dense symmetric matrix: closed form for 2x2, power iteration otherwise.
SharpnessEstimate sharpness_dense(const Eigen::MatrixXd& h, const PowerOptions& options = {});

// Probe for 2-parameter models (exact 2x2 at each call).
std::function<double(const Eigen::VectorXd&)> exact_probe(const models::Objective& model);

// Matrix-free probe that warm-starts each power iteration from the previous eigenvector.
class WarmPowerProbe {
 public:
  WarmPowerProbe(models::Objective model, PowerOptions options = {});
  double operator()(const Eigen::VectorXd& theta);
  SharpnessEstimate estimate(const Eigen::VectorXd& theta);
  long total_iterations() const { return total_iterations_; }

 private:
  models::Objective model_;
  PowerOptions options_;
  std::optional<Eigen::VectorXd> last_;
  long total_iterations_ = 0;
};

}  // namespace catapult::spectral
