#include "catapult/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace catapult::baselines {

namespace {

// Solves (X X^T) z = b.
class GramSolver {
 public:
  explicit GramSolver(const Eigen::MatrixXd& x) : gram_(x * x.transpose()), llt_(gram_) {
    if (llt_.info() != Eigen::Success || !llt_.matrixLLT().diagonal().allFinite() ||
        llt_.matrixLLT().diagonal().minCoeff() <= 1e-10 * std::sqrt(gram_.diagonal().maxCoeff())) {
      use_pinv_ = true;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_);
      const Eigen::VectorXd& ev = es.eigenvalues();
      const double cutoff = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
      Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
      for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > cutoff) inv(i) = 1.0 / ev(i);
      }
      pinv_ = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return use_pinv_ ? Eigen::VectorXd(pinv_ * b) : llt_.solve(b); }

 private:
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool use_pinv_ = false;
  Eigen::MatrixXd pinv_;
};

void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw std::invalid_argument("baseline: X rows must match y length");
  if (x.rows() > x.cols()) throw std::invalid_argument("baseline: requires N <= d");
}

}  // namespace

Interpolant min_l2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_shapes(x, y);
  GramSolver gram(x);
  Interpolant out;
  out.w = x.transpose() * gram.solve(y);
  out.primal_residual = (x * out.w - y).norm();
  return out;
}

Interpolant min_l2_baseline(const models::RegressionDataset& data) {
  Interpolant out = min_l2(data.inputs, data.targets);
  out.test_loss = models::population_test_loss(out.w, data);
  return out;
}

Interpolant min_l1(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const AdmmOptions& options) {
  check_shapes(x, y);
  if (!(options.rho > 0.0) || !(options.tol > 0.0)) throw std::invalid_argument("min_l1: rho and tol must be > 0");
  const Eigen::Index d = x.cols();
  GramSolver gram(x);
  // Projection onto {w : X w = y} is w - X^T (X X^T)^-1 (X w - y).
  auto project = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    return w - x.transpose() * gram.solve(x * w - y);
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  const double kappa = 1.0 / options.rho;
  const double a = options.relaxation;

  Interpolant out;
  out.converged = false;
  for (long it = 1; it <= options.max_iters; ++it) {
    w = project(z - u);
    const Eigen::VectorXd z_old = z;
    const Eigen::VectorXd w_hat = a * w + (1.0 - a) * z_old;
    const Eigen::VectorXd shifted = w_hat + u;
    z = (shifted.array() - kappa).max(0.0) - (-shifted.array() - kappa).max(0.0);
    u += w_hat - z;

    out.iterations = it;
    out.primal_residual = (w - z).norm();
    out.dual_residual = options.rho * (z - z_old).norm();
    const double scale = std::sqrt(static_cast<double>(d));
    const double eps_pri = scale * options.tol + options.tol * std::max(w.norm(), z.norm());
    const double eps_dual = scale * options.tol + options.tol * options.rho * u.norm();
    if (out.primal_residual < eps_pri && out.dual_residual < eps_dual) {
      out.converged = true;
      break;
    }
  }
  out.w = w;
  return out;
}

Interpolant min_l1_baseline(const models::RegressionDataset& data, const AdmmOptions& options) {
  Interpolant out = min_l1(data.inputs, data.targets, options);
  out.test_loss = models::population_test_loss(out.w, data);
  return out;
}

}  // namespace catapult::baselines
