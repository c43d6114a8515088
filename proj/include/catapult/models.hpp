#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace catapult::models {

// Two-parameter ReLU "network" f(x; u, v) = v * relu(u x) fit to (x, y) = (1, 0).
struct ScalarReluState {
  double u = 0.0;
  double v = 0.0;
};

// L(u, v) = 1/2 (u^2 - v^2 - 1)^2, the single-sample diagonal network.
struct Simple2DState {
  double u = 0.0;
  double v = 0.0;
};

// Depth-2 diagonal linear network with coefficients w = u*u - v*v.
struct DiagonalNetState {
  Eigen::VectorXd u;
  Eigen::VectorXd v;

  Eigen::Index dim() const { return u.size(); }
  Eigen::VectorXd coefficients() const;

  // Parameter vector laid out as [u; v].
  Eigen::VectorXd flatten() const;
  static DiagonalNetState unflatten(const Eigen::VectorXd& theta);
  static DiagonalNetState broadcast(Eigen::Index d, double alpha);
};

struct EvalResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::optional<Eigen::Matrix2d> hessian;  // 2-parameter models only
};

// Noiseless synthetic sparse regression. Immutable once generated.
struct RegressionDataset {
  Eigen::MatrixXd inputs;   // N x d, row n is x_n
  Eigen::VectorXd targets;  // y_n = <w_star, x_n>
  Eigen::VectorXd w_star;
  Eigen::VectorXd mu;
  double sigma2 = 1.0;
  int k = 1;
  std::uint64_t seed = 0;

  Eigen::Index n() const { return inputs.rows(); }
  Eigen::Index d() const { return inputs.cols(); }
};

EvalResult eval_scalar_relu(const ScalarReluState& state);
EvalResult eval_simple2d(const Simple2DState& state);

EvalResult eval_ldn(const DiagonalNetState& state, const RegressionDataset& data);

// Exact Hessian-vector product of the LDN training loss; vec is laid out as [du; dv].
Eigen::VectorXd ldn_hvp(const DiagonalNetState& state, const RegressionDataset& data,
                        const Eigen::VectorXd& vec);

// x_n ~ N(mu, sigma2 I) drawn from a seeded mt19937_64 through Box-Muller;
// w_star has its first k entries equal to 1/sqrt(k).
RegressionDataset generate_sparse_regression(int n, int d, double sigma2, const Eigen::VectorXd& mu,
                                             int k, std::uint64_t seed);

// Defaults: N = 50, d = 100, sigma2 = 5, mu = 5 * 1, k = 5.
RegressionDataset default_sparse_regression(std::uint64_t seed);

// 1/2 (w - w*)^T (sigma2 I + mu mu^T) (w - w*): expected halved squared error over the input law.
double population_test_loss(const Eigen::VectorXd& w, const RegressionDataset& data);

// Uniform interface over the three models, used by the optimizer and the spectral probes.
struct Objective {
  std::string id;
  Eigen::Index dim = 0;
  // Returns the loss and writes the gradient.
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> loss_and_grad;
  // Dense Hessian; set only for the 2-parameter models.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
  // Hessian-vector product at theta.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> hvp;

  double loss(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
};

Objective scalar_relu_objective();
Objective simple2d_objective();
Objective ldn_objective(std::shared_ptr<const RegressionDataset> data);

}  // namespace catapult::models
