#include "catapult/models.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace catapult::models {

namespace {

void require_same_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " + std::to_string(got) +
                                ", expected " + std::to_string(want) + ")");
  }
}

void check_ldn_dims(const DiagonalNetState& state, const RegressionDataset& data) {
  require_same_dim(state.v.size(), state.u.size(), "ldn state v");
  require_same_dim(state.u.size(), data.d(), "ldn state u");
}

// Uniform on (0, 1] with 53 random bits; never returns 0 so log() stays finite.
double uniform_open(std::mt19937_64& gen) {
  return (static_cast<double>(gen() >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

Eigen::VectorXd DiagonalNetState::coefficients() const { return u.cwiseProduct(u) - v.cwiseProduct(v); }

Eigen::VectorXd DiagonalNetState::flatten() const {
  Eigen::VectorXd theta(u.size() + v.size());
  theta << u, v;
  return theta;
}

DiagonalNetState DiagonalNetState::unflatten(const Eigen::VectorXd& theta) {
  if (theta.size() % 2 != 0) {
    throw std::invalid_argument("ldn parameter vector must have even length");
  }
  const Eigen::Index d = theta.size() / 2;
  return {theta.head(d), theta.tail(d)};
}

DiagonalNetState DiagonalNetState::broadcast(Eigen::Index d, double alpha) {
  return {Eigen::VectorXd::Constant(d, alpha), Eigen::VectorXd::Constant(d, alpha)};
}

EvalResult eval_scalar_relu(const ScalarReluState& s) {
  EvalResult out;
  out.grad = Eigen::Vector2d::Zero();
  out.hessian = Eigen::Matrix2d::Zero();
  // Loss vanishes for u <= 0; at u = 0 the subgradient is taken as 0.
  if (s.u > 0.0) {
    const double uu = s.u * s.u;
    const double vv = s.v * s.v;
    out.loss = 0.5 * uu * vv;
    out.grad << s.u * vv, uu * s.v;
    *out.hessian << vv, 2.0 * s.u * s.v, 2.0 * s.u * s.v, uu;
  }
  return out;
}

EvalResult eval_simple2d(const Simple2DState& s) {
  const double uu = s.u * s.u;
  const double vv = s.v * s.v;
  const double r = uu - vv - 1.0;
  EvalResult out;
  out.loss = 0.5 * r * r;
  out.grad = Eigen::Vector2d(2.0 * r * s.u, -2.0 * r * s.v);
  Eigen::Matrix2d h;
  h << 6.0 * uu - 2.0 * vv - 2.0, -4.0 * s.u * s.v, -4.0 * s.u * s.v, 6.0 * vv - 2.0 * uu + 2.0;
  out.hessian = h;
  return out;
}

EvalResult eval_ldn(const DiagonalNetState& state, const RegressionDataset& data) {
  check_ldn_dims(state, data);
  const double inv_n = 1.0 / static_cast<double>(data.n());
  const Eigen::VectorXd residual = data.inputs * state.coefficients() - data.targets;
  const Eigen::VectorXd g = inv_n * (data.inputs.transpose() * residual);

  EvalResult out;
  out.loss = 0.5 * inv_n * residual.squaredNorm();
  out.grad.resize(2 * state.dim());
  out.grad.head(state.dim()) = 2.0 * state.u.cwiseProduct(g);
  out.grad.tail(state.dim()) = -2.0 * state.v.cwiseProduct(g);
  return out;
}

Eigen::VectorXd ldn_hvp(const DiagonalNetState& state, const RegressionDataset& data, const Eigen::VectorXd& vec) {
  check_ldn_dims(state, data);
  require_same_dim(vec.size(), 2 * state.dim(), "ldn_hvp direction");
  const Eigen::Index d = state.dim();
  const double inv_n = 1.0 / static_cast<double>(data.n());
  const auto du = vec.head(d);
  const auto dv = vec.tail(d);

  const Eigen::VectorXd residual = data.inputs * state.coefficients() - data.targets;
  const Eigen::VectorXd g = inv_n * (data.inputs.transpose() * residual);
  // Directional derivative of the coefficient vector, then of g.
  const Eigen::VectorXd dw = 2.0 * (state.u.cwiseProduct(du) - state.v.cwiseProduct(dv));
  const Eigen::VectorXd dg = inv_n * (data.inputs.transpose() * (data.inputs * dw));

  Eigen::VectorXd out(2 * d);
  out.head(d) = 2.0 * (du.cwiseProduct(g) + state.u.cwiseProduct(dg));
  out.tail(d) = -2.0 * (dv.cwiseProduct(g) + state.v.cwiseProduct(dg));
  return out;
}

RegressionDataset generate_sparse_regression(int n, int d, double sigma2, const Eigen::VectorXd& mu, int k,
                                             std::uint64_t seed) {
  if (n < 1 || d < 1) {
    throw std::invalid_argument("generate_sparse_regression: n and d must be positive");
  }
  if (k < 1 || k > d) {
    throw std::invalid_argument("generate_sparse_regression: sparsity k must lie in [1, d]");
  }
  if (!(sigma2 > 0.0)) {
    throw std::invalid_argument("generate_sparse_regression: sigma2 must be positive");
  }
  require_same_dim(mu.size(), d, "generate_sparse_regression mu");

  RegressionDataset data;
  data.mu = mu;
  data.sigma2 = sigma2;
  data.k = k;
  data.seed = seed;
  data.w_star = Eigen::VectorXd::Zero(d);
  data.w_star.head(k).setConstant(1.0 / std::sqrt(static_cast<double>(k)));

  std::mt19937_64 gen(seed);
  const double sigma = std::sqrt(sigma2);
  data.inputs.resize(n, d);
  // Row-major fill order so the stream layout does not depend on Eigen storage.
  std::optional<double> spare;
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < d; ++col) {
      double z;
      if (spare) {
        z = *spare;
        spare.reset();
      } else {
        const double radius = std::sqrt(-2.0 * std::log(uniform_open(gen)));
        const double angle = 2.0 * std::numbers::pi * uniform_open(gen);
        z = radius * std::cos(angle);
        spare = radius * std::sin(angle);
      }
      data.inputs(row, col) = mu(col) + sigma * z;
    }
  }
  data.targets = data.inputs * data.w_star;
  return data;
}

RegressionDataset default_sparse_regression(std::uint64_t seed) {
  return generate_sparse_regression(50, 100, 5.0, Eigen::VectorXd::Constant(100, 5.0), 5, seed);
}

double population_test_loss(const Eigen::VectorXd& w, const RegressionDataset& data) {
  require_same_dim(w.size(), data.d(), "population_test_loss");
  const Eigen::VectorXd e = w - data.w_star;
  const double along_mean = data.mu.dot(e);
  return 0.5 * (data.sigma2 * e.squaredNorm() + along_mean * along_mean);
}

double Objective::loss(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g;
  return loss_and_grad(theta, g);
}

Eigen::VectorXd Objective::gradient(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g;
  loss_and_grad(theta, g);
  return g;
}

namespace {

template <typename State, EvalResult (*Eval)(const State&)>
Objective two_param_objective(std::string id) {
  Objective obj;
  obj.id = std::move(id);
  obj.dim = 2;
  obj.loss_and_grad = [](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    require_same_dim(theta.size(), 2, "two-parameter model");
    EvalResult r = Eval(State{theta(0), theta(1)});
    grad = std::move(r.grad);
    return r.loss;
  };
  obj.hessian = [](const Eigen::VectorXd& theta) -> Eigen::MatrixXd {
    require_same_dim(theta.size(), 2, "two-parameter model");
    return *Eval(State{theta(0), theta(1)}).hessian;
  };
  obj.hvp = [](const Eigen::VectorXd& theta, const Eigen::VectorXd& vec) -> Eigen::VectorXd {
    require_same_dim(theta.size(), 2, "two-parameter model");
    return *Eval(State{theta(0), theta(1)}).hessian * vec;
  };
  return obj;
}

}  // namespace

Objective scalar_relu_objective() { return two_param_objective<ScalarReluState, &eval_scalar_relu>("scalar_relu"); }

Objective simple2d_objective() { return two_param_objective<Simple2DState, &eval_simple2d>("simple2d"); }

Objective ldn_objective(std::shared_ptr<const RegressionDataset> data) {
  if (!data) {
    throw std::invalid_argument("ldn_objective: null dataset");
  }
  Objective obj;
  obj.id = "ldn";
  obj.dim = 2 * data->d();
  obj.loss_and_grad = [data](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    EvalResult r = eval_ldn(DiagonalNetState::unflatten(theta), *data);
    grad = std::move(r.grad);
    return r.loss;
  };
  obj.hvp = [data](const Eigen::VectorXd& theta, const Eigen::VectorXd& vec) {
    return ldn_hvp(DiagonalNetState::unflatten(theta), *data, vec);
  };
  return obj;
}

}  // namespace catapult::models
