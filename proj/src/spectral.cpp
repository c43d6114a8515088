#include "catapult/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace catapult::spectral {

void normalize_sign(Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

Eigen::Vector2d eigenvalues_2x2(const Eigen::Matrix2d& h) {
  const double mean = 0.5 * (h(0, 0) + h(1, 1));
  const double radius = std::hypot(0.5 * (h(0, 0) - h(1, 1)), 0.5 * (h(0, 1) + h(1, 0)));
  return {mean + radius, mean - radius};
}

SharpnessEstimate sharpness_exact_2x2(const Eigen::Matrix2d& h) {
  const double lambda = eigenvalues_2x2(h)(0);
  const double off = 0.5 * (h(0, 1) + h(1, 0));
  // Null space of H - lambda I: perpendicular to whichever row has the larger norm.
  const Eigen::Vector2d r0(h(0, 0) - lambda, off);
  const Eigen::Vector2d r1(off, h(1, 1) - lambda);
  const Eigen::Vector2d& row = r0.squaredNorm() >= r1.squaredNorm() ? r0 : r1;

  SharpnessEstimate est;
  est.value = lambda;
  est.iterations = 0;
  if (row.squaredNorm() == 0.0) {
    est.eigvec = Eigen::Vector2d::UnitX();  // H = lambda I
  } else {
    est.eigvec = Eigen::Vector2d(-row(1), row(0)).normalized();
  }
  normalize_sign(est.eigvec);
  est.residual = (h * est.eigvec - lambda * est.eigvec).norm();
  return est;
}

SharpnessEstimate sharpness_power(const Hvp& hvp, Eigen::Index dim, const PowerOptions& options) {
  if (dim < 1) throw std::invalid_argument("sharpness_power: dim must be >= 1");
  if (!(options.tol > 0.0)) throw std::invalid_argument("sharpness_power: tol must be > 0");

  std::mt19937_64 gen(options.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd random_start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) random_start(i) = unif(gen);
  random_start.normalize();

  SharpnessEstimate est;
  long hvps = 0;

  // Spectral radius from plain power steps on H started at a random vector.
  double radius = 0.0;
  {
    Eigen::VectorXd x = random_start;
    for (int i = 0; i < 200; ++i) {
      const Eigen::VectorXd hx = hvp(x);
      ++hvps;
      const double norm = hx.norm();
      if (norm == 0.0) break;
      const bool settled = radius > 0.0 && std::abs(norm - radius) <= 1e-3 * norm;
      radius = std::max(radius, norm);
      if (settled) break;
      x = hx / norm;
    }
  }
  const double shift = 1.1 * radius;

  Eigen::VectorXd x = options.initial && options.initial->size() == dim && options.initial->norm() > 0.0
                          ? Eigen::VectorXd(options.initial->normalized())
                          : random_start;
  est.converged = false;
  for (long it = 1; it <= options.max_iters; ++it) {
    const Eigen::VectorXd hx = hvp(x);
    ++hvps;
    const double lambda = x.dot(hx);
    const double residual = (hx - lambda * x).norm();
    est.value = lambda;
    est.residual = residual;
    est.iterations = it;
    if (residual <= options.tol * std::max(1.0, std::abs(lambda))) {
      est.converged = true;
      break;
    }
    Eigen::VectorXd y = hx + shift * x;
    const double ny = y.norm();
    if (ny == 0.0) break;
    x = y / ny;
  }
  est.eigvec = x;
  normalize_sign(est.eigvec);
  (void)hvps;
  return est;
}

SharpnessEstimate sharpness_dense(const Eigen::MatrixXd& h, const PowerOptions& options) {
  if (h.rows() != h.cols()) throw std::invalid_argument("sharpness_dense: matrix must be square");
  if (h.rows() == 2) {
    return sharpness_exact_2x2(h);
  }
  return sharpness_power([&h](const Eigen::VectorXd& x) { return Eigen::VectorXd(h * x); }, h.rows(), options);
}

SharpnessGradient grad_sharpness_fd(const HessianFn& hessian, const Eigen::VectorXd& theta, double h) {
  if (h <= 0.0) {
    h = 1e-4 * (1.0 + theta.norm());
  }
  SharpnessGradient out;
  out.grad.resize(theta.size());
  out.min_gap = std::numeric_limits<double>::infinity();

  auto top_two_gap = [](const Eigen::MatrixXd& m) {
    if (m.rows() == 2) {
      const Eigen::Vector2d ev = eigenvalues_2x2(m);
      return ev(0) - ev(1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return ev(ev.size() - 1) - ev(ev.size() - 2);
  };

  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd plus = theta;
    Eigen::VectorXd minus = theta;
    plus(i) += h;
    minus(i) -= h;
    const Eigen::MatrixXd hp = hessian(plus);
    const Eigen::MatrixXd hm = hessian(minus);
    out.grad(i) = (sharpness_dense(hp).value - sharpness_dense(hm).value) / (2.0 * h);
    if (hp.rows() >= 2) {
      out.min_gap = std::min({out.min_gap, top_two_gap(hp), top_two_gap(hm)});
    }
  }
  out.degenerate = out.min_gap < 10.0 * h;
  return out;
}

std::function<double(const Eigen::VectorXd&)> exact_probe(const models::Objective& model) {
  if (!model.hessian) {
    throw std::invalid_argument("exact_probe: model '" + model.id + "' has no dense Hessian");
  }
  auto hess = model.hessian;
  return [hess](const Eigen::VectorXd& theta) { return sharpness_exact_2x2(hess(theta)).value; };
}

WarmPowerProbe::WarmPowerProbe(models::Objective model, PowerOptions options)
    : model_(std::move(model)), options_(std::move(options)) {
  if (!model_.hvp) {
    throw std::invalid_argument("WarmPowerProbe: model '" + model_.id + "' has no HVP");
  }
}

SharpnessEstimate WarmPowerProbe::estimate(const Eigen::VectorXd& theta) {
  PowerOptions opts = options_;
  if (last_) opts.initial = last_;
  const auto& hvp = model_.hvp;
  SharpnessEstimate est =
      sharpness_power([&](const Eigen::VectorXd& x) { return hvp(theta, x); }, model_.dim, opts);
  last_ = est.eigvec;
  total_iterations_ += est.iterations;
  return est;
}

double WarmPowerProbe::operator()(const Eigen::VectorXd& theta) { return estimate(theta).value; }

}  // namespace catapult::spectral
