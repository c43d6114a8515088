#include "catapult/theory.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace catapult::theory {

namespace {

nlohmann::json optional_index(const std::optional<std::size_t>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 2.0)) throw std::invalid_argument("epsilon must be in (0,2)");
}

void check_eta(double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
}

}  // namespace

nlohmann::json to_json(const StabilizationQuantities& q) {
  return {
      {"tau_0", optional_index(q.tau_0)},
      {"tau_u", optional_index(q.tau_u)},
      {"C_u", q.C_u},
      {"C_v", q.C_v},
      {"C_v_tail_bound", q.C_v_tail_bound},
      {"u_inf_bound", q.u_inf_bound},
      {"beta", q.beta},
      {"eta", q.eta},
      {"epsilon", q.epsilon},
      {"converged", q.converged},
      {"tail_adequate", q.tail_adequate},
  };
}

std::optional<std::size_t> compute_tau_0(std::span<const double> u) {
  for (std::size_t t = 0; t < u.size(); ++t) {
    if (u[t] < 0.0) return t;
  }
  return std::nullopt;
}

std::optional<std::size_t> compute_tau_u(std::span<const double> u, double eta, double epsilon) {
  check_eta(eta);
  check_epsilon(epsilon);
  const double threshold = (2.0 - epsilon) / eta;
  for (std::size_t t = 0; t < u.size(); ++t) {
    if (u[t] * u[t] < threshold) return t;
  }
  return std::nullopt;
}

double compute_Cu(std::span<const double> u, std::size_t tau_u, double beta) {
  if (tau_u == 0) throw std::invalid_argument("compute_Cu: tau_u must be >= 1");
  if (tau_u >= u.size()) throw std::out_of_range("compute_Cu: tau_u beyond series");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("compute_Cu: beta must be in [0,1)");
  return (u[tau_u] - beta * u[tau_u - 1]) / (1.0 - beta);
}

CvResult compute_Cv(std::span<const double> v, std::size_t tau_u, double beta, double eta, double epsilon) {
  check_eta(eta);
  check_epsilon(epsilon);
  if (tau_u >= v.size()) throw std::out_of_range("compute_Cv: series must extend past tau_u");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("compute_Cv: beta must be in [0,1)");
  const double scale = (1.0 + beta) / (1.0 - beta);
  double sum = 0.0;
  for (std::size_t t = tau_u; t < v.size(); ++t) sum += v[t] * v[t];
  const double rho = (1.0 - epsilon) * (1.0 - epsilon);
  const double last = v.back() * v.back();
  return {scale * sum, scale * last * rho / (1.0 - rho)};
}

double u_inf_upper_bound(double C_u, double C_v, double eta) {
  check_eta(eta);
  if (C_v < 0.0) throw std::invalid_argument("u_inf_upper_bound: C_v must be >= 0");
  return C_u / (1.0 + eta * C_v);
}

double lemma1_limit(std::span<const double> u, std::optional<std::size_t> tau_0, double beta) {
  if (!tau_0) throw std::invalid_argument("lemma1_limit: u never crossed zero");
  if (*tau_0 == 0 || *tau_0 >= u.size()) throw std::out_of_range("lemma1_limit: tau_0 out of range");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("lemma1_limit: beta must be in [0,1)");
  return (u[*tau_0] - beta * u[*tau_0 - 1]) / (1.0 - beta);
}

double energy(double u, double v, double eta) {
  check_eta(eta);
  const double c = u - std::sqrt(2.0 / eta);
  return c * c + 0.5 * v * v;
}

EnergyCheck energy_step_check(std::span<const double> u, std::span<const double> v, double eta) {
  check_eta(eta);
  if (u.size() != v.size()) throw std::invalid_argument("energy_step_check: series length mismatch");
  EnergyCheck out;
  const std::size_t n = u.empty() ? 0 : u.size() - 1;
  out.applicable.assign(n, false);
  out.holds.assign(n, true);
  out.max_violation = -std::numeric_limits<double>::infinity();
  const double u_min = 1.0 / std::sqrt(eta);
  constexpr double slack = 64.0 * std::numeric_limits<double>::epsilon();
  for (std::size_t t = 0; t < n; ++t) {
    if (u[t] < u_min) continue;
    out.applicable[t] = true;
    ++out.checked;
    const double p = energy(u[t], v[t], eta);
    const double bound = p * std::exp(2.0 * eta * eta * u[t] * u[t] * v[t] * v[t]);
    const double next = energy(u[t + 1], v[t + 1], eta);
    out.max_violation = std::max(out.max_violation, next - bound);
    // P_{t+1} is formed from u - sqrt(2/eta), a difference of two numbers near sqrt(2/eta); its
    // rounding error scales with |u - c| max(|u|, c), not with P.
    const double c = std::sqrt(2.0 / eta);
    const double allowance =
        slack * (bound + 2.0 * std::abs(u[t + 1] - c) * std::max(std::abs(u[t + 1]), c) + v[t + 1] * v[t + 1]);
    if (next > bound + allowance) {
      out.holds[t] = false;
      out.all_hold = false;
    }
  }
  if (out.checked == 0) out.max_violation = 0.0;
  return out;
}

GdLowerBound gd_lower_bound(std::span<const double> u, std::span<const double> v, double eta, double epsilon) {
  if (u.size() != v.size()) throw std::invalid_argument("gd_lower_bound: series length mismatch");
  const auto tau = compute_tau_u(u, eta, epsilon);
  if (!tau) throw std::invalid_argument("gd_lower_bound: u never entered the stable region");
  GdLowerBound out;
  out.tau_u = *tau;
  const double ut = u[*tau];
  out.P_tau_measured = energy(ut, v[*tau], eta);
  const double growth = std::exp(4.0 * eta * eta * ut * ut * out.P_tau_measured / (epsilon * (2.0 - epsilon)));
  out.bound = std::sqrt(2.0 / eta) - std::sqrt(out.P_tau_measured * growth);

  const double ratio = std::sqrt((2.0 + epsilon) / (2.0 - epsilon));
  const double exponent =
      2.0 * (2.0 + epsilon) * ratio + 2.0 * (2.0 + epsilon) * std::sqrt(2.0 * epsilon / (2.0 - epsilon));
  out.P_tau_analytic_bound = (epsilon / eta + 0.5 * v[0] * v[0]) * std::exp(exponent);
  if (*tau >= 1) out.v_before_tau_sq = v[*tau - 1] * v[*tau - 1];
  out.v_before_tau_bound = ratio / eta;
  return out;
}

double lemma4_polynomial(double z) {
  const double r2 = std::sqrt(2.0);
  return ((3.0 * z - 8.0 * r2) * z + 14.0) * z - 4.0 * r2;
}

std::pair<double, double> gf_closed_form_2dldn(double u0, double v0) {
  const double r = u0 * u0 - v0 * v0 - 1.0;
  if (!(u0 > 0.0) || !(0.5 * r * r < 0.5)) {
    throw std::invalid_argument("gf_closed_form_2dldn: requires u0 > 0 and loss < 1/2");
  }
  const double p = u0 * v0;
  const double u_inf = std::sqrt(0.5 * (1.0 + std::sqrt(1.0 + 4.0 * p * p)));
  return {u_inf, p / u_inf};
}

spectral::SharpnessEstimate minimum_sharpness_2dldn(double v_star) {
  spectral::SharpnessEstimate est;
  const double v2 = v_star * v_star;
  est.value = 8.0 * v2 + 4.0;
  est.eigvec = Eigen::Vector2d(std::sqrt(v2 + 1.0), -v_star) / std::sqrt(2.0 * v2 + 1.0);
  est.iterations = 0;
  return est;
}

FlowResult gf_integrate(const models::Objective& model, const Eigen::VectorXd& theta0, const FlowOptions& options) {
  namespace odeint = boost::numeric::odeint;
  if (!(options.tol > 0.0)) throw std::invalid_argument("gf_integrate: tol must be > 0");
  if (theta0.size() != model.dim) throw std::invalid_argument("gf_integrate: theta0 has wrong dimension");

  using State = std::vector<double>;
  const auto n = static_cast<std::size_t>(theta0.size());
  Eigen::VectorXd scratch(theta0.size());
  Eigen::VectorXd grad;

  auto rhs = [&](const State& x, State& dxdt, double) {
    scratch = Eigen::Map<const Eigen::VectorXd>(x.data(), theta0.size());
    model.loss_and_grad(scratch, grad);
    Eigen::Map<Eigen::VectorXd>(dxdt.data(), theta0.size()) = -grad;
  };
  auto grad_norm_at = [&](const State& x) {
    scratch = Eigen::Map<const Eigen::VectorXd>(x.data(), theta0.size());
    model.loss_and_grad(scratch, grad);
    return grad.norm();
  };

  State x(theta0.data(), theta0.data() + n);
  const bool track_invariant = n == 2;
  const double p0 = track_invariant ? x[0] * x[1] : 0.0;

  FlowResult out;
  out.grad_norm = grad_norm_at(x);
  auto stepper = odeint::make_controlled(options.atol, options.rtol, odeint::runge_kutta_dopri5<State>());
  double t = 0.0;
  double dt = 1e-3;
  // Near a minimum the controller settles at the edge of the explicit stability region and the
  // iterate jitters at the error tolerance. When the gradient stops shrinking, cap the step.
  double max_dt = std::numeric_limits<double>::infinity();
  double best = out.grad_norm;
  long since_best = 0;
  long failures = 0;
  while (out.grad_norm > options.tol && t < options.t_max) {
    dt = std::min({dt, max_dt, options.t_max - t});
    const double attempted = dt;
    if (stepper.try_step(rhs, x, t, dt) == odeint::fail) {
      if (++failures > 100000) break;
      continue;
    }
    ++out.steps;
    if (track_invariant) out.max_invariant_drift = std::max(out.max_invariant_drift, std::abs(x[0] * x[1] - p0));
    out.grad_norm = grad_norm_at(x);
    if (!std::isfinite(out.grad_norm)) break;
    if (out.grad_norm < 0.5 * best) {
      best = out.grad_norm;
      since_best = 0;
    } else if (++since_best > 50) {
      max_dt = 0.5 * attempted;
      since_best = 0;
    }
  }
  out.time = t;
  out.converged = out.grad_norm <= options.tol;
  out.theta = Eigen::Map<const Eigen::VectorXd>(x.data(), theta0.size());
  return out;
}

GeneralizedResult generalized_quantities(const std::vector<Eigen::VectorXd>& thetas, const ClosestMinSolver& solver,
                                         const MinimumSharpness& min_sharpness, double eta, double epsilon,
                                         double beta) {
  check_eta(eta);
  check_epsilon(epsilon);
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("generalized_quantities: beta must be in [0,1)");
  if (thetas.empty()) throw std::invalid_argument("generalized_quantities: empty trajectory");

  GeneralizedResult out;
  out.sharpness_at_min.reserve(thetas.size());
  out.projection_sq.reserve(thetas.size());
  for (const auto& theta : thetas) {
    const Eigen::VectorXd star = solver(theta);
    const spectral::SharpnessEstimate s = min_sharpness(star);
    out.sharpness_at_min.push_back(s.value);
    const double proj = s.eigvec.dot(theta - star);
    out.projection_sq.push_back(proj * proj);
  }
  out.min_sharpness_monotone = true;
  for (std::size_t t = 1; t < out.sharpness_at_min.size(); ++t) {
    if (out.sharpness_at_min[t] > out.sharpness_at_min[t - 1] * (1.0 + 1e-12)) out.min_sharpness_monotone = false;
  }

  StabilizationQuantities& q = out.quantities;
  q.beta = beta;
  q.eta = eta;
  q.epsilon = epsilon;
  const double threshold = (2.0 - epsilon) / eta;
  for (std::size_t t = 0; t < out.sharpness_at_min.size(); ++t) {
    if (out.sharpness_at_min[t] < threshold) {
      q.tau_u = t;
      break;
    }
  }
  if (!q.tau_u) throw std::runtime_error("generalized_quantities: minimum sharpness never fell below (2-eps)/eta");
  if (*q.tau_u == 0) throw std::runtime_error("generalized_quantities: tau_u = 0, no predecessor");
  if (*q.tau_u + 1 >= thetas.size()) throw std::runtime_error("generalized_quantities: trajectory ends at tau_u");

  const std::size_t tau = *q.tau_u;
  q.C_u = (std::sqrt(out.sharpness_at_min[tau]) - beta * std::sqrt(out.sharpness_at_min[tau - 1])) / (1.0 - beta);
  const double scale = (1.0 + beta) / (1.0 - beta);
  double sum = 0.0;
  for (std::size_t t = tau; t < out.projection_sq.size(); ++t) sum += out.projection_sq[t];
  q.C_v = scale * sum;
  const double rho = (1.0 - epsilon) * (1.0 - epsilon);
  q.C_v_tail_bound = scale * out.projection_sq.back() * rho / (1.0 - rho);
  q.u_inf_bound = u_inf_upper_bound(q.C_u, q.C_v, eta);
  q.tail_adequate = q.C_v_tail_bound < 1e-6 * q.C_v;
  q.converged = out.projection_sq.back() < 1e-16;
  return out;
}

ClosestMinSolver simple2d_closed_form_solver() {
  // Iterates mid-catapult can leave the region the closed form covers; integrate the flow there.
  return [model = models::simple2d_objective()](const Eigen::VectorXd& theta) {
    const double r = theta(0) * theta(0) - theta(1) * theta(1) - 1.0;
    if (theta(0) > 0.0 && r * r < 1.0) {
      const auto [u, v] = gf_closed_form_2dldn(theta(0), theta(1));
      return Eigen::VectorXd(Eigen::Vector2d(u, v));
    }
    const FlowResult flow = gf_integrate(model, theta);
    if (!flow.converged) throw std::runtime_error("simple2d solver: gradient flow did not converge");
    return flow.theta;
  };
}

MinimumSharpness simple2d_minimum_sharpness() {
  return [](const Eigen::VectorXd& star) { return minimum_sharpness_2dldn(star(1)); };
}

}  // namespace catapult::theory
