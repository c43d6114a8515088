#pragma once

// Quantities that characterize how far GD / heavy-ball iterates travel along the flat
// direction after an unstable start: crossing times, the momentum-corrected position C_u,
// the accumulated oscillation C_v, the resulting limit bound, the elliptical energy used
// for the GD lower bound, and gradient-flow limits for the 2-D diagonal model.
//
// Series arguments are indexed by step: series[t] is the value after t updates.

#include "catapult/models.hpp"
#include "catapult/spectral.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace catapult::theory {

struct StabilizationQuantities {
  std::optional<std::size_t> tau_0;
  std::optional<std::size_t> tau_u;
  double C_u = 0.0;
  double C_v = 0.0;
  double C_v_tail_bound = 0.0;
  double u_inf_bound = 0.0;
  double beta = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
  bool converged = false;      // run met its convergence criterion at the final step
  bool tail_adequate = false;  // C_v_tail_bound < 1e-6 C_v
};

nlohmann::json to_json(const StabilizationQuantities& q);

// First t with u_t < 0.
std::optional<std::size_t> compute_tau_0(std::span<const double> u);

// First t with u_t^2 < (2 - epsilon) / eta.
std::optional<std::size_t> compute_tau_u(std::span<const double> u, double eta, double epsilon);

// (u_tau - beta u_{tau-1}) / (1 - beta). Requires tau >= 1.
double compute_Cu(std::span<const double> u, std::size_t tau_u, double beta);

struct CvResult {
  double C_v = 0.0;
  double tail_bound = 0.0;
};

// (1 + beta)/(1 - beta) * sum_{t >= tau_u} v_t^2, truncated at the end of the series. The tail
// is bounded geometrically with contraction (1 - epsilon)^2 from the last term.
CvResult compute_Cv(std::span<const double> v, std::size_t tau_u, double beta, double eta, double epsilon);

// C_u / (1 + eta C_v)
double u_inf_upper_bound(double C_u, double C_v, double eta);

// Closed-form limit (u_tau0 - beta u_{tau0-1}) / (1 - beta) once u has gone negative.
double lemma1_limit(std::span<const double> u, std::optional<std::size_t> tau_0, double beta);

// P = (u - sqrt(2/eta))^2 + v^2 / 2
double energy(double u, double v, double eta);

struct EnergyCheck {
  std::vector<bool> applicable;  // u_t >= 1/sqrt(eta)
  std::vector<bool> holds;       // P_{t+1} <= P_t exp(2 eta^2 u_t^2 v_t^2), true where not applicable
  double max_violation = 0.0;    // largest P_{t+1} - bound over applicable steps (<= 0 when all hold)
  std::size_t checked = 0;
  bool all_hold = true;
};

// Per-step energy growth inequality for GD on the scalar ReLU model. Once v_t underflows P is
// conserved exactly in real arithmetic, so a 64 ulp allowance on the cancellation in
// u - sqrt(2/eta) separates rounding from genuine violations.
EnergyCheck energy_step_check(std::span<const double> u, std::span<const double> v, double eta);

struct GdLowerBound {
  std::size_t tau_u = 0;
  double bound = 0.0;               // sqrt(2/eta) - sqrt(P_tau exp(4 eta^2 u_tau^2 P_tau / (eps (2 - eps))))
  double P_tau_measured = 0.0;
  double P_tau_analytic_bound = 0.0;  // (eps/eta + v0^2/2) exp(2(2+eps) sqrt((2+eps)/(2-eps)) + 2(2+eps) sqrt(2 eps/(2-eps)))
  double v_before_tau_sq = 0.0;       // v_{tau_u - 1}^2
  double v_before_tau_bound = 0.0;    // sqrt((2+eps)/(2-eps)) / eta
};

GdLowerBound gd_lower_bound(std::span<const double> u, std::span<const double> v, double eta, double epsilon);

// 3 z^3 - 8 sqrt(2) z^2 + 14 z - 4 sqrt(2), nonnegative for z >= 1.
double lemma4_polynomial(double z);

// Gradient-flow limit of L(u,v) = 1/2 (u^2 - v^2 - 1)^2 using conservation of u v.
// Requires u0 > 0 and L(u0, v0) < 1/2.
std::pair<double, double> gf_closed_form_2dldn(double u0, double v0);

// Sharpness 8 v*^2 + 4 and leading eigenvector at a minimum with u*^2 = v*^2 + 1, u* > 0.
spectral::SharpnessEstimate minimum_sharpness_2dldn(double v_star);

struct FlowResult {
  Eigen::VectorXd theta;
  double time = 0.0;
  long steps = 0;
  double grad_norm = 0.0;
  bool converged = false;
  double max_invariant_drift = 0.0;  // max |u v - u0 v0| over accepted steps (2-parameter models)
};

struct FlowOptions {
  double tol = 1e-8;  // stop when ||grad|| <= tol
  double t_max = 1e4;
  double rtol = 1e-10;
  double atol = 1e-12;
};

// Integrates d theta / dt = -grad L with an adaptive Dormand-Prince 5(4) pair.
FlowResult gf_integrate(const models::Objective& model, const Eigen::VectorXd& theta0, const FlowOptions& options = {});

// Maps theta_t to its gradient-flow limit theta*_t.
using ClosestMinSolver = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
// Sharpness and leading eigenvector at a minimum.
using MinimumSharpness = std::function<spectral::SharpnessEstimate(const Eigen::VectorXd&)>;

struct GeneralizedResult {
  StabilizationQuantities quantities;
  std::vector<double> sharpness_at_min;   // S(theta*_t)
  std::vector<double> projection_sq;      // <w_max(theta*_t), theta_t - theta*_t>^2
  bool min_sharpness_monotone = false;
};

// Generalized C_u (in sqrt-sharpness units) and C_v from gradient-flow projections of each iterate.
GeneralizedResult generalized_quantities(const std::vector<Eigen::VectorXd>& thetas, const ClosestMinSolver& solver,
                                         const MinimumSharpness& min_sharpness, double eta, double epsilon,
                                         double beta);

// Closed-form solver and minimum sharpness for the simple2d model.
ClosestMinSolver simple2d_closed_form_solver();
MinimumSharpness simple2d_minimum_sharpness();

}  // namespace catapult::theory
