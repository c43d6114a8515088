#include "catapult/models.hpp"
#include "catapult/optim.hpp"
#include "catapult/theory.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace catapult;
using namespace catapult::theory;

namespace {

struct UV {
  std::vector<double> u, v;
};

UV scalar_run(double u0, double v0, double eta, double beta, long steps) {
  optim::RunOptions o;
  o.schedule = optim::Schedule::constant(eta);
  o.beta = beta;
  o.steps = steps;
  o.record_params = true;
  auto traj = optim::run(models::scalar_relu_objective(), Eigen::Vector2d(u0, v0), o);
  return {traj.param_column(0), traj.param_column(1)};
}

}  // namespace

TEST(TauU, Cases) {
  const double eta = 0.02, eps = 0.01;  // threshold u^2 < 99.5
  EXPECT_EQ(compute_tau_u(std::vector<double>{9.0, 12.0}, eta, eps), 0u);
  std::vector<double> dec;
  for (int t = 0; t < 12; ++t) dec.push_back(10.5 - 0.1 * t);  // 10.5 ... crosses sqrt(99.5) = 9.975 at t = 6
  EXPECT_EQ(compute_tau_u(dec, eta, eps), 6u);
  EXPECT_FALSE(compute_tau_u(std::vector<double>(5, 20.0), eta, eps));
  EXPECT_THROW(compute_tau_u(dec, eta, 0.0), std::invalid_argument);
  EXPECT_THROW(compute_tau_u(dec, eta, 2.0), std::invalid_argument);
  EXPECT_THROW(compute_tau_u(dec, 0.0, eps), std::invalid_argument);
}

TEST(TauZero, FirstNegative) {
  EXPECT_EQ(compute_tau_0(std::vector<double>{1.0, 0.0, -0.1, -2.0}), 2u);
  EXPECT_FALSE(compute_tau_0(std::vector<double>{1.0, 0.5}));
}

TEST(Cu, Formula) {
  std::vector<double> u{10.0, 9.0, 8.0};
  EXPECT_DOUBLE_EQ(compute_Cu(u, 1, 0.0), 9.0);
  EXPECT_NEAR(compute_Cu(u, 1, 0.9), 0.0, 1e-13);
  for (double beta : {0.1, 0.5, 0.9}) EXPECT_LE(compute_Cu(u, 2, beta), u[2]);
  EXPECT_THROW(compute_Cu(u, 0, 0.5), std::invalid_argument);
  EXPECT_THROW(compute_Cu(u, 3, 0.5), std::out_of_range);
  EXPECT_THROW(compute_Cu(u, 1, 1.0), std::invalid_argument);
}

TEST(Cv, ZeroTail) {
  auto r = compute_Cv(std::vector<double>{1.0, 2.0, 0.0, 0.0}, 2, 0.5, 0.1, 0.01);
  EXPECT_EQ(r.C_v, 0.0);
  EXPECT_EQ(r.tail_bound, 0.0);
}

TEST(Cv, GeometricSeries) {
  const double r = 0.8, beta = 0.7, eps = 0.05;
  const std::size_t tau = 3, T = 40;
  std::vector<double> v;
  for (std::size_t t = 0; t < T; ++t) v.push_back(std::pow(r, 0.5 * t));
  const double scale = (1 + beta) / (1 - beta);
  const double sum = std::pow(r, tau) * (1 - std::pow(r, T - tau)) / (1 - r);
  auto c = compute_Cv(v, tau, beta, 0.1, eps);
  EXPECT_NEAR(c.C_v, scale * sum, 1e-13 * scale * sum);
  const double rho = (1 - eps) * (1 - eps);
  EXPECT_NEAR(c.tail_bound, scale * std::pow(r, T - 1) * rho / (1 - rho), 1e-13);
  EXPECT_GE(c.tail_bound, 0.0);
  EXPECT_THROW(compute_Cv(v, T, beta, 0.1, eps), std::out_of_range);
}

TEST(UInfBound, Formula) {
  EXPECT_EQ(u_inf_upper_bound(7.0, 0.0, 0.3), 7.0);
  EXPECT_NEAR(u_inf_upper_bound(10.0, 100.0, 0.02), 10.0 / 3.0, 1e-15);
  double prev = 1e300;
  for (double cv : {0.0, 1.0, 10.0, 100.0}) {
    const double b = u_inf_upper_bound(5.0, cv, 0.1);
    EXPECT_LT(b, prev);
    prev = b;
  }
  EXPECT_THROW(u_inf_upper_bound(1.0, -1.0, 0.1), std::invalid_argument);
}

TEST(Lemma1, ClosedForm) {
  std::vector<double> u{2.0, 1.0, -1.0, -2.0};
  EXPECT_DOUBLE_EQ(lemma1_limit(u, 2, 0.5), -3.0);
  EXPECT_DOUBLE_EQ(lemma1_limit(u, 2, 0.0), -1.0);
  EXPECT_THROW(lemma1_limit(u, std::nullopt, 0.5), std::invalid_argument);
  EXPECT_THROW(lemma1_limit(u, 0, 0.5), std::out_of_range);
}

TEST(Lemma1, SimulatedRunApproachesLimit) {
  auto uv = scalar_run(1.0, 4.0, 0.1, 0.5, 200);
  const auto tau0 = compute_tau_0(uv.u);
  ASSERT_TRUE(tau0);
  EXPECT_NEAR(uv.u.back(), lemma1_limit(uv.u, tau0, 0.5), 1e-8);
  for (std::size_t t = 0; t + 1 < uv.u.size(); ++t) EXPECT_LE(uv.u[t + 1], uv.u[t] + 1e-12);
}

TEST(Energy, Values) {
  const double eta = 0.0201;
  EXPECT_EQ(energy(std::sqrt(2 / eta), 0.0, eta), 0.0);
  const double p0 = energy(10.0, 1e-6, eta);
  EXPECT_NEAR(p0, 6.20e-4, 0.01e-4);
  EXPECT_LE(p0, 0.01 / eta + 0.5 * 1e-12);
  EXPECT_THROW(energy(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST(EnergyStep, ReflectionConservesP) {
  // With v = 0, reflecting u about sqrt(2/eta) keeps P fixed, so the inequality holds with equality.
  const double eta = 0.02, c = std::sqrt(2 / eta);
  std::vector<double> u{10.2, 2 * c - 10.2, 10.2, 2 * c - 10.2};
  std::vector<double> v(4, 0.0);
  auto r = energy_step_check(u, v, eta);
  EXPECT_TRUE(r.all_hold);
  EXPECT_EQ(r.checked, 3u);
  EXPECT_LE(r.max_violation, 1e-15);
}

TEST(EnergyStep, ViolationReported) {
  const double eta = 0.02;
  std::vector<double> u{10.1, 10.5, 11.0};
  std::vector<double> v{0.0, 0.0, 0.0};
  auto r = energy_step_check(u, v, eta);
  EXPECT_FALSE(r.all_hold);
  EXPECT_FALSE(r.holds[0]);
  EXPECT_GT(r.max_violation, 0.1);
}

TEST(EnergyStep, InapplicableBelowThreshold) {
  const double eta = 0.02;  // threshold 1/sqrt(eta) = 7.07
  auto r = energy_step_check(std::vector<double>{5.0, 9.0}, std::vector<double>{0.0, 0.0}, eta);
  EXPECT_EQ(r.checked, 0u);
  EXPECT_TRUE(r.all_hold);
  EXPECT_FALSE(r.applicable[0]);
  EXPECT_THROW(energy_step_check(std::vector<double>{1.0}, std::vector<double>{}, eta), std::invalid_argument);
}

TEST(EnergyStep, HoldsOnGdRun) {
  const double eta = 0.0201;
  auto uv = scalar_run(10.0, 1e-6, eta, 0.0, 20000);
  auto r = energy_step_check(uv.u, uv.v, eta);
  EXPECT_GT(r.checked, 1000u);
  EXPECT_TRUE(r.all_hold) << r.max_violation;
}

TEST(GdLowerBound, GdRun) {
  const double eta = 0.0201, eps = 0.01;
  auto uv = scalar_run(10.0, 1e-6, eta, 0.0, 100000);
  auto b = gd_lower_bound(uv.u, uv.v, eta, eps);
  EXPECT_LE(b.bound, uv.u.back() + 1e-8);
  EXPECT_LE(b.P_tau_measured, b.P_tau_analytic_bound);
  EXPECT_LE(b.v_before_tau_sq, b.v_before_tau_bound);
  // u_inf >= sqrt(2/eta) - O(sqrt(eps)): the gap stays within a small multiple of sqrt(eps/eta).
  EXPECT_LT(std::sqrt(2 / eta) - b.bound, 10 * std::sqrt(eps / eta));
  EXPECT_THROW(gd_lower_bound(std::vector<double>{20.0, 20.0}, std::vector<double>{0.0, 0.0}, eta, eps),
               std::invalid_argument);
}

TEST(GdLowerBound, SmallEpsilonApproachesCenter) {
  double prev_gap = 1e300;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const double eta = 0.01;
    const double u0 = std::sqrt((2 + eps) / eta);
    auto uv = scalar_run(u0, std::sqrt(eps) * 0.1, eta, 0.0, 200000);
    auto b = gd_lower_bound(uv.u, uv.v, eta, eps);
    const double gap = std::sqrt(2 / eta) - b.bound;
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 0.05);
}

TEST(Lemma4, PolynomialValues) {
  const double r2 = std::sqrt(2.0);
  EXPECT_NEAR(lemma4_polynomial(r2), 0.0, 1e-13);
  EXPECT_GT(lemma4_polynomial(1.0), 0.0);
  for (double z : {1.0, 1.2, 2.0, 5.0, 100.0}) {
    const double f = (z - r2) * (z - r2) * (3 * z - 2 * r2);
    EXPECT_NEAR(lemma4_polynomial(z), f, 1e-12 * std::max(1.0, std::abs(f)));
  }
}

TEST(GfClosedForm, Values) {
  auto [u, v] = gf_closed_form_2dldn(1.3, 0.0);
  EXPECT_DOUBLE_EQ(u, 1.0);
  EXPECT_EQ(v, 0.0);
  std::tie(u, v) = gf_closed_form_2dldn(5.060, 4.950);
  // Hand evaluation: p = 25.047, sqrt(1 + 4 p^2) = 50.10403, u = sqrt(25.55202) = 5.05490.
  EXPECT_NEAR(u, 5.05490, 1e-5);
  EXPECT_NEAR(v, 4.95500, 1e-5);
  EXPECT_NEAR(u * v, 5.060 * 4.950, 1e-12);
  EXPECT_NEAR(8 * v * v + 4, 200.4, 0.1);
  EXPECT_THROW(gf_closed_form_2dldn(-1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(gf_closed_form_2dldn(3.0, 0.0), std::invalid_argument);  // loss 32
}

TEST(GfClosedForm, MinimumSharpness) {
  auto s = minimum_sharpness_2dldn(2.0);
  EXPECT_DOUBLE_EQ(s.value, 36.0);
  const Eigen::Matrix2d h = *models::eval_simple2d({std::sqrt(5.0), 2.0}).hessian;
  EXPECT_LT((h * s.eigvec - s.value * s.eigvec).norm(), 1e-12);
}

TEST(GfIntegrate, MatchesClosedFormOnRandomStarts) {
  auto m = models::simple2d_objective();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.05, 4.0), V(-4.0, 4.0);
  int n = 0;
  while (n < 50) {
    const double u0 = U(rng), v0 = V(rng);
    const double r = u0 * u0 - v0 * v0 - 1;
    if (0.5 * r * r >= 0.5) continue;
    ++n;
    auto flow = gf_integrate(m, Eigen::Vector2d(u0, v0));
    ASSERT_TRUE(flow.converged);
    auto [u, v] = gf_closed_form_2dldn(u0, v0);
    EXPECT_NEAR(flow.theta(0), u, 1e-6);
    EXPECT_NEAR(flow.theta(1), v, 1e-6);
    EXPECT_LE(flow.max_invariant_drift, 1e-8 * std::max(std::abs(u0 * v0), 1e-300) + 1e-300);
  }
}

TEST(GfIntegrate, StartAtMinimumReturnsImmediately) {
  auto flow = gf_integrate(models::simple2d_objective(), Eigen::Vector2d(std::sqrt(2.0), 1.0));
  EXPECT_TRUE(flow.converged);
  EXPECT_EQ(flow.steps, 0);
  EXPECT_EQ(flow.time, 0.0);
}

TEST(GfIntegrate, FlagsTimeLimit) {
  FlowOptions o;
  o.t_max = 1e-3;
  auto flow = gf_integrate(models::simple2d_objective(), Eigen::Vector2d(0.3, 0.1), o);
  EXPECT_FALSE(flow.converged);
  o.tol = 0.0;
  EXPECT_THROW(gf_integrate(models::simple2d_objective(), Eigen::Vector2d(0.3, 0.1), o), std::invalid_argument);
  EXPECT_THROW(gf_integrate(models::simple2d_objective(), Eigen::Vector3d(1, 1, 1)), std::invalid_argument);
}

TEST(Generalized, GdOnSimple2D) {
  const double eta = 0.01, eps = 0.004;
  optim::RunOptions o;
  o.schedule = optim::Schedule::constant(eta);
  o.steps = 20000;
  o.record_params = true;
  auto traj = optim::run(models::simple2d_objective(), Eigen::Vector2d(5.0595978753, 4.95), o);
  std::vector<Eigen::VectorXd> thetas;
  for (const auto& r : traj.records) thetas.push_back(*r.params);
  auto g = generalized_quantities(thetas, simple2d_closed_form_solver(), simple2d_minimum_sharpness(), eta, eps, 0.0);
  const auto& q = g.quantities;
  ASSERT_TRUE(q.tau_u);
  EXPECT_DOUBLE_EQ(q.C_u, std::sqrt(g.sharpness_at_min[*q.tau_u]));
  EXPECT_GE(q.C_v, 0.0);
  EXPECT_TRUE(q.converged);
  EXPECT_LT(g.sharpness_at_min[*q.tau_u], (2 - eps) / eta);
  for (std::size_t t = 0; t < *q.tau_u; ++t) EXPECT_GE(g.sharpness_at_min[t], (2 - eps) / eta);
  EXPECT_NEAR(q.u_inf_bound, q.C_u / (1 + eta * q.C_v), 1e-12);
}

TEST(Generalized, MinimumContributesNothing) {
  const Eigen::Vector2d at_min(std::sqrt(2.0), 1.0);
  auto solver = simple2d_closed_form_solver();
  const Eigen::VectorXd star = solver(at_min);
  EXPECT_LT((star - at_min).norm(), 1e-12);
  EXPECT_THROW(generalized_quantities({}, solver, simple2d_minimum_sharpness(), 0.01, 0.004, 0.0),
               std::invalid_argument);
  // Never drops below (2 - eps) / eta: tau_u absent is an error.
  std::vector<Eigen::VectorXd> flat(3, at_min);
  EXPECT_THROW(generalized_quantities(flat, solver, simple2d_minimum_sharpness(), 1.0, 0.5, 0.0), std::runtime_error);
}

TEST(StabilizationJson, AllFields) {
  StabilizationQuantities q;
  q.tau_u = 5;
  auto j = to_json(q);
  EXPECT_TRUE(j["tau_0"].is_null());
  EXPECT_EQ(j["tau_u"], 5);
  for (const char* k : {"C_u", "C_v", "C_v_tail_bound", "u_inf_bound", "beta", "eta", "epsilon", "converged",
                        "tail_adequate"})
    EXPECT_TRUE(j.contains(k)) << k;
}
