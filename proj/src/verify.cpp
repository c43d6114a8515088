#include "catapult/verify.hpp"

#include "catapult/baselines.hpp"
#include "catapult/catapults.hpp"
#include "catapult/experiments.hpp"
#include "catapult/optim.hpp"
#include "catapult/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace catapult::verify {

namespace {

struct Series {
  std::vector<double> u;
  std::vector<double> v;
};

Series scalar_run(const Eigen::Vector2d& init, double eta, double beta, long steps) {
  optim::RunOptions ro;
  ro.schedule = optim::Schedule::constant(eta);
  ro.beta = beta;
  ro.steps = steps;
  ro.record_params = true;
  const Trajectory traj = optim::run(models::scalar_relu_objective(), init, ro);
  return {traj.param_column(0), traj.param_column(1)};
}

double max_increase(const std::vector<double>& u) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t < u.size(); ++t) worst = std::max(worst, u[t] - u[t - 1]);
  return worst;
}

Check make(std::string name, bool passed, double value, double limit, std::string detail = {}) {
  return {std::move(name), passed, value, limit, std::move(detail)};
}

// A check group that throws is reported as a single failed check instead of aborting the report.
template <class Fn>
void guarded(std::vector<Check>& out, const std::string& group, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    out.push_back(make(group + "_error", false, 0.0, 0.0, e.what()));
  }
}

// Experiment-level constants for the LDN invariants.
constexpr double kLdnEtaF = 0.005;
constexpr double kLdnAlpha = 0.21;
constexpr double kWarmAlpha = 0.2;

}  // namespace

bool Report::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

nlohmann::json to_json(const Report& report) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : report.checks) {
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"limit", c.limit},
                   {"detail", c.detail}});
  }
  return {{"all_passed", report.all_passed()}, {"checks", arr}};
}

double lemma4_grid_margin(double lo, double hi, long n) {
  const double r2 = std::sqrt(2.0);
  double worst = std::numeric_limits<double>::infinity();
  for (long i = 0; i < n; ++i) {
    const double z = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    const double scale = 3.0 * z * z * z + 8.0 * r2 * z * z + 14.0 * z + 4.0 * r2;
    const double allowance = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    worst = std::min(worst, theory::lemma4_polynomial(z) + allowance);
  }
  return worst;
}

Report verify_theory(const config::ExperimentConfig& cfg) {
  Report rep;
  auto& out = rep.checks;
  const Eigen::Vector2d fig2_init(10.0, 1e-6);
  const double eps = cfg.beta_sweep.epsilon;
  const double eta_gd = cfg.beta_sweep.eta_gd;
  const long steps = cfg.run.steps;

  // Lemma 1 monotonicity across momentum values, plus an engineered zero crossing.
  guarded(out, "lemma1", [&] {
    double worst = -std::numeric_limits<double>::infinity();
    for (double beta : {0.0, 0.3, 0.6, 0.9, 0.99}) {
      worst = std::max(worst, max_increase(scalar_run(fig2_init, (1.0 + beta) * eta_gd, beta, steps).u));
    }
    const double crossing_beta = 0.5;
    const Series cross = scalar_run(Eigen::Vector2d(1.0, 4.0), 0.1, crossing_beta, 200);
    worst = std::max(worst, max_increase(cross.u));
    out.push_back(make("lemma1_monotone", worst <= 1e-12, worst, 1e-12, "max u_{t+1} - u_t over scalar runs"));

    const auto tau0 = theory::compute_tau_0(cross.u);
    if (tau0) {
      const double limit = theory::lemma1_limit(cross.u, tau0, crossing_beta);
      const double err = std::abs(cross.u.back() - limit);
      out.push_back(make("lemma1_limit", err <= 1e-8, err, 1e-8, "|u_T - closed form| after a zero crossing"));
    } else {
      out.push_back(make("lemma1_limit", false, 0.0, 1e-8, "engineered run did not cross zero"));
    }
  });

  // Theorem 1 on every converged cell of the beta grid, with tail adequacy.
  guarded(out, "theorem1", [&] {
    experiments::BetaSweepOptions bo;
    bo.betas = cfg.beta_sweep.betas;
    bo.eta_gd = eta_gd;
    bo.epsilon = eps;
    bo.steps = steps;
    bo.threads = cfg.threads;
    const auto cells = experiments::beta_sweep(experiments::SweepModel::ScalarRelu, fig2_init, bo);
    double worst_ratio = -std::numeric_limits<double>::infinity();
    double worst_tail = 0.0;
    int checked = 0;
    for (const auto& c : cells) {
      if (!c.ok || !c.quantities.converged || c.quantities.tau_0) continue;
      ++checked;
      worst_ratio = std::max(worst_ratio, c.u_T / c.quantities.u_inf_bound);
      if (c.quantities.C_v > 0.0) worst_tail = std::max(worst_tail, c.quantities.C_v_tail_bound / c.quantities.C_v);
    }
    out.push_back(make("theorem1_upper_bound", checked > 0 && worst_ratio <= 1.0 + 1e-3, worst_ratio, 1.0 + 1e-3,
                       "max u_T / bound over " + std::to_string(checked) + " converged cells"));
    out.push_back(make("cv_tail_adequate", checked > 0 && worst_tail < 1e-6, worst_tail, 1e-6,
                       "max tail_bound / C_v"));
  });

  // GD lower bound, energy inequality and the v_{tau-1} bound on the GD run.
  guarded(out, "theorem3", [&] {
    const Series gd = scalar_run(fig2_init, eta_gd, 0.0, steps);
    const auto lb = theory::gd_lower_bound(gd.u, gd.v, eta_gd, eps);
    out.push_back(make("theorem3_lower_bound", gd.u.back() >= lb.bound - 1e-8, gd.u.back(), lb.bound - 1e-8,
                       "final u_T against the bound"));
    out.push_back(make("theorem3_p_tau", lb.P_tau_measured <= lb.P_tau_analytic_bound, lb.P_tau_measured,
                       lb.P_tau_analytic_bound, "measured P at tau_u against the closed-form bound"));
    out.push_back(make("v_tau_bound", lb.v_before_tau_sq <= lb.v_before_tau_bound, lb.v_before_tau_sq,
                       lb.v_before_tau_bound, "v_{tau_u - 1}^2"));
    const auto energy = theory::energy_step_check(gd.u, gd.v, eta_gd);
    out.push_back(make("lemma3_energy_step", energy.all_hold && energy.checked > 0, energy.max_violation, 0.0,
                       std::to_string(energy.checked) + " applicable steps"));
    const double p0 = theory::energy(fig2_init(0), fig2_init(1), eta_gd);
    const double p0_bound = eps / eta_gd + 0.5 * fig2_init(1) * fig2_init(1);
    out.push_back(make("energy_initial", p0 <= p0_bound, p0, p0_bound, "P_0 <= eps/eta + v0^2/2"));
  });

  // Lemma 4: grid plus the double root at sqrt(2).
  guarded(out, "lemma4", [&] {
    const double margin = lemma4_grid_margin(1.0, 1e3, 1'000'000);
    out.push_back(make("lemma4_grid", margin >= 0.0, margin, 0.0, "min f(z) + rounding allowance on [1, 1e3]"));
    const double r2 = std::sqrt(2.0);
    const double at_root = std::abs(theory::lemma4_polynomial(r2));
    const double derivative = 9.0 * 2.0 - 16.0 * r2 * r2 + 14.0;  // f'(z) = 9 z^2 - 16 sqrt(2) z + 14
    const double curvature = 18.0 * r2 - 16.0 * r2;              // f''(z) = 18 z - 16 sqrt(2)
    const bool ok = at_root <= 1e-13 && std::abs(derivative) <= 1e-12 && curvature > 0.0;
    out.push_back(make("lemma4_local_min", ok, at_root, 1e-13, "f, f' vanish and f'' > 0 at sqrt(2)"));
  });

  // Gradient flow: integrator against the closed form on random valid starts.
  guarded(out, "gradient_flow", [&] {
    std::mt19937_64 gen(cfg.seeds.checks);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> radius(0.05, 0.95);
    std::uniform_real_distribution<double> scale(0.0, 5.0);
    const models::Objective model = models::simple2d_objective();
    double worst_err = 0.0;
    double worst_drift = 0.0;
    int done = 0;
    while (done < cfg.verify.random_starts) {
      // u^2 - v^2 - 1 in (-1, 1) with u > 0.
      const double v0 = scale(gen) * std::cos(angle(gen));
      const double r = (2.0 * radius(gen) - 1.0);
      const double u2 = 1.0 + v0 * v0 + r;
      if (u2 <= 0.0) continue;
      const Eigen::Vector2d start(std::sqrt(u2), v0);
      const auto [ue, ve] = theory::gf_closed_form_2dldn(start(0), start(1));
      const auto flow = theory::gf_integrate(model, start);
      worst_err = std::max(worst_err, (flow.theta - Eigen::Vector2d(ue, ve)).norm());
      const double p = std::abs(start(0) * start(1));
      worst_drift = std::max(worst_drift, flow.max_invariant_drift / std::max(p, 1e-300));
      if (!flow.converged) worst_err = std::numeric_limits<double>::infinity();
      ++done;
    }
    out.push_back(make("gf_closed_form", worst_err <= 1e-6, worst_err, 1e-6,
                       std::to_string(done) + " random starts"));
    out.push_back(make("gf_uv_conservation", worst_drift <= 1e-8, worst_drift, 1e-8, "max |uv - u0 v0| / |u0 v0|"));

    const auto [us, vs] = theory::gf_closed_form_2dldn(5.060, 4.950);
    (void)us;
    const double s = theory::minimum_sharpness_2dldn(vs).value;
    const double target = (2.0 + 0.004) / 0.01;
    const double rel = std::abs(s - target) / target;
    out.push_back(make("gf_limit_sharpness", rel <= 5e-3, rel, 5e-3, "relative gap to (2+eps)/eta"));
  });

  // Four-scenario ordering on the scalar model.
  guarded(out, "scenario_order_scalar", [&] {
    const models::Objective model = models::scalar_relu_objective();
    experiments::ScenarioOptions so;
    so.epsilon = cfg.scenarios.epsilon;
    so.beta = cfg.scenarios.beta;
    so.steps = steps;
    const auto res = experiments::scenario_compare(model, fig2_init, so, experiments::default_probe_factory(model));
    out.push_back(make("scenario_order_scalar", res.strictly_ordered(0.01), res.get("phb").delta_S,
                       res.get("gd").delta_S, "GD < PHB->GD < GD->PHB < PHB, 1% margins"));

    // Detector idempotence and subsampling invariance on the PHB run.
    const Trajectory& phb = res.get("phb").traj;
    const DetectorOptions det{cfg.detector.kappa, 0.02, cfg.detector.loss_floor};
    const auto first = detect_catapults(phb, det);
    const auto again = detect_catapults(phb, det);
    Trajectory coarse = phb;
    coarse.records.clear();
    for (std::size_t i = 0; i < phb.records.size(); i += 5) coarse.records.push_back(phb.records[i]);
    const auto sub = detect_catapults(coarse, det);
    const bool same = first.size() == again.size() && first.size() == sub.size();
    out.push_back(make("detector_idempotent_subsampling", same, static_cast<double>(sub.size()),
                       static_cast<double>(first.size()), "event counts at full and 1/5 resolution"));
  });

  if (cfg.verify.include_ldn) guarded(out, "ldn", [&] {
    const auto data = config::build_dataset(cfg);
    const models::Objective model = models::ldn_objective(data);

    const auto l2 = baselines::min_l2_baseline(*data);
    const auto l1 = baselines::min_l1_baseline(*data);
    const bool norms = l1.w.lpNorm<1>() <= l2.w.lpNorm<1>() * (1.0 + 1e-8) && l2.w.norm() <= l1.w.norm() * (1.0 + 1e-8);
    out.push_back(make("baseline_norm_order", norms, l1.w.lpNorm<1>(), l2.w.lpNorm<1>(),
                       "||w_l1||_1 <= ||w_l2||_1 and ||w_l2||_2 <= ||w_l1||_2"));

    experiments::SweepOptions so = config::build_sweep_options(cfg);
    so.beta = 0.0;
    const auto gd = experiments::run_ldn_cell(data, kLdnAlpha, kLdnEtaF, so);
    so.beta = 0.9;
    const auto phb = experiments::run_ldn_cell(data, kLdnAlpha, kLdnEtaF, so);
    const double gd_ratio = gd.sharpness / gd.mss;
    const double phb_ratio = phb.sharpness / phb.mss;
    out.push_back(make("ldn_gd_final_sharpness", gd_ratio >= 0.8 && gd_ratio <= 1.0, gd_ratio, 1.0,
                       "final S / MSS in [0.8, 1]"));
    out.push_back(make("ldn_phb_final_sharpness", phb_ratio < 0.5, phb_ratio, 0.5, "final S / MSS below 0.5"));

    const auto warm = experiments::warm_start_ldn(*data, kWarmAlpha, 1e-3, 1e-3);
    experiments::ScenarioOptions sc;
    sc.epsilon = 0.03;
    sc.beta = cfg.scenarios.beta;
    sc.steps = 20000;
    const auto res = experiments::scenario_compare(model, warm.state.flatten(), sc,
                                                   experiments::default_probe_factory(model, config::build_power_options(cfg)));
    out.push_back(make("scenario_order_ldn", res.strictly_ordered(0.01), res.get("phb").delta_S,
                       res.get("gd").delta_S, "GD < PHB->GD < GD->PHB < PHB, 1% margins"));
  });
  return rep;
}

}  // namespace catapult::verify
