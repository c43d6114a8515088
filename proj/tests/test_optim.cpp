#include "catapult/models.hpp"
#include "catapult/optim.hpp"
#include "catapult/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace catapult;
using namespace catapult::optim;

namespace {

// L = 1/2 sum_i a_i x_i^2; GD gives x_t = (1 - eta a)^t x_0.
models::Objective quadratic(const Eigen::VectorXd& a) {
  models::Objective m;
  m.id = "quadratic";
  m.dim = a.size();
  m.loss_and_grad = [a](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = a.cwiseProduct(x);
    return 0.5 * x.dot(g);
  };
  m.hvp = [a](const Eigen::VectorXd&, const Eigen::VectorXd& v) { Eigen::VectorXd r = a.cwiseProduct(v); return r; };
  return m;
}

}  // namespace

TEST(Schedule, LinearWarmupEndpoints) {
  auto s = Schedule::linear_warmup(1e-8, 0.002, 2000);
  EXPECT_DOUBLE_EQ(lr_at(s, 0), 1e-8);
  EXPECT_DOUBLE_EQ(lr_at(s, 2000), 0.002);
  EXPECT_DOUBLE_EQ(lr_at(s, 50000), 0.002);
  EXPECT_NEAR(lr_at(s, 1000), 0.5 * (1e-8 + 0.002), 1e-18);
  EXPECT_TRUE(s.in_warmup(1999));
  EXPECT_FALSE(s.in_warmup(2000));
}

TEST(Schedule, StepWarmupSwitch) {
  auto s = Schedule::step_warmup(1e-5, 0.0023, 10000);
  EXPECT_EQ(lr_at(s, 9999), 1e-5);
  EXPECT_EQ(lr_at(s, 10000), 0.0023);
}

TEST(Schedule, TerminatedWarmupFreezes) {
  auto s = Schedule::linear_warmup(1e-8, 0.002, 2000);
  s.terminated_at = 500;
  const double frozen = lr_at(s, 500);
  EXPECT_EQ(lr_at(s, 501), frozen);
  EXPECT_EQ(lr_at(s, 100000), frozen);
  EXPECT_FALSE(s.in_warmup(600));
}

TEST(Schedule, ValidationErrors) {
  EXPECT_THROW(Schedule::constant(0.0).validate(), std::invalid_argument);
  EXPECT_THROW(Schedule::linear_warmup(0.1, 0.01, 10).validate(), std::invalid_argument);
  EXPECT_THROW(Schedule::linear_warmup(1e-8, 0.01, 0).validate(), std::invalid_argument);
  EXPECT_THROW(Schedule::step_warmup(-1.0, 0.01, 10).validate(), std::invalid_argument);
  EXPECT_NO_THROW(Schedule::step_warmup(1e-5, 0.0023, 10000).validate());
}

TEST(Mss, Formula) {
  EXPECT_DOUBLE_EQ(mss(0.01, 0.0), 200.0);
  EXPECT_DOUBLE_EQ(mss(0.01, 0.9), 380.0);
  EXPECT_THROW(mss(0.0, 0.5), std::invalid_argument);
  EXPECT_THROW(mss(0.01, 1.0), std::invalid_argument);
}

TEST(Mss, MatchedRescalingAlongSchedules) {
  for (double beta : {0.0, 0.3, 0.9, 0.99}) {
    auto s = Schedule::linear_warmup(1e-8, 0.005, 5000);
    for (long t : {0L, 1L, 777L, 5000L, 9000L}) {
      const double eta = lr_at(s, t);
      EXPECT_NEAR(mss(eta * (1 + beta), beta), mss(eta, 0.0), 1e-15 * mss(eta, 0.0));
    }
  }
}

TEST(Step, HandValues) {
  OptimizerState s{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0), 0};
  auto n = step(s, Eigen::VectorXd::Zero(1), 0.1, 0.5);
  EXPECT_DOUBLE_EQ(n.theta(0), 0.5);
  EXPECT_DOUBLE_EQ(n.theta_prev(0), 1.0);
  EXPECT_EQ(n.step, 1);

  auto rest = OptimizerState::at_rest(Eigen::Vector2d(3.0, -1.0));
  EXPECT_EQ(rest.theta, rest.theta_prev);
  auto same = step(rest, Eigen::Vector2d::Zero(), 0.1, 0.9);
  EXPECT_EQ(same.theta, rest.theta);

  auto gd = step(rest, Eigen::Vector2d(1.0, 2.0), 0.1, 0.0);
  EXPECT_DOUBLE_EQ(gd.theta(0), 2.9);
  EXPECT_DOUBLE_EQ(gd.theta(1), -1.2);
}

TEST(Step, Errors) {
  auto rest = OptimizerState::at_rest(Eigen::Vector2d(1.0, 1.0));
  EXPECT_THROW(step(rest, Eigen::Vector3d::Zero(), 0.1, 0.0), std::invalid_argument);
  EXPECT_THROW(step(rest, Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(), 0.0), 0.1, 0.0), DivergenceError);
}

TEST(Run, GdMatchesQuadraticClosedForm) {
  const Eigen::Vector3d a(1.0, 3.0, 10.0), x0(1.0, -2.0, 0.5);
  RunOptions o;
  o.schedule = Schedule::constant(0.05);
  o.steps = 200;
  o.record_params = true;
  auto traj = run(quadratic(a), x0, o);
  ASSERT_EQ(traj.records.size(), 201u);
  for (const auto& r : traj.records) {
    for (int i = 0; i < 3; ++i) {
      const double exact = std::pow(1 - 0.05 * a(i), static_cast<double>(r.t)) * x0(i);
      EXPECT_NEAR((*r.params)(i), exact, 1e-12 * std::max(std::abs(exact), 1e-300) + 1e-300);
    }
  }
}

TEST(Run, RecordsAndMetadata) {
  RunOptions o;
  o.schedule = Schedule::constant(0.01);
  o.beta = 0.5;
  o.steps = 95;
  o.record_every = 10;
  auto m = models::simple2d_objective();
  auto traj = run(m, Eigen::Vector2d(1.5, 0.2), o, spectral::exact_probe(m));
  long prev = -1;
  for (const auto& r : traj.records) {
    EXPECT_GT(r.t, prev);
    prev = r.t;
    EXPECT_DOUBLE_EQ(r.mss, 2 * (1 + r.beta) / r.eta);
    EXPECT_TRUE(r.sharpness);
  }
  EXPECT_EQ(traj.records.back().t, 95);
  EXPECT_EQ(traj.records.size(), 11u);
  EXPECT_EQ(traj.meta.model_id, m.id);
  EXPECT_FALSE(traj.meta.diverged);
}

TEST(Run, ZeroGradientRegionIsConstant) {
  RunOptions o;
  o.schedule = Schedule::constant(0.5);
  o.steps = 50;
  o.record_params = true;
  auto traj = run(models::scalar_relu_objective(), Eigen::Vector2d(-1.0, 4.0), o);
  for (const auto& r : traj.records) EXPECT_EQ(*r.params, Eigen::Vector2d(-1.0, 4.0));
}

TEST(Run, DeterministicBitIdentical) {
  RunOptions o;
  o.schedule = Schedule::constant(0.0201 * 1.9);
  o.beta = 0.9;
  o.steps = 2000;
  o.record_params = true;
  auto m = models::scalar_relu_objective();
  auto a = run(m, Eigen::Vector2d(10.0, 1e-6), o, spectral::exact_probe(m));
  auto b = run(m, Eigen::Vector2d(10.0, 1e-6), o, spectral::exact_probe(m));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].loss, b.records[i].loss);
    EXPECT_EQ(*a.records[i].params, *b.records[i].params);
  }
  EXPECT_EQ(trajectory_csv(a), trajectory_csv(b));
}

TEST(Run, DivergenceTruncatesAndFlags) {
  RunOptions o;
  o.schedule = Schedule::constant(1.0);
  o.steps = 10000;
  auto traj = run(quadratic(Eigen::Vector2d(5.0, 1.0)), Eigen::Vector2d(1.0, 1.0), o);
  EXPECT_TRUE(traj.meta.diverged);
  ASSERT_TRUE(traj.meta.diverged_at);
  EXPECT_LT(*traj.meta.diverged_at, 10000);
  EXPECT_EQ(traj.records.back().t, *traj.meta.diverged_at);
}

TEST(Run, ArgumentErrors) {
  auto m = models::scalar_relu_objective();
  RunOptions o;
  o.steps = 0;
  EXPECT_THROW(run(m, Eigen::Vector2d(1, 1), o), std::invalid_argument);
  o.steps = 10;
  o.record_every = 0;
  EXPECT_THROW(run(m, Eigen::Vector2d(1, 1), o), std::invalid_argument);
  o.record_every = 1;
  EXPECT_THROW(run(m, Eigen::Vector3d(1, 1, 1), o), std::invalid_argument);
  o.beta = 1.0;
  EXPECT_THROW(run(m, Eigen::Vector2d(1, 1), o), std::invalid_argument);
  o.beta = 0.0;
  o.switch_policy = {SwitchMode::GdThenPhb, 0.9, Crossing::Downward};
  EXPECT_THROW(run(m, Eigen::Vector2d(1, 1), o), std::invalid_argument);  // no probe
  o.beta = 0.9;
  EXPECT_THROW(run(m, Eigen::Vector2d(1, 1), o, spectral::exact_probe(m)), std::invalid_argument);
}

TEST(Run, SwitchFiresOnceAtFirstDownwardCrossing) {
  auto m = models::scalar_relu_objective();
  const double eta = 2.01 / 100.0;
  RunOptions o;
  o.schedule = Schedule::constant(eta);
  o.steps = 20000;
  o.switch_policy = {SwitchMode::GdThenPhb, 0.9, Crossing::Downward};
  auto traj = run(m, Eigen::Vector2d(10.0, 1e-6), o, spectral::exact_probe(m));
  ASSERT_TRUE(traj.meta.switch_fired_at);
  const long fired = *traj.meta.switch_fired_at;
  int beta_changes = 0;
  for (std::size_t i = 0; i < traj.records.size(); ++i) {
    const auto& r = traj.records[i];
    if (r.t < fired) {
      EXPECT_EQ(r.beta, 0.0);
      EXPECT_GE(*r.sharpness, 2.0 / eta) << "crossing before the recorded firing step at t=" << r.t;
    } else {
      EXPECT_EQ(r.beta, 0.9);
      EXPECT_DOUBLE_EQ(r.eta, eta * 1.9);
      EXPECT_NEAR(r.mss, 2.0 / eta, 1e-9);
    }
    if (i > 0 && r.beta != traj.records[i - 1].beta) ++beta_changes;
  }
  EXPECT_EQ(beta_changes, 1);
  EXPECT_LT(*traj.records[fired].sharpness, 2.0 / eta);
}

TEST(Run, PhbThenGdRescalesDown) {
  auto m = models::scalar_relu_objective();
  const double eta_gd = 2.01 / 100.0;
  RunOptions o;
  o.schedule = Schedule::constant(eta_gd * 1.9);
  o.beta = 0.9;
  o.steps = 20000;
  o.switch_policy = {SwitchMode::PhbThenGd, 0.9, Crossing::Downward};
  auto traj = run(m, Eigen::Vector2d(10.0, 1e-6), o, spectral::exact_probe(m));
  ASSERT_TRUE(traj.meta.switch_fired_at);
  const auto& last = traj.records.back();
  EXPECT_EQ(last.beta, 0.0);
  EXPECT_NEAR(last.eta, eta_gd, 1e-15);
}

TEST(Run, WarmupTerminationFreezesRate) {
  // Quadratic with curvature 100: MSS of GD crosses 100 at eta = 0.02.
  RunOptions o;
  o.schedule = Schedule::linear_warmup(1e-4, 0.04, 1000);
  o.schedule.terminate_warmup_on_mss_cross = true;
  o.steps = 1500;
  o.probe_every = 1;
  auto m = quadratic(Eigen::Vector2d(100.0, 1.0));
  auto traj = run(m, Eigen::Vector2d(1e-3, 1.0), o, [](const Eigen::VectorXd&) { return 100.0; });
  ASSERT_TRUE(traj.meta.warmup_terminated_at);
  const long t_star = *traj.meta.warmup_terminated_at;
  const double frozen = traj.records[t_star].eta;
  EXPECT_LE(100.0, 2.0 / traj.records[t_star - 1].eta);
  EXPECT_GT(100.0, 2.0 / frozen);
  EXPECT_EQ(traj.records.back().eta, frozen);
}

TEST(Run, EarlyStopWhenConvergedAndProbeStable) {
  RunOptions o;
  o.schedule = Schedule::constant(0.1);
  o.steps = 100000;
  o.stop_loss = 1e-20;
  o.probe_every = 5;
  auto traj = run(quadratic(Eigen::Vector2d(1.0, 2.0)), Eigen::Vector2d(1.0, 1.0), o,
                  [](const Eigen::VectorXd&) { return 2.0; });
  EXPECT_TRUE(traj.meta.stopped_early);
  EXPECT_LT(traj.back().t, 100000);
  EXPECT_LT(traj.back().loss, 1e-20);
}

TEST(SwitchMode, StringRoundTrip) {
  for (auto m : {SwitchMode::None, SwitchMode::GdThenPhb, SwitchMode::PhbThenGd})
    EXPECT_EQ(switch_mode_from_string(to_string(m)), m);
  EXPECT_THROW(switch_mode_from_string("sideways"), std::invalid_argument);
}

TEST(TrajectoryCsv, EmptySharpnessCell) {
  Trajectory traj;
  traj.records.push_back({0, 1.5, 0.1, 0.0, 20.0, std::nullopt, std::nullopt});
  traj.records.push_back({1, 0.25, 0.1, 0.0, 20.0, 3.0, std::nullopt});
  EXPECT_EQ(trajectory_csv(traj), "t,loss,eta,mss,sharpness\n0,1.5,0.1,20,\n1,0.25,0.1,20,3\n");
  EXPECT_THROW(traj.param_column(0), std::logic_error);
  EXPECT_EQ(*traj.last_sharpness(), 3.0);
}
