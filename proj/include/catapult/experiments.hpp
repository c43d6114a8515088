#pragma once

#include "catapult/baselines.hpp"
#include "catapult/catapults.hpp"
#include "catapult/models.hpp"
#include "catapult/optim.hpp"
#include "catapult/spectral.hpp"
#include "catapult/theory.hpp"
#include "catapult/trajectory.hpp"

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace catapult::experiments {

// Probes are stateful (warm starts), so every run gets a fresh one.
using ProbeFactory = std::function<optim::SharpnessProbe()>;

// Exact 2x2 for models with a dense Hessian, warm-started power iteration otherwise.
ProbeFactory default_probe_factory(const models::Objective& model, const spectral::PowerOptions& power = {});

// ---- four-scenario comparison ----

struct ScenarioOptions {
  double epsilon = 0.01;
  double beta = 0.9;
  long steps = 100000;
  long record_every = 1;
  long probe_every = 1;
  bool record_params = false;
  double divergence_threshold = 1e12;
};

struct ScenarioRun {
  std::string name;  // gd, phb, gd_then_phb, phb_then_gd
  Trajectory traj;
  double S_final = 0.0;
  double delta_S = 0.0;
  double displacement = 0.0;  // ||theta_T - theta_0||
};

struct ScenarioResult {
  double S0 = 0.0;
  double eta_gd = 0.0;   // (2 + eps) / S0
  double eta_phb = 0.0;  // (1 + beta) eta_gd
  double beta = 0.0;
  std::vector<ScenarioRun> runs;  // gd, phb, gd_then_phb, phb_then_gd

  const ScenarioRun& get(const std::string& name) const;
  // GD < PHB->GD < GD->PHB < PHB with each gap at least margin * delta_S(GD).
  bool strictly_ordered(double margin) const;
};

ScenarioResult scenario_compare(const models::Objective& model, const Eigen::VectorXd& init,
                                const ScenarioOptions& options, const ProbeFactory& probes);

// scenario,eta,beta,S0,S_final,delta_S,ratio_to_gd,displacement,displacement_ratio,switch_at,diverged
std::string scenario_table_csv(const ScenarioResult& result);

// ---- beta sweeps ----

enum class SweepModel { ScalarRelu, Simple2D };

struct BetaSweepOptions {
  std::vector<double> betas;
  double eta_gd = 0.0201;
  double epsilon = 0.01;
  long steps = 100000;
  int threads = 1;
};

struct BetaCell {
  double beta = 0.0;
  double eta = 0.0;  // (1 + beta) eta_gd
  theory::StabilizationQuantities quantities;
  double inv_factor = 0.0;  // 1 / (1 + eta_gd C_v)
  double u_T = 0.0;
  double S0 = 0.0;
  double S_final = 0.0;
  double delta_S_measured = 0.0;
  double delta_S_bound = 0.0;
  bool diverged = false;
  bool ok = true;  // quantities were computable
  std::string error;
};

// Scalar ReLU uses u_0^2 - u_T^2 and the per-coordinate quantities; simple2d uses sharpness and
// the closest-minimum generalization.
std::vector<BetaCell> beta_sweep(SweepModel model, const Eigen::Vector2d& init, const BetaSweepOptions& options);

std::string beta_sweep_csv(const std::vector<BetaCell>& cells);

// ---- LDN ----

struct WarmStart {
  models::DiagonalNetState state;
  long steps = 0;
  double loss = 0.0;
};

// GD from u = v = alpha * 1 until the training loss drops below loss_threshold.
WarmStart warm_start_ldn(const models::RegressionDataset& data, double alpha, double eta_small, double loss_threshold,
                         long max_steps = 10'000'000);

struct SweepOptions {
  std::vector<double> alphas;
  std::vector<double> eta_fs;
  double beta = 0.0;
  double eta_i = 1e-8;
  double warmup_per_eta = 1e6;  // warmup_steps = round(eta_f * warmup_per_eta)
  long post_warmup_factor = 10;
  long probe_every = 50;
  double stop_loss = 1e-10;
  double stop_rtol = 1e-6;
  bool terminate_warmup_on_mss_cross = false;
  DetectorOptions detector;
  double alpha_bar_fraction = 0.1;
  spectral::PowerOptions power;
  int threads = 1;
};

struct SweepCell {
  double alpha = 0.0;
  double eta_f = 0.0;
  double test_loss = 0.0;
  double train_loss = 0.0;
  double sharpness = 0.0;
  double mss = 0.0;
  bool diverged = false;
  int catapults = 0;
  long steps_run = 0;
  bool stopped_early = false;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // eta_f-major, alpha-minor
  std::vector<double> alphas;
  std::vector<double> eta_fs;
  double beta = 0.0;
  double l1_test_loss = 0.0;
  double l2_test_loss = 0.0;
  std::vector<std::optional<double>> alpha_bar;  // per eta_f

  const SweepCell& at(std::size_t eta_index, std::size_t alpha_index) const;
};

// One warmup run from u = v = alpha * 1. The trajectory is written to keep when given.
SweepCell run_ldn_cell(const std::shared_ptr<const models::RegressionDataset>& data, double alpha, double eta_f,
                       const SweepOptions& options, Trajectory* keep = nullptr);

SweepResult alpha_eta_sweep(const std::shared_ptr<const models::RegressionDataset>& data, const SweepOptions& options);

// Smallest alpha with loss below threshold that follows some smaller positive alpha at or above it.
// Small-initialization cells that are already sparse therefore do not count as the threshold.
std::optional<double> extract_alpha_bar(const std::vector<double>& alphas, const std::vector<double>& test_losses,
                                        double threshold);

// alpha,eta_f,test_loss,train_loss,sharpness,mss,diverged,catapults
std::string sweep_csv(const SweepResult& result);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace catapult::experiments
