#pragma once

#include "catapult/models.hpp"
#include "catapult/trajectory.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace catapult::optim {

struct ConstantLr {
  double eta = 0.0;
};

// eta_i -> eta_f linearly over warmup_steps, then flat.
struct LinearWarmup {
  double eta_i = 1e-8;
  double eta_f = 0.0;
  long warmup_steps = 1;
};

// eta_low before switch_step, eta_high from switch_step on.
struct StepWarmup {
  double eta_low = 0.0;
  double eta_high = 0.0;
  long switch_step = 0;
};

struct Schedule {
  std::variant<ConstantLr, LinearWarmup, StepWarmup> variant;
  // Freeze the rate at the first probe where sharpness exceeds the instantaneous MSS.
  bool terminate_warmup_on_mss_cross = false;
  std::optional<long> terminated_at;

  static Schedule constant(double eta) { return {ConstantLr{eta}, false, std::nullopt}; }
  static Schedule linear_warmup(double eta_i, double eta_f, long warmup_steps) {
    return {LinearWarmup{eta_i, eta_f, warmup_steps}, false, std::nullopt};
  }
  static Schedule step_warmup(double eta_low, double eta_high, long switch_step) {
    return {StepWarmup{eta_low, eta_high, switch_step}, false, std::nullopt};
  }

  void validate() const;
  // True while the rate is still changing.
  bool in_warmup(long t) const;
  std::string describe() const;
};

double lr_at(const Schedule& schedule, long t);

// Maximum stable sharpness 2 (1 + beta) / eta.
double mss(double eta, double beta);

struct OptimizerState {
  Eigen::VectorXd theta;
  Eigen::VectorXd theta_prev;
  long step = 0;

  // Zero initial velocity.
  static OptimizerState at_rest(Eigen::VectorXd theta);
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// theta' = theta - eta grad + beta (theta - theta_prev)
OptimizerState step(const OptimizerState& state, const Eigen::VectorXd& grad, double eta, double beta);

enum class SwitchMode { None, GdThenPhb, PhbThenGd };
enum class Crossing { Downward, Upward };

struct SwitchPolicy {
  SwitchMode mode = SwitchMode::None;
  double beta = 0.0;
  Crossing direction = Crossing::Downward;
};

std::string to_string(SwitchMode mode);
SwitchMode switch_mode_from_string(const std::string& s);

using SharpnessProbe = std::function<double(const Eigen::VectorXd&)>;

struct RunOptions {
  Schedule schedule = Schedule::constant(0.01);
  double beta = 0.0;
  long steps = 1;
  SwitchPolicy switch_policy;
  long record_every = 1;
  // Probe cadence; 0 means "same as record_every". Records always carry a probe when one is available.
  long probe_every = 0;
  bool record_params = false;
  double divergence_threshold = 1e12;

  // Early stop once past stop_after: loss below stop_loss and two consecutive probes agree to stop_rtol.
  double stop_loss = 0.0;
  double stop_rtol = 1e-6;
  long stop_after = 0;
};

// Iterates the heavy-ball update for options.steps steps. A divergent run is truncated and flagged,
// never thrown.
Trajectory run(const models::Objective& model, const Eigen::VectorXd& init, const RunOptions& options,
               const SharpnessProbe& probe = {});

}  // namespace catapult::optim
