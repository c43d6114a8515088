#include "catapult/optim.hpp"

#include "catapult/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace catapult::optim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double scheduled_rate(const Schedule& s, long t) {
  return std::visit(overloaded{
                        [](const ConstantLr& c) { return c.eta; },
                        [t](const LinearWarmup& w) {
                          const double frac =
                              static_cast<double>(std::min(t, w.warmup_steps)) / static_cast<double>(w.warmup_steps);
                          return w.eta_i + (w.eta_f - w.eta_i) * frac;
                        },
                        [t](const StepWarmup& w) { return t < w.switch_step ? w.eta_low : w.eta_high; },
                    },
                    s.variant);
}

}  // namespace

void Schedule::validate() const {
  std::visit(overloaded{
                 [](const ConstantLr& c) {
                   if (!(c.eta > 0.0)) throw std::invalid_argument("schedule: eta must be > 0");
                 },
                 [](const LinearWarmup& w) {
                   if (!(w.eta_i > 0.0) || !(w.eta_f > 0.0)) {
                     throw std::invalid_argument("schedule: warmup rates must be > 0");
                   }
                   if (w.eta_i > w.eta_f) throw std::invalid_argument("schedule: eta_i must not exceed eta_f");
                   if (w.warmup_steps < 1) throw std::invalid_argument("schedule: warmup_steps must be >= 1");
                 },
                 [](const StepWarmup& w) {
                   if (!(w.eta_low > 0.0) || !(w.eta_high > 0.0)) {
                     throw std::invalid_argument("schedule: step warmup rates must be > 0");
                   }
                   if (w.switch_step < 0) throw std::invalid_argument("schedule: switch_step must be >= 0");
                 },
             },
             variant);
}

bool Schedule::in_warmup(long t) const {
  if (terminated_at && t >= *terminated_at) {
    return false;
  }
  return std::visit(overloaded{
                        [](const ConstantLr&) { return false; },
                        [t](const LinearWarmup& w) { return t < w.warmup_steps; },
                        [t](const StepWarmup& w) { return t < w.switch_step; },
                    },
                    variant);
}

std::string Schedule::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const ConstantLr& c) { os << "constant(" << io::format_double(c.eta) << ")"; },
                 [&](const LinearWarmup& w) {
                   os << "linear_warmup(" << io::format_double(w.eta_i) << "," << io::format_double(w.eta_f) << ","
                      << w.warmup_steps << ")";
                 },
                 [&](const StepWarmup& w) {
                   os << "step_warmup(" << io::format_double(w.eta_low) << "," << io::format_double(w.eta_high)
                      << "," << w.switch_step << ")";
                 },
             },
             variant);
  if (terminate_warmup_on_mss_cross) {
    os << "+terminate_on_mss_cross";
  }
  return os.str();
}

double lr_at(const Schedule& schedule, long t) {
  if (schedule.terminated_at && t >= *schedule.terminated_at) {
    return scheduled_rate(schedule, *schedule.terminated_at);
  }
  return scheduled_rate(schedule, t);
}

double mss(double eta, double beta) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("mss: eta must be > 0");
  }
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument("mss: beta must be in [0,1)");
  }
  return 2.0 * (1.0 + beta) / eta;
}

OptimizerState OptimizerState::at_rest(Eigen::VectorXd theta) {
  OptimizerState s;
  s.theta_prev = theta;
  s.theta = std::move(theta);
  return s;
}

OptimizerState step(const OptimizerState& state, const Eigen::VectorXd& grad, double eta, double beta) {
  if (grad.size() != state.theta.size() || state.theta_prev.size() != state.theta.size()) {
    throw std::invalid_argument("step: dimension mismatch");
  }
  if (!grad.allFinite()) {
    throw DivergenceError("step: non-finite gradient at step " + std::to_string(state.step));
  }
  OptimizerState next;
  next.theta = state.theta - eta * grad + beta * (state.theta - state.theta_prev);
  next.theta_prev = state.theta;
  next.step = state.step + 1;
  return next;
}

std::string to_string(SwitchMode mode) {
  switch (mode) {
    case SwitchMode::None:
      return "none";
    case SwitchMode::GdThenPhb:
      return "gd_then_phb";
    case SwitchMode::PhbThenGd:
      return "phb_then_gd";
  }
  return "none";
}

SwitchMode switch_mode_from_string(const std::string& s) {
  if (s == "none") return SwitchMode::None;
  if (s == "gd_then_phb") return SwitchMode::GdThenPhb;
  if (s == "phb_then_gd") return SwitchMode::PhbThenGd;
  throw std::invalid_argument("unknown switch mode '" + s + "'");
}

Trajectory run(const models::Objective& model, const Eigen::VectorXd& init, const RunOptions& options,
               const SharpnessProbe& probe) {
  if (options.steps < 1) throw std::invalid_argument("run: steps must be >= 1");
  if (options.record_every < 1) throw std::invalid_argument("run: record_every must be >= 1");
  if (!(options.beta >= 0.0 && options.beta < 1.0)) throw std::invalid_argument("run: beta must be in [0,1)");
  if (init.size() != model.dim) throw std::invalid_argument("run: init has wrong dimension for " + model.id);
  options.schedule.validate();

  const SwitchPolicy& policy = options.switch_policy;
  if (policy.mode != SwitchMode::None) {
    if (!(policy.beta > 0.0 && policy.beta < 1.0)) {
      throw std::invalid_argument("run: switch beta must be in (0,1)");
    }
    if (!probe) throw std::invalid_argument("run: switching requires a sharpness probe");
    const double expected = policy.mode == SwitchMode::GdThenPhb ? 0.0 : policy.beta;
    if (options.beta != expected) {
      throw std::invalid_argument("run: starting beta inconsistent with switch mode " + to_string(policy.mode));
    }
  }
  const long probe_every = options.probe_every > 0 ? options.probe_every : options.record_every;

  Schedule schedule = options.schedule;
  double beta = options.beta;
  double lr_scale = 1.0;
  bool armed = false;  // a downward crossing needs a prior probe at or above the MSS

  Trajectory traj;
  traj.meta.model_id = model.id;
  traj.meta.beta = options.beta;
  traj.meta.schedule = schedule.describe();
  traj.meta.switch_mode = to_string(policy.mode);
  traj.records.reserve(static_cast<std::size_t>(options.steps / options.record_every + 2));

  OptimizerState state = OptimizerState::at_rest(init);
  Eigen::VectorXd grad;
  std::optional<double> last_probe;

  for (long t = 0;; ++t) {
    const double loss = model.loss_and_grad(state.theta, grad);
    const bool blown = !std::isfinite(loss) || loss > options.divergence_threshold || !grad.allFinite() ||
                       !state.theta.allFinite() || state.theta.norm() > options.divergence_threshold;

    double eta = lr_at(schedule, t) * lr_scale;
    double mss_t = mss(eta, beta);

    const bool record_now = t % options.record_every == 0 || t == options.steps || blown;
    std::optional<double> sharpness;
    if (probe && !blown && (t % probe_every == 0 || record_now)) {
      sharpness = probe(state.theta);

      if (schedule.terminate_warmup_on_mss_cross && !schedule.terminated_at && schedule.in_warmup(t) &&
          *sharpness > mss_t) {
        schedule.terminated_at = t;
        traj.meta.warmup_terminated_at = t;
      }

      if (policy.mode != SwitchMode::None && !traj.meta.switch_fired_at) {
        bool fire = false;
        if (policy.direction == Crossing::Downward) {
          fire = armed && *sharpness < mss_t;
          armed = armed || *sharpness >= mss_t;
        } else {
          fire = armed && *sharpness > mss_t;
          armed = armed || *sharpness <= mss_t;
        }
        if (fire) {
          if (policy.mode == SwitchMode::GdThenPhb) {
            beta = policy.beta;
            lr_scale *= 1.0 + policy.beta;
          } else {
            beta = 0.0;
            lr_scale /= 1.0 + policy.beta;
          }
          traj.meta.switch_fired_at = t;
        }
      }
      eta = lr_at(schedule, t) * lr_scale;
      mss_t = mss(eta, beta);
    }

    if (record_now) {
      Record rec{t, loss, eta, beta, mss_t, sharpness, std::nullopt};
      if (options.record_params) {
        rec.params = state.theta;
      }
      traj.records.push_back(std::move(rec));
    }
    traj.meta.steps_run = t;

    if (blown) {
      traj.meta.diverged = true;
      traj.meta.diverged_at = t;
      break;
    }
    if (t == options.steps) {
      break;
    }
    if (options.stop_loss > 0.0 && t >= options.stop_after && sharpness) {
      const bool stable = last_probe && std::abs(*sharpness - *last_probe) <= options.stop_rtol * std::abs(*sharpness);
      if (loss < options.stop_loss && stable) {
        if (!record_now) {
          traj.records.push_back({t, loss, eta, beta, mss_t, sharpness,
                                  options.record_params ? std::optional<Eigen::VectorXd>(state.theta) : std::nullopt});
        }
        traj.meta.stopped_early = true;
        break;
      }
    }
    if (sharpness) {
      last_probe = sharpness;
    }
    state = step(state, grad, eta, beta);
  }
  return traj;
}

}  // namespace catapult::optim
