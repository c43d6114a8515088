#pragma once

#include "catapult/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace catapult {

struct CatapultEvent {
  long start = 0;
  long peak_step = 0;
  long end = 0;
  double loss_spike_ratio = 1.0;  // peak loss over the pre-spike running minimum
  double sharpness_before = 0.0;
  double sharpness_after = 0.0;
  double sharpness_drop = 0.0;  // before - after
  double final_sharpness_over_mss = 0.0;
  bool closed = true;     // false when the series ended inside the spike
  bool overshoot = false;  // sharpness later climbed above 1.5x its post-event minimum
};

struct DetectorOptions {
  double kappa = 5.0;  // spike ratio
  double rho = 0.2;    // required relative sharpness drop
  // Running minimum is clamped below at this value, so spikes out of roundoff-level losses are ignored.
  double loss_floor = 0.0;
};

// A spike opens when loss >= kappa * (running minimum before it) and closes once loss is back under
// that minimum times 1.01. Events without a sharpness drop of rho * (sharpness at open) are discarded.
// Only records carrying a sharpness sample are used to measure the drop.
std::vector<CatapultEvent> detect_catapults(const Trajectory& traj, const DetectorOptions& options = {});

nlohmann::json to_json(const CatapultEvent& e);
nlohmann::json to_json(const std::vector<CatapultEvent>& events);

}  // namespace catapult
