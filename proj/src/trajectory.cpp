#include "catapult/trajectory.hpp"

#include "catapult/io.hpp"

#include <stdexcept>

namespace catapult {

std::vector<double> Trajectory::losses() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(r.loss);
  }
  return out;
}

std::vector<double> Trajectory::param_column(Eigen::Index index) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.params) {
      throw std::logic_error("trajectory was recorded without parameters");
    }
    out.push_back((*r.params)(index));
  }
  return out;
}

std::optional<double> Trajectory::last_sharpness() const {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->sharpness) {
      return it->sharpness;
    }
  }
  return std::nullopt;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t,loss,eta,mss,sharpness\n";
  for (const auto& r : traj.records) {
    out += std::to_string(r.t);
    out += ',';
    out += io::format_double(r.loss);
    out += ',';
    out += io::format_double(r.eta);
    out += ',';
    out += io::format_double(r.mss);
    out += ',';
    out += io::format_optional(r.sharpness);
    out += '\n';
  }
  return out;
}

nlohmann::json trajectory_meta_json(const TrajectoryMeta& meta) {
  nlohmann::json j = {{"model", meta.model_id},
                      {"beta", meta.beta},
                      {"schedule", meta.schedule},
                      {"switch_mode", meta.switch_mode},
                      {"seeds", meta.seeds},
                      {"diverged", meta.diverged},
                      {"steps_run", meta.steps_run},
                      {"stopped_early", meta.stopped_early}};
  j["switch_fired_at"] = meta.switch_fired_at ? nlohmann::json(*meta.switch_fired_at) : nlohmann::json(nullptr);
  j["warmup_terminated_at"] =
      meta.warmup_terminated_at ? nlohmann::json(*meta.warmup_terminated_at) : nlohmann::json(nullptr);
  j["diverged_at"] = meta.diverged_at ? nlohmann::json(*meta.diverged_at) : nlohmann::json(nullptr);
  return j;
}

}  // namespace catapult
