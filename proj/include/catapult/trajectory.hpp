#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace catapult {

struct Record {
  long t = 0;
  double loss = 0.0;
  double eta = 0.0;   // learning rate applied at step t
  double beta = 0.0;  // momentum active at step t
  double mss = 0.0;   // 2 (1 + beta) / eta
  std::optional<double> sharpness;
  std::optional<Eigen::VectorXd> params;
};

struct TrajectoryMeta {
  std::string model_id;
  double beta = 0.0;  // momentum at step 0
  std::string schedule;
  std::string switch_mode = "none";
  std::optional<long> switch_fired_at;
  std::optional<long> warmup_terminated_at;
  std::vector<std::uint64_t> seeds;
  bool diverged = false;
  std::optional<long> diverged_at;
  long steps_run = 0;
  bool stopped_early = false;
};

struct Trajectory {
  std::vector<Record> records;
  TrajectoryMeta meta;

  const Record& back() const { return records.back(); }
  bool empty() const { return records.empty(); }

  // Column extraction helpers; params_column requires record_params.
  std::vector<double> losses() const;
  std::vector<double> param_column(Eigen::Index index) const;
  std::optional<double> last_sharpness() const;
};

// Columns t,loss,eta,mss,sharpness with an empty cell for unsampled sharpness.
std::string trajectory_csv(const Trajectory& traj);
nlohmann::json trajectory_meta_json(const TrajectoryMeta& meta);

}  // namespace catapult
