#pragma once

#include "catapult/catapults.hpp"
#include "catapult/experiments.hpp"
#include "catapult/models.hpp"
#include "catapult/optim.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace catapult::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { ScalarRelu, Simple2D, Ldn };
enum class InitKind { Explicit, Alpha, WarmStart };
enum class ScheduleKind { Constant, LinearWarmup, StepWarmup };

struct DatasetConfig {
  int n = 50;
  int d = 100;
  double sigma2 = 5.0;
  double mu = 5.0;  // every coordinate of the input mean
  int k = 5;
};

struct InitConfig {
  InitKind kind = InitKind::Explicit;
  std::vector<double> theta;  // explicit
  double alpha = 0.0;         // alpha and warm_start
  double warm_eta = 1e-3;
  double warm_loss = 1e-3;
};

struct OptimizerConfig {
  double beta = 0.0;
  ScheduleKind schedule = ScheduleKind::Constant;
  double eta = 0.01;
  double eta_i = 1e-8;
  double eta_f = 0.005;
  long warmup_steps = 5000;
  double eta_low = 1e-5;
  double eta_high = 0.0023;
  long switch_step = 10000;
  bool terminate_warmup_on_mss_cross = false;
  optim::SwitchMode switch_mode = optim::SwitchMode::None;
  double switch_beta = 0.9;
};

struct RunConfig {
  long steps = 100000;
  long record_every = 1;
  long probe_every = 0;
  bool record_params = false;
  double tol = 1e-8;  // power iteration tolerance
  long max_power_iters = 10000;
  double divergence_threshold = 1e12;
};

struct SweepConfig {
  std::vector<double> alphas;
  std::vector<double> eta_fs;
  double warmup_per_eta = 1e6;
  long post_warmup_factor = 10;
  long probe_every = 50;
  double stop_loss = 1e-10;
  double stop_rtol = 1e-6;
  double alpha_bar_fraction = 0.1;
};

struct ScenarioConfig {
  double epsilon = 0.01;
  double beta = 0.9;
};

// 0, 0.01, ..., 0.99
std::vector<double> default_betas();

struct BetaSweepConfig {
  std::vector<double> betas = default_betas();
  double eta_gd = 0.0201;
  double epsilon = 0.01;
};

struct VerifyConfig {
  int random_starts = 50;
  bool include_ldn = true;
};

struct SeedConfig {
  std::uint64_t dataset = 0;
  std::uint64_t power = 0;
  std::uint64_t checks = 0;  // random starts in verify-theory
};

struct ExperimentConfig {
  ModelKind model = ModelKind::ScalarRelu;
  DatasetConfig dataset;
  InitConfig init;
  OptimizerConfig optimizer;
  RunConfig run;
  SweepConfig sweep;
  ScenarioConfig scenarios;
  BetaSweepConfig beta_sweep;
  DetectorOptions detector;
  VerifyConfig verify;
  SeedConfig seeds;
  std::string output_dir = "out";
  int threads = 1;
};

// Accepts either a JSON object or an INI document with [section] headers. INI values are read
// as JSON literals (numbers, booleans, arrays, quoted strings); anything else is a bare string.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Checks cross-field constraints; throws ConfigError naming the offending key.
void validate(const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig from_json(const nlohmann::json& doc);

// FNV-1a over the canonical JSON serialization.
std::string config_hash(const ExperimentConfig& config);

std::string to_string(ModelKind kind);

// Builders used by the command layer.
std::shared_ptr<const models::RegressionDataset> build_dataset(const ExperimentConfig& config);
models::Objective build_objective(const ExperimentConfig& config,
                                  const std::shared_ptr<const models::RegressionDataset>& data);
Eigen::VectorXd build_init(const ExperimentConfig& config, const models::RegressionDataset* data);
optim::RunOptions build_run_options(const ExperimentConfig& config);
spectral::PowerOptions build_power_options(const ExperimentConfig& config);
experiments::SweepOptions build_sweep_options(const ExperimentConfig& config);

}  // namespace catapult::config
