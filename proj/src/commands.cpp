#include "catapult/commands.hpp"

#include "catapult/catapults.hpp"
#include "catapult/dataset_io.hpp"
#include "catapult/experiments.hpp"
#include "catapult/io.hpp"
#include "catapult/verify.hpp"

#include <sstream>
#include <stdexcept>

namespace catapult::commands {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json envelope(const std::string& command, const config::ExperimentConfig& cfg, const std::string& hash) {
  return {{"command", command}, {"config_hash", hash}, {"config", config::to_json(cfg)}};
}

void write_json(const fs::path& path, const json& doc) { io::write_file_atomic(path, doc.dump(2) + "\n"); }

std::string params_csv(const Trajectory& traj) {
  std::ostringstream os;
  const Eigen::Index dim = traj.records.front().params->size();
  os << "t";
  for (Eigen::Index i = 0; i < dim; ++i) os << ",theta_" << i;
  os << '\n';
  for (const auto& r : traj.records) {
    os << r.t;
    for (Eigen::Index i = 0; i < dim; ++i) os << ',' << io::format_double((*r.params)(i));
    os << '\n';
  }
  return os.str();
}

Outcome run_command(const config::ExperimentConfig& cfg, const fs::path& dir, json meta) {
  const auto data = cfg.model == config::ModelKind::Ldn ? config::build_dataset(cfg) : nullptr;
  const models::Objective model = config::build_objective(cfg, data);
  const Eigen::VectorXd init = config::build_init(cfg, data.get());
  const auto probe = experiments::default_probe_factory(model, config::build_power_options(cfg))();
  Trajectory traj = optim::run(model, init, config::build_run_options(cfg), probe);
  traj.meta.seeds = {cfg.seeds.dataset, cfg.seeds.power};

  io::write_file_atomic(dir / "trajectory.csv", trajectory_csv(traj));
  if (cfg.run.record_params) io::write_file_atomic(dir / "params.csv", params_csv(traj));
  const auto events = detect_catapults(traj, cfg.detector);
  meta["trajectory"] = trajectory_meta_json(traj.meta);
  meta["events"] = to_json(events);
  write_json(dir / "events.json", meta);
  if (data) models::write_dataset(*data, dir / "dataset.csv");

  std::ostringstream s;
  s << "steps " << traj.meta.steps_run << ", final loss " << io::format_double(traj.back().loss) << ", catapults "
    << events.size() << (traj.meta.diverged ? ", diverged" : "");
  return {kOk, dir, s.str()};
}

Outcome sweep_command(const config::ExperimentConfig& cfg, const fs::path& dir, json meta) {
  if (cfg.model != config::ModelKind::Ldn) throw config::ConfigError("model.kind: sweep requires ldn");
  if (cfg.sweep.alphas.empty() || cfg.sweep.eta_fs.empty()) {
    throw config::ConfigError("sweep.alphas/eta_fs: grids must be nonempty");
  }
  const auto data = config::build_dataset(cfg);
  const auto result = experiments::alpha_eta_sweep(data, config::build_sweep_options(cfg));
  io::write_file_atomic(dir / "sweep.csv", experiments::sweep_csv(result));

  json alpha_bar = json::array();
  for (std::size_t i = 0; i < result.eta_fs.size(); ++i) {
    alpha_bar.push_back({{"eta_f", result.eta_fs[i]},
                         {"alpha_bar", result.alpha_bar[i] ? json(*result.alpha_bar[i]) : json(nullptr)}});
  }
  meta["baselines"] = {{"l1_test_loss", result.l1_test_loss}, {"l2_test_loss", result.l2_test_loss}};
  meta["alpha_bar"] = alpha_bar;
  meta["alpha_bar_threshold"] = cfg.sweep.alpha_bar_fraction * result.l2_test_loss;
  write_json(dir / "baselines.json", meta);
  return {kOk, dir, std::to_string(result.cells.size()) + " cells"};
}

Outcome scenarios_command(const config::ExperimentConfig& cfg, const fs::path& dir, json meta) {
  const auto data = cfg.model == config::ModelKind::Ldn ? config::build_dataset(cfg) : nullptr;
  const models::Objective model = config::build_objective(cfg, data);
  const Eigen::VectorXd init = config::build_init(cfg, data.get());
  experiments::ScenarioOptions so;
  so.epsilon = cfg.scenarios.epsilon;
  so.beta = cfg.scenarios.beta;
  so.steps = cfg.run.steps;
  so.record_every = cfg.run.record_every;
  so.probe_every = cfg.run.probe_every > 0 ? cfg.run.probe_every : cfg.run.record_every;
  so.record_params = cfg.run.record_params;
  so.divergence_threshold = cfg.run.divergence_threshold;
  const auto result =
      experiments::scenario_compare(model, init, so, experiments::default_probe_factory(model, config::build_power_options(cfg)));

  json runs = json::object();
  for (const auto& r : result.runs) {
    io::write_file_atomic(dir / ("trajectory_" + r.name + ".csv"), trajectory_csv(r.traj));
    if (cfg.run.record_params) io::write_file_atomic(dir / ("params_" + r.name + ".csv"), params_csv(r.traj));
    runs[r.name] = trajectory_meta_json(r.traj.meta);
  }
  io::write_file_atomic(dir / "delta_s.csv", experiments::scenario_table_csv(result));
  meta["runs"] = runs;
  meta["S0"] = result.S0;
  meta["eta_gd"] = result.eta_gd;
  meta["eta_phb"] = result.eta_phb;
  meta["strictly_ordered"] = result.strictly_ordered(0.01);
  write_json(dir / "scenarios.json", meta);
  return {kOk, dir, result.strictly_ordered(0.01) ? "ordering holds" : "ordering violated"};
}

Outcome beta_sweep_command(const config::ExperimentConfig& cfg, const fs::path& dir, json meta) {
  experiments::SweepModel kind;
  if (cfg.model == config::ModelKind::ScalarRelu) {
    kind = experiments::SweepModel::ScalarRelu;
  } else if (cfg.model == config::ModelKind::Simple2D) {
    kind = experiments::SweepModel::Simple2D;
  } else {
    throw config::ConfigError("model.kind: beta-sweep supports scalar_relu and simple2d");
  }
  const Eigen::VectorXd init = config::build_init(cfg, nullptr);
  experiments::BetaSweepOptions bo;
  bo.betas = cfg.beta_sweep.betas;
  bo.eta_gd = cfg.beta_sweep.eta_gd;
  bo.epsilon = cfg.beta_sweep.epsilon;
  bo.steps = cfg.run.steps;
  bo.threads = cfg.threads;
  const auto cells = experiments::beta_sweep(kind, Eigen::Vector2d(init(0), init(1)), bo);
  io::write_file_atomic(dir / "beta_sweep.csv", experiments::beta_sweep_csv(cells));
  json errors = json::object();
  for (const auto& c : cells) {
    if (!c.ok) errors[io::format_double(c.beta)] = c.error;
  }
  meta["cell_errors"] = errors;
  write_json(dir / "beta_sweep.json", meta);
  return {kOk, dir, std::to_string(cells.size()) + " cells"};
}

Outcome verify_command(const config::ExperimentConfig& cfg, const fs::path& dir, json meta) {
  const verify::Report report = verify::verify_theory(cfg);
  meta["report"] = verify::to_json(report);
  write_json(dir / "report.json", meta);
  int failed = 0;
  for (const auto& c : report.checks) failed += c.passed ? 0 : 1;
  return {report.all_passed() ? kOk : kTheoryFailure, dir,
          std::to_string(report.checks.size() - failed) + "/" + std::to_string(report.checks.size()) +
              " checks passed"};
}

}  // namespace

bool is_command(const std::string& command) {
  return command == "run" || command == "sweep" || command == "scenarios" || command == "beta-sweep" ||
         command == "verify-theory";
}

Outcome execute(const std::string& command, const config::ExperimentConfig& cfg) {
  if (!is_command(command)) throw config::ConfigError("unknown command '" + command + "'");
  const std::string hash = config::config_hash(cfg);
  const fs::path dir = fs::path(cfg.output_dir) / command / hash;
  fs::create_directories(dir);
  json meta = envelope(command, cfg, hash);
  if (command == "run") return run_command(cfg, dir, meta);
  if (command == "sweep") return sweep_command(cfg, dir, meta);
  if (command == "scenarios") return scenarios_command(cfg, dir, meta);
  if (command == "beta-sweep") return beta_sweep_command(cfg, dir, meta);
  return verify_command(cfg, dir, meta);
}

}  // namespace catapult::commands
