#include "CLI11.hpp"

#include "catapult/commands.hpp"
#include "catapult/config.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

// Wall-clock timestamps go here and nowhere else, so result files stay byte-identical across reruns.
void append_log(const std::string& output_dir, const std::string& line) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  std::ofstream log(std::filesystem::path(output_dir) / "catapult-lab.log", std::ios::app);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  log << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << ' ' << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient descent and heavy-ball catapult experiments"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;

  app.add_option("command", command, "run | sweep | scenarios | beta-sweep | verify-theory")
      ->required()
      ->check(CLI::IsMember({"run", "sweep", "scenarios", "beta-sweep", "verify-theory"}));
  app.add_option("--config", config_path, "INI or JSON config")->required()->check(CLI::ExistingFile);
  auto* out_opt = app.add_option("--out", out_dir, "output root (overrides output.dir)");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (default: CATAPULT_LAB_THREADS or 1)")
                          ->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "overrides the dataset, power-iteration and check seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : catapult::commands::kConfigError;
  }

  catapult::config::ExperimentConfig cfg;
  try {
    cfg = catapult::config::load_config(config_path);
    if (*out_opt) cfg.output_dir = out_dir;
    if (*seed_opt) cfg.seeds = {seed, seed, seed};
    if (*threads_opt) {
      cfg.threads = threads;
    } else if (const char* env = std::getenv("CATAPULT_LAB_THREADS")) {
      const int n = std::atoi(env);
      if (n < 1) throw catapult::config::ConfigError("CATAPULT_LAB_THREADS: must be a positive integer");
      cfg.threads = n;
    }
    catapult::config::validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return catapult::commands::kConfigError;
  }

  append_log(cfg.output_dir, "start " + command + " " + config_path);
  try {
    const auto outcome = catapult::commands::execute(command, cfg);
    std::cout << command << ": " << outcome.summary << '\n' << outcome.output_dir.string() << '\n';
    append_log(cfg.output_dir, "done " + command + " exit " + std::to_string(outcome.exit_code));
    return outcome.exit_code;
  } catch (const catapult::config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    append_log(cfg.output_dir, "config error " + command);
    return catapult::commands::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    append_log(cfg.output_dir, "failed " + command);
    return catapult::commands::kRuntimeError;
  }
}
