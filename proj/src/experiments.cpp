#include "catapult/experiments.hpp"

#include "catapult/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace catapult::experiments {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

ProbeFactory default_probe_factory(const models::Objective& model, const spectral::PowerOptions& power) {
  if (model.hessian) {
    return [probe = spectral::exact_probe(model)] { return probe; };
  }
  return [model, power] {
    auto probe = std::make_shared<spectral::WarmPowerProbe>(model, power);
    return optim::SharpnessProbe([probe](const Eigen::VectorXd& theta) { return (*probe)(theta); });
  };
}

// ---- scenarios ----

const ScenarioRun& ScenarioResult::get(const std::string& name) const {
  for (const auto& r : runs) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("no scenario named " + name);
}

bool ScenarioResult::strictly_ordered(double margin) const {
  const double gd = get("gd").delta_S;
  const double seq[] = {gd, get("phb_then_gd").delta_S, get("gd_then_phb").delta_S, get("phb").delta_S};
  const double gap = margin * std::abs(gd);
  for (int i = 0; i < 3; ++i) {
    if (!(seq[i + 1] - seq[i] > gap)) return false;
  }
  return std::none_of(runs.begin(), runs.end(), [](const ScenarioRun& r) { return r.traj.meta.diverged; });
}

ScenarioResult scenario_compare(const models::Objective& model, const Eigen::VectorXd& init,
                                const ScenarioOptions& options, const ProbeFactory& probes) {
  if (!(options.beta >= 0.0 && options.beta < 1.0)) throw std::invalid_argument("scenario_compare: beta must be in [0,1)");
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("scenario_compare: epsilon must be > 0");

  ScenarioResult result;
  result.beta = options.beta;
  result.S0 = probes()(init);
  if (!(result.S0 > 0.0)) throw std::runtime_error("scenario_compare: initial sharpness must be positive");
  result.eta_gd = (2.0 + options.epsilon) / result.S0;
  result.eta_phb = (1.0 + options.beta) * result.eta_gd;

  struct Spec {
    const char* name;
    double eta;
    double beta;
    optim::SwitchMode mode;
  };
  const Spec specs[] = {
      {"gd", result.eta_gd, 0.0, optim::SwitchMode::None},
      {"phb", result.eta_phb, options.beta, optim::SwitchMode::None},
      {"gd_then_phb", result.eta_gd, 0.0, optim::SwitchMode::GdThenPhb},
      {"phb_then_gd", result.eta_phb, options.beta, optim::SwitchMode::PhbThenGd},
  };
  for (const Spec& s : specs) {
    optim::RunOptions ro;
    ro.schedule = optim::Schedule::constant(s.eta);
    ro.beta = s.beta;
    ro.steps = options.steps;
    ro.record_every = options.record_every;
    ro.probe_every = options.probe_every;
    ro.record_params = true;
    ro.divergence_threshold = options.divergence_threshold;
    // With beta = 0 both sides of a switch are GD, so the hybrids run unswitched.
    if (s.mode != optim::SwitchMode::None && options.beta > 0.0) {
      ro.switch_policy = {s.mode, options.beta, optim::Crossing::Downward};
    }
    ScenarioRun run;
    run.name = s.name;
    run.traj = optim::run(model, init, ro, probes());
    const auto last = run.traj.last_sharpness();
    run.S_final = last ? *last : std::nan("");
    run.delta_S = result.S0 - run.S_final;
    run.displacement = (*run.traj.back().params - init).norm();
    if (!options.record_params) {
      for (auto& rec : run.traj.records) rec.params.reset();
    }
    result.runs.push_back(std::move(run));
  }
  return result;
}

std::string scenario_table_csv(const ScenarioResult& result) {
  std::ostringstream os;
  os << "scenario,eta,beta,S0,S_final,delta_S,ratio_to_gd,displacement,displacement_ratio,switch_at,diverged\n";
  const ScenarioRun& gd = result.get("gd");
  for (const auto& r : result.runs) {
    const bool starts_phb = r.name == "phb" || r.name == "phb_then_gd";
    os << r.name << ',' << io::format_double(starts_phb ? result.eta_phb : result.eta_gd) << ','
       << io::format_double(starts_phb ? result.beta : 0.0) << ',' << io::format_double(result.S0) << ','
       << io::format_double(r.S_final) << ',' << io::format_double(r.delta_S) << ','
       << io::format_double(r.delta_S / gd.delta_S) << ',' << io::format_double(r.displacement) << ','
       << io::format_double(r.displacement / gd.displacement) << ','
       << (r.traj.meta.switch_fired_at ? std::to_string(*r.traj.meta.switch_fired_at) : std::string()) << ','
       << (r.traj.meta.diverged ? 1 : 0) << '\n';
  }
  return os.str();
}

// ---- beta sweeps ----

namespace {

BetaCell beta_cell(SweepModel kind, const Eigen::Vector2d& init, double beta, const BetaSweepOptions& options) {
  const models::Objective model =
      kind == SweepModel::ScalarRelu ? models::scalar_relu_objective() : models::simple2d_objective();
  BetaCell cell;
  cell.beta = beta;
  cell.eta = (1.0 + beta) * options.eta_gd;

  optim::RunOptions ro;
  ro.schedule = optim::Schedule::constant(cell.eta);
  ro.beta = beta;
  ro.steps = options.steps;
  ro.record_every = 1;
  ro.record_params = true;
  const Trajectory traj = optim::run(model, init, ro);
  cell.diverged = traj.meta.diverged;

  const std::vector<double> u = traj.param_column(0);
  const std::vector<double> v = traj.param_column(1);
  cell.u_T = u.back();
  auto& q = cell.quantities;
  try {
    if (cell.diverged) throw std::runtime_error("run diverged");
    if (kind == SweepModel::ScalarRelu) {
      q.beta = beta;
      q.eta = options.eta_gd;
      q.epsilon = options.epsilon;
      q.tau_0 = theory::compute_tau_0(u);
      q.tau_u = theory::compute_tau_u(u, options.eta_gd, options.epsilon);
      if (!q.tau_u) throw std::runtime_error("tau_u not reached");
      q.C_u = theory::compute_Cu(u, *q.tau_u, beta);
      const auto cv = theory::compute_Cv(v, *q.tau_u, beta, options.eta_gd, options.epsilon);
      q.C_v = cv.C_v;
      q.C_v_tail_bound = cv.tail_bound;
      q.u_inf_bound = theory::u_inf_upper_bound(q.C_u, q.C_v, options.eta_gd);
      q.tail_adequate = q.C_v_tail_bound < 1e-6 * q.C_v;
      const std::size_t n = u.size();
      q.converged = std::abs(u[n - 1] - u[n - 2]) < 1e-10 && v[n - 1] * v[n - 1] < 1e-16;
      cell.S0 = init(0) * init(0);
      cell.S_final = cell.u_T * cell.u_T;
    } else {
      std::vector<Eigen::VectorXd> thetas;
      thetas.reserve(traj.records.size());
      for (const auto& rec : traj.records) thetas.push_back(*rec.params);
      const auto g = theory::generalized_quantities(thetas, theory::simple2d_closed_form_solver(),
                                                    theory::simple2d_minimum_sharpness(), options.eta_gd,
                                                    options.epsilon, beta);
      q = g.quantities;
      q.converged = q.converged && (thetas.back() - thetas[thetas.size() - 2]).norm() < 1e-10;
      cell.S0 = spectral::sharpness_exact_2x2(model.hessian(init)).value;
      cell.S_final = spectral::sharpness_exact_2x2(model.hessian(thetas.back())).value;
    }
    cell.inv_factor = 1.0 / (1.0 + options.eta_gd * q.C_v);
    cell.delta_S_measured = cell.S0 - cell.S_final;
    cell.delta_S_bound = cell.S0 - q.u_inf_bound * q.u_inf_bound;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

std::vector<BetaCell> beta_sweep(SweepModel model, const Eigen::Vector2d& init, const BetaSweepOptions& options) {
  if (options.betas.empty()) throw std::invalid_argument("beta_sweep: empty beta grid");
  for (double b : options.betas) {
    if (!(b >= 0.0 && b < 1.0)) throw std::invalid_argument("beta_sweep: beta must be in [0,1)");
  }
  std::vector<BetaCell> cells(options.betas.size());
  parallel_for(cells.size(), options.threads,
               [&](std::size_t i) { cells[i] = beta_cell(model, init, options.betas[i], options); });
  return cells;
}

std::string beta_sweep_csv(const std::vector<BetaCell>& cells) {
  std::ostringstream os;
  os << "beta,eta,tau_u,C_u,C_v,C_v_tail_bound,inv_factor,u_T,u_inf_bound,S0,S_final,delta_S_measured,"
        "delta_S_bound,converged,tail_adequate,diverged\n";
  for (const auto& c : cells) {
    const auto& q = c.quantities;
    os << io::format_double(c.beta) << ',' << io::format_double(c.eta) << ','
       << (q.tau_u ? std::to_string(*q.tau_u) : std::string()) << ',' << io::format_double(q.C_u) << ','
       << io::format_double(q.C_v) << ',' << io::format_double(q.C_v_tail_bound) << ','
       << io::format_double(c.inv_factor) << ',' << io::format_double(c.u_T) << ','
       << io::format_double(q.u_inf_bound) << ',' << io::format_double(c.S0) << ','
       << io::format_double(c.S_final) << ',' << io::format_double(c.delta_S_measured) << ','
       << io::format_double(c.delta_S_bound) << ',' << (q.converged ? 1 : 0) << ',' << (q.tail_adequate ? 1 : 0)
       << ',' << (c.diverged ? 1 : 0) << '\n';
  }
  return os.str();
}

// ---- LDN ----

WarmStart warm_start_ldn(const models::RegressionDataset& data, double alpha, double eta_small, double loss_threshold,
                         long max_steps) {
  if (!(loss_threshold > 0.0)) throw std::invalid_argument("warm_start_ldn: loss_threshold must be > 0");
  if (!(eta_small > 0.0)) throw std::invalid_argument("warm_start_ldn: eta must be > 0");
  WarmStart out;
  out.state = models::DiagonalNetState::broadcast(data.d(), alpha);
  for (long t = 0;; ++t) {
    const models::EvalResult r = models::eval_ldn(out.state, data);
    out.loss = r.loss;
    out.steps = t;
    if (r.loss < loss_threshold) return out;
    if (!std::isfinite(r.loss)) throw std::runtime_error("warm_start_ldn: loss diverged");
    if (t >= max_steps) throw std::runtime_error("warm_start_ldn: step cap exceeded");
    const Eigen::Index d = data.d();
    out.state.u -= eta_small * r.grad.head(d);
    out.state.v -= eta_small * r.grad.tail(d);
  }
}

const SweepCell& SweepResult::at(std::size_t eta_index, std::size_t alpha_index) const {
  return cells.at(eta_index * alphas.size() + alpha_index);
}

SweepCell run_ldn_cell(const std::shared_ptr<const models::RegressionDataset>& data, double alpha, double eta_f,
                       const SweepOptions& options, Trajectory* keep) {
  const models::Objective model = models::ldn_objective(data);
  const long warmup = std::max(1L, std::lround(eta_f * options.warmup_per_eta));

  optim::RunOptions ro;
  ro.schedule = optim::Schedule::linear_warmup(std::min(options.eta_i, eta_f), eta_f, warmup);
  ro.schedule.terminate_warmup_on_mss_cross = options.terminate_warmup_on_mss_cross;
  ro.beta = options.beta;
  ro.steps = warmup * (1 + options.post_warmup_factor);
  ro.record_every = options.probe_every;
  ro.probe_every = options.probe_every;
  ro.record_params = true;
  ro.stop_loss = options.stop_loss;
  ro.stop_rtol = options.stop_rtol;
  ro.stop_after = warmup;

  auto probe = std::make_shared<spectral::WarmPowerProbe>(model, options.power);
  Trajectory traj = optim::run(model, models::DiagonalNetState::broadcast(data->d(), alpha).flatten(), ro,
                               [probe](const Eigen::VectorXd& theta) { return (*probe)(theta); });

  SweepCell cell;
  cell.alpha = alpha;
  cell.eta_f = eta_f;
  const Record& last = traj.back();
  cell.train_loss = last.loss;
  cell.mss = last.mss;
  cell.sharpness = last.sharpness ? *last.sharpness : std::nan("");
  cell.diverged = traj.meta.diverged;
  cell.steps_run = traj.meta.steps_run;
  cell.stopped_early = traj.meta.stopped_early;
  cell.test_loss = cell.diverged ? std::nan("")
                                 : models::population_test_loss(
                                       models::DiagonalNetState::unflatten(*last.params).coefficients(), *data);
  if (!cell.diverged) cell.catapults = static_cast<int>(detect_catapults(traj, options.detector).size());
  if (keep) {
    *keep = std::move(traj);
  }
  return cell;
}

std::optional<double> extract_alpha_bar(const std::vector<double>& alphas, const std::vector<double>& test_losses,
                                        double threshold) {
  if (alphas.size() != test_losses.size()) throw std::invalid_argument("extract_alpha_bar: size mismatch");
  bool saw_high = false;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0.0)) continue;
    const double loss = test_losses[i];
    if (!std::isfinite(loss) || loss >= threshold) {
      saw_high = true;
    } else if (saw_high) {
      return alphas[i];
    }
  }
  return std::nullopt;
}

SweepResult alpha_eta_sweep(const std::shared_ptr<const models::RegressionDataset>& data, const SweepOptions& options) {
  if (options.alphas.empty() || options.eta_fs.empty()) throw std::invalid_argument("alpha_eta_sweep: empty grid");
  if (!std::is_sorted(options.alphas.begin(), options.alphas.end())) {
    throw std::invalid_argument("alpha_eta_sweep: alpha grid must be ascending");
  }
  SweepResult result;
  result.alphas = options.alphas;
  result.eta_fs = options.eta_fs;
  result.beta = options.beta;
  result.l2_test_loss = baselines::min_l2_baseline(*data).test_loss;
  result.l1_test_loss = baselines::min_l1_baseline(*data).test_loss;

  const std::size_t na = options.alphas.size();
  result.cells.resize(na * options.eta_fs.size());
  parallel_for(result.cells.size(), options.threads, [&](std::size_t i) {
    result.cells[i] = run_ldn_cell(data, options.alphas[i % na], options.eta_fs[i / na], options);
  });

  const double threshold = options.alpha_bar_fraction * result.l2_test_loss;
  for (std::size_t e = 0; e < options.eta_fs.size(); ++e) {
    std::vector<double> losses(na);
    for (std::size_t a = 0; a < na; ++a) losses[a] = result.at(e, a).test_loss;
    result.alpha_bar.push_back(extract_alpha_bar(options.alphas, losses, threshold));
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "alpha,eta_f,test_loss,train_loss,sharpness,mss,diverged,catapults\n";
  for (const auto& c : result.cells) {
    os << io::format_double(c.alpha) << ',' << io::format_double(c.eta_f) << ',' << io::format_double(c.test_loss)
       << ',' << io::format_double(c.train_loss) << ',' << io::format_double(c.sharpness) << ','
       << io::format_double(c.mss) << ',' << (c.diverged ? 1 : 0) << ',' << c.catapults << '\n';
  }
  return os.str();
}

}  // namespace catapult::experiments
