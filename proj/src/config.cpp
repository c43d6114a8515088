#include "catapult/config.hpp"

#include "catapult/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace catapult::config {

namespace {

using nlohmann::json;

// Reads fields out of one JSON object, remembering which keys were used so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string path) : path_(std::move(path)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw ConfigError(path_ + ": expected a table");
    obj_ = &doc;
  }

  // Rejects keys that no read() asked for.
  void done() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + key_path(key) + "'");
    }
  }

  Section child(const std::string& key) {
    used_.insert(key);
    static const json null_doc;
    if (!obj_ || !obj_->contains(key)) return Section(null_doc, key_path(key));
    return Section(obj_->at(key), key_path(key));
  }

  template <class T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = obj_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer");
        if (std::is_unsigned_v<T> && v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned()) {
          throw ConfigError("expected a nonnegative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("expected a string");
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
          throw ConfigError("expected an array of numbers");
        }
      }
      out = v.get<T>();
    } catch (const ConfigError& e) {
      throw ConfigError(key_path(key) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ConfigError(key_path(key) + ": " + e.what());
    }
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json* obj_ = nullptr;
  std::string path_;
  std::set<std::string> used_;
};

template <class E>
E parse_enum(const std::string& key, const std::string& value,
             const std::vector<std::pair<std::string, E>>& table) {
  for (const auto& [name, e] : table) {
    if (name == value) return e;
  }
  std::string options;
  for (const auto& [name, e] : table) options += (options.empty() ? "" : ", ") + name;
  throw ConfigError(key + ": unknown value '" + value + "' (expected one of " + options + ")");
}

template <class E>
std::string enum_name(E value, const std::vector<std::pair<std::string, E>>& table) {
  for (const auto& [name, e] : table) {
    if (e == value) return name;
  }
  return "?";
}

const std::vector<std::pair<std::string, ModelKind>> kModelKinds = {
    {"scalar_relu", ModelKind::ScalarRelu}, {"simple2d", ModelKind::Simple2D}, {"ldn", ModelKind::Ldn}};
const std::vector<std::pair<std::string, InitKind>> kInitKinds = {
    {"explicit", InitKind::Explicit}, {"alpha", InitKind::Alpha}, {"warm_start", InitKind::WarmStart}};
const std::vector<std::pair<std::string, ScheduleKind>> kScheduleKinds = {{"constant", ScheduleKind::Constant},
                                                                          {"linear_warmup", ScheduleKind::LinearWarmup},
                                                                          {"step_warmup", ScheduleKind::StepWarmup}};

json ini_value(const std::string& raw) {
  std::string s = raw;
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  json v = json::parse(s, nullptr, false);
  if (v.is_discarded()) return json(s);
  return v;
}

json parse_ini(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  json doc = json::object();
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      doc[section] = ini_value(body.data());
      continue;
    }
    json& sec = doc[section];
    sec = json::object();
    for (const auto& [key, value] : body) {
      if (!value.empty()) throw ConfigError("config: nested keys are not supported under '" + section + "'");
      sec[key] = ini_value(value.data());
    }
  }
  return doc;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::vector<double> default_betas() {
  std::vector<double> betas;
  for (int i = 0; i < 100; ++i) betas.push_back(i / 100.0);
  return betas;
}

std::string to_string(ModelKind kind) { return enum_name(kind, kModelKinds); }

ExperimentConfig from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a table");
  ExperimentConfig c;
  {
    Section root(doc, "");
    {
      Section s = root.child("model");
      std::string kind = to_string(c.model);
      s.read("kind", kind);
      c.model = parse_enum(s.key_path("kind"), kind, kModelKinds);
      s.done();
    }
    {
      Section s = root.child("dataset");
      s.read("n", c.dataset.n);
      s.read("d", c.dataset.d);
      s.read("sigma2", c.dataset.sigma2);
      s.read("mu", c.dataset.mu);
      s.read("k", c.dataset.k);
      s.done();
    }
    {
      Section s = root.child("init");
      std::string kind = enum_name(c.init.kind, kInitKinds);
      s.read("kind", kind);
      c.init.kind = parse_enum(s.key_path("kind"), kind, kInitKinds);
      s.read("theta", c.init.theta);
      s.read("alpha", c.init.alpha);
      s.read("warm_eta", c.init.warm_eta);
      s.read("warm_loss", c.init.warm_loss);
      s.done();
    }
    {
      Section s = root.child("optimizer");
      auto& o = c.optimizer;
      s.read("beta", o.beta);
      std::string sched = enum_name(o.schedule, kScheduleKinds);
      s.read("schedule", sched);
      o.schedule = parse_enum(s.key_path("schedule"), sched, kScheduleKinds);
      s.read("eta", o.eta);
      s.read("eta_i", o.eta_i);
      s.read("eta_f", o.eta_f);
      s.read("warmup_steps", o.warmup_steps);
      s.read("eta_low", o.eta_low);
      s.read("eta_high", o.eta_high);
      s.read("switch_step", o.switch_step);
      s.read("terminate_warmup_on_mss_cross", o.terminate_warmup_on_mss_cross);
      std::string sw = optim::to_string(o.switch_mode);
      s.read("switch", sw);
      try {
        o.switch_mode = optim::switch_mode_from_string(sw);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(s.key_path("switch") + ": " + e.what());
      }
      s.read("switch_beta", o.switch_beta);
      s.done();
    }
    {
      Section s = root.child("run");
      auto& r = c.run;
      s.read("steps", r.steps);
      s.read("record_every", r.record_every);
      s.read("probe_every", r.probe_every);
      s.read("record_params", r.record_params);
      s.read("tol", r.tol);
      s.read("max_power_iters", r.max_power_iters);
      s.read("divergence_threshold", r.divergence_threshold);
      s.done();
    }
    {
      Section s = root.child("sweep");
      auto& w = c.sweep;
      s.read("alphas", w.alphas);
      s.read("eta_fs", w.eta_fs);
      s.read("warmup_per_eta", w.warmup_per_eta);
      s.read("post_warmup_factor", w.post_warmup_factor);
      s.read("probe_every", w.probe_every);
      s.read("stop_loss", w.stop_loss);
      s.read("stop_rtol", w.stop_rtol);
      s.read("alpha_bar_fraction", w.alpha_bar_fraction);
      s.done();
    }
    {
      Section s = root.child("scenarios");
      s.read("epsilon", c.scenarios.epsilon);
      s.read("beta", c.scenarios.beta);
      s.done();
    }
    {
      Section s = root.child("beta_sweep");
      s.read("betas", c.beta_sweep.betas);
      s.read("eta_gd", c.beta_sweep.eta_gd);
      s.read("epsilon", c.beta_sweep.epsilon);
      s.done();
    }
    {
      Section s = root.child("detector");
      s.read("kappa", c.detector.kappa);
      s.read("rho", c.detector.rho);
      s.read("loss_floor", c.detector.loss_floor);
      s.done();
    }
    {
      Section s = root.child("verify");
      s.read("random_starts", c.verify.random_starts);
      s.read("include_ldn", c.verify.include_ldn);
      s.done();
    }
    {
      Section s = root.child("seeds");
      s.read("dataset", c.seeds.dataset);
      s.read("power", c.seeds.power);
      s.read("checks", c.seeds.checks);
      s.done();
    }
    {
      Section s = root.child("output");
      s.read("dir", c.output_dir);
      s.read("threads", c.threads);
      s.done();
    }
    root.done();
  }
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  const auto& o = c.optimizer;
  require(o.beta >= 0.0 && o.beta < 1.0, "optimizer.beta: beta must be in [0,1)");
  require(o.eta > 0.0, "optimizer.eta: must be > 0");
  require(o.eta_i > 0.0 && o.eta_f > 0.0, "optimizer.eta_i/eta_f: must be > 0");
  require(o.eta_i <= o.eta_f, "optimizer.eta_i: must not exceed eta_f");
  require(o.warmup_steps >= 1, "optimizer.warmup_steps: must be >= 1");
  require(o.eta_low > 0.0 && o.eta_high > 0.0, "optimizer.eta_low/eta_high: must be > 0");
  require(o.switch_step >= 0, "optimizer.switch_step: must be >= 0");
  if (o.switch_mode != optim::SwitchMode::None) {
    require(o.switch_beta > 0.0 && o.switch_beta < 1.0, "optimizer.switch_beta: must be in (0,1)");
    const double expected = o.switch_mode == optim::SwitchMode::GdThenPhb ? 0.0 : o.switch_beta;
    require(o.beta == expected, "optimizer.beta: must be " + io::format_double(expected) + " for switch " +
                                    optim::to_string(o.switch_mode));
  }

  const auto& r = c.run;
  require(r.steps >= 1, "run.steps: must be >= 1");
  require(r.record_every >= 1, "run.record_every: must be >= 1");
  require(r.probe_every >= 0, "run.probe_every: must be >= 0");
  require(r.tol > 0.0, "run.tol: must be > 0");
  require(r.max_power_iters >= 1, "run.max_power_iters: must be >= 1");
  require(r.divergence_threshold > 0.0, "run.divergence_threshold: must be > 0");

  const auto& d = c.dataset;
  require(d.n >= 1 && d.d >= 1, "dataset.n/d: must be >= 1");
  require(d.sigma2 > 0.0, "dataset.sigma2: must be > 0");
  require(d.k >= 1 && d.k <= d.d, "dataset.k: must be in [1, d]");

  const auto& i = c.init;
  if (i.kind == InitKind::Explicit && !i.theta.empty()) {
    const std::size_t dim = c.model == ModelKind::Ldn ? 2 * static_cast<std::size_t>(d.d) : 2;
    require(i.theta.size() == dim, "init.theta: expected " + std::to_string(dim) + " values");
  }
  require(i.kind == InitKind::Explicit || c.model == ModelKind::Ldn, "init.kind: alpha/warm_start need model ldn");
  require(i.alpha >= 0.0, "init.alpha: must be >= 0");
  require(i.warm_eta > 0.0 && i.warm_loss > 0.0, "init.warm_eta/warm_loss: must be > 0");

  const auto& w = c.sweep;
  require(std::is_sorted(w.alphas.begin(), w.alphas.end()), "sweep.alphas: must be ascending");
  require(std::all_of(w.alphas.begin(), w.alphas.end(), [](double a) { return a >= 0.0; }),
          "sweep.alphas: must be >= 0");
  require(std::all_of(w.eta_fs.begin(), w.eta_fs.end(), [](double e) { return e > 0.0; }),
          "sweep.eta_fs: must be > 0");
  require(w.warmup_per_eta > 0.0, "sweep.warmup_per_eta: must be > 0");
  require(w.post_warmup_factor >= 0, "sweep.post_warmup_factor: must be >= 0");
  require(w.probe_every >= 1, "sweep.probe_every: must be >= 1");
  require(w.alpha_bar_fraction > 0.0, "sweep.alpha_bar_fraction: must be > 0");

  require(c.scenarios.epsilon > 0.0 && c.scenarios.epsilon < 2.0, "scenarios.epsilon: must be in (0,2)");
  require(c.scenarios.beta >= 0.0 && c.scenarios.beta < 1.0, "scenarios.beta: beta must be in [0,1)");
  require(std::all_of(c.beta_sweep.betas.begin(), c.beta_sweep.betas.end(),
                      [](double b) { return b >= 0.0 && b < 1.0; }),
          "beta_sweep.betas: beta must be in [0,1)");
  require(c.beta_sweep.eta_gd > 0.0, "beta_sweep.eta_gd: must be > 0");
  require(c.beta_sweep.epsilon > 0.0 && c.beta_sweep.epsilon < 2.0, "beta_sweep.epsilon: must be in (0,2)");
  require(c.detector.kappa > 1.0, "detector.kappa: must be > 1");
  require(c.detector.rho >= 0.0, "detector.rho: must be >= 0");
  require(c.verify.random_starts >= 1, "verify.random_starts: must be >= 1");
  require(c.threads >= 1, "output.threads: must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config: malformed JSON");
    return from_json(doc);
  }
  return from_json(parse_ini(text));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

json to_json(const ExperimentConfig& c) {
  const auto& o = c.optimizer;
  const auto& r = c.run;
  const auto& w = c.sweep;
  return {
      {"model", {{"kind", to_string(c.model)}}},
      {"dataset", {{"n", c.dataset.n}, {"d", c.dataset.d}, {"sigma2", c.dataset.sigma2}, {"mu", c.dataset.mu},
                   {"k", c.dataset.k}}},
      {"init", {{"kind", enum_name(c.init.kind, kInitKinds)}, {"theta", c.init.theta}, {"alpha", c.init.alpha},
                {"warm_eta", c.init.warm_eta}, {"warm_loss", c.init.warm_loss}}},
      {"optimizer", {{"beta", o.beta}, {"schedule", enum_name(o.schedule, kScheduleKinds)}, {"eta", o.eta},
                     {"eta_i", o.eta_i}, {"eta_f", o.eta_f}, {"warmup_steps", o.warmup_steps},
                     {"eta_low", o.eta_low}, {"eta_high", o.eta_high}, {"switch_step", o.switch_step},
                     {"terminate_warmup_on_mss_cross", o.terminate_warmup_on_mss_cross},
                     {"switch", optim::to_string(o.switch_mode)}, {"switch_beta", o.switch_beta}}},
      {"run", {{"steps", r.steps}, {"record_every", r.record_every}, {"probe_every", r.probe_every},
               {"record_params", r.record_params}, {"tol", r.tol}, {"max_power_iters", r.max_power_iters},
               {"divergence_threshold", r.divergence_threshold}}},
      {"sweep", {{"alphas", w.alphas}, {"eta_fs", w.eta_fs}, {"warmup_per_eta", w.warmup_per_eta},
                 {"post_warmup_factor", w.post_warmup_factor}, {"probe_every", w.probe_every},
                 {"stop_loss", w.stop_loss}, {"stop_rtol", w.stop_rtol},
                 {"alpha_bar_fraction", w.alpha_bar_fraction}}},
      {"scenarios", {{"epsilon", c.scenarios.epsilon}, {"beta", c.scenarios.beta}}},
      {"beta_sweep", {{"betas", c.beta_sweep.betas}, {"eta_gd", c.beta_sweep.eta_gd},
                      {"epsilon", c.beta_sweep.epsilon}}},
      {"detector", {{"kappa", c.detector.kappa}, {"rho", c.detector.rho}, {"loss_floor", c.detector.loss_floor}}},
      {"verify", {{"random_starts", c.verify.random_starts}, {"include_ldn", c.verify.include_ldn}}},
      {"seeds", {{"dataset", c.seeds.dataset}, {"power", c.seeds.power}, {"checks", c.seeds.checks}}},
      {"output", {{"dir", c.output_dir}, {"threads", c.threads}}},
  };
}

std::string config_hash(const ExperimentConfig& config) {
  json doc = to_json(config);
  // Where results land and how many workers produce them does not change the results.
  doc["output"].erase("dir");
  doc["output"].erase("threads");
  return io::fnv1a_hex(doc.dump());
}

std::shared_ptr<const models::RegressionDataset> build_dataset(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  return std::make_shared<const models::RegressionDataset>(models::generate_sparse_regression(
      d.n, d.d, d.sigma2, Eigen::VectorXd::Constant(d.d, d.mu), d.k, c.seeds.dataset));
}

models::Objective build_objective(const ExperimentConfig& c,
                                  const std::shared_ptr<const models::RegressionDataset>& data) {
  switch (c.model) {
    case ModelKind::ScalarRelu:
      return models::scalar_relu_objective();
    case ModelKind::Simple2D:
      return models::simple2d_objective();
    case ModelKind::Ldn:
      return models::ldn_objective(data);
  }
  throw ConfigError("model.kind: unsupported");
}

Eigen::VectorXd build_init(const ExperimentConfig& c, const models::RegressionDataset* data) {
  const auto& i = c.init;
  switch (i.kind) {
    case InitKind::Explicit:
      if (i.theta.empty()) throw ConfigError("init.theta: required for explicit init");
      return Eigen::Map<const Eigen::VectorXd>(i.theta.data(), static_cast<Eigen::Index>(i.theta.size()));
    case InitKind::Alpha:
      return models::DiagonalNetState::broadcast(c.dataset.d, i.alpha).flatten();
    case InitKind::WarmStart:
      if (!data) throw ConfigError("init.kind: warm_start needs a dataset");
      return experiments::warm_start_ldn(*data, i.alpha, i.warm_eta, i.warm_loss).state.flatten();
  }
  throw ConfigError("init.kind: unsupported");
}

optim::RunOptions build_run_options(const ExperimentConfig& c) {
  const auto& o = c.optimizer;
  optim::RunOptions ro;
  switch (o.schedule) {
    case ScheduleKind::Constant:
      ro.schedule = optim::Schedule::constant(o.eta);
      break;
    case ScheduleKind::LinearWarmup:
      ro.schedule = optim::Schedule::linear_warmup(o.eta_i, o.eta_f, o.warmup_steps);
      break;
    case ScheduleKind::StepWarmup:
      ro.schedule = optim::Schedule::step_warmup(o.eta_low, o.eta_high, o.switch_step);
      break;
  }
  ro.schedule.terminate_warmup_on_mss_cross = o.terminate_warmup_on_mss_cross;
  ro.beta = o.beta;
  ro.steps = c.run.steps;
  ro.record_every = c.run.record_every;
  ro.probe_every = c.run.probe_every;
  ro.record_params = c.run.record_params;
  ro.divergence_threshold = c.run.divergence_threshold;
  if (o.switch_mode != optim::SwitchMode::None) {
    ro.switch_policy = {o.switch_mode, o.switch_beta, optim::Crossing::Downward};
  }
  return ro;
}

spectral::PowerOptions build_power_options(const ExperimentConfig& c) {
  spectral::PowerOptions p;
  p.tol = c.run.tol;
  p.max_iters = c.run.max_power_iters;
  p.seed = c.seeds.power;
  return p;
}

experiments::SweepOptions build_sweep_options(const ExperimentConfig& c) {
  experiments::SweepOptions s;
  s.alphas = c.sweep.alphas;
  s.eta_fs = c.sweep.eta_fs;
  s.beta = c.optimizer.beta;
  s.eta_i = c.optimizer.eta_i;
  s.warmup_per_eta = c.sweep.warmup_per_eta;
  s.post_warmup_factor = c.sweep.post_warmup_factor;
  s.probe_every = c.sweep.probe_every;
  s.stop_loss = c.sweep.stop_loss;
  s.stop_rtol = c.sweep.stop_rtol;
  s.terminate_warmup_on_mss_cross = c.optimizer.terminate_warmup_on_mss_cross;
  s.detector = c.detector;
  s.alpha_bar_fraction = c.sweep.alpha_bar_fraction;
  s.power = build_power_options(c);
  s.threads = c.threads;
  return s;
}

}  // namespace catapult::config
