#include "kanlab/config.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kanlab/error.hpp"
#include "kanlab/io.hpp"

namespace kanlab {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(what + ": expected a finite number, got '" + s + "'");
  }
  return v;
}

long long to_integer(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(what + ": expected an integer, got '" + s + "'");
  }
  return v;
}

std::size_t to_count(const std::string& raw, const std::string& what) {
  const long long v = to_integer(raw, what);
  if (v < 0) throw ConfigError(what + " must be nonnegative");
  return static_cast<std::size_t>(v);
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"system", {"name", "mu", "K", "x_p", "y_p", "x_q", "y_q", "N_0", "P_0", "x0"}},
      {"data", {"n", "transient", "dt", "substeps", "split", "seed"}},
      {"model", {"shape", "k", "G"}},
      {"training",
       {"steps", "lr", "lambda", "lambda_entropy", "optimizer", "lbfgs_iterations",
        "lbfgs_evaluations"}},
      {"diagnostics",
       {"bins", "radii", "lyapunov_steps", "flow_time", "orbit", "settle", "corr_points",
        "spectrum_component", "lo", "hi", "pad"}},
      {"output", {"dir"}},
  };
  return keys;
}

const std::set<std::string> kIkedaOnly{"mu"};
const std::set<std::string> kFoodChainOnly{"K", "x_p", "y_p", "x_q", "y_q", "N_0", "P_0"};

}  // namespace

std::vector<double> parse_real_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_real(item, what));
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long long v = to_integer(item, what);
    if (v < -2147483647LL || v > 2147483647LL) throw ConfigError(what + ": value out of range");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

Vec default_initial_state(const std::string& system) {
  if (system == "ikeda") return Vec::Constant(2, 0.1);
  if (system == "food_chain") return (Vec(3) << 0.7, 0.2, 1.0).finished();
  throw ConfigError("unknown system '" + system + "'");
}

double default_transient(const std::string& system) {
  if (system == "ikeda") return 1000.0;
  if (system == "food_chain") return 500.0;
  throw ConfigError("unknown system '" + system + "'");
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  const auto& allowed = allowed_keys();
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw ConfigError(origin + ": key '" + section + "' outside any section");
    }
    const auto it = allowed.find(section);
    if (it == allowed.end()) throw ConfigError(origin + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!value.empty()) throw ConfigError(origin + ": nested key in [" + section + "]");
      if (!it->second.count(key)) {
        throw ConfigError(origin + ": unknown key '" + key + "' in [" + section + "]");
      }
    }
  }
  for (const char* block : {"system", "data", "model", "training", "diagnostics"}) {
    if (tree.find(block) == tree.not_found()) {
      throw ConfigError(origin + ": missing [" + std::string(block) + "] block");
    }
  }

  ExperimentConfig cfg;
  const pt::ptree& sys = tree.get_child("system");
  const pt::ptree& data = tree.get_child("data");
  const pt::ptree& model = tree.get_child("model");
  const pt::ptree& training = tree.get_child("training");
  const pt::ptree& diag = tree.get_child("diagnostics");

  auto get = [](const pt::ptree& section, const char* key) -> std::optional<std::string> {
    if (auto v = section.get_optional<std::string>(key)) return trim(*v);
    return std::nullopt;
  };
  auto name = [&](const char* section, const char* key) {
    return origin + ": " + section + "." + key;
  };

  // [system]
  auto sys_name = get(sys, "name");
  if (!sys_name) throw ConfigError(name("system", "name") + " is required");
  cfg.system.name = *sys_name;
  if (cfg.system.name != "ikeda" && cfg.system.name != "food_chain") {
    throw ConfigError(origin + ": unknown system '" + cfg.system.name + "'");
  }
  const auto& foreign = cfg.system.name == "ikeda" ? kFoodChainOnly : kIkedaOnly;
  for (const auto& [key, value] : sys) {
    if (foreign.count(key)) {
      throw ConfigError(origin + ": key '" + key + "' does not apply to system " +
                        cfg.system.name);
    }
  }
  auto real = [&](const pt::ptree& section, const char* sname, const char* key, double& dst) {
    if (auto v = get(section, key)) dst = to_real(*v, name(sname, key));
  };
  real(sys, "system", "mu", cfg.system.ikeda.mu);
  real(sys, "system", "K", cfg.system.food_chain.K);
  real(sys, "system", "x_p", cfg.system.food_chain.x_p);
  real(sys, "system", "y_p", cfg.system.food_chain.y_p);
  real(sys, "system", "x_q", cfg.system.food_chain.x_q);
  real(sys, "system", "y_q", cfg.system.food_chain.y_q);
  real(sys, "system", "N_0", cfg.system.food_chain.N_0);
  real(sys, "system", "P_0", cfg.system.food_chain.P_0);
  if (auto v = get(sys, "x0")) cfg.system.x0 = parse_real_list(*v, name("system", "x0"));

  // [data]
  if (auto v = get(data, "n")) cfg.data.n = to_count(*v, name("data", "n"));
  real(data, "data", "transient", cfg.data.transient);
  real(data, "data", "dt", cfg.data.dt);
  if (auto v = get(data, "substeps")) {
    cfg.data.substeps = static_cast<int>(to_integer(*v, name("data", "substeps")));
  }
  real(data, "data", "split", cfg.data.split);
  if (auto v = get(data, "seed")) cfg.data.seed = to_count(*v, name("data", "seed"));

  // [model]
  auto shape = get(model, "shape");
  if (!shape) throw ConfigError(name("model", "shape") + " is required");
  cfg.model.shape = parse_int_list(*shape, name("model", "shape"));
  if (auto v = get(model, "k")) cfg.model.k = static_cast<int>(to_integer(*v, name("model", "k")));
  if (auto v = get(model, "G")) cfg.model.G = static_cast<int>(to_integer(*v, name("model", "G")));

  // [training]
  if (auto v = get(training, "steps")) cfg.training.steps = to_count(*v, name("training", "steps"));
  real(training, "training", "lr", cfg.training.lr);
  real(training, "training", "lambda", cfg.training.lambda);
  real(training, "training", "lambda_entropy", cfg.training.lambda_entropy);
  if (auto v = get(training, "optimizer")) {
    try {
      cfg.training.optimizer = parse_optimizer(*v);
    } catch (const Error& e) {
      throw ConfigError(name("training", "optimizer") + ": " + e.what());
    }
  }
  if (auto v = get(training, "lbfgs_iterations")) {
    cfg.training.lbfgs_iterations =
        static_cast<int>(to_integer(*v, name("training", "lbfgs_iterations")));
  }
  if (auto v = get(training, "lbfgs_evaluations")) {
    cfg.training.lbfgs_evaluations =
        static_cast<int>(to_integer(*v, name("training", "lbfgs_evaluations")));
  }

  // [diagnostics]
  if (auto v = get(diag, "bins")) {
    cfg.diagnostics.bins = parse_int_list(*v, name("diagnostics", "bins"));
  }
  if (auto v = get(diag, "radii")) {
    cfg.diagnostics.radii = static_cast<int>(to_integer(*v, name("diagnostics", "radii")));
  }
  if (auto v = get(diag, "lyapunov_steps")) {
    cfg.diagnostics.lyapunov_steps = to_count(*v, name("diagnostics", "lyapunov_steps"));
  }
  real(diag, "diagnostics", "flow_time", cfg.diagnostics.flow_time);
  if (auto v = get(diag, "orbit")) {
    cfg.diagnostics.orbit = to_count(*v, name("diagnostics", "orbit"));
  }
  if (auto v = get(diag, "settle")) {
    cfg.diagnostics.settle = to_count(*v, name("diagnostics", "settle"));
  }
  if (auto v = get(diag, "corr_points")) {
    cfg.diagnostics.corr_points = to_count(*v, name("diagnostics", "corr_points"));
  }
  if (auto v = get(diag, "spectrum_component")) {
    cfg.diagnostics.spectrum_component =
        static_cast<int>(to_integer(*v, name("diagnostics", "spectrum_component")));
  }
  if (auto v = get(diag, "lo")) cfg.diagnostics.lo = parse_real_list(*v, name("diagnostics", "lo"));
  if (auto v = get(diag, "hi")) cfg.diagnostics.hi = parse_real_list(*v, name("diagnostics", "hi"));
  real(diag, "diagnostics", "pad", cfg.diagnostics.pad);

  // [output]
  if (auto out = tree.get_child_optional("output")) {
    if (auto v = get(*out, "dir")) cfg.output_dir = *v;
  }

  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string());
}

void ExperimentConfig::validate() const {
  const int d = system.name == "ikeda" ? 2 : system.name == "food_chain" ? 3 : 0;
  if (d == 0) throw ConfigError("unknown system '" + system.name + "'");
  if (system.name == "ikeda" && !(system.ikeda.mu > 0.0)) {
    throw ConfigError("system.mu must be positive");
  }
  if (system.name == "food_chain") {
    const auto& p = system.food_chain;
    for (double v : {p.K, p.x_p, p.y_p, p.x_q, p.y_q, p.N_0, p.P_0}) {
      if (!(v > 0.0)) throw ConfigError("food-chain parameters must be positive");
    }
  }
  if (!system.x0.empty() && static_cast<int>(system.x0.size()) != d) {
    throw ConfigError("system.x0 must have " + std::to_string(d) + " entries");
  }
  if (data.n < 2) throw ConfigError("data.n must be at least 2");
  if (!(data.dt > 0.0)) throw ConfigError("data.dt must be positive");
  if (data.substeps < 10) throw ConfigError("data.substeps must be at least 10");
  if (!(data.split > 0.0 && data.split < 1.0)) throw ConfigError("data.split must lie in (0, 1)");
  if (model.shape.size() < 2 || model.shape.front() != d || model.shape.back() != d) {
    throw ConfigError("model.shape must start and end with the system dimension " +
                      std::to_string(d));
  }
  try {
    validate_shape(model.shape);
    SplineSpec{model.k, model.G, -1.0, 1.0}.validate();
    training_config().validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (diagnostics.bins.empty() || (diagnostics.bins.size() != 1 &&
                                   static_cast<int>(diagnostics.bins.size()) != d)) {
    throw ConfigError("diagnostics.bins must have one entry or one per dimension");
  }
  for (int b : diagnostics.bins) {
    if (b < 1) throw ConfigError("diagnostics.bins must be positive");
  }
  if (diagnostics.radii < 2) throw ConfigError("diagnostics.radii must be at least 2");
  if (diagnostics.lyapunov_steps < 10) throw ConfigError("diagnostics.lyapunov_steps too small");
  if (!(diagnostics.flow_time > 0.0)) throw ConfigError("diagnostics.flow_time must be positive");
  if (diagnostics.orbit < 256) throw ConfigError("diagnostics.orbit must be at least 256");
  if (diagnostics.corr_points < 2) throw ConfigError("diagnostics.corr_points must be at least 2");
  if (diagnostics.spectrum_component < 0 || diagnostics.spectrum_component >= d) {
    throw ConfigError("diagnostics.spectrum_component out of range");
  }
  if (diagnostics.lo.size() != diagnostics.hi.size() ||
      (!diagnostics.lo.empty() && static_cast<int>(diagnostics.lo.size()) != d)) {
    throw ConfigError("diagnostics.lo and diagnostics.hi need one entry per dimension");
  }
  for (std::size_t i = 0; i < diagnostics.lo.size(); ++i) {
    if (!(diagnostics.lo[i] < diagnostics.hi[i])) {
      throw ConfigError("diagnostics.lo must be below diagnostics.hi");
    }
  }
  if (!(diagnostics.pad >= 0.0)) throw ConfigError("diagnostics.pad must be nonnegative");
}

DynamicalSystem ExperimentConfig::make_system() const {
  return system.name == "ikeda" ? make_ikeda(system.ikeda) : make_food_chain(system.food_chain);
}

FlowSampling ExperimentConfig::sampling() const { return {data.dt, data.substeps}; }

Vec ExperimentConfig::initial_state() const {
  if (system.x0.empty()) return default_initial_state(system.name);
  return Eigen::Map<const Vec>(system.x0.data(), static_cast<Eigen::Index>(system.x0.size()));
}

double ExperimentConfig::transient() const {
  return data.transient < 0.0 ? default_transient(system.name) : data.transient;
}

TrainingConfig ExperimentConfig::training_config() const {
  TrainingConfig tc;
  tc.steps = training.steps;
  tc.learning_rate = training.lr;
  tc.lambda = training.lambda;
  tc.lambda_entropy = training.lambda_entropy;
  tc.seed = data.seed;
  tc.split_fraction = data.split;
  tc.optimizer = training.optimizer;
  tc.lbfgs_iterations = training.lbfgs_iterations;
  tc.lbfgs_evaluations = training.lbfgs_evaluations;
  tc.spec = SplineSpec{model.k, model.G, -1.0, 1.0};
  tc.shape = model.shape;
  return tc;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  auto reals = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
  };
  auto ints = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  const Vec start = initial_state();
  const std::vector<double> x0(start.data(), start.data() + start.size());
  out << "system.name=" << system.name << '\n';
  if (system.name == "ikeda") {
    out << "system.mu=" << format_double(system.ikeda.mu) << '\n';
  } else {
    const auto& p = system.food_chain;
    out << "system.K=" << format_double(p.K) << '\n'
        << "system.x_p=" << format_double(p.x_p) << '\n'
        << "system.y_p=" << format_double(p.y_p) << '\n'
        << "system.x_q=" << format_double(p.x_q) << '\n'
        << "system.y_q=" << format_double(p.y_q) << '\n'
        << "system.N_0=" << format_double(p.N_0) << '\n'
        << "system.P_0=" << format_double(p.P_0) << '\n';
  }
  out << "system.x0=" << reals(x0) << '\n'
      << "data.n=" << data.n << '\n'
      << "data.transient=" << format_double(transient()) << '\n'
      << "data.dt=" << format_double(data.dt) << '\n'
      << "data.substeps=" << data.substeps << '\n'
      << "data.split=" << format_double(data.split) << '\n'
      << "data.seed=" << data.seed << '\n'
      << "model.shape=" << ints(model.shape) << '\n'
      << "model.k=" << model.k << '\n'
      << "model.G=" << model.G << '\n'
      << "training.steps=" << training.steps << '\n'
      << "training.lr=" << format_double(training.lr) << '\n'
      << "training.lambda=" << format_double(training.lambda) << '\n'
      << "training.lambda_entropy=" << format_double(training.lambda_entropy) << '\n'
      << "training.optimizer=" << to_string(training.optimizer) << '\n'
      << "training.lbfgs_iterations=" << training.lbfgs_iterations << '\n'
      << "training.lbfgs_evaluations=" << training.lbfgs_evaluations << '\n'
      << "diagnostics.bins=" << ints(diagnostics.bins) << '\n'
      << "diagnostics.radii=" << diagnostics.radii << '\n'
      << "diagnostics.lyapunov_steps=" << diagnostics.lyapunov_steps << '\n'
      << "diagnostics.flow_time=" << format_double(diagnostics.flow_time) << '\n'
      << "diagnostics.orbit=" << diagnostics.orbit << '\n'
      << "diagnostics.settle=" << diagnostics.settle << '\n'
      << "diagnostics.corr_points=" << diagnostics.corr_points << '\n'
      << "diagnostics.spectrum_component=" << diagnostics.spectrum_component << '\n'
      << "diagnostics.lo=" << reals(diagnostics.lo) << '\n'
      << "diagnostics.hi=" << reals(diagnostics.hi) << '\n'
      << "diagnostics.pad=" << format_double(diagnostics.pad) << '\n';
  return out.str();
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical()); }

}  // namespace kanlab
