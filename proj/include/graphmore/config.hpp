#pragma once

// Training configuration and its "dotted.key = value" text format.
//
//   # comment
//   task = lp
//   experts.init_curvatures = [-3, -1, 0, 1, 3]
//   loss.lambda = 0.1
//
// Values are JSON scalars or arrays; bare words are read as strings.

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphmore/diffcore.hpp"
#include "graphmore/mixture.hpp"

namespace graphmore {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Task { link_prediction, node_classification };

inline std::string to_string(Task t) { return t == Task::link_prediction ? "lp" : "nc"; }

inline Task parse_task(const std::string& s) {
  if (s == "lp" || s == "link-prediction" || s == "link_prediction") return Task::link_prediction;
  if (s == "nc" || s == "node-classification" || s == "node_classification") return Task::node_classification;
  throw ConfigError("unknown task '" + s + "' (expected lp or nc)");
}

struct TrainConfig {
  Task task = Task::link_prediction;
  double lambda = 0.1;
  double lr = 0.01;
  double weight_decay = 5e-4;
  std::size_t epochs = 200;
  std::size_t patience = 100;
  std::uint64_t seed = 0;
  std::vector<double> init_curvatures{-3.0, -1.0, 0.0, 1.0, 3.0};
  /// 0 means: take from the feature matrix.
  std::size_t d_in = 0;
  std::size_t d_h = 32;
  /// 0 means: 32 for graphs with at most 4000 nodes, else 16.
  std::size_t d_out = 0;
  std::size_t d_t = 16;
  std::vector<std::size_t> radii{1, 2};
  std::size_t pair_budget = 100000;
  std::size_t landmarks = 512;
  FermiDirac decoder{};
  double tau = 1.0;
  std::array<double, 3> split{0.85, 0.05, 0.10};
  bool deterministic = true;
  std::size_t threads = 1;

  std::size_t n_experts() const { return init_curvatures.size(); }

  std::size_t resolved_d_out(std::size_t n_nodes) const {
    if (d_out) return d_out;
    return n_nodes <= 4000 ? 32 : 16;
  }

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("loss.lambda must be >= 0");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("optim.lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
    if (init_curvatures.empty()) throw ConfigError("experts.init_curvatures must not be empty");
    if (radii.empty()) throw ConfigError("gating.radii must not be empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (radii[i] < 1) throw ConfigError("gating.radii entries must be >= 1");
      if (i && radii[i] <= radii[i - 1]) throw ConfigError("gating.radii must be strictly ascending");
    }
    if (d_h == 0 || d_t == 0) throw ConfigError("dimensions must be positive");
    if (pair_budget == 0) throw ConfigError("distortion.pair_budget must be positive");
    if (landmarks == 0) throw ConfigError("distortion.landmarks must be positive");
    if (!(decoder.t > 0.0)) throw ConfigError("decoder.t must be positive");
    if (!(tau > 0.0)) throw ConfigError("align.tau must be positive");
    double s = 0.0;
    for (double r : split) {
      if (r < 0.0) throw ConfigError("split.ratios must be non-negative");
      s += r;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("split.ratios must sum to 1");
  }
};

namespace detail {

inline nlohmann::json parse_config_value(const std::string& raw, const std::string& key) {
  try {
    return nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    if (raw.find_first_of("[]{},\"") != std::string::npos) throw ConfigError("malformed value for '" + key + "': " + raw);
    return raw;  // bare word
  }
}

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("bad value for '" + key + "': " + v.dump());
  }
}

template <class T>
std::vector<T> get_list(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("'" + key + "' expects a list, got " + v.dump());
  std::vector<T> out;
  for (const auto& e : v) out.push_back(get_as<T>(e, key));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Keys accepted by apply_config_entry, in echo order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "task",          "seed",           "deterministic",       "threads",         "loss.lambda",
      "optim.lr",      "optim.weight_decay", "train.epochs",    "train.patience",  "experts.init_curvatures",
      "dims.d_in",     "dims.d_h",       "dims.d_out",          "dims.d_t",        "gating.radii",
      "distortion.pair_budget", "distortion.landmarks", "decoder.r_fd", "decoder.t_fd", "align.tau",
      "split.ratios"};
  return keys;
}

inline void apply_config_entry(TrainConfig& c, const std::string& key, const nlohmann::json& v) {
  using detail::get_as;
  using detail::get_list;
  if (key == "task") c.task = parse_task(get_as<std::string>(v, key));
  else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
  else if (key == "deterministic") c.deterministic = get_as<bool>(v, key);
  else if (key == "threads") c.threads = get_as<std::size_t>(v, key);
  else if (key == "loss.lambda") c.lambda = get_as<double>(v, key);
  else if (key == "optim.lr") c.lr = get_as<double>(v, key);
  else if (key == "optim.weight_decay") c.weight_decay = get_as<double>(v, key);
  else if (key == "train.epochs") c.epochs = get_as<std::size_t>(v, key);
  else if (key == "train.patience") c.patience = get_as<std::size_t>(v, key);
  else if (key == "experts.init_curvatures") c.init_curvatures = get_list<double>(v, key);
  else if (key == "dims.d_in") c.d_in = get_as<std::size_t>(v, key);
  else if (key == "dims.d_h") c.d_h = get_as<std::size_t>(v, key);
  else if (key == "dims.d_out") c.d_out = get_as<std::size_t>(v, key);
  else if (key == "dims.d_t") c.d_t = get_as<std::size_t>(v, key);
  else if (key == "gating.radii") c.radii = get_list<std::size_t>(v, key);
  else if (key == "distortion.pair_budget") c.pair_budget = get_as<std::size_t>(v, key);
  else if (key == "distortion.landmarks") c.landmarks = get_as<std::size_t>(v, key);
  else if (key == "decoder.r_fd") c.decoder.r = get_as<double>(v, key);
  else if (key == "decoder.t_fd") c.decoder.t = get_as<double>(v, key);
  else if (key == "align.tau") c.tau = get_as<double>(v, key);
  else if (key == "split.ratios") {
    auto r = get_list<double>(v, key);
    if (r.size() != 3) throw ConfigError("split.ratios expects three values");
    c.split = {r[0], r[1], r[2]};
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Applies every entry of the text onto `base`. Unknown keys are errors.
inline TrainConfig parse_config(const std::string& text, TrainConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string raw = detail::trim(line.substr(eq + 1));
    if (key.empty() || raw.empty()) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_config_entry(base, key, detail::parse_config_value(raw, key));
  }
  base.validate();
  return base;
}

inline TrainConfig load_config(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

inline nlohmann::json config_value(const TrainConfig& c, const std::string& key) {
  if (key == "task") return to_string(c.task);
  if (key == "seed") return c.seed;
  if (key == "deterministic") return c.deterministic;
  if (key == "threads") return c.threads;
  if (key == "loss.lambda") return c.lambda;
  if (key == "optim.lr") return c.lr;
  if (key == "optim.weight_decay") return c.weight_decay;
  if (key == "train.epochs") return c.epochs;
  if (key == "train.patience") return c.patience;
  if (key == "experts.init_curvatures") return c.init_curvatures;
  if (key == "dims.d_in") return c.d_in;
  if (key == "dims.d_h") return c.d_h;
  if (key == "dims.d_out") return c.d_out;
  if (key == "dims.d_t") return c.d_t;
  if (key == "gating.radii") return c.radii;
  if (key == "distortion.pair_budget") return c.pair_budget;
  if (key == "distortion.landmarks") return c.landmarks;
  if (key == "decoder.r_fd") return c.decoder.r;
  if (key == "decoder.t_fd") return c.decoder.t;
  if (key == "align.tau") return c.tau;
  if (key == "split.ratios") return c.split;
  throw ConfigError("unknown config key '" + key + "'");
}

/// Resolved configuration in the same text format parse_config reads.
inline std::string echo_config(const TrainConfig& c) {
  std::ostringstream os;
  for (const auto& k : config_keys()) os << k << " = " << config_value(c, k).dump() << "\n";
  return os.str();
}

inline nlohmann::json config_json(const TrainConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : config_keys()) j[k] = config_value(c, k);
  return j;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [k, v] : j.items()) apply_config_entry(c, k, v);
  c.validate();
  return c;
}

}  // namespace graphmore
