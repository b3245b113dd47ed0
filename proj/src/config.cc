#include "sfeuot/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sfeuot {

using nlohmann::json;

namespace {

const std::set<std::string>& known_datasets() {
  static const std::set<std::string> names = {"gaussian_pair", "gauss_to_8gauss", "moon_to_spiral"};
  return names;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void TrainConfig::validate() const {
  require(known_datasets().count(dataset) == 1, "unknown dataset '" + dataset + "'");
  require(data_dim >= 1, "data_dim must be >= 1");
  if (dataset != "gaussian_pair") require(data_dim == 2, "data_dim must be 2 for " + dataset);
  require(component_std >= 0.0 && std::isfinite(component_std), "component_std must be >= 0");
  if (!mode_weights.empty()) {
    require(dataset == "gauss_to_8gauss", "mode_weights only apply to gauss_to_8gauss");
    require(mode_weights.size() == 8, "mode_weights needs 8 entries");
    double total = 0.0;
    for (double w : mode_weights) {
      require(w >= 0.0 && std::isfinite(w), "mode_weights must be >= 0");
      total += w;
    }
    require(total > 0.0, "mode_weights must not all be zero");
  }
  require(finite_positive(psi.scale), "psi.scale must be positive");
  require(n_steps >= 2, "n_steps must be >= 2");
  require(n_probes >= 1, "n_probes must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(std::isfinite(lr_g) && lr_g >= 0.0, "lr_g must be >= 0");
  require(std::isfinite(lr_v) && lr_v >= 0.0, "lr_v must be >= 0");
  require(std::isfinite(lr_final) && lr_final >= 0.0, "lr_final must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "betas[0] must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "betas[1] must lie in [0, 1)");
  if (grad_clip) require(finite_positive(*grad_clip), "grad_clip must be positive");
  require(hidden_dim >= 1, "hidden_dim must be >= 1");
  require(hidden_layers >= 1, "hidden_layers must be >= 1");
  require(eval_samples >= 2, "eval_samples must be >= 2");
  try {
    loss_weights().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

LossWeights TrainConfig::loss_weights() const {
  LossWeights w;
  w.alpha = alpha;
  w.sigma = sigma;
  w.lambda_g = lambda_g;
  w.lambda_d = lambda_d;
  w.p = p;
  w.r1_coeff = r1_coeff;
  return w;
}

std::size_t TrainConfig::eval_interval() const {
  if (eval_every > 0) return eval_every;
  return std::max<std::size_t>(total_iters / 100, 100);
}

namespace {

json to_json(const TrainConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["data_dim"] = c.data_dim;
  j["data_seed"] = c.data_seed;
  j["component_std"] = c.component_std;
  j["mode_weights"] = c.mode_weights;
  j["sigma"] = c.sigma;
  j["alpha"] = c.alpha;
  j["psi"] = {{"kind", entropy_kind_name(c.psi.kind)}, {"scale", c.psi.scale}};
  j["n_steps"] = c.n_steps;
  j["time_dist"] = time_kind_name(c.time_dist);
  j["lambda_g"] = c.lambda_g;
  j["lambda_d"] = c.lambda_d;
  j["p"] = c.p;
  j["r1_coeff"] = c.r1_coeff;
  j["n_probes"] = c.n_probes;
  j["batch_size"] = c.batch_size;
  j["total_iters"] = c.total_iters;
  j["lr_g"] = c.lr_g;
  j["lr_v"] = c.lr_v;
  j["lr_final"] = c.lr_final;
  j["betas"] = {c.beta1, c.beta2};
  j["grad_clip"] = c.grad_clip ? json(*c.grad_clip) : json(nullptr);
  j["inner_updates_per_outer"] = c.inner_updates_per_outer;
  j["resample_t_inner"] = c.resample_t_inner;
  j["seed"] = c.seed;
  j["hidden_dim"] = c.hidden_dim;
  j["hidden_layers"] = c.hidden_layers;
  j["eval_every"] = c.eval_every;
  j["eval_samples"] = c.eval_samples;
  j["record_wall_time"] = c.record_wall_time;
  return j;
}

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError("config: field '" + key + "' must be a nonnegative integer");
      }
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("config: field '" + key + "' must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config: field '" + key + "' must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("config: field '" + key + "' must be a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: field '" + key + "': " + e.what());
  }
}

EntropySpec parse_psi(const json& v) {
  try {
    if (v.is_string()) return parse_entropy_kind(v.get<std::string>());
    if (!v.is_object()) throw ConfigError("config: field 'psi' must be a string or an object");
    std::string kind;
    double scale = 5.0;
    for (const auto& [k, val] : v.items()) {
      if (k == "kind") {
        kind = get_as<std::string>(val, "psi.kind");
      } else if (k == "scale") {
        scale = get_as<double>(val, "psi.scale");
      } else {
        throw ConfigError("config: unknown key 'psi." + k + "'");
      }
    }
    if (kind.empty()) throw ConfigError("config: field 'psi.kind' is required");
    return parse_entropy_kind(kind, scale);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

TrainConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");

  TrainConfig c;
  for (const auto& [key, v] : doc.items()) {
    if (key == "dataset") c.dataset = get_as<std::string>(v, key);
    else if (key == "data_dim") c.data_dim = get_as<std::size_t>(v, key);
    else if (key == "data_seed") c.data_seed = get_as<std::uint64_t>(v, key);
    else if (key == "component_std") c.component_std = get_as<double>(v, key);
    else if (key == "mode_weights") {
      if (!v.is_array()) throw ConfigError("config: field 'mode_weights' must be an array");
      c.mode_weights.clear();
      for (const auto& e : v) c.mode_weights.push_back(get_as<double>(e, key));
    }
    else if (key == "sigma") c.sigma = get_as<double>(v, key);
    else if (key == "alpha") c.alpha = get_as<double>(v, key);
    else if (key == "psi") c.psi = parse_psi(v);
    else if (key == "n_steps") c.n_steps = get_as<std::size_t>(v, key);
    else if (key == "time_dist") {
      try {
        c.time_dist = parse_time_kind(get_as<std::string>(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    else if (key == "lambda_g") c.lambda_g = get_as<double>(v, key);
    else if (key == "lambda_d") c.lambda_d = get_as<double>(v, key);
    else if (key == "p") c.p = get_as<double>(v, key);
    else if (key == "r1_coeff") c.r1_coeff = get_as<double>(v, key);
    else if (key == "n_probes") c.n_probes = get_as<std::size_t>(v, key);
    else if (key == "batch_size") c.batch_size = get_as<std::size_t>(v, key);
    else if (key == "total_iters") c.total_iters = get_as<std::size_t>(v, key);
    else if (key == "lr_g") c.lr_g = get_as<double>(v, key);
    else if (key == "lr_v") c.lr_v = get_as<double>(v, key);
    else if (key == "lr_final") c.lr_final = get_as<double>(v, key);
    else if (key == "betas") {
      if (!v.is_array() || v.size() != 2) throw ConfigError("config: field 'betas' must be [b1, b2]");
      c.beta1 = get_as<double>(v[0], "betas[0]");
      c.beta2 = get_as<double>(v[1], "betas[1]");
    }
    else if (key == "grad_clip") {
      if (v.is_null()) c.grad_clip.reset();
      else c.grad_clip = get_as<double>(v, key);
    }
    else if (key == "inner_updates_per_outer") c.inner_updates_per_outer = get_as<std::size_t>(v, key);
    else if (key == "resample_t_inner") c.resample_t_inner = get_as<bool>(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "hidden_dim") c.hidden_dim = get_as<std::size_t>(v, key);
    else if (key == "hidden_layers") c.hidden_layers = get_as<std::size_t>(v, key);
    else if (key == "eval_every") c.eval_every = get_as<std::size_t>(v, key);
    else if (key == "eval_samples") c.eval_samples = get_as<std::size_t>(v, key);
    else if (key == "record_wall_time") c.record_wall_time = get_as<bool>(v, key);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (in '" + path.string() + "')");
  }
}

std::string config_to_json(const TrainConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string config_hash(const TrainConfig& cfg) {
  const std::string canon = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sfeuot
