#pragma once

// Training configuration and its JSON form. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sfeuot/bridge.hpp"
#include "sfeuot/entropy.hpp"
#include "sfeuot/objective.hpp"

namespace sfeuot {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  // Problem. dataset is one of "gaussian_pair", "gauss_to_8gauss",
  // "moon_to_spiral".
  std::string dataset = "gauss_to_8gauss";
  std::size_t data_dim = 2;
  std::uint64_t data_seed = 7;
  double component_std = 0.04;
  std::vector<double> mode_weights;

  // Objective.
  double sigma = 0.8;
  double alpha = 1.0;
  EntropySpec psi = EntropySpec::indicator();
  std::size_t n_steps = 20;
  TimeDistribution::Kind time_dist = TimeDistribution::Kind::Uniform;
  double lambda_g = 0.1;
  double lambda_d = 1.0;
  double p = 1.0;
  double r1_coeff = 0.0;
  std::size_t n_probes = 1;

  // Optimisation.
  std::size_t batch_size = 1024;
  std::size_t total_iters = 120000;
  double lr_g = 2e-4;
  double lr_v = 1e-4;
  double lr_final = 5e-5;
  double beta1 = 0.0;
  double beta2 = 0.9;
  std::optional<double> grad_clip;
  std::size_t inner_updates_per_outer = 3;
  bool resample_t_inner = true;
  std::uint64_t seed = 0;

  // Networks.
  std::size_t hidden_dim = 256;
  std::size_t hidden_layers = 3;

  // Reporting. eval_every = 0 selects max(total_iters / 100, 100).
  std::size_t eval_every = 0;
  std::size_t eval_samples = 4096;
  bool record_wall_time = true;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  LossWeights loss_weights() const;
  std::size_t eval_interval() const;
};

/// Parses a JSON document. Throws ConfigError on syntax errors, unknown keys,
/// wrong types or invalid values.
TrainConfig parse_config(const std::string& json_text);

/// Reads and parses a file; the error message names the path.
TrainConfig load_config(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, every field present).
std::string config_to_json(const TrainConfig& cfg);

/// FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string config_hash(const TrainConfig& cfg);

}  // namespace sfeuot
