#pragma once

// Alternating optimisation of the value network and the generator.
//
// One outer iteration = one value update followed by
// inner_updates_per_outer generator updates, each on freshly drawn sources,
// auxiliary noise, bridge noise and probes.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfeuot/config.hpp"
#include "sfeuot/data.hpp"
#include "sfeuot/eval.hpp"
#include "sfeuot/nets.hpp"
#include "sfeuot/optim.hpp"

namespace sfeuot {

/// Source and target laws of an experiment, plus the analytic coupling when
/// one exists.
struct Problem {
  DatasetSpec source;
  DatasetSpec target;
  std::optional<GaussianCoupling> truth;
};

Problem make_problem(const TrainConfig& cfg);

struct TrainState {
  Generator gen;
  ValueNetwork val;
  Adam opt_g;
  Adam opt_v;
  std::size_t iter = 0;  // completed outer iterations
  Rng rng;

  static TrainState init(const TrainConfig& cfg);
};

struct StepStats {
  std::size_t iter = 0;
  double loss_v = 0.0;
  double loss_g = 0.0;
  double mean_abs_r = 0.0;
  double lr_g = 0.0;
  double lr_v = 0.0;
  double grad_norm_v = 0.0;  // applied (post-clip) norms
  double grad_norm_g = 0.0;
};

/// Executes one outer iteration and advances state.iter.
/// Throws NumericError on a non-finite loss or gradient.
StepStats train_step(TrainState& state, const TrainConfig& cfg, const Problem& problem);

struct ReportRow {
  std::size_t iter = 0;  // 1-based count of completed iterations
  double loss_v = 0.0;   // interval means
  double loss_g = 0.0;
  double mean_abs_r = 0.0;
  double lr_g = 0.0;
  double lr_v = 0.0;
  std::string metric_name;
  double metric_value = 0.0;
  double wall_ms = 0.0;
};

struct TrainReport {
  std::vector<ReportRow> rows;
  std::vector<StepStats> steps;  // every iteration run in this process

  static constexpr const char* kHeader =
      "iter,loss_v,loss_g,mean_abs_R,lr_g,lr_v,metric_name,metric_value,wall_ms";
  std::string to_csv() const;
};

/// Cheap metrics used during training: transport cost, plus relative moment
/// errors (Gaussian pair) or mode coverage (8 Gaussians).
std::vector<MetricsRecord> training_metrics(const TrainConfig& cfg, const Problem& problem,
                                            const Generator& gen, std::uint64_t seed);

/// Generated pairs (x, T(x, z)) for n fresh sources.
std::pair<Matrix, Matrix> generate_pairs(const Generator& gen, const DatasetSpec& source,
                                         std::size_t n, Rng& rng);
/// T(x, z) for given sources and fresh z.
Matrix transport(const Generator& gen, const Matrix& x, Rng& rng);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  bool resume = false;            // continue from out_dir state when present
  std::optional<std::size_t> stop_after;  // stop once this many iterations are done
  std::function<void(const StepStats&)> on_step;
};

struct TrainResult {
  TrainState state;
  TrainReport report;
};

/// Runs iterations state.iter .. total_iters. With out_dir set, writes
/// checkpoint.bin (generator, value), optimizer.bin, state.json and
/// report.csv at every evaluation point and at the end. Throws NumericError
/// after recording a diagnostic row; I/O errors name the path.
TrainResult train(const TrainConfig& cfg, const TrainOptions& opts = {});

/// Loads (generator, value) from a checkpoint written by train.
std::pair<Generator, ValueNetwork> load_models(const std::filesystem::path& checkpoint);

}  // namespace sfeuot
