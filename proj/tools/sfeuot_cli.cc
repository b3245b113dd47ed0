// sfeuot: train, evaluate and cross-check entropic (unbalanced) transport
// models from the command line.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 numeric failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sfeuot/checkpoint.hpp"
#include "sfeuot/config.hpp"
#include "sfeuot/data.hpp"
#include "sfeuot/eval.hpp"
#include "sfeuot/gradcheck.hpp"
#include "sfeuot/kernels.hpp"
#include "sfeuot/oracles.hpp"
#include "sfeuot/parallel.hpp"
#include "sfeuot/train.hpp"

#ifndef SFEUOT_VERSION
#define SFEUOT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sfeuot;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumeric = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

struct Manifest {
  Manifest(std::string cmd, std::vector<std::string> args, std::optional<std::string> hash)
      : command(std::move(cmd)), argv(std::move(args)), config_hash(std::move(hash)) {}

  std::string command;
  std::vector<std::string> argv;
  std::optional<std::string> config_hash;
  std::string started = utc_now();
  std::vector<std::string> outputs;
  json extra = json::object();

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config_hash"] = config_hash ? json(*config_hash) : json(nullptr);
    j["code_version"] = SFEUOT_VERSION;
    j["kernels"] = std::string(kernels::active().name);
    j["started"] = started;
    j["finished"] = utc_now();
    j["outputs"] = outputs;
    for (const auto& [k, v] : extra.items()) j[k] = v;
    write_text_atomic(dir / "manifest.json", j.dump(2) + "\n");
  }
};

TrainConfig read_config(const std::string& path, std::optional<std::uint64_t> seed) {
  TrainConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (seed) cfg.seed = *seed;
  return cfg;
}

std::string matrix_csv(const Matrix& m, const std::string& header) {
  std::string s = header + "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) s += ',';
      s += fmt(m(r, c));
    }
    s += '\n';
  }
  return s;
}

std::string coord_header(const std::string& prefix, std::size_t d) {
  std::string h;
  for (std::size_t i = 0; i < d; ++i) h += (i ? "," : "") + prefix + std::to_string(i);
  return h;
}

std::string coupling_csv(const Matrix& plan) {
  std::string s = "i,j,mass\n";
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    for (std::size_t j = 0; j < plan.cols(); ++j) {
      s += std::to_string(i) + "," + std::to_string(j) + "," + fmt(plan(i, j)) + "\n";
    }
  }
  return s;
}

// Scatter of sources (green), generated points (red) and pairing segments
// (gray); first two coordinates only.
std::string scatter_svg(const Matrix& x, const Matrix& y, std::size_t max_pairs = 512) {
  const std::size_t n = std::min(max_pairs, x.rows());
  const bool two_d = x.cols() >= 2;
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  auto coord = [&](const Matrix& m, std::size_t r, int k) { return two_d ? m(r, k) : (k == 0 ? m(r, 0) : 0.0); };
  for (std::size_t r = 0; r < n; ++r) {
    for (int k = 0; k < 2; ++k) {
      for (const Matrix* m : {&x, &y}) {
        lo[k] = std::min(lo[k], coord(*m, r, k));
        hi[k] = std::max(hi[k], coord(*m, r, k));
      }
    }
  }
  const double size = 600.0, pad = 20.0;
  const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-9});
  auto px = [&](double v) { return pad + (v - lo[0]) / span * (size - 2 * pad); };
  auto py = [&](double v) { return size - pad - (v - lo[1]) / span * (size - 2 * pad); };
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g stroke=\"#999999\" stroke-width=\"0.4\">\n";
  for (std::size_t r = 0; r < n; ++r) {
    os << "<line x1=\"" << px(coord(x, r, 0)) << "\" y1=\"" << py(coord(x, r, 1)) << "\" x2=\""
       << px(coord(y, r, 0)) << "\" y2=\"" << py(coord(y, r, 1)) << "\"/>\n";
  }
  os << "</g>\n<g fill=\"#2ca02c\">\n";
  for (std::size_t r = 0; r < n; ++r) {
    os << "<circle cx=\"" << px(coord(x, r, 0)) << "\" cy=\"" << py(coord(x, r, 1)) << "\" r=\"1.6\"/>\n";
  }
  os << "</g>\n<g fill=\"#d62728\">\n";
  for (std::size_t r = 0; r < n; ++r) {
    os << "<circle cx=\"" << px(coord(y, r, 0)) << "\" cy=\"" << py(coord(y, r, 1)) << "\" r=\"1.6\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

std::vector<std::string> argv_vec(int argc, char** argv) { return {argv, argv + argc}; }

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const TrainConfig cfg = read_config(a.config, a.seed);
  const fs::path out(a.out);
  ensure_dir(out);
  Manifest m{"train", argv, config_hash(cfg)};
  write_text_atomic(out / "config.json", config_to_json(cfg));
  TrainOptions opts;
  opts.out_dir = out;
  opts.resume = a.resume;
  const std::size_t interval = cfg.eval_interval();
  if (!a.quiet) {
    opts.on_step = [&](const StepStats& st) {
      if ((st.iter + 1) % interval == 0 || st.iter + 1 == cfg.total_iters) {
        std::printf("iter %zu loss_v %.6g loss_g %.6g mean|R| %.6g\n", st.iter + 1, st.loss_v, st.loss_g,
                    st.mean_abs_r);
        std::fflush(stdout);
      }
    };
  }
  m.outputs = {"checkpoint.bin", "optimizer.bin", "state.json", "report.csv", "config.json"};
  try {
    train(cfg, opts);
  } catch (const NumericError& e) {
    m.extra["error"] = e.what();
    m.write(out);
    throw;
  }
  m.write(out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::size_t oracle_atoms = 1024;
  std::size_t energy_samples = 10000;
  std::size_t permutations = 20;
  bool no_oracle = false;
};

struct OracleComparison {
  double energy = 0.0;
  double null95 = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Discrete oracle on `atoms` source/target samples; returns the energy
// distance between model pairs (x_i, T(x_i)) and oracle pairs, both drawn on
// the same source atoms, and the permutation null.
OracleComparison compare_with_oracle(const TrainConfig& cfg, const Problem& problem,
                                     const Generator& gen, std::size_t atoms, std::size_t n,
                                     std::size_t n_perm, Rng& rng) {
  const Matrix xs = sample(problem.source, atoms, rng);
  const Matrix ys = sample(problem.target, atoms, rng);
  const Matrix cost = quadratic_cost(xs, ys);
  const std::vector<double> w(atoms, 1.0 / static_cast<double>(atoms));
  const double eps = cfg.sigma * cfg.sigma;
  SinkhornOptions so;
  so.tol = 1e-7;
  so.max_iters = 20000;
  DiscreteCoupling plan;
  if (cfg.psi.kind == EntropySpec::Kind::Indicator) {
    plan = sinkhorn_balanced(cost, w, w, eps, so);
  } else {
    plan = sinkhorn_semi_relaxed_kl(cost, w, w, eps, cfg.alpha * cfg.psi.scale, so);
  }
  auto [ox, oy] = sample_discrete_coupling(plan.plan, xs, ys, n, rng);
  Matrix mx(n, xs.cols());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = uniform_index(rng, atoms);
    std::copy(xs.row(i).begin(), xs.row(i).end(), mx.row(r).begin());
  }
  const Matrix my = transport(gen, mx, rng);
  const Matrix model = join_columns(mx, my);
  const Matrix oracle = join_columns(ox, oy);
  OracleComparison c;
  c.energy = energy_distance(model, oracle);
  c.null95 = energy_distance_null(model, oracle, n_perm, 0.95, rng);
  c.iterations = plan.iterations;
  c.converged = plan.converged;
  return c;
}

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const TrainConfig cfg = read_config(a.config, a.seed);
  Generator gen;
  try {
    gen = load_models(a.checkpoint).first;
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  if (gen.dim() != cfg.data_dim) {
    throw UsageError("checkpoint dimension " + std::to_string(gen.dim()) + " does not match config data_dim " +
                     std::to_string(cfg.data_dim));
  }
  const fs::path out(a.out);
  ensure_dir(out);
  Manifest m{"eval", argv, config_hash(cfg)};
  const Problem problem = make_problem(cfg);
  const std::size_t n = a.samples.value_or(cfg.eval_samples);
  Rng rng(cfg.seed);

  auto [x, y] = generate_pairs(gen, problem.source, n, rng);
  std::vector<MetricsRecord> metrics;
  metrics.push_back({"transport_cost", transport_cost(x, y), n, cfg.seed});
  if (problem.truth) {
    const MomentErrors e = relative_moment_errors(x, y, *problem.truth);
    metrics.push_back({"dm_rel_pct", e.mean, n, cfg.seed});
    metrics.push_back({"dvar_rel_pct", e.var, n, cfg.seed});
    metrics.push_back({"dcov_rel_pct", e.cov, n, cfg.seed});
  }
  if (problem.target.kind == DatasetSpec::Kind::EightGaussian) {
    const Matrix modes = eight_gaussian_modes();
    metrics.push_back({"mode_coverage", mode_coverage(y, modes, 1.5), n, cfg.seed});
    const auto freq = mode_frequencies(y, modes);
    for (std::size_t k = 0; k < freq.size(); ++k) {
      metrics.push_back({"mode_freq_" + std::to_string(k), freq[k], n, cfg.seed});
    }
  }
  const bool oracle_ok = cfg.data_dim == 2 && cfg.psi.kind != EntropySpec::Kind::SoftplusConjugate;
  if (!a.no_oracle && oracle_ok) {
    const OracleComparison c =
        compare_with_oracle(cfg, problem, gen, a.oracle_atoms, a.energy_samples, a.permutations, rng);
    metrics.push_back({"energy_distance_vs_oracle", c.energy, a.energy_samples, cfg.seed});
    metrics.push_back({"energy_distance_null95", c.null95, a.energy_samples, cfg.seed});
    metrics.push_back({"oracle_iterations", static_cast<double>(c.iterations), a.oracle_atoms, cfg.seed});
  }

  std::string csv = "name,value,n_samples,seed\n";
  for (const auto& r : metrics) {
    csv += r.name + "," + fmt(r.value) + "," + std::to_string(r.n_samples) + "," + std::to_string(r.seed) + "\n";
    std::printf("%s %s\n", r.name.c_str(), fmt(r.value).c_str());
  }
  write_text_atomic(out / "metrics.csv", csv);
  write_text_atomic(out / "pairs.csv",
                    matrix_csv(join_columns(x, y), coord_header("x", x.cols()) + "," + coord_header("y", y.cols())));
  write_text_atomic(out / "scatter.svg", scatter_svg(x, y));
  m.outputs = {"metrics.csv", "pairs.csv", "scatter.svg"};
  m.extra["checkpoint"] = a.checkpoint;
  m.write(out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct OracleArgs {
  std::string kind;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t n = 3, m = 3, dim = 2;
  double epsilon = 1.0;
  std::string mode = "balanced";
  double alpha_div = 1.0;
  std::string source_csv, target_csv;
  double m0 = 0.0, s0 = 1.0, m1 = 0.0, s1 = 1.0, sigma2 = 1.0;
  std::size_t gaussian_dim = 0;
};

Matrix read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    ss.imbue(std::locale::classic());
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw UsageError("'" + path + "': non-numeric cell");
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw UsageError("'" + path + "': ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw UsageError("'" + path + "': no rows");
  Matrix mtx(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), mtx.row(r).begin());
  return mtx;
}

Matrix uniform_points(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (double& v : m.storage()) v = uniform01(rng);
  return m;
}

std::string summary_csv(const DiscreteCoupling& c, double objective) {
  const auto rs = c.row_sums();
  const auto cs = c.col_sums();
  double rv = 0.0, cv = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) rv += std::abs(rs[i] - c.source_weights[i]);
  for (std::size_t j = 0; j < cs.size(); ++j) cv += std::abs(cs[j] - c.target_weights[j]);
  std::string s = "name,value\n";
  s += "objective," + fmt(objective) + "\n";
  s += "row_violation_l1," + fmt(rv) + "\n";
  s += "col_violation_l1," + fmt(cv) + "\n";
  s += "total_mass," + fmt(c.total_mass()) + "\n";
  s += "iterations," + std::to_string(c.iterations) + "\n";
  s += "converged," + std::string(c.converged ? "1" : "0") + "\n";
  return s;
}

int cmd_oracle(const OracleArgs& a, const std::vector<std::string>& argv) {
  const fs::path out(a.out);
  ensure_dir(out);
  Manifest man{"oracle " + a.kind, argv, std::nullopt};
  Rng rng(a.seed);

  if (a.kind == "gaussian") {
    GaussianCoupling gc;
    if (a.gaussian_dim > 0) {
      gc = gaussian_pair(a.gaussian_dim, a.seed, a.sigma2).truth;
    } else {
      if (!(a.s0 > 0.0 && a.s1 > 0.0)) throw UsageError("--s0 and --s1 must be positive standard deviations");
      gc = gaussian_eot_coupling(Eigen::VectorXd::Constant(1, a.m0), Eigen::MatrixXd::Constant(1, 1, a.s0 * a.s0),
                                 Eigen::VectorXd::Constant(1, a.m1), Eigen::MatrixXd::Constant(1, 1, a.s1 * a.s1),
                                 a.sigma2);
    }
    const Eigen::Index d = gc.dim();
    std::string s = "block,i,j,value\n";
    auto dump = [&](const char* name, const Eigen::MatrixXd& mtx) {
      for (Eigen::Index i = 0; i < mtx.rows(); ++i) {
        for (Eigen::Index j = 0; j < mtx.cols(); ++j) {
          s += std::string(name) + "," + std::to_string(i) + "," + std::to_string(j) + "," + fmt(mtx(i, j)) + "\n";
        }
      }
    };
    dump("mean", gc.mean);
    dump("source_cov", gc.source_cov());
    dump("target_cov", gc.target_cov());
    dump("cross_cov", gc.cross_cov());
    write_text_atomic(out / "gaussian_coupling.csv", s);
    if (d == 1) {
      std::printf("C = %.6f\n", gc.cross_cov()(0, 0));
    } else {
      std::printf("cross-covariance (%ld x %ld):\n", static_cast<long>(d), static_cast<long>(d));
      for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) std::printf("%s%.6f", j ? " " : "", gc.cross_cov()(i, j));
        std::printf("\n");
      }
    }
    man.outputs = {"gaussian_coupling.csv"};
    man.write(out);
    return kOk;
  }

  Matrix xs, ys;
  if (!a.source_csv.empty() || !a.target_csv.empty()) {
    if (a.source_csv.empty() || a.target_csv.empty()) throw UsageError("--source and --target go together");
    xs = read_points_csv(a.source_csv);
    ys = read_points_csv(a.target_csv);
  } else {
    xs = uniform_points(a.n, a.dim, rng);
    ys = uniform_points(a.m, a.dim, rng);
  }
  if (xs.cols() != ys.cols()) throw UsageError("source and target dimensions differ");
  const Matrix cost = quadratic_cost(xs, ys);
  const std::vector<double> wa(xs.rows(), 1.0 / static_cast<double>(xs.rows()));
  const std::vector<double> wb(ys.rows(), 1.0 / static_cast<double>(ys.rows()));
  const bool balanced = a.mode == "balanced";
  if (!balanced && a.mode != "semi_relaxed") throw UsageError("--mode must be balanced or semi_relaxed");

  auto solve = [&] {
    return balanced ? sinkhorn_balanced(cost, wa, wb, a.epsilon)
                    : sinkhorn_semi_relaxed_kl(cost, wa, wb, a.epsilon, a.alpha_div);
  };
  auto objective = [&](const DiscreteCoupling& c) {
    return balanced ? eot_objective(c.plan, cost, wa, wb, a.epsilon)
                    : semi_relaxed_objective(c.plan, cost, wa, wb, a.epsilon, a.alpha_div);
  };

  if (a.kind == "sinkhorn") {
    const DiscreteCoupling c = solve();
    write_text_atomic(out / "coupling.csv", coupling_csv(c.plan));
    const std::string summary = summary_csv(c, objective(c));
    write_text_atomic(out / "summary.csv", summary);
    std::fputs(summary.c_str(), stdout);
    if (c.plan.rows() * c.plan.cols() <= 16) {
      for (std::size_t i = 0; i < c.plan.rows(); ++i) {
        for (std::size_t j = 0; j < c.plan.cols(); ++j) std::printf("%s%.6f", j ? " " : "[", c.plan(i, j));
        std::printf("]\n");
      }
    }
    man.outputs = {"coupling.csv", "summary.csv"};
    man.write(out);
    return c.converged ? kOk : kNumeric;
  }
  if (a.kind == "brute") {
    const DiscreteCoupling s = solve();
    DiscreteCoupling b;
    try {
      b = brute_force_tiny(cost, wa, wb, a.epsilon, balanced ? DivergenceMode::Balanced : DivergenceMode::SemiRelaxedKL,
                           a.alpha_div);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < s.plan.size(); ++i) {
      diff = std::max(diff, std::abs(s.plan.storage()[i] - b.plan.storage()[i]));
    }
    write_text_atomic(out / "coupling.csv", coupling_csv(b.plan));
    write_text_atomic(out / "coupling_sinkhorn.csv", coupling_csv(s.plan));
    std::string summary = summary_csv(b, objective(b));
    summary += "sinkhorn_objective," + fmt(objective(s)) + "\n";
    summary += "max_abs_diff_vs_sinkhorn," + fmt(diff) + "\n";
    write_text_atomic(out / "summary.csv", summary);
    std::fputs(summary.c_str(), stdout);
    std::printf("max abs diff = %.3e\n", diff);
    man.outputs = {"coupling.csv", "coupling_sinkhorn.csv", "summary.csv"};
    man.write(out);
    return kOk;
  }
  throw UsageError("unknown oracle '" + a.kind + "' (expected sinkhorn, gaussian or brute)");
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  GradcheckOptions opts;
  double corrupt = 0.0;
  std::string out;
};

int cmd_gradcheck(const GradcheckArgs& a, const std::vector<std::string>& argv) {
  debug::set_backward_corruption(a.corrupt);
  const GradcheckReport r = run_gradcheck(a.opts);
  debug::set_backward_corruption(0.0);
  std::string csv = "term,worst_rel_error,points,passed\n";
  for (const auto& t : r.terms) {
    std::printf("%-24s worst rel error %.3e over %zu points  %s\n", t.name.c_str(), t.worst_rel_error, t.points,
                t.passed ? "ok" : "FAILED");
    csv += t.name + "," + fmt(t.worst_rel_error) + "," + std::to_string(t.points) + "," + (t.passed ? "1" : "0") + "\n";
  }
  if (!a.out.empty()) {
    const fs::path out(a.out);
    ensure_dir(out);
    write_text_atomic(out / "gradcheck.csv", csv);
    Manifest m{"gradcheck", argv, std::nullopt};
    m.outputs = {"gradcheck.csv"};
    m.write(out);
  }
  return r.passed() ? kOk : kNumeric;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t n = 1000;
};

int cmd_sample(const SampleArgs& a, const std::vector<std::string>& argv) {
  const TrainConfig cfg = read_config(a.config, a.seed);
  const fs::path out(a.out);
  ensure_dir(out);
  const Problem p = make_problem(cfg);
  Rng rng(cfg.seed);
  const Matrix xs = sample(p.source, a.n, rng);
  const Matrix ys = sample(p.target, a.n, rng);
  write_text_atomic(out / "source.csv", matrix_csv(xs, coord_header("x", xs.cols())));
  write_text_atomic(out / "target.csv", matrix_csv(ys, coord_header("y", ys.cols())));
  Manifest m{"sample", argv, config_hash(cfg)};
  m.outputs = {"source.csv", "target.csv"};
  m.write(out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation-free entropic unbalanced optimal transport"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = single-thread reference mode)");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a generator/value pair");
  train_cmd->add_option("--config", ta.config, "Config JSON")->required();
  train_cmd->add_option("--out", ta.out, "Output directory")->required();
  train_cmd->add_option("--seed", ta.seed, "Override the config seed");
  train_cmd->add_option("--threads", threads, "Worker threads (0 = single-thread reference mode)");
  train_cmd->add_flag("--resume", ta.resume, "Continue from the state in --out");
  train_cmd->add_flag("--quiet", ta.quiet, "No progress lines");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "checkpoint.bin written by train")->required();
  eval_cmd->add_option("--config", ea.config, "Config JSON")->required();
  eval_cmd->add_option("--out", ea.out, "Output directory")->required();
  eval_cmd->add_option("--seed", ea.seed, "Override the config seed");
  eval_cmd->add_option("--threads", threads, "Worker threads (0 = single-thread reference mode)");
  eval_cmd->add_option("--samples", ea.samples, "Generated pairs (default: config eval_samples)");
  eval_cmd->add_option("--oracle-atoms", ea.oracle_atoms, "Atoms per side of the discrete oracle");
  eval_cmd->add_option("--energy-samples", ea.energy_samples, "Pairs per side in the energy distance");
  eval_cmd->add_option("--permutations", ea.permutations, "Permutations for the null quantile");
  eval_cmd->add_flag("--no-oracle", ea.no_oracle, "Skip the discrete-oracle comparison");

  OracleArgs oa;
  auto* oracle_cmd = app.add_subcommand("oracle", "Ground-truth couplings");
  oracle_cmd->add_option("kind", oa.kind, "sinkhorn | gaussian | brute")->required();
  oracle_cmd->add_option("--out", oa.out, "Output directory")->required();
  oracle_cmd->add_option("--seed", oa.seed, "Seed for random point clouds");
  oracle_cmd->add_option("--threads", threads, "Worker threads (0 = single-thread reference mode)");
  oracle_cmd->add_option("--n", oa.n, "Source points");
  oracle_cmd->add_option("--m", oa.m, "Target points");
  oracle_cmd->add_option("--dim", oa.dim, "Point dimension");
  oracle_cmd->add_option("--epsilon", oa.epsilon, "Entropy weight");
  oracle_cmd->add_option("--mode", oa.mode, "balanced | semi_relaxed");
  oracle_cmd->add_option("--alpha-div", oa.alpha_div, "Target-marginal KL weight (semi_relaxed)");
  oracle_cmd->add_option("--source", oa.source_csv, "Source points CSV");
  oracle_cmd->add_option("--target", oa.target_csv, "Target points CSV");
  oracle_cmd->add_option("--m0", oa.m0, "Gaussian: source mean (1D)");
  oracle_cmd->add_option("--s0", oa.s0, "Gaussian: source std (1D)");
  oracle_cmd->add_option("--m1", oa.m1, "Gaussian: target mean (1D)");
  oracle_cmd->add_option("--s1", oa.s1, "Gaussian: target std (1D)");
  oracle_cmd->add_option("--sigma2", oa.sigma2, "Gaussian: entropy weight");
  oracle_cmd->add_option("--gaussian-dim", oa.gaussian_dim, "Gaussian: use the seeded benchmark pair of this dim");

  GradcheckArgs ga;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference derivative checks");
  gc_cmd->add_option("--seed", ga.opts.seed, "Seed");
  gc_cmd->add_option("--dim", ga.opts.dim, "Data dimension");
  gc_cmd->add_option("--hidden", ga.opts.hidden, "Hidden width");
  gc_cmd->add_option("--layers", ga.opts.hidden_layers, "Hidden layers");
  gc_cmd->add_option("--points", ga.opts.points, "Random points per term");
  gc_cmd->add_option("--probes", ga.opts.probes, "Hutchinson probes");
  gc_cmd->add_option("--tolerance", ga.opts.tolerance, "Max relative error");
  gc_cmd->add_option("--corrupt-derivative", ga.corrupt, "Debug: perturb the activation derivative in reverse sweeps");
  gc_cmd->add_option("--out", ga.out, "Optional output directory");
  gc_cmd->add_option("--threads", threads, "Worker threads (0 = single-thread reference mode)");

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "Export source/target samples");
  sample_cmd->add_option("--config", sa.config, "Config JSON")->required();
  sample_cmd->add_option("--out", sa.out, "Output directory")->required();
  sample_cmd->add_option("--n", sa.n, "Samples per side");
  sample_cmd->add_option("--seed", sa.seed, "Override the config seed");
  sample_cmd->add_option("--threads", threads, "Worker threads (0 = single-thread reference mode)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  set_num_threads(threads);
  tune_allocator();
  const auto args = argv_vec(argc, argv);
  try {
    if (*train_cmd) return cmd_train(ta, args);
    if (*eval_cmd) return cmd_eval(ea, args);
    if (*oracle_cmd) return cmd_oracle(oa, args);
    if (*gc_cmd) return cmd_gradcheck(ga, args);
    if (*sample_cmd) return cmd_sample(sa, args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ConvergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
