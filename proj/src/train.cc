#include "sfeuot/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sfeuot/checkpoint.hpp"
#include "sfeuot/parallel.hpp"

namespace sfeuot {

Problem make_problem(const TrainConfig& cfg) {
  cfg.validate();
  Problem p;
  if (cfg.dataset == "gaussian_pair") {
    GaussianPairProblem gp = gaussian_pair(cfg.data_dim, cfg.data_seed, cfg.sigma * cfg.sigma);
    p.source = gp.source;
    p.target = gp.target;
    p.truth = gp.truth;
  } else if (cfg.dataset == "gauss_to_8gauss") {
    p.source.kind = DatasetSpec::Kind::StdGaussian;
    p.source.dim = 2;
    p.target.kind = DatasetSpec::Kind::EightGaussian;
    p.target.dim = 2;
    p.target.component_std = cfg.component_std;
    p.target.mode_weights = cfg.mode_weights;
  } else {
    p.source.kind = DatasetSpec::Kind::Moon;
    p.source.dim = 2;
    p.target.kind = DatasetSpec::Kind::Spiral;
    p.target.dim = 2;
  }
  p.source.seed = cfg.data_seed + 1;
  p.target.seed = cfg.data_seed + 2;
  return p;
}

TrainState TrainState::init(const TrainConfig& cfg) {
  cfg.validate();
  tune_allocator();
  TrainState s;
  s.rng.seed(cfg.seed);
  s.gen = Generator::create(cfg.data_dim, cfg.hidden_dim, cfg.hidden_layers, s.rng);
  s.val = ValueNetwork::create(cfg.data_dim, cfg.hidden_dim, cfg.hidden_layers, s.rng);
  s.opt_g = Adam(s.gen.net.num_params(), cfg.beta1, cfg.beta2);
  s.opt_v = Adam(s.val.net.num_params(), cfg.beta1, cfg.beta2);
  return s;
}

namespace {

Matrix normal_matrix(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  fill_normal(rng, m.storage());
  return m;
}

double apply_update(Adam& opt, NetworkParams& net, NetworkParams& grad, double lr,
                    const std::optional<double>& clip, const char* who) {
  double norm = global_norm(grad.flat());
  if (!std::isfinite(norm)) throw NumericError(std::string(who) + ": non-finite gradient");
  if (clip) {
    clip_global_norm(grad.flat(), *clip);
    norm = std::min(norm, *clip);
  }
  opt.step(net.flat(), grad.flat(), lr);
  return norm;
}

}  // namespace

StepStats train_step(TrainState& state, const TrainConfig& cfg, const Problem& problem) {
  const std::size_t n = cfg.batch_size;
  const std::size_t d = cfg.data_dim;
  const TimeDistribution td(cfg.time_dist, TimeGrid(static_cast<int>(cfg.n_steps)));
  const double dt = td.grid().dt();
  const LossWeights w = cfg.loss_weights();
  Rng& rng = state.rng;

  StepStats st;
  st.iter = state.iter;
  st.lr_g = cosine_lr(cfg.lr_g, cfg.lr_final, state.iter, cfg.total_iters);
  st.lr_v = cosine_lr(cfg.lr_v, cfg.lr_final, state.iter, cfg.total_iters);

  auto draw_times = [&](std::vector<double>& t) {
    t.resize(n);
    for (double& v : t) v = td.sample(rng);
  };

  // Value update.
  std::vector<double> t_shared;
  {
    BridgeDraw draw;
    draw.x = sample(problem.source, n, rng);
    const Matrix y = sample(problem.target, n, rng);
    const Matrix z = normal_matrix(n, d, rng);
    draw_times(draw.t);
    draw.eta1 = normal_matrix(n, d, rng);
    draw.eta2 = normal_matrix(n, d, rng);
    Matrix probes = draw_probes(n, cfg.n_probes, d, rng);
    draw.y_hat = generator_forward_batch(state.gen, draw.x, z).y_hat;
    t_shared = draw.t;
    const ResidualBatch batch = make_residual_batch(draw, dt, cfg.sigma, std::move(probes), cfg.n_probes);
    ValueLossResult vl = value_loss(state.val, batch, draw.y_hat, y, cfg.psi, w);
    st.loss_v = vl.loss;
    st.mean_abs_r = vl.mean_abs_residual;
    st.grad_norm_v = apply_update(state.opt_v, state.val.net, vl.grad, st.lr_v, cfg.grad_clip, "value update");
  }

  // Generator updates.
  for (std::size_t inner = 0; inner < cfg.inner_updates_per_outer; ++inner) {
    BridgeDraw draw;
    draw.x = sample(problem.source, n, rng);
    const Matrix z = normal_matrix(n, d, rng);
    if (cfg.resample_t_inner) {
      draw_times(draw.t);
    } else {
      draw.t = t_shared;
    }
    draw.eta1 = normal_matrix(n, d, rng);
    draw.eta2 = normal_matrix(n, d, rng);
    Matrix probes = draw_probes(n, cfg.n_probes, d, rng);
    GeneratorPass pass = generator_forward_batch(state.gen, draw.x, z);
    draw.y_hat = pass.y_hat;
    const ResidualBatch batch = make_residual_batch(draw, dt, cfg.sigma, std::move(probes), cfg.n_probes);
    const GeneratorLossResult gl = generator_loss(state.val, batch, w);
    NetworkParams grad = generator_backward(pass, chain_to_y_hat(gl, draw, dt));
    st.loss_g += gl.loss / static_cast<double>(cfg.inner_updates_per_outer);
    st.grad_norm_g = apply_update(state.opt_g, state.gen.net, grad, st.lr_g, cfg.grad_clip, "generator update");
  }
  if (!std::isfinite(st.loss_v) || !std::isfinite(st.loss_g)) {
    throw NumericError("train_step: non-finite loss at iteration " + std::to_string(state.iter));
  }
  ++state.iter;
  return st;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

std::string row_csv(const ReportRow& r) {
  std::ostringstream os;
  os << r.iter << ',' << fmt(r.loss_v) << ',' << fmt(r.loss_g) << ',' << fmt(r.mean_abs_r) << ','
     << fmt(r.lr_g) << ',' << fmt(r.lr_v) << ',' << r.metric_name << ',' << fmt(r.metric_value) << ','
     << fmt(r.wall_ms) << '\n';
  return os.str();
}

}  // namespace

std::string TrainReport::to_csv() const {
  std::string s = std::string(kHeader) + "\n";
  for (const auto& r : rows) s += row_csv(r);
  return s;
}

Matrix transport(const Generator& gen, const Matrix& x, Rng& rng) {
  const Matrix z = normal_matrix(x.rows(), x.cols(), rng);
  return generator_forward_batch(gen, x, z).y_hat;
}

std::pair<Matrix, Matrix> generate_pairs(const Generator& gen, const DatasetSpec& source,
                                         std::size_t n, Rng& rng) {
  Matrix x = sample(source, n, rng);
  Matrix y = transport(gen, x, rng);
  return {std::move(x), std::move(y)};
}

std::vector<MetricsRecord> training_metrics(const TrainConfig& cfg, const Problem& problem,
                                            const Generator& gen, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = cfg.eval_samples;
  auto [x, y] = generate_pairs(gen, problem.source, n, rng);
  std::vector<MetricsRecord> out;
  out.push_back({"transport_cost", transport_cost(x, y), n, seed});
  if (problem.truth) {
    const MomentErrors e = relative_moment_errors(x, y, *problem.truth);
    out.push_back({"dm_rel_pct", e.mean, n, seed});
    out.push_back({"dvar_rel_pct", e.var, n, seed});
    out.push_back({"dcov_rel_pct", e.cov, n, seed});
  }
  if (problem.target.kind == DatasetSpec::Kind::EightGaussian) {
    out.push_back({"mode_coverage", mode_coverage(y, eight_gaussian_modes(), 1.5), n, seed});
  }
  for (const auto& m : out) {
    if (!std::isfinite(m.value)) throw NumericError("metric '" + m.name + "' is not finite");
  }
  return out;
}

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << rng;
  return os.str();
}

void rng_from_string(Rng& rng, const std::string& s) {
  std::istringstream is(s);
  is.imbue(std::locale::classic());
  is >> rng;
  if (!is) throw std::runtime_error("state.json: corrupt generator state");
}

NetworkParams moments_as_params(const NetworkParams& like, const std::vector<double>& m) {
  NetworkParams p = like.zeros_like();
  if (m.size() != p.num_params()) throw std::runtime_error("optimizer moments size mismatch");
  std::copy(m.begin(), m.end(), p.flat().begin());
  return p;
}

void save_state(const fs::path& dir, const TrainConfig& cfg, const TrainState& s,
                const std::string& report_csv) {
  write_checkpoint(dir / "checkpoint.bin", {s.gen.net, s.val.net});
  write_checkpoint(dir / "optimizer.bin",
                   {moments_as_params(s.gen.net, s.opt_g.first_moment()),
                    moments_as_params(s.gen.net, s.opt_g.second_moment()),
                    moments_as_params(s.val.net, s.opt_v.first_moment()),
                    moments_as_params(s.val.net, s.opt_v.second_moment())});
  json j;
  j["iter"] = s.iter;
  j["rng"] = rng_to_string(s.rng);
  j["config_hash"] = config_hash(cfg);
  j["opt_g_steps"] = s.opt_g.steps();
  j["opt_v_steps"] = s.opt_v.steps();
  write_text_atomic(dir / "state.json", j.dump(2) + "\n");
  write_text_atomic(dir / "report.csv", report_csv);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Returns the existing report text.
std::string load_state(const fs::path& dir, const TrainConfig& cfg, TrainState& s) {
  const json j = json::parse(read_text(dir / "state.json"));
  if (j.at("config_hash").get<std::string>() != config_hash(cfg)) {
    throw std::runtime_error("resume: '" + (dir / "state.json").string() +
                             "' was written for a different config");
  }
  auto nets = read_checkpoint(dir / "checkpoint.bin");
  auto moments = read_checkpoint(dir / "optimizer.bin");
  if (nets.size() != 2 || moments.size() != 4 ||
      nets[0].layer_dims() != s.gen.net.layer_dims() || nets[1].layer_dims() != s.val.net.layer_dims()) {
    throw std::runtime_error("resume: checkpoint in '" + dir.string() + "' does not match the config");
  }
  s.gen.net = nets[0];
  s.val.net = nets[1];
  auto copy_moments = [](const NetworkParams& src, std::vector<double>& dst) {
    dst.assign(src.flat().begin(), src.flat().end());
  };
  copy_moments(moments[0], s.opt_g.first_moment());
  copy_moments(moments[1], s.opt_g.second_moment());
  copy_moments(moments[2], s.opt_v.first_moment());
  copy_moments(moments[3], s.opt_v.second_moment());
  s.opt_g.set_steps(j.at("opt_g_steps").get<std::size_t>());
  s.opt_v.set_steps(j.at("opt_v_steps").get<std::size_t>());
  s.iter = j.at("iter").get<std::size_t>();
  rng_from_string(s.rng, j.at("rng").get<std::string>());
  return read_text(dir / "report.csv");
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const Problem problem = make_problem(cfg);
  TrainResult res{TrainState::init(cfg), {}};
  TrainState& s = res.state;
  const bool persist = !opts.out_dir.empty();
  std::string prior_report = std::string(TrainReport::kHeader) + "\n";
  if (persist) {
    std::error_code ec;
    fs::create_directories(opts.out_dir, ec);
    if (ec) throw std::runtime_error("cannot create '" + opts.out_dir.string() + "': " + ec.message());
    if (opts.resume && fs::exists(opts.out_dir / "state.json")) prior_report = load_state(opts.out_dir, cfg, s);
  }
  auto report_text = [&] {
    std::string text = prior_report;
    for (const auto& r : res.report.rows) text += row_csv(r);
    return text;
  };

  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&] {
    if (!cfg.record_wall_time) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  const std::size_t interval = cfg.eval_interval();
  const std::uint64_t eval_seed = cfg.seed ^ 0x5eed5eed5eedULL;
  std::size_t since = 0;
  ReportRow acc;

  while (s.iter < cfg.total_iters) {
    StepStats st;
    try {
      st = train_step(s, cfg, problem);
    } catch (const NumericError& e) {
      ReportRow r;
      r.iter = s.iter + 1;
      r.loss_v = r.loss_g = r.mean_abs_r = std::nan("");
      r.lr_g = cosine_lr(cfg.lr_g, cfg.lr_final, s.iter, cfg.total_iters);
      r.lr_v = cosine_lr(cfg.lr_v, cfg.lr_final, s.iter, cfg.total_iters);
      r.metric_name = "numeric_failure";
      r.metric_value = static_cast<double>(s.iter);
      r.wall_ms = wall();
      res.report.rows.push_back(r);
      if (persist) write_text_atomic(opts.out_dir / "report.csv", report_text());
      throw;
    }
    res.report.steps.push_back(st);
    if (opts.on_step) opts.on_step(st);
    acc.loss_v += st.loss_v;
    acc.loss_g += st.loss_g;
    acc.mean_abs_r += st.mean_abs_r;
    ++since;

    if (s.iter % interval == 0 || s.iter == cfg.total_iters) {
      ReportRow base;
      base.iter = s.iter;
      base.loss_v = acc.loss_v / static_cast<double>(since);
      base.loss_g = acc.loss_g / static_cast<double>(since);
      base.mean_abs_r = acc.mean_abs_r / static_cast<double>(since);
      base.lr_g = st.lr_g;
      base.lr_v = st.lr_v;
      base.wall_ms = wall();
      for (const auto& m : training_metrics(cfg, problem, s.gen, eval_seed)) {
        ReportRow r = base;
        r.metric_name = m.name;
        r.metric_value = m.value;
        res.report.rows.push_back(r);
      }
      acc = ReportRow{};
      since = 0;
      if (persist) save_state(opts.out_dir, cfg, s, report_text());
    }
    if (opts.stop_after && s.iter >= *opts.stop_after) break;
  }
  if (persist) save_state(opts.out_dir, cfg, s, report_text());
  return res;
}

std::pair<Generator, ValueNetwork> load_models(const std::filesystem::path& checkpoint) {
  auto nets = read_checkpoint(checkpoint);
  if (nets.size() != 2) {
    throw std::runtime_error("'" + checkpoint.string() + "': expected 2 networks, found " +
                             std::to_string(nets.size()));
  }
  Generator g{nets[0]};
  ValueNetwork v{nets[1]};
  if (g.net.in_dim() != 2 * g.net.out_dim() || v.net.out_dim() != 1 || v.net.in_dim() != g.net.out_dim() + 1) {
    throw std::runtime_error("'" + checkpoint.string() + "': network shapes are not a generator/value pair");
  }
  return {std::move(g), std::move(v)};
}

}  // namespace sfeuot
