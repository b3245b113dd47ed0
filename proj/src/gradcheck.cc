#include "sfeuot/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "sfeuot/objective.hpp"

namespace sfeuot {

bool GradcheckReport::passed() const {
  return std::all_of(terms.begin(), terms.end(), [](const GradcheckTerm& t) { return t.passed; });
}

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("relative_error: size mismatch");
  double diff = 0.0, scale = 1e-8;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

namespace {

// Central differences of f over every entry of x.
std::vector<double> numeric_gradient(std::span<double> x, const std::function<double()>& f) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    const double h = 1e-6 * std::max(1.0, std::abs(orig));
    x[i] = orig + h;
    const double fp = f();
    x[i] = orig - h;
    const double fm = f();
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

Matrix normal(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  fill_normal(rng, m.storage());
  for (double& v : m.storage()) v *= scale;
  return m;
}

struct Point {
  ValueNetwork v;
  Generator g;
  BridgeDraw draw;
  Matrix z;
  Matrix y_real;
  Matrix probes;
  LossWeights w;
  EntropySpec psi;
  double dt = 0.1;
};

Point make_point(const GradcheckOptions& o, std::size_t index, Rng& rng) {
  Point p;
  const std::size_t d = o.dim, n = o.batch;
  p.v = ValueNetwork::create(d, o.hidden, o.hidden_layers, rng);
  p.g = Generator::create(d, o.hidden, o.hidden_layers, rng);
  // Larger last-layer weights than the training init so the map is not
  // dominated by the skip connection.
  for (double& x : p.g.net.weights(p.g.net.num_layers() - 1)) x *= 50.0;
  const int n_steps = 10;
  p.dt = 1.0 / n_steps;
  p.draw.x = normal(n, d, rng);
  p.z = normal(n, d, rng);
  p.draw.eta1 = normal(n, d, rng);
  p.draw.eta2 = normal(n, d, rng);
  p.draw.t.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    // Cover both endpoints of the grid.
    const int k = b == 0 ? 0 : (b == 1 ? n_steps - 1 : static_cast<int>(uniform_index(rng, n_steps)));
    p.draw.t[b] = static_cast<double>(k) / n_steps;
  }
  p.y_real = normal(n, d, rng, 1.5);
  p.probes = draw_probes(n, o.probes, d, rng);
  p.w.alpha = 1.3;
  p.w.sigma = 0.7;
  p.w.lambda_g = 0.4;
  p.w.lambda_d = 1.1;
  p.w.p = 1.5;
  p.w.r1_coeff = 0.3;
  const EntropySpec kinds[] = {EntropySpec::indicator(), EntropySpec::scaled_kl(5.0), EntropySpec::softplus()};
  p.psi = kinds[index % 3];
  p.draw.y_hat = generator_forward_batch(p.g, p.draw.x, p.z).y_hat;
  return p;
}

ResidualBatch batch_of(const Point& p, const GradcheckOptions& o) {
  return make_residual_batch(p.draw, p.dt, p.w.sigma, p.probes, o.probes);
}

double term_value_loss(Point& p, const GradcheckOptions& o) {
  const ResidualBatch batch = batch_of(p, o);
  auto f = [&] { return value_loss(p.v, batch, p.draw.y_hat, p.y_real, p.psi, p.w).loss; };
  const auto analytic = value_loss(p.v, batch, p.draw.y_hat, p.y_real, p.psi, p.w).grad;
  return relative_error(to_vec(analytic.flat()), numeric_gradient(p.v.net.flat(), f));
}

double term_generator_loss(Point& p, const GradcheckOptions& o) {
  auto loss_at = [&] {
    BridgeDraw d = p.draw;
    d.y_hat = generator_forward_batch(p.g, d.x, p.z).y_hat;
    return generator_loss(p.v, make_residual_batch(d, p.dt, p.w.sigma, p.probes, o.probes), p.w).loss;
  };
  GeneratorPass pass = generator_forward_batch(p.g, p.draw.x, p.z);
  BridgeDraw d = p.draw;
  d.y_hat = pass.y_hat;
  const GeneratorLossResult gl =
      generator_loss(p.v, make_residual_batch(d, p.dt, p.w.sigma, p.probes, o.probes), p.w);
  const NetworkParams analytic = generator_backward(pass, chain_to_y_hat(gl, d, p.dt));
  return relative_error(to_vec(analytic.flat()), numeric_gradient(p.g.net.flat(), loss_at));
}

double term_residual_inputs(Point& p, const GradcheckOptions& o) {
  ResidualBatch batch = batch_of(p, o);
  const GeneratorLossResult gl = generator_loss(p.v, batch, p.w);
  auto f = [&] { return generator_loss(p.v, batch, p.w).loss; };
  std::vector<double> analytic = gl.d_x_t.storage();
  analytic.insert(analytic.end(), gl.d_x_next.storage().begin(), gl.d_x_next.storage().end());
  std::vector<double> numeric = numeric_gradient(batch.x_t.storage(), f);
  const auto nn = numeric_gradient(batch.x_next.storage(), f);
  numeric.insert(numeric.end(), nn.begin(), nn.end());
  return relative_error(analytic, numeric);
}

double term_input_grad(Point& p, const GradcheckOptions&) {
  double worst = 0.0;
  const Matrix& x = p.draw.x;
  for (std::size_t b = 0; b < x.rows(); ++b) {
    std::vector<double> xb = to_vec(x.row(b));
    const double t = p.draw.t[b];
    const std::vector<double> reverse = value_input_grad(p.v, t, xb);
    const std::vector<double> numeric = numeric_gradient(xb, [&] { return value_forward(p.v, t, xb); });
    worst = std::max(worst, relative_error(reverse, numeric));
    // Forward tangents of the jet must agree as well.
    Matrix in(1, x.cols());
    std::copy(xb.begin(), xb.end(), in.data());
    const JetTape tape = JetTape::record(p.v.net, value_inputs(t, in), JetLayout{x.cols(), 0, 1});
    std::vector<double> forward(x.cols());
    for (std::size_t i = 0; i < x.cols(); ++i) forward[i] = tape.output(0, 1 + i)[0];
    worst = std::max(worst, relative_error(forward, numeric));
  }
  return worst;
}

double term_hutchinson_params(Point& p, const GradcheckOptions& o) {
  const std::size_t n = p.draw.x.rows();
  const JetLayout layout{0, o.probes, 1};
  const Matrix inputs = value_inputs(p.draw.t, p.draw.x);
  auto f = [&] {
    const JetTape tape = JetTape::record(p.v.net, inputs, layout, p.probes);
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t k = 0; k < o.probes; ++k) s += tape.output(b, layout.probe_second_channel(k))[0];
    }
    return s / static_cast<double>(n * o.probes);
  };
  JetTape tape = JetTape::record(p.v.net, inputs, layout, p.probes);
  Matrix adj(n * layout.channels(), 1);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < o.probes; ++k) {
      adj(b * layout.channels() + layout.probe_second_channel(k), 0) = 1.0 / static_cast<double>(n * o.probes);
    }
  }
  const TapeGradients g = tape.backward(adj, true, true);
  double err = relative_error(to_vec(g.params.flat()), numeric_gradient(p.v.net.flat(), f));
  // Input adjoint of the probe path (third derivatives), spatial part.
  Matrix in_copy = inputs;
  auto f_in = [&] {
    const JetTape t2 = JetTape::record(p.v.net, in_copy, layout, p.probes);
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t k = 0; k < o.probes; ++k) s += t2.output(b, layout.probe_second_channel(k))[0];
    }
    return s / static_cast<double>(n * o.probes);
  };
  const auto num_in = numeric_gradient(in_copy.storage(), f_in);
  err = std::max(err, relative_error(g.inputs.storage(), num_in));
  return err;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& o) {
  if (o.points == 0 || o.batch < 2 || o.dim == 0 || o.probes == 0) {
    throw std::invalid_argument("gradcheck: points, dim and probes must be >= 1 and batch >= 2");
  }
  using Term = double (*)(Point&, const GradcheckOptions&);
  const std::pair<const char*, Term> terms[] = {
      {"value_loss_params", term_value_loss},
      {"generator_loss_params", term_generator_loss},
      {"residual_inputs", term_residual_inputs},
      {"value_input_grad", term_input_grad},
      {"hutchinson_params", term_hutchinson_params},
  };
  GradcheckReport report;
  Rng rng(o.seed);
  for (const auto& [name, fn] : terms) {
    GradcheckTerm t{name, 0.0, 0, true};
    for (std::size_t i = 0; i < o.points; ++i) {
      Point p = make_point(o, i, rng);
      const double e = fn(p, o);
      t.worst_rel_error = std::isfinite(e) ? std::max(t.worst_rel_error, e) : INFINITY;
      ++t.points;
    }
    t.passed = t.worst_rel_error <= o.tolerance;
    report.terms.push_back(t);
  }
  return report;
}

}  // namespace sfeuot
