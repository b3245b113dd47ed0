#include "sfeuot/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "sfeuot/bridge.hpp"

namespace sfeuot {

void LossWeights::validate() const {
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!finite_pos(alpha)) throw std::invalid_argument("alpha must be positive");
  if (!finite_pos(sigma)) throw std::invalid_argument("sigma must be positive");
  if (!finite_pos(lambda_g)) throw std::invalid_argument("lambda_g must be positive");
  if (!finite_pos(lambda_d)) throw std::invalid_argument("lambda_d must be positive");
  if (!(p >= 1.0 && p <= 2.0)) throw std::invalid_argument("p must lie in [1, 2]");
  if (!(std::isfinite(r1_coeff) && r1_coeff >= 0.0)) {
    throw std::invalid_argument("r1_coeff must be nonnegative");
  }
}

Matrix draw_probes(std::size_t batch, std::size_t n_probes, std::size_t dim, Rng& rng) {
  Matrix probes(batch * n_probes, dim);
  fill_rademacher(rng, probes.storage());
  return probes;
}

double hjb_penalty(double r, double p) {
  const double a = std::abs(r);
  return p == 1.0 ? a : (p == 2.0 ? a * a : std::pow(a, p));
}

double hjb_penalty_grad(double r, double p) {
  if (r == 0.0) return 0.0;
  const double sgn = r > 0.0 ? 1.0 : -1.0;
  if (p == 1.0) return sgn;
  if (p == 2.0) return 2.0 * r;
  return p * std::pow(std::abs(r), p - 1.0) * sgn;
}

namespace {

void check_batch(const ValueNetwork& v, const ResidualBatch& batch) {
  const std::size_t n = batch.size();
  const std::size_t d = v.dim();
  if (n == 0) throw std::invalid_argument("residual batch is empty");
  if (batch.x_t.rows() != n || batch.x_next.rows() != n || batch.x_t.cols() != d ||
      batch.x_next.cols() != d) {
    throw std::invalid_argument("residual batch: shape mismatch");
  }
  if (batch.n_probes == 0 || batch.probes.rows() != n * batch.n_probes || batch.probes.cols() != d) {
    throw std::invalid_argument("residual batch: probe shape mismatch");
  }
  if (!(batch.dt > 0.0)) throw std::invalid_argument("residual batch: dt must be positive");
  for (double t : batch.t) {
    if (t + batch.dt > 1.0 + 1e-12) throw std::invalid_argument("residual batch: t + dt exceeds 1");
  }
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace

ResidualCache hjb_residual(const ValueNetwork& v, const ResidualBatch& batch,
                           const LossWeights& w) {
  check_batch(v, batch);
  const std::size_t n = batch.size();
  const std::size_t d = v.dim();
  const std::size_t k = batch.n_probes;
  const JetLayout layout{d, k, 1};

  std::vector<double> t_next(batch.t);
  for (double& t : t_next) t += batch.dt;

  ResidualCache c{{}, {}, {}, Matrix(n, d), {},
                  JetTape::record(v.net, value_inputs(batch.t, batch.x_t), layout, batch.probes),
                  JetTape::record(v.net, value_inputs(t_next, batch.x_next), JetLayout{})};
  c.residual.resize(n);
  c.value_t.resize(n);
  c.value_next.resize(n);
  c.laplacian.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    c.value_t[b] = c.jet.output(b, 0)[0];
    c.value_next[b] = c.next.output(b, 0)[0];
    double g2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double gi = c.jet.output(b, layout.tangent_channel(i))[0];
      c.grad(b, i) = gi;
      g2 += gi * gi;
    }
    double lap = 0.0;
    for (std::size_t q = 0; q < k; ++q) lap += c.jet.output(b, layout.probe_second_channel(q))[0];
    lap /= static_cast<double>(k);
    c.laplacian[b] = lap;
    c.residual[b] = (c.value_next[b] - c.value_t[b]) / batch.dt - 0.5 * w.alpha * g2 +
                    0.5 * w.sigma * w.sigma * lap;
    check_finite(c.residual[b], "hjb_residual");
  }
  return c;
}

namespace {

// Adjoint of the jet tape given dL/dR per sample and an extra dL/dgrad term
// coefficient (so dL/dgrad_b = (rbar_b * (-alpha) + extra) * grad_b).
Matrix jet_adjoint(const ResidualCache& c, const ResidualBatch& batch, const LossWeights& w,
                   const std::vector<double>& rbar, double extra_grad_coeff) {
  const JetLayout& layout = c.jet.layout();
  const std::size_t ch = layout.channels();
  const std::size_t n = batch.size();
  const std::size_t d = c.grad.cols();
  Matrix adj(n * ch, 1);
  const double lap_coeff = 0.5 * w.sigma * w.sigma / static_cast<double>(batch.n_probes);
  for (std::size_t b = 0; b < n; ++b) {
    adj(b * ch, 0) = -rbar[b] / batch.dt;
    const double gc = -w.alpha * rbar[b] + extra_grad_coeff;
    for (std::size_t i = 0; i < d; ++i) adj(b * ch + layout.tangent_channel(i), 0) = gc * c.grad(b, i);
    for (std::size_t q = 0; q < batch.n_probes; ++q) {
      adj(b * ch + layout.probe_second_channel(q), 0) = rbar[b] * lap_coeff;
    }
  }
  return adj;
}

void add_into(NetworkParams& dst, const NetworkParams& src) {
  auto a = dst.flat();
  auto b = src.flat();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

ValueLossResult value_loss(const ValueNetwork& v, const ResidualBatch& batch, const Matrix& y_hat,
                           const Matrix& y_real, const EntropySpec& psi, const LossWeights& w) {
  w.validate();
  ResidualCache c = hjb_residual(v, batch, w);
  const std::size_t n = batch.size();
  const std::size_t d = v.dim();
  if (y_hat.rows() == 0 || y_real.rows() == 0 || y_hat.cols() != d || y_real.cols() != d) {
    throw std::invalid_argument("value_loss: terminal sample shape mismatch");
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  ValueLossResult out;
  std::vector<double> rbar(n);
  for (std::size_t b = 0; b < n; ++b) {
    double g2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) g2 += c.grad(b, i) * c.grad(b, i);
    const double r = c.residual[b];
    out.loss += inv_n * (w.lambda_d * hjb_penalty(r, w.p) - 0.5 * w.alpha * g2 + w.r1_coeff * g2);
    out.mean_abs_residual += inv_n * std::abs(r);
    rbar[b] = inv_n * w.lambda_d * hjb_penalty_grad(r, w.p);
  }

  // Running cost and R1 share the gradient-norm channels with R.
  Matrix jet_adj = jet_adjoint(c, batch, w, rbar, inv_n * (-w.alpha + 2.0 * w.r1_coeff));
  out.grad = c.jet.backward(jet_adj, true, false).params;

  Matrix next_adj(n, 1);
  for (std::size_t b = 0; b < n; ++b) next_adj(b, 0) = rbar[b] / batch.dt;
  add_into(out.grad, c.next.backward(next_adj, true, false).params);

  // Terminal terms at t = 1.
  {
    JetTape tape = JetTape::record(v.net, value_inputs(1.0, y_hat), JetLayout{});
    const double inv_m = 1.0 / static_cast<double>(y_hat.rows());
    Matrix adj(y_hat.rows(), 1, -inv_m);
    for (std::size_t b = 0; b < y_hat.rows(); ++b) out.loss -= inv_m * tape.output(b, 0)[0];
    add_into(out.grad, tape.backward(adj, true, false).params);
  }
  {
    JetTape tape = JetTape::record(v.net, value_inputs(1.0, y_real), JetLayout{});
    const double inv_m = 1.0 / static_cast<double>(y_real.rows());
    Matrix adj(y_real.rows(), 1);
    for (std::size_t b = 0; b < y_real.rows(); ++b) {
      const double val = tape.output(b, 0)[0];
      out.loss += inv_m * conjugate_eval(psi, val);
      adj(b, 0) = inv_m * conjugate_grad(psi, val);
    }
    add_into(out.grad, tape.backward(adj, true, false).params);
  }
  check_finite(out.loss, "value_loss");
  return out;
}

GeneratorLossResult generator_loss(const ValueNetwork& v, const ResidualBatch& batch,
                                   const LossWeights& w) {
  w.validate();
  ResidualCache c = hjb_residual(v, batch, w);
  const std::size_t n = batch.size();
  const std::size_t d = v.dim();
  const double inv_n = 1.0 / static_cast<double>(n);

  GeneratorLossResult out;
  std::vector<double> rbar(n, w.lambda_g * inv_n);
  for (std::size_t b = 0; b < n; ++b) {
    out.loss += w.lambda_g * inv_n * c.residual[b];
    out.mean_abs_residual += inv_n * std::abs(c.residual[b]);
  }
  check_finite(out.loss, "generator_loss");

  Matrix jet_adj = jet_adjoint(c, batch, w, rbar, 0.0);
  TapeGradients gj = c.jet.backward(jet_adj, false, true);
  Matrix next_adj(n, 1);
  for (std::size_t b = 0; b < n; ++b) next_adj(b, 0) = rbar[b] / batch.dt;
  TapeGradients gn = c.next.backward(next_adj, false, true);

  out.d_x_t = Matrix(n, d);
  out.d_x_next = Matrix(n, d);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < d; ++i) {
      out.d_x_t(b, i) = gj.inputs(b, i + 1);
      out.d_x_next(b, i) = gn.inputs(b, i + 1);
    }
  }
  return out;
}

namespace {
// Drift fraction dt / (1 - t) of the conditional step; exactly 1 at the final
// grid step where the step lands on y_hat.
double step_fraction(double t, double dt) {
  if (t + dt >= 1.0 - 1e-12) return 1.0;
  return dt / (1.0 - t);
}
}  // namespace

ResidualBatch make_residual_batch(const BridgeDraw& draw, double dt, double sigma, Matrix probes,
                                  std::size_t n_probes) {
  const std::size_t n = draw.t.size();
  const std::size_t d = draw.x.cols();
  ResidualBatch batch{draw.t, Matrix(n, d), Matrix(n, d), dt, std::move(probes), n_probes};
  for (std::size_t b = 0; b < n; ++b) {
    bridge_sample(draw.x.row(b), draw.y_hat.row(b), draw.t[b], sigma, draw.eta1.row(b),
                  batch.x_t.row(b));
    conditional_step(batch.x_t.row(b), draw.y_hat.row(b), draw.t[b], dt, sigma, draw.eta2.row(b),
                     batch.x_next.row(b));
  }
  return batch;
}

Matrix chain_to_y_hat(const GeneratorLossResult& g, const BridgeDraw& draw, double dt) {
  const std::size_t n = draw.t.size();
  const std::size_t d = draw.x.cols();
  Matrix out(n, d);
  for (std::size_t b = 0; b < n; ++b) {
    const double t = draw.t[b];
    const double f = step_fraction(t, dt);
    for (std::size_t i = 0; i < d; ++i) {
      // x_next = (1 - f) x_t + f y_hat + noise, x_t = (1 - t) x + t y_hat + noise
      const double dxt_total = g.d_x_t(b, i) + (1.0 - f) * g.d_x_next(b, i);
      out(b, i) = t * dxt_total + f * g.d_x_next(b, i);
    }
  }
  return out;
}

}  // namespace sfeuot
