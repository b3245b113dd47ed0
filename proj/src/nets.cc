#include "sfeuot/nets.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "sfeuot/kernels.hpp"

namespace sfeuot {

// ---------------------------------------------------------------------------
// NetworkParams

NetworkParams::NetworkParams(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw std::invalid_argument("NetworkParams: need at least two layer dims");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] == 0 || dims_[l + 1] == 0) {
      throw std::invalid_argument("NetworkParams: layer dims must be positive");
    }
    offsets_.push_back(offset);
    offset += dims_[l] * dims_[l + 1] + dims_[l + 1];
  }
  values_.assign(offset, 0.0);
}

NetworkParams NetworkParams::glorot(std::vector<std::size_t> layer_dims, Rng& rng,
                                    double last_layer_scale) {
  NetworkParams p(std::move(layer_dims));
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const double fan = static_cast<double>(p.dims_[l] + p.dims_[l + 1]);
    double bound = std::sqrt(6.0 / fan);
    if (l + 1 == p.num_layers()) bound *= last_layer_scale;
    for (double& w : p.weights(l)) w = uniform(rng, -bound, bound);
  }
  return p;
}

std::span<double> NetworkParams::weights(std::size_t layer) {
  return {values_.data() + weight_offset(layer), dims_[layer] * dims_[layer + 1]};
}
std::span<const double> NetworkParams::weights(std::size_t layer) const {
  return {values_.data() + weight_offset(layer), dims_[layer] * dims_[layer + 1]};
}
std::span<double> NetworkParams::biases(std::size_t layer) {
  return {values_.data() + weight_offset(layer) + dims_[layer] * dims_[layer + 1], dims_[layer + 1]};
}
std::span<const double> NetworkParams::biases(std::size_t layer) const {
  return {values_.data() + weight_offset(layer) + dims_[layer] * dims_[layer + 1], dims_[layer + 1]};
}

void NetworkParams::validate() const {
  if (dims_.size() < 2 || offsets_.size() + 1 != dims_.size()) {
    throw std::invalid_argument("NetworkParams: inconsistent layer table");
  }
  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (offsets_[l] != expected) throw std::invalid_argument("NetworkParams: bad layer offset");
    expected += dims_[l] * dims_[l + 1] + dims_[l + 1];
  }
  if (expected != values_.size()) throw std::invalid_argument("NetworkParams: bad buffer size");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NumericError("NetworkParams: non-finite parameter at flat index " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// Activation

SiluDerivs silu_derivs(double u) {
  SiluDerivs s;
  kernels::scalar_table().silu_jet(1, &u, &s.value, &s.d1, &s.d2, &s.d3);
  return s;
}

namespace debug {
namespace {
std::atomic<double> g_corruption{0.0};
}
void set_backward_corruption(double factor) { g_corruption.store(factor); }
double backward_corruption() { return g_corruption.load(); }
}  // namespace debug

namespace {

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

void check_finite(const Matrix& m, std::size_t layer) {
  for (double v : m.storage()) {
    if (!std::isfinite(v)) {
      throw NumericError("network forward: non-finite activation in layer " +
                         std::to_string(layer));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// JetTape

JetTape JetTape::record(const NetworkParams& net, const Matrix& inputs, JetLayout layout,
                        const Matrix& probes) {
  const std::size_t batch = inputs.rows();
  const std::size_t in = net.in_dim();
  const std::size_t ch = layout.channels();
  if (inputs.cols() != in) throw std::invalid_argument("JetTape: input width mismatch");
  if (layout.input_offset + layout.n_tangents > in) {
    throw std::invalid_argument("JetTape: tangent directions exceed input width");
  }
  if (layout.n_probes > 0) {
    if (probes.rows() != batch * layout.n_probes || probes.cols() + layout.input_offset > in) {
      throw std::invalid_argument("JetTape: probe matrix shape mismatch");
    }
  }

  JetTape tape;
  tape.net_ = &net;
  tape.layout_ = layout;
  tape.batch_ = batch;

  const auto& kt = kernels::active();
  const std::size_t rows = batch * ch;
  const std::size_t n_layers = net.num_layers();

  Matrix x0(rows, in);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(inputs.row(b).data(), in, x0.row(b * ch).data());
    for (std::size_t i = 0; i < layout.n_tangents; ++i) {
      x0(b * ch + layout.tangent_channel(i), layout.input_offset + i) = 1.0;
    }
    for (std::size_t k = 0; k < layout.n_probes; ++k) {
      auto src = probes.row(b * layout.n_probes + k);
      std::copy(src.begin(), src.end(),
                x0.row(b * ch + layout.probe_first_channel(k)).data() + layout.input_offset);
    }
  }
  tape.acts_.push_back(std::move(x0));

  std::vector<double> wt;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t lin = net.layer_dims()[l];
    const std::size_t lout = net.layer_dims()[l + 1];
    wt.resize(lin * lout);
    transpose(net.weights(l).data(), lout, lin, wt.data());
    Matrix pre(rows, lout);
    kt.gemm(rows, lout, lin, tape.acts_[l].data(), lin, wt.data(), lout, pre.data(), lout, false);
    auto bias = net.biases(l);
    for (std::size_t b = 0; b < batch; ++b) {
      double* r = pre.row(b * ch).data();
      for (std::size_t j = 0; j < lout; ++j) r[j] += bias[j];
    }
    check_finite(pre, l);

    if (l + 1 < n_layers) {
      Matrix act(rows, lout);
      Matrix der(batch, 3 * lout);
      for (std::size_t b = 0; b < batch; ++b) {
        const double* a0 = pre.row(b * ch).data();
        double* d = der.row(b).data();
        double* h0 = act.row(b * ch).data();
        kt.silu_jet(lout, a0, h0, d, d + lout, d + 2 * lout);
        const double* d1 = d;
        const double* d2 = d + lout;
        for (std::size_t i = 0; i < layout.n_tangents; ++i) {
          const std::size_t r = b * ch + layout.tangent_channel(i);
          const double* a = pre.row(r).data();
          double* h = act.row(r).data();
          for (std::size_t j = 0; j < lout; ++j) h[j] = d1[j] * a[j];
        }
        for (std::size_t k = 0; k < layout.n_probes; ++k) {
          const std::size_t rf = b * ch + layout.probe_first_channel(k);
          const std::size_t rs = b * ch + layout.probe_second_channel(k);
          const double* af = pre.row(rf).data();
          const double* as = pre.row(rs).data();
          double* hf = act.row(rf).data();
          double* hs = act.row(rs).data();
          for (std::size_t j = 0; j < lout; ++j) {
            hf[j] = d1[j] * af[j];
            hs[j] = d2[j] * af[j] * af[j] + d1[j] * as[j];
          }
        }
      }
      tape.derivs_.push_back(std::move(der));
      tape.pre_.push_back(std::move(pre));
      tape.acts_.push_back(std::move(act));
    } else {
      tape.pre_.push_back(std::move(pre));
    }
  }
  return tape;
}

std::span<const double> JetTape::output(std::size_t b, std::size_t channel) const {
  return pre_.back().row(b * layout_.channels() + channel);
}

TapeGradients JetTape::backward(const Matrix& out_adjoint, bool want_params, bool want_inputs) {
  if (consumed_) throw std::logic_error("JetTape::backward: tape already consumed");
  consumed_ = true;
  const NetworkParams& net = *net_;
  const std::size_t ch = layout_.channels();
  const std::size_t rows = batch_ * ch;
  const std::size_t n_layers = net.num_layers();
  if (out_adjoint.rows() != rows || out_adjoint.cols() != net.out_dim()) {
    throw std::invalid_argument("JetTape::backward: adjoint shape mismatch");
  }
  const auto& kt = kernels::active();
  const double corrupt = 1.0 + debug::backward_corruption();

  TapeGradients grads;
  if (want_params) grads.params = net.zeros_like();

  Matrix abar = out_adjoint;
  std::vector<double> scratch;
  for (std::size_t li = n_layers; li-- > 0;) {
    const std::size_t lin = net.layer_dims()[li];
    const std::size_t lout = net.layer_dims()[li + 1];
    if (want_params) {
      scratch.resize(lout * rows);
      transpose(abar.data(), rows, lout, scratch.data());
      kt.gemm(lout, lin, rows, scratch.data(), rows, acts_[li].data(), lin,
              grads.params.weights(li).data(), lin, true);
      auto db = grads.params.biases(li);
      for (std::size_t b = 0; b < batch_; ++b) {
        const double* r = abar.row(b * ch).data();
        for (std::size_t j = 0; j < lout; ++j) db[j] += r[j];
      }
    }
    if (li == 0 && !want_inputs) break;

    Matrix hbar(rows, lin);
    kt.gemm(rows, lin, lout, abar.data(), lout, net.weights(li).data(), lin, hbar.data(), lin,
            false);
    if (li == 0) {
      grads.inputs = Matrix(batch_, lin);
      for (std::size_t b = 0; b < batch_; ++b) {
        std::copy_n(hbar.row(b * ch).data(), lin, grads.inputs.row(b).data());
      }
      break;
    }

    // Through the SiLU of hidden layer li - 1 (width lin).
    const Matrix& pre = pre_[li - 1];
    const Matrix& der = derivs_[li - 1];
    Matrix prev(rows, lin);
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* d1 = der.row(b).data();
      const double* d2 = d1 + lin;
      const double* d3 = d1 + 2 * lin;
      double* a0bar = prev.row(b * ch).data();
      const double* h0bar = hbar.row(b * ch).data();
      for (std::size_t j = 0; j < lin; ++j) a0bar[j] = h0bar[j] * d1[j] * corrupt;
      for (std::size_t i = 0; i < layout_.n_tangents; ++i) {
        const std::size_t r = b * ch + layout_.tangent_channel(i);
        const double* a = pre.row(r).data();
        const double* hb = hbar.row(r).data();
        double* ab = prev.row(r).data();
        for (std::size_t j = 0; j < lin; ++j) {
          ab[j] = hb[j] * d1[j];
          a0bar[j] += hb[j] * d2[j] * a[j];
        }
      }
      for (std::size_t k = 0; k < layout_.n_probes; ++k) {
        const std::size_t rf = b * ch + layout_.probe_first_channel(k);
        const std::size_t rs = b * ch + layout_.probe_second_channel(k);
        const double* af = pre.row(rf).data();
        const double* as = pre.row(rs).data();
        const double* hbf = hbar.row(rf).data();
        const double* hbs = hbar.row(rs).data();
        double* abf = prev.row(rf).data();
        double* abs_ = prev.row(rs).data();
        for (std::size_t j = 0; j < lin; ++j) {
          abs_[j] = hbs[j] * d1[j];
          abf[j] = hbf[j] * d1[j] + 2.0 * hbs[j] * d2[j] * af[j];
          a0bar[j] += hbf[j] * d2[j] * af[j] + hbs[j] * (d3[j] * af[j] * af[j] + d2[j] * as[j]);
        }
      }
    }
    abar = std::move(prev);
  }
  return grads;
}

Matrix mlp_forward(const NetworkParams& net, const Matrix& inputs) {
  JetTape tape = JetTape::record(net, inputs, JetLayout{});
  Matrix out(inputs.rows(), net.out_dim());
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    auto o = tape.output(b, 0);
    std::copy(o.begin(), o.end(), out.row(b).data());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generator / value network

namespace {
std::vector<std::size_t> mlp_dims(std::size_t in, std::size_t hidden, std::size_t layers,
                                  std::size_t out) {
  std::vector<std::size_t> dims{in};
  for (std::size_t i = 0; i < layers; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}
}  // namespace

Generator Generator::create(std::size_t dim, std::size_t hidden, std::size_t hidden_layers,
                            Rng& rng) {
  return {NetworkParams::glorot(mlp_dims(2 * dim, hidden, hidden_layers, dim), rng, 0.01)};
}

ValueNetwork ValueNetwork::create(std::size_t dim, std::size_t hidden, std::size_t hidden_layers,
                                  Rng& rng) {
  return {NetworkParams::glorot(mlp_dims(dim + 1, hidden, hidden_layers, 1), rng, 1.0)};
}

GeneratorPass generator_forward_batch(const Generator& g, const Matrix& x, const Matrix& z) {
  const std::size_t d = g.dim();
  if (x.cols() != d || z.cols() != d || x.rows() != z.rows() || g.net.in_dim() != 2 * d) {
    throw std::invalid_argument("generator_forward: dimension mismatch");
  }
  Matrix in(x.rows(), 2 * d);
  for (std::size_t b = 0; b < x.rows(); ++b) {
    std::copy_n(x.row(b).data(), d, in.row(b).data());
    std::copy_n(z.row(b).data(), d, in.row(b).data() + d);
  }
  GeneratorPass pass{Matrix(x.rows(), d), JetTape::record(g.net, in, JetLayout{})};
  for (std::size_t b = 0; b < x.rows(); ++b) {
    auto o = pass.tape.output(b, 0);
    for (std::size_t i = 0; i < d; ++i) pass.y_hat(b, i) = x(b, i) + o[i];
  }
  return pass;
}

NetworkParams generator_backward(GeneratorPass& pass, const Matrix& y_hat_adjoint) {
  return pass.tape.backward(y_hat_adjoint, true, false).params;
}

std::vector<double> generator_forward(const Generator& g, std::span<const double> x,
                                      std::span<const double> z) {
  Matrix xm(1, x.size()), zm(1, z.size());
  std::copy(x.begin(), x.end(), xm.data());
  std::copy(z.begin(), z.end(), zm.data());
  auto pass = generator_forward_batch(g, xm, zm);
  return pass.y_hat.storage();
}

Matrix value_inputs(std::span<const double> times, const Matrix& x) {
  if (times.size() != x.rows()) throw std::invalid_argument("value_inputs: batch mismatch");
  Matrix in(x.rows(), x.cols() + 1);
  for (std::size_t b = 0; b < x.rows(); ++b) {
    in(b, 0) = times[b];
    std::copy_n(x.row(b).data(), x.cols(), in.row(b).data() + 1);
  }
  return in;
}

Matrix value_inputs(double t, const Matrix& x) {
  std::vector<double> times(x.rows(), t);
  return value_inputs(times, x);
}

namespace {
Matrix single_value_input(const ValueNetwork& v, double t, std::span<const double> x) {
  if (x.size() != v.dim() || v.net.out_dim() != 1) {
    throw std::invalid_argument("value network: dimension mismatch");
  }
  Matrix in(1, x.size() + 1);
  in(0, 0) = t;
  std::copy(x.begin(), x.end(), in.data() + 1);
  return in;
}
}  // namespace

double value_forward(const ValueNetwork& v, double t, std::span<const double> x) {
  return mlp_forward(v.net, single_value_input(v, t, x))(0, 0);
}

std::vector<double> value_input_grad(const ValueNetwork& v, double t, std::span<const double> x) {
  JetTape tape = JetTape::record(v.net, single_value_input(v, t, x), JetLayout{});
  Matrix seed(1, 1, 1.0);
  TapeGradients g = tape.backward(seed, false, true);
  std::vector<double> out(x.size());
  std::copy_n(g.inputs.data() + 1, x.size(), out.data());
  for (double o : out) {
    if (!std::isfinite(o)) throw NumericError("value_input_grad: non-finite gradient");
  }
  return out;
}

double laplacian_hutchinson(const ValueNetwork& v, double t, std::span<const double> x,
                            std::size_t n_probes, Rng& rng) {
  if (n_probes == 0) throw std::invalid_argument("laplacian_hutchinson: n_probes must be >= 1");
  const std::size_t d = x.size();
  Matrix probes(n_probes, d);
  for (std::size_t k = 0; k < n_probes; ++k) fill_rademacher(rng, probes.row(k));
  JetLayout layout{0, n_probes, 1};
  JetTape tape = JetTape::record(v.net, single_value_input(v, t, x), layout, probes);
  double sum = 0.0;
  for (std::size_t k = 0; k < n_probes; ++k) sum += tape.output(0, layout.probe_second_channel(k))[0];
  return sum / static_cast<double>(n_probes);
}

}  // namespace sfeuot
