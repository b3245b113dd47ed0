#pragma once

// Small fully connected networks with SiLU hidden activations and an identity
// output layer, plus the differentiation engine the training loop needs.
//
// JetTape records a batched forward pass in which every sample carries several
// channels through the network:
//
//   channel 0            primal activations
//   channels 1..T        first-order tangents along unit input directions
//   per probe k          a first-order tangent along a probe direction and the
//                        matching second-order Taylor coefficient
//
// The output of a second-order channel is the quadratic form probe' H probe of
// the input Hessian, which is what the Hutchinson estimator averages. A single
// reverse sweep over the recorded channels gives parameter gradients (and
// primal-input gradients) of any scalar built from values, input gradients
// and probe quadratic forms.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfeuot/matrix.hpp"
#include "sfeuot/random.hpp"

namespace sfeuot {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weights and biases of an MLP stored in one flat buffer. Layer l owns an
/// out x in row-major weight block followed by its out biases.
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(std::vector<std::size_t> layer_dims);

  static NetworkParams glorot(std::vector<std::size_t> layer_dims, Rng& rng,
                              double last_layer_scale = 1.0);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t num_layers() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  std::size_t in_dim() const { return dims_.front(); }
  std::size_t out_dim() const { return dims_.back(); }
  std::size_t num_params() const { return values_.size(); }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> biases(std::size_t layer);
  std::span<const double> biases(std::size_t layer) const;

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  NetworkParams zeros_like() const { return NetworkParams(dims_); }

  /// Throws std::invalid_argument on inconsistent shapes, NumericError on
  /// non-finite entries.
  void validate() const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

struct SiluDerivs {
  double value, d1, d2, d3;
};
SiluDerivs silu_derivs(double u);
inline double silu(double u) { return silu_derivs(u).value; }

struct JetLayout {
  std::size_t n_tangents = 0;
  std::size_t n_probes = 0;
  // Input coordinate where tangent 0 and probe coordinate 0 live; the value
  // network skips its leading time input.
  std::size_t input_offset = 0;

  std::size_t channels() const { return 1 + n_tangents + 2 * n_probes; }
  std::size_t tangent_channel(std::size_t i) const { return 1 + i; }
  std::size_t probe_first_channel(std::size_t k) const { return 1 + n_tangents + 2 * k; }
  std::size_t probe_second_channel(std::size_t k) const { return 2 + n_tangents + 2 * k; }
};

struct TapeGradients {
  NetworkParams params;
  Matrix inputs;  // batch x in_dim, adjoint of the primal inputs
};

class JetTape {
 public:
  /// inputs: batch x in_dim. probes: (batch * n_probes) x (probe width), row
  /// b * n_probes + k; may be empty when n_probes == 0.
  static JetTape record(const NetworkParams& net, const Matrix& inputs, JetLayout layout,
                        const Matrix& probes = {});

  std::size_t batch() const { return batch_; }
  const JetLayout& layout() const { return layout_; }

  /// Output of channel c for sample b (out_dim values).
  std::span<const double> output(std::size_t b, std::size_t channel) const;

  /// Reverse sweep. out_adjoint has shape (batch * channels) x out_dim with
  /// the same row order as the channels. The tape is consumed; a second call
  /// throws std::logic_error.
  TapeGradients backward(const Matrix& out_adjoint, bool want_params = true,
                         bool want_inputs = true);

  bool consumed() const { return consumed_; }

 private:
  const NetworkParams* net_ = nullptr;
  JetLayout layout_;
  std::size_t batch_ = 0;
  std::vector<Matrix> acts_;  // acts_[0] input jets, acts_[l] post-activation
  std::vector<Matrix> pre_;   // pre_[l-1] pre-activation of layer l
  std::vector<Matrix> derivs_;  // per hidden layer: batch x (3 * width): d1, d2, d3
  bool consumed_ = false;
};

/// Plain batched forward (primal channel only).
Matrix mlp_forward(const NetworkParams& net, const Matrix& inputs);

// ---------------------------------------------------------------------------
// Generator and value networks.

/// y_hat = x + net(concat(x, z)); aux dim equals data dim.
struct Generator {
  NetworkParams net;

  std::size_t dim() const { return net.out_dim(); }
  static Generator create(std::size_t dim, std::size_t hidden, std::size_t hidden_layers,
                          Rng& rng);
};

/// Scalar v(t, x) = net(concat(t, x)).
struct ValueNetwork {
  NetworkParams net;

  std::size_t dim() const { return net.in_dim() - 1; }
  static ValueNetwork create(std::size_t dim, std::size_t hidden, std::size_t hidden_layers,
                             Rng& rng);
};

std::vector<double> generator_forward(const Generator& g, std::span<const double> x,
                                      std::span<const double> z);
double value_forward(const ValueNetwork& v, double t, std::span<const double> x);

/// Spatial gradient d v / d x by a reverse sweep.
std::vector<double> value_input_grad(const ValueNetwork& v, double t, std::span<const double> x);

/// Hutchinson-Skilling estimate of the spatial Laplacian with Rademacher probes.
double laplacian_hutchinson(const ValueNetwork& v, double t, std::span<const double> x,
                            std::size_t n_probes, Rng& rng);

/// Generic Hutchinson estimator: quad(probe) must return probe' H probe.
template <class QuadForm>
double hutchinson_trace(QuadForm&& quad, std::size_t dim, std::size_t n_probes, Rng& rng) {
  if (n_probes == 0) throw std::invalid_argument("hutchinson_trace: n_probes must be >= 1");
  std::vector<double> probe(dim);
  double sum = 0.0;
  for (std::size_t k = 0; k < n_probes; ++k) {
    fill_rademacher(rng, probe);
    sum += quad(std::span<const double>(probe));
  }
  return sum / static_cast<double>(n_probes);
}

/// Batched generator pass that keeps its tape for a later parameter sweep.
struct GeneratorPass {
  Matrix y_hat;  // batch x dim
  JetTape tape;
};
GeneratorPass generator_forward_batch(const Generator& g, const Matrix& x, const Matrix& z);

/// Parameter gradient of sum_b <y_hat_adjoint_b, y_hat_b>.
NetworkParams generator_backward(GeneratorPass& pass, const Matrix& y_hat_adjoint);

/// Builds the batch x (1 + dim) value-network input from times and points.
Matrix value_inputs(std::span<const double> times, const Matrix& x);
Matrix value_inputs(double t, const Matrix& x);

namespace debug {
/// Scales the primal activation derivative used in reverse sweeps by
/// (1 + factor). Zero in normal operation; gradient checks use a nonzero
/// value as a negative control.
void set_backward_corruption(double factor);
double backward_corruption();
}  // namespace debug

}  // namespace sfeuot
