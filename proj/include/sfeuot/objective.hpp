#pragma once

// HJB residual of the value network along simulation-free bridge samples and
// the two alternating training losses built on it.

#include <vector>

#include "sfeuot/entropy.hpp"
#include "sfeuot/matrix.hpp"
#include "sfeuot/nets.hpp"

namespace sfeuot {

struct LossWeights {
  double alpha = 1.0;
  double sigma = 1.0;
  double lambda_g = 1.0;
  double lambda_d = 1.0;
  double p = 2.0;  // HJB penalty exponent, 1 <= p <= 2
  double r1_coeff = 0.0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Samples on which the residual is evaluated. Rows of x_t / x_next are
/// samples; probes holds n_probes Rademacher rows per sample (row b*K + k).
struct ResidualBatch {
  std::vector<double> t;
  Matrix x_t;
  Matrix x_next;
  double dt = 0.05;
  Matrix probes;
  std::size_t n_probes = 1;

  std::size_t size() const { return t.size(); }
};

Matrix draw_probes(std::size_t batch, std::size_t n_probes, std::size_t dim, Rng& rng);

struct ResidualCache {
  std::vector<double> residual;    // R per sample
  std::vector<double> value_t;     // v(t, x_t)
  std::vector<double> value_next;  // v(t + dt, x_next)
  Matrix grad;                     // grad_x v(t, x_t)
  std::vector<double> laplacian;   // probe-averaged Laplacian estimate at (t, x_t)
  JetTape jet;                     // tape at (t, x_t)
  JetTape next;                    // tape at (t + dt, x_next)
};

///   R = (v(t+dt, x_next) - v(t, x_t)) / dt - (alpha/2) |grad v(t, x_t)|^2
///       + (sigma^2/2) lap v(t, x_t)
ResidualCache hjb_residual(const ValueNetwork& v, const ResidualBatch& batch,
                           const LossWeights& w);

/// Derivative of |R|^p, with sign(0) = 0.
double hjb_penalty(double r, double p);
double hjb_penalty_grad(double r, double p);

struct ValueLossResult {
  double loss = 0.0;
  double mean_abs_residual = 0.0;
  NetworkParams grad;  // gradient w.r.t. the value network parameters
};

/// mean[ lambda_d |R|^p - (alpha/2)|grad v|^2 + r1 |grad v|^2 - v(1, y_hat) ]
///   + mean[ conj(v(1, y_real)) ].
/// Generator samples enter as constants.
ValueLossResult value_loss(const ValueNetwork& v, const ResidualBatch& batch, const Matrix& y_hat,
                           const Matrix& y_real, const EntropySpec& psi, const LossWeights& w);

struct GeneratorLossResult {
  double loss = 0.0;
  double mean_abs_residual = 0.0;
  Matrix d_x_t;     // dL / d x_t
  Matrix d_x_next;  // dL / d x_next
};

/// lambda_g * mean(R); value parameters are constants.
GeneratorLossResult generator_loss(const ValueNetwork& v, const ResidualBatch& batch,
                                   const LossWeights& w);

/// Bridge draw behind a residual batch: endpoints, noise and per-sample time.
struct BridgeDraw {
  Matrix x;
  Matrix y_hat;
  Matrix eta1;
  Matrix eta2;
  std::vector<double> t;
};

/// x_t from bridge_sample, x_next from conditional_step.
ResidualBatch make_residual_batch(const BridgeDraw& draw, double dt, double sigma, Matrix probes,
                                  std::size_t n_probes);

/// Pulls dL/dx_t and dL/dx_next back to dL/dy_hat through the bridge maps.
Matrix chain_to_y_hat(const GeneratorLossResult& g, const BridgeDraw& draw, double dt);

}  // namespace sfeuot
