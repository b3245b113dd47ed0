#pragma once

// Finite-difference checks of every analytic derivative the trainer relies
// on: loss gradients w.r.t. both networks, input gradients of the value
// network, and parameter gradients through the Hutchinson probe path.

#include <cstdint>
#include <string>
#include <vector>

namespace sfeuot {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t dim = 2;
  std::size_t hidden = 8;
  std::size_t hidden_layers = 2;
  std::size_t points = 20;  // random points per term
  std::size_t batch = 4;
  std::size_t probes = 2;
  double tolerance = 1e-3;
};

struct GradcheckTerm {
  std::string name;
  double worst_rel_error = 0.0;
  std::size_t points = 0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckTerm> terms;
  bool passed() const;
};

/// Relative error max|a - b| / max(max|a|, max|b|, 1e-8).
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

GradcheckReport run_gradcheck(const GradcheckOptions& opts);

}  // namespace sfeuot
