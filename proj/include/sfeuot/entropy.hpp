#pragma once

#include <string>
#include <string_view>

namespace sfeuot {

/// Entropy function family for the target-marginal penalty. Only the convex
/// conjugate and its derivative are ever evaluated.
///
///   Indicator         : conj(x) = x                 (balanced / EOT mode)
///   ScaledKL (c)      : conj(x) = c e^{x/c} - c     (c times KL)
///   SoftplusConjugate : conj(x) = 2 log(1+e^x) - 2 log 2
struct EntropySpec {
  enum class Kind { Indicator, ScaledKL, SoftplusConjugate };

  Kind kind = Kind::Indicator;
  double scale = 5.0;  // KL scale c; ignored by the other kinds

  static EntropySpec indicator() { return {Kind::Indicator, 5.0}; }
  static EntropySpec scaled_kl(double c = 5.0) { return {Kind::ScaledKL, c}; }
  static EntropySpec softplus() { return {Kind::SoftplusConjugate, 5.0}; }

  friend bool operator==(const EntropySpec&, const EntropySpec&) = default;
};

/// Config names: "indicator", "kl", "softplus".
EntropySpec parse_entropy_kind(std::string_view name, double scale = 5.0);
std::string entropy_kind_name(EntropySpec::Kind kind);

/// Throws std::domain_error on non-finite x or a non-positive KL scale.
double conjugate_eval(const EntropySpec& spec, double x);
double conjugate_grad(const EntropySpec& spec, double x);

}  // namespace sfeuot
