#include "sfeuot/entropy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sfeuot {
namespace {

void check(const EntropySpec& spec, double x) {
  if (!std::isfinite(x)) throw std::domain_error("entropy conjugate: non-finite argument");
  if (spec.kind == EntropySpec::Kind::ScaledKL && !(spec.scale > 0.0 && std::isfinite(spec.scale))) {
    throw std::domain_error("entropy conjugate: KL scale must be positive");
  }
}

constexpr double kSoftplusCut = 30.0;

// log(1 + e^x) without overflow.
double softplus(double x) {
  if (x > kSoftplusCut) return x + std::log1p(std::exp(-x));
  if (x < -kSoftplusCut) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

EntropySpec parse_entropy_kind(std::string_view name, double scale) {
  if (name == "indicator") return EntropySpec::indicator();
  if (name == "kl") return EntropySpec::scaled_kl(scale);
  if (name == "softplus") return EntropySpec::softplus();
  throw std::invalid_argument("unknown entropy kind '" + std::string(name) +
                              "' (expected indicator, kl or softplus)");
}

std::string entropy_kind_name(EntropySpec::Kind kind) {
  switch (kind) {
    case EntropySpec::Kind::Indicator: return "indicator";
    case EntropySpec::Kind::ScaledKL: return "kl";
    case EntropySpec::Kind::SoftplusConjugate: return "softplus";
  }
  return "indicator";
}

double conjugate_eval(const EntropySpec& spec, double x) {
  check(spec, x);
  switch (spec.kind) {
    case EntropySpec::Kind::Indicator:
      return x;
    case EntropySpec::Kind::ScaledKL: {
      const double c = spec.scale;
      return c * std::expm1(x / c);
    }
    case EntropySpec::Kind::SoftplusConjugate:
      return 2.0 * softplus(x) - 2.0 * std::numbers::ln2;
  }
  return x;
}

double conjugate_grad(const EntropySpec& spec, double x) {
  check(spec, x);
  switch (spec.kind) {
    case EntropySpec::Kind::Indicator:
      return 1.0;
    case EntropySpec::Kind::ScaledKL:
      return std::exp(x / spec.scale);
    case EntropySpec::Kind::SoftplusConjugate:
      return 2.0 * sigmoid(x);
  }
  return 1.0;
}

}  // namespace sfeuot
