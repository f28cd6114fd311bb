#pragma once

#include <cmath>
#include <concepts>
#include <string>

#include "piston/common.hpp"

namespace piston {

/// Unscaled interaction profile kappa: C^2, kappa(x) = 0 for x >= 1,
/// kappa'(x) < 0 for x < 1, with the inverse available on [0, kappa(0)].
template <class K>
concept InteractionKernel = requires(const K k, double x) {
  { k.value(x) } -> std::convertible_to<double>;
  { k.slope(x) } -> std::convertible_to<double>;
  { k.curvature(x) } -> std::convertible_to<double>;
  { k.inverse(x) } -> std::convertible_to<double>;
  { k.height() } -> std::convertible_to<double>;
  { k.name() } -> std::convertible_to<std::string>;
};

/// kappa(x) = (1-x)^3 for x <= 1. Closed-form inverse, C^2 at x = 1.
struct CubicKernel {
  double value(double x) const { return x < 1 ? sq(1 - x) * (1 - x) : 0.0; }
  double slope(double x) const { return x < 1 ? -3.0 * sq(1 - x) : 0.0; }
  double curvature(double x) const { return x < 1 ? 6.0 * (1 - x) : 0.0; }
  double inverse(double y) const { return 1.0 - std::cbrt(y); }
  double height() const { return 1.0; }
  std::string name() const { return "cubic"; }
};

/// kappa(x) = (1-x)^4 for x <= 1; one degree smoother at the cutoff.
struct QuarticKernel {
  double value(double x) const { return x < 1 ? sq(sq(1 - x)) : 0.0; }
  double slope(double x) const { return x < 1 ? -4.0 * sq(1 - x) * (1 - x) : 0.0; }
  double curvature(double x) const { return x < 1 ? 12.0 * sq(1 - x) : 0.0; }
  double inverse(double y) const { return 1.0 - std::sqrt(std::sqrt(y)); }
  double height() const { return 1.0; }
  std::string name() const { return "quartic"; }
};

/// kappa_delta(x) = kappa(x/delta): the range-delta wall/piston potential.
template <InteractionKernel K>
struct Smoothing {
  K kernel{};
  double delta = 0;

  double value(double x) const { return kernel.value(x / delta); }
  double slope(double x) const { return kernel.slope(x / delta) / delta; }
  double curvature(double x) const {
    return kernel.curvature(x / delta) / sq(delta);
  }
  double height() const { return kernel.height(); }

  /// Turning point a with kappa_delta(a) = E, i.e. a = delta * inverse(E).
  double turning_point(double energy) const {
    if (!(energy > 0) || !(energy < kernel.height()))
      throw ConfigError("turning point requires 0 < E < kappa(0)");
    return delta * kernel.inverse(energy);
  }
};

}  // namespace piston
