#pragma once

#include <cmath>
#include <cstdlib>

#include "piston/common.hpp"

namespace piston {

namespace detail {

// Gauss-Kronrod 7-15 node pair on [-1, 1].
inline constexpr double gk_nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
inline constexpr double gk_weights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr double gauss_weights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

template <class F>
void gk15(F& f, double a, double b, double& value, double& error) {
  const double c = 0.5 * (a + b);
  const double r = 0.5 * (b - a);
  double fk[15];
  for (int i = 0; i < 7; ++i) {
    fk[i] = f(c - r * gk_nodes[i]);
    fk[14 - i] = f(c + r * gk_nodes[i]);
  }
  fk[7] = f(c);
  double kron = 0, gauss = 0;
  for (int i = 0; i < 7; ++i) kron += gk_weights[i] * (fk[i] + fk[14 - i]);
  kron += gk_weights[7] * fk[7];
  for (int i = 0; i < 3; ++i)
    gauss += gauss_weights[i] * (fk[2 * i + 1] + fk[13 - 2 * i]);
  gauss += gauss_weights[3] * fk[7];
  value = r * kron;
  error = std::abs(r * (kron - gauss));
}

template <class F>
double adapt(F& f, double a, double b, double tol, int depth) {
  double v, e;
  gk15(f, a, b, v, e);
  if (e <= tol || depth >= 48) return v;
  double c = 0.5 * (a + b);
  return adapt(f, a, c, 0.5 * tol, depth + 1) +
         adapt(f, c, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of a bounded integrand. Endpoints are
/// never evaluated, but integrable singularities should be removed by a
/// substitution first; the period and phase integrals do this at their
/// turning points.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10) {
  if (!(b > a)) return 0.0;
  double v0, e0;
  detail::gk15(f, a, b, v0, e0);
  double tol = rel_tol * std::max(std::abs(v0), 1e-300);
  if (e0 <= tol) return v0;
  double c = 0.5 * (a + b);
  return detail::adapt(f, a, c, 0.5 * tol, 1) +
         detail::adapt(f, c, b, 0.5 * tol, 1);
}

}  // namespace piston
