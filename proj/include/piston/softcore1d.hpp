#pragma once

#include <cmath>
#include <vector>

#include "piston/averaged.hpp"
#include "piston/common.hpp"
#include "piston/kernels.hpp"
#include "piston/quadrature.hpp"
#include "piston/slow_state.hpp"

namespace piston::soft1d {

// Smoothed piston system: gas particles interact with the walls and the
// piston through the potential kappa_delta instead of hard collisions. The
// whole system is one smooth Hamiltonian ODE,
//   dQ/dt = eps W
//   dW/dt = eps ( -kappa_d'(Q - q_1j) + kappa_d'(q_2j - Q) )
//   dq/dt = v,   m dv/dt = wall and piston forces,
// integrated by a symplectic splitting.

struct SoftParticle {
  double q = 0;
  double v = 0;
  double m = 1;
};

template <InteractionKernel K>
struct System {
  Smoothing<K> pot;
  double eps = 0;  // M^{-1/2}
  double Q = 0.5;
  double W = 0;
  std::vector<SoftParticle> left, right;
  double time = 0;
};

/// E_{i,j} = m v^2/2 + both confining potential terms of that particle.
template <InteractionKernel K>
double particle_energy(const System<K>& sys, Side side, std::size_t j) {
  if (side == Side::Left) {
    const SoftParticle& p = sys.left[j];
    return 0.5 * p.m * sq(p.v) + sys.pot.value(p.q) + sys.pot.value(sys.Q - p.q);
  }
  const SoftParticle& p = sys.right[j];
  return 0.5 * p.m * sq(p.v) + sys.pot.value(p.q - sys.Q) +
         sys.pot.value(1 - p.q);
}

/// Conserved total: W^2/2 + sum E_{i,j}.
template <InteractionKernel K>
double total_energy(const System<K>& sys) {
  double e = 0.5 * sq(sys.W);
  for (std::size_t j = 0; j < sys.left.size(); ++j)
    e += particle_energy(sys, Side::Left, j);
  for (std::size_t j = 0; j < sys.right.size(); ++j)
    e += particle_energy(sys, Side::Right, j);
  return e;
}

template <InteractionKernel K>
SlowState slow_projection(const System<K>& sys) {
  SlowState h;
  h.dim = 1;
  h.Q = sys.Q;
  h.W = sys.W;
  for (std::size_t j = 0; j < sys.left.size(); ++j)
    h.left.push_back(particle_energy(sys, Side::Left, j));
  for (std::size_t j = 0; j < sys.right.size(); ++j)
    h.right.push_back(particle_energy(sys, Side::Right, j));
  return h;
}

struct Derivative {
  double dQ = 0, dW = 0;
  std::vector<double> dq_left, dv_left, dq_right, dv_right;
};

/// The Hamiltonian right-hand side, exactly as integrated.
template <InteractionKernel K>
Derivative rhs(const System<K>& sys) {
  Derivative d;
  d.dQ = sys.eps * sys.W;
  double fQ = 0;
  for (const auto& p : sys.left) {
    fQ -= sys.pot.slope(sys.Q - p.q);
    d.dq_left.push_back(p.v);
    d.dv_left.push_back(
        (-sys.pot.slope(p.q) + sys.pot.slope(sys.Q - p.q)) / p.m);
  }
  for (const auto& p : sys.right) {
    fQ += sys.pot.slope(p.q - sys.Q);
    d.dq_right.push_back(p.v);
    d.dv_right.push_back(
        (-sys.pot.slope(p.q - sys.Q) + sys.pot.slope(1 - p.q)) / p.m);
  }
  d.dW = sys.eps * fQ;
  return d;
}

// ---------------------------------------------------------------------------
// Period, phase integral and the averaged field.

/// Exact bounce period of one particle in [0,L] with potential walls at both
/// ends (L = Q for a left particle, 1-Q for a right one):
///   T = 2 int_a^{L-a} sqrt( (m/2) / (E - U(s)) ) ds,  kappa_d(a) = E.
/// The flat middle is integrated in closed form; each potential edge is
/// mapped by s = a + (delta-a) w^2 so the turning-point inverse-square-root
/// singularity drops out before quadrature. delta = 0 reduces to
/// sqrt(2m/E) L.
template <InteractionKernel K>
double bounce_period(double L, double energy, const Smoothing<K>& pot,
                     double mass, double rel_tol = 1e-9) {
  if (!(energy > 0)) throw ConfigError("bounce period requires E > 0");
  if (pot.delta == 0) return std::sqrt(2 * mass / energy) * L;
  if (!(energy < pot.height()))
    throw ConfigError("bounce period requires E < kappa(0)");
  if (!(pot.delta < 0.5 * L))
    throw ConfigError("smoothing range must satisfy delta < L/2");
  double a = pot.turning_point(energy);
  double middle = (L - 2 * pot.delta) * std::sqrt(2 * mass / energy);
  double span = pot.delta - a;
  double edge =
      2 * std::sqrt(0.5 * mass) * 2 * span *
      integrate(
          [&](double w) {
            double s = a + span * sq(w);
            double gap = energy - pot.value(s);
            return gap > 0 ? w / std::sqrt(gap) : 0.0;
          },
          0.0, 1.0, rel_tol);
  return middle + 2 * edge;
}

template <InteractionKernel K>
double bounce_period(double Q, double energy, const Smoothing<K>& pot,
                     double mass, Side side, double rel_tol = 1e-9) {
  return bounce_period(side == Side::Left ? Q : 1 - Q, energy, pot, mass,
                       rel_tol);
}

/// Phase-plane area enclosed by the energy level set,
///   I = 2 int sqrt( 2 (E - U(s)) / m ) ds over the allowed region.
/// Adiabatic invariant of the soft averaged flow. delta = 0 gives the
/// rectangle 2 L sqrt(2E/m).
template <InteractionKernel K>
double phase_integral(double L, double energy, const Smoothing<K>& pot,
                      double mass, double rel_tol = 1e-8) {
  if (!(energy > 0)) throw ConfigError("phase integral requires E > 0");
  if (pot.delta == 0) return 2 * L * std::sqrt(2 * energy / mass);
  if (!(energy < pot.height()))
    throw ConfigError("phase integral requires E < kappa(0)");
  if (!(pot.delta < 0.5 * L))
    throw ConfigError("smoothing range must satisfy delta < L/2");
  double a = pot.turning_point(energy);
  double middle = 2 * (L - 2 * pot.delta) * std::sqrt(2 * energy / mass);
  double span = pot.delta - a;
  double edge = 2 * 2 * span *
                integrate(
                    [&](double w) {
                      double s = a + span * sq(w);
                      double gap = energy - pot.value(s);
                      return gap > 0 ? w * std::sqrt(2 * gap / mass) : 0.0;
                    },
                    0.0, 1.0, rel_tol);
  return middle + 2 * edge;
}

template <InteractionKernel K>
double phase_integral(double Q, double energy, const Smoothing<K>& pot,
                      double mass, Side side, double rel_tol = 1e-8) {
  return phase_integral(side == Side::Left ? Q : 1 - Q, energy, pot, mass,
                        rel_tol);
}

/// Averaged vector field of the soft system:
///   dW/dtau = sum sqrt(8 m E_1j)/T_1j - sum sqrt(8 m E_2j)/T_2j
///   dE_1j/dtau = -W sqrt(8 m E_1j)/T_1j,   dE_2j/dtau = +W sqrt(8 m E_2j)/T_2j
/// with T the bounce periods. At delta = 0 this is the hard-core averaged
/// field in energy coordinates.
template <InteractionKernel K>
struct SoftAveraged {
  Smoothing<K> pot;
  std::vector<double> m_left{1.0}, m_right{1.0};

  SlowState rhs(const SlowState& h) const {
    SlowState d = h;
    d.Q = h.W;
    double dw = 0;
    for (std::size_t j = 0; j < h.left.size(); ++j) {
      double flux = std::sqrt(8 * m_left[j] * h.left[j]) /
                    bounce_period(h.Q, h.left[j], pot, m_left[j], Side::Left);
      dw += flux;
      d.left[j] = -h.W * flux;
    }
    for (std::size_t j = 0; j < h.right.size(); ++j) {
      double flux = std::sqrt(8 * m_right[j] * h.right[j]) /
                    bounce_period(h.Q, h.right[j], pot, m_right[j], Side::Right);
      dw -= flux;
      d.right[j] = h.W * flux;
    }
    d.W = dw;
    return d;
  }

  /// The soft averaged flow conserves the total slow energy; the effective
  /// Hamiltonian itself lives on the foliation by the phase integrals.
  double invariant(const SlowState& h, const SlowState&) const {
    return h.slow_energy();
  }
};

// ---------------------------------------------------------------------------
// Symplectic integration: Suzuki's 4th-order composition of Strang
// kick-drift-kick steps. Kicks move (W, v) by the potential forces, drifts
// move (Q, q) linearly.

struct StepControl {
  double resolution = 50;  // integration steps per crossing of the zone delta
  double sample_dt = 1.0;  // fast-time sampling interval
  double drift_tol = 1e-8;
};

struct SoftResult {
  Trajectory trajectory;
  double energy_initial = 0;
  double energy_final = 0;
  double max_drift = 0;
  double step = 0;
  std::uint64_t steps = 0;

  double energy_drift() const {
    return std::abs(energy_final - energy_initial) /
           std::max(std::abs(energy_initial), 1e-300);
  }
};

namespace detail {

template <InteractionKernel K>
void kick(System<K>& sys, double dt) {
  double fQ = 0;
  for (auto& p : sys.left) {
    double piston_side = sys.pot.slope(sys.Q - p.q);
    fQ -= piston_side;
    p.v += dt * (-sys.pot.slope(p.q) + piston_side) / p.m;
  }
  for (auto& p : sys.right) {
    double piston_side = sys.pot.slope(p.q - sys.Q);
    fQ += piston_side;
    p.v += dt * (-piston_side + sys.pot.slope(1 - p.q)) / p.m;
  }
  sys.W += dt * sys.eps * fQ;
}

template <InteractionKernel K>
void drift(System<K>& sys, double dt) {
  sys.Q += dt * sys.eps * sys.W;
  for (auto& p : sys.left) p.q += dt * p.v;
  for (auto& p : sys.right) p.q += dt * p.v;
}

template <InteractionKernel K>
void strang(System<K>& sys, double dt) {
  kick(sys, 0.5 * dt);
  drift(sys, dt);
  kick(sys, 0.5 * dt);
}

template <InteractionKernel K>
void suzuki4(System<K>& sys, double dt) {
  constexpr double w1 = 1.0 / (4.0 - 1.5874010519681994);  // 4 - 4^{1/3}
  constexpr double wm = 1.0 - 4.0 * w1;
  strang(sys, w1 * dt);
  strang(sys, w1 * dt);
  strang(sys, wm * dt);
  strang(sys, w1 * dt);
  strang(sys, w1 * dt);
}

}  // namespace detail

namespace detail {

// Zone bookkeeping: a particle feels a force only within distance delta of
// its wall or of the piston face. Outside every zone the motion is exact
// free flight, and the kernel is smooth strictly inside a zone; the only
// non-smooth points are the zone edges. The integrator therefore drifts
// exactly between zones and aligns step boundaries with zone entry and exit,
// so the composition never straddles a kink.

template <InteractionKernel K>
bool in_zone(const System<K>& sys) {
  // small slack so a particle parked on the edge by the aligned step
  // engages the stepper instead of stalling
  double d = sys.pot.delta * (1 + 1e-9);
  for (const auto& p : sys.left)
    if (p.q < d || sys.Q - p.q < d) return true;
  for (const auto& p : sys.right)
    if (1 - p.q < d || p.q - sys.Q < d) return true;
  return false;
}

/// Earliest future boundary crossing under straight-line motion (exact in
/// free flight, first-order prediction inside a zone); +inf if none.
template <InteractionKernel K>
double next_crossing(const System<K>& sys) {
  double d = sys.pot.delta;
  double vp = sys.eps * sys.W;
  double best = inf;
  auto consider = [&](double gap, double rate) {
    // crossing of gap(t) = gap + rate*t through 0
    if (rate == 0) return;
    double t = -gap / rate;
    if (t > 1e-15 && t < best) best = t;
  };
  for (const auto& p : sys.left) {
    consider(p.q - d, p.v);                    // wall zone edge q = delta
    consider(sys.Q - p.q - d, vp - p.v);       // piston zone edge
  }
  for (const auto& p : sys.right) {
    consider(1 - p.q - d, -p.v);               // wall zone edge q = 1-delta
    consider(p.q - sys.Q - d, p.v - vp);       // piston zone edge
  }
  return best;
}

}  // namespace detail

/// Integrates the soft system to fast time t_end, sampling the slow
/// variables every sample_dt (tau = eps t; tau = t when eps = 0).
/// Free flight between interaction zones is advanced exactly; inside a zone
/// the splitting runs at h = delta / (resolution * v_max), with steps
/// clamped to land on zone edges. Throws if the relative energy drift
/// exceeds 10x the tolerance or a particle escapes the box.
template <InteractionKernel K>
SoftResult integrate_soft(System<K> sys, double t_end, StepControl ctl = {}) {
  if (!(sys.pot.delta > 0)) throw ConfigError("integrate_soft requires delta > 0");
  SoftResult res;
  res.energy_initial = total_energy(sys);

  double v_max = std::abs(sys.eps * sys.W);
  for (std::size_t j = 0; j < sys.left.size(); ++j)
    v_max = std::max(v_max, std::sqrt(2 * particle_energy(sys, Side::Left, j) /
                                      sys.left[j].m));
  for (std::size_t j = 0; j < sys.right.size(); ++j)
    v_max = std::max(v_max, std::sqrt(2 * particle_energy(sys, Side::Right, j) /
                                      sys.right[j].m));
  v_max *= 1.25;  // energies breathe along the averaged orbit
  double h = sys.pot.delta / (ctl.resolution * std::max(v_max, 1e-12));
  res.step = h;

  double tau_scale = sys.eps > 0 ? sys.eps : 1.0;
  res.trajectory.source = "actual";
  res.trajectory.epsilon = sys.eps;
  res.trajectory.delta = sys.pot.delta;
  res.trajectory.push(0.0, slow_projection(sys));

  double t = 0;
  for (std::uint64_t s = 1; t < t_end - 1e-13; ++s) {
    double t_goal = std::min(double(s) * ctl.sample_dt, t_end);
    while (t < t_goal - 1e-13) {
      double remaining = t_goal - t;
      double dt;
      if (!detail::in_zone(sys)) {
        dt = std::min(remaining, detail::next_crossing(sys));
        detail::drift(sys, dt);
      } else {
        dt = std::min({remaining, h, detail::next_crossing(sys)});
        detail::suzuki4(sys, dt);
        ++res.steps;
      }
      t += dt;
    }
    t = t_goal;
    sys.time = t;
    res.trajectory.push(tau_scale * t, slow_projection(sys));

    double drift = std::abs(total_energy(sys) - res.energy_initial) /
                   std::max(std::abs(res.energy_initial), 1e-300);
    res.max_drift = std::max(res.max_drift, drift);
    if (drift > 10 * ctl.drift_tol)
      throw NumericalError("soft integrator energy drift " +
                           format_double(drift) + " exceeds 10x tolerance");
    double margin = 2 * sys.pot.delta;
    for (const auto& p : sys.left)
      if (p.q < -margin || p.q > sys.Q + margin)
        throw NumericalError("left particle escaped its chamber");
    for (const auto& p : sys.right)
      if (p.q < sys.Q - margin || p.q > 1 + margin)
        throw NumericalError("right particle escaped its chamber");
  }
  res.energy_final = total_energy(sys);
  return res;
}

}  // namespace piston::soft1d
