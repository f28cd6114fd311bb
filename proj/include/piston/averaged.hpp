#pragma once

#include <cmath>
#include <concepts>
#include <optional>
#include <vector>

#include "piston/common.hpp"
#include "piston/slow_state.hpp"

namespace piston::averaged {

// ---------------------------------------------------------------------------
// SlowState arithmetic for the integrator (derivatives reuse the same shape).

inline SlowState scaled_sum(const SlowState& h, double a, const SlowState& k) {
  SlowState out = h;
  out.Q += a * k.Q;
  out.W += a * k.W;
  for (std::size_t j = 0; j < out.left.size(); ++j) out.left[j] += a * k.left[j];
  for (std::size_t j = 0; j < out.right.size(); ++j)
    out.right[j] += a * k.right[j];
  return out;
}

template <class Model>
concept AveragedModel = requires(const Model m, const SlowState& h) {
  { m.rhs(h) } -> std::same_as<SlowState>;
  { m.invariant(h, h) } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// 1D hard-core averaged equation, evaluated in the speed coordinates
// s = sqrt(2E/m):
//   dW/dtau  =  sum m s1^2 / Q  -  sum m s2^2 / (1-Q)
//   ds1/dtau = -s1 W / Q,   ds2/dtau = +s2 W / (1-Q)
// and converted back to per-particle energy derivatives dE = m s ds.

struct Hard1D {
  std::vector<double> m_left{1.0}, m_right{1.0};

  SlowState rhs(const SlowState& h) const {
    if (!(h.Q > 0 && h.Q < 1))
      throw NumericalError("averaged field undefined at Q = 0 or 1");
    SlowState d = h;
    d.Q = h.W;
    double sum1 = 0, sum2 = 0;
    for (std::size_t j = 0; j < h.left.size(); ++j) {
      double s = SlowState::speed(h.left[j], m_left[j]);
      sum1 += m_left[j] * sq(s);
      double ds = -s * h.W / h.Q;
      d.left[j] = m_left[j] * s * ds;
    }
    for (std::size_t j = 0; j < h.right.size(); ++j) {
      double s = SlowState::speed(h.right[j], m_right[j]);
      sum2 += m_right[j] * sq(s);
      double ds = s * h.W / (1 - h.Q);
      d.right[j] = m_right[j] * s * ds;
    }
    d.W = sum1 / h.Q - sum2 / (1 - h.Q);
    return d;
  }

  /// W^2/2 + E1(0) Q(0)^2/Q^2 + E2(0) (1-Q(0))^2/(1-Q)^2
  double invariant(const SlowState& h, const SlowState& h0) const {
    return 0.5 * sq(h.W) + h0.left_total() * sq(h0.Q / h.Q) +
           h0.right_total() * sq((1 - h0.Q) / (1 - h.Q));
  }
};

// ---------------------------------------------------------------------------
// d-dimensional averaged equation. Geometry enters only through the chamber
// areas, affine in Q: |D1|(Q) = a1 + ell*Q and |D2|(Q) = a2 + ell*(1-Q).

struct DDim {
  int d = 2;
  double ell = 1.0;
  double a1 = 0.0;  // |D1|(0)
  double a2 = 0.0;  // |D2|(1)

  static DDim hard_rod() { return {1, 1.0, 0.0, 0.0}; }  // |D1| = Q, |D2| = 1-Q

  double area1(double Q) const { return a1 + ell * Q; }
  double area2(double Q) const { return a2 + ell * (1 - Q); }

  SlowState rhs(const SlowState& h) const {
    double A1 = area1(h.Q), A2 = area2(h.Q);
    if (!(A1 > 0 && A2 > 0))
      throw NumericalError("chamber area vanished in averaged field");
    SlowState out = h;
    out.Q = h.W;
    out.W = 2 * h.left_total() * ell / (d * A1) -
            2 * h.right_total() * ell / (d * A2);
    for (std::size_t j = 0; j < h.left.size(); ++j)
      out.left[j] = -2 * h.W * h.left[j] * ell / (d * A1);
    for (std::size_t j = 0; j < h.right.size(); ++j)
      out.right[j] = 2 * h.W * h.right[j] * ell / (d * A2);
    return out;
  }

  /// W^2/2 + sum_i E_i(0) (|D_i(Q0)|/|D_i(Q)|)^{2/d}
  double invariant(const SlowState& h, const SlowState& h0) const {
    double e = 2.0 / d;
    return 0.5 * sq(h.W) +
           h0.left_total() * std::pow(area1(h0.Q) / area1(h.Q), e) +
           h0.right_total() * std::pow(area2(h0.Q) / area2(h.Q), e);
  }

  /// E_{i,j}(Q) = E_{i,j}(0) (|D_i(Q0)|/|D_i(Q)|)^{2/d}
  SlowState adiabatic_energies(const SlowState& h0, double Q) const {
    SlowState h = h0;
    h.Q = Q;
    double f1 = std::pow(area1(h0.Q) / area1(Q), 2.0 / d);
    double f2 = std::pow(area2(h0.Q) / area2(Q), 2.0 / d);
    for (auto& e : h.left) e *= f1;
    for (auto& e : h.right) e *= f2;
    return h;
  }
};

template <AveragedModel Model>
double effective_hamiltonian(const Model& model, const SlowState& h,
                             const SlowState& h0) {
  return model.invariant(h, h0);
}

// ---------------------------------------------------------------------------
// Fixed-step RK4 with cubic Hermite dense output and a per-step conserved-
// quantity guard: if one step drifts the invariant by more than 1e-10
// relative, the step is halved (at most 6 times overall).

struct IntegrateOptions {
  double step = 1e-4;
  double sample_dtau = 1e-3;
  const Window* window = nullptr;  // integration halts when h leaves it
};

struct DenseOutput {
  std::vector<double> tau;
  std::vector<SlowState> h;
  std::vector<SlowState> dh;

  SlowState at(double t) const {
    if (t <= tau.front()) return h.front();
    if (t >= tau.back()) return h.back();
    auto it = std::upper_bound(tau.begin(), tau.end(), t);
    std::size_t i = std::size_t(it - tau.begin()) - 1;
    double dt = tau[i + 1] - tau[i];
    double u = (t - tau[i]) / dt;
    double h00 = (1 + 2 * u) * sq(1 - u), h10 = u * sq(1 - u);
    double h01 = sq(u) * (3 - 2 * u), h11 = sq(u) * (u - 1);
    auto mix = [&](double a, double da, double b, double db) {
      return h00 * a + h10 * dt * da + h01 * b + h11 * dt * db;
    };
    const SlowState &a = h[i], &b = h[i + 1];
    const SlowState &da = dh[i], &db = dh[i + 1];
    SlowState out = a;
    out.Q = mix(a.Q, da.Q, b.Q, db.Q);
    out.W = mix(a.W, da.W, b.W, db.W);
    for (std::size_t j = 0; j < out.left.size(); ++j)
      out.left[j] = mix(a.left[j], da.left[j], b.left[j], db.left[j]);
    for (std::size_t j = 0; j < out.right.size(); ++j)
      out.right[j] = mix(a.right[j], da.right[j], b.right[j], db.right[j]);
    return out;
  }
};

struct IntegrateResult {
  Trajectory trajectory;
  DenseOutput dense;
  double stopping_tau = inf;  // first tau outside the window, if any
  double max_invariant_drift = 0;
};

template <AveragedModel Model>
IntegrateResult integrate(const Model& model, const SlowState& h0,
                          double tau_end, IntegrateOptions opt = {}) {
  if (!(tau_end >= 0)) throw ConfigError("tau_end must be nonnegative");
  IntegrateResult res;
  double step = opt.step;
  int halvings = 0;

  SlowState h = h0;
  double tau = 0;
  double inv0 = model.invariant(h0, h0);
  double inv_scale = std::max(std::abs(inv0), 1e-300);

  res.dense.tau.push_back(0);
  res.dense.h.push_back(h);
  res.dense.dh.push_back(model.rhs(h));

  while (tau < tau_end) {
    double dt = std::min(step, tau_end - tau);
    SlowState k1 = model.rhs(h);
    SlowState k2 = model.rhs(scaled_sum(h, 0.5 * dt, k1));
    SlowState k3 = model.rhs(scaled_sum(h, 0.5 * dt, k2));
    SlowState k4 = model.rhs(scaled_sum(h, dt, k3));
    SlowState sum = scaled_sum(k1, 2.0, k2);
    sum = scaled_sum(sum, 2.0, k3);
    sum = scaled_sum(sum, 1.0, k4);
    SlowState h_new = scaled_sum(h, dt / 6.0, sum);

    double drift =
        std::abs(model.invariant(h_new, h0) - model.invariant(h, h0)) /
        inv_scale;
    if (drift > 1e-10) {
      if (++halvings > 6)
        throw NumericalError("averaged step rejected 6 times; step too large");
      step *= 0.5;
      continue;
    }
    res.max_invariant_drift = std::max(
        res.max_invariant_drift,
        std::abs(model.invariant(h_new, h0) - inv0) / inv_scale);

    h = h_new;
    tau += dt;
    res.dense.tau.push_back(tau);
    res.dense.h.push_back(h);
    res.dense.dh.push_back(model.rhs(h));

    if (opt.window && !opt.window->contains(h)) {
      res.stopping_tau = tau;
      break;
    }
  }

  double t_last = res.dense.tau.back();
  double t = 0;
  while (true) {
    res.trajectory.push(t, res.dense.at(t));
    if (t >= t_last) break;
    t = std::min(t + opt.sample_dtau, t_last);
  }
  res.trajectory.source = "averaged";
  return res;
}

/// Period of the piston oscillation: the slow time between successive
/// crossings of W = 0 with dW/dtau of the same sign. Empty when W never
/// crosses (mechanical equilibrium).
inline std::optional<double> detect_period(const DenseOutput& dense) {
  std::vector<double> up_crossings;
  for (std::size_t i = 0; i + 1 < dense.tau.size(); ++i) {
    double w0 = dense.h[i].W, w1 = dense.h[i + 1].W;
    if (!(w0 < 0 && w1 >= 0)) continue;
    double lo = dense.tau[i], hi = dense.tau[i + 1];
    for (int k = 0; k < 60; ++k) {
      double mid = 0.5 * (lo + hi);
      (dense.at(mid).W < 0 ? lo : hi) = mid;
    }
    up_crossings.push_back(0.5 * (lo + hi));
  }
  if (up_crossings.size() < 2) return std::nullopt;
  return up_crossings[1] - up_crossings[0];
}

// ---------------------------------------------------------------------------
// N-piston averaged system: pistons move as an (N-1)-dimensional particle in
// the well  V(Q) = sum_i E_i(0) (dQ_i(0)/dQ_i)^2, with chamber energies
// following E_i = E_i(0) (dQ_i(0)/dQ_i)^2. State: (Q_1..Q_{N-1}, W_1..W_{N-1}).
// The energy-exchange law is not independent input: it is the per-chamber
// adiabatic relation (gas speed times gap constant), and substituting it
// into the per-chamber pressure forces 2E_i/gap_i reproduces exactly the
// gradient of the well above.

struct NPiston {
  std::vector<double> mhat;  // N-1 rescaled piston masses
  std::vector<double> e0;    // N initial chamber energies
  std::vector<double> gap0;  // N initial gaps Q_i(0) - Q_{i-1}(0)

  std::size_t pistons() const { return mhat.size(); }

  std::vector<double> gaps(const std::vector<double>& state) const {
    std::size_t n = pistons();
    std::vector<double> g(n + 1);
    double prev = 0;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = state[i] - prev;
      prev = state[i];
    }
    g[n] = 1 - prev;
    for (double x : g)
      if (!(x > 0)) throw NumericalError("chamber collapsed (gap <= 0)");
    return g;
  }

  std::vector<double> rhs(const std::vector<double>& state) const {
    std::size_t n = pistons();
    auto g = gaps(state);
    std::vector<double> d(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = state[n + i];
      double left = 2 * e0[i] * sq(gap0[i]) / (g[i] * sq(g[i]));
      double right = 2 * e0[i + 1] * sq(gap0[i + 1]) / (g[i + 1] * sq(g[i + 1]));
      d[n + i] = (left - right) / mhat[i];
    }
    return d;
  }

  double invariant(const std::vector<double>& state,
                   const std::vector<double>&) const {
    std::size_t n = pistons();
    auto g = gaps(state);
    double h = 0;
    for (std::size_t i = 0; i < n; ++i) h += 0.5 * mhat[i] * sq(state[n + i]);
    for (std::size_t i = 0; i <= n; ++i) h += e0[i] * sq(gap0[i] / g[i]);
    return h;
  }

  std::vector<double> energies(const std::vector<double>& state) const {
    auto g = gaps(state);
    std::vector<double> e(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) e[i] = e0[i] * sq(gap0[i] / g[i]);
    return e;
  }
};

struct NPistonResult {
  std::vector<double> tau;
  std::vector<std::vector<double>> states;
  double max_invariant_drift = 0;
};

inline NPistonResult integrate_npiston(const NPiston& sys,
                                       std::vector<double> state,
                                       double tau_end, double step = 1e-4,
                                       double sample_dtau = 1e-3) {
  NPistonResult res;
  auto axpy = [](const std::vector<double>& x, double a,
                 const std::vector<double>& y) {
    std::vector<double> out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * y[i];
    return out;
  };
  double inv0 = sys.invariant(state, state);
  double tau = 0;
  double next_sample = 0;
  while (true) {
    if (tau + 1e-15 >= next_sample) {
      res.tau.push_back(tau);
      res.states.push_back(state);
      next_sample += sample_dtau;
    }
    if (tau >= tau_end) break;
    double dt = std::min(step, tau_end - tau);
    auto k1 = sys.rhs(state);
    auto k2 = sys.rhs(axpy(state, 0.5 * dt, k1));
    auto k3 = sys.rhs(axpy(state, 0.5 * dt, k2));
    auto k4 = sys.rhs(axpy(state, dt, k3));
    for (std::size_t i = 0; i < state.size(); ++i)
      state[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    tau += dt;
    res.max_invariant_drift =
        std::max(res.max_invariant_drift,
                 std::abs(sys.invariant(state, state) - inv0) /
                     std::max(std::abs(inv0), 1e-300));
  }
  return res;
}

}  // namespace piston::averaged
