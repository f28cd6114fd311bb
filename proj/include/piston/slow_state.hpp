#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "piston/common.hpp"

namespace piston {

enum class Side { Left, Right };

/// Slow variables h = (Q, W, E_{1,j}, E_{2,j}): piston position, rescaled
/// piston velocity W = V/eps, and the per-particle gas energies. These are
/// the quantities conserved by the frozen-piston dynamics; everything the
/// simulators and the averaged integrators exchange is expressed in them.
struct SlowState {
  double Q = 0;
  double W = 0;
  std::vector<double> left;   // E_{1,j}
  std::vector<double> right;  // E_{2,j}
  int dim = 1;                // 1, 2 or 3; selects the averaged law

  double left_total() const {
    double e = 0;
    for (double x : left) e += x;
    return e;
  }
  double right_total() const {
    double e = 0;
    for (double x : right) e += x;
    return e;
  }
  /// W^2/2 + sum of gas energies; conserved along every averaged flow.
  double slow_energy() const { return 0.5 * sq(W) + left_total() + right_total(); }

  /// Speed accessor s = sqrt(2E/m) for the 1D hard-core coordinates.
  static double speed(double energy, double mass) {
    return std::sqrt(2.0 * energy / mass);
  }

  bool same_shape(const SlowState& o) const {
    return left.size() == o.left.size() && right.size() == o.right.size();
  }
};

/// Max-norm distance between two slow states.
inline double distance(const SlowState& a, const SlowState& b) {
  if (!a.same_shape(b))
    throw ConfigError("slow states have mismatched particle counts");
  double d = std::max(std::abs(a.Q - b.Q), std::abs(a.W - b.W));
  for (std::size_t j = 0; j < a.left.size(); ++j)
    d = std::max(d, std::abs(a.left[j] - b.left[j]));
  for (std::size_t j = 0; j < a.right.size(); ++j)
    d = std::max(d, std::abs(a.right[j] - b.right[j]));
  return d;
}

/// Piston mass and per-particle gas masses. eps = M^{-1/2} throughout;
/// an infinite piston mass freezes the piston (eps = 0).
struct MassProfile {
  double piston = 1;
  std::vector<double> left;   // m_{1,j}
  std::vector<double> right;  // m_{2,j}

  double epsilon() const { return std::isinf(piston) ? 0.0 : 1.0 / std::sqrt(piston); }

  void validate() const {
    if (!(piston > 0)) throw ConfigError("piston mass must be positive");
    for (double m : left)
      if (!(m > 0)) throw ConfigError("gas masses must be positive");
    for (double m : right)
      if (!(m > 0)) throw ConfigError("gas masses must be positive");
  }
};

/// Compact window in slow-variable space. Experiments only trust the
/// dynamics while h stays inside; leaving it defines the stopping time.
struct Window {
  double q_min = 0.1, q_max = 0.9;
  double w_bound = 10;
  double e_min = 1e-3, e_max = 10;

  void validate() const {
    if (!(0 < q_min && q_min < q_max && q_max < 1))
      throw ConfigError("window requires 0 < Qmin < Qmax < 1");
    if (!(0 < e_min && e_min < e_max))
      throw ConfigError("window requires 0 < Emin < Emax");
    if (!(w_bound > 0)) throw ConfigError("window requires Wbound > 0");
  }

  bool contains(const SlowState& h) const {
    if (h.Q < q_min || h.Q > q_max) return false;
    if (std::abs(h.W) > w_bound) return false;
    auto in = [&](double e) { return e >= e_min && e <= e_max; };
    return std::all_of(h.left.begin(), h.left.end(), in) &&
           std::all_of(h.right.begin(), h.right.end(), in);
  }

  /// True when `inner` lies inside `*this` (window inclusion).
  bool includes(const Window& inner) const {
    return q_min <= inner.q_min && inner.q_max <= q_max &&
           inner.w_bound <= w_bound && e_min <= inner.e_min &&
           inner.e_max <= e_max;
  }
};

/// Time-stamped slow-variable samples from either the actual dynamics or an
/// averaged integration, on the slow time axis tau = eps * t.
struct Trajectory {
  std::vector<double> tau;
  std::vector<SlowState> states;

  std::string source;  // "actual" | "averaged"
  std::uint64_t seed = 0;
  double epsilon = 0;
  double delta = 0;

  std::size_t size() const { return tau.size(); }
  bool empty() const { return tau.empty(); }
  double tau_end() const { return tau.empty() ? 0.0 : tau.back(); }

  void push(double t, SlowState h) {
    if (!tau.empty() && !(t > tau.back()))
      throw ConfigError("trajectory times must be strictly increasing");
    tau.push_back(t);
    states.push_back(std::move(h));
  }

  /// State at slow time t by linear interpolation between samples.
  SlowState at(double t) const {
    if (empty()) throw ConfigError("empty trajectory");
    if (t <= tau.front()) return states.front();
    if (t >= tau.back()) return states.back();
    auto it = std::upper_bound(tau.begin(), tau.end(), t);
    std::size_t hi = std::size_t(it - tau.begin());
    std::size_t lo = hi - 1;
    double u = (t - tau[lo]) / (tau[hi] - tau[lo]);
    const SlowState& a = states[lo];
    const SlowState& b = states[hi];
    SlowState out = a;
    out.Q += u * (b.Q - a.Q);
    out.W += u * (b.W - a.W);
    for (std::size_t j = 0; j < out.left.size(); ++j)
      out.left[j] += u * (b.left[j] - a.left[j]);
    for (std::size_t j = 0; j < out.right.size(); ++j)
      out.right[j] += u * (b.right[j] - a.right[j]);
    return out;
  }
};

/// First sampled tau at which the trajectory leaves the window; +inf if it
/// never does. Exit is detected at sample resolution.
inline double window_exit_time(const Trajectory& traj, const Window& window) {
  if (traj.empty()) throw ConfigError("empty trajectory");
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (!window.contains(traj.states[i])) return traj.tau[i];
  return inf;
}

/// sup over tau in [0, tau_end] of the max-norm slow-state difference,
/// evaluated on a uniform grid with both trajectories linearly interpolated.
inline double sup_deviation(const Trajectory& a, const Trajectory& b,
                            double tau_end, double dtau = 1e-3) {
  if (a.empty() || b.empty()) throw ConfigError("empty trajectory");
  if (!a.states.front().same_shape(b.states.front()))
    throw ConfigError("trajectories have mismatched particle counts");
  double d = 0;
  double t = 0;
  while (true) {
    d = std::max(d, distance(a.at(t), b.at(t)));
    if (t >= tau_end) break;
    t = std::min(t + dtau, tau_end);
  }
  return d;
}

// ---------------------------------------------------------------------------
// CSV serialization: header `tau,Q,W,E1_1,...,E2_n2`, one row per sample,
// round-trip double formatting.

inline void write_csv(std::ostream& os, const Trajectory& traj,
                      const std::vector<std::string>& extra_columns = {},
                      const std::vector<std::vector<double>>& extra_values = {}) {
  std::size_t n1 = traj.empty() ? 0 : traj.states.front().left.size();
  std::size_t n2 = traj.empty() ? 0 : traj.states.front().right.size();
  os << "tau,Q,W";
  for (std::size_t j = 0; j < n1; ++j) os << ",E1_" << (j + 1);
  for (std::size_t j = 0; j < n2; ++j) os << ",E2_" << (j + 1);
  for (const auto& c : extra_columns) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const SlowState& h = traj.states[i];
    os << format_double(traj.tau[i]) << ',' << format_double(h.Q) << ','
       << format_double(h.W);
    for (double e : h.left) os << ',' << format_double(e);
    for (double e : h.right) os << ',' << format_double(e);
    for (const auto& col : extra_values) os << ',' << format_double(col[i]);
    os << '\n';
  }
}

inline Trajectory read_csv(std::istream& is) {
  Trajectory traj;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty CSV");
  std::size_t n1 = 0, n2 = 0;
  {
    std::stringstream header(line);
    std::string col;
    while (std::getline(header, col, ',')) {
      if (col.rfind("E1_", 0) == 0) ++n1;
      if (col.rfind("E2_", 0) == 0) ++n2;
    }
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) vals.push_back(parse_double(cell));
    if (vals.size() < 3 + n1 + n2) throw ConfigError("short CSV row");
    SlowState h;
    h.Q = vals[1];
    h.W = vals[2];
    h.left.assign(vals.begin() + 3, vals.begin() + 3 + n1);
    h.right.assign(vals.begin() + 3 + n1, vals.begin() + 3 + n1 + n2);
    traj.push(vals[0], std::move(h));
  }
  return traj;
}

}  // namespace piston
