#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "piston/common.hpp"
#include "piston/slow_state.hpp"

namespace piston::hard1d {

// Point particles on [0,1]: N-1 heavy pistons split the interval into N
// chambers of non-interacting gas particles. All interactions are elastic
// point collisions; between events every position is linear in time.
// Positions are stored as (value at epoch t0, velocity) and evaluated by
// absolute time, never by incremental stepping.

struct Particle {
  double q = 0;  // position at epoch t0
  double v = 0;
  double m = 1;
  double t0 = 0;

  // grazing suppression: boundary whose collision was skipped, valid while
  // that boundary keeps the recorded velocity
  int skip_boundary = -1;
  double skip_vel = 0;

  double pos(double t) const { return q + v * (t - t0); }
};

struct PistonBody {
  double Q = 0.5;  // position at epoch t0
  double V = 0;
  double M = 1;  // +inf freezes the piston
  double t0 = 0;

  double pos(double t) const { return Q + V * (t - t0); }
  bool frozen() const { return std::isinf(M); }
};

enum class EventKind { ParticlePiston, ParticleWall, PistonWall };

struct Event {
  double time = inf;
  EventKind kind = EventKind::ParticleWall;
  int chamber = -1;   // particle events
  int particle = -1;  // particle events
  int boundary = -1;  // 0..N: 0 and N are the walls, b is piston b-1 otherwise
  int piston = -1;    // piston-wall events
};

struct EventCounts {
  std::uint64_t particle_piston = 0;
  std::uint64_t particle_wall = 0;
  std::uint64_t piston_wall = 0;
  std::uint64_t grazing = 0;  // |relative speed| < grazing_speed, skipped

  std::uint64_t total() const {
    return particle_piston + particle_wall + piston_wall;
  }
};

struct FullState1D {
  std::vector<PistonBody> pistons;          // ordered, size N-1 >= 1
  std::vector<std::vector<Particle>> chambers;  // size N
  double time = 0;

  static FullState1D single(double Q, double V, double M,
                            std::vector<Particle> left,
                            std::vector<Particle> right) {
    FullState1D st;
    st.pistons.push_back({Q, V, M, 0.0});
    st.chambers.push_back(std::move(left));
    st.chambers.push_back(std::move(right));
    return st;
  }

  /// eps = M^{-1/2} of the first piston (hat-mass 1 by convention).
  double epsilon() const { return pistons.front().frozen() ? 0.0 : 1.0 / std::sqrt(pistons.front().M); }

  void validate() const {
    if (pistons.empty() || chambers.size() != pistons.size() + 1)
      throw ConfigError("need N-1 pistons and N chambers");
    double lo = 0;
    for (std::size_t p = 0; p < pistons.size(); ++p) {
      double Q = pistons[p].pos(time);
      if (!(pistons[p].M > 0)) throw ConfigError("piston mass must be positive");
      if (!(Q >= lo && Q <= 1)) throw ConfigError("pistons out of order");
      for (const auto& gp : chambers[p]) {
        if (!(gp.m > 0)) throw ConfigError("gas mass must be positive");
        double x = gp.pos(time);
        if (!(x >= lo && x <= Q)) throw ConfigError("particle outside its chamber");
      }
      lo = Q;
    }
    for (const auto& gp : chambers.back()) {
      double x = gp.pos(time);
      if (!(x >= lo && x <= 1)) throw ConfigError("particle outside its chamber");
    }
    for (std::size_t c = 1; c + 1 < chambers.size(); ++c)
      if (chambers[c].empty())
        throw ConfigError("interior chambers must hold at least one particle");
  }
};

/// Elastic point collision. The shared momentum transfer
/// dV = 2m(v-V)/(m+M) is accumulated in extended precision so each returned
/// velocity carries a single rounding; m*v + M*V then holds to <= 1 ulp of
/// the momentum scale and kinetic energy to a few ulp per event.
/// For M = +inf the particle reflects off the moving piston, v' = 2V - v.
inline std::pair<double, double> collision_kick(double v, double V, double m,
                                                double M) {
  if (std::isinf(M)) return {2 * V - v, V};
  long double dV = (2.0L * m / ((long double)m + M)) * ((long double)v - V);
  double v_new = double((2.0L * V - v) + dV);
  double V_new = double(V + dV);
  return {v_new, V_new};
}

/// The elastic collision law with the approach precondition checked:
/// a Side::Left particle sits left of the piston and must have v > V.
inline std::pair<double, double> collide_particle_piston(double v, double V,
                                                         double m, double M,
                                                         Side side = Side::Left) {
  double u = v - V;
  if (side == Side::Left ? !(u > 0) : !(u < 0))
    throw NumericalError("separating relative velocity in piston collision");
  return collision_kick(v, V, m, M);
}

/// Collision law in the rescaled coordinates (s, W): s the particle speed,
/// W = V/eps. Unit-determinant linear map; first-order changes are
/// -2 eps W in s and +2 eps m s in W for a left particle (signs mirrored on
/// the right).
inline std::pair<double, double> collide_rescaled(double s, double W, double m,
                                                  double eps,
                                                  Side side = Side::Left) {
  double sgn = side == Side::Left ? 1.0 : -1.0;
  if (!(s > sgn * eps * W))
    throw NumericalError("inadmissible rescaled collision");
  double den = 1.0 + sq(eps) * m;
  double s_new = ((1.0 - sq(eps) * m) * s - sgn * 2.0 * eps * W) / den;
  double w_new = (sgn * 2.0 * eps * m * s + (1.0 - sq(eps) * m) * W) / den;
  return {s_new, w_new};
}

/// Angle variable of a gas particle bouncing in [0,Q] (left) or [Q,1]
/// (right); particle-piston collisions happen exactly at phi = 1/2.
inline double angle_variable(double q, double v, double Q, Side side) {
  if (v == 0) throw ConfigError("angle variable undefined for v = 0");
  double phi;
  if (side == Side::Left) {
    phi = v > 0 ? q / (2 * Q) : 1.0 - q / (2 * Q);
  } else {
    double r = (1 - q) / (2 * (1 - Q));
    phi = v < 0 ? r : 1.0 - r;
  }
  return phi == 1.0 ? 0.0 : phi;
}

struct PistonCollisionRecord {
  int piston;
  int chamber;
  int particle;
  double v_before, V_before, v_after, V_after, m, M;
};

/// Event-driven engine. next_event() scans every admissible candidate in
/// closed form; step() processes the next simultaneity group (events within
/// time_tol of the earliest, left chamber first, then ascending particle
/// index).
class Engine {
 public:
  static constexpr double time_tol = 1e-12;
  static constexpr double grazing_speed = 1e-14;

  using CollisionHook = std::function<void(const PistonCollisionRecord&)>;

  explicit Engine(FullState1D st) : st_(std::move(st)) {
    st_.validate();
    now_ = st_.time;
  }

  const FullState1D& state() const { return st_; }
  double time() const { return now_; }
  const EventCounts& counts() const { return counts_; }
  void on_piston_collision(CollisionHook hook) { hook_ = std::move(hook); }

  double total_energy() const {
    double e = 0;
    for (const auto& ch : st_.chambers)
      for (const auto& gp : ch) e += 0.5 * gp.m * sq(gp.v);
    for (const auto& pb : st_.pistons)
      if (!pb.frozen()) e += 0.5 * pb.M * sq(pb.V);
    return e;
  }

  /// Earliest future event over all candidates.
  Event next_event() const {
    Event best;
    scan([&](const Event& e) {
      if (e.time < best.time) best = e;
    });
    if (!std::isfinite(best.time))
      throw NumericalError("no future event (nothing moves)");
    return best;
  }

  /// Processes the next simultaneity group. Returns the group time.
  double step() {
    Event first = next_event();
    if (first.time < now_ - time_tol)
      throw NumericalError("event-time regression\n" + dump());
    std::vector<Event> group;
    scan([&](const Event& e) {
      if (e.time <= first.time + time_tol) group.push_back(e);
    });
    std::sort(group.begin(), group.end(), [](const Event& a, const Event& b) {
      int ca = a.chamber < 0 ? 1 << 20 : a.chamber;
      int cb = b.chamber < 0 ? 1 << 20 : b.chamber;
      if (ca != cb) return ca < cb;
      return a.particle < b.particle;
    });
    double t = first.time;
    // each particle takes at most one event per group; simultaneous piston
    // collisions compose left chamber first with the updated piston velocity
    std::vector<std::pair<int, int>> done;
    for (const Event& e : group) {
      if (e.kind == EventKind::PistonWall) {
        const PistonBody& pb = st_.pistons[e.piston];
        bool toward = e.boundary == 0 ? pb.V < 0 : pb.V > 0;
        if (!toward) continue;  // deflected earlier in this group
      } else {
        std::pair<int, int> id{e.chamber, e.particle};
        if (std::find(done.begin(), done.end(), id) != done.end()) continue;
        done.push_back(id);
      }
      process(e, t);
    }
    now_ = std::max(now_, t);
    st_.time = now_;
    return t;
  }

  /// Moves the state clock to t (must not cross the next event).
  void settle(double t) {
    now_ = std::max(now_, t);
    st_.time = now_;
  }

  SlowState slow_projection() const { return slow_projection_at(now_); }

  SlowState slow_projection_at(double t) const {
    if (st_.pistons.size() != 1)
      throw ConfigError("slow projection is defined for one piston");
    const PistonBody& pb = st_.pistons.front();
    double eps = st_.epsilon();
    SlowState h;
    h.dim = 1;
    h.Q = pb.pos(t);
    h.W = eps > 0 ? pb.V / eps : 0.0;
    for (const auto& gp : st_.chambers[0]) h.left.push_back(0.5 * gp.m * sq(gp.v));
    for (const auto& gp : st_.chambers[1]) h.right.push_back(0.5 * gp.m * sq(gp.v));
    return h;
  }

  /// (Q_i, W_i, chamber kinetic energies) for the N-piston system.
  std::vector<double> npiston_sample(double t) const {
    double eps = st_.epsilon();
    std::vector<double> out;
    for (const auto& pb : st_.pistons) out.push_back(pb.pos(t));
    for (const auto& pb : st_.pistons) out.push_back(eps > 0 ? pb.V / eps : 0.0);
    for (const auto& ch : st_.chambers) {
      double e = 0;
      for (const auto& gp : ch) e += 0.5 * gp.m * sq(gp.v);
      out.push_back(e);
    }
    return out;
  }

  std::string dump() const {
    std::ostringstream os;
    os << "t=" << format_double(now_);
    for (std::size_t p = 0; p < st_.pistons.size(); ++p) {
      const auto& pb = st_.pistons[p];
      os << "\npiston " << p << ": Q=" << format_double(pb.pos(now_))
         << " V=" << format_double(pb.V) << " M=" << format_double(pb.M);
    }
    for (std::size_t c = 0; c < st_.chambers.size(); ++c)
      for (std::size_t j = 0; j < st_.chambers[c].size(); ++j) {
        const auto& gp = st_.chambers[c][j];
        os << "\nparticle (" << c << "," << j
           << "): q=" << format_double(gp.pos(now_))
           << " v=" << format_double(gp.v) << " m=" << format_double(gp.m);
      }
    return os.str();
  }

 private:
  FullState1D st_;
  double now_ = 0;
  EventCounts counts_;
  CollisionHook hook_;

  // boundary index: 0 = left wall, N = right wall, b = piston b-1 otherwise
  int n_chambers() const { return int(st_.chambers.size()); }

  double boundary_pos(int b, double t) const {
    if (b == 0) return 0.0;
    if (b == n_chambers()) return 1.0;
    return st_.pistons[b - 1].pos(t);
  }
  double boundary_vel(int b) const {
    if (b == 0 || b == n_chambers()) return 0.0;
    return st_.pistons[b - 1].V;
  }

  template <class Fn>
  void scan(Fn&& consider) const {
    const int n = n_chambers();
    for (int c = 0; c < n; ++c) {
      for (int j = 0; j < int(st_.chambers[c].size()); ++j) {
        const Particle& gp = st_.chambers[c][j];
        double x = gp.pos(now_);
        for (int b : {c, c + 1}) {
          double u = gp.v - boundary_vel(b);
          bool toward = (b == c) ? u < 0 : u > 0;
          if (!toward) continue;
          if (b == gp.skip_boundary && boundary_vel(b) == gp.skip_vel)
            continue;
          double gap = boundary_pos(b, now_) - x;
          double dt = gap / u;
          if (dt < 0) dt = 0;  // contact roundoff
          Event e;
          e.time = now_ + dt;
          e.kind = (b == 0 || b == n) ? EventKind::ParticleWall
                                      : EventKind::ParticlePiston;
          e.chamber = c;
          e.particle = j;
          e.boundary = b;
          consider(e);
        }
      }
    }
    // pistons adjacent to the container walls reflect off them
    auto piston_wall = [&](int p, double wall) {
      const PistonBody& pb = st_.pistons[p];
      double u = pb.V;
      if ((wall == 0.0 && u < 0) || (wall == 1.0 && u > 0)) {
        Event e;
        e.time = now_ + (wall - pb.pos(now_)) / u;
        if (e.time < now_) e.time = now_;
        e.kind = EventKind::PistonWall;
        e.piston = p;
        e.boundary = wall == 0.0 ? 0 : n;
        consider(e);
      }
    };
    piston_wall(0, 0.0);
    piston_wall(int(st_.pistons.size()) - 1, 1.0);
  }

  void process(const Event& e, double t) {
    switch (e.kind) {
      case EventKind::ParticleWall: {
        Particle& gp = st_.chambers[e.chamber][e.particle];
        gp.q = e.boundary == 0 ? 0.0 : 1.0;
        gp.t0 = t;
        gp.v = -gp.v;
        gp.skip_boundary = -1;
        ++counts_.particle_wall;
        break;
      }
      case EventKind::ParticlePiston: {
        Particle& gp = st_.chambers[e.chamber][e.particle];
        PistonBody& pb = st_.pistons[e.boundary - 1];
        double u = gp.v - pb.V;
        if (std::abs(u) < grazing_speed) {
          ++counts_.grazing;
          gp.skip_boundary = e.boundary;
          gp.skip_vel = pb.V;
          break;
        }
        double x = pb.pos(t);
        gp.q = x;
        gp.t0 = t;
        pb.Q = x;
        pb.t0 = t;
        gp.skip_boundary = -1;
        auto [v_new, V_new] = collision_kick(gp.v, pb.V, gp.m, pb.M);
        if (hook_)
          hook_({e.boundary - 1, e.chamber, e.particle, gp.v, pb.V, v_new,
                 V_new, gp.m, pb.M});
        gp.v = v_new;
        pb.V = V_new;
        ++counts_.particle_piston;
        break;
      }
      case EventKind::PistonWall: {
        PistonBody& pb = st_.pistons[e.piston];
        pb.Q = e.boundary == 0 ? 0.0 : 1.0;
        pb.t0 = t;
        pb.V = -pb.V;
        ++counts_.piston_wall;
        break;
      }
    }
  }
};

struct SimulateOptions {
  double sample_dt = 1.0;  // fast-time grid for slow-variable samples
  std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max();
};

struct SimResult {
  Trajectory trajectory;
  EventCounts counts;
  double energy_initial = 0;
  double energy_final = 0;
  double end_time = 0;

  double energy_drift() const {
    return std::abs(energy_final - energy_initial) /
           std::max(std::abs(energy_initial), 1e-300);
  }
};

/// Event-driven evolution of the single-piston system up to fast time t_end,
/// recording slow-variable samples every sample_dt on the slow-time axis
/// tau = eps * t (tau = t for a frozen piston).
inline SimResult simulate(FullState1D initial, double t_end,
                          SimulateOptions opt = {}) {
  Engine eng(std::move(initial));
  SimResult res;
  res.energy_initial = eng.total_energy();
  double eps = eng.state().epsilon();
  double tau_scale = eps > 0 ? eps : 1.0;

  std::uint64_t k = 0;
  auto emit_until = [&](double t_limit) {
    while (double(k) * opt.sample_dt <= t_limit + 1e-15) {
      double ts = double(k) * opt.sample_dt;
      res.trajectory.push(tau_scale * ts, eng.slow_projection_at(ts));
      ++k;
    }
  };

  bool exhausted_budget = false;
  while (true) {
    Event e = eng.next_event();
    double horizon = std::min(e.time, t_end);
    emit_until(horizon);
    if (e.time > t_end) break;
    if (eng.counts().total() >= opt.max_events) {
      exhausted_budget = true;
      break;
    }
    eng.step();
  }
  if (!exhausted_budget) {
    emit_until(t_end);
    eng.settle(t_end);
  }

  res.counts = eng.counts();
  res.energy_final = eng.total_energy();
  res.end_time = eng.time();
  res.trajectory.source = "actual";
  res.trajectory.epsilon = eps;
  return res;
}

}  // namespace piston::hard1d
