#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "piston/billiard2d.hpp"
#include "piston/common.hpp"
#include "piston/slow_state.hpp"

namespace piston::billiard {

// Exact event-driven dynamics of the full 2D system: gas particles fly
// straight between specular boundary reflections, the piston face
// {Q(t)} x [0, ell] moves at constant velocity between events, and
// particle-piston collisions exchange momentum in the perpendicular
// component only. The piston reflects off walls of its own at Q = 0, 1.

struct Particle2D {
  Vec2 q;
  Vec2 v;
  double t0 = 0;

  Vec2 pos(double t) const { return q + v * (t - t0); }
};

struct FullState2D {
  double Q = 0.5;
  double V = 0;    // fast velocity; W = V/eps
  double M = 1e4;  // +inf freezes the piston
  double t0 = 0;
  std::vector<Particle2D> left, right;
  double time = 0;

  double pos(double t) const { return Q + V * (t - t0); }
  bool frozen() const { return std::isinf(M); }
  double epsilon() const { return frozen() ? 0.0 : 1.0 / std::sqrt(M); }
};

struct Counts2D {
  std::uint64_t boundary = 0;
  std::uint64_t piston = 0;
  std::uint64_t piston_wall = 0;
  std::uint64_t non_clean = 0;

  std::uint64_t total() const { return boundary + piston + piston_wall; }
};

class Engine2D {
 public:
  static constexpr double time_tol = 1e-12;

  Engine2D(const BilliardDomain& domain, FullState2D st, double e_max = 2.0)
      : dom_(domain), st_(std::move(st)), e_max_(e_max) {
    now_ = st_.time;
    validate();
  }

  const FullState2D& state() const { return st_; }
  const BilliardDomain& domain() const { return dom_; }
  double time() const { return now_; }
  const Counts2D& counts() const { return counts_; }

  double total_energy() const {
    double e = st_.frozen() ? 0.0 : 0.5 * st_.M * sq(st_.V);
    for (const auto& p : st_.left) e += 0.5 * p.v.dot(p.v);
    for (const auto& p : st_.right) e += 0.5 * p.v.dot(p.v);
    return e;
  }

  SlowState slow_projection_at(double t) const {
    SlowState h;
    h.dim = 2;
    h.Q = st_.pos(t);
    double eps = st_.epsilon();
    h.W = eps > 0 ? st_.V / eps : 0.0;
    for (const auto& p : st_.left) h.left.push_back(0.5 * p.v.dot(p.v));
    for (const auto& p : st_.right) h.right.push_back(0.5 * p.v.dot(p.v));
    return h;
  }

  /// Time of the next event without processing it.
  double peek() {
    plan();
    return plan_time_;
  }

  /// Processes the next event; returns its absolute time.
  double step() {
    plan();
    if (!std::isfinite(plan_time_))
      throw NumericalError("no future event in the 2D system");
    if (plan_time_ < now_ - time_tol)
      throw NumericalError("event-time regression in the 2D engine");
    apply();
    now_ = std::max(now_, plan_time_);
    st_.time = now_;
    return now_;
  }

  void settle(double t) {
    now_ = std::max(now_, t);
    st_.time = now_;
  }

 private:
  enum class Kind { Static, Piston, PistonWall };

  const BilliardDomain& dom_;
  FullState2D st_;
  double e_max_;
  double now_ = 0;
  Counts2D counts_;

  // planned event
  double plan_time_ = inf;
  Kind plan_kind_ = Kind::Static;
  Side plan_side_ = Side::Left;
  std::size_t plan_index_ = 0;
  Hit plan_hit_;
  double plan_wall_ = 0;

  void validate() const {
    if (!(st_.M > 0)) throw ConfigError("piston mass must be positive");
    double Q = st_.pos(now_);
    if (!(Q >= 0 && Q <= 1)) throw ConfigError("piston outside [0,1]");
    for (const auto& p : st_.left)
      if (p.pos(now_).x > Q + 1e-12)
        throw ConfigError("left particle beyond the piston");
    for (const auto& p : st_.right)
      if (p.pos(now_).x < Q - 1e-12)
        throw ConfigError("right particle beyond the piston");
  }

  void plan() {
    plan_time_ = inf;
    double Qn = st_.pos(now_);
    auto particle_events = [&](const std::vector<Particle2D>& list, Side side) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        const Particle2D& p = list[i];
        Vec2 q = p.pos(now_);
        Hit hit = trace(q, p.v, dom_.pieces);
        if (now_ + hit.t < plan_time_) {
          plan_time_ = now_ + hit.t;
          plan_kind_ = Kind::Static;
          plan_side_ = side;
          plan_index_ = i;
          plan_hit_ = hit;
        }
        // moving piston face
        double u = p.v.x - st_.V;
        bool toward = side == Side::Left ? u > 1e-14 : u < -1e-14;
        if (!toward) continue;
        double dt = (Qn - q.x) / u;
        if (dt <= 1e-12) continue;
        double y = q.y + p.v.y * dt;
        if (y < -1e-9 || y > dom_.ell + 1e-9) continue;
        if (now_ + dt < plan_time_) {
          plan_time_ = now_ + dt;
          plan_kind_ = Kind::Piston;
          plan_side_ = side;
          plan_index_ = i;
          plan_hit_.point = {0, y};  // y reused at apply time
        }
      }
    };
    particle_events(st_.left, Side::Left);
    particle_events(st_.right, Side::Right);

    if (st_.V != 0) {
      double wall = st_.V > 0 ? 1.0 : 0.0;
      double dt = (wall - Qn) / st_.V;
      if (dt < 0) dt = 0;
      if (now_ + dt < plan_time_) {
        plan_time_ = now_ + dt;
        plan_kind_ = Kind::PistonWall;
        plan_wall_ = wall;
      }
    }
  }

  void apply() {
    double t = plan_time_;
    switch (plan_kind_) {
      case Kind::Static: {
        Particle2D& p = plan_side_ == Side::Left ? st_.left[plan_index_]
                                                 : st_.right[plan_index_];
        const Piece& pc = dom_.pieces[plan_hit_.piece];
        p.q = plan_hit_.point;
        p.t0 = t;
        p.v = reflect(p.v, pc.inward_normal(plan_hit_.point));
        ++counts_.boundary;
        break;
      }
      case Kind::Piston: {
        Particle2D& p = plan_side_ == Side::Left ? st_.left[plan_index_]
                                                 : st_.right[plan_index_];
        double y = plan_hit_.point.y;
        if (y < time_tol || y > dom_.ell - time_tol)
          throw SingularTrajectory("piston face corner hit");
        double x = st_.pos(t);
        p.q = {x, y};
        p.t0 = t;
        st_.Q = x;
        st_.t0 = t;
        double vx_before = p.v.x;
        auto [vx_after, V_after] = hard1d::collision_kick(p.v.x, st_.V, 1.0, st_.M);
        if (!is_clean_collision(vx_before, vx_after, st_.epsilon(), e_max_,
                                plan_side_))
          ++counts_.non_clean;
        p.v.x = vx_after;
        st_.V = V_after;
        ++counts_.piston;
        break;
      }
      case Kind::PistonWall: {
        st_.Q = plan_wall_;
        st_.t0 = t;
        st_.V = -st_.V;
        ++counts_.piston_wall;
        break;
      }
    }
  }
};

struct Simulate2DOptions {
  double sample_dt = 1.0;
  std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max();
  double e_max = 2.0;  // window energy bound entering the clean-collision test
};

struct Sim2DResult {
  Trajectory trajectory;
  Counts2D counts;
  double energy_initial = 0;
  double energy_final = 0;
  double end_time = 0;

  double energy_drift() const {
    return std::abs(energy_final - energy_initial) /
           std::max(std::abs(energy_initial), 1e-300);
  }
};

/// Event-driven run to fast time t_end with slow-variable samples every
/// sample_dt. Aborts (SingularTrajectory) on corner or grazing events; the
/// study harness resamples the initial condition.
inline Sim2DResult simulate_2d(const BilliardDomain& domain, FullState2D init,
                               double t_end, Simulate2DOptions opt = {}) {
  Engine2D eng(domain, std::move(init), opt.e_max);
  Sim2DResult res;
  res.energy_initial = eng.total_energy();
  double eps = eng.state().epsilon();
  double tau_scale = eps > 0 ? eps : 1.0;
  res.trajectory.source = "actual";
  res.trajectory.epsilon = eps;

  std::uint64_t k = 0;
  auto emit_until = [&](double limit) {
    while (double(k) * opt.sample_dt <= limit + 1e-15) {
      double ts = double(k) * opt.sample_dt;
      res.trajectory.push(tau_scale * ts, eng.slow_projection_at(ts));
      ++k;
    }
  };

  bool budget_stop = false;
  while (true) {
    double t_next = eng.peek();
    emit_until(std::min(t_next, t_end));
    if (t_next > t_end) break;
    if (eng.counts().total() >= opt.max_events) {
      budget_stop = true;
      break;
    }
    eng.step();
  }
  if (!budget_stop) {
    emit_until(t_end);
    eng.settle(t_end);
  }
  res.counts = eng.counts();
  res.energy_final = eng.total_energy();
  res.end_time = eng.time();
  return res;
}

}  // namespace piston::billiard
