#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "piston/billiard2d.hpp"
#include "piston/common.hpp"

namespace piston::billiard {

// Frozen-piston billiard flow inside one chamber, and the collision-measure
// statistics the averaged equation is built on. The collision map preserves
// nu with density cos(phi) dphi dr / (2 |boundary|); its restriction to the
// piston face is nu-hat with density cos(phi) dphi dr / (2 ell).

struct BoundaryState {
  std::size_t piece = 0;
  Vec2 point;
  double phi = 0;  // angle to the inward normal, in [-pi/2, pi/2]
  Vec2 v;          // outgoing velocity
};

/// Draws from nu on the whole chamber boundary: arc length uniform,
/// phi with density cos(phi)/2 via phi = arcsin(2u - 1).
inline BoundaryState sample_boundary_measure(const Chamber& ch, double speed,
                                             Rng& rng) {
  double s = rng.uniform() * ch.perimeter;
  std::size_t i = 0;
  for (; i + 1 < ch.pieces.size(); ++i) {
    double len = ch.pieces[i].length();
    if (s < len) break;
    s -= len;
  }
  const Piece& pc = ch.pieces[i];
  s = std::min(s, pc.length());
  BoundaryState st;
  st.piece = i;
  st.point = pc.point_at(s);
  st.phi = std::asin(2 * rng.uniform() - 1);
  Vec2 n = pc.inward_normal(st.point);
  Vec2 t = pc.tangent_at(st.point);
  st.v = (n * std::cos(st.phi) + t * std::sin(st.phi)) * speed;
  return st;
}

/// Same measure conditioned on the piston face (nu-hat).
inline BoundaryState sample_face_measure(const Chamber& ch, double speed,
                                         Rng& rng) {
  const Piece& pc = ch.pieces[ch.face];
  BoundaryState st;
  st.piece = ch.face;
  st.point = pc.point_at(rng.uniform() * pc.length());
  st.phi = std::asin(2 * rng.uniform() - 1);
  Vec2 n = pc.inward_normal(st.point);
  Vec2 t = pc.tangent_at(st.point);
  st.v = (n * std::cos(st.phi) + t * std::sin(st.phi)) * speed;
  return st;
}

/// One application of the billiard collision map: flight to the next
/// boundary point plus specular reflection there.
struct FlightStep {
  double time = 0;
  std::size_t piece = 0;
  Vec2 point;
  Vec2 v_in;   // velocity arriving at the boundary
  Vec2 v_out;  // reflected velocity
};

inline FlightStep collision_map(Vec2 q, Vec2 v,
                                const std::vector<Piece>& pieces) {
  Hit hit = trace(q, v, pieces);
  FlightStep step;
  step.time = hit.t;
  step.piece = hit.piece;
  step.point = hit.point;
  step.v_in = v;
  step.v_out = reflect(v, pieces[hit.piece].inward_normal(hit.point));
  return step;
}

/// Monte Carlo mean free flight E_nu[zeta]; Santalo's formula predicts
/// pi |D| / (|v| |dD|). Singular rays are resampled and counted.
struct MeanFlightResult {
  double estimate = 0;
  double predicted = 0;
  std::uint64_t samples = 0;
  std::uint64_t resampled = 0;
};

inline MeanFlightResult mean_free_flight(const Chamber& ch, double speed,
                                         std::uint64_t n, Rng& rng) {
  if (n < 1000) throw ConfigError("mean_free_flight needs >= 1000 samples");
  MeanFlightResult res;
  res.predicted = M_PI * ch.area / (speed * ch.perimeter);
  double sum = 0;
  for (std::uint64_t k = 0; k < n;) {
    BoundaryState st = sample_boundary_measure(ch, speed, rng);
    try {
      Hit hit = trace(st.point, st.v, ch.pieces);
      sum += hit.t;
      ++k;
    } catch (const SingularTrajectory&) {
      ++res.resampled;
    }
  }
  res.estimate = sum / double(n);
  res.samples = n;
  return res;
}

/// Statistics of the map induced on the piston face: nu-hat-sampled starts,
/// traced through the billiard until the next face collision.
struct InducedStats {
  double mean_flight = 0;        // E_nu-hat[zeta-hat]
  double mean_vperp_return = 0;  // E_nu-hat[|v_perp|] over returns
  double mean_vperp_start = 0;   // same over the sampled starts
  double predicted_flight = 0;   // pi |D| / (|v| ell)
  double predicted_vperp = 0;    // sqrt(2E) pi / 4
  std::uint64_t samples = 0;
  std::uint64_t resampled = 0;
};

inline InducedStats induced_piston_stats(const Chamber& ch, double speed,
                                         std::uint64_t n_returns, Rng& rng,
                                         std::uint64_t event_budget = 0) {
  if (event_budget == 0) event_budget = 10000 * n_returns;
  InducedStats res;
  res.predicted_flight = M_PI * ch.area / (speed * ch.ell);
  res.predicted_vperp = speed * M_PI / 4;
  double sum_t = 0, sum_v_ret = 0, sum_v_start = 0;
  std::uint64_t events = 0;
  for (std::uint64_t k = 0; k < n_returns;) {
    BoundaryState st = sample_face_measure(ch, speed, rng);
    double flight = 0;
    Vec2 q = st.point, v = st.v;
    try {
      while (true) {
        FlightStep step = collision_map(q, v, ch.pieces);
        flight += step.time;
        if (++events > event_budget)
          throw NumericalError("induced-map event budget exhausted");
        if (step.piece == ch.face) {
          sum_t += flight;
          sum_v_ret += std::abs(step.v_in.x);
          sum_v_start += std::abs(st.v.x);
          ++k;
          break;
        }
        q = step.point;
        v = step.v_out;
      }
    } catch (const SingularTrajectory&) {
      ++res.resampled;
    }
  }
  res.mean_flight = sum_t / double(n_returns);
  res.mean_vperp_return = sum_v_ret / double(n_returns);
  res.mean_vperp_start = sum_v_start / double(n_returns);
  res.samples = n_returns;
  return res;
}

/// Checks E_nu-hat[zeta-hat] * nu(face) = E_nu[zeta] with three independent
/// estimates (the first two Monte Carlo, nu(face) = ell/|boundary| exact).
struct InducingReport {
  double mean_flight_nu = 0;
  double mean_flight_induced = 0;
  double face_fraction = 0;
  double residual = 0;  // relative defect of the identity
  std::uint64_t resampled = 0;
};

inline InducingReport inducing_identity_check(const Chamber& ch, double speed,
                                              std::uint64_t n, Rng& rng) {
  InducingReport rep;
  auto whole = mean_free_flight(ch, speed, n, rng);
  auto induced = induced_piston_stats(ch, speed, n, rng);
  rep.mean_flight_nu = whole.estimate;
  rep.mean_flight_induced = induced.mean_flight;
  rep.face_fraction = ch.ell / ch.perimeter;
  rep.residual =
      std::abs(rep.mean_flight_induced * rep.face_fraction - rep.mean_flight_nu) /
      rep.mean_flight_nu;
  rep.resampled = whole.resampled + induced.resampled;
  return rep;
}

/// Long single-orbit time average of the momentum flux on the piston face:
///   (1/t) sum over face collisions of |v_perp|  ->  E1 ell / (2 |D1|)
/// when the flow is ergodic (E1 = speed^2/2 for the unit-mass particle).
struct FluxResult {
  double time_average = 0;
  double predicted = 0;
  std::uint64_t face_hits = 0;
  double elapsed = 0;
};

inline FluxResult momentum_flux_average(const Chamber& ch, Vec2 q0, Vec2 v0,
                                        std::uint64_t n_face_hits) {
  FluxResult res;
  double energy = 0.5 * v0.dot(v0);
  res.predicted = energy * ch.ell / (2 * ch.area);
  Vec2 q = q0, v = v0;
  double t = 0, sum = 0;
  while (res.face_hits < n_face_hits) {
    FlightStep step = collision_map(q, v, ch.pieces);
    t += step.time;
    if (step.piece == ch.face) {
      sum += std::abs(step.v_in.x);
      ++res.face_hits;
    }
    q = step.point;
    v = step.v_out;
  }
  res.time_average = sum / t;
  res.elapsed = t;
  return res;
}

/// d=3 check: under the hemisphere measure with density cos(phi)/pi the
/// mean of cos(phi) is 2/3 (cos phi = sqrt(u) pushes uniform u forward).
inline double hemisphere_cos_moment(std::uint64_t n, Rng& rng) {
  double sum = 0;
  for (std::uint64_t k = 0; k < n; ++k) sum += std::sqrt(rng.uniform());
  return sum / double(n);
}

/// Uniform point inside the chamber, by rejection from the bounding box.
inline Vec2 sample_chamber_point(const Chamber& ch, Rng& rng) {
  double x0 = inf, x1 = -inf, y0 = inf, y1 = -inf;
  for (const auto& pc : ch.pieces) {
    for (double s : {0.0, 0.5 * pc.length(), pc.length()}) {
      Vec2 p = pc.point_at(s);
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    if (pc.kind == Piece::Kind::Arc) {
      auto [lo, hi] = pc.x_range();
      x0 = std::min(x0, lo);
      x1 = std::max(x1, hi);
    }
  }
  for (int tries = 0; tries < 100000; ++tries) {
    Vec2 p{rng.uniform(x0, x1), rng.uniform(y0, y1)};
    // parity of boundary crossings along a ray in a generic direction
    Vec2 dir{1.0, 1e-3 + 1e-4 * rng.uniform()};
    int crossings = 0;
    bool degenerate = false;
    for (const auto& pc : ch.pieces) {
      Vec2 q = p;
      double shift = 0;
      while (true) {
        auto t = ray_piece_time(q, dir, pc, 1e-12);
        if (!t) break;
        ++crossings;
        if (++shift > 4) {
          degenerate = true;
          break;
        }
        q = q + dir * (*t + 1e-9);
      }
      if (degenerate) break;
    }
    if (degenerate) continue;
    if (crossings % 2 == 1) return p;
  }
  throw NumericalError("could not sample a point inside the chamber");
}

}  // namespace piston::billiard
