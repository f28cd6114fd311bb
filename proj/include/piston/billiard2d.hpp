#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "piston/common.hpp"
#include "piston/hardcore1d.hpp"  // collision_kick
#include "piston/slow_state.hpp"

namespace piston::billiard {

struct SingularTrajectory : NumericalError {
  using NumericalError::NumericalError;
};

struct Vec2 {
  double x = 0, y = 0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double a) const { return {a * x, a * y}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  Vec2 rot90() const { return {-y, x}; }
};

/// Boundary piece: line segment or circular arc, oriented so the domain
/// interior lies on the left of the traversal direction. Arcs keep
/// theta0 < theta1 and a ccw flag giving the traversal sense.
struct Piece {
  enum class Kind { Segment, Arc } kind = Kind::Segment;
  // segment
  Vec2 a, b;
  // arc
  Vec2 center;
  double radius = 0;
  double theta0 = 0, theta1 = 0;
  bool ccw = true;

  static Piece segment(Vec2 a, Vec2 b) {
    Piece p;
    p.kind = Kind::Segment;
    p.a = a;
    p.b = b;
    return p;
  }
  static Piece arc(Vec2 c, double r, double th0, double th1, bool ccw) {
    Piece p;
    p.kind = Kind::Arc;
    p.center = c;
    p.radius = r;
    p.theta0 = th0;
    p.theta1 = th1;
    p.ccw = ccw;
    return p;
  }

  double length() const {
    return kind == Kind::Segment ? (b - a).norm() : radius * (theta1 - theta0);
  }

  Vec2 point_at(double s) const {  // s in [0, length], along traversal
    if (kind == Kind::Segment) {
      double u = s / length();
      return a + (b - a) * u;
    }
    double th = ccw ? theta0 + s / radius : theta1 - s / radius;
    return center + Vec2{std::cos(th), std::sin(th)} * radius;
  }

  Vec2 tangent_at(Vec2 p) const {  // unit, along traversal
    if (kind == Kind::Segment) {
      Vec2 d = b - a;
      return d * (1.0 / d.norm());
    }
    Vec2 r = p - center;
    Vec2 t = Vec2{-r.y, r.x} * (1.0 / r.norm());
    return ccw ? t : t * -1.0;
  }

  Vec2 inward_normal(Vec2 p) const { return tangent_at(p).rot90(); }

  /// Oriented Green's-theorem contribution 1/2 (x dy - y dx).
  double green_area() const {
    if (kind == Kind::Segment) return 0.5 * a.cross(b);
    double sgn = ccw ? 1.0 : -1.0;
    double dth = theta1 - theta0;
    double s0 = std::sin(theta0), s1 = std::sin(theta1);
    double c0 = std::cos(theta0), c1 = std::cos(theta1);
    double val = radius * radius * dth + center.x * radius * (s1 - s0) -
                 center.y * radius * (c1 - c0);
    return 0.5 * sgn * val;
  }

  /// Arc-length position of p along the traversal.
  double param_of(Vec2 p) const {
    if (kind == Kind::Segment) {
      Vec2 d = b - a;
      return (p - a).dot(d) / d.norm();
    }
    double th = std::atan2(p.y - center.y, p.x - center.x);
    while (th < theta0) th += 2 * M_PI;
    while (th >= theta0 + 2 * M_PI) th -= 2 * M_PI;
    return ccw ? radius * (th - theta0) : radius * (theta1 - th);
  }

  /// x-extent actually covered by the arc.
  std::pair<double, double> x_range() const {
    double lo = std::min(center.x + radius * std::cos(theta0),
                         center.x + radius * std::cos(theta1));
    double hi = std::max(center.x + radius * std::cos(theta0),
                         center.x + radius * std::cos(theta1));
    // interior extrema at theta = 0 or +-pi inside the span
    for (double th = std::ceil(theta0 / M_PI) * M_PI; th <= theta1 + 1e-15;
         th += M_PI) {
      double x = center.x + radius * std::cos(th);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    return {lo, hi};
  }
};

/// First intersection of the ray q + v t with a piece, for t > t_min.
inline std::optional<double> ray_piece_time(Vec2 q, Vec2 v, const Piece& pc,
                                            double t_min = 1e-12) {
  if (pc.kind == Piece::Kind::Segment) {
    Vec2 d = pc.b - pc.a;
    double denom = v.cross(d);
    if (denom == 0) return std::nullopt;  // parallel
    Vec2 w = pc.a - q;
    double t = w.cross(d) / denom;
    double u = w.cross(v) / denom;
    if (t <= t_min || u < 0 || u > 1) return std::nullopt;
    return t;
  }
  // |q + v t - c|^2 = r^2
  Vec2 w = q - pc.center;
  double A = v.dot(v);
  double B = w.dot(v);
  double C = w.dot(w) - sq(pc.radius);
  double disc = B * B - A * C;
  if (disc < 0) return std::nullopt;
  double root = std::sqrt(disc);
  for (double t : {(-B - root) / A, (-B + root) / A}) {
    if (t <= t_min) continue;
    Vec2 p = q + v * t;
    double th = std::atan2(p.y - pc.center.y, p.x - pc.center.x);
    for (double cand : {th, th + 2 * M_PI, th - 2 * M_PI})
      if (cand >= pc.theta0 - 1e-14 && cand <= pc.theta1 + 1e-14) return t;
  }
  return std::nullopt;
}

struct Hit {
  double t = inf;
  std::size_t piece = SIZE_MAX;
  Vec2 point;
};

/// Earliest hit on any piece; throws on a geometry leak or a corner hit
/// (within corner_tol of a piece end), which the harness treats as a
/// singular trajectory to resample.
inline Hit trace(Vec2 q, Vec2 v, const std::vector<Piece>& pieces,
                 double corner_tol = 1e-12) {
  Hit hit;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    auto t = ray_piece_time(q, v, pieces[i]);
    if (t && *t < hit.t) {
      hit.t = *t;
      hit.piece = i;
    }
  }
  if (!std::isfinite(hit.t)) throw NumericalError("geometry leak: ray exits the domain");
  hit.point = q + v * hit.t;
  const Piece& pc = pieces[hit.piece];
  double s = pc.param_of(hit.point);
  if (s < corner_tol || s > pc.length() - corner_tol)
    throw SingularTrajectory("corner hit");
  return hit;
}

/// Specular reflection v' = v - 2 <v,n> n. Exactly norm-preserving in exact
/// arithmetic; grazing incidence is an error.
inline Vec2 reflect(Vec2 v, Vec2 n) {
  double vn = v.dot(n);
  if (std::abs(vn) < 1e-14 * v.norm())
    throw SingularTrajectory("grazing reflection");
  return v - n * (2 * vn);
}

// ---------------------------------------------------------------------------
// Collision with the heavy piston in rescaled coordinates.

/// (v_perp, W) -> ((eps^2-1) v_perp + 2 eps W, 2 eps v_perp + (1-eps^2) W)
///               / (1 + eps^2),
/// evaluated in momentum-transfer form. v_parallel is untouched by the
/// caller. Side::Left approaches with v_perp - eps W > 0.
inline std::pair<double, double> collide_piston(double v_perp, double W,
                                                double eps,
                                                Side side = Side::Left) {
  double u = v_perp - eps * W;
  if (side == Side::Left ? !(u > 0) : !(u < 0))
    throw NumericalError("non-approaching piston collision");
  double f = 2.0 / (1.0 + sq(eps));
  return {v_perp - f * u, W + eps * f * u};
}

/// A clean collision leaves the gas particle definitively escaping:
/// v_perp- > 0 and v_perp+ < -eps sqrt(2 E_max) for a left particle
/// (mirrored on the right).
inline bool is_clean_collision(double v_perp_before, double v_perp_after,
                               double eps, double e_max,
                               Side side = Side::Left) {
  double esc = eps * std::sqrt(2 * e_max);
  if (side == Side::Left)
    return v_perp_before > 0 && v_perp_after < -esc;
  return v_perp_before < 0 && v_perp_after > esc;
}

// ---------------------------------------------------------------------------
// Containers. The tube [0,1] x [0,ell] is swept by the piston; end regions
// attach outside x in [0,1]. Arcs must stay clear of the open tube strip so
// chambers clip on segments only.

struct BilliardDomain {
  double ell = 0.5;
  std::vector<Piece> pieces;  // container boundary, piston excluded
  std::string name = "custom";

  /// Rectangle [-left_ext, 1+right_ext] x [0, ell].
  static BilliardDomain box(double ell = 1.0, double left_ext = 0.0,
                            double right_ext = 0.0) {
    BilliardDomain d;
    d.ell = ell;
    d.name = "box";
    double x0 = -left_ext, x1 = 1 + right_ext;
    d.pieces = {Piece::segment({x0, 0}, {x1, 0}),
                Piece::segment({x1, 0}, {x1, ell}),
                Piece::segment({x1, ell}, {x0, ell}),
                Piece::segment({x0, ell}, {x0, 0})};
    d.validate();
    return d;
  }

  /// Rectangular chambers with a dispersing semicircular scatterer bulging
  /// from each far wall into the chamber.
  static BilliardDomain sinai(double ell = 0.5, double ext = 0.5) {
    BilliardDomain d;
    d.ell = ell;
    d.name = "sinai";
    double r = 0.5 * ell;
    double x0 = -ext, x1 = 1 + ext;
    d.pieces = {
        Piece::segment({x0, 0}, {x1, 0}),
        Piece::arc({x1, r}, r, -1.5 * M_PI, -0.5 * M_PI, false),
        Piece::segment({x1, ell}, {x0, ell}),
        Piece::arc({x0, r}, r, -0.5 * M_PI, 0.5 * M_PI, false),
    };
    d.validate();
    return d;
  }

  /// Bunimovich-style container: semicircular caps close the tube directly.
  static BilliardDomain stadium_ends(double ell = 0.5) {
    BilliardDomain d;
    d.ell = ell;
    d.name = "stadium-ends";
    double r = 0.5 * ell;
    d.pieces = {
        Piece::segment({0, 0}, {1, 0}),
        Piece::arc({1, r}, r, -0.5 * M_PI, 0.5 * M_PI, true),
        Piece::segment({1, ell}, {0, ell}),
        Piece::arc({0, r}, r, 0.5 * M_PI, 1.5 * M_PI, true),
    };
    d.validate();
    return d;
  }

  static BilliardDomain preset(const std::string& name) {
    if (name == "box") return box(0.5, 0.5, 0.5);
    if (name == "box-unit") return box(1.0, 0.0, 0.0);
    if (name == "sinai") return sinai();
    if (name == "stadium-ends") return stadium_ends();
    throw ConfigError("unknown domain preset: " + name);
  }

  void validate() const {
    if (!(ell > 0)) throw ConfigError("tube cross-section must be positive");
    bool bottom = false, top = false;
    for (const auto& pc : pieces) {
      if (pc.kind == Piece::Kind::Arc) {
        if (!(pc.theta1 > pc.theta0))
          throw ConfigError("arc must have theta0 < theta1");
        // arcs stay outside the open tube strip
        auto [lo, hi] = pc.x_range();
        if (hi > 1e-9 && lo < 1 - 1e-9)
          throw ConfigError("arcs may not overlap the tube strip 0 < x < 1");
      } else {
        // tube walls present as segments covering [0,1] at y = 0 and y = ell
        auto covers = [&](double y) {
          return std::abs(pc.a.y - y) < 1e-12 && std::abs(pc.b.y - y) < 1e-12 &&
                 std::min(pc.a.x, pc.b.x) <= 1e-12 &&
                 std::max(pc.a.x, pc.b.x) >= 1 - 1e-12;
        };
        bottom = bottom || covers(0.0);
        top = top || covers(ell);
      }
    }
    if (!bottom || !top)
      throw ConfigError("tube walls [0,1]x{0,ell} must be boundary pieces");
    if (area(Side::Left, 0.4) <= 0 || area(Side::Right, 0.6) <= 0)
      throw ConfigError("chamber areas must be positive");
  }

  /// Boundary pieces of chamber 1 (left of Q) or 2, clipped at the piston
  /// plane, with the piston face appended as the last piece.
  std::vector<Piece> chamber_pieces(Side side, double Q) const {
    std::vector<Piece> out;
    for (const auto& pc : pieces) {
      if (pc.kind == Piece::Kind::Arc) {
        bool left_of = pc.x_range().second <= Q + 1e-12;
        if (side == Side::Left ? left_of : !left_of) out.push_back(pc);
        continue;
      }
      double xa = pc.a.x, xb = pc.b.x;
      // container walls exactly on the piston plane yield to the face
      if (std::abs(xa - Q) < 1e-12 && std::abs(xb - Q) < 1e-12) continue;
      if (side == Side::Left) {
        if (xa <= Q + 1e-14 && xb <= Q + 1e-14) {
          out.push_back(pc);
        } else if (std::min(xa, xb) < Q && std::max(xa, xb) > Q) {
          double u = (Q - xa) / (xb - xa);
          Vec2 cut{Q, pc.a.y + u * (pc.b.y - pc.a.y)};
          out.push_back(xa < Q ? Piece::segment(pc.a, cut)
                               : Piece::segment(cut, pc.b));
        }
      } else {
        if (xa >= Q - 1e-14 && xb >= Q - 1e-14) {
          out.push_back(pc);
        } else if (std::min(xa, xb) < Q && std::max(xa, xb) > Q) {
          double u = (Q - xa) / (xb - xa);
          Vec2 cut{Q, pc.a.y + u * (pc.b.y - pc.a.y)};
          out.push_back(xa > Q ? Piece::segment(pc.a, cut)
                               : Piece::segment(cut, pc.b));
        }
      }
    }
    if (side == Side::Left)
      out.push_back(Piece::segment({Q, 0}, {Q, ell}));
    else
      out.push_back(Piece::segment({Q, ell}, {Q, 0}));
    return out;
  }

  double area(Side side, double Q) const {
    double a = 0;
    for (const auto& pc : chamber_pieces(side, Q)) a += pc.green_area();
    return a;
  }

  double perimeter(Side side, double Q) const {
    double p = 0;
    for (const auto& pc : chamber_pieces(side, Q)) p += pc.length();
    return p;
  }
};

/// Frozen-piston chamber, ready for billiard-flow studies. The piston face
/// is the last piece.
struct Chamber {
  std::vector<Piece> pieces;
  std::size_t face = 0;
  double ell = 0;
  double area = 0;
  double perimeter = 0;

  Chamber(const BilliardDomain& dom, Side side, double Q)
      : pieces(dom.chamber_pieces(side, Q)),
        face(pieces.size() - 1),
        ell(dom.ell),
        area(dom.area(side, Q)),
        perimeter(dom.perimeter(side, Q)) {}
};

}  // namespace piston::billiard
