#pragma once

// Planar geometry: poses, box/cylinder footprints, penetration depths with
// analytic gradients. Penetration is positive when shapes overlap, negative
// separation distance otherwise, so `max(0, pen)` is a collision residual.
// Gradients are exact almost everywhere; `kink_margin` reports the distance
// to the nearest nondifferentiability (SAT axis tie, clamp boundary) so
// callers can detect unreliable gradient points.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dvt {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

struct Pose {
  double x = 0.0, y = 0.0, th = 0.0;
  Vec2 pos() const { return {x, y}; }
};

/// Derivative of a scalar w.r.t. one pose (x, y, theta).
struct PoseJac {
  double dx = 0.0, dy = 0.0, dth = 0.0;
};

inline Vec2 rot(double th, Vec2 v) {
  const double c = std::cos(th), s = std::sin(th);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// d(rot(th, v))/dth
inline Vec2 drot(double th, Vec2 v) {
  const double c = std::cos(th), s = std::sin(th);
  return {-s * v.x - c * v.y, c * v.x - s * v.y};
}

struct ObjectShape {
  enum class Kind { Box, Cylinder };
  Kind kind = Kind::Box;
  double half_w = 0.0;  // box half extent along local x
  double half_l = 0.0;  // box half extent along local y
  double radius = 0.0;  // cylinder

  static ObjectShape box(double hw, double hl) {
    if (hw <= 0.0 || hl <= 0.0) throw std::invalid_argument("box extents must be positive");
    ObjectShape s;
    s.kind = Kind::Box;
    s.half_w = hw;
    s.half_l = hl;
    return s;
  }
  static ObjectShape cylinder(double r) {
    if (r <= 0.0) throw std::invalid_argument("cylinder radius must be positive");
    ObjectShape s;
    s.kind = Kind::Cylinder;
    s.radius = r;
    return s;
  }

  bool is_box() const { return kind == Kind::Box; }

  /// Half extent along the approach axis of grasp face eta (0:+x 1:+y 2:-x 3:-y).
  double approach_half(int eta) const {
    if (!is_box()) return radius;
    return (eta % 2 == 0) ? half_w : half_l;
  }

  /// Full extent the gripper closes over for grasp face eta (the in-plane
  /// axis perpendicular to the approach direction).
  double closing_extent(int eta) const {
    if (!is_box()) return 2.0 * radius;
    return (eta % 2 == 0) ? 2.0 * half_l : 2.0 * half_w;
  }

  /// Circumscribed radius of the footprint.
  double bounding_radius() const {
    return is_box() ? std::hypot(half_w, half_l) : radius;
  }
};

/// Outward unit normal of face eta in the object frame.
inline Vec2 face_normal(int eta) {
  switch (eta & 3) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

inline std::array<Vec2, 4> box_corners(const Pose& p, const ObjectShape& s) {
  const Vec2 ex = rot(p.th, {s.half_w, 0.0});
  const Vec2 ey = rot(p.th, {0.0, s.half_l});
  const Vec2 c = p.pos();
  return {c + ex + ey, c - ex + ey, c - ex - ey, c + ex - ey};
}

namespace detail {

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline double pen_box_box(const Pose& pa, const ObjectShape& sa, const Pose& pb,
                          const ObjectShape& sb, PoseJac* ja, PoseJac* jb,
                          double* kink_margin) {
  const double ca = std::cos(pa.th), sna = std::sin(pa.th);
  const double cb = std::cos(pb.th), snb = std::sin(pb.th);
  const Vec2 axA{ca, sna}, ayA{-sna, ca};
  const Vec2 axB{cb, snb}, ayB{-snb, cb};
  const Vec2 t = pb.pos() - pa.pos();

  struct Axis {
    Vec2 u;
    int owner;  // 0 = A, 1 = B
  };
  const Axis axes[4] = {{axA, 0}, {ayA, 0}, {axB, 1}, {ayB, 1}};

  double best = std::numeric_limits<double>::infinity();
  double second = best;
  int bi = -1;
  double ovs[4];
  for (int i = 0; i < 4; ++i) {
    const Vec2 u = axes[i].u;
    const double projA = sa.half_w * std::abs(dot(axA, u)) + sa.half_l * std::abs(dot(ayA, u));
    const double projB = sb.half_w * std::abs(dot(axB, u)) + sb.half_l * std::abs(dot(ayB, u));
    ovs[i] = projA + projB - std::abs(dot(t, u));
    if (ovs[i] < best) {
      second = best;
      best = ovs[i];
      bi = i;
    } else {
      second = std::min(second, ovs[i]);
    }
  }

  const Vec2 u = axes[bi].u;
  const double tu = dot(t, u);
  const double stu = sgn(tu);
  if (kink_margin) {
    // Absolute-value kinks: axis tie, |t.u| sign flip, and the projection of
    // the non-owning box onto u crossing zero. (The owner's own-axis dots are
    // constant 0/1 and never kink.) Margins are value gaps, not parameter
    // distances; callers treat small values as "do not trust gradients here".
    double m = std::min(second - best, std::abs(tu));
    if (axes[bi].owner == 0) {
      m = std::min({m, std::abs(dot(axB, u)), std::abs(dot(ayB, u))});
    } else {
      m = std::min({m, std::abs(dot(axA, u)), std::abs(dot(ayA, u))});
    }
    *kink_margin = m;
  }

  if (ja || jb) {
    PoseJac ga, gb;
    // translation parts: r = projA + projB - |t.u|, t = cB - cA
    ga.dx = stu * u.x;
    ga.dy = stu * u.y;
    gb.dx = -stu * u.x;
    gb.dy = -stu * u.y;
    // rotation of the axis owner moves u; the other rotation moves only its
    // own projection term.
    const Vec2 du = (axes[bi].owner == 0) ? drot(pa.th, rot(-pa.th, u))
                                          : drot(pb.th, rot(-pb.th, u));
    // dprojA/dthA (u fixed): axA,ayA rotate
    const double dprojA_dthA = sa.half_w * sgn(dot(axA, u)) * dot(ayA, u) -
                               sa.half_l * sgn(dot(ayA, u)) * dot(axA, u);
    const double dprojB_dthB = sb.half_w * sgn(dot(axB, u)) * dot(ayB, u) -
                               sb.half_l * sgn(dot(ayB, u)) * dot(axB, u);
    // axis-motion contribution (owner's theta also moves u through du)
    const double dprojA_du = sa.half_w * sgn(dot(axA, u)) * dot(axA, du) +
                             sa.half_l * sgn(dot(ayA, u)) * dot(ayA, du);
    const double dprojB_du = sb.half_w * sgn(dot(axB, u)) * dot(axB, du) +
                             sb.half_l * sgn(dot(ayB, u)) * dot(ayB, du);
    const double dabs_tu_du = stu * dot(t, du);
    if (axes[bi].owner == 0) {
      ga.dth = dprojA_dthA + dprojA_du + dprojB_du - dabs_tu_du;
      gb.dth = dprojB_dthB;
    } else {
      ga.dth = dprojA_dthA;
      gb.dth = dprojB_dthB + dprojA_du + dprojB_du - dabs_tu_du;
    }
    if (ja) *ja = ga;
    if (jb) *jb = gb;
  }
  return best;
}

// Circle (center cc, radius r) against oriented box. Covers the point case
// with r = 0.
inline double pen_circle_box(Vec2 cc, double r, const Pose& pb, const ObjectShape& sb,
                             Vec2* dcc, PoseJac* jb, double* kink_margin) {
  const double c = std::cos(pb.th), s = std::sin(pb.th);
  const Vec2 axB{c, s}, ayB{-s, c};
  const Vec2 v = cc - pb.pos();
  const double qx = dot(axB, v);
  const double qy = dot(ayB, v);
  const double dxo = std::abs(qx) - sb.half_w;
  const double dyo = std::abs(qy) - sb.half_l;

  double pen;
  double dpen_dqx, dpen_dqy;
  if (dxo > 0.0 || dyo > 0.0) {
    const double ex = std::max(dxo, 0.0), ey = std::max(dyo, 0.0);
    const double dist = std::hypot(ex, ey);
    pen = r - dist;
    dpen_dqx = (dist > 0.0) ? -sgn(qx) * ex / dist : 0.0;
    dpen_dqy = (dist > 0.0) ? -sgn(qy) * ey / dist : 0.0;
    if (kink_margin) *kink_margin = std::min({std::abs(dxo), std::abs(dyo), std::abs(qx), std::abs(qy)});
  } else {
    // center inside: depth to nearest face
    pen = r + std::min(-dxo, -dyo);
    if (-dxo <= -dyo) {
      dpen_dqx = -sgn(qx);
      dpen_dqy = 0.0;
    } else {
      dpen_dqx = 0.0;
      dpen_dqy = -sgn(qy);
    }
    if (kink_margin) *kink_margin = std::min({std::abs(dxo - dyo), std::abs(qx), std::abs(qy)});
  }

  if (dcc || jb) {
    // q = R^T v; dq/dcc = rows axB, ayB; dq/dth = (ayB.v, -axB.v)
    const Vec2 g{dpen_dqx * axB.x + dpen_dqy * ayB.x, dpen_dqx * axB.y + dpen_dqy * ayB.y};
    if (dcc) *dcc = g;
    if (jb) {
      jb->dx = -g.x;
      jb->dy = -g.y;
      jb->dth = dpen_dqx * dot(ayB, v) + dpen_dqy * (-dot(axB, v));
    }
  }
  return pen;
}

inline double pen_circle_circle(Vec2 c1, double r1, Vec2 c2, double r2, Vec2* dc1,
                                Vec2* dc2, double* kink_margin) {
  const Vec2 d = c1 - c2;
  const double dist = norm(d);
  if (kink_margin) *kink_margin = dist;
  const Vec2 n = (dist > 0.0) ? (1.0 / dist) * d : Vec2{0.0, 0.0};
  if (dc1) *dc1 = -1.0 * n;
  if (dc2) *dc2 = n;
  return r1 + r2 - dist;
}

}  // namespace detail

/// Penetration depth between two footprints (positive = overlap).
inline double penetration(const Pose& pa, const ObjectShape& sa, const Pose& pb,
                          const ObjectShape& sb, PoseJac* ja = nullptr,
                          PoseJac* jb = nullptr, double* kink_margin = nullptr) {
  using K = ObjectShape::Kind;
  if (sa.kind == K::Box && sb.kind == K::Box)
    return detail::pen_box_box(pa, sa, pb, sb, ja, jb, kink_margin);
  if (sa.kind == K::Cylinder && sb.kind == K::Cylinder) {
    Vec2 d1, d2;
    const double p = detail::pen_circle_circle(pa.pos(), sa.radius, pb.pos(), sb.radius,
                                               &d1, &d2, kink_margin);
    if (ja) *ja = {d1.x, d1.y, 0.0};
    if (jb) *jb = {d2.x, d2.y, 0.0};
    return p;
  }
  if (sa.kind == K::Cylinder) {
    Vec2 dc;
    PoseJac jbox;
    const double p = detail::pen_circle_box(pa.pos(), sa.radius, pb, sb, &dc, &jbox, kink_margin);
    if (ja) *ja = {dc.x, dc.y, 0.0};
    if (jb) *jb = jbox;
    return p;
  }
  // box-cylinder: swap
  Vec2 dc;
  PoseJac jbox;
  const double p = detail::pen_circle_box(pb.pos(), sb.radius, pa, sa, &dc, &jbox, kink_margin);
  if (ja) *ja = jbox;
  if (jb) *jb = {dc.x, dc.y, 0.0};
  return p;
}

/// Depth of a point inside a footprint (negative = outside by that distance).
inline double point_depth(Vec2 p, const Pose& pb, const ObjectShape& sb,
                          Vec2* dp = nullptr, PoseJac* jb = nullptr,
                          double* kink_margin = nullptr) {
  if (sb.kind == ObjectShape::Kind::Cylinder) {
    Vec2 d1, d2;
    const double v = detail::pen_circle_circle(p, 0.0, pb.pos(), sb.radius, &d1, &d2, kink_margin);
    if (dp) *dp = d1;
    if (jb) *jb = {d2.x, d2.y, 0.0};
    return v;
  }
  return detail::pen_circle_box(p, 0.0, pb, sb, dp, jb, kink_margin);
}

struct Rect {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

/// Cell-center footprint test used by the rasterizer.
inline bool covers_point(const Pose& p, const ObjectShape& s, Vec2 q) {
  if (s.kind == ObjectShape::Kind::Cylinder) return norm(q - p.pos()) <= s.radius;
  const Vec2 v = q - p.pos();
  const double c = std::cos(p.th), sn = std::sin(p.th);
  const double lx = c * v.x + sn * v.y;
  const double ly = -sn * v.x + c * v.y;
  return std::abs(lx) <= s.half_w && std::abs(ly) <= s.half_l;
}

}  // namespace dvt
