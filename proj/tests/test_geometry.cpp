#include <catch2/catch_amalgamated.hpp>

#include "dvt/geometry.hpp"
#include "dvt/rng.hpp"

using namespace dvt;
using Catch::Approx;

namespace {

// Central finite difference of penetration() w.r.t. one pose coordinate.
double fd_pen(const Pose& pa, const ObjectShape& sa, const Pose& pb, const ObjectShape& sb,
              int which_pose, int coord, double h = 1e-7) {
  auto bump = [&](double s) {
    Pose a = pa, b = pb;
    double* f = which_pose == 0 ? (coord == 0 ? &a.x : coord == 1 ? &a.y : &a.th)
                                : (coord == 0 ? &b.x : coord == 1 ? &b.y : &b.th);
    *f += s;
    return penetration(a, sa, b, sb);
  };
  return (bump(h) - bump(-h)) / (2.0 * h);
}

Pose rand_pose(Rng& rng) {
  return {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-3.1, 3.1)};
}

ObjectShape rand_shape(Rng& rng) {
  if (rng.bernoulli(0.3)) return ObjectShape::cylinder(rng.uniform(0.02, 0.08));
  return ObjectShape::box(rng.uniform(0.02, 0.1), rng.uniform(0.02, 0.1));
}

}  // namespace

TEST_CASE("penetration depth: hand-computed cases", "[geometry]") {
  const auto b1 = ObjectShape::box(0.1, 0.05);

  SECTION("identical axis-aligned boxes overlap by the smaller extent") {
    REQUIRE(penetration({0, 0, 0}, b1, {0, 0, 0}, b1) == Approx(0.1).margin(1e-12));
  }
  SECTION("axis-aligned separation is the negative gap") {
    // gap along x: centers 0.35 apart, half extents 0.1+0.1
    REQUIRE(penetration({0, 0, 0}, b1, {0.35, 0, 0}, b1) == Approx(-0.15).margin(1e-12));
    // touching exactly
    REQUIRE(penetration({0, 0, 0}, b1, {0.2, 0, 0}, b1) == Approx(0.0).margin(1e-12));
    // partial overlap
    REQUIRE(penetration({0, 0, 0}, b1, {0.15, 0, 0}, b1) == Approx(0.05).margin(1e-12));
  }
  SECTION("rotating one box 90 degrees swaps its extents") {
    // b1 rotated: half extents along world x become 0.05
    REQUIRE(penetration({0, 0, 0}, b1, {0.2, 0, 1.5707963267948966}, b1) ==
            Approx(-0.05).margin(1e-9));
  }
  SECTION("separating axis can come from the rotated box") {
    // 45-degree box: its own axis gives a smaller overlap than the AABB axes
    const auto sq = ObjectShape::box(0.05, 0.05);
    const double d = 0.05 * std::sqrt(2.0);  // corner-to-face distance at 45 deg
    const double pen = penetration({0, 0, 0.7853981633974483}, sq, {0.2, 0, 0}, sq);
    REQUIRE(pen == Approx(d + 0.05 - 0.2).margin(1e-9));
  }
  SECTION("circles") {
    const auto c1 = ObjectShape::cylinder(0.05), c2 = ObjectShape::cylinder(0.03);
    REQUIRE(penetration({0, 0, 0}, c1, {0.1, 0, 0}, c2) == Approx(-0.02).margin(1e-12));
    REQUIRE(penetration({0, 0, 0}, c1, {0.04, 0, 0}, c2) == Approx(0.04).margin(1e-12));
  }
  SECTION("circle vs box, outside face / corner / inside") {
    const auto c = ObjectShape::cylinder(0.02);
    REQUIRE(penetration({0.15, 0, 0}, c, {0, 0, 0}, b1) == Approx(-0.03).margin(1e-12));
    const double corner_gap = std::hypot(0.05, 0.03) - 0.02;
    REQUIRE(penetration({0.15, 0.08, 0}, c, {0, 0, 0}, b1) == Approx(-corner_gap).margin(1e-12));
    // center inside: depth = radius + distance to nearest face (y face: 0.05-0.01)
    REQUIRE(penetration({0.0, 0.01, 0}, c, {0, 0, 0}, b1) == Approx(0.02 + 0.04).margin(1e-12));
  }
}

TEST_CASE("point depth inside footprints", "[geometry]") {
  const auto b = ObjectShape::box(0.1, 0.05);
  REQUIRE(point_depth({0.0, 0.0}, {0, 0, 0}, b) == Approx(0.05).margin(1e-12));
  REQUIRE(point_depth({0.13, 0.0}, {0, 0, 0}, b) == Approx(-0.03).margin(1e-12));
  const auto c = ObjectShape::cylinder(0.04);
  REQUIRE(point_depth({0.0, 0.01}, {0, 0, 0}, c) == Approx(0.03).margin(1e-12));
}

TEST_CASE("box corners and point cover", "[geometry]") {
  const auto b = ObjectShape::box(0.1, 0.05);
  auto cs = box_corners({0.5, 0.2, 0}, b);
  REQUIRE(cs[0].x == Approx(0.6));
  REQUIRE(cs[0].y == Approx(0.25));
  REQUIRE(cs[2].x == Approx(0.4));
  REQUIRE(cs[2].y == Approx(0.15));
  REQUIRE(covers_point({0.5, 0.2, 0}, b, {0.59, 0.24}));
  REQUIRE_FALSE(covers_point({0.5, 0.2, 0}, b, {0.61, 0.2}));
  // rotate 90 deg: extents swap
  REQUIRE(covers_point({0.5, 0.2, 1.5707963267948966}, b, {0.5, 0.29}));
  REQUIRE_FALSE(covers_point({0.5, 0.2, 1.5707963267948966}, b, {0.59, 0.2}));
}

TEST_CASE("penetration gradients match finite differences away from kinks", "[geometry]") {
  Rng rng(123456);
  int checked = 0;
  for (int trial = 0; trial < 4000 && checked < 1500; ++trial) {
    const auto sa = rand_shape(rng), sb = rand_shape(rng);
    const Pose pa = rand_pose(rng), pb = rand_pose(rng);
    PoseJac ja, jb;
    double margin = 0.0;
    penetration(pa, sa, pb, sb, &ja, &jb, &margin);
    if (margin < 1e-3) continue;  // nondifferentiable neighborhood: skip
    ++checked;
    const double grads[6] = {ja.dx, ja.dy, ja.dth, jb.dx, jb.dy, jb.dth};
    for (int which = 0; which < 2; ++which)
      for (int coord = 0; coord < 3; ++coord) {
        const double fd = fd_pen(pa, sa, pb, sb, which, coord);
        const double an = grads[3 * which + coord];
        INFO("trial " << trial << " pose " << which << " coord " << coord << " an=" << an
                      << " fd=" << fd << " margin=" << margin);
        REQUIRE(std::abs(an - fd) <= 1e-5 * std::max({1.0, std::abs(an), std::abs(fd)}));
      }
  }
  REQUIRE(checked >= 1000);
}

TEST_CASE("point depth gradients match finite differences", "[geometry]") {
  Rng rng(99);
  int checked = 0;
  for (int trial = 0; trial < 2000 && checked < 800; ++trial) {
    const auto sb = rand_shape(rng);
    const Pose pb = rand_pose(rng);
    const Vec2 q{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    Vec2 dq;
    PoseJac jb;
    double margin = 0.0;
    point_depth(q, pb, sb, &dq, &jb, &margin);
    if (margin < 1e-3) continue;
    ++checked;
    auto fd = [&](int coord) {
      auto bump = [&](double s) {
        Vec2 qq = q;
        Pose bb = pb;
        switch (coord) {
          case 0: qq.x += s; break;
          case 1: qq.y += s; break;
          case 2: bb.x += s; break;
          case 3: bb.y += s; break;
          default: bb.th += s; break;
        }
        return point_depth(qq, bb, sb);
      };
      const double h = 1e-7;
      return (bump(h) - bump(-h)) / (2 * h);
    };
    const double an[5] = {dq.x, dq.y, jb.dx, jb.dy, jb.dth};
    for (int coord = 0; coord < 5; ++coord) {
      const double f = fd(coord);
      INFO("trial " << trial << " coord " << coord);
      REQUIRE(std::abs(an[coord] - f) <= 1e-5 * std::max({1.0, std::abs(an[coord]), std::abs(f)}));
    }
  }
  REQUIRE(checked >= 500);
}

TEST_CASE("penetration is symmetric under argument swap", "[geometry]") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto sa = rand_shape(rng), sb = rand_shape(rng);
    const Pose pa = rand_pose(rng), pb = rand_pose(rng);
    REQUIRE(penetration(pa, sa, pb, sb) == Approx(penetration(pb, sb, pa, sa)).margin(1e-9));
  }
}
