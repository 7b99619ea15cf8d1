#pragma once

// World model and rendering. A scene is a top-down planar table with two
// reach-annulus arms, movable box/cylinder objects with heights, and a square
// target region. The sampler is deterministic per (config, seed); rendering
// produces channel-planar rasters over exactly the table rectangle.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvt/geometry.hpp"
#include "dvt/logic.hpp"
#include "dvt/rng.hpp"

namespace dvt {

struct ArmModel {
  Vec2 base;
  double reach_min = 0.05;
  double reach_max = 0.55;
};

struct SceneObject {
  int id = 0;
  ObjectShape shape;
  Pose pose;
  double height = 0.0;
  bool on_target = false;  // sampler pre-placed this object on the target region
};

struct TargetRegion {
  Vec2 center;
  double side = 0.12;
  Rect rect() const {
    return {center.x - 0.5 * side, center.x + 0.5 * side, center.y - 0.5 * side,
            center.y + 0.5 * side};
  }
};

struct Scene {
  Rect table{0.0, 1.0, 0.0, 0.6};
  ArmModel arms[2];
  std::vector<SceneObject> objects;
  TargetRegion target;
  std::uint64_t seed = 0;

  int n_objects() const { return static_cast<int>(objects.size()); }
  const SceneObject& object(int id) const {
    if (id < 0 || id >= n_objects()) throw std::out_of_range("unknown object id");
    return objects[static_cast<std::size_t>(id)];
  }
};

struct Goal {
  int object = 0;  // place this object on the (single) target region
};

inline SymbolicState initial_state(const Scene& s) {
  std::vector<Rest> rests;
  rests.reserve(s.objects.size());
  for (const auto& o : s.objects) rests.push_back(o.on_target ? Rest::Target : Rest::Table);
  return initial_symbolic_state(std::move(rests));
}

// ---------------------------------------------------------------------------
// Sampler

struct SamplerConfig {
  Rect table{0.0, 1.0, 0.0, 0.6};
  double arm_base_inset = 0.05;  // bases sit at (x0+inset, yc) and (x1-inset, yc)
  double reach_min = 0.05;
  double reach_max = 0.55;
  double height_min = 0.04, height_max = 0.12;
  double box_half_min = 0.025, box_half_max = 0.08;
  double cyl_radius_min = 0.02, cyl_radius_max = 0.06;
  double cylinder_fraction = 0.0;  // probability a sampled object is a cylinder
  double target_side = 0.12;
  double occupier_prob = 0.5;  // chance a distractor starts centered on the target
  double clearance = 0.002;    // minimum initial gap between footprints
  int max_attempts = 1000;     // pose rejection budget per object
};

namespace detail {

inline bool footprint_in_rect(const Pose& p, const ObjectShape& s, const Rect& r) {
  if (s.kind == ObjectShape::Kind::Cylinder) {
    return p.x - s.radius >= r.x0 && p.x + s.radius <= r.x1 && p.y - s.radius >= r.y0 &&
           p.y + s.radius <= r.y1;
  }
  for (const Vec2& c : box_corners(p, s))
    if (!r.contains(c)) return false;
  return true;
}

}  // namespace detail

/// Deterministic scene sampler. Draw order is fixed (target, occupier coin,
/// then per object: shape, extents, height, pose rejection loop) so a given
/// (cfg, seed) always reproduces the same scene. Object 0 is the goal object
/// and is never pre-placed on the target; if the occupier coin comes up and a
/// distractor exists, object 1 starts centered on the target region.
inline Scene sample_scene(const SamplerConfig& cfg, std::uint64_t seed, int n_objects) {
  if (n_objects < 1) throw std::invalid_argument("need at least one object");
  Scene s;
  s.table = cfg.table;
  s.seed = seed;
  const double yc = 0.5 * (cfg.table.y0 + cfg.table.y1);
  s.arms[0] = {{cfg.table.x0 + cfg.arm_base_inset, yc}, cfg.reach_min, cfg.reach_max};
  s.arms[1] = {{cfg.table.x1 - cfg.arm_base_inset, yc}, cfg.reach_min, cfg.reach_max};

  Rng rng(seed);
  s.target.side = cfg.target_side;
  s.target.center.x = rng.uniform(cfg.table.x0 + 0.5 * cfg.target_side,
                                  cfg.table.x1 - 0.5 * cfg.target_side);
  s.target.center.y = rng.uniform(cfg.table.y0 + 0.5 * cfg.target_side,
                                  cfg.table.y1 - 0.5 * cfg.target_side);

  const bool occupier = n_objects >= 2 && rng.bernoulli(cfg.occupier_prob);

  s.objects.resize(static_cast<std::size_t>(n_objects));
  for (int i = 0; i < n_objects; ++i) {
    SceneObject& o = s.objects[static_cast<std::size_t>(i)];
    o.id = i;
    const bool cyl = rng.bernoulli(cfg.cylinder_fraction);
    if (cyl) {
      o.shape = ObjectShape::cylinder(rng.uniform(cfg.cyl_radius_min, cfg.cyl_radius_max));
    } else {
      o.shape = ObjectShape::box(rng.uniform(cfg.box_half_min, cfg.box_half_max),
                                 rng.uniform(cfg.box_half_min, cfg.box_half_max));
    }
    o.height = rng.uniform(cfg.height_min, cfg.height_max);
    o.on_target = occupier && i == 1;
  }

  // Place the occupier before everything else: its center is pinned to the
  // target, so letting a freely-sampled object land there first could block
  // every theta and waste the whole attempt budget.
  std::vector<int> order;
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < n_objects; ++i)
      if (s.objects[static_cast<std::size_t>(i)].on_target == (pass == 0)) order.push_back(i);

  std::vector<bool> done(static_cast<std::size_t>(n_objects), false);
  for (int i : order) {
    SceneObject& o = s.objects[static_cast<std::size_t>(i)];
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      Pose p;
      p.th = rng.uniform(-3.14159265358979323846, 3.14159265358979323846);
      if (o.on_target) {
        p.x = s.target.center.x;
        p.y = s.target.center.y;
      } else {
        p.x = rng.uniform(cfg.table.x0, cfg.table.x1);
        p.y = rng.uniform(cfg.table.y0, cfg.table.y1);
      }
      if (!detail::footprint_in_rect(p, o.shape, cfg.table)) continue;
      bool clash = false;
      for (int j = 0; j < n_objects && !clash; ++j) {
        if (!done[static_cast<std::size_t>(j)]) continue;
        const SceneObject& q = s.objects[static_cast<std::size_t>(j)];
        clash = penetration(p, o.shape, q.pose, q.shape) > -cfg.clearance;
      }
      if (clash) continue;
      o.pose = p;
      placed = true;
    }
    if (!placed)
      throw std::runtime_error("sample_scene: no non-overlapping placement for object " +
                               std::to_string(i) + " within attempt budget");
    done[static_cast<std::size_t>(i)] = true;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rendering

/// Channel-planar raster; index (ch, row, col) with row 0 at the table's
/// maximal y (top of the image).
struct Image {
  int channels = 0, w = 0, h = 0;
  std::vector<float> data;  // size channels*w*h

  Image() = default;
  Image(int c_, int w_, int h_)
      : channels(c_), w(w_), h(h_),
        data(static_cast<std::size_t>(c_) * w_ * h_, 0.0f) {}

  float& at(int c, int r, int col) {
    return data[(static_cast<std::size_t>(c) * h + r) * w + col];
  }
  float at(int c, int r, int col) const {
    return data[(static_cast<std::size_t>(c) * h + r) * w + col];
  }
};

struct RenderConfig {
  int w = 64, h = 64;
  double max_height = 0.12;  // depth normalizer
};

namespace detail {

inline Vec2 cell_center(const Rect& table, int w, int h, int r, int c) {
  return {table.x0 + (c + 0.5) * table.width() / w,
          table.y1 - (r + 0.5) * table.height() / h};
}

}  // namespace detail

/// Top-down height map normalized by cfg.max_height; empty cells are 0,
/// overlapping footprints keep the taller object.
inline Image render_depth(const Scene& s, const RenderConfig& cfg = {}) {
  Image img(1, cfg.w, cfg.h);
  for (int r = 0; r < cfg.h; ++r)
    for (int c = 0; c < cfg.w; ++c) {
      const Vec2 q = detail::cell_center(s.table, cfg.w, cfg.h, r, c);
      double best = 0.0;
      for (const auto& o : s.objects)
        if (o.height > best && covers_point(o.pose, o.shape, q)) best = o.height;
      img.at(0, r, c) = static_cast<float>(best / cfg.max_height);
    }
  return img;
}

/// Object tuple of a grounded action for rendering: (obj,) for grasps,
/// (obj, surface) for places.
struct ActionObjects {
  int object = 0;
  std::optional<Surface> surface;

  static ActionObjects of(const Action& a) {
    if (a.op == Op::Grasp) return {a.object, std::nullopt};
    return {a.object, a.surface};
  }
};

/// 3-channel action/object image: channel 0 is always the INITIAL scene
/// depth, channel 1 masks the manipulated object, channel 2 masks the surface
/// party (target square, whole table, or zeroed when the action has none).
inline Image render_action_image(const Scene& s, const ActionObjects& o,
                                 const RenderConfig& cfg = {}) {
  (void)s.object(o.object);  // validate id
  Image img(3, cfg.w, cfg.h);
  const Image depth = render_depth(s, cfg);
  std::copy(depth.data.begin(), depth.data.end(), img.data.begin());
  const SceneObject& obj = s.object(o.object);
  const Rect target = s.target.rect();
  for (int r = 0; r < cfg.h; ++r)
    for (int c = 0; c < cfg.w; ++c) {
      const Vec2 q = detail::cell_center(s.table, cfg.w, cfg.h, r, c);
      if (covers_point(obj.pose, obj.shape, q)) img.at(1, r, c) = 1.0f;
      if (o.surface) {
        if (*o.surface == Surface::Target) {
          if (target.contains(q)) img.at(2, r, c) = 1.0f;
        } else {
          img.at(2, r, c) = 1.0f;  // the raster spans exactly the table
        }
      }
    }
  return img;
}

inline Image render_goal_image(const Scene& s, const Goal& g, const RenderConfig& cfg = {}) {
  return render_action_image(s, {g.object, Surface::Target}, cfg);
}

// ---------------------------------------------------------------------------
// PGM export (binary P5, 8-bit)

inline void export_pgm(const Image& img, int channel, const std::string& path) {
  if (channel < 0 || channel >= img.channels) throw std::out_of_range("bad channel");
  std::string payload;
  payload.reserve(static_cast<std::size_t>(img.w) * img.h);
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c) {
      double v = img.at(channel, r, c);
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      payload.push_back(static_cast<char>(static_cast<int>(v * 255.0 + 0.5)));
    }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("export_pgm: cannot open " + path);
  std::fprintf(f, "P5\n%d %d\n255\n", img.w, img.h);
  const std::size_t n = std::fwrite(payload.data(), 1, payload.size(), f);
  const int rc = std::fclose(f);
  if (n != payload.size() || rc != 0) throw std::runtime_error("export_pgm: write failed");
}

}  // namespace dvt
