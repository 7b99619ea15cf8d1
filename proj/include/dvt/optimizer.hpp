#pragma once

// Keyframe feasibility program for an action sequence. Free variables are the
// placement poses (x,y,theta per Place); grasp wrists and collision checks at
// later steps chain through those variables, so re-grasping a parked object
// couples keyframes. Solved by augmented-Lagrangian with inner gradient
// descent + backtracking, multi-start, deterministic per seed. Constraints
// that touch no variable (grasp width, handover geometry, reach at an initial
// pose) are screened before any start runs — most infeasible sequences die
// there without a single iteration.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dvt/geometry.hpp"
#include "dvt/logic.hpp"
#include "dvt/rng.hpp"
#include "dvt/scene.hpp"

namespace dvt {

struct OptimizerConfig {
  double g_max = 0.08;    // max gripper opening
  double d_wrist = 0.04;  // wrist standoff beyond the grasped face
  double d_min = 0.06;    // min wrist-wrist distance at a handover
  double tol = 1e-4;
  int n_starts = 8;
  int inner_iters = 400;  // gradient steps per AL outer loop
  int al_iters = 12;
  double mu0 = 1.0;
  double penalty_growth = 5.0;
};

enum class ConstraintKind {
  GraspWidth,
  GraspReach,
  PlaceReach,
  InsideTable,
  InsideTarget,
  PairCollision,
  HandoverClearance,
  HandoverAxes,
};

inline const char* kind_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::GraspWidth: return "GraspWidth";
    case ConstraintKind::GraspReach: return "GraspReach";
    case ConstraintKind::PlaceReach: return "PlaceReach";
    case ConstraintKind::InsideTable: return "InsideTable";
    case ConstraintKind::InsideTarget: return "InsideTarget";
    case ConstraintKind::PairCollision: return "PairCollision";
    case ConstraintKind::HandoverClearance: return "HandoverClearance";
    case ConstraintKind::HandoverAxes: return "HandoverAxes";
  }
  return "?";
}

enum class ConstraintClass { Equality, Inequality };

/// Pose that is either a baked-in constant (initial object pose) or a
/// variable triple starting at index `var`.
struct PoseRef {
  int var = -1;
  Pose fixed;

  bool is_var() const { return var >= 0; }
  Pose resolve(const double* x) const {
    return is_var() ? Pose{x[var], x[var + 1], x[var + 2]} : fixed;
  }
};

/// Wrist point of an arm gripping face `eta`: object center pushed out along
/// the face normal by `offset` (approach half extent + wrist standoff).
struct WristRef {
  PoseRef pose;
  double offset = 0.0;
  int eta = 0;

  Vec2 point(const double* x) const {
    const Pose p = pose.resolve(x);
    return p.pos() + rot(p.th, offset * face_normal(eta));
  }
  // dW/dtheta of the underlying pose
  Vec2 dpoint_dth(const double* x) const {
    const Pose p = pose.resolve(x);
    return drot(p.th, offset * face_normal(eta));
  }
};

struct Constraint {
  ConstraintKind kind;
  ConstraintClass cls = ConstraintClass::Inequality;
  int keyframe = 0;  // index of the action that introduced this constraint
  int object = -1, other = -1;  // party object ids (other: obstacle / -1)
  int arm = -1;
  int eta = -1, eta2 = -1;
  PoseRef pose_a, pose_b;
  ObjectShape shape_a, shape_b;
  Vec2 base;              // annulus center (reach) or target center
  double offset = 0.0;    // wrist standoff for reach/wrist-collision rows
  double reach_min = 0.0, reach_max = 0.0;
  double fixed_value = 0.0;  // residual of variable-free kinds
  Rect rect;                 // table bounds
  double half_side = 0.0;    // target half side
  int row0 = 0, nrows = 0;

  bool touches_vars() const { return pose_a.is_var() || pose_b.is_var(); }
};

/// Resolved report entry: where the object was and where the wrist ended up
/// at one action of the sequence. Handovers have no pose (the exchange point
/// is not modelled), only the action identity.
struct Keyframe {
  int action_index = 0;
  int arm = 0;
  int object = 0;
  bool has_pose = false;
  Pose object_pose;
  Vec2 wrist;
};

struct KeyframeProgram {
  int n_vars = 0;
  int n_rows = 0;
  std::vector<Rect> var_init;        // init region per variable triple
  std::vector<Constraint> constraints;
  std::vector<int> row_constraint;   // row index -> constraint index
  std::array<std::vector<WristRef>, 2> chains;  // per-arm wrist sequence (cost)
  std::array<Vec2, 2> bases;
  std::vector<Keyframe> kf_template;            // poses resolved at report time
  std::vector<int> kf_wrist_chain;              // per keyframe: chain slot or -1
  OptimizerConfig cfg;
};

struct SolveReport {
  bool feasible = false;
  double max_violation = std::numeric_limits<double>::infinity();
  std::optional<ConstraintKind> worst;  // kind of the max violator when infeasible
  int iterations = 0;
  int restarts_used = 0;
  std::vector<double> vars;
  std::vector<Keyframe> keyframes;
};

// ---------------------------------------------------------------------------
// Program construction

namespace build_detail {

struct Builder {
  const Scene& scene;
  const OptimizerConfig& cfg;
  KeyframeProgram prog;
  std::vector<PoseRef> cur_pose;   // latest resting pose per object
  std::array<int, 2> held_obj{-1, -1};
  std::array<int, 2> held_eta{-1, -1};
  SymbolicState state;

  Builder(const Scene& s, const OptimizerConfig& c) : scene(s), cfg(c), state(initial_state(s)) {
    prog.cfg = cfg;
    prog.bases = {s.arms[0].base, s.arms[1].base};
    cur_pose.reserve(s.objects.size());
    for (const auto& o : s.objects) cur_pose.push_back(PoseRef{-1, o.pose});
  }

  Constraint& add(ConstraintKind kind, int keyframe, int nrows) {
    Constraint c;
    c.kind = kind;
    c.keyframe = keyframe;
    c.row0 = prog.n_rows;
    c.nrows = nrows;
    prog.constraints.push_back(c);
    prog.n_rows += nrows;
    return prog.constraints.back();
  }

  /// Obstacles with a defined pose at the current keyframe (resting objects),
  /// excluding `except`.
  std::vector<int> resting_except(int except) const {
    std::vector<int> out;
    for (int i = 0; i < state.n_objects(); ++i)
      if (i != except && state.rests[i] != Rest::InHand) out.push_back(i);
    return out;
  }

  void on_grasp(int k, const Action& a) {
    const int ai = arm_index(a.arm);
    const int oi = arm_index(other_arm(a.arm));
    const SceneObject& obj = scene.object(a.object);
    const bool handover = state.holds[oi] == a.object;

    {
      Constraint& c = add(ConstraintKind::GraspWidth, k, 1);
      c.object = a.object;
      c.arm = ai;
      c.eta = a.eta;
      c.fixed_value = obj.shape.closing_extent(a.eta) - cfg.g_max;
    }

    if (handover) {
      const int eta_old = held_eta[oi];
      {
        Constraint& c = add(ConstraintKind::HandoverAxes, k, 1);
        c.object = a.object;
        c.arm = ai;
        c.eta = a.eta;
        c.eta2 = eta_old;
        c.fixed_value = (a.eta % 2 == eta_old % 2) ? 1.0 : -1.0;
      }
      {
        // Wrist separation in the object frame; rotation-invariant, so this
        // is a constant once the two grasp faces and extents are known.
        const Vec2 w_new = (obj.shape.approach_half(a.eta) + cfg.d_wrist) * face_normal(a.eta);
        const Vec2 w_old = (obj.shape.approach_half(eta_old) + cfg.d_wrist) * face_normal(eta_old);
        Constraint& c = add(ConstraintKind::HandoverClearance, k, 1);
        c.object = a.object;
        c.arm = ai;
        c.eta = a.eta;
        c.eta2 = eta_old;
        c.fixed_value = cfg.d_min - norm(w_new - w_old);
      }
      prog.kf_template.push_back({k, ai, a.object, false, {}, {}});
      prog.kf_wrist_chain.push_back(-1);
    } else {
      const WristRef wr{cur_pose[a.object], obj.shape.approach_half(a.eta) + cfg.d_wrist, a.eta};
      {
        Constraint& c = add(ConstraintKind::GraspReach, k, 2);
        c.object = a.object;
        c.arm = ai;
        c.eta = a.eta;
        c.pose_a = wr.pose;
        c.shape_a = obj.shape;
        c.offset = wr.offset;
        c.base = scene.arms[ai].base;
        c.reach_min = scene.arms[ai].reach_min;
        c.reach_max = scene.arms[ai].reach_max;
      }
      for (int other : resting_except(a.object)) {
        Constraint& c = add(ConstraintKind::PairCollision, k, 1);
        c.object = a.object;
        c.other = other;
        c.arm = ai;  // arm >= 0 marks the wrist-point variant
        c.eta = a.eta;
        c.pose_a = wr.pose;
        c.offset = wr.offset;
        c.pose_b = cur_pose[other];
        c.shape_b = scene.object(other).shape;
      }
      prog.chains[ai].push_back(wr);
      prog.kf_template.push_back({k, ai, a.object, true, {}, {}});
      prog.kf_wrist_chain.push_back(static_cast<int>(prog.chains[ai].size()) - 1);
    }
    held_obj[ai] = a.object;
    held_eta[ai] = a.eta;
    if (handover) {
      held_obj[oi] = -1;
      held_eta[oi] = -1;
    }
  }

  void on_place(int k, const Action& a) {
    const int ai = arm_index(a.arm);
    const SceneObject& obj = scene.object(a.object);
    const int eta = held_eta[ai];

    const int v = prog.n_vars;
    prog.n_vars += 3;
    const Rect target = scene.target.rect();
    prog.var_init.push_back(a.surface == Surface::Target ? target : scene.table);
    PoseRef pr;
    pr.var = v;
    const WristRef wr{pr, obj.shape.approach_half(eta) + cfg.d_wrist, eta};

    {
      Constraint& c = add(ConstraintKind::PlaceReach, k, 2);
      c.object = a.object;
      c.arm = ai;
      c.eta = eta;
      c.pose_a = pr;
      c.shape_a = obj.shape;
      c.offset = wr.offset;
      c.base = scene.arms[ai].base;
      c.reach_min = scene.arms[ai].reach_min;
      c.reach_max = scene.arms[ai].reach_max;
    }
    {
      Constraint& c = add(ConstraintKind::InsideTable, k, obj.shape.is_box() ? 16 : 4);
      c.object = a.object;
      c.pose_a = pr;
      c.shape_a = obj.shape;
      c.rect = scene.table;
    }
    if (a.surface == Surface::Target) {
      Constraint& c = add(ConstraintKind::InsideTarget, k, 4);
      c.object = a.object;
      c.pose_a = pr;
      c.base = scene.target.center;
      c.half_side = 0.5 * scene.target.side;
    }
    for (int other : resting_except(a.object)) {
      Constraint& c = add(ConstraintKind::PairCollision, k, 1);
      c.object = a.object;
      c.other = other;
      c.pose_a = pr;
      c.shape_a = obj.shape;
      c.pose_b = cur_pose[other];
      c.shape_b = scene.object(other).shape;
    }

    cur_pose[a.object] = pr;
    held_obj[ai] = -1;
    held_eta[ai] = -1;
    prog.chains[ai].push_back(wr);
    prog.kf_template.push_back({k, ai, a.object, true, {}, {}});
    prog.kf_wrist_chain.push_back(static_cast<int>(prog.chains[ai].size()) - 1);
  }
};

}  // namespace build_detail

inline KeyframeProgram build_program(const std::vector<Action>& seq, const Scene& scene,
                                     const OptimizerConfig& cfg = {}) {
  build_detail::Builder b(scene, cfg);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Action& a = seq[k];
    if (!is_applicable(b.state, a))
      throw std::invalid_argument("build_program: sequence not symbolically valid at step " +
                                  std::to_string(k));
    if (a.op == Op::Grasp)
      b.on_grasp(static_cast<int>(k), a);
    else
      b.on_place(static_cast<int>(k), a);
    b.state = successor(b.state, a);
  }
  b.prog.row_constraint.resize(static_cast<std::size_t>(b.prog.n_rows));
  for (std::size_t ci = 0; ci < b.prog.constraints.size(); ++ci) {
    const Constraint& c = b.prog.constraints[ci];
    for (int r = c.row0; r < c.row0 + c.nrows; ++r)
      b.prog.row_constraint[static_cast<std::size_t>(r)] = static_cast<int>(ci);
  }
  return std::move(b.prog);
}

// ---------------------------------------------------------------------------
// Residual evaluation

namespace eval_detail {

inline void scatter(std::vector<double>* jac, int n_vars, int row, const PoseRef& ref,
                    const PoseJac& g) {
  if (!jac || !ref.is_var()) return;
  double* J = jac->data() + static_cast<std::size_t>(row) * n_vars;
  J[ref.var] += g.dx;
  J[ref.var + 1] += g.dy;
  J[ref.var + 2] += g.dth;
}

}  // namespace eval_detail

/// Signed residual rows (pre-hinge). `jac` (row-major n_rows x n_vars) and
/// `kink` (per-row margin to the nearest nondifferentiability, +inf when the
/// row is globally smooth) are filled when non-null.
inline void eval_constraints(const KeyframeProgram& p, const double* x, std::vector<double>& res,
                             std::vector<double>* jac = nullptr,
                             std::vector<double>* kink = nullptr) {
  const double inf = std::numeric_limits<double>::infinity();
  res.assign(static_cast<std::size_t>(p.n_rows), 0.0);
  if (jac) jac->assign(static_cast<std::size_t>(p.n_rows) * p.n_vars, 0.0);
  if (kink) kink->assign(static_cast<std::size_t>(p.n_rows), inf);

  for (const Constraint& c : p.constraints) {
    switch (c.kind) {
      case ConstraintKind::GraspWidth:
      case ConstraintKind::HandoverAxes:
      case ConstraintKind::HandoverClearance:
        res[c.row0] = c.fixed_value;
        break;

      case ConstraintKind::GraspReach:
      case ConstraintKind::PlaceReach: {
        const Pose pose = c.pose_a.resolve(x);
        const Vec2 u = c.offset * face_normal(c.eta);
        const Vec2 w = pose.pos() + rot(pose.th, u);
        const Vec2 d = w - c.base;
        double dist = norm(d);
        if (kink) {
          (*kink)[c.row0] = dist;  // smooth except at the base itself
          (*kink)[c.row0 + 1] = dist;
        }
        if (dist < 1e-12) dist = 1e-12;
        res[c.row0] = c.reach_min - dist;
        res[c.row0 + 1] = dist - c.reach_max;
        if (jac) {
          const Vec2 n{d.x / dist, d.y / dist};
          const Vec2 dwdth = drot(pose.th, u);
          const PoseJac g{n.x, n.y, dot(n, dwdth)};
          eval_detail::scatter(jac, p.n_vars, c.row0, c.pose_a, {-g.dx, -g.dy, -g.dth});
          eval_detail::scatter(jac, p.n_vars, c.row0 + 1, c.pose_a, g);
        }
        break;
      }

      case ConstraintKind::InsideTable: {
        const Pose pose = c.pose_a.resolve(x);
        if (c.shape_a.is_box()) {
          const double hw = c.shape_a.half_w, hl = c.shape_a.half_l;
          const Vec2 locals[4] = {{hw, hl}, {-hw, hl}, {-hw, -hl}, {hw, -hl}};
          for (int i = 0; i < 4; ++i) {
            const Vec2 corner = pose.pos() + rot(pose.th, locals[i]);
            const Vec2 dcdth = drot(pose.th, locals[i]);
            const int r = c.row0 + 4 * i;
            res[r] = c.rect.x0 - corner.x;
            res[r + 1] = corner.x - c.rect.x1;
            res[r + 2] = c.rect.y0 - corner.y;
            res[r + 3] = corner.y - c.rect.y1;
            if (jac) {
              eval_detail::scatter(jac, p.n_vars, r, c.pose_a, {-1, 0, -dcdth.x});
              eval_detail::scatter(jac, p.n_vars, r + 1, c.pose_a, {1, 0, dcdth.x});
              eval_detail::scatter(jac, p.n_vars, r + 2, c.pose_a, {0, -1, -dcdth.y});
              eval_detail::scatter(jac, p.n_vars, r + 3, c.pose_a, {0, 1, dcdth.y});
            }
          }
        } else {
          const double r0 = c.shape_a.radius;
          res[c.row0] = c.rect.x0 - (pose.x - r0);
          res[c.row0 + 1] = (pose.x + r0) - c.rect.x1;
          res[c.row0 + 2] = c.rect.y0 - (pose.y - r0);
          res[c.row0 + 3] = (pose.y + r0) - c.rect.y1;
          if (jac) {
            eval_detail::scatter(jac, p.n_vars, c.row0, c.pose_a, {-1, 0, 0});
            eval_detail::scatter(jac, p.n_vars, c.row0 + 1, c.pose_a, {1, 0, 0});
            eval_detail::scatter(jac, p.n_vars, c.row0 + 2, c.pose_a, {0, -1, 0});
            eval_detail::scatter(jac, p.n_vars, c.row0 + 3, c.pose_a, {0, 1, 0});
          }
        }
        break;
      }

      case ConstraintKind::InsideTarget: {
        const Pose pose = c.pose_a.resolve(x);
        res[c.row0] = (pose.x - c.base.x) - c.half_side;
        res[c.row0 + 1] = (c.base.x - pose.x) - c.half_side;
        res[c.row0 + 2] = (pose.y - c.base.y) - c.half_side;
        res[c.row0 + 3] = (c.base.y - pose.y) - c.half_side;
        if (jac) {
          eval_detail::scatter(jac, p.n_vars, c.row0, c.pose_a, {1, 0, 0});
          eval_detail::scatter(jac, p.n_vars, c.row0 + 1, c.pose_a, {-1, 0, 0});
          eval_detail::scatter(jac, p.n_vars, c.row0 + 2, c.pose_a, {0, 1, 0});
          eval_detail::scatter(jac, p.n_vars, c.row0 + 3, c.pose_a, {0, -1, 0});
        }
        break;
      }

      case ConstraintKind::PairCollision: {
        double km = inf;
        if (c.arm >= 0) {
          // wrist point vs obstacle footprint
          const Pose pa = c.pose_a.resolve(x);
          const Vec2 u = c.offset * face_normal(c.eta);
          const Vec2 w = pa.pos() + rot(pa.th, u);
          const Pose pb = c.pose_b.resolve(x);
          Vec2 dw;
          PoseJac gb;
          res[c.row0] = point_depth(w, pb, c.shape_b, jac ? &dw : nullptr,
                                    jac ? &gb : nullptr, kink ? &km : nullptr);
          if (jac) {
            const Vec2 dwdth = drot(pa.th, u);
            eval_detail::scatter(jac, p.n_vars, c.row0, c.pose_a,
                                 {dw.x, dw.y, dot(dw, dwdth)});
            eval_detail::scatter(jac, p.n_vars, c.row0, c.pose_b, gb);
          }
        } else {
          PoseJac ga, gb;
          res[c.row0] = penetration(c.pose_a.resolve(x), c.shape_a, c.pose_b.resolve(x),
                                    c.shape_b, jac ? &ga : nullptr, jac ? &gb : nullptr,
                                    kink ? &km : nullptr);
          if (jac) {
            eval_detail::scatter(jac, p.n_vars, c.row0, c.pose_a, ga);
            eval_detail::scatter(jac, p.n_vars, c.row0, c.pose_b, gb);
          }
        }
        if (kink) (*kink)[c.row0] = km;
        break;
      }
    }
  }
}

/// Wrist-travel cost: per arm, squared distances between consecutive wrist
/// points, chained from the arm base.
inline double eval_cost(const KeyframeProgram& p, const double* x,
                        std::vector<double>* grad = nullptr) {
  if (grad) grad->assign(static_cast<std::size_t>(p.n_vars), 0.0);
  double cost = 0.0;
  for (int a = 0; a < 2; ++a) {
    Vec2 prev = p.bases[a];
    const WristRef* prev_ref = nullptr;
    for (const WristRef& wr : p.chains[a]) {
      const Vec2 w = wr.point(x);
      const Vec2 d = w - prev;
      cost += dot(d, d);
      if (grad) {
        auto accumulate = [&](const WristRef& ref, double sign) {
          if (!ref.pose.is_var()) return;
          const Vec2 dwdth = ref.dpoint_dth(x);
          (*grad)[ref.pose.var] += sign * 2.0 * d.x;
          (*grad)[ref.pose.var + 1] += sign * 2.0 * d.y;
          (*grad)[ref.pose.var + 2] += sign * 2.0 * dot(d, dwdth);
        };
        accumulate(wr, 1.0);
        if (prev_ref) accumulate(*prev_ref, -1.0);
      }
      prev = w;
      prev_ref = &wr;
    }
  }
  return cost;
}

// ---------------------------------------------------------------------------
// Augmented-Lagrangian solve

namespace solve_detail {

inline double violation_of(const KeyframeProgram& p, const std::vector<double>& res,
                           int* worst_row = nullptr) {
  double v = 0.0;
  int wr = -1;
  for (int i = 0; i < p.n_rows; ++i) {
    const Constraint& c = p.constraints[static_cast<std::size_t>(p.row_constraint[i])];
    const double vi = c.cls == ConstraintClass::Inequality ? std::max(0.0, res[i]) : std::abs(res[i]);
    if (vi > v) {
      v = vi;
      wr = i;
    }
  }
  if (worst_row) *worst_row = wr;
  return v;
}

}  // namespace solve_detail

inline std::vector<Keyframe> resolve_keyframes(const KeyframeProgram& p, const double* x) {
  std::vector<Keyframe> out = p.kf_template;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].has_pose) continue;
    const int slot = p.kf_wrist_chain[i];
    const WristRef& wr = p.chains[out[i].arm][static_cast<std::size_t>(slot)];
    out[i].object_pose = wr.pose.resolve(x);
    out[i].wrist = wr.point(x);
  }
  return out;
}

inline SolveReport solve(const KeyframeProgram& p, std::uint64_t seed) {
  const OptimizerConfig& cfg = p.cfg;
  SolveReport rep;
  std::vector<double> res, jac, lam;

  // Variable-free screening: evaluate once; rows of var-free constraints are
  // valid at any x (use zeros).
  std::vector<double> x0(static_cast<std::size_t>(std::max(p.n_vars, 1)), 0.0);
  eval_constraints(p, x0.data(), res);
  {
    double v = 0.0;
    int worst_row = -1;
    for (const Constraint& c : p.constraints) {
      if (c.touches_vars()) continue;
      for (int r = c.row0; r < c.row0 + c.nrows; ++r) {
        const double vi =
            c.cls == ConstraintClass::Inequality ? std::max(0.0, res[r]) : std::abs(res[r]);
        if (vi > v) {
          v = vi;
          worst_row = r;
        }
      }
    }
    if (v > cfg.tol) {
      rep.max_violation = v;
      rep.worst = p.constraints[static_cast<std::size_t>(p.row_constraint[worst_row])].kind;
      return rep;
    }
  }
  if (p.n_vars == 0) {
    int worst_row = -1;
    rep.max_violation = solve_detail::violation_of(p, res, &worst_row);
    rep.feasible = rep.max_violation <= cfg.tol;
    if (!rep.feasible && worst_row >= 0)
      rep.worst = p.constraints[static_cast<std::size_t>(p.row_constraint[worst_row])].kind;
    rep.keyframes = resolve_keyframes(p, x0.data());
    return rep;
  }

  const int n = p.n_vars;
  std::vector<double> x(static_cast<std::size_t>(n)), g(static_cast<std::size_t>(n)),
      xt(static_cast<std::size_t>(n)), cost_grad, rt;
  double best_v = std::numeric_limits<double>::infinity();
  int best_row = -1;

  // Augmented-Lagrangian value at the residuals in `res`; accumulates the
  // penalty gradient into `g` via `jac` when requested.
  auto al_value = [&](const std::vector<double>& r, double mu, bool with_grad) {
    double val = 0.0;
    for (int i = 0; i < p.n_rows; ++i) {
      const Constraint& c = p.constraints[static_cast<std::size_t>(p.row_constraint[i])];
      double s = r[i] + lam[i] / mu;
      if (c.cls == ConstraintClass::Inequality && s <= 0.0) continue;
      val += 0.5 * mu * s * s;
      if (with_grad) {
        const double w = mu * s;
        const double* J = jac.data() + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < n; ++k) g[k] += w * J[k];
      }
    }
    return val;
  };

  for (int start = 0; start < cfg.n_starts; ++start) {
    rep.restarts_used = start + 1;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(start)));
    for (std::size_t t = 0; t < p.var_init.size(); ++t) {
      const Rect& r0 = p.var_init[t];
      x[3 * t] = rng.uniform(r0.x0, r0.x1);
      x[3 * t + 1] = rng.uniform(r0.y0, r0.y1);
      x[3 * t + 2] = rng.uniform(-3.14159265358979323846, 3.14159265358979323846);
    }
    lam.assign(static_cast<std::size_t>(p.n_rows), 0.0);
    double mu = cfg.mu0;
    bool found = false;

    for (int outer = 0; outer < cfg.al_iters && !found; ++outer) {
      double alpha = 0.1;
      eval_constraints(p, x.data(), res, &jac);
      double fx = eval_cost(p, x.data(), &cost_grad) + al_value(res, mu, false);
      if (solve_detail::violation_of(p, res) <= cfg.tol) { found = true; break; }

      for (int it = 0; it < cfg.inner_iters; ++it) {
        g = cost_grad;
        al_value(res, mu, true);  // adds penalty gradient to g
        double gnorm2 = 0.0;
        for (double gi : g) gnorm2 += gi * gi;
        if (gnorm2 < 1e-18) break;

        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
          for (int k = 0; k < n; ++k) xt[k] = x[k] - alpha * g[k];
          eval_constraints(p, xt.data(), rt);
          const double ft = eval_cost(p, xt.data(), nullptr) + al_value(rt, mu, false);
          if (ft <= fx - 1e-4 * alpha * gnorm2) {
            x.swap(xt);
            res.swap(rt);
            fx = ft;
            alpha = std::min(alpha * 1.2, 10.0);
            accepted = true;
            break;
          }
          alpha *= 0.5;
          if (alpha < 1e-14) break;
        }
        ++rep.iterations;
        if (!accepted) break;
        // Residuals at the accepted x are already in `res`; a feasible point
        // ends the whole solve regardless of cost.
        if (solve_detail::violation_of(p, res) <= cfg.tol) {
          found = true;
          break;
        }
        eval_constraints(p, x.data(), res, &jac);
        eval_cost(p, x.data(), &cost_grad);
      }

      if (found) break;
      for (int i = 0; i < p.n_rows; ++i) {
        const Constraint& c = p.constraints[static_cast<std::size_t>(p.row_constraint[i])];
        if (c.cls == ConstraintClass::Inequality)
          lam[i] = std::max(0.0, lam[i] + mu * res[i]);
        else
          lam[i] += mu * res[i];
      }
      mu *= cfg.penalty_growth;
    }

    eval_constraints(p, x.data(), res);
    int worst_row = -1;
    const double v = solve_detail::violation_of(p, res, &worst_row);
    if (v < best_v) {
      best_v = v;
      best_row = worst_row;
      rep.vars = x;
    }
    if (found || v <= cfg.tol) {
      rep.feasible = true;
      rep.max_violation = v;
      rep.vars = x;
      rep.keyframes = resolve_keyframes(p, x.data());
      return rep;
    }
  }

  rep.max_violation = best_v;
  if (best_row >= 0)
    rep.worst = p.constraints[static_cast<std::size_t>(p.row_constraint[best_row])].kind;
  rep.keyframes = resolve_keyframes(p, rep.vars.data());
  return rep;
}

inline SolveReport feasibility(const std::vector<Action>& seq, const Scene& scene,
                               std::uint64_t seed, const OptimizerConfig& cfg = {}) {
  const KeyframeProgram p = build_program(seq, scene, cfg);
  return solve(p, seed);
}

}  // namespace dvt
