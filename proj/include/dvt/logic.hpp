#pragma once

// Symbolic layer: two-arm pick/place/handover domain. States track which arm
// holds which object and where unheld objects rest. Geometry never enters
// here — an out-of-reach object is still symbolically graspable — so the set
// of goal-reaching action sequences depends only on the object count.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvt {

enum class Arm : int { Left = 0, Right = 1 };
enum class Op : int { Grasp = 0, Place = 1 };
enum class Surface : int { Table = 0, Target = 1 };
enum class Rest : int { Table = 0, Target = 1, InHand = 2 };

inline Arm other_arm(Arm a) { return a == Arm::Left ? Arm::Right : Arm::Left; }
inline int arm_index(Arm a) { return static_cast<int>(a); }

constexpr int kNumGraspFaces = 4;
constexpr int kSymbolAlphabetSize = 10;  // 2 arms x 4 grasp faces + 2 arm places

struct Action {
  Op op = Op::Grasp;
  Arm arm = Arm::Left;
  int eta = 0;     // grasp face 0..3; unused for Place
  int object = 0;  // grasped object, or the held object being placed
  Surface surface = Surface::Table;  // Place only

  static Action grasp(Arm arm, int eta, int object) {
    if (eta < 0 || eta >= kNumGraspFaces) throw std::invalid_argument("eta out of range");
    return {Op::Grasp, arm, eta, object, Surface::Table};
  }
  static Action place(Arm arm, int object, Surface surface) {
    return {Op::Place, arm, 0, object, surface};
  }

  /// Index into the 10-symbol alphabet (object identity is carried by the
  /// image channels, not the symbol).
  int symbol_index() const {
    return op == Op::Grasp ? arm_index(arm) * kNumGraspFaces + eta : 8 + arm_index(arm);
  }

  bool operator==(const Action&) const = default;
};

struct SymbolicState {
  int holds[2] = {-1, -1};  // object id held by Left/Right, -1 = empty hand
  std::vector<Rest> rests;  // per object id

  int held_by(Arm a) const { return holds[arm_index(a)]; }
  int n_objects() const { return static_cast<int>(rests.size()); }

  bool operator==(const SymbolicState& o) const {
    return holds[0] == o.holds[0] && holds[1] == o.holds[1] && rests == o.rests;
  }
};

/// All objects start unheld; `rests` says which surface each sits on.
inline SymbolicState initial_symbolic_state(std::vector<Rest> rests) {
  for (Rest r : rests)
    if (r == Rest::InHand) throw std::invalid_argument("initial object cannot be in hand");
  SymbolicState s;
  s.rests = std::move(rests);
  return s;
}

inline bool is_goal(const SymbolicState& s, int goal_object) {
  if (goal_object < 0 || goal_object >= s.n_objects())
    throw std::out_of_range("unknown goal object id");
  return s.rests[goal_object] == Rest::Target;
}

/// Grounded actions applicable in s, in canonical order:
/// (op: Grasp<Place, arm: L<R, eta asc, object asc, surface: Table<Target).
/// A free arm may grasp any object, including one held by the other arm
/// (handover). A holding arm may place on either surface.
inline std::vector<Action> applicable_actions(const SymbolicState& s) {
  std::vector<Action> out;
  const int n = s.n_objects();
  for (int a = 0; a < 2; ++a) {
    if (s.holds[a] != -1) continue;
    for (int eta = 0; eta < kNumGraspFaces; ++eta)
      for (int obj = 0; obj < n; ++obj)
        out.push_back(Action::grasp(static_cast<Arm>(a), eta, obj));
  }
  for (int a = 0; a < 2; ++a) {
    if (s.holds[a] == -1) continue;
    out.push_back(Action::place(static_cast<Arm>(a), s.holds[a], Surface::Table));
    out.push_back(Action::place(static_cast<Arm>(a), s.holds[a], Surface::Target));
  }
  return out;
}

inline bool is_applicable(const SymbolicState& s, const Action& a) {
  if (a.object < 0 || a.object >= s.n_objects()) return false;
  const int ai = arm_index(a.arm);
  if (a.op == Op::Grasp)
    return s.holds[ai] == -1;  // may take from table, target, or the other hand
  return s.holds[ai] == a.object;
}

inline SymbolicState successor(const SymbolicState& s, const Action& a) {
  if (!is_applicable(s, a)) throw std::invalid_argument("action not applicable");
  SymbolicState t = s;
  const int ai = arm_index(a.arm);
  if (a.op == Op::Grasp) {
    const int oi = arm_index(other_arm(a.arm));
    if (t.holds[oi] == a.object) t.holds[oi] = -1;  // handover transfers possession
    t.holds[ai] = a.object;
    t.rests[a.object] = Rest::InHand;
  } else {
    t.holds[ai] = -1;
    t.rests[a.object] = a.surface == Surface::Table ? Rest::Table : Rest::Target;
  }
  return t;
}

/// Depth-first walk of the symbolic tree up to depth `k_max`, children in
/// canonical order. Goal states are leaves: they are reported once and never
/// expanded, so no reported sequence has a goal-reaching proper prefix.
/// `visit(seq, state)` is called for each goal leaf.
inline void for_each_goal_sequence(
    const SymbolicState& initial, int goal_object, int k_max,
    const std::function<void(const std::vector<Action>&, const SymbolicState&)>& visit) {
  if (k_max < 1) return;
  if (is_goal(initial, goal_object)) return;  // degenerate: nothing to do
  std::vector<Action> seq;
  // Explicit recursion keeps the state copies shallow (vector<Rest> per level).
  std::function<void(const SymbolicState&)> go = [&](const SymbolicState& s) {
    for (const Action& a : applicable_actions(s)) {
      SymbolicState t = successor(s, a);
      seq.push_back(a);
      if (is_goal(t, goal_object))
        visit(seq, t);
      else if (static_cast<int>(seq.size()) < k_max)
        go(t);
      seq.pop_back();
    }
  };
  go(initial);
}

/// Visit goal sequences of exactly `k_exact` actions in canonical
/// (lexicographic) order. The visitor returns false to abort the walk;
/// the function returns false iff aborted. Used by the budgeted
/// breadth-first consumers, which call this once per length.
inline bool for_each_goal_sequence_of_length(
    const SymbolicState& initial, int goal_object, int k_exact,
    const std::function<bool(const std::vector<Action>&)>& visit) {
  if (k_exact < 1 || is_goal(initial, goal_object)) return true;
  std::vector<Action> seq;
  std::function<bool(const SymbolicState&)> go = [&](const SymbolicState& s) -> bool {
    for (const Action& a : applicable_actions(s)) {
      SymbolicState t = successor(s, a);
      const bool goal = is_goal(t, goal_object);
      seq.push_back(a);
      bool ok = true;
      if (static_cast<int>(seq.size()) == k_exact) {
        if (goal) ok = visit(seq);
      } else if (!goal) {  // goal states are leaves: never extended
        ok = go(t);
      }
      seq.pop_back();
      if (!ok) return false;
    }
    return true;
  };
  return go(initial);
}

inline std::vector<std::vector<Action>> enumerate_goal_sequences(const SymbolicState& initial,
                                                                 int goal_object, int k_max) {
  std::vector<std::vector<Action>> out;
  for_each_goal_sequence(initial, goal_object, k_max,
                         [&](const std::vector<Action>& seq, const SymbolicState&) {
                           out.push_back(seq);
                         });
  return out;
}

/// Count of goal-reaching sequences per exact length (index = length, entry 0
/// and 1 always 0). Dynamic program over symbolic states instead of explicit
/// tree expansion: a state does not record the grasp face, so each symbolic
/// grasp transition carries multiplicity 4. Handles 5 objects / depth 6 in
/// microseconds where explicit enumeration needs ~10^6 nodes.
inline std::vector<std::uint64_t> count_goal_sequences(const SymbolicState& initial,
                                                       int goal_object, int k_max) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(std::max(k_max, 0)) + 1, 0);
  if (k_max < 1 || is_goal(initial, goal_object)) return counts;

  const int n = initial.n_objects();
  if (n > 16) throw std::invalid_argument("count_goal_sequences: dense encoding caps at 16 objects");
  // Encoding: (holds_L+1) + (n+1)*(holds_R+1) + (n+1)^2 * on_target_bitmask.
  // Held objects' target bits are forced to 0 so equal states share a code.
  const int hb = n + 1;
  const std::size_t n_codes = static_cast<std::size_t>(hb) * hb << n;
  auto encode = [&](const SymbolicState& s) {
    unsigned mask = 0;
    for (int i = 0; i < n; ++i)
      if (s.rests[i] == Rest::Target) mask |= 1u << i;
    return static_cast<std::size_t>(s.holds[0] + 1) + static_cast<std::size_t>(hb) * (s.holds[1] + 1) +
           (static_cast<std::size_t>(hb) * hb) * mask;
  };

  std::vector<std::uint64_t> f(n_codes, 0), g(n_codes, 0);
  std::vector<SymbolicState> decode(n_codes);  // filled lazily for reached codes
  f[encode(initial)] = 1;
  decode[encode(initial)] = initial;

  for (int k = 1; k <= k_max; ++k) {
    std::fill(g.begin(), g.end(), 0);
    for (std::size_t c = 0; c < n_codes; ++c) {
      if (f[c] == 0) continue;
      const SymbolicState& s = decode[c];
      for (const Action& a : applicable_actions(s)) {
        if (a.op == Op::Grasp && a.eta != 0) continue;  // fold faces into multiplicity
        const std::uint64_t mult = a.op == Op::Grasp ? kNumGraspFaces : 1;
        SymbolicState t = successor(s, a);
        if (is_goal(t, goal_object)) {
          counts[k] += f[c] * mult;
        } else {
          const std::size_t tc = encode(t);
          if (g[tc] == 0) decode[tc] = std::move(t);
          g[tc] += f[c] * mult;
        }
      }
    }
    f.swap(g);
  }
  return counts;
}

inline const char* arm_name(Arm a) { return a == Arm::Left ? "L" : "R"; }
inline const char* surface_name(Surface s) { return s == Surface::Table ? "table" : "target"; }

/// Compact human-readable form, e.g. "G(L,2,obj1)" / "P(R,obj0,target)".
inline std::string to_string(const Action& a) {
  if (a.op == Op::Grasp)
    return std::string("G(") + arm_name(a.arm) + "," + std::to_string(a.eta) + ",obj" +
           std::to_string(a.object) + ")";
  return std::string("P(") + arm_name(a.arm) + ",obj" + std::to_string(a.object) + "," +
         surface_name(a.surface) + ")";
}

inline std::string to_string(const std::vector<Action>& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += " ";
    out += to_string(seq[i]);
  }
  return out;
}

}  // namespace dvt
