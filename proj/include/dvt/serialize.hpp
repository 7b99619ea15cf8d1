// JSON (de)serialization for scenes, actions and dataset records.
//
// The on-disk schema is intentionally small and flat; every struct maps to a
// JSON object with its member names as keys, and every reader uses .at() so
// that missing or mistyped keys raise instead of yielding defaults. Dataset
// files are JSON lines: one header object followed by one record per line.
// nlohmann::json keeps object keys ordered, so dumping the same value twice
// produces identical bytes -- the determinism tests rely on that.
#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvt/logic.hpp"
#include "dvt/scene.hpp"

namespace dvt {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// geometry primitives

inline void to_json(json& j, const Vec2& v) { j = json::array({v.x, v.y}); }
inline void from_json(const json& j, Vec2& v) {
  v.x = j.at(0).get<double>();
  v.y = j.at(1).get<double>();
}

inline void to_json(json& j, const Pose& p) { j = json::array({p.x, p.y, p.th}); }
inline void from_json(const json& j, Pose& p) {
  p.x = j.at(0).get<double>();
  p.y = j.at(1).get<double>();
  p.th = j.at(2).get<double>();
}

inline void to_json(json& j, const Rect& r) {
  j = json{{"x0", r.x0}, {"x1", r.x1}, {"y0", r.y0}, {"y1", r.y1}};
}
inline void from_json(const json& j, Rect& r) {
  r.x0 = j.at("x0").get<double>();
  r.x1 = j.at("x1").get<double>();
  r.y0 = j.at("y0").get<double>();
  r.y1 = j.at("y1").get<double>();
}

inline void to_json(json& j, const ObjectShape& s) {
  if (s.is_box())
    j = json{{"kind", "box"}, {"half_w", s.half_w}, {"half_l", s.half_l}};
  else
    j = json{{"kind", "cylinder"}, {"radius", s.radius}};
}
inline void from_json(const json& j, ObjectShape& s) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "box")
    s = ObjectShape::box(j.at("half_w").get<double>(), j.at("half_l").get<double>());
  else if (kind == "cylinder")
    s = ObjectShape::cylinder(j.at("radius").get<double>());
  else
    throw std::runtime_error("unknown shape kind: " + kind);
}

// ---------------------------------------------------------------------------
// scene

inline void to_json(json& j, const ArmModel& a) {
  j = json{{"base", a.base}, {"reach_min", a.reach_min}, {"reach_max", a.reach_max}};
}
inline void from_json(const json& j, ArmModel& a) {
  a.base = j.at("base").get<Vec2>();
  a.reach_min = j.at("reach_min").get<double>();
  a.reach_max = j.at("reach_max").get<double>();
}

inline void to_json(json& j, const TargetRegion& t) {
  j = json{{"center", t.center}, {"side", t.side}};
}
inline void from_json(const json& j, TargetRegion& t) {
  t.center = j.at("center").get<Vec2>();
  t.side = j.at("side").get<double>();
}

inline void to_json(json& j, const SceneObject& o) {
  j = json{{"id", o.id},         {"shape", o.shape},         {"pose", o.pose},
           {"height", o.height}, {"on_target", o.on_target}};
}
inline void from_json(const json& j, SceneObject& o) {
  o.id = j.at("id").get<int>();
  o.shape = j.at("shape").get<ObjectShape>();
  o.pose = j.at("pose").get<Pose>();
  o.height = j.at("height").get<double>();
  o.on_target = j.at("on_target").get<bool>();
}

inline void to_json(json& j, const Scene& s) {
  j = json{{"table", s.table},   {"arms", json::array({s.arms[0], s.arms[1]})},
           {"objects", s.objects}, {"target", s.target},
           {"seed", s.seed}};
}
inline void from_json(const json& j, Scene& s) {
  s.table = j.at("table").get<Rect>();
  const json& arms = j.at("arms");
  if (arms.size() != 2) throw std::runtime_error("scene needs exactly two arms");
  s.arms[0] = arms.at(0).get<ArmModel>();
  s.arms[1] = arms.at(1).get<ArmModel>();
  s.objects = j.at("objects").get<std::vector<SceneObject>>();
  s.target = j.at("target").get<TargetRegion>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(json& j, const Goal& g) { j = json{{"object", g.object}}; }
inline void from_json(const json& j, Goal& g) { g.object = j.at("object").get<int>(); }

// ---------------------------------------------------------------------------
// actions

inline void to_json(json& j, const Action& a) {
  j = json{{"op", a.op == Op::Grasp ? "grasp" : "place"},
           {"arm", a.arm == Arm::Left ? "L" : "R"},
           {"object", a.object}};
  if (a.op == Op::Grasp)
    j["eta"] = a.eta;
  else
    j["surface"] = a.surface == Surface::Table ? "table" : "target";
}
inline void from_json(const json& j, Action& a) {
  const std::string op = j.at("op").get<std::string>();
  const std::string arm_s = j.at("arm").get<std::string>();
  if (arm_s != "L" && arm_s != "R") throw std::runtime_error("bad arm: " + arm_s);
  const Arm arm = arm_s == "L" ? Arm::Left : Arm::Right;
  const int object = j.at("object").get<int>();
  if (op == "grasp") {
    a = Action::grasp(arm, j.at("eta").get<int>(), object);
  } else if (op == "place") {
    const std::string srf = j.at("surface").get<std::string>();
    if (srf != "table" && srf != "target") throw std::runtime_error("bad surface: " + srf);
    a = Action::place(arm, object, srf == "table" ? Surface::Table : Surface::Target);
  } else {
    throw std::runtime_error("unknown op: " + op);
  }
}

// ---------------------------------------------------------------------------
// dataset records

/// One evaluated leaf from data generation: the full problem instance plus
/// the solver verdict for its goal sequence.
struct DataRecord {
  int scene_id = 0;
  Scene scene;
  Goal goal;
  std::vector<Action> sequence;
  bool feasible = false;
  double max_violation = 0.0;
  int iterations = 0;
};

/// A DataRecord with per-step supervision targets attached (either the
/// sequence-level transform or prefix feasibility, depending on the head
/// being trained). labels.size() == sequence.size().
struct TrainRecord {
  int scene_id = 0;
  Scene scene;
  Goal goal;
  std::vector<Action> sequence;
  bool feasible = false;
  std::vector<int> labels;
};

inline void to_json(json& j, const DataRecord& r) {
  j = json{{"scene_id", r.scene_id}, {"scene", r.scene},
           {"goal", r.goal},         {"sequence", r.sequence},
           {"feasible", r.feasible}, {"max_violation", r.max_violation},
           {"iterations", r.iterations}};
}
inline void from_json(const json& j, DataRecord& r) {
  r.scene_id = j.at("scene_id").get<int>();
  r.scene = j.at("scene").get<Scene>();
  r.goal = j.at("goal").get<Goal>();
  r.sequence = j.at("sequence").get<std::vector<Action>>();
  r.feasible = j.at("feasible").get<bool>();
  r.max_violation = j.at("max_violation").get<double>();
  r.iterations = j.at("iterations").get<int>();
}

inline void to_json(json& j, const TrainRecord& r) {
  j = json{{"scene_id", r.scene_id}, {"scene", r.scene},   {"goal", r.goal},
           {"sequence", r.sequence}, {"feasible", r.feasible}, {"labels", r.labels}};
}
inline void from_json(const json& j, TrainRecord& r) {
  r.scene_id = j.at("scene_id").get<int>();
  r.scene = j.at("scene").get<Scene>();
  r.goal = j.at("goal").get<Goal>();
  r.sequence = j.at("sequence").get<std::vector<Action>>();
  r.feasible = j.at("feasible").get<bool>();
  r.labels = j.at("labels").get<std::vector<int>>();
  if (r.labels.size() != r.sequence.size())
    throw std::runtime_error("label count does not match sequence length");
}

// ---------------------------------------------------------------------------
// JSON-lines files

/// Write a JSONL file: a header object on line one, then one record per line.
/// `kind` tags what the lines contain ("data" or "train") so readers can
/// fail early on the wrong file.
template <typename Record>
void write_jsonl(const std::string& path, const std::string& kind,
                 std::uint64_t config_hash, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  json header{{"schema", 1}, {"kind", kind}, {"config_hash", config_hash}};
  out << header.dump() << '\n';
  for (const Record& r : records) out << json(r).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

template <typename Record>
std::vector<Record> read_jsonl(const std::string& path, const std::string& kind,
                               std::uint64_t* config_hash = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  const json header = json::parse(line);
  if (header.at("schema").get<int>() != 1)
    throw std::runtime_error("unsupported dataset schema in " + path);
  if (header.at("kind").get<std::string>() != kind)
    throw std::runtime_error("expected a '" + kind + "' file: " + path);
  if (config_hash) *config_hash = header.at("config_hash").get<std::uint64_t>();
  std::vector<Record> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(json::parse(line).get<Record>());
  }
  return records;
}

/// Stable hash of an action sequence; used to derive per-sequence solver
/// seeds and to key prefix-memoization tables.
inline std::uint64_t sequence_hash(const std::vector<Action>& seq, std::size_t prefix_len) {
  Fnv1a h;
  h.add_u64(prefix_len);
  for (std::size_t i = 0; i < prefix_len && i < seq.size(); ++i) {
    const Action& a = seq[i];
    h.add_i32(static_cast<int>(a.op));
    h.add_i32(static_cast<int>(a.arm));
    h.add_i32(a.op == Op::Grasp ? a.eta : -1);
    h.add_i32(a.object);
    h.add_i32(a.op == Op::Place ? static_cast<int>(a.surface) : -1);
  }
  return h.value();
}

inline std::uint64_t sequence_hash(const std::vector<Action>& seq) {
  return sequence_hash(seq, seq.size());
}

}  // namespace dvt
