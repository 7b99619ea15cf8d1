// Training-data generation and label transforms.
//
// generate_data walks each sampled scene's goal-sequence tree shortest-first
// (canonical order within a length) and records the solver verdict for every
// leaf it evaluates, stopping once enough solutions are found or the leaf
// budget runs out. Scenes where the solver never finds a feasible sequence
// are flagged and their records dropped -- a scene we cannot solve at all
// teaches the predictor nothing and may simply be unsolvable.
//
// transform_targets turns sequence-level verdicts into per-step labels: every
// step of a feasible sequence is positive, and a step of an infeasible
// sequence is positive exactly when its prefix so far coincides with the
// prefix of some feasible sequence for the same scene and goal. The
// prefix-feasibility variant instead labels step j by solving the keyframe
// program of the first j actions (memoized across records; prefixes of
// feasible sequences are positive without solving, since dropping trailing
// actions only removes constraints).
#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dvt/logic.hpp"
#include "dvt/optimizer.hpp"
#include "dvt/parallel.hpp"
#include "dvt/rng.hpp"
#include "dvt/scene.hpp"
#include "dvt/serialize.hpp"

namespace dvt {

struct DataGenConfig {
  int n_objects = 2;
  int k_max = 6;
  int max_solutions = 4;  // stop a scene after this many feasible sequences
  int max_leaves = 1000;  // leaf-evaluation budget per scene
  SamplerConfig sampler;
  OptimizerConfig optimizer;

  std::uint64_t hash() const {
    Fnv1a h;
    h.add_i32(n_objects);
    h.add_i32(k_max);
    h.add_i32(max_solutions);
    h.add_i32(max_leaves);
    // The sampler and optimizer knobs that change labels; geometry ranges are
    // doubles, hash their bit patterns.
    auto add_d = [&h](double v) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      h.add_u64(bits);
    };
    add_d(sampler.box_half_min);
    add_d(sampler.box_half_max);
    add_d(sampler.cyl_radius_min);
    add_d(sampler.cyl_radius_max);
    add_d(sampler.cylinder_fraction);
    add_d(sampler.occupier_prob);
    add_d(sampler.target_side);
    add_d(optimizer.g_max);
    add_d(optimizer.d_wrist);
    add_d(optimizer.d_min);
    add_d(optimizer.tol);
    h.add_i32(optimizer.n_starts);
    h.add_i32(optimizer.inner_iters);
    h.add_i32(optimizer.al_iters);
    return h.value();
  }
};

/// Per-sequence solver seed. Derived from the scene's own seed so that any
/// consumer (data generation, search, benchmarks) replaying the same sequence
/// on the same scene reproduces the identical solve.
inline std::uint64_t solve_seed(const Scene& scene, const std::vector<Action>& seq,
                                std::size_t prefix_len) {
  return derive_seed(scene.seed, sequence_hash(seq, prefix_len));
}
inline std::uint64_t solve_seed(const Scene& scene, const std::vector<Action>& seq) {
  return solve_seed(scene, seq, seq.size());
}

/// Evaluate one scene: walk goal sequences shortest-first and solve each one
/// until max_solutions feasible are found or max_leaves leaves are evaluated.
/// Returns the records in evaluation order; n_feasible counts the positives.
inline std::vector<DataRecord> evaluate_scene(const Scene& scene, const Goal& goal,
                                              int scene_id, const DataGenConfig& cfg,
                                              int* n_feasible_out = nullptr) {
  std::vector<DataRecord> records;
  int n_feasible = 0;
  const SymbolicState init = initial_state(scene);
  for (int len = 2; len <= cfg.k_max; ++len) {
    const bool completed = for_each_goal_sequence_of_length(
        init, goal.object, len, [&](const std::vector<Action>& seq) {
          const SolveReport rep = feasibility(seq, scene, solve_seed(scene, seq), cfg.optimizer);
          DataRecord r;
          r.scene_id = scene_id;
          r.scene = scene;
          r.goal = goal;
          r.sequence = seq;
          r.feasible = rep.feasible;
          r.max_violation = rep.max_violation;
          r.iterations = rep.iterations;
          records.push_back(std::move(r));
          if (rep.feasible) ++n_feasible;
          return n_feasible < cfg.max_solutions &&
                 static_cast<int>(records.size()) < cfg.max_leaves;
        });
    if (!completed) break;
  }
  if (n_feasible_out) *n_feasible_out = n_feasible;
  return records;
}

struct DataGenResult {
  std::vector<DataRecord> records;     // kept scenes only, in scene order
  std::vector<int> kept_scene_ids;
  int scenes_requested = 0;
  int scenes_sampling_failed = 0;  // sampler exhausted its rejection budget
  int scenes_no_solution = 0;      // flagged: no feasible sequence within budget
};

/// Sample `n_scenes` scenes (seeds derived from `seed`) and evaluate each.
/// The goal is always to bring object 0 onto the target region. Scenes whose
/// sampler rejects or whose tree yields no feasible sequence are excluded.
/// Scenes are independent, so `jobs > 1` evaluates them in a thread pool; the
/// slot merge keeps the output byte-identical to a single-threaded run.
inline DataGenResult generate_data(const DataGenConfig& cfg, std::uint64_t seed, int n_scenes,
                                   int jobs = 1,
                                   const std::function<void(int, int)>& progress = {}) {
  struct SceneOut {
    bool sampled = false;
    int n_feasible = 0;
    std::vector<DataRecord> recs;
  };
  std::vector<SceneOut> slots = parallel_slots<SceneOut>(n_scenes, jobs, [&](int i) {
    SceneOut so;
    Scene scene;
    try {
      scene = sample_scene(cfg.sampler, derive_seed(seed, static_cast<std::uint64_t>(i)),
                           cfg.n_objects);
    } catch (const std::runtime_error&) {
      return so;
    }
    so.sampled = true;
    so.recs = evaluate_scene(scene, Goal{0}, i, cfg, &so.n_feasible);
    if (jobs <= 1 && progress) progress(i + 1, n_scenes);
    return so;
  });

  DataGenResult out;
  out.scenes_requested = n_scenes;
  for (int i = 0; i < n_scenes; ++i) {
    SceneOut& so = slots[static_cast<std::size_t>(i)];
    if (!so.sampled) {
      ++out.scenes_sampling_failed;
    } else if (so.n_feasible == 0) {
      ++out.scenes_no_solution;
    } else {
      out.kept_scene_ids.push_back(i);
      for (DataRecord& r : so.recs) out.records.push_back(std::move(r));
    }
    if (jobs > 1 && progress) progress(i + 1, n_scenes);
  }
  return out;
}

// ---------------------------------------------------------------------------
// label transforms

namespace detail {
/// Group key: records belong to the same supervision group iff they share a
/// scene and a goal. scene_id identifies the scene within one dataset.
inline std::uint64_t group_key(int scene_id, int goal_object) {
  Fnv1a h;
  h.add_i32(scene_id);
  h.add_i32(goal_object);
  return h.value();
}
}  // namespace detail

/// Sequence-level targets: a feasible sequence is positive at every step; an
/// infeasible one is positive at step j iff its first j actions equal the
/// first j actions of some feasible sequence in the same group.
inline std::vector<TrainRecord> transform_targets(const std::vector<DataRecord>& records) {
  // All prefix hashes of feasible sequences, per group.
  std::unordered_map<std::uint64_t, std::unordered_set<std::uint64_t>> feasible_prefixes;
  for (const DataRecord& r : records) {
    if (!r.feasible) continue;
    auto& set = feasible_prefixes[detail::group_key(r.scene_id, r.goal.object)];
    for (std::size_t j = 1; j <= r.sequence.size(); ++j) set.insert(sequence_hash(r.sequence, j));
  }
  std::vector<TrainRecord> out;
  out.reserve(records.size());
  for (const DataRecord& r : records) {
    TrainRecord t;
    t.scene_id = r.scene_id;
    t.scene = r.scene;
    t.goal = r.goal;
    t.sequence = r.sequence;
    t.feasible = r.feasible;
    t.labels.assign(r.sequence.size(), 0);
    if (r.feasible) {
      t.labels.assign(r.sequence.size(), 1);
    } else {
      auto it = feasible_prefixes.find(detail::group_key(r.scene_id, r.goal.object));
      if (it != feasible_prefixes.end()) {
        for (std::size_t j = 1; j <= r.sequence.size(); ++j)
          if (it->second.count(sequence_hash(r.sequence, j))) t.labels[j - 1] = 1;
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// Prefix-feasibility targets: step j is positive iff the keyframe program of
/// the first j actions is feasible. Solves are memoized per (scene, prefix);
/// every prefix of a feasible sequence is positive without solving.
inline std::vector<TrainRecord> label_prefix_feasibility(const std::vector<DataRecord>& records,
                                                         const OptimizerConfig& cfg = {}) {
  // (scene_id ^ prefix hash) -> feasibility verdict.
  std::unordered_map<std::uint64_t, bool> memo;
  auto key = [](int scene_id, std::uint64_t prefix_hash) {
    Fnv1a h;
    h.add_i32(scene_id);
    h.add_u64(prefix_hash);
    return h.value();
  };
  for (const DataRecord& r : records) {
    if (!r.feasible) continue;
    for (std::size_t j = 1; j <= r.sequence.size(); ++j)
      memo[key(r.scene_id, sequence_hash(r.sequence, j))] = true;
  }
  std::vector<TrainRecord> out;
  out.reserve(records.size());
  for (const DataRecord& r : records) {
    TrainRecord t;
    t.scene_id = r.scene_id;
    t.scene = r.scene;
    t.goal = r.goal;
    t.sequence = r.sequence;
    t.feasible = r.feasible;
    t.labels.assign(r.sequence.size(), 0);
    for (std::size_t j = 1; j <= r.sequence.size(); ++j) {
      const std::uint64_t k = key(r.scene_id, sequence_hash(r.sequence, j));
      auto it = memo.find(k);
      bool f;
      if (it != memo.end()) {
        f = it->second;
      } else {
        std::vector<Action> prefix(r.sequence.begin(),
                                   r.sequence.begin() + static_cast<std::ptrdiff_t>(j));
        f = feasibility(prefix, r.scene, solve_seed(r.scene, r.sequence, j), cfg).feasible;
        memo.emplace(k, f);
      }
      t.labels[j - 1] = f ? 1 : 0;
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// batching

/// Deterministic batches of record indices. Each batch has exactly
/// `batch_size` entries of which at least `min_feasible` come from
/// feasible-origin records (oversampled with replacement when the shuffled
/// slice falls short). Batches partition a shuffled permutation when no
/// oversampling is needed; a dataset smaller than one batch yields a single
/// batch padded by redraws.
inline std::vector<std::vector<int>> make_batches(const std::vector<TrainRecord>& set,
                                                  int batch_size, int min_feasible,
                                                  std::uint64_t seed) {
  if (batch_size <= 0 || min_feasible < 0 || min_feasible > batch_size)
    throw std::invalid_argument("make_batches: bad batch shape");
  if (set.empty()) throw std::invalid_argument("make_batches: empty training set");
  const int n = static_cast<int>(set.size());
  std::vector<int> feas;
  for (int i = 0; i < n; ++i)
    if (set[static_cast<std::size_t>(i)].feasible) feas.push_back(i);
  if (static_cast<int>(feas.size()) < 1 && min_feasible > 0)
    throw std::invalid_argument("make_batches: no feasible-origin records to oversample");

  Rng rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(perm);

  const int n_batches = std::max(1, n / batch_size);
  std::vector<std::vector<int>> batches;
  batches.reserve(static_cast<std::size_t>(n_batches));
  for (int b = 0; b < n_batches; ++b) {
    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int s = b * batch_size; s < (b + 1) * batch_size; ++s)
      batch.push_back(perm[static_cast<std::size_t>(s % n)]);
    int have = 0;
    for (int i : batch)
      if (set[static_cast<std::size_t>(i)].feasible) ++have;
    if (have < min_feasible) {
      // Replace randomly chosen infeasible slots with feasible redraws.
      std::vector<int> slots;
      for (int s = 0; s < batch_size; ++s)
        if (!set[static_cast<std::size_t>(batch[static_cast<std::size_t>(s)])].feasible)
          slots.push_back(s);
      rng.shuffle(slots);
      for (int s = 0; s < min_feasible - have; ++s)
        batch[static_cast<std::size_t>(slots[static_cast<std::size_t>(s)])] =
            feas[rng.bounded(static_cast<std::uint32_t>(feas.size()))];
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace dvt
