// Neural-guided tree search over the goal-sequence tree, with a
// feasibility-threshold fallback that restores completeness, plus the
// exhaustive baseline and a classifier-pruned variant.
//
// The searcher grows the symbolic tree node by node, always expanding the
// highest-scored expandable node. Children are scored in one recurrence step
// from the parent's cached hidden state (never by re-running the whole
// sequence), goal-reaching children collect in a leaf pool, and only leaves
// whose score clears the threshold are handed to the NLP. When every leaf in
// the pool scores at or below the threshold the search is stalled: the
// threshold is discounted (or zeroed once no expandable node remains), which
// guarantees that any leaf the baseline would reach is eventually solved no
// matter how badly the network scores it.
#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dvt/data.hpp"
#include "dvt/logic.hpp"
#include "dvt/net.hpp"
#include "dvt/optimizer.hpp"
#include "dvt/scene.hpp"
#include "dvt/serialize.hpp"
#include "dvt/train.hpp"

namespace dvt {

struct SearchConfig {
  int k_max = 6;
  double f_thresh0 = 0.5;
  OptimizerConfig optimizer;
  bool collect_trace = false;  // record every scored leaf (tests, diagnostics)
  bool timing = true;          // false pins wall_ms to 0 for byte-stable output
};

struct PlanStats {
  int nlp_solves = 0;
  long net_queries = 0;
  int nodes_expanded = 0;
  int threshold_decays = 0;
  double wall_ms = 0.0;
  bool first_solve_feasible = false;  // verdict of the first NLP attempted
};

struct TracedLeaf {
  std::vector<Action> sequence;
  double p = 0.0;
};

struct PlanResult {
  bool found = false;
  std::vector<Action> sequence;
  SolveReport report;
  PlanStats stats;
  std::vector<TracedLeaf> trace;  // filled only when collect_trace
};

inline void to_json(json& j, const PlanStats& s) {
  j = json{{"nlp_solves", s.nlp_solves},
           {"net_queries", s.net_queries},
           {"nodes_expanded", s.nodes_expanded},
           {"threshold_decays", s.threshold_decays},
           {"wall_ms", s.wall_ms},
           {"first_solve_feasible", s.first_solve_feasible}};
}

inline void to_json(json& j, const SolveReport& r) {
  j = json{{"feasible", r.feasible},
           {"max_violation", r.max_violation},
           {"iterations", r.iterations},
           {"restarts_used", r.restarts_used},
           {"vars", r.vars}};
  if (r.worst) j["worst_constraint"] = kind_name(*r.worst);
}

inline void to_json(json& j, const PlanResult& r) {
  j = json{{"found", r.found}, {"sequence", r.sequence}, {"stats", r.stats}};
  if (r.found) j["report"] = r.report;
}

/// Threshold discount (Proposition 1 fallback): zero once every node of
/// depth < K_max has been expanded, else half.
inline double adjust_threshold(double f, bool all_leaves_enumerated) {
  return all_leaves_enumerated ? 0.0 : 0.5 * f;
}

namespace search_detail {

/// Per-run embedding cache: renders each (kind, object) image once and
/// encodes it once.
class EncBank {
 public:
  EncBank(const Scene& scene, const NetParams<float>& params, long& query_counter)
      : scene_(scene), params_(params), cache_(params.hp.img), queries_(query_counter) {}

  const std::vector<float>& action_enc(const Action& a) {
    const Image* img = cache_.action(scene_, /*scene_id=*/0, a);
    return enc(img);
  }
  const std::vector<float>& goal_enc(const Goal& g) {
    const Image* img = cache_.goal(scene_, /*scene_id=*/0, g);
    return enc(img);
  }

  /// Score one child from its parent's hidden state.
  float score(const Action& a, const std::vector<float>* goal,
              const HiddenState<float>& h_parent, HiddenState<float>& h_out) {
    ++queries_;
    return step_encoded(params_, a.symbol_index(), action_enc(a), goal, h_parent, h_out);
  }

 private:
  const std::vector<float>& enc(const Image* img) {
    auto it = encs_.find(img);
    if (it == encs_.end()) {
      EncCache<float> c;
      encode_image(params_, *img, c);
      it = encs_.emplace(img, std::move(c.enc)).first;
    }
    return it->second;
  }

  const Scene& scene_;
  const NetParams<float>& params_;
  RenderCache cache_;
  std::unordered_map<const Image*, std::vector<float>> encs_;
  long& queries_;
};

struct Node {
  SymbolicState state;
  std::vector<Action> seq;  // actions from the root
  int k = 0;
  float p = 1.0f;
  HiddenState<float> h;
};

// Max-heap key: higher p first, then shallower, then earlier insertion.
using HeapItem = std::tuple<float, int, int, int>;  // (p, -k, -idx, node)
struct HeapLess {
  bool operator()(const HeapItem& a, const HeapItem& b) const { return a < b; }
};
using Heap = std::priority_queue<HeapItem, std::vector<HeapItem>, HeapLess>;

inline void heap_push(Heap& h, const std::vector<Node>& nodes, int node_idx, int counter) {
  h.emplace(nodes[static_cast<std::size_t>(node_idx)].p,
            -nodes[static_cast<std::size_t>(node_idx)].k, -counter, node_idx);
}

}  // namespace search_detail

/// Guided search. `seed` drives the per-sequence NLP seeds (callers pass
/// scene.seed so verdicts replay across data generation, search and
/// benchmarks).
inline PlanResult plan(const Scene& scene, const Goal& goal, const NetParams<float>& params,
                       const SearchConfig& cfg, std::uint64_t seed) {
  using namespace search_detail;
  if (params.hp.rc) throw std::invalid_argument("plan: needs the full network, not the rc variant");
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult out;
  EncBank bank(scene, params, out.stats.net_queries);
  const std::vector<float>& genc = bank.goal_enc(goal);

  // Node slots are recycled the moment a node is expanded or solved, so
  // resident memory tracks the live frontier rather than the whole tree (an
  // exhausted five-object search generates tens of millions of children).
  std::vector<Node> nodes;
  std::vector<int> free_slots;
  const auto alloc_node = [&](Node&& n) {
    if (!free_slots.empty()) {
      const int s = free_slots.back();
      free_slots.pop_back();
      nodes[static_cast<std::size_t>(s)] = std::move(n);
      return s;
    }
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  };
  const auto release_node = [&](int s) {
    nodes[static_cast<std::size_t>(s)] = Node();
    free_slots.push_back(s);
  };
  nodes.push_back({initial_state(scene), {}, 0, 1.0f, HiddenState<float>(params.hp.hidden)});

  auto finish = [&](bool found) {
    out.found = found;
    if (cfg.timing)
      out.stats.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
    return out;
  };

  // Degenerate but legal: the goal already holds in the initial state.
  if (is_goal(nodes[0].state, goal.object)) {
    out.report = feasibility({}, scene, derive_seed(seed, sequence_hash({})), cfg.optimizer);
    out.sequence = {};
    return finish(true);
  }

  Heap expand, leaves;  // `expand` only ever holds nodes with depth < k_max
  int counter = 0;
  heap_push(expand, nodes, 0, counter++);
  double f_thresh = cfg.f_thresh0;

  auto solve_leaf = [&](const Node& leaf) {
    const SolveReport rep =
        feasibility(leaf.seq, scene, derive_seed(seed, sequence_hash(leaf.seq)), cfg.optimizer);
    if (out.stats.nlp_solves == 0) out.stats.first_solve_feasible = rep.feasible;
    ++out.stats.nlp_solves;
    if (rep.feasible) {
      out.sequence = leaf.seq;
      out.report = rep;
    }
    return rep.feasible;
  };

  while (!expand.empty() || !leaves.empty()) {
    if (!expand.empty()) {
      const int ni = std::get<3>(expand.top());
      expand.pop();
      const Node parent = std::move(nodes[static_cast<std::size_t>(ni)]);
      release_node(ni);  // children may land in this slot
      ++out.stats.nodes_expanded;
      for (const Action& a : applicable_actions(parent.state)) {
        SymbolicState st = successor(parent.state, a);
        const bool goal_child = is_goal(st, goal.object);
        const int ck = parent.k + 1;
        // Non-goal children at k_max are dead ends: never scored or stored.
        if (!goal_child && ck >= cfg.k_max) continue;
        Node child;
        child.state = std::move(st);
        child.seq = parent.seq;
        child.seq.push_back(a);
        child.k = ck;
        HiddenState<float> h_out;
        child.p = bank.score(a, &genc, parent.h, h_out);
        if (goal_child) {
          // Goal leaves are never expanded; the recurrent state is dropped
          // and only (sequence, score) is kept until the solve.
          if (cfg.collect_trace)
            out.trace.push_back({child.seq, static_cast<double>(child.p)});
          heap_push(leaves, nodes, alloc_node(std::move(child)), counter++);
        } else {
          child.h = std::move(h_out);
          heap_push(expand, nodes, alloc_node(std::move(child)), counter++);
        }
      }
    }

    // Drain the leaf pool while its best entry clears the threshold. At a
    // zero threshold everything clears (a score can underflow to exactly 0
    // in float, and completeness must survive that).
    while (!leaves.empty()) {
      const int li = std::get<3>(leaves.top());
      const bool clears =
          static_cast<double>(nodes[static_cast<std::size_t>(li)].p) > f_thresh ||
          f_thresh == 0.0;
      if (!clears) {
        // Stalled: every remaining leaf scores at or below the threshold.
        f_thresh = adjust_threshold(f_thresh, expand.empty());
        ++out.stats.threshold_decays;
        break;  // expand further (if possible) before retrying the pool
      }
      leaves.pop();
      const Node leaf = std::move(nodes[static_cast<std::size_t>(li)]);
      release_node(li);
      if (solve_leaf(leaf)) return finish(true);
    }
  }
  return finish(false);
}

/// Exhaustive baseline: solve every goal sequence shortest-first in the
/// canonical order until one is feasible.
inline PlanResult plan_baseline_lgp(const Scene& scene, const Goal& goal,
                                    const SearchConfig& cfg, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult out;
  const SymbolicState init = initial_state(scene);
  if (is_goal(init, goal.object)) {
    out.found = true;
    out.report = feasibility({}, scene, derive_seed(seed, sequence_hash({})), cfg.optimizer);
    out.sequence = {};
  } else {
    for (int len = 2; len <= cfg.k_max && !out.found; ++len) {
      for_each_goal_sequence_of_length(
          init, goal.object, len, [&](const std::vector<Action>& seq) {
            const SolveReport rep =
                feasibility(seq, scene, derive_seed(seed, sequence_hash(seq)), cfg.optimizer);
            if (out.stats.nlp_solves == 0) out.stats.first_solve_feasible = rep.feasible;
            ++out.stats.nlp_solves;
            if (rep.feasible) {
              out.found = true;
              out.sequence = seq;
              out.report = rep;
              return false;
            }
            return true;
          });
    }
  }
  if (cfg.timing)
    out.stats.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Classifier-pruned search: breadth-first expansion where each child is
/// scored by the prefix-feasibility classifier; children at or below the
/// threshold are deferred instead of expanded, goal leaves above it are
/// solved as encountered. When the frontier empties the threshold decays and
/// deferred nodes re-enter, so pruning never costs completeness.
inline PlanResult plan_with_classifier(const Scene& scene, const Goal& goal,
                                       const NetParams<float>& params_rc,
                                       const SearchConfig& cfg, std::uint64_t seed) {
  using namespace search_detail;
  if (!params_rc.hp.rc)
    throw std::invalid_argument("plan_with_classifier: needs the rc variant");
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult out;
  EncBank bank(scene, params_rc, out.stats.net_queries);

  // Same slot recycling as plan(): consumed frontier nodes free their
  // payload; only deferred nodes pin memory across threshold decays.
  std::vector<Node> nodes;
  std::vector<int> free_slots;
  const auto alloc_node = [&](Node&& n) {
    if (!free_slots.empty()) {
      const int s = free_slots.back();
      free_slots.pop_back();
      nodes[static_cast<std::size_t>(s)] = std::move(n);
      return s;
    }
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  };
  const auto release_node = [&](int s) {
    nodes[static_cast<std::size_t>(s)] = Node();
    free_slots.push_back(s);
  };
  nodes.push_back({initial_state(scene), {}, 0, 1.0f, HiddenState<float>(params_rc.hp.hidden)});

  auto finish = [&](bool found) {
    out.found = found;
    if (cfg.timing)
      out.stats.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
    return out;
  };

  if (is_goal(nodes[0].state, goal.object)) {
    out.report = feasibility({}, scene, derive_seed(seed, sequence_hash({})), cfg.optimizer);
    out.sequence = {};
    return finish(true);
  }

  auto solve_leaf = [&](const Node& leaf) {
    const SolveReport rep =
        feasibility(leaf.seq, scene, derive_seed(seed, sequence_hash(leaf.seq)), cfg.optimizer);
    if (out.stats.nlp_solves == 0) out.stats.first_solve_feasible = rep.feasible;
    ++out.stats.nlp_solves;
    if (rep.feasible) {
      out.sequence = leaf.seq;
      out.report = rep;
    }
    return rep.feasible;
  };

  std::deque<int> frontier;  // FIFO: breadth-first in canonical child order
  std::vector<int> deferred;
  frontier.push_back(0);
  double thresh = cfg.f_thresh0;

  while (true) {
    while (!frontier.empty()) {
      const int ni = frontier.front();
      frontier.pop_front();
      const Node parent = std::move(nodes[static_cast<std::size_t>(ni)]);
      release_node(ni);
      const bool parent_is_goal = is_goal(parent.state, goal.object);
      if (parent_is_goal) {
        if (solve_leaf(parent)) return finish(true);
        continue;
      }
      if (parent.k >= cfg.k_max) continue;
      ++out.stats.nodes_expanded;
      for (const Action& a : applicable_actions(parent.state)) {
        SymbolicState st = successor(parent.state, a);
        const bool goal_child = is_goal(st, goal.object);
        const int ck = parent.k + 1;
        // Non-goal children at k_max can be neither solved nor expanded.
        if (!goal_child && ck >= cfg.k_max) continue;
        Node child;
        child.state = std::move(st);
        child.seq = parent.seq;
        child.seq.push_back(a);
        child.k = ck;
        HiddenState<float> h_out;
        child.p = bank.score(a, nullptr, parent.h, h_out);
        child.h = std::move(h_out);
        if (cfg.collect_trace && goal_child)
          out.trace.push_back({child.seq, static_cast<double>(child.p)});
        const double p = static_cast<double>(child.p);
        const int idx = alloc_node(std::move(child));
        if (p > thresh)
          frontier.push_back(idx);
        else
          deferred.push_back(idx);
      }
    }
    if (deferred.empty()) return finish(false);
    // Decay; if no deferred node clears even the decayed threshold, fall
    // straight to zero (the classifier rejected everything uniformly).
    thresh = adjust_threshold(thresh, false);
    ++out.stats.threshold_decays;
    bool any = false;
    for (int idx : deferred)
      if (static_cast<double>(nodes[static_cast<std::size_t>(idx)].p) > thresh) any = true;
    if (!any && thresh > 0.0) {
      thresh = adjust_threshold(thresh, true);
      ++out.stats.threshold_decays;
    }
    std::vector<int> keep;
    for (int idx : deferred) {
      if (static_cast<double>(nodes[static_cast<std::size_t>(idx)].p) > thresh)
        frontier.push_back(idx);
      else
        keep.push_back(idx);
    }
    deferred.swap(keep);
    if (frontier.empty() && !deferred.empty() && thresh == 0.0) {
      // Scores can be exactly zero only through float underflow; treat any
      // survivors as schedulable to keep the completeness guarantee airtight.
      for (int idx : deferred) frontier.push_back(idx);
      deferred.clear();
    }
  }
}

}  // namespace dvt
