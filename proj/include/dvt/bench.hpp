#pragma once

// Benchmark harness: run the three planners over a filtered set of sampled
// scenes, dump one CSV row per (scene, method), and aggregate medians /
// quartiles per method and sequence length.  nlp_solves is the headline
// metric; wall time is reported but hardware-dependent.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvt/parallel.hpp"
#include "dvt/search.hpp"

namespace dvt {

struct BenchRow {
  int scene_id = 0;
  std::string method;  // "nn" | "baseline" | "classifier"
  int n_objects = 0;
  std::string shapes;  // "box" | "cylinder" | "mixed"
  int seq_len = 0;     // 0 when the method failed
  bool success = false;
  int nlp_solves = 0;
  long net_queries = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;  // scene seed; re-sampling with it replays the run
};

inline std::string scene_shapes(const Scene& s) {
  bool any_box = false, any_cyl = false;
  for (const SceneObject& o : s.objects)
    (o.shape.kind == ObjectShape::Kind::Box ? any_box : any_cyl) = true;
  if (any_box && any_cyl) return "mixed";
  return any_cyl ? "cylinder" : "box";
}

// ---------------------------------------------------------------------------
// CSV: columns exactly in BenchRow field order.

inline const char* bench_csv_header() {
  return "scene_id,method,n_objects,shapes,seq_len,success,nlp_solves,net_queries,wall_ms,seed";
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << bench_csv_header() << '\n';
  for (const BenchRow& r : rows) {
    os << r.scene_id << ',' << r.method << ',' << r.n_objects << ',' << r.shapes << ','
       << r.seq_len << ',' << (r.success ? 1 : 0) << ',' << r.nlp_solves << ','
       << r.net_queries << ',' << std::fixed << std::setprecision(3) << r.wall_ms
       << std::defaultfloat << ',' << r.seed << '\n';
  }
  return os.str();
}

inline void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("bench: cannot open " + path);
  os << bench_csv(rows);
}

inline std::vector<BenchRow> parse_bench_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != bench_csv_header())
    throw std::runtime_error("bench csv: bad header");
  std::vector<BenchRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 10) throw std::runtime_error("bench csv: malformed row: " + line);
    try {
      BenchRow r;
      r.scene_id = std::stoi(f[0]);
      r.method = f[1];
      r.n_objects = std::stoi(f[2]);
      r.shapes = f[3];
      r.seq_len = std::stoi(f[4]);
      r.success = std::stoi(f[5]) != 0;
      r.nlp_solves = std::stoi(f[6]);
      r.net_queries = std::stol(f[7]);
      r.wall_ms = std::stod(f[8]);
      r.seed = std::stoull(f[9]);
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw std::runtime_error("bench csv: malformed row: " + line);
    }
  }
  return rows;
}

inline std::vector<BenchRow> read_bench_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("bench: cannot open " + path);
  return parse_bench_csv(is);
}

// ---------------------------------------------------------------------------
// Suite driver.

struct BenchSuiteConfig {
  int n_scenes = 20;            // feasible scenes to keep
  int n_objects = 2;
  int max_attempts = 0;         // sampling attempts; 0 = 20 * n_scenes
  std::uint64_t scene_seed = 0; // sampling stream, must be disjoint from training
  SamplerConfig sampler;
  SearchConfig search;
  bool zero_wall_ms = false;    // byte-identical CSVs for determinism checks
  int jobs = 1;                 // worker threads; rows stay in attempt order
};

namespace bench_detail {

/// One sampling attempt: filter through the baseline, then run the requested
/// methods. scene_id is filled in by the caller once the kept order is known.
inline std::optional<std::vector<BenchRow>> attempt_rows(const BenchSuiteConfig& cfg,
                                                         const SearchConfig& search, int attempt,
                                                         const NetParams<float>* nn,
                                                         const NetParams<float>* classifier) {
  Scene s;
  try {
    s = sample_scene(cfg.sampler, derive_seed(cfg.scene_seed, static_cast<std::uint64_t>(attempt)),
                     cfg.n_objects);
  } catch (const std::runtime_error&) {
    return std::nullopt;  // pose rejection exhausted; sample another scene
  }
  // Cheap sufficient-condition screen before the expensive baseline filter:
  // if no grasp face of the goal object fits the gripper, every grasp of it
  // is infeasible independent of poses, and a goal not already satisfied can
  // never be reached. The baseline would exhaust the whole tree (minutes on
  // five-object scenes) to conclude the same thing.
  {
    const ObjectShape& goal_shape = s.object(0).shape;
    double narrowest = goal_shape.closing_extent(0);
    for (int eta = 1; eta < kNumGraspFaces; ++eta)
      narrowest = std::min(narrowest, goal_shape.closing_extent(eta));
    if (narrowest > search.optimizer.g_max && !s.object(0).on_target) return std::nullopt;
  }
  // Feasibility filter, shared by every method.  The run is reused as the
  // baseline row rather than solved twice.
  const PlanResult base = plan_baseline_lgp(s, Goal{0}, search, s.seed);
  if (!base.found) return std::nullopt;

  std::vector<BenchRow> rows;
  const auto push = [&](const char* method, const PlanResult& r) {
    BenchRow row;
    row.method = method;
    row.n_objects = static_cast<int>(s.objects.size());
    row.shapes = scene_shapes(s);
    row.seq_len = r.found ? static_cast<int>(r.sequence.size()) : 0;
    row.success = r.found;
    row.nlp_solves = r.stats.nlp_solves;
    row.net_queries = r.stats.net_queries;
    row.wall_ms = r.stats.wall_ms;
    row.seed = s.seed;
    rows.push_back(std::move(row));
  };
  push("baseline", base);
  if (nn) push("nn", plan(s, Goal{0}, *nn, search, s.seed));
  if (classifier) push("classifier", plan_with_classifier(s, Goal{0}, *classifier, search, s.seed));
  return rows;
}

}  // namespace bench_detail

/// Runs baseline (always; it doubles as the feasibility filter) plus the nn
/// and/or classifier methods on each kept scene.  Pass nullptr to skip a
/// method.  Stops early if the sampling budget runs dry.  With jobs > 1,
/// attempts are evaluated in parallel waves and merged in attempt order, so
/// the rows match the single-threaded run (use zero_wall_ms for byte equality).
inline std::vector<BenchRow> run_suite(const BenchSuiteConfig& cfg,
                                       const NetParams<float>* nn,
                                       const NetParams<float>* classifier,
                                       const std::function<void(int, int)>& progress = {}) {
  SearchConfig search = cfg.search;
  if (cfg.zero_wall_ms) search.timing = false;
  const int cap = cfg.max_attempts > 0 ? cfg.max_attempts : 20 * cfg.n_scenes;

  std::vector<BenchRow> rows;
  int kept = 0, attempt = 0;
  while (attempt < cap && kept < cfg.n_scenes) {
    const int wave = std::min(cap - attempt, cfg.jobs <= 1 ? 1 : cfg.jobs * 4);
    auto outs = parallel_slots<std::optional<std::vector<BenchRow>>>(
        wave, cfg.jobs, [&](int w) {
          return bench_detail::attempt_rows(cfg, search, attempt + w, nn, classifier);
        });
    for (auto& o : outs) {
      if (kept >= cfg.n_scenes) break;
      if (!o) continue;
      for (BenchRow& r : *o) {
        r.scene_id = kept;
        rows.push_back(std::move(r));
      }
      ++kept;
      if (progress) progress(kept, cfg.n_scenes);
    }
    attempt += wave;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregation.

/// Linear-interpolation quantile over a sorted copy (the common "R-7" rule).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

struct MethodSummary {
  std::string method;
  int rows = 0;
  int successes = 0;
  double success_rate = 0.0;
};

struct MethodSlice {  // successful rows of one method at one sequence length
  std::string method;
  int seq_len = 0;
  int n = 0;
  double solves_q1 = 0, solves_med = 0, solves_q3 = 0;
  double wall_q1 = 0, wall_med = 0, wall_q3 = 0;
};

struct SpeedupRow {  // method vs baseline, matched per scene at equal seq_len
  std::string method;
  int seq_len = 0;
  int n_matched = 0;
  double median_solve_ratio = 0.0;  // baseline solves / method solves
  double median_wall_ratio = 0.0;   // baseline ms / method ms; 0 if untimed
};

struct BenchSummary {
  std::vector<MethodSummary> methods;
  std::vector<MethodSlice> slices;
  std::vector<SpeedupRow> speedups;
  std::vector<std::string> warnings;
};

inline BenchSummary summarize(const std::vector<BenchRow>& rows) {
  BenchSummary out;
  std::vector<std::string> methods;
  for (const BenchRow& r : rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
  std::sort(methods.begin(), methods.end());  // deterministic slice order

  for (const std::string& m : methods) {
    MethodSummary ms;
    ms.method = m;
    std::vector<int> lens;
    for (const BenchRow& r : rows) {
      if (r.method != m) continue;
      ++ms.rows;
      if (r.success) {
        ++ms.successes;
        if (std::find(lens.begin(), lens.end(), r.seq_len) == lens.end())
          lens.push_back(r.seq_len);
      }
    }
    ms.success_rate = ms.rows ? static_cast<double>(ms.successes) / ms.rows : 0.0;
    out.methods.push_back(ms);
    if (ms.successes == 0) {
      out.warnings.push_back("method " + m + ": no successful runs; omitted from quantiles");
      continue;
    }
    std::sort(lens.begin(), lens.end());
    for (int len : lens) {
      MethodSlice sl;
      sl.method = m;
      sl.seq_len = len;
      std::vector<double> solves, walls;
      for (const BenchRow& r : rows)
        if (r.method == m && r.success && r.seq_len == len) {
          solves.push_back(r.nlp_solves);
          walls.push_back(r.wall_ms);
        }
      sl.n = static_cast<int>(solves.size());
      sl.solves_q1 = quantile(solves, 0.25);
      sl.solves_med = quantile(solves, 0.5);
      sl.solves_q3 = quantile(solves, 0.75);
      sl.wall_q1 = quantile(walls, 0.25);
      sl.wall_med = quantile(walls, 0.5);
      sl.wall_q3 = quantile(walls, 0.75);
      out.slices.push_back(sl);
    }
  }

  // Speedups: per-scene ratios against the baseline, restricted to scenes
  // where both methods succeeded with the same sequence length.
  const auto find_row = [&](int scene_id, const std::string& m) -> const BenchRow* {
    for (const BenchRow& r : rows)
      if (r.scene_id == scene_id && r.method == m) return &r;
    return nullptr;
  };
  for (const std::string& m : methods) {
    if (m == "baseline") continue;
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_len;
    for (const BenchRow& r : rows) {
      if (r.method != m || !r.success) continue;
      const BenchRow* b = find_row(r.scene_id, "baseline");
      if (!b || !b->success || b->seq_len != r.seq_len) continue;
      auto& [sr, wr] = by_len[r.seq_len];
      sr.push_back(static_cast<double>(b->nlp_solves) / std::max(1, r.nlp_solves));
      if (r.wall_ms > 0.0) wr.push_back(b->wall_ms / r.wall_ms);
    }
    for (const auto& [len, ratios] : by_len) {
      SpeedupRow sp;
      sp.method = m;
      sp.seq_len = len;
      sp.n_matched = static_cast<int>(ratios.first.size());
      sp.median_solve_ratio = quantile(ratios.first, 0.5);
      sp.median_wall_ratio = ratios.second.empty() ? 0.0 : quantile(ratios.second, 0.5);
      out.speedups.push_back(sp);
    }
  }
  return out;
}

inline void to_json(json& j, const MethodSummary& m) {
  j = {{"method", m.method},
       {"rows", m.rows},
       {"successes", m.successes},
       {"success_rate", m.success_rate}};
}

inline void to_json(json& j, const MethodSlice& s) {
  j = {{"method", s.method},
       {"seq_len", s.seq_len},
       {"n", s.n},
       {"nlp_solves", {{"q1", s.solves_q1}, {"median", s.solves_med}, {"q3", s.solves_q3}}},
       {"wall_ms", {{"q1", s.wall_q1}, {"median", s.wall_med}, {"q3", s.wall_q3}}}};
}

inline void to_json(json& j, const SpeedupRow& s) {
  j = {{"method", s.method},
       {"seq_len", s.seq_len},
       {"n_matched", s.n_matched},
       {"median_solve_ratio", s.median_solve_ratio},
       {"median_wall_ratio", s.median_wall_ratio}};
}

inline void to_json(json& j, const BenchSummary& s) {
  j = {{"methods", s.methods},
       {"slices", s.slices},
       {"speedups", s.speedups},
       {"warnings", s.warnings}};
}

inline std::string format_summary(const BenchSummary& s) {
  std::ostringstream os;
  os << std::fixed;
  os << "method       rows  succ  rate\n";
  for (const MethodSummary& m : s.methods)
    os << std::left << std::setw(12) << m.method << std::right << std::setw(6) << m.rows
       << std::setw(6) << m.successes << std::setw(6) << std::setprecision(2)
       << m.success_rate << '\n';
  os << "\nmethod       len    n  solves q1/med/q3        wall_ms q1/med/q3\n";
  for (const MethodSlice& sl : s.slices) {
    os << std::left << std::setw(12) << sl.method << std::right << std::setw(4) << sl.seq_len
       << std::setw(5) << sl.n << "  " << std::setprecision(1) << std::setw(6) << sl.solves_q1
       << '/' << std::setw(6) << sl.solves_med << '/' << std::setw(6) << sl.solves_q3 << "  "
       << std::setw(8) << sl.wall_q1 << '/' << std::setw(8) << sl.wall_med << '/'
       << std::setw(8) << sl.wall_q3 << '\n';
  }
  if (!s.speedups.empty()) {
    os << "\nspeedup vs baseline (matched scenes, equal length)\n";
    os << "method       len    n  solves   wall\n";
    for (const SpeedupRow& sp : s.speedups)
      os << std::left << std::setw(12) << sp.method << std::right << std::setw(4) << sp.seq_len
         << std::setw(5) << sp.n_matched << std::setprecision(2) << std::setw(8)
         << sp.median_solve_ratio << std::setw(7) << sp.median_wall_ratio << '\n';
  }
  for (const std::string& w : s.warnings) os << "warning: " << w << '\n';
  return os.str();
}

}  // namespace dvt
