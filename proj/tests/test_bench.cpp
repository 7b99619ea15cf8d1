#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "dvt/bench.hpp"

using namespace dvt;

namespace {

BenchSuiteConfig smoke_cfg(int n_scenes, std::uint64_t seed) {
  BenchSuiteConfig cfg;
  cfg.n_scenes = n_scenes;
  cfg.n_objects = 1;  // mostly trivial scenes keep the suite quick
  cfg.scene_seed = seed;
  cfg.search.k_max = 4;
  cfg.search.optimizer.n_starts = 2;
  cfg.search.optimizer.inner_iters = 150;
  cfg.search.optimizer.al_iters = 8;
  cfg.zero_wall_ms = true;
  return cfg;
}

BenchRow make_row(int scene_id, const char* method, int seq_len, bool success, int solves,
                  double wall) {
  BenchRow r;
  r.scene_id = scene_id;
  r.method = method;
  r.n_objects = 2;
  r.shapes = "box";
  r.seq_len = seq_len;
  r.success = success;
  r.nlp_solves = solves;
  r.wall_ms = wall;
  r.seed = 7;
  return r;
}

}  // namespace

TEST_CASE("run_suite emits one row per scene and method", "[bench]") {
  const BenchSuiteConfig cfg = smoke_cfg(6, 813000);
  const NetParams<float> zero(make_hp(8));
  const std::vector<BenchRow> rows = run_suite(cfg, &zero, nullptr);
  REQUIRE(rows.size() == 12);
  for (int i = 0; i < 6; ++i) {
    CHECK(rows[2 * i].scene_id == i);
    CHECK(rows[2 * i].method == "baseline");
    CHECK(rows[2 * i].success);  // the filter only keeps baseline-feasible scenes
    CHECK(rows[2 * i + 1].scene_id == i);
    CHECK(rows[2 * i + 1].method == "nn");
  }
  for (const BenchRow& r : rows) {
    if (r.success) CHECK(r.seq_len >= 2);
    CHECK(r.n_objects == 1);
    CHECK(r.wall_ms == 0.0);
    CHECK((r.method == "nn") == (r.net_queries > 0));
  }
}

TEST_CASE("run_suite is deterministic and replayable", "[bench]") {
  const BenchSuiteConfig cfg = smoke_cfg(4, 51700);
  const NetParams<float> zero(make_hp(8));
  const std::string csv_a = bench_csv(run_suite(cfg, &zero, nullptr));
  const std::string csv_b = bench_csv(run_suite(cfg, &zero, nullptr));
  CHECK(csv_a == csv_b);

  BenchSuiteConfig other = cfg;
  other.scene_seed = 51701;
  CHECK(bench_csv(run_suite(other, &zero, nullptr)) != csv_a);

  // Threaded waves merge in attempt order: same bytes as the sequential run.
  BenchSuiteConfig threaded = cfg;
  threaded.jobs = 3;
  CHECK(bench_csv(run_suite(threaded, &zero, nullptr)) == csv_a);

  // Replay each row from its recorded seed: re-sampling the scene and
  // re-running the method must reproduce the stats exactly.
  std::istringstream is(csv_a);
  for (const BenchRow& r : parse_bench_csv(is)) {
    const Scene s = sample_scene(cfg.sampler, r.seed, r.n_objects);
    SearchConfig search = cfg.search;
    search.timing = false;
    const PlanResult replay = r.method == "baseline"
                                  ? plan_baseline_lgp(s, Goal{0}, search, s.seed)
                                  : plan(s, Goal{0}, zero, search, s.seed);
    CHECK(replay.found == r.success);
    CHECK(replay.stats.nlp_solves == r.nlp_solves);
    CHECK(static_cast<int>(replay.sequence.size()) == r.seq_len);
  }
}

TEST_CASE("run_suite covers cylinders and the classifier method", "[bench]") {
  BenchSuiteConfig cfg = smoke_cfg(2, 97100);
  cfg.sampler.cylinder_fraction = 1.0;
  const NetParams<float> rc(make_hp(8, true));
  const std::vector<BenchRow> rows = run_suite(cfg, nullptr, &rc);
  REQUIRE(rows.size() == 4);
  for (const BenchRow& r : rows) {
    CHECK(r.shapes == "cylinder");
    CHECK((r.method == "baseline" || r.method == "classifier"));
  }
}

TEST_CASE("bench CSV round-trips and rejects malformed rows", "[bench]") {
  std::vector<BenchRow> rows = {make_row(0, "baseline", 2, true, 5, 12.5),
                                make_row(0, "nn", 2, true, 1, 3.25)};
  rows[1].net_queries = 42;
  rows[1].seed = 123456789012345ull;
  const std::string csv = bench_csv(rows);
  std::istringstream is(csv);
  const std::vector<BenchRow> back = parse_bench_csv(is);
  REQUIRE(back.size() == 2);
  CHECK(back[1].method == "nn");
  CHECK(back[1].net_queries == 42);
  CHECK(back[1].wall_ms == 3.25);
  CHECK(back[1].seed == 123456789012345ull);
  CHECK(back[0].nlp_solves == 5);

  std::istringstream bad_header("nope\n1,baseline,2,box,2,1,5,0,1.0,7\n");
  CHECK_THROWS_AS(parse_bench_csv(bad_header), std::runtime_error);
  std::istringstream short_row(std::string(bench_csv_header()) + "\n1,baseline,2,box\n");
  CHECK_THROWS_AS(parse_bench_csv(short_row), std::runtime_error);
  std::istringstream bad_cell(std::string(bench_csv_header()) +
                              "\nx,baseline,2,box,2,1,5,0,1.0,7\n");
  CHECK_THROWS_AS(parse_bench_csv(bad_cell), std::runtime_error);
}

TEST_CASE("summarize: hand-computed quantiles and warnings", "[bench]") {
  const std::vector<BenchRow> rows = {
      make_row(0, "nn", 2, true, 1, 10.0),  make_row(1, "nn", 2, true, 2, 20.0),
      make_row(2, "nn", 2, true, 10, 40.0), make_row(3, "nn", 0, false, 6, 5.0),
      make_row(4, "classifier", 0, false, 3, 1.0),
  };
  const BenchSummary s = summarize(rows);
  REQUIRE(s.methods.size() == 2);
  CHECK(s.methods[0].method == "classifier");
  CHECK(s.methods[0].success_rate == 0.0);
  CHECK(s.methods[1].method == "nn");
  CHECK(s.methods[1].rows == 4);
  CHECK(s.methods[1].success_rate == 0.75);

  REQUIRE(s.slices.size() == 1);  // the all-failed classifier slice is omitted
  const MethodSlice& sl = s.slices[0];
  CHECK(sl.n == 3);
  // sorted solves {1,2,10}: q1 = 1.5, med = 2, q3 = 6 under linear interpolation
  CHECK(sl.solves_q1 == 1.5);
  CHECK(sl.solves_med == 2.0);
  CHECK(sl.solves_q3 == 6.0);
  CHECK(sl.wall_med == 20.0);
  REQUIRE(s.warnings.size() == 1);
  CHECK(s.warnings[0].find("classifier") != std::string::npos);

  const BenchSummary single = summarize({make_row(0, "baseline", 3, true, 4, 8.0)});
  REQUIRE(single.slices.size() == 1);
  CHECK(single.slices[0].solves_q1 == 4.0);
  CHECK(single.slices[0].solves_med == 4.0);
  CHECK(single.slices[0].solves_q3 == 4.0);
}

TEST_CASE("summarize: speedup uses matched scenes at equal length", "[bench]") {
  const std::vector<BenchRow> rows = {
      make_row(0, "baseline", 2, true, 8, 40.0), make_row(0, "nn", 2, true, 2, 10.0),
      make_row(1, "baseline", 2, true, 6, 30.0), make_row(1, "nn", 2, true, 2, 10.0),
      // length mismatch: excluded from the ratio pool
      make_row(2, "baseline", 2, true, 100, 500.0), make_row(2, "nn", 4, true, 1, 1.0),
  };
  const BenchSummary s = summarize(rows);
  REQUIRE(s.speedups.size() == 1);
  const SpeedupRow& sp = s.speedups[0];
  CHECK(sp.method == "nn");
  CHECK(sp.seq_len == 2);
  CHECK(sp.n_matched == 2);
  CHECK(sp.median_solve_ratio == 3.5);  // median of {4, 3}
  CHECK(sp.median_wall_ratio == 3.5);   // median of {4, 3}

  // Untimed rows (wall 0) keep the solve ratio but drop the wall ratio.
  const std::vector<BenchRow> untimed = {make_row(0, "baseline", 2, true, 8, 0.0),
                                         make_row(0, "nn", 2, true, 2, 0.0)};
  const BenchSummary su = summarize(untimed);
  REQUIRE(su.speedups.size() == 1);
  CHECK(su.speedups[0].median_solve_ratio == 4.0);
  CHECK(su.speedups[0].median_wall_ratio == 0.0);
}

TEST_CASE("summary serializes and formats", "[bench]") {
  const std::vector<BenchRow> rows = {make_row(0, "baseline", 2, true, 8, 40.0),
                                      make_row(0, "nn", 2, true, 2, 10.0)};
  const BenchSummary s = summarize(rows);
  const json j = s;
  CHECK(j.at("methods").size() == 2);
  CHECK(j.at("slices")[0].at("nlp_solves").at("median").get<double>() == 8.0);
  CHECK(j.at("speedups")[0].at("median_solve_ratio").get<double>() == 4.0);

  const std::string text = format_summary(s);
  CHECK(text.find("baseline") != std::string::npos);
  CHECK(text.find("speedup vs baseline") != std::string::npos);
}
