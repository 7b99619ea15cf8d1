// Single-binary entry point.  Subcommands cover the full pipeline: scene
// sampling, tree enumeration, dataset generation, training, planning, the
// benchmark suite, image dumps and built-in self-tests.
//
// Exit codes: 0 success, 1 planning exhaustion / failed self-test,
// 2 usage or config error.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "dvt/bench.hpp"
#include "dvt/config.hpp"
#include "dvt/data.hpp"
#include "dvt/train.hpp"

namespace {

using namespace dvt;

Scene read_scene_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scene file: " + path);
  json j;
  is >> j;
  return j.get<Scene>();
}

Config load_cfg(const std::string& config_path) {
  if (!config_path.empty()) return load_config(config_path);
  if (const char* env = std::getenv("DVT_CONFIG"); env && *env) return load_config(env);
  return Config{};
}

/// "3" -> [3,3]; "1..5" -> [1,5].
std::pair<int, int> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(s);
      return {v, v};
    }
    return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw std::runtime_error("bad range '" + s + "' (expected N or A..B)");
  }
}

// ---------------------------------------------------------------------------

int run_enumerate(const std::string& objects, int k_max, bool as_json) {
  const auto [lo, hi] = parse_range(objects);
  if (lo < 1 || hi < lo || hi > 16) throw std::runtime_error("object range must be 1..16");
  if (k_max < 2) throw std::runtime_error("kmax must be >= 2");

  json rows = json::array();
  std::ostringstream table;
  table << "  n\\k";
  for (int k = 2; k <= k_max; ++k) table << std::setw(12) << k;
  table << '\n';
  for (int n = lo; n <= hi; ++n) {
    const SymbolicState init = initial_symbolic_state(std::vector<Rest>(n, Rest::Table));
    const std::vector<std::uint64_t> counts = count_goal_sequences(init, 0, k_max);
    table << std::setw(5) << n;
    json crow = json::array();
    for (int k = 2; k <= k_max; ++k) {
      table << std::setw(12) << counts[static_cast<std::size_t>(k)];
      crow.push_back(counts[static_cast<std::size_t>(k)]);
    }
    table << '\n';
    rows.push_back({{"n", n}, {"counts", crow}});
  }
  if (as_json)
    std::cout << json{{"k_max", k_max}, {"rows", rows}}.dump(2) << '\n';
  else
    std::cout << table.str();
  return 0;
}

int run_sample_scenes(const Config& cfg, std::uint64_t seed, int count, int n_objects,
                      const std::string& out_path) {
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open for writing: " + out_path);
    out = &file;
  }
  int kept = 0;
  for (int i = 0; i < count; ++i) {
    try {
      const Scene s =
          sample_scene(cfg.sampler, derive_seed(seed, static_cast<std::uint64_t>(i)), n_objects);
      *out << json(s).dump() << '\n';
      ++kept;
    } catch (const std::runtime_error&) {
      // rejection budget exhausted; skip this seed
    }
  }
  std::cerr << "sampled " << kept << "/" << count << " scenes\n";
  return 0;
}

int run_gen_data(const Config& cfg, std::uint64_t seed, int n_scenes, const std::string& out_path,
                 bool raw, bool exact_labels, int jobs) {
  const DataGenConfig d = cfg.data_cfg();
  const auto progress = [&](int done, int total) {
    if (done % 25 == 0 || done == total) std::cerr << "scene " << done << "/" << total << '\n';
  };
  const DataGenResult res = generate_data(d, seed, n_scenes, jobs, progress);
  std::cerr << "kept " << res.kept_scene_ids.size() << "/" << res.scenes_requested
            << " scenes (" << res.scenes_sampling_failed << " sampling failures, "
            << res.scenes_no_solution << " without a solution), " << res.records.size()
            << " records\n";
  if (raw) {
    write_jsonl(out_path, "data", d.hash(), res.records);
    return 0;
  }
  const std::vector<TrainRecord> train_records =
      exact_labels ? label_prefix_feasibility(res.records, d.optimizer)
                   : transform_targets(res.records);
  long positives = 0, labels = 0;
  for (const TrainRecord& r : train_records)
    for (int y : r.labels) {
      ++labels;
      positives += y;
    }
  std::cerr << "labels: " << labels << " total, "
            << (labels ? 100.0 * static_cast<double>(positives) / static_cast<double>(labels)
                       : 0.0)
            << "% positive\n";
  write_jsonl(out_path, "train", d.hash(), train_records);
  return 0;
}

int run_train(const Config& cfg, std::uint64_t seed, const std::string& data_path,
              const std::string& out_path, const std::string& resume_path,
              const std::string& log_path, int epochs, int img, bool rc) {
  const std::vector<TrainRecord> set = read_jsonl<TrainRecord>(data_path, "train");

  NetParams<float> params(make_hp(img, rc));
  AdamState<float> adam(params);
  TrainConfig t = cfg.train_cfg(derive_seed(seed, 2));
  t.epochs = epochs;
  if (!resume_path.empty()) {
    json meta;
    params = load_net<float>(resume_path, &adam, &meta);
    if (params.hp.img != img || params.hp.rc != rc)
      throw std::runtime_error("resume: weight file is " + std::to_string(params.hp.img) +
                               "px rc=" + std::to_string(params.hp.rc) +
                               ", which contradicts the requested --img/--rc");
    if (meta.contains("epochs_done")) t.start_epoch = meta.at("epochs_done").get<int>();
    if (meta.contains("train_seed") && meta.at("train_seed").get<std::uint64_t>() != seed)
      throw std::runtime_error("resume: --seed differs from the checkpoint's train seed");
    std::cerr << "resuming at epoch " << t.start_epoch << '\n';
  } else {
    params = init_params<float>(params.hp, derive_seed(seed, 1));
  }
  if (t.start_epoch >= t.epochs)
    throw std::runtime_error("nothing to do: checkpoint already has " +
                             std::to_string(t.start_epoch) + " epochs");

  RenderCache cache(img);
  const std::vector<EpochLog> logs =
      train(params, adam, set, t, cache, [&](const EpochLog& l) {
        std::cerr << "epoch " << l.epoch + 1 << "/" << t.epochs << "  loss " << std::setprecision(5)
                  << l.mean_loss << "  positives " << std::setprecision(3)
                  << l.positives_fraction << '\n';
      });

  const json meta{{"epochs_done", t.epochs}, {"train_seed", seed}, {"data", data_path}};
  save_net(params, out_path, &adam, meta);
  std::cerr << "saved " << out_path << '\n';
  if (!log_path.empty()) write_train_log(log_path, logs);
  return 0;
}

int run_plan(const Config& cfg, const std::string& scene_path, const std::string& weights_path,
             std::string method, int goal_object, int k_max, std::uint64_t seed, bool seed_set) {
  const Scene scene = read_scene_file(scene_path);
  const Goal goal{goal_object};
  SearchConfig search = cfg.search_cfg();
  search.k_max = k_max;
  const std::uint64_t s = seed_set ? seed : scene.seed;

  NetParams<float> params(make_hp(8));
  if (!weights_path.empty()) {
    params = load_net<float>(weights_path);
    if (method == "auto") method = params.hp.rc ? "classifier" : "nn";
  } else if (method == "auto") {
    method = "baseline";
  }

  PlanResult result;
  if (method == "baseline")
    result = plan_baseline_lgp(scene, goal, search, s);
  else if (method == "nn")
    result = plan(scene, goal, params, search, s);
  else if (method == "classifier")
    result = plan_with_classifier(scene, goal, params, search, s);
  else
    throw std::runtime_error("unknown method '" + method + "'");

  std::cout << json(result).dump(2) << '\n';
  return result.found ? 0 : 1;
}

int run_bench(const Config& cfg, std::uint64_t seed, int n_scenes, int n_objects,
              const std::string& weights_path, const std::string& classifier_path,
              const std::string& csv_path, const std::string& summary_path, bool deterministic,
              int jobs, int max_attempts) {
  BenchSuiteConfig b;
  b.n_scenes = n_scenes;
  b.n_objects = n_objects;
  b.max_attempts = max_attempts;
  b.scene_seed = seed;
  b.sampler = cfg.sampler;
  b.search = cfg.search_cfg();
  b.zero_wall_ms = deterministic;
  b.jobs = jobs;

  NetParams<float> nn(make_hp(8)), classifier(make_hp(8, true));
  bool have_nn = false, have_classifier = false;
  if (!weights_path.empty()) {
    nn = load_net<float>(weights_path);
    if (nn.hp.rc) throw std::runtime_error("--weights must be a full-context (non-rc) network");
    have_nn = true;
  }
  if (!classifier_path.empty()) {
    classifier = load_net<float>(classifier_path);
    if (!classifier.hp.rc) throw std::runtime_error("--classifier must be an rc network");
    have_classifier = true;
  }

  const std::vector<BenchRow> rows =
      run_suite(b, have_nn ? &nn : nullptr, have_classifier ? &classifier : nullptr,
                [&](int kept, int total) {
                  if (kept % 10 == 0 || kept == total)
                    std::cerr << "scene " << kept << "/" << total << '\n';
                });
  write_bench_csv(csv_path, rows);
  std::cerr << "wrote " << rows.size() << " rows to " << csv_path << '\n';

  const BenchSummary summary = summarize(rows);
  std::cout << format_summary(summary);
  if (!summary_path.empty()) {
    std::ofstream os(summary_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + summary_path);
    os << json(summary).dump(2) << '\n';
  }
  return 0;
}

int run_render(const Config& cfg, const std::string& scene_path, const std::string& prefix,
               int goal_object, int object, const std::string& surface) {
  const Scene scene = read_scene_file(scene_path);
  RenderConfig rc;
  rc.w = rc.h = cfg.img;

  Image img;
  if (object >= 0) {
    ActionObjects ao;
    ao.object = object;
    if (surface == "table")
      ao.surface = Surface::Table;
    else if (surface == "target")
      ao.surface = Surface::Target;
    else if (surface != "none")
      throw std::runtime_error("surface must be table, target or none");
    img = render_action_image(scene, ao, rc);
  } else {
    img = render_goal_image(scene, Goal{goal_object}, rc);
  }
  const char* names[3] = {"depth", "object", "surface"};
  for (int c = 0; c < 3; ++c) {
    const std::string path = prefix + "_" + names[c] + ".pgm";
    export_pgm(img, c, path);
    std::cerr << "wrote " << path << '\n';
  }
  return 0;
}

int run_verify() {
  int failures = 0;
  const auto report = [&](const char* name, bool ok) {
    std::cout << (ok ? "ok:   " : "FAIL: ") << name << '\n';
    if (!ok) ++failures;
  };

  // Exact-length goal-sequence counts for 1..5 objects, lengths 2..6.
  const std::uint64_t expected[5][5] = {{8, 32, 192, 1024, 5632},
                                        {8, 96, 704, 6400, 51200},
                                        {8, 160, 1216, 15872, 145920},
                                        {8, 224, 1728, 29440, 289792},
                                        {8, 288, 2240, 47104, 482816}};
  bool counts_ok = true;
  for (int n = 1; n <= 5; ++n) {
    const SymbolicState init = initial_symbolic_state(std::vector<Rest>(n, Rest::Table));
    const std::vector<std::uint64_t> counts = count_goal_sequences(init, 0, 6);
    for (int k = 2; k <= 6; ++k)
      if (counts[static_cast<std::size_t>(k)] != expected[n - 1][k - 2]) counts_ok = false;
  }
  report("goal-sequence count matrix (1..5 objects, lengths 2..6)", counts_ok);

  // Gradient check: analytic loss gradients against central differences at
  // the 8px preset, every entry of every tensor, both network variants.
  for (const bool rc : {false, true}) {
    NetParams<double> p = init_params<double>(make_hp(8, rc), 99);
    Rng rng(4321);
    std::vector<Image> bank_imgs;
    for (int i = 0; i < 3; ++i) {
      Image im(3, 8, 8);
      for (float& v : im.data) v = static_cast<float>(rng.uniform());
      bank_imgs.push_back(std::move(im));
    }
    NetBatch<double> batch;
    for (const Image& im : bank_imgs) batch.bank.push_back(&im);
    for (int si = 0; si < 2; ++si) {
      NetBatch<double>::Seq s;
      const int len = 2 + si;
      for (int j = 0; j < len; ++j) {
        s.act_img.push_back((si + j) % 3);
        s.sym.push_back((si * 3 + j * 2) % 10);
        s.labels.push_back((si + j) % 2);
      }
      if (!rc) s.goal_img = 2;
      batch.seqs.push_back(std::move(s));
    }
    std::vector<Tensor<double>> g = make_grads(p);
    loss_and_grad(p, batch, g);
    double worst = 0.0;
    for (int ti = 0; ti < kNumParams; ++ti) {
      auto& w = p.t[static_cast<std::size_t>(ti)].v;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double h = 1e-5, keep = w[i];
        w[i] = keep + h;
        std::vector<Tensor<double>> tmp = make_grads(p);
        const double up = loss_and_grad(p, batch, tmp);
        w[i] = keep - h;
        const double dn = loss_and_grad(p, batch, tmp);
        w[i] = keep;
        const double fd = (up - dn) / (2 * h);
        const double an = g[static_cast<std::size_t>(ti)].v[i];
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
        worst = std::max(worst, rel);
      }
    }
    report(rc ? "gradient check (rc variant, 8px)" : "gradient check (full variant, 8px)",
           worst <= 1e-3);
  }

  // Fresh zero-weight network scores exactly 0.5.
  {
    const NetParams<float> zero(make_hp(8));
    Image im(3, 8, 8);
    const std::vector<StepInput> steps{{0, &im, &im}, {9, &im, &im}};
    const std::vector<float> ps = forward_sequence(zero, steps);
    report("zero-parameter network outputs 0.5", ps[0] == 0.5f && ps[1] == 0.5f);
  }

  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar two-arm rearrangement planner with a learned feasibility heuristic"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (or set DVT_CONFIG)");

  // enumerate
  auto* enumerate = app.add_subcommand("enumerate", "print goal-sequence counts per length");
  std::string enum_objects = "1..5";
  int enum_kmax = 6;
  bool enum_json = false;
  enumerate->add_option("--objects", enum_objects, "object count or range, e.g. 2 or 1..5");
  enumerate->add_option("--kmax", enum_kmax, "maximum sequence length");
  enumerate->add_flag("--json", enum_json, "machine-readable output");

  // sample-scenes
  auto* sample = app.add_subcommand("sample-scenes", "sample scenes as JSON lines");
  std::uint64_t sample_seed = 0;
  int sample_count = 10, sample_objects = -1;
  std::string sample_out;
  sample->add_option("--seed", sample_seed, "sampling seed");
  sample->add_option("--count", sample_count, "number of scenes to attempt");
  sample->add_option("--objects", sample_objects, "objects per scene");
  sample->add_option("--out", sample_out, "output path (default stdout)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a labelled training dataset");
  std::uint64_t gen_seed = 0;
  int gen_scenes = 100, gen_objects = -1, gen_kmax = -1, gen_max_solutions = -1,
      gen_max_leaves = -1, gen_jobs = 1;
  std::string gen_out = "data.jsonl";
  bool gen_raw = false, gen_exact = false;
  gen->add_option("--seed", gen_seed, "master seed")->required();
  gen->add_option("--scenes", gen_scenes, "scenes to sample");
  gen->add_option("--objects", gen_objects, "objects per scene");
  gen->add_option("--kmax", gen_kmax, "maximum sequence length");
  gen->add_option("--max-solutions", gen_max_solutions, "per-scene feasible-sequence budget");
  gen->add_option("--max-leaves", gen_max_leaves, "per-scene leaf-evaluation budget");
  gen->add_option("--out", gen_out, "output JSONL path");
  gen->add_option("--jobs", gen_jobs, "worker threads");
  gen->add_flag("--raw", gen_raw, "write raw solver records instead of training labels");
  gen->add_flag("--exact-labels", gen_exact, "label steps by solving each prefix");

  // train
  auto* tr = app.add_subcommand("train", "fit the feasibility network");
  std::uint64_t train_seed = 0;
  std::string train_data, train_out = "weights.bin", train_resume, train_log;
  int train_epochs = -1, train_batch = -1, train_min_feasible = -1, train_img = -1;
  double train_lr = -1.0;
  bool train_rc = false;
  tr->add_option("--seed", train_seed, "master seed")->required();
  tr->add_option("--data", train_data, "training JSONL")->required();
  tr->add_option("--out", train_out, "weight file to write");
  tr->add_option("--resume", train_resume, "checkpoint to continue from");
  tr->add_option("--log", train_log, "epoch CSV log path");
  tr->add_option("--epochs", train_epochs, "total epochs");
  tr->add_option("--batch", train_batch, "batch size");
  tr->add_option("--min-feasible", train_min_feasible, "feasible-sequence floor per batch");
  tr->add_option("--lr", train_lr, "Adam learning rate");
  tr->add_option("--img", train_img, "raster side (8, 32 or 64)");
  tr->add_flag("--rc", train_rc, "train the reduced-context classifier variant");

  // plan
  auto* pl = app.add_subcommand("plan", "plan one scene and print the result");
  std::string plan_scene, plan_weights, plan_method = "auto";
  int plan_goal = 0, plan_kmax = -1;
  std::uint64_t plan_seed = 0;
  pl->add_option("--scene", plan_scene, "scene JSON file")->required();
  pl->add_option("--weights", plan_weights, "weight file (omit for the exhaustive baseline)");
  pl->add_option("--method", plan_method, "auto|nn|classifier|baseline");
  pl->add_option("--goal", plan_goal, "goal object id");
  pl->add_option("--kmax", plan_kmax, "maximum sequence length");
  auto* plan_seed_opt = pl->add_option("--seed", plan_seed, "solver seed (default: scene seed)");

  // bench
  auto* be = app.add_subcommand("bench", "run the benchmark suite");
  std::uint64_t bench_seed = 0;
  int bench_scenes = -1, bench_objects = -1, bench_jobs = 1, bench_attempts = 0;
  std::string bench_weights, bench_classifier, bench_csv = "bench.csv", bench_summary;
  bool bench_det = false;
  be->add_option("--seed", bench_seed, "scene sampling seed")->required();
  be->add_option("--scenes", bench_scenes, "feasible scenes to keep");
  be->add_option("--objects", bench_objects, "objects per scene");
  be->add_option("--weights", bench_weights, "full-context weights for the nn method");
  be->add_option("--classifier", bench_classifier, "rc weights for the classifier method");
  be->add_option("--out", bench_csv, "CSV output path");
  be->add_option("--summary", bench_summary, "JSON summary output path");
  be->add_option("--jobs", bench_jobs, "worker threads");
  be->add_option("--max-attempts", bench_attempts, "sampling attempt cap (0 = 20x scenes)");
  be->add_flag("--deterministic", bench_det, "zero wall times for byte-stable output");

  // render
  auto* re = app.add_subcommand("render", "dump image channels as PGM");
  std::string render_scene, render_prefix = "render", render_surface = "none";
  int render_goal = 0, render_object = -1;
  re->add_option("--scene", render_scene, "scene JSON file")->required();
  re->add_option("--out", render_prefix, "output path prefix");
  re->add_option("--goal", render_goal, "goal object for the goal image");
  re->add_option("--object", render_object, "render an action image of this object instead");
  re->add_option("--surface", render_surface, "action surface: table, target or none");

  // verify
  app.add_subcommand("verify", "run built-in self-tests");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const Config cfg = load_cfg(config_path);
    if (app.got_subcommand("enumerate")) return run_enumerate(enum_objects, enum_kmax, enum_json);
    if (app.got_subcommand("sample-scenes"))
      return run_sample_scenes(cfg, sample_seed, sample_count,
                               sample_objects >= 0 ? sample_objects : cfg.n_objects, sample_out);
    if (app.got_subcommand("gen-data")) {
      Config c = cfg;
      if (gen_objects >= 0) c.n_objects = gen_objects;
      if (gen_kmax >= 0) c.k_max = gen_kmax;
      if (gen_max_solutions >= 0) c.max_solutions = gen_max_solutions;
      if (gen_max_leaves >= 0) c.max_leaves = gen_max_leaves;
      return run_gen_data(c, gen_seed, gen_scenes, gen_out, gen_raw, gen_exact, gen_jobs);
    }
    if (app.got_subcommand("train")) {
      Config c = cfg;
      if (train_epochs >= 0) c.epochs = train_epochs;
      if (train_batch >= 0) c.batch_size = train_batch;
      if (train_min_feasible >= 0) c.min_feasible = train_min_feasible;
      if (train_lr > 0.0) c.adam.lr = train_lr;
      if (train_img >= 0) c.img = train_img;
      if (c.img != 8 && c.img != 32 && c.img != 64)
        throw std::runtime_error("--img must be 8, 32 or 64");
      return run_train(c, train_seed, train_data, train_out, train_resume, train_log, c.epochs,
                       c.img, train_rc || c.rc);
    }
    if (app.got_subcommand("plan"))
      return run_plan(cfg, plan_scene, plan_weights, plan_method, plan_goal,
                      plan_kmax >= 0 ? plan_kmax : cfg.k_max, plan_seed,
                      plan_seed_opt->count() > 0);
    if (app.got_subcommand("bench"))
      return run_bench(cfg, bench_seed, bench_scenes >= 0 ? bench_scenes : cfg.bench_scenes,
                       bench_objects >= 0 ? bench_objects : cfg.n_objects, bench_weights,
                       bench_classifier, bench_csv, bench_summary, bench_det, bench_jobs,
                       bench_attempts);
    if (app.got_subcommand("render"))
      return run_render(cfg, render_scene, render_prefix, render_goal, render_object,
                        render_surface);
    if (app.got_subcommand("verify")) return run_verify();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
