#pragma once

// JSON config file for the CLI.  Groups mirror the library config structs;
// unknown keys are rejected so a typo fails loudly instead of silently
// falling back to a default.

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include "dvt/bench.hpp"
#include "dvt/data.hpp"
#include "dvt/train.hpp"

namespace dvt {

struct Config {
  SamplerConfig sampler;
  OptimizerConfig optimizer;
  int img = 64;      // raster side; the network presets accept 8, 32, 64
  bool rc = false;   // reduced-context network variant (classifier method)
  // data generation
  int n_objects = 2;
  int k_max = 6;
  int max_solutions = 4;
  int max_leaves = 1000;
  // training
  int epochs = 10;
  int batch_size = 48;
  int min_feasible = 16;
  AdamConfig adam;
  // search
  double f_thresh0 = 0.5;
  // bench
  int bench_scenes = 20;

  DataGenConfig data_cfg() const {
    DataGenConfig d;
    d.n_objects = n_objects;
    d.k_max = k_max;
    d.max_solutions = max_solutions;
    d.max_leaves = max_leaves;
    d.sampler = sampler;
    d.optimizer = optimizer;
    return d;
  }
  SearchConfig search_cfg() const {
    SearchConfig s;
    s.k_max = k_max;
    s.f_thresh0 = f_thresh0;
    s.optimizer = optimizer;
    return s;
  }
  TrainConfig train_cfg(std::uint64_t seed) const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.min_feasible = min_feasible;
    t.adam = adam;
    t.seed = seed;
    return t;
  }
};

namespace config_detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!j.is_object()) throw std::runtime_error("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (!known) throw std::runtime_error("config: unknown key '" + where + it.key() + "'");
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void load_sampler(const json& j, SamplerConfig& s) {
  reject_unknown(j,
                 {"arm_base_inset", "reach_min", "reach_max", "height_min", "height_max",
                  "box_half_min", "box_half_max", "cyl_radius_min", "cyl_radius_max",
                  "cylinder_fraction", "target_side", "occupier_prob", "clearance",
                  "max_attempts"},
                 "sampler.");
  get(j, "arm_base_inset", s.arm_base_inset);
  get(j, "reach_min", s.reach_min);
  get(j, "reach_max", s.reach_max);
  get(j, "height_min", s.height_min);
  get(j, "height_max", s.height_max);
  get(j, "box_half_min", s.box_half_min);
  get(j, "box_half_max", s.box_half_max);
  get(j, "cyl_radius_min", s.cyl_radius_min);
  get(j, "cyl_radius_max", s.cyl_radius_max);
  get(j, "cylinder_fraction", s.cylinder_fraction);
  get(j, "target_side", s.target_side);
  get(j, "occupier_prob", s.occupier_prob);
  get(j, "clearance", s.clearance);
  get(j, "max_attempts", s.max_attempts);
}

inline void load_optimizer(const json& j, OptimizerConfig& o) {
  reject_unknown(j,
                 {"g_max", "d_wrist", "d_min", "tol", "n_starts", "inner_iters", "al_iters",
                  "mu0", "penalty_growth"},
                 "optimizer.");
  get(j, "g_max", o.g_max);
  get(j, "d_wrist", o.d_wrist);
  get(j, "d_min", o.d_min);
  get(j, "tol", o.tol);
  get(j, "n_starts", o.n_starts);
  get(j, "inner_iters", o.inner_iters);
  get(j, "al_iters", o.al_iters);
  get(j, "mu0", o.mu0);
  get(j, "penalty_growth", o.penalty_growth);
}

}  // namespace config_detail

inline Config parse_config(const json& j) {
  using config_detail::get;
  config_detail::reject_unknown(j,
                                {"sampler", "optimizer", "img", "rc", "n_objects", "k_max",
                                 "max_solutions", "max_leaves", "epochs", "batch_size",
                                 "min_feasible", "lr", "f_thresh0", "bench_scenes"},
                                "");
  Config c;
  if (j.contains("sampler")) config_detail::load_sampler(j.at("sampler"), c.sampler);
  if (j.contains("optimizer")) config_detail::load_optimizer(j.at("optimizer"), c.optimizer);
  get(j, "img", c.img);
  get(j, "rc", c.rc);
  get(j, "n_objects", c.n_objects);
  get(j, "k_max", c.k_max);
  get(j, "max_solutions", c.max_solutions);
  get(j, "max_leaves", c.max_leaves);
  get(j, "epochs", c.epochs);
  get(j, "batch_size", c.batch_size);
  get(j, "min_feasible", c.min_feasible);
  get(j, "lr", c.adam.lr);
  get(j, "f_thresh0", c.f_thresh0);
  get(j, "bench_scenes", c.bench_scenes);

  // Validation: fail on load, not deep inside a run.
  const auto bad = [](const std::string& msg) {
    throw std::runtime_error("config: " + msg);
  };
  if (c.img != 8 && c.img != 32 && c.img != 64) bad("img must be 8, 32 or 64");
  if (c.n_objects < 1) bad("n_objects must be >= 1");
  if (c.k_max < 2) bad("k_max must be >= 2");
  if (c.max_solutions < 1) bad("max_solutions must be >= 1");
  if (c.max_leaves < 1) bad("max_leaves must be >= 1");
  if (c.epochs < 1) bad("epochs must be >= 1");
  if (c.batch_size < 1) bad("batch_size must be >= 1");
  if (c.min_feasible < 0 || c.min_feasible > c.batch_size)
    bad("min_feasible must be in [0, batch_size]");
  if (!(c.adam.lr > 0.0)) bad("lr must be > 0");
  if (!(c.f_thresh0 > 0.0 && c.f_thresh0 < 1.0)) bad("f_thresh0 must be in (0, 1)");
  if (c.bench_scenes < 1) bad("bench_scenes must be >= 1");
  if (!(c.sampler.reach_min > 0.0 && c.sampler.reach_max > c.sampler.reach_min))
    bad("sampler reach range must satisfy 0 < reach_min < reach_max");
  if (!(c.sampler.box_half_min > 0.0 && c.sampler.box_half_max >= c.sampler.box_half_min))
    bad("sampler box range must satisfy 0 < box_half_min <= box_half_max");
  if (c.sampler.cylinder_fraction < 0.0 || c.sampler.cylinder_fraction > 1.0)
    bad("cylinder_fraction must be in [0, 1]");
  if (c.sampler.occupier_prob < 0.0 || c.sampler.occupier_prob > 1.0)
    bad("occupier_prob must be in [0, 1]");
  if (c.optimizer.n_starts < 1 || c.optimizer.inner_iters < 1 || c.optimizer.al_iters < 1)
    bad("optimizer iteration counts must be >= 1");
  if (!(c.optimizer.tol > 0.0)) bad("optimizer tol must be > 0");
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace dvt
