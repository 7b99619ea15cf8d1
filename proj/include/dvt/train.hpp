// Training loop glue: render caching, batch assembly, the epoch loop and the
// CSV training log.
//
// Images are a function of (scene, action kind, object) only -- every step of
// every sequence in a scene reuses one of at most 3*n_objects+1 distinct
// renders -- so a per-run cache renders each exactly once and batches carry
// bank indices instead of pixels.
#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dvt/data.hpp"
#include "dvt/net.hpp"
#include "dvt/scene.hpp"

namespace dvt {

/// Renders on miss, keyed by (scene_id, kind, object). Kinds: 0 grasp image,
/// 1 place-on-table, 2 place-on-target, 3 goal image. Pointers stay valid for
/// the cache's lifetime (std::map nodes do not move).
class RenderCache {
 public:
  explicit RenderCache(int img_size) { cfg_.w = cfg_.h = img_size; }

  const Image* action(const Scene& scene, int scene_id, const Action& a) {
    const int kind = a.op == Op::Grasp ? 0 : (a.surface == Surface::Table ? 1 : 2);
    const Key k{scene_id, kind, a.object};
    auto it = imgs_.find(k);
    if (it == imgs_.end())
      it = imgs_.emplace(k, render_action_image(scene, ActionObjects::of(a), cfg_)).first;
    return &it->second;
  }

  const Image* goal(const Scene& scene, int scene_id, const Goal& g) {
    const Key k{scene_id, 3, g.object};
    auto it = imgs_.find(k);
    if (it == imgs_.end())
      it = imgs_.emplace(k, render_goal_image(scene, g, cfg_)).first;
    return &it->second;
  }

  int img_size() const { return cfg_.w; }
  std::size_t size() const { return imgs_.size(); }

 private:
  using Key = std::tuple<int, int, int>;
  RenderConfig cfg_;
  std::map<Key, Image> imgs_;
};

/// Build a NetBatch for the given record indices. The bank holds each
/// distinct image once, in first-encounter order.
template <typename T>
NetBatch<T> assemble_batch(const std::vector<TrainRecord>& set, const std::vector<int>& idx,
                           RenderCache& cache, bool rc) {
  NetBatch<T> b;
  std::map<const Image*, int> bank_of;
  auto intern = [&](const Image* img) {
    auto it = bank_of.find(img);
    if (it != bank_of.end()) return it->second;
    const int slot = static_cast<int>(b.bank.size());
    b.bank.push_back(img);
    bank_of.emplace(img, slot);
    return slot;
  };
  for (int i : idx) {
    const TrainRecord& r = set.at(static_cast<std::size_t>(i));
    typename NetBatch<T>::Seq s;
    for (std::size_t j = 0; j < r.sequence.size(); ++j) {
      const Action& a = r.sequence[j];
      s.act_img.push_back(intern(cache.action(r.scene, r.scene_id, a)));
      s.sym.push_back(a.symbol_index());
      s.labels.push_back(r.labels.at(j));
    }
    if (!rc) s.goal_img = intern(cache.goal(r.scene, r.scene_id, r.goal));
    b.seqs.push_back(std::move(s));
  }
  return b;
}

struct TrainConfig {
  int epochs = 10;
  int start_epoch = 0;  // resume point; batch seeds derive from (seed, epoch)
  int batch_size = 48;
  int min_feasible = 16;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double positives_fraction = 0.0;
};

/// Run epochs [start_epoch, epochs). Batch composition depends only on
/// (seed, epoch), so resuming from a checkpoint at an epoch boundary
/// continues bit-identically to the uninterrupted run.
template <typename T>
std::vector<EpochLog> train(NetParams<T>& p, AdamState<T>& st,
                            const std::vector<TrainRecord>& set, const TrainConfig& cfg,
                            RenderCache& cache,
                            const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (set.empty()) throw std::invalid_argument("train: empty training set");
  if (cache.img_size() != p.hp.img)
    throw std::invalid_argument("train: render cache resolution does not match the network");
  std::vector<EpochLog> logs;
  std::vector<Tensor<T>> g = make_grads(p);
  for (int e = cfg.start_epoch; e < cfg.epochs; ++e) {
    const auto batches = make_batches(set, cfg.batch_size, cfg.min_feasible,
                                      derive_seed(cfg.seed, static_cast<std::uint64_t>(e)));
    double loss_sum = 0.0;
    long positives = 0, labels = 0;
    for (const auto& idx : batches) {
      const NetBatch<T> batch = assemble_batch<T>(set, idx, cache, p.hp.rc);
      for (auto& t : g) t.zero();
      loss_sum += static_cast<double>(loss_and_grad(p, batch, g));
      adam_update(p, g, st, cfg.adam);
      for (const auto& s : batch.seqs)
        for (int y : s.labels) {
          ++labels;
          positives += y;
        }
    }
    EpochLog log;
    log.epoch = e;
    log.mean_loss = loss_sum / static_cast<double>(batches.size());
    log.positives_fraction =
        labels ? static_cast<double>(positives) / static_cast<double>(labels) : 0.0;
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

inline void write_train_log(const std::string& path, const std::vector<EpochLog>& logs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,mean_loss,positives_fraction\n";
  char buf[96];
  for (const EpochLog& l : logs) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", l.epoch, l.mean_loss,
                  l.positives_fraction);
    out << buf;
  }
}

}  // namespace dvt
