#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "xmod/data/manifest.hpp"
#include "xmod/losses/losses.hpp"
#include "xmod/train/checkpoint.hpp"
#include "xmod/train/run.hpp"

namespace xmod {

struct UNetTrainConfig {
  int64_t epochs = 300;
  int64_t batch_size = 2;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  uint64_t seed = 0;
  int64_t checkpoint_every = 50;  // epochs
  int64_t keep_last = 3;
  UNetConfig arch;

  void validate() const {
    if (epochs < 1) throw ConfigError("unet.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("unet.batch_size must be >= 1");
    if (!(lr > 0)) throw ConfigError("unet.lr must be > 0");
    arch.validate();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["seed"] = seed;
    j["checkpoint_every"] = checkpoint_every;
    j["keep_last"] = keep_last;
    return j;
  }

  static UNetTrainConfig from_json(const nlohmann::ordered_json& j) {
    UNetTrainConfig c;
    c.epochs = j.at("epochs").get<int64_t>();
    c.batch_size = j.at("batch_size").get<int64_t>();
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.seed = j.at("seed").get<uint64_t>();
    c.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
    c.keep_last = j.at("keep_last").get<int64_t>();
    return c;
  }
};

template <class T = float>
struct UNetState {
  UNetTrainConfig cfg;
  UNet<T> net;
  Adam<T> opt;
  int64_t epoch = 0;
  int64_t global_step = 0;

  explicit UNetState(const UNetTrainConfig& config)
      : cfg(config), net(config.arch, make_rng(config.seed, "init/unet")) {
    cfg.validate();
    opt = Adam<T>(net.store(), static_cast<T>(cfg.lr), static_cast<T>(cfg.beta1),
                  static_cast<T>(cfg.beta2));
  }
};

template <class T>
void save_unet_checkpoint(UNetState<T>& st, const std::string& rng_state, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = kVersion;
  j["kind"] = "unet";
  j["epoch"] = st.epoch;
  j["global_step"] = st.global_step;
  j["config"] = st.cfg.to_json();
  j["unet_cfg"] = ckpt::unet_cfg_to_json(st.cfg.arch);
  j["adam_step"] = st.opt.step_count();
  if (!rng_state.empty()) j["shuffle_rng"] = rng_state;

  TensorBlob<T> weights;
  ckpt::store_params(weights, st.net.store(), "unet");
  weights.save(dir / "weights.bin");
  TensorBlob<T> optim;
  ckpt::store_adam(optim, st.opt, st.net.store(), "adam.unet");
  optim.save(dir / "optim.bin");

  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write checkpoint manifest under " + dir.string());
  out << j.dump(2) << "\n";
}

template <class T = float>
UNetState<T> load_unet_checkpoint(const fs::path& dir, std::string* rng_state = nullptr) {
  auto manifest = ckpt::read_checkpoint_manifest(dir, "unet");
  UNetTrainConfig cfg = UNetTrainConfig::from_json(manifest.at("config"));
  cfg.arch = ckpt::unet_cfg_from_json(manifest.at("unet_cfg"));
  UNetState<T> st(cfg);
  st.epoch = manifest.at("epoch").get<int64_t>();
  st.global_step = manifest.at("global_step").get<int64_t>();
  auto weights = TensorBlob<T>::load(dir / "weights.bin");
  ckpt::load_params(weights, st.net.store(), "unet");
  auto optim = TensorBlob<T>::load(dir / "optim.bin");
  ckpt::load_adam(optim, st.opt, st.net.store(), "adam.unet");
  st.opt.set_step_count(manifest.at("adam_step").get<int64_t>());
  if (rng_state && manifest.contains("shuffle_rng"))
    *rng_state = manifest.at("shuffle_rng").get<std::string>();
  return st;
}

namespace detail {

struct PoolEntry {
  const DatasetManifest* manifest;
  const SliceEntry* entry;
};

// Real liver-visible entries plus the first `synthetic_take` synthetic ones
// in manifest order.
inline std::vector<PoolEntry> unet_training_pool(const DatasetManifest& real,
                                                 const DatasetManifest* synthetic,
                                                 int64_t synthetic_take) {
  std::vector<PoolEntry> pool;
  for (const auto& e : real.entries)
    if (e.liver_visible) pool.push_back({&real, &e});
  if (synthetic && synthetic_take > 0) {
    int64_t taken = 0;
    for (const auto& e : synthetic->entries) {
      if (!e.liver_visible) continue;
      if (taken >= synthetic_take) break;
      pool.push_back({synthetic, &e});
      ++taken;
    }
    if (taken < synthetic_take)
      throw DataError("synthetic manifest has only " + std::to_string(taken) +
                      " usable entries, requested take " + std::to_string(synthetic_take));
  }
  for (const auto& p : pool)
    if (!p.entry->mask_path)
      throw DataError("training entry " + p.entry->id + " has no mask");
  return pool;
}

}  // namespace detail

// Stage-2 supervised training: per-pixel binary cross-entropy of the
// sigmoid head against {0,1} masks. steps_per_epoch = ceil(n / batch).
template <class T = float>
TrainingRun train_unet(const UNetTrainConfig& cfg, const DatasetManifest& real,
                       const DatasetManifest* synthetic, int64_t synthetic_take,
                       const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir / "checkpoints");
  const fs::path last_dir = out_dir / "checkpoints" / "last";

  auto pool = detail::unet_training_pool(real, synthetic, synthetic_take);
  const int64_t n = static_cast<int64_t>(pool.size());
  const int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;

  std::optional<UNetState<T>> state;
  Rng shuffle_rng = make_rng(cfg.seed, "unet/shuffle");
  bool resumed = false;
  if (fs::exists(last_dir / "manifest.json")) {
    std::string rng_state;
    state.emplace(load_unet_checkpoint<T>(last_dir, &rng_state));
    auto stored = state->cfg.to_json();
    auto wanted = cfg.to_json();
    stored.erase("epochs");
    wanted.erase("epochs");
    if (stored.dump() != wanted.dump() ||
        ckpt::unet_cfg_to_json(state->cfg.arch).dump() != ckpt::unet_cfg_to_json(cfg.arch).dump())
      throw ConfigError("existing checkpoint under " + out_dir.string() +
                        " was trained with a different config; refusing to resume");
    state->cfg.epochs = cfg.epochs;
    if (!rng_state.empty()) shuffle_rng = deserialize_rng(rng_state);
    resumed = true;
  } else {
    state.emplace(cfg);
  }
  UNetState<T>& st = *state;

  TrainingRun run;
  run.run_id = "unet";
  run.config = cfg.to_json();
  run.config["images"] = n;
  run.loss_csv = out_dir / "loss_log.csv";
  run.steps_per_epoch = steps_per_epoch;

  LossCsv csv;
  csv.open(run.loss_csv, "step,bce", resumed);

  std::vector<size_t> order(pool.size());
  const auto t_start = std::chrono::steady_clock::now();
  for (int64_t epoch = st.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      const int64_t lo = s * cfg.batch_size;
      const int64_t hi = std::min<int64_t>(lo + cfg.batch_size, n);
      std::vector<ImageSlice> slices;
      for (int64_t k = lo; k < hi; ++k)
        slices.push_back(load_slice(*pool[order[k]].manifest, *pool[order[k]].entry));

      const int64_t bsz = hi - lo;
      const int64_t h = slices[0].height(), w = slices[0].width();
      Tensor<T> images({bsz, 1, h, w});
      Tensor<T> targets({bsz, 1, h, w});
      for (int64_t b = 0; b < bsz; ++b) {
        if (slices[b].height() != h || slices[b].width() != w)
          throw DataError("batch mixes slice sizes; canonicalize datasets to one resolution");
        for (int64_t k = 0; k < h * w; ++k) {
          images[b * h * w + k] = static_cast<T>(slices[b].pixels[k]);
          targets[b * h * w + k] = static_cast<T>((*slices[b].mask)[k]);
        }
      }

      st.net.store().zero_grad();
      auto logits = st.net.forward_logits(make_leaf<T>(std::move(images), false));
      auto loss = bce_with_logits_mean(logits, targets);
      backward(loss);
      st.opt.step(st.net.store());
      ++st.global_step;

      const double loss_v = static_cast<double>(loss->value[0]);
      if (!std::isfinite(loss_v))
        throw TrainingAbort("non-finite loss at step " + std::to_string(st.global_step) +
                            "; last-good checkpoint retained under " + last_dir.string());
      csv.row(st.global_step, loss_v);
    }
    st.epoch = epoch + 1;
    run.seconds_per_epoch.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count());

    if (st.epoch % cfg.checkpoint_every == 0 || st.epoch == cfg.epochs) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04lld", static_cast<long long>(st.epoch));
      const fs::path cp = out_dir / "checkpoints" / name;
      save_unet_checkpoint(st, serialize_rng(shuffle_rng), cp);
      save_unet_checkpoint(st, serialize_rng(shuffle_rng), last_dir);
      run.checkpoints.push_back(cp);
      std::vector<fs::path> cps;
      for (const auto& e : fs::directory_iterator(out_dir / "checkpoints"))
        if (e.is_directory() && e.path().filename().string().rfind("epoch_", 0) == 0)
          cps.push_back(e.path());
      std::sort(cps.begin(), cps.end());
      while (static_cast<int64_t>(cps.size()) > cfg.keep_last) {
        fs::remove_all(cps.front());
        cps.erase(cps.begin());
      }
    }
  }
  run.total_steps = st.global_step;
  run.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  run.save(out_dir / "run.json");
  return run;
}

}  // namespace xmod
