#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "xmod/data/sampler.hpp"
#include "xmod/losses/losses.hpp"
#include "xmod/train/checkpoint.hpp"
#include "xmod/train/run.hpp"

namespace xmod {

struct EssNetTrainConfig {
  int64_t epochs = 100;
  int64_t batch_size = 1;
  double lr_g = 1e-4;  // generators and segmentor
  double lr_d = 2e-4;  // both discriminators
  double beta1 = 0.5;
  double beta2 = 0.999;
  LossWeights weights;
  uint64_t seed = 0;
  bool ablation_no_seg = false;
  AdversarialMode adv_mode = AdversarialMode::CrossEntropy;
  int64_t checkpoint_every = 10;  // epochs
  int64_t keep_last = 3;
  GeneratorConfig gen;
  DiscriminatorConfig disc;

  void validate() const {
    if (epochs < 1) throw ConfigError("essnet.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("essnet.batch_size must be >= 1");
    if (!(lr_g > 0) || !(lr_d > 0)) throw ConfigError("essnet learning rates must be > 0");
    weights.validate();
    gen.validate();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr_g"] = lr_g;
    j["lr_d"] = lr_d;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["seed"] = seed;
    j["ablation_no_seg"] = ablation_no_seg;
    j["adversarial"] = to_string(adv_mode);
    j["checkpoint_every"] = checkpoint_every;
    j["keep_last"] = keep_last;
    j["lambda1"] = weights.lambda1;
    j["lambda2"] = weights.lambda2;
    j["lambda3"] = weights.lambda3;
    j["lambda4"] = weights.lambda4;
    j["lambda5"] = weights.lambda5;
    return j;
  }

  static EssNetTrainConfig from_json(const nlohmann::ordered_json& j) {
    EssNetTrainConfig c;
    c.epochs = j.at("epochs").get<int64_t>();
    c.batch_size = j.at("batch_size").get<int64_t>();
    c.lr_g = j.at("lr_g").get<double>();
    c.lr_d = j.at("lr_d").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.seed = j.at("seed").get<uint64_t>();
    c.ablation_no_seg = j.at("ablation_no_seg").get<bool>();
    c.adv_mode = adversarial_mode_from_string(j.at("adversarial").get<std::string>());
    c.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
    c.keep_last = j.at("keep_last").get<int64_t>();
    c.weights.lambda1 = j.at("lambda1").get<double>();
    c.weights.lambda2 = j.at("lambda2").get<double>();
    c.weights.lambda3 = j.at("lambda3").get<double>();
    c.weights.lambda4 = j.at("lambda4").get<double>();
    c.weights.lambda5 = j.at("lambda5").get<double>();
    return c;
  }
};

// All mutable training state: the five networks, their optimizer slots and
// the step counters. Owned by exactly one training loop.
template <class T = float>
struct EssNetState {
  EssNetTrainConfig cfg;
  ResnetGenerator<T> g1, g2, seg;
  PatchDiscriminator<T> d1, d2;
  Adam<T> opt_g1, opt_g2, opt_seg, opt_d1, opt_d2;
  int64_t epoch = 0;
  int64_t global_step = 0;

  explicit EssNetState(const EssNetTrainConfig& config)
      : cfg(config),
        g1(config.gen, make_rng(config.seed, "init/g1")),
        g2(config.gen, make_rng(config.seed, "init/g2")),
        seg(segmentor_config(config.gen), make_rng(config.seed, "init/s")),
        d1(config.disc, make_rng(config.seed, "init/d1")),
        d2(config.disc, make_rng(config.seed, "init/d2")) {
    cfg.validate();
    opt_g1 = Adam<T>(g1.store(), static_cast<T>(cfg.lr_g), static_cast<T>(cfg.beta1),
                     static_cast<T>(cfg.beta2));
    opt_g2 = Adam<T>(g2.store(), static_cast<T>(cfg.lr_g), static_cast<T>(cfg.beta1),
                     static_cast<T>(cfg.beta2));
    opt_seg = Adam<T>(seg.store(), static_cast<T>(cfg.lr_g), static_cast<T>(cfg.beta1),
                      static_cast<T>(cfg.beta2));
    opt_d1 = Adam<T>(d1.store(), static_cast<T>(cfg.lr_d), static_cast<T>(cfg.beta1),
                     static_cast<T>(cfg.beta2));
    opt_d2 = Adam<T>(d2.store(), static_cast<T>(cfg.lr_d), static_cast<T>(cfg.beta1),
                     static_cast<T>(cfg.beta2));
  }
};

namespace detail {

template <class T>
NodePtr<T> stack_batch(const std::vector<ImageSlice>& slices) {
  const int64_t n = static_cast<int64_t>(slices.size());
  const int64_t h = slices[0].height(), w = slices[0].width();
  Tensor<T> batch({n, 1, h, w});
  for (int64_t i = 0; i < n; ++i) {
    if (slices[i].height() != h || slices[i].width() != w)
      throw DataError("batch mixes slice sizes; canonicalize datasets to one resolution");
    for (int64_t k = 0; k < h * w; ++k)
      batch[i * h * w + k] = static_cast<T>(slices[i].pixels[k]);
  }
  return make_leaf<T>(std::move(batch), false);
}

template <class T>
Tensor<T> stack_masks(const std::vector<ImageSlice>& slices, bool require_all) {
  const int64_t n = static_cast<int64_t>(slices.size());
  const int64_t h = slices[0].height(), w = slices[0].width();
  Tensor<T> masks({n, h, w});
  for (int64_t i = 0; i < n; ++i) {
    if (!slices[i].mask) {
      if (require_all)
        throw DataError("slice " + slices[i].id + " has no mask; the segmentation branch needs "
                        "A-side ground truth (use ablation_no_seg to train without it)");
      continue;
    }
    for (int64_t k = 0; k < h * w; ++k)
      masks[i * h * w + k] = static_cast<T>((*slices[i].mask)[k]);
  }
  return masks;
}

}  // namespace detail

// One optimization step over an unpaired batch. Path A: x_A -> G1 -> fake_B
// -> {G2 -> rec_A, S -> seg logits}. Path B: y_B -> G2 -> fake_A -> G1 ->
// rec_B. Generator-side parameters update from the weighted total first,
// then D1 on (real y_B vs detached fake_B), then D2 on (real x_A vs
// detached fake_A).
template <class T>
LossBreakdown essnet_training_step(EssNetState<T>& st, const std::vector<ImageSlice>& batch_a,
                                   const std::vector<ImageSlice>& batch_b) {
  const bool seg_active = !st.cfg.ablation_no_seg && st.cfg.weights.lambda5 != 0.0;
  if (!st.cfg.ablation_no_seg)
    for (const auto& s : batch_a)
      if (!s.mask)
        throw DataError("slice " + s.id + " has no mask; the segmentation branch needs A-side "
                        "ground truth (use ablation_no_seg to train without it)");

  auto x_a = detail::stack_batch<T>(batch_a);
  auto y_b = detail::stack_batch<T>(batch_b);

  st.g1.store().zero_grad();
  st.g2.store().zero_grad();
  st.seg.store().zero_grad();

  auto fake_b = st.g1.forward(x_a);
  auto rec_a = st.g2.forward(fake_b);
  auto fake_a = st.g2.forward(y_b);
  auto rec_b = st.g1.forward(fake_a);

  auto adv_a2b = generator_adversarial_loss(st.d1.forward(fake_b), st.cfg.adv_mode);
  auto adv_b2a = generator_adversarial_loss(st.d2.forward(fake_a), st.cfg.adv_mode);
  auto cyc_a = cycle_loss(x_a, rec_a);
  auto cyc_b = cycle_loss(y_b, rec_b);

  std::optional<NodePtr<T>> seg_loss_node;
  if (seg_active) {
    auto masks = detail::stack_masks<T>(batch_a, true);
    seg_loss_node = segmentation_loss(st.seg.forward(fake_b), masks);
  }

  auto total_node = total_loss_node(adv_a2b, adv_b2a, cyc_a, cyc_b,
                                    seg_active ? &*seg_loss_node : nullptr, st.cfg.weights);
  backward(total_node);
  st.opt_g1.step(st.g1.store());
  st.opt_g2.step(st.g2.store());
  if (!st.cfg.ablation_no_seg) st.opt_seg.step(st.seg.store());

  // Discriminators train on detached fakes; generator weights are not
  // touched by these passes.
  st.d1.store().zero_grad();
  auto d1_loss_node = discriminator_loss(st.d1.forward(y_b), st.d1.forward(detach(fake_b)),
                                         st.cfg.adv_mode);
  backward(d1_loss_node);
  st.opt_d1.step(st.d1.store());

  st.d2.store().zero_grad();
  auto d2_loss_node = discriminator_loss(st.d2.forward(x_a), st.d2.forward(detach(fake_a)),
                                         st.cfg.adv_mode);
  backward(d2_loss_node);
  st.opt_d2.step(st.d2.store());

  LossBreakdown out;
  out.adv_A2B = static_cast<double>(adv_a2b->value[0]);
  out.adv_B2A = static_cast<double>(adv_b2a->value[0]);
  out.cycle_A = static_cast<double>(cyc_a->value[0]);
  out.cycle_B = static_cast<double>(cyc_b->value[0]);
  out.seg = seg_active ? static_cast<double>((*seg_loss_node)->value[0]) : 0.0;
  out.total = total_loss(out, st.cfg.weights);
  out.d1_loss = static_cast<double>(d1_loss_node->value[0]);
  out.d2_loss = static_cast<double>(d2_loss_node->value[0]);
  ++st.global_step;
  return out;
}

template <class T>
void save_essnet_checkpoint(const EssNetState<T>& st, const UnpairedSampler* sampler,
                            const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = kVersion;
  j["kind"] = "essnet";
  j["epoch"] = st.epoch;
  j["global_step"] = st.global_step;
  j["config"] = st.cfg.to_json();
  j["gen_cfg"] = ckpt::generator_cfg_to_json(st.cfg.gen);
  j["disc_cfg"] = ckpt::discriminator_cfg_to_json(st.cfg.disc);
  j["adam_steps"] = {{"g1", st.opt_g1.step_count()},
                     {"g2", st.opt_g2.step_count()},
                     {"s", st.opt_seg.step_count()},
                     {"d1", st.opt_d1.step_count()},
                     {"d2", st.opt_d2.step_count()}};
  if (sampler) j["sampler"] = sampler->state_to_json();

  TensorBlob<T> weights;
  ckpt::store_params(weights, st.g1.store(), "g1");
  ckpt::store_params(weights, st.g2.store(), "g2");
  ckpt::store_params(weights, st.seg.store(), "s");
  ckpt::store_params(weights, st.d1.store(), "d1");
  ckpt::store_params(weights, st.d2.store(), "d2");
  weights.save(dir / "weights.bin");

  TensorBlob<T> optim;
  ckpt::store_adam(optim, st.opt_g1, st.g1.store(), "adam.g1");
  ckpt::store_adam(optim, st.opt_g2, st.g2.store(), "adam.g2");
  ckpt::store_adam(optim, st.opt_seg, st.seg.store(), "adam.s");
  ckpt::store_adam(optim, st.opt_d1, st.d1.store(), "adam.d1");
  ckpt::store_adam(optim, st.opt_d2, st.d2.store(), "adam.d2");
  optim.save(dir / "optim.bin");

  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write checkpoint manifest under " + dir.string());
  out << j.dump(2) << "\n";
}

struct EssNetCheckpoint {
  nlohmann::ordered_json manifest;
  EssNetTrainConfig cfg;
};

inline EssNetCheckpoint read_essnet_checkpoint_manifest(const fs::path& dir) {
  EssNetCheckpoint c;
  c.manifest = ckpt::read_checkpoint_manifest(dir, "essnet");
  c.cfg = EssNetTrainConfig::from_json(c.manifest.at("config"));
  c.cfg.gen = ckpt::generator_cfg_from_json(c.manifest.at("gen_cfg"));
  c.cfg.disc = ckpt::discriminator_cfg_from_json(c.manifest.at("disc_cfg"));
  return c;
}

template <class T = float>
EssNetState<T> load_essnet_checkpoint(const fs::path& dir,
                                      nlohmann::ordered_json* sampler_state = nullptr) {
  auto c = read_essnet_checkpoint_manifest(dir);
  EssNetState<T> st(c.cfg);
  st.epoch = c.manifest.at("epoch").get<int64_t>();
  st.global_step = c.manifest.at("global_step").get<int64_t>();

  auto weights = TensorBlob<T>::load(dir / "weights.bin");
  ckpt::load_params(weights, st.g1.store(), "g1");
  ckpt::load_params(weights, st.g2.store(), "g2");
  ckpt::load_params(weights, st.seg.store(), "s");
  ckpt::load_params(weights, st.d1.store(), "d1");
  ckpt::load_params(weights, st.d2.store(), "d2");

  auto optim = TensorBlob<T>::load(dir / "optim.bin");
  ckpt::load_adam(optim, st.opt_g1, st.g1.store(), "adam.g1");
  ckpt::load_adam(optim, st.opt_g2, st.g2.store(), "adam.g2");
  ckpt::load_adam(optim, st.opt_seg, st.seg.store(), "adam.s");
  ckpt::load_adam(optim, st.opt_d1, st.d1.store(), "adam.d1");
  ckpt::load_adam(optim, st.opt_d2, st.d2.store(), "adam.d2");
  const auto& steps = c.manifest.at("adam_steps");
  st.opt_g1.set_step_count(steps.at("g1").get<int64_t>());
  st.opt_g2.set_step_count(steps.at("g2").get<int64_t>());
  st.opt_seg.set_step_count(steps.at("s").get<int64_t>());
  st.opt_d1.set_step_count(steps.at("d1").get<int64_t>());
  st.opt_d2.set_step_count(steps.at("d2").get<int64_t>());

  if (sampler_state && c.manifest.contains("sampler")) *sampler_state = c.manifest.at("sampler");
  return st;
}

// Full stage-1 loop. Epoch length is set by the A side (the supervised
// modality): ceil(eligible_A / batch). Resumes from <out>/checkpoints/last
// when present.
template <class T = float>
TrainingRun train_essnet(const EssNetTrainConfig& cfg, const DatasetManifest& data_a,
                         const DatasetManifest& data_b, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir / "checkpoints");
  const fs::path last_dir = out_dir / "checkpoints" / "last";

  std::optional<EssNetState<T>> state;
  UnpairedSampler sampler(&data_a, &data_b, cfg.batch_size, cfg.seed);
  bool resumed = false;
  if (fs::exists(last_dir / "manifest.json")) {
    nlohmann::ordered_json sampler_state;
    state.emplace(load_essnet_checkpoint<T>(last_dir, &sampler_state));
    // the epoch horizon may be extended on resume; everything else must match
    auto stored = state->cfg.to_json();
    auto wanted = cfg.to_json();
    stored.erase("epochs");
    wanted.erase("epochs");
    if (stored.dump() != wanted.dump())
      throw ConfigError("existing checkpoint under " + out_dir.string() +
                        " was trained with a different config; refusing to resume");
    state->cfg.epochs = cfg.epochs;
    if (!sampler_state.is_null()) sampler.restore(sampler_state);
    resumed = true;
  } else {
    state.emplace(cfg);
  }
  EssNetState<T>& st = *state;

  const int64_t steps_per_epoch =
      (sampler.eligible_a() + cfg.batch_size - 1) / cfg.batch_size;

  TrainingRun run;
  run.run_id = "essnet";
  run.config = cfg.to_json();
  run.loss_csv = out_dir / "loss_log.csv";
  run.steps_per_epoch = steps_per_epoch;

  LossCsv csv;
  csv.open(run.loss_csv, "step,d1,d2,adv_A2B,adv_B2A,cyc_A,cyc_B,seg,total", resumed);

  const auto t_start = std::chrono::steady_clock::now();
  for (int64_t epoch = st.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      auto [batch_a, batch_b] = sampler.next();
      auto parts = essnet_training_step(st, batch_a, batch_b);
      if (!std::isfinite(parts.total) || !std::isfinite(parts.d1_loss) ||
          !std::isfinite(parts.d2_loss))
        throw TrainingAbort("non-finite loss at step " + std::to_string(st.global_step) +
                            "; last-good checkpoint retained under " + last_dir.string());
      csv.row(st.global_step, parts.d1_loss, parts.d2_loss, parts.adv_A2B, parts.adv_B2A,
              parts.cycle_A, parts.cycle_B, parts.seg, parts.total);
    }
    st.epoch = epoch + 1;
    run.seconds_per_epoch.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count());

    if (st.epoch % cfg.checkpoint_every == 0 || st.epoch == cfg.epochs) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04lld", static_cast<long long>(st.epoch));
      const fs::path cp = out_dir / "checkpoints" / name;
      save_essnet_checkpoint(st, &sampler, cp);
      save_essnet_checkpoint(st, &sampler, last_dir);
      run.checkpoints.push_back(cp);
      // keep-last retention on cadence checkpoints
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
