#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "xmod/data/phantom.hpp"
#include "xmod/eval/evaluate.hpp"
#include "xmod/train/essnet.hpp"
#include "xmod/train/synthesize.hpp"
#include "xmod/train/unet_train.hpp"

using namespace xmod;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("xmod_train_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// small nets on small slices keep these loops fast
EssNetTrainConfig tiny_essnet_cfg(uint64_t seed, int64_t width = 8) {
  EssNetTrainConfig cfg;
  cfg.gen.base_width = width;
  cfg.disc.base_width = width;
  cfg.seed = seed;
  cfg.epochs = 1;
  cfg.checkpoint_every = 1;
  return cfg;
}

std::pair<DatasetManifest, DatasetManifest> tiny_phantoms(const fs::path& root, int64_t n,
                                                          int64_t size, uint64_t seed) {
  PhantomSpec sa;
  sa.n_slices = n;
  sa.image_size = size;
  auto ma = generate_phantom_dataset(sa, seed, root / "a").manifest;
  PhantomSpec sb = sa;
  sb.modality_contrast = PhantomSpec::Contrast::B_style;
  auto mb = generate_phantom_dataset(sb, seed + 1, root / "b").manifest;
  return {std::move(ma), std::move(mb)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <class Net>
std::vector<float> weights_snapshot(const Net& net) {
  std::vector<float> out;
  for (const auto& p : net.store().params())
    out.insert(out.end(), p.node->value.vec().begin(), p.node->value.vec().end());
  return out;
}

}  // namespace

TEST_CASE("identical seeded states produce identical steps") {
  TempDir tmp("det");
  auto [ma, mb] = tiny_phantoms(tmp.path, 3, 32, 100);

  auto cfg = tiny_essnet_cfg(7);
  EssNetState<float> s1(cfg), s2(cfg);
  UnpairedSampler sam1(&ma, &mb, 1, 7), sam2(&ma, &mb, 1, 7);
  for (int step = 0; step < 2; ++step) {
    auto [a1, b1] = sam1.next();
    auto [a2, b2] = sam2.next();
    auto p1 = essnet_training_step(s1, a1, b1);
    auto p2 = essnet_training_step(s2, a2, b2);
    REQUIRE(p1.total == p2.total);
    REQUIRE(p1.cycle_A == p2.cycle_A);
    REQUIRE(p1.d1_loss == p2.d1_loss);
  }
  REQUIRE(weights_snapshot(s1.g1) == weights_snapshot(s2.g1));
  REQUIRE(weights_snapshot(s1.d2) == weights_snapshot(s2.d2));
}

TEST_CASE("breakdown total is the exact weighted sum") {
  TempDir tmp("eq6");
  auto [ma, mb] = tiny_phantoms(tmp.path, 2, 32, 200);
  auto cfg = tiny_essnet_cfg(8);
  cfg.weights.lambda3 = 7.5;
  cfg.weights.lambda5 = 0.25;
  EssNetState<float> st(cfg);
  UnpairedSampler sampler(&ma, &mb, 1, 8);
  for (int step = 0; step < 3; ++step) {
    auto [a, b] = sampler.next();
    auto p = essnet_training_step(st, a, b);
    const double expected = cfg.weights.lambda1 * p.adv_A2B + cfg.weights.lambda2 * p.adv_B2A +
                            cfg.weights.lambda3 * p.cycle_A + cfg.weights.lambda4 * p.cycle_B +
                            cfg.weights.lambda5 * p.seg;
    REQUIRE_THAT(p.total, Catch::Matchers::WithinRel(expected, 1e-9));
  }
}

TEST_CASE("discriminator-only updates leave generators untouched") {
  auto rng = make_rng(300, "detach");
  GeneratorConfig gcfg;
  gcfg.base_width = 8;
  DiscriminatorConfig dcfg;
  dcfg.base_width = 8;
  ResnetGenerator<float> g(gcfg, make_rng(1, "g"));
  PatchDiscriminator<float> d(dcfg, make_rng(2, "d"));

  Tensor<float> x({1, 1, 32, 32});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(u(rng));
  Tensor<float> real = x;

  auto before = weights_snapshot(g);
  auto fake = g.forward(make_leaf<float>(x, false));
  d.store().zero_grad();
  auto loss = discriminator_loss(d.forward(make_leaf<float>(real, false)),
                                 d.forward(detach(fake)));
  backward(loss);
  // no gradient reached the generator
  for (const auto& p : g.store().params()) REQUIRE_FALSE(p.node->grad_alloced);
  Adam<float> opt(d.store(), 2e-4f, 0.5f, 0.999f);
  opt.step(d.store());
  REQUIRE(weights_snapshot(g) == before);
}

TEST_CASE("ablation mode is bitwise-identical to lambda5=0 and leaves S untouched") {
  TempDir tmp("ablation");
  auto [ma, mb] = tiny_phantoms(tmp.path, 3, 32, 300);

  auto cfg_ab = tiny_essnet_cfg(9, 16);
  cfg_ab.ablation_no_seg = true;
  auto cfg_l5 = tiny_essnet_cfg(9, 16);
  cfg_l5.weights.lambda5 = 0.0;

  EssNetState<float> st_ab(cfg_ab), st_l5(cfg_l5);
  auto s_init = weights_snapshot(st_ab.seg);
  UnpairedSampler sam1(&ma, &mb, 1, 9), sam2(&ma, &mb, 1, 9);
  for (int step = 0; step < 10; ++step) {
    auto [a1, b1] = sam1.next();
    auto [a2, b2] = sam2.next();
    auto p1 = essnet_training_step(st_ab, a1, b1);
    auto p2 = essnet_training_step(st_l5, a2, b2);
    REQUIRE(p1.seg == 0.0);
    REQUIRE(p2.seg == 0.0);
  }
  REQUIRE(weights_snapshot(st_ab.g1) == weights_snapshot(st_l5.g1));
  REQUIRE(weights_snapshot(st_ab.g2) == weights_snapshot(st_l5.g2));
  REQUIRE(weights_snapshot(st_ab.d1) == weights_snapshot(st_l5.d1));
  REQUIRE(weights_snapshot(st_ab.d2) == weights_snapshot(st_l5.d2));
  REQUIRE(weights_snapshot(st_ab.seg) == s_init);
  REQUIRE(weights_snapshot(st_l5.seg) == s_init);
}

TEST_CASE("missing A-side mask errors unless ablation is on") {
  TempDir tmp("nomask");
  auto [ma, mb] = tiny_phantoms(tmp.path, 2, 32, 400);
  auto cfg = tiny_essnet_cfg(10);
  EssNetState<float> st(cfg);
  UnpairedSampler sampler(&ma, &mb, 1, 10);
  auto [a, b] = sampler.next();
  a[0].mask.reset();
  REQUIRE_THROWS_WITH(essnet_training_step(st, a, b),
                      Catch::Matchers::ContainsSubstring("no mask"));

  auto cfg_ab = tiny_essnet_cfg(10);
  cfg_ab.ablation_no_seg = true;
  EssNetState<float> st_ab(cfg_ab);
  REQUIRE_NOTHROW(essnet_training_step(st_ab, a, b));
}

TEST_CASE("train_essnet writes a complete strictly-increasing loss log") {
  TempDir tmp("log");
  auto [ma, mb] = tiny_phantoms(tmp.path, 3, 32, 500);
  auto cfg = tiny_essnet_cfg(11);
  cfg.epochs = 2;
  auto run = train_essnet<float>(cfg, ma, mb, tmp.path / "out");
  REQUIRE(run.steps_per_epoch == 3);
  REQUIRE(run.total_steps == 6);

  std::ifstream in(run.loss_csv);
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "step,d1,d2,adv_A2B,adv_B2A,cyc_A,cyc_B,seg,total");
  int64_t rows = 0, prev = 0;
  while (std::getline(in, line)) {
    ++rows;
    const int64_t step = std::stoll(line.substr(0, line.find(',')));
    REQUIRE(step > prev);
    prev = step;
  }
  REQUIRE(rows == cfg.epochs * run.steps_per_epoch);
  REQUIRE(fs::exists(tmp.path / "out" / "run.json"));
}

TEST_CASE("essnet checkpoint round-trip reproduces forward outputs bit-exactly") {
  TempDir tmp("ckpt");
  auto [ma, mb] = tiny_phantoms(tmp.path, 2, 32, 600);
  auto cfg = tiny_essnet_cfg(12);
  EssNetState<float> st(cfg);
  UnpairedSampler sampler(&ma, &mb, 1, 12);
  auto [a, b] = sampler.next();
  essnet_training_step(st, a, b);

  auto probe = load_slice(ma, ma.entries[0]);
  Tensor<float> input({1, 1, probe.height(), probe.width()});
  for (int64_t i = 0; i < input.numel(); ++i) input[i] = probe.pixels[i];
  auto before = st.g1.forward(make_leaf<float>(input, false));

  save_essnet_checkpoint(st, &sampler, tmp.path / "cp");
  auto restored = load_essnet_checkpoint<float>(tmp.path / "cp");
  auto after = restored.g1.forward(make_leaf<float>(input, false));
  REQUIRE(before->value.vec() == after->value.vec());
  REQUIRE(restored.global_step == st.global_step);
}

TEST_CASE("checkpoint with mismatched architecture refuses to load") {
  TempDir tmp("mismatch");
  auto [ma, mb] = tiny_phantoms(tmp.path, 2, 32, 700);
  auto cfg = tiny_essnet_cfg(13);
  EssNetState<float> st(cfg);
  save_essnet_checkpoint(st, nullptr, tmp.path / "cp");

  // tamper the stored width; the weight blob no longer matches
  auto manifest = ckpt::read_checkpoint_manifest(tmp.path / "cp", "essnet");
  manifest["gen_cfg"]["base_width"] = 16;
  std::ofstream(tmp.path / "cp" / "manifest.json") << manifest.dump(2);
  REQUIRE_THROWS_WITH(load_essnet_checkpoint<float>(tmp.path / "cp"),
                      Catch::Matchers::ContainsSubstring("mismatch"));

  // schema version gate
  manifest["gen_cfg"]["base_width"] = 8;
  manifest["schema_version"] = 999;
  std::ofstream(tmp.path / "cp" / "manifest.json") << manifest.dump(2);
  REQUIRE_THROWS_WITH(load_essnet_checkpoint<float>(tmp.path / "cp"),
                      Catch::Matchers::ContainsSubstring("schema_version"));
}

TEST_CASE("resume from checkpoint equals uninterrupted training") {
  TempDir tmp("resume");
  auto [ma, mb] = tiny_phantoms(tmp.path, 2, 32, 800);

  auto cfg2 = tiny_essnet_cfg(14);
  cfg2.epochs = 2;
  train_essnet<float>(cfg2, ma, mb, tmp.path / "uninterrupted");

  auto cfg1 = tiny_essnet_cfg(14);
  cfg1.epochs = 1;
  train_essnet<float>(cfg1, ma, mb, tmp.path / "resumed");
  train_essnet<float>(cfg2, ma, mb, tmp.path / "resumed");  // extends to epoch 2

  REQUIRE(slurp(tmp.path / "uninterrupted" / "loss_log.csv") ==
          slurp(tmp.path / "resumed" / "loss_log.csv"));
}

TEST_CASE("synthesize emits one canonical B slice per liver-visible A entry") {
  TempDir tmp("synth");
  auto [ma, mb] = tiny_phantoms(tmp.path, 3, 32, 900);
  auto cfg = tiny_essnet_cfg(15);
  EssNetState<float> st(cfg);
  save_essnet_checkpoint(st, nullptr, tmp.path / "cp");

  auto result = synthesize<float>(tmp.path / "cp", ma, tmp.path / "synth");
  REQUIRE(result.manifest.entries.size() ==
          static_cast<size_t>(ma.liver_visible_count()));
  REQUIRE(result.manifest.modality == Modality::B_MR);
  for (const auto& e : result.manifest.entries) {
    REQUIRE(e.synthetic);
    REQUIRE(e.liver_visible);
    REQUIRE(e.mask_path.has_value());
  }
  validate_manifest(result.manifest, true);

  // inherited masks equal the source masks
  auto src = load_slice(ma, ma.entries[0]);
  auto syn = load_slice(result.manifest, result.manifest.entries[0]);
  REQUIRE(syn.mask->vec() == src.mask->vec());
  // tanh output stays inside [-1, 1] and survives 16-bit export
  for (int64_t i = 0; i < syn.pixels.numel(); ++i) {
    REQUIRE(syn.pixels[i] >= -1.0f);
    REQUIRE(syn.pixels[i] <= 1.0f);
  }
}

TEST_CASE("unet training pool mixes real and synthetic with take semantics") {
  TempDir tmp("pool");
  auto [ma, mb] = tiny_phantoms(tmp.path, 5, 16, 1000);

  auto pool = detail::unet_training_pool(mb, &ma, 3);
  REQUIRE(pool.size() == 8);
  REQUIRE_THROWS_WITH(detail::unet_training_pool(mb, &ma, 99),
                      Catch::Matchers::ContainsSubstring("requested take"));

  auto broken = mb;
  broken.entries[0].mask_path.reset();
  broken.entries[0].liver_visible = true;
  REQUIRE_THROWS_WITH(detail::unet_training_pool(broken, nullptr, 0),
                      Catch::Matchers::ContainsSubstring("no mask"));
}

TEST_CASE("train_unet runs, logs and resumes deterministically") {
  TempDir tmp("unet");
  PhantomSpec sb;
  sb.n_slices = 5;
  sb.image_size = 16;
  sb.modality_contrast = PhantomSpec::Contrast::B_style;
  auto mb = generate_phantom_dataset(sb, 1100, tmp.path / "b").manifest;

  UNetTrainConfig cfg;
  cfg.arch.base_width = 4;
  cfg.arch.depth = 3;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.seed = 16;
  cfg.checkpoint_every = 1;

  auto run = train_unet<float>(cfg, mb, nullptr, 0, tmp.path / "out");
  REQUIRE(run.steps_per_epoch == 3);  // ceil(5/2)
  REQUIRE(run.total_steps == 6);

  auto cfg1 = cfg;
  cfg1.epochs = 1;
  train_unet<float>(cfg1, mb, nullptr, 0, tmp.path / "resumed");
  train_unet<float>(cfg, mb, nullptr, 0, tmp.path / "resumed");
  REQUIRE(slurp(tmp.path / "out" / "loss_log.csv") ==
          slurp(tmp.path / "resumed" / "loss_log.csv"));

  // checkpoint round trip on a fixed probe
  auto state = load_unet_checkpoint<float>(tmp.path / "out" / "checkpoints" / "last");
  auto probe = load_slice(mb, mb.entries[0]);
  Tensor<float> input({1, 1, 16, 16});
  for (int64_t i = 0; i < input.numel(); ++i) input[i] = probe.pixels[i];
  auto y1 = state.net.forward(make_leaf<float>(input, false));
  auto state2 = load_unet_checkpoint<float>(tmp.path / "out" / "checkpoints" / "last");
  auto y2 = state2.net.forward(make_leaf<float>(input, false));
  REQUIRE(y1->value.vec() == y2->value.vec());
}

TEST_CASE("evaluation requires masks and handles a constant predictor") {
  TempDir tmp("eval");
  PhantomSpec sb;
  sb.n_slices = 3;
  sb.image_size = 16;
  sb.modality_contrast = PhantomSpec::Contrast::B_style;
  auto mb = generate_phantom_dataset(sb, 1400, tmp.path / "b").manifest;

  UNetConfig arch;
  arch.base_width = 4;
  arch.depth = 3;
  UNet<float> net(arch, make_rng(19, "eval"));

  // zeroed weights: logits are exactly 0, sigmoid exactly 0.5 everywhere;
  // the ROC collapses to one tie group with AUC 0.5
  for (const auto& p : net.store().params()) p.node->value.fill(0.0f);
  auto report = evaluate_segmentation(net, mb);
  REQUIRE(report.auc.has_value());
  REQUIRE_THAT(*report.auc, Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE(report.images == 3);
  REQUIRE(report.pixels == 3 * 16 * 16);
  // iou = dice/(2-dice) pooled identity
  REQUIRE_THAT(report.iou, Catch::Matchers::WithinAbs(report.dice / (2.0 - report.dice), 1e-9));

  auto tampered = mb;
  tampered.entries[1].mask_path.reset();
  UNet<float> net2(arch, make_rng(20, "eval2"));
  REQUIRE_THROWS_AS(evaluate_segmentation(net2, tampered), EvalError);
}

TEST_CASE("non-finite loss aborts with a training error") {
  TempDir tmp("abort");
  auto [ma, mb] = tiny_phantoms(tmp.path, 2, 32, 1200);
  auto cfg = tiny_essnet_cfg(17);
  cfg.lr_g = 1e37;  // drives the weights to float overflow within an epoch
  cfg.lr_d = 1e37;
  cfg.epochs = 40;
  REQUIRE_THROWS_AS(train_essnet<float>(cfg, ma, mb, tmp.path / "out"), TrainingAbort);
}

TEST_CASE("micro overfit run halves the cycle loss") {
  TempDir tmp("overfit");
  auto [ma, mb] = tiny_phantoms(tmp.path, 1, 32, 1300);
  auto cfg = tiny_essnet_cfg(18, 16);
  EssNetState<float> st(cfg);
  UnpairedSampler sampler(&ma, &mb, 1, 18);
  std::vector<double> cyc;
  for (int step = 0; step < 200; ++step) {
    auto [a, b] = sampler.next();
    cyc.push_back(essnet_training_step(st, a, b).cycle_A);
  }
  const double early = std::accumulate(cyc.begin(), cyc.begin() + 10, 0.0) / 10.0;
  const double late = std::accumulate(cyc.end() - 10, cyc.end(), 0.0) / 10.0;
  REQUIRE(late <= 0.5 * early);
}
