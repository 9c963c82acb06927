#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers/gradcheck.hpp"
#include "xmod/nn/discriminator.hpp"
#include "xmod/nn/generator.hpp"
#include "xmod/nn/unet.hpp"

using namespace xmod;
using xmod_test::rand_tensor;

namespace {

NodePtr<float> rand_input(std::vector<int64_t> shape, uint64_t seed) {
  auto rng = make_rng(seed, "input");
  return make_leaf<float>(rand_tensor<float>(std::move(shape), rng), false);
}

}  // namespace

TEST_CASE("generator preserves spatial shape") {
  GeneratorConfig cfg;
  cfg.base_width = 4;
  ResnetGenerator<float> g(cfg, make_rng(1, "g"));
  auto y = g.forward(rand_input({1, 1, 256, 256}, 2));
  REQUIRE(y->value.shape() == std::vector<int64_t>{1, 1, 256, 256});

  GeneratorConfig desk;
  desk.base_width = 16;
  ResnetGenerator<float> gd(desk, make_rng(1, "gd"));
  auto yd = gd.forward(rand_input({1, 1, 64, 64}, 3));
  REQUIRE(yd->value.shape() == std::vector<int64_t>{1, 1, 64, 64});
}

TEST_CASE("generator output strictly inside (-1,1) for random inputs") {
  GeneratorConfig cfg;
  cfg.base_width = 8;
  ResnetGenerator<float> g(cfg, make_rng(5, "g"));
  for (int trial = 0; trial < 100; ++trial) {
    auto y = g.forward(rand_input({1, 1, 32, 32}, 100 + trial));
    for (int64_t i = 0; i < y->value.numel(); ++i) {
      REQUIRE(y->value[i] > -1.0f);
      REQUIRE(y->value[i] < 1.0f);
    }
  }
}

TEST_CASE("generator rejects sizes not divisible by 4") {
  GeneratorConfig cfg;
  cfg.base_width = 4;
  ResnetGenerator<float> g(cfg, make_rng(1, "g"));
  REQUIRE_THROWS_WITH(g.forward(rand_input({1, 1, 30, 30}, 4)),
                      Catch::Matchers::ContainsSubstring("divisible by 4"));
}

TEST_CASE("segmentor emits two-channel logits with softmax closure") {
  GeneratorConfig cfg;
  cfg.base_width = 8;
  auto seg_cfg = segmentor_config(cfg);
  REQUIRE(seg_cfg.out_channels == 2);
  ResnetGenerator<float> s(seg_cfg, make_rng(2, "s"));
  auto y = s.forward(rand_input({1, 1, 32, 32}, 6));
  REQUIRE(y->value.shape() == std::vector<int64_t>{1, 2, 32, 32});
  for (int64_t k = 0; k < 32 * 32; ++k) {
    const float z0 = y->value[k], z1 = y->value[32 * 32 + k];
    const float m = std::max(z0, z1);
    const float p0 = std::exp(z0 - m) / (std::exp(z0 - m) + std::exp(z1 - m));
    const float p1 = std::exp(z1 - m) / (std::exp(z0 - m) + std::exp(z1 - m));
    REQUIRE_THAT(p0 + p1, Catch::Matchers::WithinAbs(1.0, 1e-6));
  }
}

TEST_CASE("segmentor differs from generator only in the head") {
  for (int64_t w : {16, 64}) {
    GeneratorConfig g1;
    g1.base_width = w;
    auto s = segmentor_config(g1);
    // head params: out_c * (w*49) + out_c
    const int64_t head1 = 1 * (w * 49) + 1;
    const int64_t head2 = 2 * (w * 49) + 2;
    REQUIRE(generator_analytic_params(s) - generator_analytic_params(g1) == head2 - head1);
  }
}

TEST_CASE("generator analytic tally at full width") {
  GeneratorConfig cfg;  // width 64, 9 blocks, out 1
  REQUIRE(generator_analytic_params(cfg) == 11365633);
  REQUIRE(generator_analytic_params(segmentor_config(cfg)) == 11368770);
}

TEST_CASE("discriminator output map arithmetic") {
  DiscriminatorConfig cfg;
  auto layers = describe_discriminator(cfg, 256, 256);
  REQUIRE(layers.back().out_h == 30);
  REQUIRE(layers.back().out_w == 30);
  REQUIRE(layers.back().out_c == 1);
  REQUIRE(layers.front().params == 1088);  // 64*(1*4*4)+64

  // with a 70x70 input every unit's receptive field covers at most the image
  auto layers70 = describe_discriminator(cfg, 70, 70);
  REQUIRE(layers70.back().out_h >= 1);
  auto [rh, rw] = receptive_field(cfg);
  REQUIRE(rh <= 70);
  REQUIRE(rw <= 70);
}

TEST_CASE("discriminator forward map and small-input error") {
  DiscriminatorConfig cfg;
  cfg.base_width = 8;
  PatchDiscriminator<float> d(cfg, make_rng(3, "d"));
  auto y = d.forward(rand_input({1, 1, 64, 64}, 7));
  REQUIRE(y->value.shape() == std::vector<int64_t>{1, 1, 6, 6});

  REQUIRE_THROWS_WITH(d.forward(rand_input({1, 1, 16, 16}, 8)),
                      Catch::Matchers::ContainsSubstring("minimum input size"));
  REQUIRE(discriminator_min_input(cfg) == 24);
}

TEST_CASE("receptive field recurrence") {
  DiscriminatorConfig cfg;
  REQUIRE(receptive_field(cfg) == std::pair<int64_t, int64_t>{70, 70});

  DiscriminatorConfig one;
  one.strides = {1};
  REQUIRE(receptive_field(one) == std::pair<int64_t, int64_t>{4, 4});

  DiscriminatorConfig two;
  two.strides = {2, 1};
  REQUIRE(receptive_field(two) == std::pair<int64_t, int64_t>{10, 10});

  // fold chain 1 -> 4 -> 7 -> 16 -> 34 -> 70
  const std::vector<std::vector<int64_t>> suffixes = {{1}, {1, 1}, {2, 1, 1}, {2, 2, 1, 1},
                                                      {2, 2, 2, 1, 1}};
  const std::vector<int64_t> expected = {4, 7, 16, 34, 70};
  for (size_t i = 0; i < suffixes.size(); ++i) {
    DiscriminatorConfig c;
    c.strides = suffixes[i];
    REQUIRE(receptive_field(c).first == expected[i]);
  }
}

TEST_CASE("receptive field monotone in kernel and stride") {
  auto rng = make_rng(9, "rf");
  std::uniform_int_distribution<int64_t> kd(2, 7), sd(1, 3), nd(1, 5);
  for (int trial = 0; trial < 200; ++trial) {
    DiscriminatorConfig c;
    c.kernel = kd(rng);
    c.strides.assign(static_cast<size_t>(nd(rng)), 1);
    for (auto& s : c.strides) s = sd(rng);
    auto base = receptive_field(c).first;

    DiscriminatorConfig bigger_k = c;
    bigger_k.kernel += 1;
    REQUIRE(receptive_field(bigger_k).first >= base);

    DiscriminatorConfig bigger_s = c;
    bigger_s.strides[static_cast<size_t>(trial) % bigger_s.strides.size()] += 1;
    REQUIRE(receptive_field(bigger_s).first >= base);
  }
}

TEST_CASE("unet conv census and analytic tally") {
  UNetConfig cfg;  // width 64, depth 5
  auto layers = describe_unet(cfg, 256, 256);
  REQUIRE(conv_layer_census(layers) == 23);
  REQUIRE(unet_analytic_params(cfg) == 31030593);
}

TEST_CASE("unet forward shape, range and divisibility error") {
  UNetConfig cfg;
  cfg.base_width = 8;
  UNet<float> net(cfg, make_rng(4, "u"));
  auto y = net.forward(rand_input({2, 1, 64, 64}, 9));
  REQUIRE(y->value.shape() == std::vector<int64_t>{2, 1, 64, 64});
  for (int64_t i = 0; i < y->value.numel(); ++i) {
    REQUIRE(y->value[i] > 0.0f);
    REQUIRE(y->value[i] < 1.0f);
  }
  REQUIRE_THROWS_WITH(net.forward(rand_input({1, 1, 60, 60}, 10)),
                      Catch::Matchers::ContainsSubstring("divisible by 16"));
}

TEST_CASE("count_parameters equals analytic tally across config sweep") {
  for (int64_t w : {4, 8, 16, 64}) {
    for (int64_t blocks : {1, 3, 9}) {
      GeneratorConfig cfg;
      cfg.base_width = w;
      cfg.n_res_blocks = blocks;
      ResnetGenerator<float> g(cfg, make_rng(40, "sweep"));
      REQUIRE(count_parameters(g) == generator_analytic_params(cfg));
    }
    DiscriminatorConfig dc;
    dc.base_width = w;
    PatchDiscriminator<float> d(dc, make_rng(41, "sweep"));
    REQUIRE(count_parameters(d) == discriminator_analytic_params(dc));

    UNetConfig uc;
    uc.base_width = w;
    UNet<float> u(uc, make_rng(42, "sweep"));
    REQUIRE(count_parameters(u) == unet_analytic_params(uc));
  }
}

TEST_CASE("full-scale parameter identities") {
  GeneratorConfig g;   // width 64
  DiscriminatorConfig d;
  const int64_t gp = generator_analytic_params(g);
  const int64_t sp = generator_analytic_params(segmentor_config(g));
  const int64_t dp = discriminator_analytic_params(d);
  REQUIRE(dp == 2762689);
  // the full five-network ensemble
  REQUIRE(2 * gp + sp + 2 * dp == 39625414);
  // the synthesis sub-ensemble (two generators + two discriminators)
  REQUIRE(2 * (gp + dp) == 28256644);
}

TEST_CASE("forward is deterministic given fixed weights and input") {
  GeneratorConfig cfg;
  cfg.base_width = 8;
  ResnetGenerator<float> g(cfg, make_rng(77, "det"));
  auto x = rand_input({1, 1, 32, 32}, 78);
  auto y1 = g.forward(x);
  auto y2 = g.forward(x);
  for (int64_t i = 0; i < y1->value.numel(); ++i) REQUIRE(y1->value[i] == y2->value[i]);
}

TEST_CASE("output shapes match closed-form arithmetic over random admissible sizes") {
  auto rng = make_rng(90, "sizes");
  std::uniform_int_distribution<int64_t> pick(0, 3);
  const int64_t gen_sizes[] = {16, 24, 32, 48};
  GeneratorConfig gcfg;
  gcfg.base_width = 4;
  ResnetGenerator<float> g(gcfg, make_rng(91, "g"));
  DiscriminatorConfig dcfg;
  dcfg.base_width = 4;
  PatchDiscriminator<float> d(dcfg, make_rng(92, "d"));
  UNetConfig ucfg;
  ucfg.base_width = 4;
  UNet<float> u(ucfg, make_rng(93, "u"));

  for (int trial = 0; trial < 6; ++trial) {
    const int64_t s = gen_sizes[pick(rng)];
    auto x = rand_input({1, 1, s, s}, 900 + trial);
    REQUIRE(g.forward(x)->value.shape() == std::vector<int64_t>{1, 1, s, s});

    if (s >= discriminator_min_input(dcfg)) {
      auto chain = discriminator_size_chain(dcfg, s);
      REQUIRE(d.forward(x)->value.shape() ==
              std::vector<int64_t>{1, 1, chain.back(), chain.back()});
    }
    if (s % ucfg.divisor() == 0)
      REQUIRE(u.forward(x)->value.shape() == std::vector<int64_t>{1, 1, s, s});
  }
}

TEST_CASE("forward preserves batch size") {
  GeneratorConfig cfg;
  cfg.base_width = 4;
  ResnetGenerator<float> g(cfg, make_rng(80, "batch"));
  for (int64_t n : {1, 3}) {
    auto y = g.forward(rand_input({n, 1, 16, 16}, 81 + n));
    REQUIRE(y->value.dim(0) == n);
  }
}
