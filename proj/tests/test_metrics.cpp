#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>

#include "xmod/core/rng.hpp"
#include "xmod/metrics/metrics.hpp"
#include "xmod/metrics/roc.hpp"

using namespace xmod;
using Catch::Matchers::WithinAbs;

namespace {

// Independent route: explicit coordinate sets.
struct SetOracle {
  double dice, iou;
};

SetOracle set_counting_oracle(const Tensor<float>& p, const Tensor<float>& g) {
  std::set<int64_t> sp, sg, inter, uni;
  for (int64_t i = 0; i < p.numel(); ++i) {
    if (p[i] == 1.0f) sp.insert(i);
    if (g[i] == 1.0f) sg.insert(i);
  }
  for (auto i : sp)
    if (sg.count(i)) inter.insert(i);
  uni = sp;
  for (auto i : sg) uni.insert(i);
  SetOracle o;
  o.dice = (sp.empty() && sg.empty())
               ? 1.0
               : 2.0 * static_cast<double>(inter.size()) / static_cast<double>(sp.size() + sg.size());
  o.iou = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  return o;
}

// O(n^2) pairwise rank statistic.
double pairwise_auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i)
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] == 1 && labels[j] == 0) {
        ++pairs;
        if (scores[i] > scores[j]) num += 1.0;
        else if (scores[i] == scores[j]) num += 0.5;
      }
    }
  return num / static_cast<double>(pairs);
}

Tensor<float> mask_from(const std::vector<float>& v) {
  return Tensor<float>({static_cast<int64_t>(v.size())}, std::vector<float>(v));
}

}  // namespace

TEST_CASE("dice and iou hand values") {
  auto p = mask_from({1, 1, 0, 0});
  auto g = mask_from({1, 0, 1, 0});
  REQUIRE_THAT(dice(p, g), WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(iou(p, g), WithinAbs(1.0 / 3.0, 1e-15));

  REQUIRE_THAT(dice(g, g), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(iou(g, g), WithinAbs(1.0, 1e-15));

  auto d1 = mask_from({1, 1, 0, 0});
  auto d2 = mask_from({0, 0, 1, 1});
  REQUIRE_THAT(dice(d1, d2), WithinAbs(0.0, 1e-15));

  auto empty = mask_from({0, 0, 0, 0});
  REQUIRE_THAT(dice(empty, empty), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(iou(empty, empty), WithinAbs(1.0, 1e-15));

  auto bad = mask_from({0.5f, 0, 1, 0});
  REQUIRE_THROWS_AS(dice(bad, g), EvalError);
}

TEST_CASE("dice and iou match the set-counting oracle on random masks") {
  auto rng = make_rng(50, "masks");
  std::uniform_int_distribution<int64_t> size_dist(1, 32);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t h = size_dist(rng), w = size_dist(rng);
    const double dp = density(rng), dg = density(rng);
    Tensor<float> p({h, w}), g({h, w});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int64_t i = 0; i < h * w; ++i) {
      p[i] = u(rng) < dp ? 1.0f : 0.0f;
      g[i] = u(rng) < dg ? 1.0f : 0.0f;
    }
    auto oracle = set_counting_oracle(p, g);
    const double d = dice(p, g), j = iou(p, g);
    REQUIRE_THAT(d, WithinAbs(oracle.dice, 1e-12));
    REQUIRE_THAT(j, WithinAbs(oracle.iou, 1e-12));
    // symmetry and ordering
    REQUIRE_THAT(dice(g, p), WithinAbs(d, 1e-15));
    REQUIRE_THAT(iou(g, p), WithinAbs(j, 1e-15));
    REQUIRE(d >= j);
    if (d == 0.0 || d == 1.0) REQUIRE(d == j);
    else REQUIRE(d > j);
  }
}

TEST_CASE("pooled identity iou = dice/(2-dice)") {
  auto rng = make_rng(51, "pooled");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ConfusionCounts pooled;
  for (int img = 0; img < 5; ++img) {
    Tensor<float> p({16, 16}), g({16, 16});
    for (int64_t i = 0; i < p.numel(); ++i) {
      p[i] = u(rng) < 0.3 ? 1.0f : 0.0f;
      g[i] = u(rng) < 0.3 ? 1.0f : 0.0f;
    }
    pooled += confusion(p, g);
  }
  const double d = dice_from_counts(pooled);
  const double j = iou_from_counts(pooled);
  REQUIRE_THAT(j, WithinAbs(d / (2.0 - d), 1e-12));
}

TEST_CASE("per-image means do not satisfy the pooled identity") {
  // two images with very different mask sizes
  Tensor<float> p1({4}, {1, 1, 1, 1}), g1({4}, {1, 1, 0, 0});
  Tensor<float> p2({4}, {1, 0, 0, 0}), g2({4}, {0, 1, 0, 0});
  const double mean_dice = (dice(p1, g1) + dice(p2, g2)) / 2.0;
  const double mean_iou = (iou(p1, g1) + iou(p2, g2)) / 2.0;
  REQUIRE(std::abs(mean_iou - mean_dice / (2.0 - mean_dice)) > 1e-3);
}

TEST_CASE("published dice/iou pairs satisfy the pooled identity") {
  const double d = 0.9459;
  REQUIRE_THAT(d / (2.0 - d), WithinAbs(0.8974, 2e-4));
  REQUIRE_THAT(d / (2.0 - d), WithinAbs(0.8973, 2e-4));
  const double d2 = 0.9524;
  REQUIRE_THAT(d2 / (2.0 - d2), WithinAbs(0.9091, 2e-4));
}

TEST_CASE("roc hand cases") {
  // perfect separation
  const double perfect = auc_score<double, int>({0.9, 0.6, 0.4, 0.2}, {1, 1, 0, 0});
  REQUIRE_THAT(perfect, WithinAbs(1.0, 1e-15));

  // 3 of 4 positive-negative pairs correctly ordered
  const double partial = auc_score<double, int>({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
  REQUIRE_THAT(partial, WithinAbs(0.75, 1e-15));

  // constant scores: one tie group, AUC 0.5
  const double tied = auc_score<double, int>({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
  REQUIRE_THAT(tied, WithinAbs(0.5, 1e-15));

  auto single_class = []() { return auc_score<double, int>({0.1, 0.2}, {1, 1}); };
  REQUIRE_THROWS_AS(single_class(), EvalError);
  auto bad_labels = []() { return auc_score<double, int>({0.1, 0.2}, {1, 2}); };
  REQUIRE_THROWS_AS(bad_labels(), EvalError);
}

TEST_CASE("roc curve endpoints and monotonicity") {
  auto rng = make_rng(52, "roc");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores(257);
  std::vector<int> labels(257);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = std::floor(u(rng) * 16) / 16.0;  // force ties
    labels[i] = u(rng) < 0.4 ? 1 : 0;
  }
  auto curve = roc_curve(scores, labels);
  REQUIRE(curve.tpr.front() == 0.0);
  REQUIRE(curve.fpr.front() == 0.0);
  REQUIRE_THAT(curve.tpr.back(), WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(curve.fpr.back(), WithinAbs(1.0, 1e-12));
  for (size_t i = 1; i < curve.tpr.size(); ++i) {
    REQUIRE(curve.tpr[i] >= curve.tpr[i - 1]);
    REQUIRE(curve.fpr[i] >= curve.fpr[i - 1]);
    REQUIRE(curve.thresholds[i] < curve.thresholds[i - 1]);
  }
}

TEST_CASE("auc matches the pairwise oracle") {
  auto rng = make_rng(53, "aucoracle");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int64_t> len_dist(4, 80);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t n = len_dist(rng);
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    bool has_pos = false, has_neg = false;
    for (int64_t i = 0; i < n; ++i) {
      scores[i] = std::floor(u(rng) * 8) / 8.0;  // coarse grid, many ties
      labels[i] = u(rng) < 0.5 ? 1 : 0;
      has_pos |= labels[i] == 1;
      has_neg |= labels[i] == 0;
    }
    if (!has_pos) labels[0] = 1;
    if (!has_neg) labels[1] = 0;
    REQUIRE_THAT(auc_score(scores, labels), WithinAbs(pairwise_auc_oracle(scores, labels), 1e-9));
  }
}

TEST_CASE("auc invariant under strictly increasing transforms") {
  auto rng = make_rng(54, "transform");
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> scores(200);
  std::vector<int> labels(200);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = u(rng);
    labels[i] = i % 3 == 0 ? 1 : 0;
  }
  const double base = auc_score(scores, labels);
  std::vector<double> expd(scores.size()), affine(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    expd[i] = std::exp(scores[i]);
    affine[i] = 2.0 * scores[i] + 7.0;
  }
  REQUIRE_THAT(auc_score(expd, labels), WithinAbs(base, 1e-12));
  REQUIRE_THAT(auc_score(affine, labels), WithinAbs(base, 1e-12));
}

TEST_CASE("auc near 0.5 for labels independent of scores") {
  auto rng = make_rng(55, "random");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 10000;
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    scores[i] = u(rng);
    labels[i] = u(rng) < 0.5 ? 1 : 0;
  }
  REQUIRE_THAT(auc_score(scores, labels), WithinAbs(0.5, 0.05));
}

TEST_CASE("oracle predictor scores give perfect metrics") {
  // feeding the ground truth as scores: threshold at 0.5 reproduces the
  // mask, and the ROC separates the classes perfectly
  auto rng = make_rng(57, "oracle");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<float> gt({12, 12});
  for (int64_t i = 0; i < gt.numel(); ++i) gt[i] = u(rng) < 0.3 ? 1.0f : 0.0f;
  gt[0] = 1.0f;
  gt[1] = 0.0f;
  auto pred = binarize(gt, 0.5f);
  REQUIRE(dice(pred, gt) == 1.0);
  REQUIRE(iou(pred, gt) == 1.0);
  std::vector<float> scores(gt.vec().begin(), gt.vec().end());
  std::vector<int> labels;
  for (int64_t i = 0; i < gt.numel(); ++i) labels.push_back(gt[i] != 0.0f ? 1 : 0);
  REQUIRE(auc_score(scores, labels) == 1.0);
}

TEST_CASE("confusion counts partition the pixels") {
  auto rng = make_rng(56, "conf");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<float> p({13, 7}), g({13, 7});
  for (int64_t i = 0; i < p.numel(); ++i) {
    p[i] = u(rng) < 0.5 ? 1.0f : 0.0f;
    g[i] = u(rng) < 0.5 ? 1.0f : 0.0f;
  }
  auto c = confusion(p, g);
  REQUIRE(c.total() == p.numel());
}
