#pragma once

#include <cmath>
#include <string>

#include "xmod/core/ops.hpp"
#include "xmod/errors.hpp"

namespace xmod {

// Weights of the five-term training objective:
// total = l1*adv_A2B + l2*adv_B2A + l3*cycle_A + l4*cycle_B + l5*seg.
struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 10.0;
  double lambda4 = 10.0;
  double lambda5 = 1.0;

  void validate() const {
    auto check = [](double v, const char* name) {
      if (!(v >= 0.0))
        throw ConfigError(std::string("loss.") + name + " must be >= 0");
    };
    check(lambda1, "lambda1");
    check(lambda2, "lambda2");
    check(lambda3, "lambda3");
    check(lambda4, "lambda4");
    check(lambda5, "lambda5");
  }
};

struct LossBreakdown {
  double adv_A2B = 0.0;
  double adv_B2A = 0.0;
  double cycle_A = 0.0;
  double cycle_B = 0.0;
  double seg = 0.0;
  double total = 0.0;
  double d1_loss = 0.0;
  double d2_loss = 0.0;
};

// The adversarial terms are cross-entropy by default. The non-saturating
// generator form -log D(G(x)) replaces the saturating +log(1-D(G(x)));
// both are available, as is a least-squares variant matching the lineage
// of public CycleGAN implementations.
enum class AdversarialMode { CrossEntropy, CrossEntropySaturating, LeastSquares };

inline AdversarialMode adversarial_mode_from_string(const std::string& s) {
  if (s == "cross_entropy") return AdversarialMode::CrossEntropy;
  if (s == "cross_entropy_saturating") return AdversarialMode::CrossEntropySaturating;
  if (s == "least_squares") return AdversarialMode::LeastSquares;
  throw ConfigError("loss.adversarial must be one of cross_entropy, cross_entropy_saturating, least_squares");
}

inline std::string to_string(AdversarialMode m) {
  switch (m) {
    case AdversarialMode::CrossEntropy: return "cross_entropy";
    case AdversarialMode::CrossEntropySaturating: return "cross_entropy_saturating";
    case AdversarialMode::LeastSquares: return "least_squares";
  }
  return "cross_entropy";
}

// Discriminator objective on raw logit score maps: BCE with target 1 on the
// real map plus BCE with target 0 on the fake map, each term averaged over
// its patch map.
template <class T>
NodePtr<T> discriminator_loss(const NodePtr<T>& d_real, const NodePtr<T>& d_fake,
                              AdversarialMode mode = AdversarialMode::CrossEntropy) {
  check_same_shape(d_real->value, d_fake->value, "discriminator_loss");
  if (mode == AdversarialMode::LeastSquares) {
    auto real_term = mean_all(square(add_scalar(d_real, T(-1))));
    auto fake_term = mean_all(square(d_fake));
    return add(real_term, fake_term);
  }
  // -mean log sigmoid(d_real) - mean log(1 - sigmoid(d_fake))
  auto real_term = mean_all(softplus_op(neg(d_real)));
  auto fake_term = mean_all(softplus_op(d_fake));
  return add(real_term, fake_term);
}

template <class T>
NodePtr<T> generator_adversarial_loss(const NodePtr<T>& d_fake,
                                      AdversarialMode mode = AdversarialMode::CrossEntropy) {
  switch (mode) {
    case AdversarialMode::LeastSquares:
      return mean_all(square(add_scalar(d_fake, T(-1))));
    case AdversarialMode::CrossEntropySaturating:
      // minimize +log(1 - sigmoid(d_fake)) = -softplus(d_fake)
      return neg(mean_all(softplus_op(d_fake)));
    case AdversarialMode::CrossEntropy:
    default:
      // non-saturating: -mean log sigmoid(d_fake)
      return mean_all(softplus_op(neg(d_fake)));
  }
}

// Mean absolute reconstruction error between a real batch and its
// round-trip through both generators.
template <class T>
NodePtr<T> cycle_loss(const NodePtr<T>& real, const NodePtr<T>& reconstructed) {
  check_same_shape(real->value, reconstructed->value, "cycle_loss");
  return mean_all(abs_op(sub(reconstructed, real)));
}

// Two-class pixel cross-entropy of segmentor logits against the binary
// ground-truth mask, averaged over pixels.
template <class T>
NodePtr<T> segmentation_loss(const NodePtr<T>& logits, const Tensor<T>& gt_mask) {
  return softmax2_cross_entropy(logits, gt_mask);
}

// Exact weighted sum of scalar loss nodes.
template <class T>
NodePtr<T> total_loss_node(const NodePtr<T>& adv_a2b, const NodePtr<T>& adv_b2a,
                           const NodePtr<T>& cyc_a, const NodePtr<T>& cyc_b,
                           const NodePtr<T>* seg, const LossWeights& w) {
  auto total = add(scale(adv_a2b, static_cast<T>(w.lambda1)), scale(adv_b2a, static_cast<T>(w.lambda2)));
  total = add(total, scale(cyc_a, static_cast<T>(w.lambda3)));
  total = add(total, scale(cyc_b, static_cast<T>(w.lambda4)));
  if (seg != nullptr) total = add(total, scale(*seg, static_cast<T>(w.lambda5)));
  return total;
}

// Scalar form used for bookkeeping and the exactness properties.
inline double total_loss(const LossBreakdown& parts, const LossWeights& w) {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v)) throw TrainingAbort(std::string("non-finite loss term: ") + name);
  };
  check(parts.adv_A2B, "adv_A2B");
  check(parts.adv_B2A, "adv_B2A");
  check(parts.cycle_A, "cycle_A");
  check(parts.cycle_B, "cycle_B");
  check(parts.seg, "seg");
  return w.lambda1 * parts.adv_A2B + w.lambda2 * parts.adv_B2A + w.lambda3 * parts.cycle_A +
         w.lambda4 * parts.cycle_B + w.lambda5 * parts.seg;
}

}  // namespace xmod
