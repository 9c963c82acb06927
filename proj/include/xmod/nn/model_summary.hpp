#pragma once

#include <sstream>

#include "xmod/nn/discriminator.hpp"
#include "xmod/nn/generator.hpp"
#include "xmod/nn/unet.hpp"

namespace xmod {

// Reference totals for the width-64 defaults, as published for this
// architecture family.
inline constexpr int64_t kUNetReferenceParams = 31031685;
inline constexpr int64_t kEssNetReferenceParams = 28256644;

// Differences between this U-Net head and the widely circulated variant
// that reaches the reference total: that variant inserts a penultimate
// 2-channel 3x3 conv and maps 2->1 with the final 1x1, where this
// implementation maps base_width->1 directly.
inline std::string unet_reconciliation(const UNetConfig& cfg) {
  const int64_t bw = cfg.base_width;
  const int64_t ours = unet_analytic_params(cfg);
  const int64_t head_direct = 1 * (bw * 1 * 1) + 1;
  const int64_t variant_pre = 2 * (bw * 3 * 3) + 2;
  const int64_t variant_head = 1 * (2 * 1 * 1) + 1;
  const int64_t variant_total = ours - head_direct + variant_pre + variant_head;
  std::ostringstream os;
  os << "U-Net total: " << ours << " (" << conv_layer_census(describe_unet(cfg, 256, 256))
     << " conv layers)\n";
  os << "  reference total: " << kUNetReferenceParams << "\n";
  os << "  head variant reconciliation (itemized):\n";
  os << "    - conv " << bw << "->1 1x1 head (this implementation):   -" << head_direct << "\n";
  os << "    + conv " << bw << "->2 3x3 penultimate (variant):        +" << variant_pre << "\n";
  os << "    + conv 2->1 1x1 head (variant):                 +" << variant_head << "\n";
  os << "    variant-equivalent total: " << variant_total
     << (variant_total == kUNetReferenceParams ? "  == reference (exact)" : "  (difference remains)")
     << "\n";
  os << "  delta vs reference: " << (unet_analytic_params(cfg) - kUNetReferenceParams) << " ("
     << 100.0 * static_cast<double>(ours - kUNetReferenceParams) / kUNetReferenceParams << "%)\n";
  return os.str();
}

inline std::string essnet_reconciliation(const GeneratorConfig& gen,
                                         const DiscriminatorConfig& disc) {
  const int64_t gp = generator_analytic_params(gen);
  const int64_t sp = generator_analytic_params(segmentor_config(gen));
  const int64_t dp = discriminator_analytic_params(disc);
  const int64_t ensemble = 2 * gp + sp + 2 * dp;
  const int64_t synthesis_pair = 2 * (gp + dp);
  std::ostringstream os;
  os << "EssNet ensemble (G1+G2+S+D1+D2): " << ensemble << "\n";
  os << "  generator:     " << gp << "  (x2)\n";
  os << "  segmentor:     " << sp << "\n";
  os << "  discriminator: " << dp << "  (x2)\n";
  os << "  synthesis sub-ensemble 2*(G+D): " << synthesis_pair << "\n";
  os << "  reference total: " << kEssNetReferenceParams;
  if (synthesis_pair == kEssNetReferenceParams)
    os << "  == 2*(G+D) exactly; the reference count excludes the segmentation branch (" << sp
       << " parameters)";
  os << "\n";
  return os.str();
}

inline std::string model_summary_text(const GeneratorConfig& gen, const DiscriminatorConfig& disc,
                                      const UNetConfig& unet, int64_t image_size) {
  std::ostringstream os;
  os << format_layer_table("Generator (1->" + std::to_string(gen.out_channels) + ", width " +
                               std::to_string(gen.base_width) + ")",
                           describe_generator(gen, image_size, image_size))
     << "\n";
  os << format_layer_table("Segmentor (1->2, width " + std::to_string(gen.base_width) + ")",
                           describe_generator(segmentor_config(gen), image_size, image_size))
     << "\n";
  os << format_layer_table("Patch discriminator (width " + std::to_string(disc.base_width) + ")",
                           describe_discriminator(disc, image_size, image_size))
     << "\n";
  os << format_layer_table("U-Net (width " + std::to_string(unet.base_width) + ", depth " +
                               std::to_string(unet.depth) + ")",
                           describe_unet(unet, image_size, image_size))
     << "\n";
  auto [rf_h, rf_w] = receptive_field(disc);
  os << "discriminator receptive field: " << rf_h << "x" << rf_w << "\n\n";
  if (unet.base_width == 64 && unet.depth == 5) os << unet_reconciliation(unet) << "\n";
  if (gen.base_width == 64 && gen.n_res_blocks == 9 && disc.base_width == 64)
    os << essnet_reconciliation(gen, disc);
  return os.str();
}

}  // namespace xmod
