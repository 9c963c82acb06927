#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "xmod/core/blob.hpp"
#include "xmod/nn/adam.hpp"
#include "xmod/nn/discriminator.hpp"
#include "xmod/nn/generator.hpp"
#include "xmod/nn/unet.hpp"
#include "xmod/version.hpp"

namespace xmod {

namespace ckpt {

template <class T>
void store_params(TensorBlob<T>& blob, const ParamStore<T>& store, const std::string& prefix) {
  for (const auto& p : store.params()) blob.put(prefix + "." + p.name, p.node->value);
}

template <class T>
void load_params(const TensorBlob<T>& blob, ParamStore<T>& store, const std::string& prefix) {
  for (const auto& p : store.params()) {
    const auto& t = blob.get(prefix + "." + p.name);
    if (t.shape() != p.node->value.shape())
      throw ConfigError("checkpoint/architecture mismatch for " + prefix + "." + p.name +
                        ": stored " + t.shape_str() + ", model expects " +
                        p.node->value.shape_str());
    p.node->value = t;
  }
}

template <class T>
void store_adam(TensorBlob<T>& blob, const Adam<T>& opt, const ParamStore<T>& store,
                const std::string& prefix) {
  const auto& params = store.params();
  for (size_t i = 0; i < params.size(); ++i) {
    blob.put(prefix + "." + params[i].name + ".m", opt.slots_m()[i]);
    blob.put(prefix + "." + params[i].name + ".v", opt.slots_v()[i]);
  }
}

template <class T>
void load_adam(const TensorBlob<T>& blob, Adam<T>& opt, const ParamStore<T>& store,
               const std::string& prefix) {
  const auto& params = store.params();
  for (size_t i = 0; i < params.size(); ++i) {
    opt.slots_m()[i] = blob.get(prefix + "." + params[i].name + ".m");
    opt.slots_v()[i] = blob.get(prefix + "." + params[i].name + ".v");
  }
}

inline nlohmann::ordered_json generator_cfg_to_json(const GeneratorConfig& cfg) {
  nlohmann::ordered_json j;
  j["in_channels"] = cfg.in_channels;
  j["out_channels"] = cfg.out_channels;
  j["base_width"] = cfg.base_width;
  j["res_blocks"] = cfg.n_res_blocks;
  j["norm"] = cfg.norm == NormKind::Instance ? "instance" : "none";
  j["final"] = cfg.final_activation == FinalActivation::Tanh ? "tanh" : "logits";
  return j;
}

inline GeneratorConfig generator_cfg_from_json(const nlohmann::ordered_json& j) {
  GeneratorConfig cfg;
  cfg.in_channels = j.at("in_channels").get<int64_t>();
  cfg.out_channels = j.at("out_channels").get<int64_t>();
  cfg.base_width = j.at("base_width").get<int64_t>();
  cfg.n_res_blocks = j.at("res_blocks").get<int64_t>();
  cfg.norm = j.at("norm").get<std::string>() == "none" ? NormKind::None : NormKind::Instance;
  cfg.final_activation = j.at("final").get<std::string>() == "logits" ? FinalActivation::Logits
                                                                      : FinalActivation::Tanh;
  return cfg;
}

inline nlohmann::ordered_json discriminator_cfg_to_json(const DiscriminatorConfig& cfg) {
  nlohmann::ordered_json j;
  j["in_channels"] = cfg.in_channels;
  j["base_width"] = cfg.base_width;
  j["kernel"] = cfg.kernel;
  j["strides"] = cfg.strides;
  j["leaky_slope"] = cfg.leaky_slope;
  return j;
}

inline DiscriminatorConfig discriminator_cfg_from_json(const nlohmann::ordered_json& j) {
  DiscriminatorConfig cfg;
  cfg.in_channels = j.at("in_channels").get<int64_t>();
  cfg.base_width = j.at("base_width").get<int64_t>();
  cfg.kernel = j.at("kernel").get<int64_t>();
  cfg.strides = j.at("strides").get<std::vector<int64_t>>();
  cfg.leaky_slope = j.at("leaky_slope").get<double>();
  return cfg;
}

inline nlohmann::ordered_json unet_cfg_to_json(const UNetConfig& cfg) {
  nlohmann::ordered_json j;
  j["in_channels"] = cfg.in_channels;
  j["out_channels"] = cfg.out_channels;
  j["depth"] = cfg.depth;
  j["base_width"] = cfg.base_width;
  return j;
}

inline UNetConfig unet_cfg_from_json(const nlohmann::ordered_json& j) {
  UNetConfig cfg;
  cfg.in_channels = j.at("in_channels").get<int64_t>();
  cfg.out_channels = j.at("out_channels").get<int64_t>();
  cfg.depth = j.at("depth").get<int64_t>();
  cfg.base_width = j.at("base_width").get<int64_t>();
  return cfg;
}

inline nlohmann::ordered_json read_checkpoint_manifest(const std::filesystem::path& dir,
                                                       const std::string& expected_kind) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("no checkpoint manifest under " + dir.string());
  nlohmann::ordered_json j;
  in >> j;
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kSchemaVersion)
    throw ConfigError("checkpoint schema_version mismatch in " + dir.string() + " (expected " +
                      std::to_string(kSchemaVersion) + "); refusing to load");
  if (j.value("kind", std::string()) != expected_kind)
    throw ConfigError("checkpoint kind is '" + j.value("kind", std::string()) + "', expected '" +
                      expected_kind + "'");
  return j;
}

}  // namespace ckpt

}  // namespace xmod
