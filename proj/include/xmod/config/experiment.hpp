#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmod/losses/losses.hpp"
#include "xmod/nn/discriminator.hpp"
#include "xmod/nn/generator.hpp"
#include "xmod/nn/unet.hpp"
#include "xmod/train/essnet.hpp"
#include "xmod/train/unet_train.hpp"

namespace xmod {

// One experiment = stage-1 translation training + stage-2 segmenter sweep.
// A preset pins a coherent bundle of values; explicit keys that contradict
// a pinned value are diagnostics, anything unpinned may be overridden.
struct ExperimentConfig {
  std::string preset;  // "paper", "desk" or empty
  uint64_t seed = 0;
  std::string run_id;  // derived from the resolved config when empty
  int64_t image_size = 256;

  GeneratorConfig gen;
  DiscriminatorConfig disc;
  UNetConfig unet_arch;
  EssNetTrainConfig essnet;
  UNetTrainConfig unet_train;

  std::string data_a, data_b, data_test;
  struct Phantom {
    bool enabled = false;
    int64_t size = 64;
    int64_t count_a = 20, count_b = 20, count_test = 8;
    double noise_sigma = 0.02;
  } phantom;

  std::vector<int64_t> arrangements = {0, 354, 714, 1034, 1487, 2050};

  nlohmann::ordered_json resolved;  // full snapshot after preset expansion
};

namespace cfgdetail {

using flatmap = std::map<std::string, nlohmann::ordered_json>;

// Flattens {"a": {"b": 1}} into {"a.b": 1} for defaulting and pin checks.
inline void flatten(const nlohmann::ordered_json& j, const std::string& prefix, flatmap& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object())
      flatten(it.value(), key, out);
    else
      out[key] = it.value();
  }
}

inline nlohmann::ordered_json unflatten(const flatmap& flat) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, value] : flat) {
    nlohmann::ordered_json* cur = &j;
    size_t start = 0;
    while (true) {
      const size_t dot = key.find('.', start);
      if (dot == std::string::npos) {
        (*cur)[key.substr(start)] = value;
        break;
      }
      cur = &(*cur)[key.substr(start, dot - start)];
      start = dot + 1;
    }
  }
  return j;
}

inline flatmap base_defaults() {
  flatmap d;
  d["seed"] = 0;
  d["image_size"] = 256;
  d["generator.base_width"] = 64;
  d["generator.res_blocks"] = 9;
  d["disc.base_width"] = 64;
  d["unet.base_width"] = 64;
  d["unet.depth"] = 5;
  d["unet.epochs"] = 300;
  d["unet.batch_size"] = 2;
  d["unet.lr"] = 1e-4;
  d["unet.checkpoint_every"] = 50;
  d["essnet.epochs"] = 100;
  d["essnet.batch_size"] = 1;
  d["essnet.lr_g"] = 1e-4;
  d["essnet.lr_d"] = 2e-4;
  d["essnet.beta1"] = 0.5;
  d["essnet.beta2"] = 0.999;
  d["essnet.ablation_no_seg"] = false;
  d["essnet.checkpoint_every"] = 10;
  d["loss.lambda1"] = 1.0;
  d["loss.lambda2"] = 1.0;
  d["loss.lambda3"] = 10.0;
  d["loss.lambda4"] = 10.0;
  d["loss.lambda5"] = 1.0;
  d["loss.adversarial"] = "cross_entropy";
  d["arrangements"] = nlohmann::ordered_json::array({0, 354, 714, 1034, 1487, 2050});
  return d;
}

inline flatmap preset_pins(const std::string& preset) {
  flatmap p;
  if (preset == "paper") {
    p["image_size"] = 256;
    p["generator.base_width"] = 64;
    p["disc.base_width"] = 64;
    p["unet.base_width"] = 64;
    p["essnet.epochs"] = 100;
    p["essnet.batch_size"] = 1;
    p["essnet.lr_g"] = 1e-4;
    p["essnet.lr_d"] = 2e-4;
    p["unet.epochs"] = 300;
    p["unet.batch_size"] = 2;
    p["unet.lr"] = 1e-4;
    p["loss.lambda1"] = 1.0;
    p["loss.lambda2"] = 1.0;
    p["loss.lambda3"] = 10.0;
    p["loss.lambda4"] = 10.0;
    p["loss.lambda5"] = 1.0;
  } else if (preset == "desk") {
    p["image_size"] = 64;
    p["generator.base_width"] = 16;
    p["disc.base_width"] = 16;
    p["unet.base_width"] = 16;
    p["essnet.epochs"] = 5;
    p["unet.epochs"] = 40;
  }
  return p;
}

// Non-pinned conveniences that make a bare desk config self-contained.
inline flatmap preset_soft_defaults(const std::string& preset) {
  flatmap d;
  if (preset == "desk") {
    d["data.phantom.enabled"] = true;
    d["data.phantom.size"] = 64;
    d["data.phantom.count_a"] = 20;
    d["data.phantom.count_b"] = 20;
    d["data.phantom.count_test"] = 8;
    d["data.phantom.noise_sigma"] = 0.02;
    d["arrangements"] = nlohmann::ordered_json::array({0, 20});
    d["essnet.checkpoint_every"] = 5;
    d["unet.checkpoint_every"] = 20;
  }
  return d;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "preset",
      "seed",
      "run_id",
      "image_size",
      "generator.base_width",
      "generator.res_blocks",
      "disc.base_width",
      "unet.base_width",
      "unet.depth",
      "unet.epochs",
      "unet.batch_size",
      "unet.lr",
      "unet.checkpoint_every",
      "essnet.epochs",
      "essnet.batch_size",
      "essnet.lr_g",
      "essnet.lr_d",
      "essnet.beta1",
      "essnet.beta2",
      "essnet.ablation_no_seg",
      "essnet.checkpoint_every",
      "loss.lambda1",
      "loss.lambda2",
      "loss.lambda3",
      "loss.lambda4",
      "loss.lambda5",
      "loss.adversarial",
      "data.a",
      "data.b",
      "data.test",
      "data.phantom.enabled",
      "data.phantom.size",
      "data.phantom.count_a",
      "data.phantom.count_b",
      "data.phantom.count_test",
      "data.phantom.noise_sigma",
      "arrangements",
  };
  return keys;
}

inline bool json_num_eq(const nlohmann::ordered_json& a, const nlohmann::ordered_json& b) {
  if (a.is_number() && b.is_number())
    return a.get<double>() == b.get<double>();
  return a == b;
}

}  // namespace cfgdetail

// Schema, range and preset-consistency checks. Empty result <=> valid.
inline std::vector<std::string> validate_config_json(const nlohmann::ordered_json& raw) {
  using namespace cfgdetail;
  std::vector<std::string> diags;
  if (!raw.is_object()) return {"config root must be a JSON object"};

  flatmap flat;
  flatten(raw, "", flat);

  std::string preset;
  if (flat.count("preset")) {
    if (!flat["preset"].is_string()) {
      diags.push_back("preset must be a string");
    } else {
      preset = flat["preset"].get<std::string>();
      if (preset != "paper" && preset != "desk")
        diags.push_back("preset must be 'paper' or 'desk', got '" + preset + "'");
    }
  }

  for (const auto& [key, value] : flat)
    if (!known_keys().count(key)) diags.push_back("unknown key: " + key);

  auto require_number = [&](const std::string& key, double lo, bool strict,
                            const std::string& msg) {
    auto it = flat.find(key);
    if (it == flat.end()) return;
    if (!it->second.is_number()) {
      diags.push_back(key + " must be a number");
      return;
    }
    const double v = it->second.get<double>();
    if (strict ? !(v > lo) : !(v >= lo)) diags.push_back(msg);
  };

  for (int i = 1; i <= 5; ++i) {
    const std::string key = "loss.lambda" + std::to_string(i);
    require_number(key, 0.0, false, key + " must be >= 0");
  }
  require_number("essnet.batch_size", 1.0, false, "essnet.batch_size must be >= 1");
  require_number("unet.batch_size", 1.0, false, "unet.batch_size must be >= 1");
  require_number("essnet.epochs", 1.0, false, "essnet.epochs must be >= 1");
  require_number("unet.epochs", 1.0, false, "unet.epochs must be >= 1");
  require_number("essnet.lr_g", 0.0, true, "essnet.lr_g must be > 0");
  require_number("essnet.lr_d", 0.0, true, "essnet.lr_d must be > 0");
  require_number("unet.lr", 0.0, true, "unet.lr must be > 0");
  require_number("generator.base_width", 4.0, false, "generator.base_width must be >= 4");
  require_number("disc.base_width", 4.0, false, "disc.base_width must be >= 4");
  require_number("unet.base_width", 4.0, false, "unet.base_width must be >= 4");
  require_number("generator.res_blocks", 1.0, false, "generator.res_blocks must be >= 1");
  require_number("image_size", 16.0, false, "image_size must be >= 16");

  if (flat.count("image_size") && flat.count("unet.depth") && flat["image_size"].is_number() &&
      flat["unet.depth"].is_number()) {
    const int64_t size = flat["image_size"].get<int64_t>();
    const int64_t div = int64_t(1) << (flat["unet.depth"].get<int64_t>() - 1);
    if (size % div != 0)
      diags.push_back("image_size must be divisible by 2^(unet.depth-1) = " + std::to_string(div));
    if (size % 4 != 0) diags.push_back("image_size must be divisible by 4");
  }

  if (flat.count("loss.adversarial") && flat["loss.adversarial"].is_string()) {
    const auto mode = flat["loss.adversarial"].get<std::string>();
    if (mode != "cross_entropy" && mode != "cross_entropy_saturating" && mode != "least_squares")
      diags.push_back("loss.adversarial must be one of cross_entropy, "
                      "cross_entropy_saturating, least_squares");
  }

  if (!preset.empty()) {
    for (const auto& [key, pinned] : preset_pins(preset)) {
      auto it = flat.find(key);
      if (it != flat.end() && !json_num_eq(it->second, pinned))
        diags.push_back("preset '" + preset + "' pins " + key + " = " + pinned.dump() +
                        ", config says " + it->second.dump());
    }
  }
  return diags;
}

// Fills missing keys from the preset and base defaults. Resolving an
// already-resolved snapshot is a fixed point.
inline nlohmann::ordered_json resolve_config_json(const nlohmann::ordered_json& raw) {
  using namespace cfgdetail;
  flatmap flat;
  flatten(raw, "", flat);
  const std::string preset = flat.count("preset") ? flat["preset"].get<std::string>() : "";
  for (const auto& [key, value] : preset_pins(preset)) flat.try_emplace(key, value);
  for (const auto& [key, value] : preset_soft_defaults(preset)) flat.try_emplace(key, value);
  for (const auto& [key, value] : base_defaults()) flat.try_emplace(key, value);
  if (!preset.empty()) flat["preset"] = preset;
  return unflatten(flat);
}

inline ExperimentConfig experiment_from_json(const nlohmann::ordered_json& raw) {
  auto diags = validate_config_json(raw);
  if (!diags.empty()) {
    std::string msg = "invalid config:";
    for (const auto& d : diags) msg += "\n  - " + d;
    throw ConfigError(msg);
  }
  const auto j = resolve_config_json(raw);

  ExperimentConfig cfg;
  cfg.resolved = j;
  cfg.preset = j.value("preset", std::string());
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.run_id = j.value("run_id", std::string());
  cfg.image_size = j.at("image_size").get<int64_t>();

  cfg.gen.base_width = j["generator"]["base_width"].get<int64_t>();
  cfg.gen.n_res_blocks = j["generator"]["res_blocks"].get<int64_t>();
  cfg.disc.base_width = j["disc"]["base_width"].get<int64_t>();
  cfg.unet_arch.base_width = j["unet"]["base_width"].get<int64_t>();
  cfg.unet_arch.depth = j["unet"]["depth"].get<int64_t>();

  cfg.essnet.epochs = j["essnet"]["epochs"].get<int64_t>();
  cfg.essnet.batch_size = j["essnet"]["batch_size"].get<int64_t>();
  cfg.essnet.lr_g = j["essnet"]["lr_g"].get<double>();
  cfg.essnet.lr_d = j["essnet"]["lr_d"].get<double>();
  cfg.essnet.beta1 = j["essnet"]["beta1"].get<double>();
  cfg.essnet.beta2 = j["essnet"]["beta2"].get<double>();
  cfg.essnet.ablation_no_seg = j["essnet"]["ablation_no_seg"].get<bool>();
  cfg.essnet.checkpoint_every = j["essnet"]["checkpoint_every"].get<int64_t>();
  cfg.essnet.seed = cfg.seed;
  cfg.essnet.gen = cfg.gen;
  cfg.essnet.disc = cfg.disc;
  cfg.essnet.weights.lambda1 = j["loss"]["lambda1"].get<double>();
  cfg.essnet.weights.lambda2 = j["loss"]["lambda2"].get<double>();
  cfg.essnet.weights.lambda3 = j["loss"]["lambda3"].get<double>();
  cfg.essnet.weights.lambda4 = j["loss"]["lambda4"].get<double>();
  cfg.essnet.weights.lambda5 = j["loss"]["lambda5"].get<double>();
  cfg.essnet.adv_mode = adversarial_mode_from_string(j["loss"]["adversarial"].get<std::string>());

  cfg.unet_train.epochs = j["unet"]["epochs"].get<int64_t>();
  cfg.unet_train.batch_size = j["unet"]["batch_size"].get<int64_t>();
  cfg.unet_train.lr = j["unet"]["lr"].get<double>();
  cfg.unet_train.checkpoint_every = j["unet"]["checkpoint_every"].get<int64_t>();
  cfg.unet_train.seed = cfg.seed;
  cfg.unet_train.arch = cfg.unet_arch;

  if (j.contains("data")) {
    const auto& d = j["data"];
    cfg.data_a = d.value("a", std::string());
    cfg.data_b = d.value("b", std::string());
    cfg.data_test = d.value("test", std::string());
    if (d.contains("phantom")) {
      const auto& p = d["phantom"];
      cfg.phantom.enabled = p.value("enabled", false);
      cfg.phantom.size = p.value("size", int64_t(64));
      cfg.phantom.count_a = p.value("count_a", int64_t(20));
      cfg.phantom.count_b = p.value("count_b", int64_t(20));
      cfg.phantom.count_test = p.value("count_test", int64_t(8));
      cfg.phantom.noise_sigma = p.value("noise_sigma", 0.02);
    }
  }
  if (j.contains("arrangements")) cfg.arrangements = j["arrangements"].get<std::vector<int64_t>>();

  cfg.essnet.validate();
  cfg.unet_train.validate();
  return cfg;
}

inline nlohmann::ordered_json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return j;
}

inline std::vector<std::string> validate_config_file(const fs::path& path) {
  if (!fs::exists(path)) return {"config file does not exist: " + path.string()};
  nlohmann::ordered_json j;
  try {
    j = read_json_file(path);
  } catch (const ConfigError& e) {
    return {e.what()};
  }
  return validate_config_json(j);
}

inline ExperimentConfig load_experiment_config(const fs::path& path) {
  return experiment_from_json(read_json_file(path));
}

}  // namespace xmod
