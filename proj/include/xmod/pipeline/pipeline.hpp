#pragma once

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "xmod/config/experiment.hpp"
#include "xmod/data/phantom.hpp"
#include "xmod/eval/report.hpp"
#include "xmod/train/synthesize.hpp"

namespace xmod {

// Exit codes shared by the pipeline and the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitTraining = 4,
  kExitEval = 5,
};

namespace pipedetail {

inline std::string config_hash(const nlohmann::ordered_json& resolved) {
  const std::string dump = resolved.dump();
  uint64_t h = 1469598103934665603ull;
  for (char c : dump) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// A stage is complete when its marker exists and was written for the same
// resolved config; re-running such a stage is skipped.
inline bool stage_complete(const fs::path& dir, const std::string& stage,
                           const std::string& hash) {
  const fs::path marker = dir / ".stage_complete.json";
  if (!fs::exists(marker)) return false;
  std::ifstream in(marker);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (...) {
    return false;
  }
  return j.value("stage", std::string()) == stage && j.value("config_hash", std::string()) == hash;
}

inline void mark_stage_complete(const fs::path& dir, const std::string& stage,
                                const std::string& hash) {
  fs::create_directories(dir);
  std::ofstream out(dir / ".stage_complete.json");
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["config_hash"] = hash;
  out << j.dump(2) << "\n";
}

struct LockFile {
  fs::path path;
  explicit LockFile(const fs::path& run_dir) : path(run_dir / ".lock") {
    if (fs::exists(path))
      throw ConfigError("run directory is locked by another pipeline process (" + path.string() +
                        "); remove the lock if that process is gone");
    std::ofstream out(path);
    out << ::getpid() << "\n";
  }
  ~LockFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

inline std::string arrangement_label(int64_t real_count, int64_t take) {
  if (take == 0) return "Real only (" + std::to_string(real_count) + ")";
  return "Combined (" + std::to_string(real_count + take) + ")";
}

}  // namespace pipedetail

// Stage order: prep-check -> train-essnet -> synthesize -> train-unet (one
// per arrangement) -> evaluate -> report. Each stage is resumable from its
// artifacts; a failing stage names itself on stderr and maps to an exit
// code.
inline int run_pipeline(const fs::path& config_path, const fs::path& out_root) {
  ExperimentConfig cfg;
  {
    auto diags = validate_config_file(config_path);
    if (!diags.empty()) {
      std::cerr << "pipeline stage config failed:\n";
      for (const auto& d : diags) std::cerr << "  - " << d << "\n";
      return kExitConfig;
    }
    cfg = load_experiment_config(config_path);
  }
  const std::string hash = pipedetail::config_hash(cfg.resolved);
  const std::string run_id = cfg.run_id.empty() ? ("run_" + hash.substr(0, 12)) : cfg.run_id;
  const fs::path run_dir = out_root / run_id;

  std::string stage = "setup";
  try {
    fs::create_directories(run_dir);
    pipedetail::LockFile lock(run_dir);

    // byte-exact snapshot of the resolved config; a re-run must match
    const fs::path snapshot_path = run_dir / "config.json";
    const std::string snapshot = cfg.resolved.dump(2) + "\n";
    if (fs::exists(snapshot_path)) {
      std::ifstream in(snapshot_path);
      std::string existing{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
      if (existing != snapshot)
        throw ConfigError("run directory " + run_dir.string() +
                          " holds a different config snapshot; use a fresh directory");
    } else {
      std::ofstream out(snapshot_path);
      out << snapshot;
    }

    // ---- prep-check ------------------------------------------------------
    stage = "prep-check";
    fs::path a_dir, b_dir, test_dir;
    if (cfg.phantom.enabled) {
      a_dir = run_dir / "data" / "a";
      b_dir = run_dir / "data" / "b";
      test_dir = run_dir / "data" / "test";
      if (!pipedetail::stage_complete(run_dir / "data", stage, hash)) {
        PhantomSpec pa;
        pa.image_size = cfg.phantom.size;
        pa.n_slices = cfg.phantom.count_a;
        pa.noise_sigma = cfg.phantom.noise_sigma;
        pa.modality_contrast = PhantomSpec::Contrast::A_style;
        generate_phantom_dataset(pa, derive_seed(cfg.seed, "phantom/a"), a_dir);
        PhantomSpec pb = pa;
        pb.n_slices = cfg.phantom.count_b;
        pb.modality_contrast = PhantomSpec::Contrast::B_style;
        generate_phantom_dataset(pb, derive_seed(cfg.seed, "phantom/b"), b_dir);
        PhantomSpec pt = pb;
        pt.n_slices = cfg.phantom.count_test;
        generate_phantom_dataset(pt, derive_seed(cfg.seed, "phantom/test"), test_dir);
        pipedetail::mark_stage_complete(run_dir / "data", stage, hash);
      }
    } else {
      if (cfg.data_a.empty() || cfg.data_b.empty() || cfg.data_test.empty())
        throw DataError("data.a, data.b and data.test directories are required (or enable "
                        "data.phantom); prepare them with `xmod prep` or `xmod phantom`");
      a_dir = cfg.data_a;
      b_dir = cfg.data_b;
      test_dir = cfg.data_test;
      for (const auto& d : {a_dir, b_dir, test_dir})
        if (!fs::exists(d / "manifest.json"))
          throw DataError("dataset has no manifest.json: " + d.string() +
                          "; run `xmod prep --src ... --out " + d.string() + "` first");
    }
    auto data_a = load_manifest(a_dir);
    auto data_b = load_manifest(b_dir);
    auto data_test = load_manifest(test_dir);
    validate_manifest(data_a);
    validate_manifest(data_b);
    validate_manifest(data_test);
    const int64_t real_count = data_b.liver_visible_count();

    // ---- train-essnet ----------------------------------------------------
    stage = "train-essnet";
    const fs::path essnet_dir = run_dir / "essnet";
    if (!pipedetail::stage_complete(essnet_dir, stage, hash)) {
      train_essnet<float>(cfg.essnet, data_a, data_b, essnet_dir);
      pipedetail::mark_stage_complete(essnet_dir, stage, hash);
    }

    // ---- synthesize ------------------------------------------------------
    stage = "synthesize";
    const fs::path synth_dir = run_dir / "synth";
    if (!pipedetail::stage_complete(synth_dir, stage, hash)) {
      auto synth = synthesize<float>(essnet_dir / "checkpoints" / "last", data_a, synth_dir);
      nlohmann::ordered_json stats;
      stats["images"] = synth.manifest.entries.size();
      stats["frames_per_second"] = synth.frames_per_second;
      std::ofstream out(synth_dir / "synthesis_stats.json");
      out << stats.dump(2) << "\n";
      pipedetail::mark_stage_complete(synth_dir, stage, hash);
    }
    auto synth_manifest = load_manifest(synth_dir);

    // ---- train-unet per arrangement ---------------------------------------
    std::vector<std::pair<int64_t, fs::path>> unet_dirs;  // (take, dir)
    for (int64_t take : cfg.arrangements) {
      stage = "train-unet";
      if (take > static_cast<int64_t>(synth_manifest.entries.size()))
        throw DataError("arrangement requests " + std::to_string(take) +
                        " synthetic images but only " +
                        std::to_string(synth_manifest.entries.size()) + " were synthesized");
      const fs::path unet_dir = run_dir / ("unet_" + std::to_string(real_count + take));
      if (!pipedetail::stage_complete(unet_dir, stage, hash)) {
        train_unet<float>(cfg.unet_train, data_b, take > 0 ? &synth_manifest : nullptr, take,
                          unet_dir);
        pipedetail::mark_stage_complete(unet_dir, stage, hash);
      }
      unet_dirs.emplace_back(take, unet_dir);
    }

    // ---- evaluate ---------------------------------------------------------
    stage = "evaluate";
    const fs::path reports_dir = run_dir / "reports";
    fs::create_directories(reports_dir);
    std::vector<MetricsReport> reports;
    for (const auto& [take, unet_dir] : unet_dirs) {
      const fs::path report_path =
          reports_dir / ("report_" + std::to_string(real_count + take) + ".json");
      if (fs::exists(report_path)) {
        reports.push_back(MetricsReport::load(report_path));
        continue;
      }
      ROCCurve curve;
      auto report =
          evaluate_checkpoint<float>(unet_dir / "checkpoints" / "last", data_test, 0.5, &curve);
      report.run_id = run_id;
      report.arrangement = pipedetail::arrangement_label(real_count, take);
      report.save(report_path);
      dump_roc_csv(curve, reports_dir / ("roc_" + std::to_string(real_count + take) + ".csv"));
      reports.push_back(std::move(report));
    }

    // ---- report -----------------------------------------------------------
    stage = "report";
    {
      std::ofstream csv(reports_dir / "table3.csv");
      csv << format_table_csv(reports);
      std::ofstream txt(reports_dir / "table3.txt");
      txt << format_table_text(reports, "Segmentation results by training arrangement");
      std::ofstream ref(reports_dir / "reference_targets.csv");
      ref << format_table_csv(reference_arrangement_results());

      // two-row ablation-style comparison when a real-only run exists
      const MetricsReport* real_only = nullptr;
      const MetricsReport* combined = nullptr;
      for (const auto& r : reports) {
        if (r.arrangement.rfind("Real only", 0) == 0 && !real_only) real_only = &r;
        if (r.arrangement.rfind("Combined", 0) == 0 && !combined) combined = &r;
      }
      std::ofstream notes(reports_dir / "notes.txt");
      if (real_only && combined) {
        std::vector<MetricsReport> pair = {*real_only, *combined};
        std::ofstream csv4(reports_dir / "table4.csv");
        csv4 << format_table_csv(pair);
        std::ofstream txt4(reports_dir / "table4.txt");
        txt4 << format_table_text(pair, "Real-only vs combined training");
        // observational, not a gate: toy-scale runs are stochastic
        notes << "combined_dice " << (combined->dice >= real_only->dice ? ">=" : "<")
              << " real_only_dice (" << combined->dice << " vs " << real_only->dice << ")\n";
      } else {
        notes << "single arrangement; no comparison\n";
      }
      pipedetail::mark_stage_complete(reports_dir, stage, hash);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "pipeline stage " << stage << " failed: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "pipeline stage " << stage << " failed: " << e.what() << "\n";
    return kExitData;
  } catch (const TrainingAbort& e) {
    std::cerr << "pipeline stage " << stage << " failed: " << e.what() << "\n";
    return kExitTraining;
  } catch (const EvalError& e) {
    std::cerr << "pipeline stage " << stage << " failed: " << e.what() << "\n";
    return kExitEval;
  } catch (const std::exception& e) {
    std::cerr << "pipeline stage " << stage << " failed: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace xmod
