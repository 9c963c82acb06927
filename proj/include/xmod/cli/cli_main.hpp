#pragma once

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "xmod/config/experiment.hpp"
#include "xmod/data/phantom.hpp"
#include "xmod/data/prepare.hpp"
#include "xmod/eval/report.hpp"
#include "xmod/nn/model_summary.hpp"
#include "xmod/pipeline/pipeline.hpp"
#include "xmod/train/synthesize.hpp"
#include "xmod/version.hpp"

namespace xmod {

namespace clidetail {

inline std::pair<int64_t, int64_t> parse_range(const std::string& text, const char* flag) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError(std::string(flag) + " expects LO:HI, got '" + text + "'");
  try {
    return {std::stoll(text.substr(0, colon)), std::stoll(text.substr(colon + 1))};
  } catch (...) {
    throw ConfigError(std::string(flag) + " expects LO:HI, got '" + text + "'");
  }
}

inline int wrap_errors(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const TrainingAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const EvalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEval;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace clidetail

inline int cli_main(int argc, char** argv) {
  CLI::App app{"xmod: unpaired cross-modality image translation with an auxiliary segmentation "
               "branch, plus a downstream U-Net liver segmenter"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // honored for documentation purposes; every code path here is already
  // single-threaded and seeded
  (void)std::getenv("XMOD_DETERMINISTIC");

  // ---- prep --------------------------------------------------------------
  auto* prep = app.add_subcommand("prep", "ingest grayscale slices + labels into a canonical dataset");
  std::string prep_src, prep_modality, prep_range, prep_out;
  int prep_depth = 0;
  int64_t prep_size = 256;
  prep->add_option("--src", prep_src, "source dir with images/ and labels/")->required();
  prep->add_option("--modality", prep_modality, "ct or mr")->required()
      ->check(CLI::IsMember({"ct", "mr"}));
  prep->add_option("--liver-range", prep_range, "closed label intensity interval LO:HI");
  prep->add_option("--out", prep_out, "output dataset dir")->required();
  prep->add_option("--bit-depth", prep_depth, "source bit depth (default: ct 16, mr 12)");
  prep->add_option("--size", prep_size, "canonical square size (default 256)");

  // ---- phantom -----------------------------------------------------------
  auto* phantom = app.add_subcommand("phantom", "generate a synthetic phantom dataset");
  int64_t ph_size = 64, ph_count = 20;
  std::string ph_style = "a", ph_out, ph_frac;
  uint64_t ph_seed = 0;
  double ph_noise = 0.02;
  phantom->add_option("--size", ph_size, "image size (default 64)");
  phantom->add_option("--count", ph_count, "number of slices")->required();
  phantom->add_option("--style", ph_style, "a or b")->check(CLI::IsMember({"a", "b"}));
  phantom->add_option("--seed", ph_seed, "seed")->required();
  phantom->add_option("--out", ph_out, "output dataset dir")->required();
  phantom->add_option("--noise", ph_noise, "gaussian noise sigma (default 0.02)");
  phantom->add_option("--liver-frac", ph_frac, "liver radius fraction range LO:HI (percent of size, e.g. 0.10:0.20)");

  // ---- summary -----------------------------------------------------------
  auto* summary = app.add_subcommand("summary", "print per-layer tables, totals and reconciliation");
  std::string sum_config;
  int64_t sum_size = 0;
  summary->add_option("--config", sum_config, "experiment config (defaults to paper-scale)");
  summary->add_option("--image-size", sum_size, "input size for output-shape columns");

  // ---- train-essnet ------------------------------------------------------
  auto* tess = app.add_subcommand("train-essnet", "stage 1: train the translation+segmentation nets");
  std::string tess_config, tess_a, tess_b, tess_out;
  bool tess_ablation = false;
  tess->add_option("--config", tess_config, "experiment config JSON")->required();
  tess->add_option("--data-a", tess_a, "canonical A-modality dataset")->required();
  tess->add_option("--data-b", tess_b, "canonical B-modality dataset")->required();
  tess->add_option("--out", tess_out, "output dir")->required();
  tess->add_flag("--ablation-no-seg", tess_ablation, "drop the segmentation branch");

  // ---- synthesize --------------------------------------------------------
  auto* synth = app.add_subcommand("synthesize", "emit B-modality images for every liver-visible A slice");
  std::string sy_ckpt, sy_a, sy_out;
  synth->add_option("--ckpt", sy_ckpt, "essnet checkpoint dir")->required();
  synth->add_option("--data-a", sy_a, "canonical A-modality dataset")->required();
  synth->add_option("--out", sy_out, "output dataset dir")->required();

  // ---- train-unet --------------------------------------------------------
  auto* tun = app.add_subcommand("train-unet", "stage 2: train the segmenter on real (+synthetic) data");
  std::string tun_config, tun_real, tun_synth, tun_out;
  int64_t tun_take = 0;
  tun->add_option("--config", tun_config, "experiment config JSON")->required();
  tun->add_option("--real", tun_real, "real B-modality dataset")->required();
  tun->add_option("--synthetic", tun_synth, "synthetic B-modality dataset");
  tun->add_option("--take", tun_take, "number of synthetic images to mix in");
  tun->add_option("--out", tun_out, "output dir")->required();

  // ---- evaluate ----------------------------------------------------------
  auto* eval = app.add_subcommand("evaluate", "evaluate a U-Net checkpoint on a test dataset");
  std::string ev_ckpt, ev_data, ev_out, ev_label = "eval", ev_roc;
  double ev_threshold = 0.5;
  eval->add_option("--ckpt", ev_ckpt, "unet checkpoint dir")->required();
  eval->add_option("--data", ev_data, "test dataset dir")->required();
  eval->add_option("--out", ev_out, "report JSON path")->required();
  eval->add_option("--arrangement", ev_label, "arrangement label for tables");
  eval->add_option("--threshold", ev_threshold, "binarization threshold (default 0.5)");
  eval->add_option("--roc-csv", ev_roc, "optional ROC points CSV path");

  // ---- report ------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "combine report JSONs into comparison tables");
  std::vector<std::string> rep_runs;
  std::string rep_format = "txt", rep_out, rep_title = "Segmentation results";
  bool rep_reference = false;
  rep->add_option("--runs", rep_runs, "report JSON files")->expected(-1);
  rep->add_option("--format", rep_format, "csv or txt")->check(CLI::IsMember({"csv", "txt"}));
  rep->add_option("--out", rep_out, "write to file instead of stdout");
  rep->add_option("--title", rep_title, "table title (txt format)");
  rep->add_flag("--reference-targets", rep_reference,
                "print the full-scale reference tables instead of run results");

  // ---- pipeline ----------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "run the full two-stage workflow");
  std::string pipe_config, pipe_out;
  pipe->add_option("--config", pipe_config, "experiment config JSON")->required();
  pipe->add_option("--out", pipe_out, "output root (run dir is created inside)")->required();

  // ---- validate ----------------------------------------------------------
  auto* val = app.add_subcommand("validate", "check a config file; prints diagnostics");
  std::string val_config;
  val->add_option("--config", val_config, "experiment config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  using clidetail::wrap_errors;

  if (prep->parsed())
    return wrap_errors([&]() {
      const Modality modality = modality_from_string(prep_modality);
      PrepOptions opt = default_prep_options(modality);
      if (prep_depth != 0) opt.source_bit_depth = prep_depth;
      if (!prep_range.empty()) {
        auto [lo, hi] = clidetail::parse_range(prep_range, "--liver-range");
        opt.label_lo = lo;
        opt.label_hi = hi;
      }
      opt.target_size = prep_size;
      auto result = prepare_dataset(prep_src, modality, opt, prep_out);
      std::cout << "prepared " << result.manifest.entries.size() << " slices ("
                << result.manifest.liver_visible_count() << " liver-visible) under " << prep_out
                << "\n";
      for (const auto& err : result.slice_errors) std::cerr << "skipped " << err << "\n";
      return kExitOk;
    });

  if (phantom->parsed())
    return wrap_errors([&]() {
      PhantomSpec spec;
      spec.image_size = ph_size;
      spec.n_slices = ph_count;
      spec.noise_sigma = ph_noise;
      spec.modality_contrast =
          ph_style == "a" ? PhantomSpec::Contrast::A_style : PhantomSpec::Contrast::B_style;
      if (!ph_frac.empty()) {
        const auto colon = ph_frac.find(':');
        if (colon == std::string::npos)
          throw ConfigError("--liver-frac expects LO:HI fractions");
        spec.liver_radius_lo = std::stod(ph_frac.substr(0, colon));
        spec.liver_radius_hi = std::stod(ph_frac.substr(colon + 1));
      }
      auto result = generate_phantom_dataset(spec, ph_seed, ph_out);
      std::cout << "generated " << result.manifest.entries.size() << " slices under " << ph_out
                << "\n";
      return kExitOk;
    });

  if (summary->parsed())
    return wrap_errors([&]() {
      GeneratorConfig gen;
      DiscriminatorConfig disc;
      UNetConfig unet;
      int64_t size = 256;
      if (!sum_config.empty()) {
        auto cfg = load_experiment_config(sum_config);
        gen = cfg.gen;
        disc = cfg.disc;
        unet = cfg.unet_arch;
        size = cfg.image_size;
      }
      if (sum_size != 0) size = sum_size;
      std::cout << model_summary_text(gen, disc, unet, size);
      return kExitOk;
    });

  if (tess->parsed())
    return wrap_errors([&]() {
      auto cfg = load_experiment_config(tess_config);
      if (tess_ablation) cfg.essnet.ablation_no_seg = true;
      auto data_a = load_manifest(tess_a);
      auto data_b = load_manifest(tess_b);
      validate_manifest(data_a);
      validate_manifest(data_b);
      auto run = train_essnet<float>(cfg.essnet, data_a, data_b, tess_out);
      std::cout << "trained " << run.total_steps << " steps; loss log: " << run.loss_csv.string()
                << "\n";
      return kExitOk;
    });

  if (synth->parsed())
    return wrap_errors([&]() {
      auto data_a = load_manifest(sy_a);
      validate_manifest(data_a);
      auto result = synthesize<float>(sy_ckpt, data_a, sy_out);
      std::cout << "synthesized " << result.manifest.entries.size() << " images at "
                << result.frames_per_second << " fps under " << sy_out << "\n";
      return kExitOk;
    });

  if (tun->parsed())
    return wrap_errors([&]() {
      auto cfg = load_experiment_config(tun_config);
      auto real = load_manifest(tun_real);
      validate_manifest(real);
      std::optional<DatasetManifest> synthetic;
      if (!tun_synth.empty()) {
        synthetic = load_manifest(tun_synth);
        validate_manifest(*synthetic);
      }
      auto run = train_unet<float>(cfg.unet_train, real, synthetic ? &*synthetic : nullptr,
                                   tun_take, tun_out);
      std::cout << "trained " << run.total_steps << " steps; loss log: " << run.loss_csv.string()
                << "\n";
      return kExitOk;
    });

  if (eval->parsed())
    return wrap_errors([&]() {
      auto data = load_manifest(ev_data);
      validate_manifest(data);
      ROCCurve curve;
      auto report = evaluate_checkpoint<float>(ev_ckpt, data, ev_threshold, &curve);
      report.run_id = ev_ckpt;
      report.arrangement = ev_label;
      report.save(ev_out);
      if (!ev_roc.empty()) dump_roc_csv(curve, ev_roc);
      std::cout << "dice " << report.dice << "  iou " << report.iou;
      if (report.auc) std::cout << "  auc " << *report.auc;
      std::cout << "  (" << report.images << " images)\n";
      return kExitOk;
    });

  if (rep->parsed())
    return wrap_errors([&]() {
      std::string text;
      if (rep_reference) {
        const auto sweep = reference_arrangement_results();
        const auto ablation = reference_ablation_results();
        if (rep_format == "csv")
          text = format_table_csv(sweep) + format_table_csv(ablation);
        else
          text = format_table_text(sweep, "Reference full-scale arrangement sweep") + "\n" +
                 format_table_text(ablation, "Reference no-seg ablation comparison");
      } else {
        if (rep_runs.empty()) throw EvalError("report: pass --runs or --reference-targets");
        std::vector<MetricsReport> reports;
        for (const auto& path : rep_runs) reports.push_back(MetricsReport::load(path));
        text = rep_format == "csv" ? format_table_csv(reports)
                                   : format_table_text(reports, rep_title);
      }
      if (rep_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(rep_out);
        if (!out) throw EvalError("cannot write " + rep_out);
        out << text;
      }
      return kExitOk;
    });

  if (pipe->parsed()) return run_pipeline(pipe_config, pipe_out);

  if (val->parsed())
    return wrap_errors([&]() {
      auto diags = validate_config_file(val_config);
      if (diags.empty()) {
        std::cout << "config is valid\n";
        return kExitOk;
      }
      for (const auto& d : diags) std::cout << d << "\n";
      return kExitConfig;
    });

  return kExitConfig;
}

}  // namespace xmod
