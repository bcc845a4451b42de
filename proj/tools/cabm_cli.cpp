// cabm: content-aware mixed-precision super-resolution toolkit.
//
// Subcommands cover the full workflow: train a quantized supernet with
// per-layer bit selectors, collect (edge score, bit config) records, build
// Edge-to-Bit lookup tables, fine-tune under the table, and run or evaluate
// the patch-based inference pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "cabm/checkpoint.hpp"
#include "cabm/dataset.hpp"
#include "cabm/image_io.hpp"
#include "cabm/metrics.hpp"
#include "cabm/pipeline.hpp"
#include "cabm/text.hpp"
#include "cabm/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cabm;

namespace {

struct RunSpec {
  SupernetSpec net;
  uint64_t net_seed = 1234;
  bool synthetic = true;
  int count = 96;
  int64_t lr_size = 24;
  uint64_t data_seed = 7;
  std::string data_dir;
  TrainConfig train;
  std::optional<TrainConfig> finetune;
};

TrainConfig parse_train_block(const json& j, const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.cosine = j.value("cosine", cfg.cosine);
  cfg.lambda_bitops = j.value("lambda", cfg.lambda_bitops);
  cfg.edge_precision = j.value("edge_precision", cfg.edge_precision);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  return cfg;
}

RunSpec load_run_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  RunSpec spec;
  if (j.contains("net")) {
    const json& n = j["net"];
    spec.net.num_blocks = n.value("num_blocks", spec.net.num_blocks);
    spec.net.channels = n.value("channels", spec.net.channels);
    spec.net.scale = n.value("scale", spec.net.scale);
    spec.net.weight_bit = n.value("weight_bit", spec.net.weight_bit);
    if (n.contains("candidate_bits"))
      spec.net.candidate_bits = n["candidate_bits"].get<std::vector<int>>();
    spec.net_seed = n.value("seed", spec.net_seed);
  }
  spec.net.validate();
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    const std::string kind = d.value("kind", "synthetic");
    if (kind == "synthetic") {
      spec.synthetic = true;
      spec.count = d.value("count", spec.count);
      spec.lr_size = d.value("lr_size", spec.lr_size);
      spec.data_seed = d.value("seed", spec.data_seed);
    } else if (kind == "dir") {
      spec.synthetic = false;
      spec.data_dir = d.value("path", "");
      if (spec.data_dir.empty()) throw Error("config: dataset.kind=dir needs dataset.path");
    } else {
      throw Error("config: unknown dataset.kind '" + kind + "'");
    }
  }
  if (j.contains("train")) spec.train = parse_train_block(j["train"], spec.train);
  if (j.contains("finetune")) spec.finetune = parse_train_block(j["finetune"], spec.train);
  return spec;
}

Dataset load_data(const RunSpec& spec) {
  if (spec.synthetic)
    return make_synthetic_dataset(spec.count, spec.lr_size, spec.net.scale, spec.data_seed);
  return load_dataset_dir(spec.data_dir, spec.net.scale);
}

int64_t parse_beta(const std::string& text) {
  if (text == "auto") return -1;
  return parse_int(text);
}

struct ImageEval {
  std::string name;
  EvalResult eval;
};

void print_eval_table(const std::vector<ImageEval>& rows) {
  std::printf("%-20s %10s %6s %8s %8s\n", "image", "GBitOPs", "FAB", "PSNR", "SSIM");
  double psnr_acc = 0, ssim_acc = 0, fab_acc = 0, bops_acc = 0;
  for (const auto& row : rows) {
    std::printf("%-20s %10.4f %6.2f %8.2f %8.4f\n", row.name.c_str(),
                row.eval.total_bitops / 1e9, row.eval.fab, row.eval.psnr, row.eval.ssim);
    psnr_acc += row.eval.psnr;
    ssim_acc += row.eval.ssim;
    fab_acc += row.eval.fab;
    bops_acc += row.eval.total_bitops;
  }
  const double n = static_cast<double>(rows.size());
  std::printf("%-20s %10.4f %6.2f %8.2f %8.4f\n", "mean", bops_acc / n / 1e9, fab_acc / n,
              psnr_acc / n, ssim_acc / n);
}

std::vector<ImageEval> eval_dataset(SuperNetF& net, const EdgeToBitLUT& lut, const Dataset& data,
                                    int64_t patch_size, int threads) {
  std::vector<ImageEval> rows;
  for (size_t i = 0; i < data.items.size(); ++i) {
    RunResult res =
        run_sr(data.items[i].lr, net, lut, patch_size, &data.items[i].hr, threads);
    char name[32];
    std::snprintf(name, sizeof(name), "%03zu", i);
    rows.push_back(ImageEval{name, std::move(res.eval)});
  }
  return rows;
}

void write_eval_rows_csv(const std::string& path, const std::vector<ImageEval>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "image,gbitops,fab,psnr,ssim\n";
  for (const auto& row : rows)
    out << row.name << "," << format_double(row.eval.total_bitops / 1e9) << ","
        << format_double(row.eval.fab) << "," << format_double(row.eval.psnr) << ","
        << format_double(row.eval.ssim) << "\n";
}

std::vector<TensorF> dataset_lr_patches(const Dataset& data, int64_t patch_size) {
  std::vector<TensorF> patches;
  for (const auto& item : data.items) {
    auto [grid, p] = split_patches(item.lr, patch_size);
    for (auto& patch : p) patches.push_back(std::move(patch));
  }
  return patches;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"content-aware mixed-precision super-resolution toolkit"};
  app.require_subcommand(1);

  uint64_t seed_override = 0;
  bool seed_given = false;
  app.add_option("--seed", seed_override, "override every configured seed")
      ->envname("CABM_SEED")
      ->each([&](const std::string&) { seed_given = true; });

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the supernet and its bit selectors");
  std::string train_config, train_out = "supernet.ckpt", train_loss_csv;
  std::string train_sampling = "selector";
  train_cmd->add_option("--config", train_config, "JSON run configuration")->required();
  train_cmd->add_option("--out", train_out, "output checkpoint path");
  train_cmd->add_option("--loss-csv", train_loss_csv, "write per-epoch losses as CSV");
  train_cmd->add_option("--sampling", train_sampling,
                        "'selector' trains MLP selectors; 'bitops' / 'uniform' train shared "
                        "weights under sampled configurations instead");

  // ---- collect ----
  auto* collect_cmd =
      app.add_subcommand("collect", "emit (edge, bitops, config) records for LUT building");
  std::string collect_ckpt, collect_out = "records.csv", collect_data;
  int64_t collect_patch = 96;
  double collect_f = 0.01;
  bool collect_synth = false;
  int collect_count = 32;
  int64_t collect_lr_size = 48;
  uint64_t collect_data_seed = 7;
  collect_cmd->add_option("--checkpoint", collect_ckpt, "trained checkpoint (with selectors)")
      ->required();
  collect_cmd->add_option("--data", collect_data, "dataset dir with lr/ images");
  collect_cmd->add_flag("--synthetic", collect_synth, "use a synthetic calibration set");
  collect_cmd->add_option("--count", collect_count, "synthetic image count");
  collect_cmd->add_option("--lr-size", collect_lr_size, "synthetic LR image size");
  collect_cmd->add_option("--data-seed", collect_data_seed, "synthetic data seed");
  collect_cmd->add_option("--patch-size", collect_patch, "LR patch size");
  collect_cmd->add_option("--f", collect_f, "edge score precision F");
  collect_cmd->add_option("--out", collect_out, "output records CSV");

  // ---- build-lut ----
  auto* build_cmd = app.add_subcommand("build-lut", "build an Edge-to-Bit lookup table");
  std::string build_records, build_out = "table.lut", build_strategy = "S1", build_beta = "auto";
  int64_t build_de = 10;
  double build_f = 0.01;
  build_cmd->add_option("--records", build_records, "records CSV from `collect`")->required();
  build_cmd->add_option("--strategy", build_strategy, "S1 (min BitOPs), S2 (max), S3 (random)");
  build_cmd->add_option("--de", build_de, "expansion in edge-grid steps");
  build_cmd->add_option("--beta", build_beta, "expansion threshold index, or 'auto'");
  build_cmd->add_option("--f", build_f, "edge score precision F");
  build_cmd->add_option("--out", build_out, "output LUT path");

  // ---- finetune ----
  auto* ft_cmd = app.add_subcommand("finetune", "fine-tune the supernet under a built LUT");
  std::string ft_ckpt, ft_lut, ft_config, ft_out = "supernet_ft.ckpt", ft_loss_csv;
  ft_cmd->add_option("--checkpoint", ft_ckpt, "trained checkpoint")->required();
  ft_cmd->add_option("--lut", ft_lut, "LUT file")->required();
  ft_cmd->add_option("--config", ft_config, "JSON run configuration")->required();
  ft_cmd->add_option("--out", ft_out, "output checkpoint path");
  ft_cmd->add_option("--loss-csv", ft_loss_csv, "write per-epoch losses as CSV");

  // ---- infer ----
  auto* infer_cmd = app.add_subcommand("infer", "super-resolve one image through the pipeline");
  std::string infer_ckpt, infer_lut, infer_in, infer_out = "sr.png", infer_csv, infer_hr;
  int64_t infer_patch = 96;
  int infer_threads = 0;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "checkpoint")->required();
  infer_cmd->add_option("--lut", infer_lut, "LUT file")->required();
  infer_cmd->add_option("--input", infer_in, "LR input image (PNG/PPM/PGM)")->required();
  infer_cmd->add_option("--output", infer_out, "SR output image");
  infer_cmd->add_option("--csv", infer_csv, "per-patch evaluation CSV");
  infer_cmd->add_option("--hr", infer_hr, "optional HR reference for PSNR/SSIM");
  infer_cmd->add_option("--patch-size", infer_patch, "LR patch size");
  infer_cmd->add_option("--threads", infer_threads, "worker threads (0 = auto)");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "evaluate quality/cost over a dataset");
  std::string eval_ckpt, eval_lut, eval_data, eval_csv;
  int64_t eval_patch = 96;
  int eval_threads = 0;
  bool eval_metrics_only = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint");
  eval_cmd->add_option("--lut", eval_lut, "LUT file");
  eval_cmd->add_option("--data", eval_data, "dataset dir with lr/ and hr/")->required();
  eval_cmd->add_option("--csv", eval_csv, "write per-image rows as CSV");
  eval_cmd->add_option("--patch-size", eval_patch, "LR patch size");
  eval_cmd->add_option("--threads", eval_threads, "worker threads (0 = auto)");
  eval_cmd->add_flag("--metrics-only", eval_metrics_only,
                     "compare lr/ images against hr/ directly (no network)");

  // ---- ablate ----
  auto* ab_cmd = app.add_subcommand("ablate", "sweep LUT settings and compare quality/cost");
  std::string ab_ckpt, ab_records, ab_data, ab_mode = "de";
  std::vector<int64_t> ab_de_values{10, 20, 30, 40, 80};
  std::string ab_beta = "auto";
  double ab_f = 0.01;
  int64_t ab_patch = 96;
  int ab_ft_epochs = 0;
  uint64_t ab_seed = 0;
  ab_cmd->add_option("--checkpoint", ab_ckpt, "trained checkpoint")->required();
  ab_cmd->add_option("--records", ab_records, "records CSV")->required();
  ab_cmd->add_option("--data", ab_data, "dataset dir with lr/ and hr/")->required();
  ab_cmd->add_option("--mode", ab_mode, "'de' sweeps expansions, 'strategy' compares S1/S2/S3");
  ab_cmd->add_option("--de-values", ab_de_values, "expansion values for mode=de");
  ab_cmd->add_option("--de", ab_de_values, "alias for --de-values")->excludes("--de-values");
  ab_cmd->add_option("--beta", ab_beta, "expansion threshold index, or 'auto'");
  ab_cmd->add_option("--f", ab_f, "edge score precision F");
  ab_cmd->add_option("--patch-size", ab_patch, "LR patch size");
  ab_cmd->add_option("--finetune-epochs", ab_ft_epochs,
                     "fine-tune a copy of the net per setting before evaluating");
  ab_cmd->add_option("--s3-seed", ab_seed, "seed for the S3 strategy");

  // ---- gen-data ----
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic dataset to disk");
  std::string gen_out = "data";
  int gen_count = 32;
  int64_t gen_lr_size = 48;
  int gen_scale = 2;
  uint64_t gen_seed = 7;
  gen_cmd->add_option("--out", gen_out, "output directory (creates lr/ and hr/)");
  gen_cmd->add_option("--count", gen_count, "number of image pairs");
  gen_cmd->add_option("--lr-size", gen_lr_size, "LR image size");
  gen_cmd->add_option("--scale", gen_scale, "upscaling factor (2 or 4)");
  gen_cmd->add_option("--data-seed", gen_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      RunSpec spec = load_run_spec(train_config);
      if (seed_given) {
        spec.train.seed = seed_override;
        spec.net_seed = seed_override;
      }
      std::printf("train: blocks=%d channels=%d scale=%d epochs=%d lambda=%g seed=%llu\n",
                  spec.net.num_blocks, spec.net.channels, spec.net.scale, spec.train.epochs,
                  spec.train.lambda_bitops, static_cast<unsigned long long>(spec.train.seed));
      Dataset data = load_data(spec);
      SuperNetF net(spec.net, spec.net_seed);
      calibrate_alphas(net, data);
      LossCurve curve;
      if (train_sampling == "selector") {
        auto selectors = make_selectors<float>(spec.net, spec.net_seed + 1);
        curve = train_supernet(net, selectors, data, spec.train);
        save_checkpoint(train_out, net, &selectors);
      } else if (train_sampling == "bitops" || train_sampling == "uniform") {
        const int64_t h = data.items.front().lr.shape.h;
        const int64_t w = data.items.front().lr.shape.w;
        auto samples = enumerate_configs(spec.net, h, w, 20000, spec.train.seed);
        DifficultyLevels levels;
        if (train_sampling == "bitops")
          levels = bucket_by_terciles(std::move(samples));
        else
          levels.buckets[0] = std::move(samples);  // one bucket = uniform draws
        curve = train_with_bitops_sampling(net, data, levels, spec.train);
        save_checkpoint(train_out, net, nullptr);
      } else {
        throw Error("train: unknown --sampling '" + train_sampling + "'");
      }
      if (!train_loss_csv.empty()) save_loss_curve(train_loss_csv, curve);
      std::printf("train: final loss %.6f (l1 %.6f) -> %s\n", curve.back().loss,
                  curve.back().l1, train_out.c_str());
    } else if (*collect_cmd) {
      LoadedCheckpoint ckpt = load_checkpoint(collect_ckpt);
      if (!ckpt.has_selectors)
        throw Error("collect: checkpoint has no selectors; train one with `train`");
      Dataset data;
      if (!collect_data.empty())
        data = load_dataset_dir(collect_data, ckpt.spec.scale);
      else if (collect_synth)
        data = make_synthetic_dataset(collect_count, collect_lr_size, ckpt.spec.scale,
                                      collect_data_seed);
      else
        throw Error("collect: pass --data DIR or --synthetic");
      auto patches = dataset_lr_patches(data, collect_patch);
      auto records = collect_records(ckpt.net, ckpt.selectors, patches, collect_f);
      save_records(collect_out, records);
      std::printf("collect: %zu records from %zu patches -> %s\n", records.size(),
                  patches.size(), collect_out.c_str());
    } else if (*build_cmd) {
      auto records = load_records(build_records, build_f);
      EdgeToBitLUT lut = build_lut(records, strategy_from_name(build_strategy), build_f,
                                   build_de, parse_beta(build_beta), seed_override);
      save_lut(build_out, lut);
      std::printf("build-lut: %s de=%lld beta=%lld R=%lld layers=%d seed=%llu -> %s\n",
                  strategy_name(lut.strategy).c_str(), static_cast<long long>(lut.delta_e),
                  static_cast<long long>(lut.beta), static_cast<long long>(lut.R), lut.layers,
                  static_cast<unsigned long long>(seed_override), build_out.c_str());
    } else if (*ft_cmd) {
      RunSpec spec = load_run_spec(ft_config);
      TrainConfig cfg = spec.finetune ? *spec.finetune : spec.train;
      if (seed_given) cfg.seed = seed_override;
      LoadedCheckpoint ckpt = load_checkpoint(ft_ckpt);
      EdgeToBitLUT lut = load_lut(ft_lut);
      Dataset data = load_data(spec);
      std::printf("finetune: epochs=%d lr=%g seed=%llu\n", cfg.epochs, cfg.lr,
                  static_cast<unsigned long long>(cfg.seed));
      LossCurve curve = finetune_cabm(ckpt.net, lut, data, cfg);
      save_checkpoint(ft_out, ckpt.net, ckpt.has_selectors ? &ckpt.selectors : nullptr);
      if (!ft_loss_csv.empty()) save_loss_curve(ft_loss_csv, curve);
      if (!curve.empty())
        std::printf("finetune: final l1 %.6f -> %s\n", curve.back().l1, ft_out.c_str());
    } else if (*infer_cmd) {
      LoadedCheckpoint ckpt = load_checkpoint(infer_ckpt);
      EdgeToBitLUT lut = load_lut(infer_lut);
      TensorF img = ensure_rgb(load_image(infer_in));
      std::optional<TensorF> hr;
      if (!infer_hr.empty()) hr = ensure_rgb(load_image(infer_hr));
      RunResult res = run_sr(img, ckpt.net, lut, infer_patch, hr ? &*hr : nullptr,
                             infer_threads);
      save_image(infer_out, res.sr);
      if (!infer_csv.empty()) save_eval_csv(infer_csv, res.eval);
      std::printf("infer: %lldx%lld -> %lldx%lld, FAB %.2f, %.4f GBitOPs",
                  static_cast<long long>(img.shape.w), static_cast<long long>(img.shape.h),
                  static_cast<long long>(res.sr.shape.w),
                  static_cast<long long>(res.sr.shape.h), res.eval.fab,
                  res.eval.total_bitops / 1e9);
      if (hr) std::printf(", PSNR %.2f dB, SSIM %.4f", res.eval.psnr, res.eval.ssim);
      std::printf(" -> %s\n", infer_out.c_str());
    } else if (*eval_cmd) {
      if (eval_metrics_only) {
        Dataset data = load_dataset_dir(eval_data, 1);
        std::vector<ImageEval> rows;
        for (size_t i = 0; i < data.items.size(); ++i) {
          ImageEval row;
          char name[32];
          std::snprintf(name, sizeof(name), "%03zu", i);
          row.name = name;
          row.eval.psnr = psnr(data.items[i].lr, data.items[i].hr);
          row.eval.ssim = ssim(data.items[i].lr, data.items[i].hr);
          rows.push_back(std::move(row));
        }
        print_eval_table(rows);
        if (!eval_csv.empty()) write_eval_rows_csv(eval_csv, rows);
      } else {
        if (eval_ckpt.empty() || eval_lut.empty())
          throw Error("eval: --checkpoint and --lut are required unless --metrics-only");
        LoadedCheckpoint ckpt = load_checkpoint(eval_ckpt);
        EdgeToBitLUT lut = load_lut(eval_lut);
        Dataset data = load_dataset_dir(eval_data, ckpt.spec.scale);
        auto rows = eval_dataset(ckpt.net, lut, data, eval_patch, eval_threads);
        print_eval_table(rows);
        if (!eval_csv.empty()) write_eval_rows_csv(eval_csv, rows);
      }
    } else if (*ab_cmd) {
      LoadedCheckpoint ckpt = load_checkpoint(ab_ckpt);
      auto records = load_records(ab_records, ab_f);
      Dataset data = load_dataset_dir(ab_data, ckpt.spec.scale);
      struct Setting {
        std::string label;
        Strategy strategy;
        int64_t de;
      };
      std::vector<Setting> settings;
      if (ab_mode == "de") {
        for (int64_t de : ab_de_values)
          settings.push_back({"S1 de=" + std::to_string(de), Strategy::S1, de});
      } else if (ab_mode == "strategy") {
        for (Strategy s : {Strategy::S1, Strategy::S2, Strategy::S3})
          settings.push_back({strategy_name(s) + " de=" + std::to_string(ab_de_values.front()),
                              s, ab_de_values.front()});
      } else {
        throw Error("ablate: unknown --mode '" + ab_mode + "'");
      }
      std::printf("%-16s %10s %6s %8s %8s\n", "setting", "GBitOPs", "FAB", "PSNR", "SSIM");
      for (const auto& setting : settings) {
        EdgeToBitLUT lut = build_lut(records, setting.strategy, ab_f, setting.de,
                                     parse_beta(ab_beta), ab_seed);
        SuperNetF net = ckpt.net;  // fresh weights per setting
        if (ab_ft_epochs > 0) {
          TrainConfig cfg;
          cfg.epochs = ab_ft_epochs;
          cfg.seed = ab_seed + 1;
          finetune_cabm(net, lut, data, cfg);
        }
        double psnr_acc = 0, ssim_acc = 0, fab_acc = 0, bops_acc = 0;
        for (const auto& item : data.items) {
          RunResult res = run_sr(item.lr, net, lut, ab_patch, &item.hr);
          psnr_acc += res.eval.psnr;
          ssim_acc += res.eval.ssim;
          fab_acc += res.eval.fab;
          bops_acc += res.eval.total_bitops;
        }
        const double n = static_cast<double>(data.items.size());
        std::printf("%-16s %10.4f %6.2f %8.2f %8.4f\n", setting.label.c_str(),
                    bops_acc / n / 1e9, fab_acc / n, psnr_acc / n, ssim_acc / n);
      }
    } else if (*gen_cmd) {
      Dataset data = make_synthetic_dataset(gen_count, gen_lr_size, gen_scale,
                                            seed_given ? seed_override : gen_seed);
      save_dataset_dir(gen_out, data);
      std::printf("gen-data: %d pairs (%lldx%lld LR, x%d) seed=%llu -> %s\n", gen_count,
                  static_cast<long long>(gen_lr_size), static_cast<long long>(gen_lr_size),
                  gen_scale,
                  static_cast<unsigned long long>(seed_given ? seed_override : gen_seed),
                  gen_out.c_str());
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
