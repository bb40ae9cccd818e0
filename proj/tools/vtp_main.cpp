#include <CLI11.hpp>
#include <iostream>

#include "vtp/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"video token pre-training toolkit"};
  app.require_subcommand(1);

  vtp::cli::QuantizeArgs quantize;
  auto* cmd_quantize =
      app.add_subcommand("quantize", "quantize raw PPM rasters into a token store");
  cmd_quantize->add_option("--frames", quantize.frames,
                           ".ppm file, directory of frames, or directory of "
                           "per-video directories")
      ->required();
  cmd_quantize->add_option("--out", quantize.out_store, "output .vtk store")
      ->required();
  cmd_quantize->add_option("--patch", quantize.patch, "patch edge (default 8)");
  cmd_quantize->add_option("--vq-size", quantize.vq_size,
                           "content vocabulary size (default 8192)");
  cmd_quantize->add_option("--fps", quantize.fps,
                           "frames per second recorded in the store");

  vtp::cli::CalibrateArgs calibrate;
  auto* cmd_calibrate = app.add_subcommand(
      "calibrate-masks", "estimate induced block-masking ratios");
  cmd_calibrate->add_option("--dims", calibrate.dims, "grid dims TxHxW")
      ->required();
  cmd_calibrate->add_option("--blocks", calibrate.blocks,
                            "block count or range a..b")
      ->required();
  cmd_calibrate->add_option("--samples", calibrate.samples,
                            "Monte-Carlo draws per count (default 20000)");
  cmd_calibrate->add_option("--seed", calibrate.seed, "sampler seed");

  vtp::cli::TrainArgs pretrain;
  auto* cmd_pretrain =
      app.add_subcommand("pretrain", "run masked-token + contrastive pre-training");
  cmd_pretrain->add_option("--config", pretrain.config, "run config file")
      ->required();
  cmd_pretrain->add_option("--store", pretrain.store, ".vtk token store")
      ->required();
  cmd_pretrain->add_option("--out", pretrain.out_dir, "output directory")
      ->required();
  cmd_pretrain->add_option("--init-ckpt", pretrain.init_ckpt,
                           "optional warm-start checkpoint");

  vtp::cli::TrainArgs finetune;
  auto* cmd_finetune =
      app.add_subcommand("finetune", "fine-tune a classifier on labeled videos");
  cmd_finetune->add_option("--config", finetune.config, "run config file")
      ->required();
  cmd_finetune->add_option("--store", finetune.store, ".vtk token store")
      ->required();
  cmd_finetune->add_option("--labels", finetune.labels,
                           "labels CSV (video_id,label)")
      ->required();
  cmd_finetune->add_option("--out", finetune.out_dir, "output directory")
      ->required();
  cmd_finetune->add_option("--ckpt", finetune.init_ckpt,
                           "pre-trained checkpoint to start from");

  vtp::cli::TrainArgs probe = finetune;
  auto* cmd_probe = app.add_subcommand(
      "probe", "linear probe: train only the classifier on frozen features");
  cmd_probe->add_option("--config", probe.config, "run config file")->required();
  cmd_probe->add_option("--store", probe.store, ".vtk token store")->required();
  cmd_probe->add_option("--labels", probe.labels, "labels CSV")->required();
  cmd_probe->add_option("--out", probe.out_dir, "output directory")->required();
  cmd_probe->add_option("--ckpt", probe.init_ckpt,
                        "pre-trained checkpoint to start from");

  vtp::cli::ReconstructArgs reconstruct;
  auto* cmd_reconstruct = app.add_subcommand(
      "reconstruct", "nearest-visible-neighbour mask reconstruction report");
  cmd_reconstruct->add_option("--store", reconstruct.store, ".vtk token store")
      ->required();
  cmd_reconstruct->add_option("--strategy", reconstruct.strategy,
                              "block or iid (default block)");
  cmd_reconstruct->add_option("--metric", reconstruct.metric,
                              "spatial or spatiotemporal (default spatial)");
  cmd_reconstruct->add_option("--blocks", reconstruct.blocks,
                              "blocks per mask (default 5)");
  cmd_reconstruct->add_option("--xi", reconstruct.xi,
                              "iid masking probability (default 0.15)");
  cmd_reconstruct->add_option("--seed", reconstruct.seed, "mask seed");
  cmd_reconstruct->add_option("--out-dir", reconstruct.out_dir,
                              "directory for token-map PGM images");

  vtp::cli::EvalArgs eval_args;
  auto* cmd_eval =
      app.add_subcommand("eval", "multi-crop classifier evaluation");
  cmd_eval->add_option("--ckpt", eval_args.ckpt, "classifier checkpoint")
      ->required();
  cmd_eval->add_option("--store", eval_args.store, ".vtk token store")
      ->required();
  cmd_eval->add_option("--labels", eval_args.labels, "labels CSV")->required();
  cmd_eval->add_option("--config", eval_args.config,
                       "run config (model shape and crop settings)")
      ->required();
  cmd_eval->add_option("--scores", eval_args.scores_csv,
                       "also write the per-video scores CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (cmd_quantize->parsed())
    return vtp::cli::run_quantize(quantize, std::cout, std::cerr);
  if (cmd_calibrate->parsed())
    return vtp::cli::run_calibrate(calibrate, std::cout, std::cerr);
  if (cmd_pretrain->parsed())
    return vtp::cli::run_pretrain_cmd(pretrain, std::cout, std::cerr);
  if (cmd_finetune->parsed())
    return vtp::cli::run_finetune_cmd(finetune, std::cout, std::cerr);
  if (cmd_probe->parsed()) {
    probe.probe = true;
    return vtp::cli::run_finetune_cmd(probe, std::cout, std::cerr);
  }
  if (cmd_reconstruct->parsed())
    return vtp::cli::run_reconstruct(reconstruct, std::cout, std::cerr);
  if (cmd_eval->parsed())
    return vtp::cli::run_eval(eval_args, std::cout, std::cerr);
  return 2;
}
