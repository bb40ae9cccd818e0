#pragma once

#include <ostream>
#include <string>

namespace vtp::cli {

// Command entry points shared by the vtp binary and the CLI tests. Each
// returns a process exit code: 0 success, 1 runtime failure, 2 usage or
// config error. Diagnostics go to `err`, payload output to `out`.

struct QuantizeArgs {
  std::string frames;  // .ppm file, directory of .ppm, or directory of those
  std::string out_store;
  int patch = 8;
  int vq_size = 8192;
  int fps = 2;
};
int run_quantize(const QuantizeArgs& args, std::ostream& out,
                 std::ostream& err);

struct CalibrateArgs {
  std::string dims;    // "TxHxW"
  std::string blocks;  // "a..b"
  int samples = 20000;
  std::uint64_t seed = 0;
};
int run_calibrate(const CalibrateArgs& args, std::ostream& out,
                  std::ostream& err);

struct TrainArgs {
  std::string config;
  std::string store;
  std::string out_dir;
  std::string labels;       // finetune/probe only
  std::string init_ckpt;    // optional warm start
  bool probe = false;       // force linear_probe
};
int run_pretrain_cmd(const TrainArgs& args, std::ostream& out,
                     std::ostream& err);
int run_finetune_cmd(const TrainArgs& args, std::ostream& out,
                     std::ostream& err);

struct ReconstructArgs {
  std::string store;
  std::string strategy = "block";  // block | iid
  std::string metric = "spatial";  // spatial | spatiotemporal
  std::string out_dir;
  int blocks = 5;
  double xi = 0.15;
  std::uint64_t seed = 0;
};
int run_reconstruct(const ReconstructArgs& args, std::ostream& out,
                    std::ostream& err);

struct EvalArgs {
  std::string ckpt;
  std::string store;
  std::string labels;
  std::string config;
  std::string scores_csv;  // optional per-video scores output path
};
int run_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

}  // namespace vtp::cli
