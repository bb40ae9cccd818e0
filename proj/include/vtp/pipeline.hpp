#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vtp/masking.hpp"
#include "vtp/model.hpp"
#include "vtp/objectives.hpp"
#include "vtp/optimizer.hpp"
#include "vtp/token_store.hpp"

namespace vtp {

struct PairSamplerConfig {
  int clip_len = 5;
  double d_max = std::numeric_limits<double>::infinity();  // seconds
  std::uint64_t seed = 0;
};

struct PositivePair {
  TokenGrid clip_a, clip_b;
  int start_a = 0, start_b = 0;
};

/// Two clips from one video, starts uniform over the valid range and redrawn
/// until |start_a - start_b| <= d_max * fps. d_max = 0 reuses one start for
/// both clips; d_max = inf never rejects.
PositivePair sample_positive_pair(const VideoTokenStore& store,
                                  std::size_t video_index,
                                  const PairSamplerConfig& cfg, Rng& rng);

struct ClipPairBatch {
  // 2n grids: entries i and i+n come from the same video
  std::vector<TokenGrid> masked;
  std::vector<std::map<MaskPosition, std::int32_t>> targets;
  std::vector<TokenGrid> raw;
  std::vector<std::string> video_ids;

  int pairs() const { return static_cast<int>(masked.size()) / 2; }
};

/// Samples one positive pair per video and masks every clip independently.
/// Throws on duplicate video indices (a video cannot provide its own
/// negative) and on fewer than two videos.
ClipPairBatch build_batch(const VideoTokenStore& store,
                          const std::vector<std::size_t>& video_indices,
                          const PairSamplerConfig& sampler_cfg,
                          const MaskingConfig& masking_cfg, Rng& rng);

struct TrainConfig {
  int group_size = 4;            // 2n clips per contrastive group
  int accumulation_target = 16;  // clips per optimizer step
  int epochs = 1;
  int steps_per_epoch = 0;  // 0: one pass worth of groups per epoch
  double peak_lr = 1e-3;
  double warmup_ratio = 0.05;
  double weight_decay = 0.05;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  MaskingConfig masking;
  ObjectiveConfig objective;
  PairSamplerConfig sampler;
  bool cl_input_masked = true;
  bool linear_probe = false;  // fine-tuning only: freeze the backbone
  std::uint64_t seed = 0;

  int micro_batches_per_step() const {
    return accumulation_target / group_size;
  }
  void validate(std::size_t store_videos) const;
  int total_steps(std::size_t store_videos) const;
  int derived_steps_per_epoch(std::size_t store_videos) const;
};

struct LossReport {
  int step = 0;
  double lr = 0.0;
  std::optional<double> mask_loss;
  std::optional<double> mask_acc;
  std::optional<double> cl_loss;
  double combined = 0.0;
  double grad_norm = 0.0;
  double clip_scale = 1.0;
};

/// Header: step,lr,mask_loss,mask_acc,cl_loss,combined_loss,grad_norm,scale
std::string metrics_header();
std::string metrics_row(const LossReport& report);

struct MicroResult {
  Tensor loss;
  std::optional<double> mask_loss;
  std::optional<double> mask_acc;
  std::optional<double> cl_loss;
  double combined = 0.0;
};

/// Forward both heads on the shared (or split, when cl_input_masked is off)
/// inputs of one group and produce the combined objective.
MicroResult pretrain_group_loss(Tape& tape, const ClipPairBatch& batch,
                                const ModelParams& params,
                                const ModelConfig& model_cfg,
                                const TrainConfig& cfg,
                                const ForwardOptions& opts);

/// Accumulating pre-training step driver.
class Trainer {
 public:
  Trainer(ModelParams& params, const ModelConfig& model_cfg, TrainConfig cfg,
          std::size_t store_videos);

  /// Forward/backward one group; gradients accumulate. Returns a LossReport
  /// once accumulation_target clips have been seen (one optimizer step).
  std::optional<LossReport> micro_step(const ClipPairBatch& batch,
                                       const ForwardOptions& opts);

  int steps_taken() const { return steps_; }

 private:
  ModelParams& params_;
  const ModelConfig& model_cfg_;
  TrainConfig cfg_;
  std::vector<Tensor> trainable_;
  AdamState adam_;
  LrSchedule schedule_;
  int micro_count_ = 0;
  int steps_ = 0;
  double mask_loss_sum_ = 0.0, mask_acc_sum_ = 0.0, cl_loss_sum_ = 0.0,
         combined_sum_ = 0.0;
  int mask_terms_ = 0, cl_terms_ = 0;
};

struct CropConfig {
  bool three_spatial = false;  // {center} or {top-left, center, bottom-right}
  int temporal = 10;
  bool flip = false;
};

/// Mean of per-crop softmax scores over the configured temporal and spatial
/// crops (token-space crops of the stored grid).
std::vector<double> multi_crop_predict(const ModelParams& params,
                                       const ModelConfig& model_cfg,
                                       const VideoTokenStore& store,
                                       std::size_t video_index, int clip_len,
                                       const CropConfig& crops);

/// labels CSV: one "video_id,label_index" row per video.
std::map<std::string, int> load_labels(const std::string& path);

struct PretrainResult {
  int steps = 0;
  LossReport last;
};

/// Deterministic pre-training loop; writes one metrics row per optimizer
/// step. Aborts (std::runtime_error) on a non-finite loss, reporting the
/// last good step.
PretrainResult run_pretrain(const VideoTokenStore& store, ModelParams& params,
                            const ModelConfig& model_cfg,
                            const TrainConfig& cfg, std::ostream& metrics);

struct FinetuneResult {
  int steps = 0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};

/// Cross-entropy fine-tuning of the zero-initialized classifier (optionally
/// linear-probe: backbone frozen).
FinetuneResult run_finetune(const VideoTokenStore& store, ModelParams& params,
                            const ModelConfig& model_cfg,
                            const TrainConfig& cfg,
                            const std::map<std::string, int>& labels,
                            std::ostream& metrics);

/// Fraction of clips whose nearest CLS feature (by dot product) among the
/// other 2n-1 clips is their positive pair.
double pair_retrieval_top1(const VideoTokenStore& store, ModelParams& params,
                           const ModelConfig& model_cfg,
                           const TrainConfig& cfg);

}  // namespace vtp
