#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vtp/checkpoint.hpp"
#include "vtp/ops.hpp"
#include "vtp/tensor.hpp"
#include "vtp/token_grid.hpp"

namespace vtp {

/// Attention layouts compared in the architecture ablation. kTemporalDualSpatial
/// is the default: temporal attention, then one block whose height and width
/// attention outputs are concatenated before the output projection.
enum class AttentionLayout {
  kJoint,                // TxHxW
  kTemporalSpatial,      // T,HxW
  kTemporalHeightWidth,  // T,H,W
  kTemporalDualSpatial,  // T,H|W
};

enum class LayerNormPosition { kPost, kPre };

AttentionLayout parse_layout(const std::string& name);
std::string layout_name(AttentionLayout layout);

struct ClHeadConfig {
  int layers = 3;
  int intermediate = 4096;
  int output = 256;
};

struct ModelConfig {
  int layers = 6;
  int dim = 512;
  int heads = 8;
  int head_dim = 64;  // heads*head_dim need not equal dim
  int mlp_dim = 2048;
  Vocabulary vocab;
  int max_t = 5;
  int max_h = 16;
  int max_w = 16;
  double dropout = 0.1;
  AttentionLayout layout = AttentionLayout::kTemporalDualSpatial;
  LayerNormPosition ln_position = LayerNormPosition::kPost;
  ClHeadConfig cl_head;
  int num_classes = 0;  // classifier head present when > 0
  bool scale_attention = true;  // 1/sqrt(head_dim) on attention logits
  bool normalize_cl_features = false;
  double ln_eps = 1e-5;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  double init_std = 0.02;
  std::uint64_t init_seed = 0;

  void validate() const;
};

struct AttnBlockParams {
  Tensor wq, wk, wv;  // (heads*head_dim x dim)
  Tensor wout;        // (dim x heads*head_dim), doubled width for the dual block
  Tensor ln_gain, ln_bias;
};

struct LayerParams {
  std::optional<AttnBlockParams> joint, time, space, height, width;
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  Tensor mlp_ln_gain, mlp_ln_bias;
};

struct ClLayerParams {
  Tensor w, b;
  Tensor bn_gain, bn_bias;       // absent on the final layer
  Tensor bn_mean, bn_var;        // running buffers, not optimized
};

struct ModelParams {
  Tensor token_embedding;  // ((vq_size+3) x dim); doubles as W_word
  Tensor pos_t, pos_h, pos_w;
  Tensor embed_ln_gain, embed_ln_bias;
  std::vector<LayerParams> layers;
  Tensor final_ln_gain, final_ln_bias;  // pre-layer-norm layout only
  Tensor token_head_w, token_head_b;
  Tensor token_head_ln_gain, token_head_ln_bias;
  Tensor word_bias;  // (vq_size), trained independently of the tied weights
  std::vector<ClLayerParams> cl_layers;
  Tensor classifier_w, classifier_b;  // zero-initialized

  static ModelParams init(const ModelConfig& cfg);

  std::vector<Tensor> trainable() const;
  NamedTensors named_all() const;  // trainable + batch-norm buffers
  void zero_grads() const;

  /// Linear per-axis resize of the positional tables. Identical lengths are
  /// returned bit-exactly.
  void interpolate_positions(int new_t, int new_h, int new_w);

  void save(const std::string& path) const;
  /// allow_missing_classifier lets a fine-tune model start from a pre-train
  /// checkpoint (classifier stays zero-initialized).
  void load(const std::string& path, bool allow_missing_classifier = false);
};

Tensor interpolate_table(const Tensor& table, int new_len);

enum class ForwardMode { kPretrain, kFinetune };

struct HiddenState {
  Tensor tokens;  // (T*H*W x dim), position-major (t, then i, then j)
  Tensor cls;     // (1 x dim)
  int t = 0, h = 0, w = 0;
};

struct ForwardOptions {
  bool training = false;
  bool bn_training = false;  // batch-norm mode, separable for frozen-BN runs
  Rng* dropout_rng = nullptr;
};

HiddenState embed(Tape& tape, const TokenGrid& grid, const ModelParams& params,
                  const ModelConfig& cfg, const ForwardOptions& opts);

HiddenState layer_forward(Tape& tape, const HiddenState& h,
                          const LayerParams& layer, const ModelConfig& cfg,
                          const ForwardOptions& opts);

/// Backbone over one grid: embed then all layers (plus the final norm in the
/// pre-layer-norm layout).
HiddenState backbone_forward(Tape& tape, const TokenGrid& grid,
                             const ModelParams& params, const ModelConfig& cfg,
                             const ForwardOptions& opts);

/// Per-position logits over the content vocabulary, specials excluded.
Tensor token_head(Tape& tape, const Tensor& hidden, const ModelParams& params,
                  const ModelConfig& cfg);

/// 3-layer MLP with batch norm, applied to a batch of CLS vectors.
Tensor cl_head(Tape& tape, const Tensor& cls_batch, const ModelParams& params,
               const ModelConfig& cfg, const ForwardOptions& opts);

Tensor classify_head(Tape& tape, const Tensor& cls_batch,
                     const ModelParams& params);

struct ModelOutput {
  std::vector<Tensor> token_logits;  // pretrain: one (P x vq_size) per grid
  Tensor cls_features;               // pretrain: (B x cl_output)
  Tensor class_logits;               // finetune: (B x num_classes)
};

ModelOutput model_forward(Tape& tape, const std::vector<TokenGrid>& grids,
                          const ModelParams& params, const ModelConfig& cfg,
                          ForwardMode mode, const ForwardOptions& opts);

// Low-level pieces shared with the oracle tests.
Tensor multi_head_attention(Tape& tape, const Tensor& query,
                            const Tensor& context, const AttnBlockParams& w,
                            const ModelConfig& cfg);
Tensor attn_block_single(Tape& tape, const Tensor& x, const Tensor& context,
                         const AttnBlockParams& w, const ModelConfig& cfg,
                         const ForwardOptions& opts);
Tensor attn_block_dual(Tape& tape, const Tensor& x, const Tensor& context_a,
                       const Tensor& context_b, const AttnBlockParams& w,
                       const ModelConfig& cfg, const ForwardOptions& opts);

}  // namespace vtp
