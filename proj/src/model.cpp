#include "vtp/model.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace vtp {

namespace {

Tensor randn(Shape shape, double std, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = std * rng.normal();
  return t;
}

Tensor ones(int n) {
  Tensor t = Tensor::zeros({n}, true);
  for (auto& v : t.values()) v = 1.0;
  return t;
}

Tensor param_zeros(Shape shape) { return Tensor::zeros(std::move(shape), true); }

std::string layer_tag(int l) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "layers.%02d", l);
  return buf;
}

AttnBlockParams init_block(const ModelConfig& cfg, int out_width_factor,
                           Rng& rng) {
  const int hd = cfg.heads * cfg.head_dim;
  AttnBlockParams b;
  b.wq = randn({hd, cfg.dim}, cfg.init_std, rng);
  b.wk = randn({hd, cfg.dim}, cfg.init_std, rng);
  b.wv = randn({hd, cfg.dim}, cfg.init_std, rng);
  b.wout = randn({cfg.dim, out_width_factor * hd}, cfg.init_std, rng);
  b.ln_gain = ones(cfg.dim);
  b.ln_bias = param_zeros({cfg.dim});
  return b;
}

void push_block(NamedTensors& out, const std::string& prefix,
                const std::optional<AttnBlockParams>& b) {
  if (!b) return;
  out.emplace_back(prefix + ".wq", b->wq);
  out.emplace_back(prefix + ".wk", b->wk);
  out.emplace_back(prefix + ".wv", b->wv);
  out.emplace_back(prefix + ".wout", b->wout);
  out.emplace_back(prefix + ".ln.gain", b->ln_gain);
  out.emplace_back(prefix + ".ln.bias", b->ln_bias);
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& b) {
  return add(tape, x, broadcast(tape, b, x.shape()));
}

Tensor maybe_dropout(Tape& tape, const Tensor& x, const ModelConfig& cfg,
                     const ForwardOptions& opts) {
  if (!opts.training || cfg.dropout == 0.0 || opts.dropout_rng == nullptr)
    return x;
  return dropout(tape, x, cfg.dropout, true, *opts.dropout_rng);
}

}  // namespace

AttentionLayout parse_layout(const std::string& name) {
  if (name == "TxHxW") return AttentionLayout::kJoint;
  if (name == "T,HxW") return AttentionLayout::kTemporalSpatial;
  if (name == "T,H,W") return AttentionLayout::kTemporalHeightWidth;
  if (name == "T,H|W") return AttentionLayout::kTemporalDualSpatial;
  throw std::invalid_argument("unknown attention layout: " + name +
                              " (expected TxHxW, T,HxW, T,H,W or T,H|W)");
}

std::string layout_name(AttentionLayout layout) {
  switch (layout) {
    case AttentionLayout::kJoint: return "TxHxW";
    case AttentionLayout::kTemporalSpatial: return "T,HxW";
    case AttentionLayout::kTemporalHeightWidth: return "T,H,W";
    case AttentionLayout::kTemporalDualSpatial: return "T,H|W";
  }
  throw std::logic_error("bad layout");
}

void ModelConfig::validate() const {
  if (layers < 1 || dim < 1 || heads < 1 || head_dim < 1 || mlp_dim < 1)
    throw std::invalid_argument("model dims must be positive");
  if (max_t < 1 || max_h < 1 || max_w < 1)
    throw std::invalid_argument("positional table sizes must be positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("dropout must be in [0,1)");
  if (cl_head.layers < 1 || cl_head.intermediate < 1 || cl_head.output < 1)
    throw std::invalid_argument("cl head dims must be positive");
}

ModelParams ModelParams::init(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.init_seed);
  ModelParams p;
  p.token_embedding =
      randn({cfg.vocab.total_size(), cfg.dim}, cfg.init_std, rng);
  p.pos_t = randn({cfg.max_t, cfg.dim}, cfg.init_std, rng);
  p.pos_h = randn({cfg.max_h, cfg.dim}, cfg.init_std, rng);
  p.pos_w = randn({cfg.max_w, cfg.dim}, cfg.init_std, rng);
  p.embed_ln_gain = ones(cfg.dim);
  p.embed_ln_bias = param_zeros({cfg.dim});
  for (int l = 0; l < cfg.layers; ++l) {
    LayerParams layer;
    switch (cfg.layout) {
      case AttentionLayout::kJoint:
        layer.joint = init_block(cfg, 1, rng);
        break;
      case AttentionLayout::kTemporalSpatial:
        layer.time = init_block(cfg, 1, rng);
        layer.space = init_block(cfg, 1, rng);
        break;
      case AttentionLayout::kTemporalHeightWidth:
        layer.time = init_block(cfg, 1, rng);
        layer.height = init_block(cfg, 1, rng);
        layer.width = init_block(cfg, 1, rng);
        break;
      case AttentionLayout::kTemporalDualSpatial:
        layer.time = init_block(cfg, 1, rng);
        layer.space = init_block(cfg, 2, rng);
        break;
    }
    layer.mlp_w1 = randn({cfg.mlp_dim, cfg.dim}, cfg.init_std, rng);
    layer.mlp_b1 = param_zeros({cfg.mlp_dim});
    layer.mlp_w2 = randn({cfg.dim, cfg.mlp_dim}, cfg.init_std, rng);
    layer.mlp_b2 = param_zeros({cfg.dim});
    layer.mlp_ln_gain = ones(cfg.dim);
    layer.mlp_ln_bias = param_zeros({cfg.dim});
    p.layers.push_back(std::move(layer));
  }
  if (cfg.ln_position == LayerNormPosition::kPre) {
    p.final_ln_gain = ones(cfg.dim);
    p.final_ln_bias = param_zeros({cfg.dim});
  }
  p.token_head_w = randn({cfg.dim, cfg.dim}, cfg.init_std, rng);
  p.token_head_b = param_zeros({cfg.dim});
  p.token_head_ln_gain = ones(cfg.dim);
  p.token_head_ln_bias = param_zeros({cfg.dim});
  p.word_bias = param_zeros({cfg.vocab.vq_size});
  int in_dim = cfg.dim;
  for (int l = 0; l < cfg.cl_head.layers; ++l) {
    const bool last = l == cfg.cl_head.layers - 1;
    const int out_dim = last ? cfg.cl_head.output : cfg.cl_head.intermediate;
    ClLayerParams cl;
    cl.w = randn({out_dim, in_dim}, cfg.init_std, rng);
    cl.b = param_zeros({out_dim});
    if (!last) {
      cl.bn_gain = ones(out_dim);
      cl.bn_bias = param_zeros({out_dim});
      cl.bn_mean = Tensor::zeros({out_dim});  // running buffers, no grads
      cl.bn_var = Tensor::from_values(
          {out_dim}, std::vector<double>(static_cast<std::size_t>(out_dim), 1.0));
    }
    p.cl_layers.push_back(std::move(cl));
    in_dim = out_dim;
  }
  if (cfg.num_classes > 0) {
    p.classifier_w = param_zeros({cfg.num_classes, cfg.dim});
    p.classifier_b = param_zeros({cfg.num_classes});
  }
  return p;
}

std::vector<Tensor> ModelParams::trainable() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_all())
    if (t.requires_grad()) out.push_back(t);
  return out;
}

NamedTensors ModelParams::named_all() const {
  NamedTensors out;
  out.emplace_back("embed.token", token_embedding);
  out.emplace_back("embed.pos_t", pos_t);
  out.emplace_back("embed.pos_h", pos_h);
  out.emplace_back("embed.pos_w", pos_w);
  out.emplace_back("embed.ln.gain", embed_ln_gain);
  out.emplace_back("embed.ln.bias", embed_ln_bias);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string tag = layer_tag(static_cast<int>(l));
    push_block(out, tag + ".joint", layers[l].joint);
    push_block(out, tag + ".time", layers[l].time);
    push_block(out, tag + ".space", layers[l].space);
    push_block(out, tag + ".height", layers[l].height);
    push_block(out, tag + ".width", layers[l].width);
    out.emplace_back(tag + ".mlp.w1", layers[l].mlp_w1);
    out.emplace_back(tag + ".mlp.b1", layers[l].mlp_b1);
    out.emplace_back(tag + ".mlp.w2", layers[l].mlp_w2);
    out.emplace_back(tag + ".mlp.b2", layers[l].mlp_b2);
    out.emplace_back(tag + ".mlp.ln.gain", layers[l].mlp_ln_gain);
    out.emplace_back(tag + ".mlp.ln.bias", layers[l].mlp_ln_bias);
  }
  if (final_ln_gain.defined()) {
    out.emplace_back("final.ln.gain", final_ln_gain);
    out.emplace_back("final.ln.bias", final_ln_bias);
  }
  out.emplace_back("token_head.w", token_head_w);
  out.emplace_back("token_head.b", token_head_b);
  out.emplace_back("token_head.ln.gain", token_head_ln_gain);
  out.emplace_back("token_head.ln.bias", token_head_ln_bias);
  out.emplace_back("token_head.word_bias", word_bias);
  for (std::size_t l = 0; l < cl_layers.size(); ++l) {
    const std::string tag = "cl_head." + std::to_string(l);
    out.emplace_back(tag + ".w", cl_layers[l].w);
    out.emplace_back(tag + ".b", cl_layers[l].b);
    if (cl_layers[l].bn_gain.defined()) {
      out.emplace_back(tag + ".bn.gain", cl_layers[l].bn_gain);
      out.emplace_back(tag + ".bn.bias", cl_layers[l].bn_bias);
      out.emplace_back(tag + ".bn.running_mean", cl_layers[l].bn_mean);
      out.emplace_back(tag + ".bn.running_var", cl_layers[l].bn_var);
    }
  }
  if (classifier_w.defined()) {
    out.emplace_back("classifier.w", classifier_w);
    out.emplace_back("classifier.b", classifier_b);
  }
  return out;
}

void ModelParams::zero_grads() const {
  for (auto& [name, t] : named_all()) {
    Tensor copy = t;
    copy.zero_grad();
  }
}

Tensor interpolate_table(const Tensor& table, int new_len) {
  if (new_len < 1) throw std::invalid_argument("table length must be >= 1");
  const int old_len = table.shape()[0];
  const int d = table.shape()[1];
  if (new_len == old_len) return table;  // bit-identical, same storage
  Tensor out = Tensor::zeros({new_len, d}, table.requires_grad());
  for (int k = 0; k < new_len; ++k) {
    double pos = 0.0;
    if (new_len > 1)
      pos = static_cast<double>(k) * (old_len - 1) / (new_len - 1);
    const int lo = static_cast<int>(pos);
    const int hi = lo + 1 < old_len ? lo + 1 : lo;
    const double frac = pos - lo;
    for (int c = 0; c < d; ++c)
      out.values()[k * d + c] = (1.0 - frac) * table.values()[lo * d + c] +
                                frac * table.values()[hi * d + c];
  }
  return out;
}

void ModelParams::interpolate_positions(int new_t, int new_h, int new_w) {
  pos_t = interpolate_table(pos_t, new_t);
  pos_h = interpolate_table(pos_h, new_h);
  pos_w = interpolate_table(pos_w, new_w);
}

void ModelParams::save(const std::string& path) const {
  save_checkpoint(named_all(), path);
}

void ModelParams::load(const std::string& path,
                       bool allow_missing_classifier) {
  NamedTensors mine = named_all();
  NamedTensors file = read_checkpoint(path);
  std::map<std::string, Tensor> by_name(file.begin(), file.end());
  for (auto& [name, t] : mine) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      if (allow_missing_classifier && name.rfind("classifier.", 0) == 0)
        continue;
      throw std::runtime_error("checkpoint missing parameter: " + name);
    }
    if (it->second.shape() != t.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name +
                               ": file " + shape_str(it->second.shape()) +
                               " vs model " + shape_str(t.shape()));
    Tensor dst = t;
    dst.values() = it->second.values();
  }
}

// ---------------------------------------------------------------------------
// forward pieces

Tensor multi_head_attention(Tape& tape, const Tensor& query,
                            const Tensor& context, const AttnBlockParams& w,
                            const ModelConfig& cfg) {
  if (context.shape()[0] < 1)
    throw std::invalid_argument("attention requires a non-empty context");
  const int hd = cfg.head_dim;
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(cfg.heads));
  for (int head = 0; head < cfg.heads; ++head) {
    std::vector<int> rows(static_cast<std::size_t>(hd));
    for (int r = 0; r < hd; ++r) rows[static_cast<std::size_t>(r)] = head * hd + r;
    Tensor wq_h = gather_rows(tape, w.wq, rows);
    Tensor wk_h = gather_rows(tape, w.wk, rows);
    Tensor wv_h = gather_rows(tape, w.wv, rows);
    Tensor q = matmul(tape, query, transpose(tape, wq_h));    // (m x hd)
    Tensor k = matmul(tape, context, transpose(tape, wk_h));  // (n x hd)
    Tensor v = matmul(tape, context, transpose(tape, wv_h));  // (n x hd)
    Tensor scores = matmul(tape, q, transpose(tape, k));      // (m x n)
    if (cfg.scale_attention)
      scores = scale(tape, scores, 1.0 / std::sqrt(static_cast<double>(hd)));
    head_outputs.push_back(matmul(tape, softmax(tape, scores), v));
  }
  return cfg.heads == 1 ? head_outputs[0] : concat(tape, head_outputs, 1);
}

namespace {

// Shared epilogue: project, dropout, residual, normalize (post-LN layout).
Tensor block_epilogue(Tape& tape, const Tensor& x, const Tensor& attn_concat,
                      const AttnBlockParams& w, const ModelConfig& cfg,
                      const ForwardOptions& opts) {
  Tensor projected = matmul(tape, attn_concat, transpose(tape, w.wout));
  projected = maybe_dropout(tape, projected, cfg, opts);
  Tensor residual = add(tape, x, projected);
  if (cfg.ln_position == LayerNormPosition::kPost)
    return layer_norm(tape, residual, w.ln_gain, w.ln_bias, cfg.ln_eps);
  return residual;
}

Tensor pre_norm(Tape& tape, const Tensor& x, const AttnBlockParams& w,
                const ModelConfig& cfg) {
  return layer_norm(tape, x, w.ln_gain, w.ln_bias, cfg.ln_eps);
}

}  // namespace

Tensor attn_block_single(Tape& tape, const Tensor& x, const Tensor& context,
                         const AttnBlockParams& w, const ModelConfig& cfg,
                         const ForwardOptions& opts) {
  if (cfg.ln_position == LayerNormPosition::kPre) {
    Tensor a = multi_head_attention(tape, pre_norm(tape, x, w, cfg),
                                    pre_norm(tape, context, w, cfg), w, cfg);
    return block_epilogue(tape, x, a, w, cfg, opts);
  }
  Tensor a = multi_head_attention(tape, x, context, w, cfg);
  return block_epilogue(tape, x, a, w, cfg, opts);
}

Tensor attn_block_dual(Tape& tape, const Tensor& x, const Tensor& context_a,
                       const Tensor& context_b, const AttnBlockParams& w,
                       const ModelConfig& cfg, const ForwardOptions& opts) {
  Tensor q = x, ca = context_a, cb = context_b;
  if (cfg.ln_position == LayerNormPosition::kPre) {
    q = pre_norm(tape, x, w, cfg);
    ca = pre_norm(tape, context_a, w, cfg);
    cb = pre_norm(tape, context_b, w, cfg);
  }
  Tensor a = multi_head_attention(tape, q, ca, w, cfg);
  Tensor b = multi_head_attention(tape, q, cb, w, cfg);
  return block_epilogue(tape, x, concat(tape, {a, b}, 1), w, cfg, opts);
}

namespace {

struct GroupSet {
  std::vector<std::vector<int>> groups;
  std::vector<int> position_to_stacked;  // inverse permutation
};

enum class GroupKind { kJoint, kTemporal, kFrame, kHeight, kWidth };

GroupSet build_groups(int t_len, int h_len, int w_len, GroupKind kind) {
  auto pos = [&](int t, int i, int j) { return (t * h_len + i) * w_len + j; };
  GroupSet gs;
  switch (kind) {
    case GroupKind::kJoint: {
      std::vector<int> all(static_cast<std::size_t>(t_len) * h_len * w_len);
      for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
      gs.groups.push_back(std::move(all));
      break;
    }
    case GroupKind::kTemporal:
      for (int i = 0; i < h_len; ++i)
        for (int j = 0; j < w_len; ++j) {
          std::vector<int> g;
          for (int t = 0; t < t_len; ++t) g.push_back(pos(t, i, j));
          gs.groups.push_back(std::move(g));
        }
      break;
    case GroupKind::kFrame:
      for (int t = 0; t < t_len; ++t) {
        std::vector<int> g;
        for (int i = 0; i < h_len; ++i)
          for (int j = 0; j < w_len; ++j) g.push_back(pos(t, i, j));
        gs.groups.push_back(std::move(g));
      }
      break;
    case GroupKind::kHeight:  // context varies along i
      for (int t = 0; t < t_len; ++t)
        for (int j = 0; j < w_len; ++j) {
          std::vector<int> g;
          for (int i = 0; i < h_len; ++i) g.push_back(pos(t, i, j));
          gs.groups.push_back(std::move(g));
        }
      break;
    case GroupKind::kWidth:  // context varies along j
      for (int t = 0; t < t_len; ++t)
        for (int i = 0; i < h_len; ++i) {
          std::vector<int> g;
          for (int j = 0; j < w_len; ++j) g.push_back(pos(t, i, j));
          gs.groups.push_back(std::move(g));
        }
      break;
  }
  gs.position_to_stacked.assign(
      static_cast<std::size_t>(t_len) * h_len * w_len, -1);
  int row = 0;
  for (const auto& g : gs.groups)
    for (int p : g) gs.position_to_stacked[static_cast<std::size_t>(p)] = row++;
  return gs;
}

// Self-attention of every token within its group; returns the per-position
// concatenated head outputs, in position order.
Tensor grouped_attention(Tape& tape, const Tensor& tokens, const GroupSet& gs,
                         const AttnBlockParams& w, const ModelConfig& cfg,
                         LayerNormPosition ln_pos, double ln_eps) {
  Tensor source = tokens;
  if (ln_pos == LayerNormPosition::kPre)
    source = layer_norm(tape, tokens, w.ln_gain, w.ln_bias, ln_eps);
  std::vector<Tensor> outs;
  outs.reserve(gs.groups.size());
  for (const auto& g : gs.groups) {
    Tensor ctx = gather_rows(tape, source, g);
    outs.push_back(multi_head_attention(tape, ctx, ctx, w, cfg));
  }
  Tensor stacked = outs.size() == 1 ? outs[0] : concat(tape, outs, 0);
  return gather_rows(tape, stacked, gs.position_to_stacked);
}

// CLS attends over every group; block outputs are averaged (post-LN applies
// the block norm before averaging, matching the per-token block).
Tensor cls_grouped_block(Tape& tape, const Tensor& cls, const Tensor& tokens,
                         const GroupSet& gs, const AttnBlockParams& w,
                         const ModelConfig& cfg, const ForwardOptions& opts) {
  Tensor cls_q = cls, source = tokens;
  if (cfg.ln_position == LayerNormPosition::kPre) {
    cls_q = layer_norm(tape, cls, w.ln_gain, w.ln_bias, cfg.ln_eps);
    source = layer_norm(tape, tokens, w.ln_gain, w.ln_bias, cfg.ln_eps);
  }
  std::vector<Tensor> outs;
  outs.reserve(gs.groups.size());
  for (const auto& g : gs.groups) {
    Tensor ctx = gather_rows(tape, source, g);
    Tensor a = multi_head_attention(tape, cls_q, ctx, w, cfg);
    outs.push_back(block_epilogue(tape, cls, a, w, cfg, opts));
  }
  if (outs.size() == 1) return outs[0];
  Tensor stacked = concat(tape, outs, 0);
  Tensor mean = mean_axis(tape, stacked, 0);  // (dim)
  return reshape(tape, mean, {1, cfg.dim});
}

Tensor mlp_forward(Tape& tape, const Tensor& x, const LayerParams& layer,
                   const ModelConfig& cfg, const ForwardOptions& opts) {
  Tensor h = add_bias(tape, matmul(tape, x, transpose(tape, layer.mlp_w1)),
                      layer.mlp_b1);
  h = gelu(tape, h);
  h = add_bias(tape, matmul(tape, h, transpose(tape, layer.mlp_w2)),
               layer.mlp_b2);
  return maybe_dropout(tape, h, cfg, opts);
}

Tensor mlp_block(Tape& tape, const Tensor& x, const LayerParams& layer,
                 const ModelConfig& cfg, const ForwardOptions& opts) {
  if (cfg.ln_position == LayerNormPosition::kPre) {
    Tensor normed =
        layer_norm(tape, x, layer.mlp_ln_gain, layer.mlp_ln_bias, cfg.ln_eps);
    return add(tape, x, mlp_forward(tape, normed, layer, cfg, opts));
  }
  Tensor residual = add(tape, x, mlp_forward(tape, x, layer, cfg, opts));
  return layer_norm(tape, residual, layer.mlp_ln_gain, layer.mlp_ln_bias,
                    cfg.ln_eps);
}

}  // namespace

HiddenState embed(Tape& tape, const TokenGrid& grid, const ModelParams& params,
                  const ModelConfig& cfg, const ForwardOptions& opts) {
  if (grid.t_len > params.pos_t.shape()[0] ||
      grid.h_len > params.pos_h.shape()[0] ||
      grid.w_len > params.pos_w.shape()[0])
    throw std::invalid_argument(
        "grid " + std::to_string(grid.t_len) + "x" +
        std::to_string(grid.h_len) + "x" + std::to_string(grid.w_len) +
        " exceeds the positional tables " +
        std::to_string(params.pos_t.shape()[0]) + "x" +
        std::to_string(params.pos_h.shape()[0]) + "x" +
        std::to_string(params.pos_w.shape()[0]) +
        "; resize them with interpolate_pos first");
  const int P = static_cast<int>(grid.size());
  std::vector<int> ids(static_cast<std::size_t>(P));
  std::vector<int> t_idx(ids.size()), h_idx(ids.size()), w_idx(ids.size());
  int n = 0;
  for (int t = 0; t < grid.t_len; ++t)
    for (int i = 0; i < grid.h_len; ++i)
      for (int j = 0; j < grid.w_len; ++j, ++n) {
        const std::int32_t tok = grid.at(t, i, j);
        if (!cfg.vocab.valid_grid_token(tok))
          throw std::invalid_argument("token id " + std::to_string(tok) +
                                      " invalid inside a grid");
        ids[static_cast<std::size_t>(n)] = static_cast<int>(tok);
        t_idx[static_cast<std::size_t>(n)] = t;
        h_idx[static_cast<std::size_t>(n)] = i;
        w_idx[static_cast<std::size_t>(n)] = j;
      }
  Tensor emb = gather_rows(tape, params.token_embedding, ids);
  Tensor pos = add(tape, gather_rows(tape, params.pos_t, t_idx),
                   add(tape, gather_rows(tape, params.pos_h, h_idx),
                       gather_rows(tape, params.pos_w, w_idx)));
  Tensor h0 = layer_norm(tape, add(tape, emb, pos), params.embed_ln_gain,
                         params.embed_ln_bias, cfg.ln_eps);
  h0 = maybe_dropout(tape, h0, cfg, opts);

  Tensor cls_emb = gather_rows(tape, params.token_embedding,
                               {static_cast<int>(cfg.vocab.cls_id)});
  Tensor cls0 = layer_norm(tape, cls_emb, params.embed_ln_gain,
                           params.embed_ln_bias, cfg.ln_eps);
  cls0 = maybe_dropout(tape, cls0, cfg, opts);

  HiddenState state;
  state.tokens = h0;
  state.cls = cls0;
  state.t = grid.t_len;
  state.h = grid.h_len;
  state.w = grid.w_len;
  return state;
}

namespace {

// One single-context sub-block applied to all tokens and to CLS.
void apply_single_subblock(Tape& tape, HiddenState& state, GroupKind kind,
                           const AttnBlockParams& w, const ModelConfig& cfg,
                           const ForwardOptions& opts) {
  const GroupSet gs = build_groups(state.t, state.h, state.w, kind);
  Tensor attn = grouped_attention(tape, state.tokens, gs, w, cfg,
                                  cfg.ln_position, cfg.ln_eps);
  Tensor new_tokens = block_epilogue(tape, state.tokens, attn, w, cfg, opts);
  Tensor new_cls = cls_grouped_block(tape, state.cls, state.tokens, gs, w,
                                     cfg, opts);
  state.tokens = new_tokens;
  state.cls = new_cls;
}

// The dual spatial sub-block: height and width attention concatenated.
void apply_dual_subblock(Tape& tape, HiddenState& state,
                         const AttnBlockParams& w, const ModelConfig& cfg,
                         const ForwardOptions& opts) {
  const GroupSet height = build_groups(state.t, state.h, state.w,
                                       GroupKind::kHeight);
  const GroupSet width = build_groups(state.t, state.h, state.w,
                                      GroupKind::kWidth);
  Tensor a = grouped_attention(tape, state.tokens, height, w, cfg,
                               cfg.ln_position, cfg.ln_eps);
  Tensor b = grouped_attention(tape, state.tokens, width, w, cfg,
                               cfg.ln_position, cfg.ln_eps);
  Tensor new_tokens = block_epilogue(tape, state.tokens,
                                     concat(tape, {a, b}, 1), w, cfg, opts);

  // CLS: attention calls against every height context and every width
  // context of each frame; the two family means fill the wout halves, one
  // block epilogue per frame, frames averaged.
  Tensor cls_q = state.cls;
  Tensor source = state.tokens;
  if (cfg.ln_position == LayerNormPosition::kPre) {
    cls_q = layer_norm(tape, state.cls, w.ln_gain, w.ln_bias, cfg.ln_eps);
    source = layer_norm(tape, state.tokens, w.ln_gain, w.ln_bias, cfg.ln_eps);
  }
  auto family_mean = [&](const GroupSet& gs, int frame,
                         int groups_per_frame) {
    std::vector<Tensor> outs;
    for (int g = 0; g < groups_per_frame; ++g) {
      const auto& group = gs.groups[static_cast<std::size_t>(
          frame * groups_per_frame + g)];
      Tensor ctx = gather_rows(tape, source, group);
      outs.push_back(multi_head_attention(tape, cls_q, ctx, w, cfg));
    }
    if (outs.size() == 1) return outs[0];
    return reshape(tape, mean_axis(tape, concat(tape, outs, 0), 0),
                   {1, cfg.heads * cfg.head_dim});
  };
  std::vector<Tensor> frame_outs;
  for (int t = 0; t < state.t; ++t) {
    Tensor mh = family_mean(height, t, state.w);  // height groups: one per j
    Tensor mw = family_mean(width, t, state.h);   // width groups: one per i
    frame_outs.push_back(block_epilogue(tape, state.cls,
                                        concat(tape, {mh, mw}, 1), w, cfg,
                                        opts));
  }
  Tensor new_cls =
      frame_outs.size() == 1
          ? frame_outs[0]
          : reshape(tape, mean_axis(tape, concat(tape, frame_outs, 0), 0),
                    {1, cfg.dim});
  state.tokens = new_tokens;
  state.cls = new_cls;
}

}  // namespace

HiddenState layer_forward(Tape& tape, const HiddenState& h,
                          const LayerParams& layer, const ModelConfig& cfg,
                          const ForwardOptions& opts) {
  HiddenState state = h;
  switch (cfg.layout) {
    case AttentionLayout::kJoint:
      apply_single_subblock(tape, state, GroupKind::kJoint, *layer.joint, cfg,
                            opts);
      break;
    case AttentionLayout::kTemporalSpatial:
      apply_single_subblock(tape, state, GroupKind::kTemporal, *layer.time,
                            cfg, opts);
      apply_single_subblock(tape, state, GroupKind::kFrame, *layer.space, cfg,
                            opts);
      break;
    case AttentionLayout::kTemporalHeightWidth:
      apply_single_subblock(tape, state, GroupKind::kTemporal, *layer.time,
                            cfg, opts);
      apply_single_subblock(tape, state, GroupKind::kHeight, *layer.height,
                            cfg, opts);
      apply_single_subblock(tape, state, GroupKind::kWidth, *layer.width, cfg,
                            opts);
      break;
    case AttentionLayout::kTemporalDualSpatial:
      apply_single_subblock(tape, state, GroupKind::kTemporal, *layer.time,
                            cfg, opts);
      apply_dual_subblock(tape, state, *layer.space, cfg, opts);
      break;
  }
  state.tokens = mlp_block(tape, state.tokens, layer, cfg, opts);
  state.cls = mlp_block(tape, state.cls, layer, cfg, opts);
  return state;
}

HiddenState backbone_forward(Tape& tape, const TokenGrid& grid,
                             const ModelParams& params, const ModelConfig& cfg,
                             const ForwardOptions& opts) {
  HiddenState state = embed(tape, grid, params, cfg, opts);
  for (const auto& layer : params.layers)
    state = layer_forward(tape, state, layer, cfg, opts);
  if (cfg.ln_position == LayerNormPosition::kPre) {
    state.tokens = layer_norm(tape, state.tokens, params.final_ln_gain,
                              params.final_ln_bias, cfg.ln_eps);
    state.cls = layer_norm(tape, state.cls, params.final_ln_gain,
                           params.final_ln_bias, cfg.ln_eps);
  }
  return state;
}

Tensor token_head(Tape& tape, const Tensor& hidden, const ModelParams& params,
                  const ModelConfig& cfg) {
  Tensor u = add_bias(
      tape, matmul(tape, hidden, transpose(tape, params.token_head_w)),
      params.token_head_b);
  u = layer_norm(tape, gelu(tape, u), params.token_head_ln_gain,
                 params.token_head_ln_bias, cfg.ln_eps);
  // tied projection: content rows of the embedding matrix
  std::vector<int> content(static_cast<std::size_t>(cfg.vocab.vq_size));
  for (int k = 0; k < cfg.vocab.vq_size; ++k)
    content[static_cast<std::size_t>(k)] = k;
  Tensor w_word = gather_rows(tape, params.token_embedding, content);
  return add_bias(tape, matmul(tape, u, transpose(tape, w_word)),
                  params.word_bias);
}

Tensor cl_head(Tape& tape, const Tensor& cls_batch, const ModelParams& params,
               const ModelConfig& cfg, const ForwardOptions& opts) {
  if (cls_batch.shape()[0] < 1)
    throw std::invalid_argument("cl_head requires a non-empty batch");
  Tensor x = cls_batch;
  for (std::size_t l = 0; l < params.cl_layers.size(); ++l) {
    const auto& cl = params.cl_layers[l];
    x = add_bias(tape, matmul(tape, x, transpose(tape, cl.w)), cl.b);
    if (cl.bn_gain.defined()) {
      Tensor mean = cl.bn_mean;
      Tensor var = cl.bn_var;
      x = batch_norm(tape, x, cl.bn_gain, cl.bn_bias, mean, var,
                     opts.bn_training, cfg.bn_momentum, cfg.bn_eps);
      x = gelu(tape, x);
    }
  }
  if (cfg.normalize_cl_features) x = l2_normalize_rows(tape, x);
  return x;
}

Tensor classify_head(Tape& tape, const Tensor& cls_batch,
                     const ModelParams& params) {
  if (!params.classifier_w.defined())
    throw std::logic_error("model has no classifier head (num_classes == 0)");
  return add_bias(
      tape, matmul(tape, cls_batch, transpose(tape, params.classifier_w)),
      params.classifier_b);
}

ModelOutput model_forward(Tape& tape, const std::vector<TokenGrid>& grids,
                          const ModelParams& params, const ModelConfig& cfg,
                          ForwardMode mode, const ForwardOptions& opts) {
  if (grids.empty()) throw std::invalid_argument("empty grid batch");
  ModelOutput out;
  std::vector<Tensor> cls_rows;
  cls_rows.reserve(grids.size());
  for (const auto& grid : grids) {
    HiddenState state = backbone_forward(tape, grid, params, cfg, opts);
    if (mode == ForwardMode::kPretrain)
      out.token_logits.push_back(token_head(tape, state.tokens, params, cfg));
    cls_rows.push_back(state.cls);
  }
  Tensor cls_batch =
      cls_rows.size() == 1 ? cls_rows[0] : concat(tape, cls_rows, 0);
  if (mode == ForwardMode::kPretrain)
    out.cls_features = cl_head(tape, cls_batch, params, cfg, opts);
  else
    out.class_logits = classify_head(tape, cls_batch, params);
  return out;
}

}  // namespace vtp
