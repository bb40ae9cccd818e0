#pragma once

#include <cmath>
#include <vector>

#include "vtp/model.hpp"
#include "vtp/quantizer.hpp"
#include "vtp/token_store.hpp"

namespace vtp::testing {

inline ModelConfig tiny_config(AttentionLayout layout, int vq = 32) {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.head_dim = 8;
  cfg.mlp_dim = 32;
  cfg.vocab = Vocabulary::with_vq_size(vq);
  cfg.max_t = 4;
  cfg.max_h = 4;
  cfg.max_w = 4;
  cfg.dropout = 0.0;
  cfg.layout = layout;
  cfg.cl_head = ClHeadConfig{3, 24, 12};
  return cfg;
}

inline TokenGrid random_grid(int t, int h, int w, int vq, Rng& rng) {
  TokenGrid g(t, h, w);
  for (auto& tok : g.tokens)
    tok = static_cast<std::int32_t>(rng.uniform_below(
        static_cast<std::uint64_t>(vq)));
  return g;
}

// --- attention block surgery used by the layout-equivalence checks ---------

inline void copy_values(Tensor dst, const Tensor& src) {
  dst.values() = src.values();
}

inline void copy_block(AttnBlockParams& dst, const AttnBlockParams& src) {
  copy_values(dst.wq, src.wq);
  copy_values(dst.wk, src.wk);
  copy_values(dst.wv, src.wv);
  copy_values(dst.wout, src.wout);
  copy_values(dst.ln_gain, src.ln_gain);
  copy_values(dst.ln_bias, src.ln_bias);
}

/// Identity-like block: zero output projection, unit layer norm. With
/// ln_eps = 0 it maps any already-normalized input to itself.
inline void neutralize_block(AttnBlockParams& b) {
  for (auto& v : b.wout.values()) v = 0.0;
  for (auto& v : b.ln_gain.values()) v = 1.0;
  for (auto& v : b.ln_bias.values()) v = 0.0;
}

/// Copies one wout half (0 = first context, 1 = second) of a dual block into
/// a single-context block and zeroes nothing else.
inline void copy_dual_half(AttnBlockParams& single, const AttnBlockParams& dual,
                           int half) {
  copy_values(single.wq, dual.wq);
  copy_values(single.wk, dual.wk);
  copy_values(single.wv, dual.wv);
  const int d = dual.wout.shape()[0];
  const int width = dual.wout.shape()[1] / 2;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < width; ++c)
      single.wout.values()[r * width + c] =
          dual.wout.values()[r * 2 * width + half * width + c];
  copy_values(single.ln_gain, dual.ln_gain);
  copy_values(single.ln_bias, dual.ln_bias);
}

/// Zeroes one wout half of a dual block in place.
inline void zero_dual_half(AttnBlockParams& dual, int half) {
  const int d = dual.wout.shape()[0];
  const int width = dual.wout.shape()[1] / 2;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < width; ++c)
      dual.wout.values()[r * 2 * width + half * width + c] = 0.0;
}

inline void copy_shared_parts(ModelParams& dst, const ModelParams& src) {
  copy_values(dst.token_embedding, src.token_embedding);
  copy_values(dst.pos_t, src.pos_t);
  copy_values(dst.pos_h, src.pos_h);
  copy_values(dst.pos_w, src.pos_w);
  copy_values(dst.embed_ln_gain, src.embed_ln_gain);
  copy_values(dst.embed_ln_bias, src.embed_ln_bias);
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    copy_values(dst.layers[l].mlp_w1, src.layers[l].mlp_w1);
    copy_values(dst.layers[l].mlp_b1, src.layers[l].mlp_b1);
    copy_values(dst.layers[l].mlp_w2, src.layers[l].mlp_w2);
    copy_values(dst.layers[l].mlp_b2, src.layers[l].mlp_b2);
    copy_values(dst.layers[l].mlp_ln_gain, src.layers[l].mlp_ln_gain);
    copy_values(dst.layers[l].mlp_ln_bias, src.layers[l].mlp_ln_bias);
  }
  copy_values(dst.token_head_w, src.token_head_w);
  copy_values(dst.token_head_b, src.token_head_b);
  copy_values(dst.token_head_ln_gain, src.token_head_ln_gain);
  copy_values(dst.token_head_ln_bias, src.token_head_ln_bias);
  copy_values(dst.word_bias, src.word_bias);
  for (std::size_t l = 0; l < dst.cl_layers.size(); ++l) {
    copy_values(dst.cl_layers[l].w, src.cl_layers[l].w);
    copy_values(dst.cl_layers[l].b, src.cl_layers[l].b);
    if (dst.cl_layers[l].bn_gain.defined()) {
      copy_values(dst.cl_layers[l].bn_gain, src.cl_layers[l].bn_gain);
      copy_values(dst.cl_layers[l].bn_bias, src.cl_layers[l].bn_bias);
      copy_values(dst.cl_layers[l].bn_mean, src.cl_layers[l].bn_mean);
      copy_values(dst.cl_layers[l].bn_var, src.cl_layers[l].bn_var);
    }
  }
}

// --- dense scalar oracle for the joint (TxHxW) layer ------------------------

using Vec = std::vector<double>;

inline Vec oracle_matvec(const Tensor& w, const Vec& x) {
  const int rows = w.shape()[0], cols = w.shape()[1];
  Vec out(static_cast<std::size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[static_cast<std::size_t>(r)] +=
          w.values()[r * cols + c] * x[static_cast<std::size_t>(c)];
  return out;
}

inline Vec oracle_layer_norm(const Vec& x, const Tensor& gain,
                             const Tensor& bias, double eps) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  Vec out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    out[k] = gain.values()[k] * (x[k] - mu) / std::sqrt(var + eps) +
             bias.values()[k];
  return out;
}

inline Vec oracle_gelu(const Vec& x) {
  Vec out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    out[k] = 0.5 * x[k] * (1.0 + std::erf(x[k] * 0.7071067811865475244));
  return out;
}

/// Multi-head attention of one query over a context, scalar arithmetic only.
inline Vec oracle_attention(const Vec& query, const std::vector<Vec>& context,
                            const AttnBlockParams& w, const ModelConfig& cfg) {
  const int hd = cfg.head_dim;
  Vec out;
  for (int head = 0; head < cfg.heads; ++head) {
    Vec q(static_cast<std::size_t>(hd), 0.0);
    const int d = cfg.dim;
    for (int r = 0; r < hd; ++r)
      for (int c = 0; c < d; ++c)
        q[static_cast<std::size_t>(r)] +=
            w.wq.values()[(head * hd + r) * d + c] *
            query[static_cast<std::size_t>(c)];
    std::vector<double> scores(context.size(), 0.0);
    std::vector<Vec> values(context.size());
    for (std::size_t n = 0; n < context.size(); ++n) {
      Vec key(static_cast<std::size_t>(hd), 0.0),
          val(static_cast<std::size_t>(hd), 0.0);
      for (int r = 0; r < hd; ++r)
        for (int c = 0; c < d; ++c) {
          key[static_cast<std::size_t>(r)] +=
              w.wk.values()[(head * hd + r) * d + c] * context[n][
                  static_cast<std::size_t>(c)];
          val[static_cast<std::size_t>(r)] +=
              w.wv.values()[(head * hd + r) * d + c] * context[n][
                  static_cast<std::size_t>(c)];
        }
      for (int r = 0; r < hd; ++r)
        scores[n] += q[static_cast<std::size_t>(r)] *
                     key[static_cast<std::size_t>(r)];
      if (cfg.scale_attention) scores[n] /= std::sqrt(static_cast<double>(hd));
      values[n] = std::move(val);
    }
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double z = 0.0;
    for (auto& s : scores) {
      s = std::exp(s - mx);
      z += s;
    }
    Vec head_out(static_cast<std::size_t>(hd), 0.0);
    for (std::size_t n = 0; n < context.size(); ++n)
      for (int r = 0; r < hd; ++r)
        head_out[static_cast<std::size_t>(r)] +=
            scores[n] / z * values[n][static_cast<std::size_t>(r)];
    out.insert(out.end(), head_out.begin(), head_out.end());
  }
  return out;
}

// --- procedural smooth synthetic videos -------------------------------------

/// Slowly varying color fields; distinct phase/frequency per video id. The
/// gradients are a few gray levels per 8-pixel patch, so the quantized token
/// field forms plateaus a couple of cells wide that drift slowly over time.
inline Frame synthetic_frame(int video, int t, int frame_size,
                             std::uint64_t seed,
                             double temporal_scale = 1.0) {
  Rng hash(seed + 1000003ull * static_cast<std::uint64_t>(video));
  const double phase_r = hash.uniform01() * 6.283;
  const double phase_g = hash.uniform01() * 6.283;
  const double phase_b = hash.uniform01() * 6.283;
  const double fx = 0.03 + 0.04 * hash.uniform01();  // cycles across the frame
  const double fy = 0.03 + 0.04 * hash.uniform01();
  const double ft =
      temporal_scale * (0.002 + 0.004 * hash.uniform01());  // cycles per frame
  // golden-ratio spacing keeps the per-video base colors well separated
  auto base = [&](int c) {
    double frac = 0.6180339887 * video + 0.37 * c + hash.uniform01() * 0.05;
    frac -= std::floor(frac);
    return 45.0 + 165.0 * frac;
  };
  const double base_rgb[3] = {base(0), base(1), base(2)};
  Frame f(frame_size, frame_size);
  for (int y = 0; y < frame_size; ++y)
    for (int x = 0; x < frame_size; ++x) {
      const double u = static_cast<double>(x) / frame_size;
      const double v = static_cast<double>(y) / frame_size;
      const double w = ft * t;
      auto channel = [&](int c, double phase, double a, double b) {
        const double s =
            std::sin(6.283185307 * (a * u + b * v + w) + phase);
        const double value = base_rgb[c] + 60.0 * s;
        return static_cast<std::uint8_t>(
            value < 0.0 ? 0.0 : (value > 255.0 ? 255.0 : value));
      };
      f.at(y, x, 0) = channel(0, phase_r, fx, 0.3 * fy);
      f.at(y, x, 1) = channel(1, phase_g, 0.3 * fx, fy);
      f.at(y, x, 2) = channel(2, phase_b, 0.6 * fx, 0.6 * fy);
    }
  return f;
}

inline VideoTokenStore synthetic_store(int videos, int frames, int frame_size,
                                       const ToyQuantizerConfig& qcfg,
                                       std::uint64_t seed,
                                       double temporal_scale = 1.0) {
  VideoTokenStore store;
  store.vq_size = qcfg.vq_size;
  for (int v = 0; v < videos; ++v) {
    std::vector<Frame> raster;
    raster.reserve(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t)
      raster.push_back(synthetic_frame(v, t, frame_size, seed, temporal_scale));
    store.add_video("video" + std::to_string(v), 2, 1,
                    quantize_video(raster, qcfg));
  }
  return store;
}

}  // namespace vtp::testing
