#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vtp/token_grid.hpp"

namespace vtp {

/// Raw 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  Frame() = default;
  Frame(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t& at(int y, int x, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

/// Deterministic per-patch mean-color binning quantizer. Stands in for a
/// frozen learned encoder: it only has to be a fixed discretizer with an
/// 8x (by default) spatial compression factor.
struct ToyQuantizerConfig {
  int patch = 8;
  std::int32_t vq_size = 8192;
  std::uint64_t seed = 0;  // consumed by procedural raster generators, not by the level->id map
};

/// Levels per channel: 2^(floor(log2(vq_size)) / 3). The surplus ids above
/// levels^3 are never produced.
int quantizer_levels(std::int32_t vq_size);

/// Token id for one quantized (r,g,b) level triple: channel bits concatenated.
std::int32_t quantizer_encode(int r_level, int g_level, int b_level,
                              std::int32_t vq_size);

/// Mean color of the bin a token id decodes to (visualization inverse).
std::array<std::uint8_t, 3> quantizer_decode(std::int32_t id,
                                             std::int32_t vq_size);

/// Quantize one frame to an (H/patch) x (W/patch) token map, returned as a
/// single-frame TokenGrid. Throws std::invalid_argument if the frame
/// dimensions are not divisible by cfg.patch.
TokenGrid quantize_frame(const Frame& frame, const ToyQuantizerConfig& cfg);

/// Quantize a frame sequence into one T x H/patch x W/patch grid.
TokenGrid quantize_video(const std::vector<Frame>& frames,
                         const ToyQuantizerConfig& cfg);

}  // namespace vtp
