#include "vtp/quantizer.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace vtp {

namespace {

int level_bits(std::int32_t vq_size) {
  int total_bits = 0;
  while ((std::int64_t{1} << (total_bits + 1)) <= vq_size) ++total_bits;
  return total_bits / 3;  // bits per channel
}

}  // namespace

int quantizer_levels(std::int32_t vq_size) {
  if (vq_size <= 0) throw std::invalid_argument("vq_size must be positive");
  return 1 << level_bits(vq_size);
}

std::int32_t quantizer_encode(int r_level, int g_level, int b_level,
                              std::int32_t vq_size) {
  const int bits = level_bits(vq_size);
  return static_cast<std::int32_t>((r_level << (2 * bits)) |
                                   (g_level << bits) | b_level);
}

std::array<std::uint8_t, 3> quantizer_decode(std::int32_t id,
                                             std::int32_t vq_size) {
  const int bits = level_bits(vq_size);
  const int levels = 1 << bits;
  const int mask = levels - 1;
  const int lvl[3] = {(id >> (2 * bits)) & mask, (id >> bits) & mask,
                      id & mask};
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    // center of the bin [lvl*256/L, (lvl+1)*256/L)
    rgb[c] = static_cast<std::uint8_t>((2 * lvl[c] + 1) * 256 / (2 * levels));
  }
  return rgb;
}

TokenGrid quantize_frame(const Frame& frame, const ToyQuantizerConfig& cfg) {
  if (cfg.patch <= 0) throw std::invalid_argument("patch must be positive");
  if (frame.height <= 0 || frame.width <= 0 ||
      frame.height % cfg.patch != 0 || frame.width % cfg.patch != 0) {
    throw std::invalid_argument(
        "frame " + std::to_string(frame.height) + "x" +
        std::to_string(frame.width) + " not divisible by patch " +
        std::to_string(cfg.patch));
  }
  const int levels = quantizer_levels(cfg.vq_size);
  const int gh = frame.height / cfg.patch;
  const int gw = frame.width / cfg.patch;
  const std::int64_t count = std::int64_t{cfg.patch} * cfg.patch;
  TokenGrid grid(1, gh, gw);
  for (int gi = 0; gi < gh; ++gi) {
    for (int gj = 0; gj < gw; ++gj) {
      std::int64_t sum[3] = {0, 0, 0};
      for (int y = gi * cfg.patch; y < (gi + 1) * cfg.patch; ++y)
        for (int x = gj * cfg.patch; x < (gj + 1) * cfg.patch; ++x)
          for (int c = 0; c < 3; ++c) sum[c] += frame.at(y, x, c);
      int lvl[3];
      for (int c = 0; c < 3; ++c) {
        // floor(mean * levels / 256) in exact integer arithmetic
        lvl[c] = static_cast<int>(sum[c] * levels / (256 * count));
        if (lvl[c] > levels - 1) lvl[c] = levels - 1;
      }
      grid.at(0, gi, gj) = quantizer_encode(lvl[0], lvl[1], lvl[2], cfg.vq_size);
    }
  }
  return grid;
}

TokenGrid quantize_video(const std::vector<Frame>& frames,
                         const ToyQuantizerConfig& cfg) {
  if (frames.empty()) throw std::invalid_argument("empty frame sequence");
  TokenGrid first = quantize_frame(frames[0], cfg);
  TokenGrid grid(static_cast<int>(frames.size()), first.h_len, first.w_len);
  std::copy(first.tokens.begin(), first.tokens.end(), grid.tokens.begin());
  for (std::size_t t = 1; t < frames.size(); ++t) {
    if (frames[t].height != frames[0].height ||
        frames[t].width != frames[0].width)
      throw std::invalid_argument("frame sizes differ within one video");
    TokenGrid map = quantize_frame(frames[t], cfg);
    std::copy(map.tokens.begin(), map.tokens.end(),
              grid.tokens.begin() + static_cast<std::ptrdiff_t>(t * map.size()));
  }
  return grid;
}

}  // namespace vtp
