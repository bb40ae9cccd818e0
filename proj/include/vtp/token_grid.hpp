#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtp {

/// Discrete token vocabulary: vq_size content ids plus three special ids
/// appended after the content range.
struct Vocabulary {
  std::int32_t vq_size = 8192;
  std::int32_t cls_id = 8192;
  std::int32_t pad_id = 8193;
  std::int32_t mask_id = 8194;

  static Vocabulary with_vq_size(std::int32_t vq) {
    if (vq <= 0) throw std::invalid_argument("vq_size must be positive");
    return Vocabulary{vq, vq, vq + 1, vq + 2};
  }

  std::int32_t total_size() const { return vq_size + 3; }

  /// Ids a grid cell may hold (cls never appears inside a grid).
  bool valid_grid_token(std::int32_t id) const {
    return (id >= 0 && id < vq_size) || id == pad_id || id == mask_id;
  }
};

/// Dense T x H x W grid of token ids, t-major then h then w.
struct TokenGrid {
  int t_len = 0;
  int h_len = 0;
  int w_len = 0;
  std::vector<std::int32_t> tokens;

  TokenGrid() = default;
  TokenGrid(int t, int h, int w, std::int32_t fill = 0)
      : t_len(t), h_len(h), w_len(w) {
    if (t <= 0 || h <= 0 || w <= 0)
      throw std::invalid_argument("TokenGrid dims must be positive");
    tokens.assign(static_cast<std::size_t>(t) * h * w, fill);
  }

  std::size_t size() const { return tokens.size(); }

  std::size_t index(int t, int i, int j) const {
    return (static_cast<std::size_t>(t) * h_len + i) * w_len + j;
  }

  std::int32_t& at(int t, int i, int j) { return tokens[index(t, i, j)]; }
  std::int32_t at(int t, int i, int j) const { return tokens[index(t, i, j)]; }

  bool operator==(const TokenGrid&) const = default;
};

}  // namespace vtp
