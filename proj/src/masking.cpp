#include "vtp/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vtp {

int max_block_len_spatial(int dim) {
  return dim / 2 > 0 ? dim / 2 : 1;
}

int max_block_len_temporal(int dim) {
  return (2 * dim + 2) / 3;  // ceil(2*dim/3), >= 1 for dim >= 1
}

namespace {

// Both boundaries drawn uniformly over [0,dim), ordered, and redrawn while
// the interval exceeds max_len.
std::pair<int, int> sample_interval(int dim, int max_len, Rng& rng) {
  for (;;) {
    int lo = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(dim)));
    int hi = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(dim)));
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo + 1 <= max_len) return {lo, hi};
  }
}

void check_dims(GridDims dims) {
  if (dims.t < 1 || dims.h < 1 || dims.w < 1)
    throw std::invalid_argument("grid dims must be >= 1");
}

}  // namespace

MaskBlock sample_block(GridDims dims, Rng& rng) {
  check_dims(dims);
  const auto [t_lo, t_hi] =
      sample_interval(dims.t, max_block_len_temporal(dims.t), rng);
  const auto [h_lo, h_hi] =
      sample_interval(dims.h, max_block_len_spatial(dims.h), rng);
  const auto [w_lo, w_hi] =
      sample_interval(dims.w, max_block_len_spatial(dims.w), rng);
  return MaskBlock{t_lo, t_hi, h_lo, h_hi, w_lo, w_hi};
}

MaskSet sample_mask(GridDims dims, const MaskingConfig& cfg, Rng& rng) {
  check_dims(dims);
  MaskSet mask;
  mask.dims = dims;
  if (cfg.strategy == MaskStrategy::kBlock) {
    if (cfg.num_blocks < 1)
      throw std::invalid_argument("num_blocks must be >= 1");
    for (int b = 0; b < cfg.num_blocks; ++b) {
      const MaskBlock blk = sample_block(dims, rng);
      for (int t = blk.t_lo; t <= blk.t_hi; ++t)
        for (int i = blk.h_lo; i <= blk.h_hi; ++i)
          for (int j = blk.w_lo; j <= blk.w_hi; ++j)
            mask.positions.emplace(t, i, j);
    }
  } else {
    if (cfg.xi < 0.0 || cfg.xi > 1.0)
      throw std::invalid_argument("xi must be in [0,1]");
    for (int t = 0; t < dims.t; ++t)
      for (int i = 0; i < dims.h; ++i)
        for (int j = 0; j < dims.w; ++j)
          if (rng.uniform01() < cfg.xi) mask.positions.emplace(t, i, j);
  }
  return mask;
}

MaskSet sample_mask(GridDims dims, const MaskingConfig& cfg) {
  Rng rng(cfg.seed);
  return sample_mask(dims, cfg, rng);
}

RatioEstimate estimate_ratio(GridDims dims, const MaskingConfig& cfg,
                             int samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  check_dims(dims);
  const std::size_t cells = dims.cells();
  std::vector<char> covered(cells);
  double sum = 0.0, sum_sq = 0.0;
  for (int s = 0; s < samples; ++s) {
    double r = 0.0;
    if (cfg.strategy == MaskStrategy::kBlock) {
      std::fill(covered.begin(), covered.end(), 0);
      std::size_t count = 0;
      for (int b = 0; b < cfg.num_blocks; ++b) {
        const MaskBlock blk = sample_block(dims, rng);
        for (int t = blk.t_lo; t <= blk.t_hi; ++t)
          for (int i = blk.h_lo; i <= blk.h_hi; ++i)
            for (int j = blk.w_lo; j <= blk.w_hi; ++j) {
              char& c = covered[(static_cast<std::size_t>(t) * dims.h + i) *
                                    dims.w +
                                j];
              count += !c;
              c = 1;
            }
      }
      r = static_cast<double>(count) / static_cast<double>(cells);
    } else {
      std::size_t count = 0;
      for (std::size_t c = 0; c < cells; ++c)
        count += rng.uniform01() < cfg.xi;
      r = static_cast<double>(count) / static_cast<double>(cells);
    }
    sum += r;
    sum_sq += r * r;
  }
  RatioEstimate est;
  est.mean = sum / samples;
  if (samples > 1) {
    const double var =
        (sum_sq - samples * est.mean * est.mean) / (samples - 1);
    est.stderr_ = std::sqrt(var > 0.0 ? var / samples : 0.0);
  }
  return est;
}

int choose_num_blocks(GridDims dims, double target_ratio, int samples,
                      Rng& rng, int max_blocks) {
  if (target_ratio <= 0.0 || target_ratio >= 1.0)
    throw std::invalid_argument("target_ratio must be in (0,1)");
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kBlock;
  int best = 1;
  double best_gap = std::numeric_limits<double>::infinity();
  double prev_mean = 0.0;
  for (int k = 1; k <= max_blocks; ++k) {
    cfg.num_blocks = k;
    const double mean = estimate_ratio(dims, cfg, samples, rng).mean;
    const double gap = std::abs(mean - target_ratio);
    if (gap < best_gap) {
      best_gap = gap;
      best = k;
    }
    // past the target by a full per-block step: further counts only move away
    if (k > 1 && mean > target_ratio + (mean - prev_mean)) break;
    prev_mean = mean;
  }
  return best;
}

MaskedGrid apply_mask(const TokenGrid& grid, const MaskSet& mask,
                      const Vocabulary& vocab) {
  MaskedGrid out;
  out.grid = grid;
  for (const auto& [t, i, j] : mask.positions) {
    if (t < 0 || t >= grid.t_len || i < 0 || i >= grid.h_len || j < 0 ||
        j >= grid.w_len)
      throw std::invalid_argument("mask position outside grid");
    const std::int32_t original = grid.at(t, i, j);
    if (original == vocab.pad_id) continue;  // PAD cells are never masked
    out.targets[{t, i, j}] = original;
    out.grid.at(t, i, j) = vocab.mask_id;
  }
  return out;
}

namespace {

std::int64_t sq(int a) { return static_cast<std::int64_t>(a) * a; }

}  // namespace

TokenGrid neighbor_fill(const TokenGrid& masked_grid, const MaskSet& mask,
                        const Vocabulary& vocab, FillMetric metric) {
  // visible = not masked and not PAD
  std::vector<MaskPosition> visible;
  visible.reserve(masked_grid.size());
  for (int t = 0; t < masked_grid.t_len; ++t)
    for (int i = 0; i < masked_grid.h_len; ++i)
      for (int j = 0; j < masked_grid.w_len; ++j) {
        const std::int32_t tok = masked_grid.at(t, i, j);
        if (tok != vocab.mask_id && tok != vocab.pad_id &&
            !mask.positions.contains({t, i, j}))
          visible.emplace_back(t, i, j);
      }
  if (visible.empty())
    throw std::runtime_error("neighbor_fill: grid has no visible cell");

  TokenGrid filled = masked_grid;
  for (const auto& [t, i, j] : mask.positions) {
    if (masked_grid.at(t, i, j) == vocab.pad_id) continue;  // dropped from the mask
    std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
    MaskPosition best_pos{0, 0, 0};
    bool found = false;
    auto consider = [&](const MaskPosition& cand, std::int64_t d) {
      if (d < best_d || (d == best_d && cand < best_pos)) {
        best_d = d;
        best_pos = cand;
        found = true;
      }
    };
    if (metric == FillMetric::kSpatial) {
      for (const auto& cand : visible) {
        const auto& [ct, ci, cj] = cand;
        if (ct != t) continue;
        consider(cand, sq(ci - i) + sq(cj - j));
      }
    }
    if (!found) {  // spatiotemporal metric, or spatial fallback
      for (const auto& cand : visible) {
        const auto& [ct, ci, cj] = cand;
        consider(cand, sq(ct - t) + sq(ci - i) + sq(cj - j));
      }
    }
    const auto& [bt, bi, bj] = best_pos;
    filled.at(t, i, j) = masked_grid.at(bt, bi, bj);
  }
  return filled;
}

double fill_match_rate(const TokenGrid& filled, const TokenGrid& original,
                       const MaskSet& mask) {
  if (filled.t_len != original.t_len || filled.h_len != original.h_len ||
      filled.w_len != original.w_len)
    throw std::invalid_argument("fill_match_rate: grid dims differ");
  if (mask.positions.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [t, i, j] : mask.positions)
    if (filled.at(t, i, j) == original.at(t, i, j)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(mask.positions.size());
}

}  // namespace vtp
