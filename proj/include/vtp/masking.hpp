#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "vtp/rng.hpp"
#include "vtp/token_grid.hpp"

namespace vtp {

struct GridDims {
  int t = 1;
  int h = 1;
  int w = 1;
  std::size_t cells() const {
    return static_cast<std::size_t>(t) * h * w;
  }
};

/// Inclusive boundaries of one 3D mask block.
struct MaskBlock {
  int t_lo, t_hi;
  int h_lo, h_hi;
  int w_lo, w_hi;
};

/// Maximum block extent per axis: half the length (at least 1) for the
/// spatial axes, 2/3 rounded up for the temporal axis.
int max_block_len_spatial(int dim);
int max_block_len_temporal(int dim);

using MaskPosition = std::tuple<int, int, int>;  // (t, i, j)

struct MaskSet {
  GridDims dims;
  std::set<MaskPosition> positions;

  double ratio() const {
    return static_cast<double>(positions.size()) /
           static_cast<double>(dims.cells());
  }
};

enum class MaskStrategy { kBlock, kIid };

struct MaskingConfig {
  MaskStrategy strategy = MaskStrategy::kBlock;
  int num_blocks = 5;      // block strategy
  double xi = 0.15;        // iid strategy: per-cell inclusion probability
  std::uint64_t seed = 0;  // consulted by sample_mask when no rng is supplied
};

/// One block: per axis, both boundaries drawn uniformly over the axis,
/// ordered, and redrawn until the interval respects the axis maximum.
MaskBlock sample_block(GridDims dims, Rng& rng);

MaskSet sample_mask(GridDims dims, const MaskingConfig& cfg, Rng& rng);
MaskSet sample_mask(GridDims dims, const MaskingConfig& cfg);  // seeds from cfg.seed

struct RatioEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Monte-Carlo mean and standard error of MaskSet::ratio over `samples` draws.
RatioEstimate estimate_ratio(GridDims dims, const MaskingConfig& cfg,
                             int samples, Rng& rng);

/// Block count whose Monte-Carlo mean induced ratio is nearest target_ratio.
/// Scans counts upward, stopping once the mean has exceeded the target by a
/// full per-block step (or at max_blocks).
int choose_num_blocks(GridDims dims, double target_ratio, int samples,
                      Rng& rng, int max_blocks = 64);

struct MaskedGrid {
  TokenGrid grid;
  std::map<MaskPosition, std::int32_t> targets;  // retained positions -> original id
};

/// Replace mask positions with mask_id. PAD cells are dropped from the mask
/// and never appear in targets.
MaskedGrid apply_mask(const TokenGrid& grid, const MaskSet& mask,
                      const Vocabulary& vocab);

enum class FillMetric { kSpatial, kSpatiotemporal };

/// Replace each masked cell with the token of its nearest visible (unmasked,
/// non-PAD) cell. Spatial metric searches the same frame first and falls back
/// to the spatio-temporal metric when a frame has no visible cell. Distance
/// ties break by lexicographic (t,i,j). Throws if no visible cell exists.
TokenGrid neighbor_fill(const TokenGrid& masked_grid, const MaskSet& mask,
                        const Vocabulary& vocab, FillMetric metric);

/// Fraction of mask positions where filled equals original.
double fill_match_rate(const TokenGrid& filled, const TokenGrid& original,
                       const MaskSet& mask);

}  // namespace vtp
