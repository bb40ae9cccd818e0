#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "vtp/masking.hpp"
#include "vtp/rng.hpp"

using namespace vtp;

namespace {

// Oracle: enumeration of the per-axis interval distribution. Boundaries are
// independent uniform draws ordered afterwards, so an interval with lo < hi
// carries twice the weight of a single-cell one; rejection of over-long
// intervals renormalizes over the remaining support. Axes independent.
std::vector<double> axis_cover_prob(int dim, int max_len) {
  std::vector<double> prob(static_cast<std::size_t>(dim), 0.0);
  int total = 0;
  for (int lo = 0; lo < dim; ++lo)
    for (int hi = lo; hi < dim; ++hi) {
      if (hi - lo + 1 > max_len) continue;
      const int weight = lo == hi ? 1 : 2;
      total += weight;
      for (int p = lo; p <= hi; ++p)
        prob[static_cast<std::size_t>(p)] += weight;
    }
  for (auto& p : prob) p /= total;
  return prob;
}

double exact_block_union_ratio(GridDims dims, int num_blocks) {
  const auto pt = axis_cover_prob(dims.t, max_block_len_temporal(dims.t));
  const auto ph = axis_cover_prob(dims.h, max_block_len_spatial(dims.h));
  const auto pw = axis_cover_prob(dims.w, max_block_len_spatial(dims.w));
  double sum = 0.0;
  for (int t = 0; t < dims.t; ++t)
    for (int i = 0; i < dims.h; ++i)
      for (int j = 0; j < dims.w; ++j) {
        const double p = pt[t] * ph[i] * pw[j];
        sum += 1.0 - std::pow(1.0 - p, num_blocks);
      }
  return sum / static_cast<double>(dims.cells());
}

TokenGrid make_grid(GridDims dims, const Vocabulary&,
                    std::int32_t (*f)(int, int, int)) {
  TokenGrid g(dims.t, dims.h, dims.w);
  for (int t = 0; t < dims.t; ++t)
    for (int i = 0; i < dims.h; ++i)
      for (int j = 0; j < dims.w; ++j) g.at(t, i, j) = f(t, i, j);
  return g;
}

}  // namespace

TEST_CASE("block length limits per axis") {
  CHECK(max_block_len_temporal(5) == 4);   // ceil(10/3)
  CHECK(max_block_len_temporal(10) == 7);  // ceil(20/3)
  CHECK(max_block_len_temporal(1) == 1);
  CHECK(max_block_len_spatial(16) == 8);
  CHECK(max_block_len_spatial(32) == 16);
  CHECK(max_block_len_spatial(1) == 1);
  CHECK(max_block_len_spatial(3) == 1);
}

TEST_CASE("degenerate 1x1x1 grid forces the single-cell block") {
  Rng rng(1);
  for (int k = 0; k < 10; ++k) {
    const MaskBlock b = sample_block({1, 1, 1}, rng);
    CHECK(b.t_lo == 0);
    CHECK(b.t_hi == 0);
    CHECK(b.h_lo == 0);
    CHECK(b.h_hi == 0);
    CHECK(b.w_lo == 0);
    CHECK(b.w_hi == 0);
  }
}

TEST_CASE("sampled blocks respect bounds and length limits") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    GridDims dims{static_cast<int>(rng.uniform_int(1, 12)),
                  static_cast<int>(rng.uniform_int(1, 20)),
                  static_cast<int>(rng.uniform_int(1, 20))};
    const MaskBlock b = sample_block(dims, rng);
    CHECK(b.t_lo >= 0);
    CHECK(b.t_hi < dims.t);
    CHECK(b.h_lo >= 0);
    CHECK(b.h_hi < dims.h);
    CHECK(b.w_lo >= 0);
    CHECK(b.w_hi < dims.w);
    CHECK(b.t_lo <= b.t_hi);
    CHECK(b.h_lo <= b.h_hi);
    CHECK(b.w_lo <= b.w_hi);
    CHECK(b.t_hi - b.t_lo + 1 <= max_block_len_temporal(dims.t));
    CHECK(b.h_hi - b.h_lo + 1 <= max_block_len_spatial(dims.h));
    CHECK(b.w_hi - b.w_lo + 1 <= max_block_len_spatial(dims.w));
  }
}

TEST_CASE("per-cell coverage matches the enumeration oracle on (3,4,4)") {
  const GridDims dims{3, 4, 4};
  const auto pt = axis_cover_prob(3, max_block_len_temporal(3));
  const auto ph = axis_cover_prob(4, max_block_len_spatial(4));
  const auto pw = axis_cover_prob(4, max_block_len_spatial(4));
  const int N = 100000;
  std::vector<int> hits(dims.cells(), 0);
  Rng rng(7);
  for (int s = 0; s < N; ++s) {
    const MaskBlock b = sample_block(dims, rng);
    for (int t = b.t_lo; t <= b.t_hi; ++t)
      for (int i = b.h_lo; i <= b.h_hi; ++i)
        for (int j = b.w_lo; j <= b.w_hi; ++j)
          ++hits[static_cast<std::size_t>((t * 4 + i) * 4 + j)];
  }
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double p = pt[t] * ph[i] * pw[j];
        const double freq =
            hits[static_cast<std::size_t>((t * 4 + i) * 4 + j)] /
            static_cast<double>(N);
        const double se = std::sqrt(p * (1.0 - p) / N);
        CHECK(std::abs(freq - p) <= 3.0 * se);
      }
}

TEST_CASE("iid thresholds 0 and 1 are empty and full masks") {
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kIid;
  Rng rng(3);
  cfg.xi = 0.0;
  CHECK(sample_mask({4, 4, 4}, cfg, rng).positions.empty());
  cfg.xi = 1.0;
  CHECK(sample_mask({4, 4, 4}, cfg, rng).positions.size() == 64);
}

TEST_CASE("same seed gives identical masks") {
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kBlock;
  cfg.num_blocks = 3;
  cfg.seed = 99;
  const MaskSet a = sample_mask({5, 8, 8}, cfg);
  const MaskSet b = sample_mask({5, 8, 8}, cfg);
  CHECK(a.positions == b.positions);
  cfg.strategy = MaskStrategy::kIid;
  cfg.xi = 0.4;
  CHECK(sample_mask({5, 8, 8}, cfg).positions ==
        sample_mask({5, 8, 8}, cfg).positions);
}

TEST_CASE("single-block mean ratio matches exact enumeration on (2,2,2)") {
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kBlock;
  cfg.num_blocks = 1;
  Rng rng(11);
  const RatioEstimate est = estimate_ratio({2, 2, 2}, cfg, 50000, rng);
  const double exact = exact_block_union_ratio({2, 2, 2}, 1);
  CHECK(std::abs(est.mean - exact) <= 4.0 * est.stderr_);
}

TEST_CASE("two-block mean ratio matches per-cell convolution on (3,4,4)") {
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kBlock;
  cfg.num_blocks = 2;
  Rng rng(12);
  const RatioEstimate est = estimate_ratio({3, 4, 4}, cfg, 50000, rng);
  const double exact = exact_block_union_ratio({3, 4, 4}, 2);
  CHECK(std::abs(est.mean - exact) <= 4.0 * est.stderr_);
}

TEST_CASE("iid mean ratio concentrates around xi") {
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kIid;
  cfg.xi = 0.5;
  Rng rng(13);
  const int N = 2000;
  const GridDims dims{4, 6, 6};
  const RatioEstimate est = estimate_ratio(dims, cfg, N, rng);
  const double bound =
      4.0 * std::sqrt(cfg.xi * (1.0 - cfg.xi) /
                      (static_cast<double>(N) * dims.cells()));
  CHECK(std::abs(est.mean - cfg.xi) <= bound);
}

TEST_CASE("block (5,16,16) with 5 blocks lands near the published 14.5%") {
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kBlock;
  cfg.num_blocks = 5;
  Rng rng(14);
  const RatioEstimate est = estimate_ratio({5, 16, 16}, cfg, 5000, rng);
  CHECK(est.mean == doctest::Approx(0.145).epsilon(0.15));
}

TEST_CASE("expected ratio is non-decreasing in the block count") {
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kBlock;
  double prev = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const double exact = exact_block_union_ratio({3, 4, 4}, k);
    CHECK(exact >= prev);
    prev = exact;
  }
}

TEST_CASE("choose_num_blocks reproduces the published bold entries") {
  Rng rng(15);
  CHECK(choose_num_blocks({5, 16, 16}, 0.15, 4000, rng) == 5);
  CHECK(choose_num_blocks({10, 32, 32}, 0.15, 4000, rng) == 7);
}

TEST_CASE("choose_num_blocks saturates on tiny grids") {
  Rng rng(16);
  const int k = choose_num_blocks({2, 2, 2}, 0.999, 400, rng, 48);
  CHECK(k >= 10);  // scan only stops once the mean has flattened near 1
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kBlock;
  cfg.num_blocks = k;
  Rng rng2(17);
  CHECK(estimate_ratio({2, 2, 2}, cfg, 2000, rng2).mean > 0.95);
}

TEST_CASE("apply_mask replaces exactly the retained positions") {
  const Vocabulary vocab = Vocabulary::with_vq_size(32);
  const GridDims dims{2, 3, 3};
  TokenGrid grid = make_grid(dims, vocab, [](int t, int i, int j) {
    return static_cast<std::int32_t>((t * 9 + i * 3 + j) % 32);
  });

  MaskSet empty;
  empty.dims = dims;
  const MaskedGrid unchanged = apply_mask(grid, empty, vocab);
  CHECK(unchanged.grid == grid);
  CHECK(unchanged.targets.empty());

  MaskSet full;
  full.dims = dims;
  for (int t = 0; t < 2; ++t)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) full.positions.emplace(t, i, j);
  const MaskedGrid all = apply_mask(grid, full, vocab);
  CHECK(all.targets.size() == dims.cells());
  for (std::int32_t tok : all.grid.tokens) CHECK(tok == vocab.mask_id);

  // PAD frame: excluded from targets, grid cell left as PAD
  TokenGrid padded = grid;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) padded.at(1, i, j) = vocab.pad_id;
  const MaskedGrid masked = apply_mask(padded, full, vocab);
  CHECK(masked.targets.size() == 9);
  for (const auto& [pos, tok] : masked.targets) {
    CHECK(std::get<0>(pos) == 0);
    CHECK(tok != vocab.pad_id);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(masked.grid.at(1, i, j) == vocab.pad_id);
}

TEST_CASE("restoring targets undoes apply_mask") {
  const Vocabulary vocab = Vocabulary::with_vq_size(64);
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const GridDims dims{static_cast<int>(rng.uniform_int(1, 4)),
                        static_cast<int>(rng.uniform_int(1, 5)),
                        static_cast<int>(rng.uniform_int(1, 5))};
    TokenGrid grid(dims.t, dims.h, dims.w);
    for (auto& tok : grid.tokens)
      tok = static_cast<std::int32_t>(rng.uniform_below(64));
    MaskingConfig cfg;
    cfg.strategy = MaskStrategy::kBlock;
    cfg.num_blocks = 2;
    const MaskSet mask = sample_mask(dims, cfg, rng);
    MaskedGrid m = apply_mask(grid, mask, vocab);
    for (const auto& [pos, tok] : m.targets)
      m.grid.at(std::get<0>(pos), std::get<1>(pos), std::get<2>(pos)) = tok;
    CHECK(m.grid == grid);
  }
}

TEST_CASE("neighbor_fill reproduces constant grids exactly") {
  const Vocabulary vocab = Vocabulary::with_vq_size(32);
  const GridDims dims{2, 4, 4};
  TokenGrid grid(dims.t, dims.h, dims.w, 17);
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kIid;
  cfg.xi = 0.4;
  Rng rng(31);
  const MaskSet mask = sample_mask(dims, cfg, rng);
  const MaskedGrid masked = apply_mask(grid, mask, vocab);
  for (FillMetric metric :
       {FillMetric::kSpatial, FillMetric::kSpatiotemporal}) {
    const TokenGrid filled = neighbor_fill(masked.grid, mask, vocab, metric);
    CHECK(filled == grid);
    CHECK(fill_match_rate(filled, grid, mask) == 1.0);
  }
}

TEST_CASE("neighbor_fill breaks distance ties lexicographically") {
  const Vocabulary vocab = Vocabulary::with_vq_size(32);
  TokenGrid grid(1, 1, 3);
  grid.at(0, 0, 0) = 5;
  grid.at(0, 0, 2) = 9;
  MaskSet mask;
  mask.dims = {1, 1, 3};
  mask.positions.emplace(0, 0, 1);
  MaskedGrid m = apply_mask(grid, mask, vocab);
  const TokenGrid filled =
      neighbor_fill(m.grid, mask, vocab, FillMetric::kSpatial);
  CHECK(filled.at(0, 0, 1) == 5);  // (0,0,0) wins the tie against (0,0,2)
}

TEST_CASE("spatial metric falls back when a frame is fully masked") {
  const Vocabulary vocab = Vocabulary::with_vq_size(32);
  TokenGrid grid(2, 2, 2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) grid.at(1, i, j) = 8;
  MaskSet mask;
  mask.dims = {2, 2, 2};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) mask.positions.emplace(1, i, j);
  MaskedGrid m = apply_mask(grid, mask, vocab);
  const TokenGrid filled =
      neighbor_fill(m.grid, mask, vocab, FillMetric::kSpatial);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(filled.at(1, i, j) == 3);
}

TEST_CASE("neighbor_fill rejects fully masked grids") {
  const Vocabulary vocab = Vocabulary::with_vq_size(32);
  TokenGrid grid(1, 2, 2, 1);
  MaskSet mask;
  mask.dims = {1, 2, 2};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) mask.positions.emplace(0, i, j);
  const MaskedGrid m = apply_mask(grid, mask, vocab);
  CHECK_THROWS_AS(neighbor_fill(m.grid, mask, vocab, FillMetric::kSpatial),
                  std::runtime_error);
}

TEST_CASE("fill_match_rate degenerate values") {
  const Vocabulary vocab = Vocabulary::with_vq_size(32);
  TokenGrid a(1, 2, 2, 4);
  TokenGrid b(1, 2, 2, 6);
  MaskSet mask;
  mask.dims = {1, 2, 2};
  mask.positions.emplace(0, 0, 0);
  mask.positions.emplace(0, 1, 1);
  CHECK(fill_match_rate(a, a, mask) == 1.0);
  CHECK(fill_match_rate(a, b, mask) == 0.0);
}

// Exhaustive 1x4x4 oracle: expected fill match rate over the whole mask
// distribution, iid (at the block scheme's induced ratio) vs a single block.
TEST_CASE("iid fill beats block fill on a striped 1x4x4 grid") {
  const Vocabulary vocab = Vocabulary::with_vq_size(32);
  const GridDims dims{1, 4, 4};
  TokenGrid grid = make_grid(dims, vocab, [](int, int, int j) {
    return static_cast<std::int32_t>(j / 2);  // stripes of width 2
  });

  auto fill_rate_for = [&](const std::vector<int>& cells) {
    MaskSet mask;
    mask.dims = dims;
    for (int c : cells) mask.positions.emplace(0, c / 4, c % 4);
    const MaskedGrid m = apply_mask(grid, mask, vocab);
    const TokenGrid filled =
        neighbor_fill(m.grid, mask, vocab, FillMetric::kSpatial);
    return fill_match_rate(filled, grid, mask);
  };

  // block: enumerate the weighted (h-interval, w-interval) support
  double block_expect = 0.0;
  double block_weight = 0.0;
  for (int hlo = 0; hlo < 4; ++hlo)
    for (int hhi = hlo; hhi < 4 && hhi - hlo + 1 <= 2; ++hhi)
      for (int wlo = 0; wlo < 4; ++wlo)
        for (int whi = wlo; whi < 4 && whi - wlo + 1 <= 2; ++whi) {
          const double w =
              (hlo == hhi ? 1.0 : 2.0) * (wlo == whi ? 1.0 : 2.0);
          std::vector<int> cells;
          for (int i = hlo; i <= hhi; ++i)
            for (int j = wlo; j <= whi; ++j) cells.push_back(i * 4 + j);
          block_expect += w * fill_rate_for(cells);
          block_weight += w;
        }
  block_expect /= block_weight;

  // expected block mask size drives the iid threshold
  const double xi = exact_block_union_ratio(dims, 1);
  double iid_expect = 0.0;
  double iid_weight = 0.0;
  for (int bits = 1; bits < (1 << 16) - 1; ++bits) {  // skip empty and full
    const int k = __builtin_popcount(static_cast<unsigned>(bits));
    const double w = std::pow(xi, k) * std::pow(1.0 - xi, 16 - k);
    std::vector<int> cells;
    for (int c = 0; c < 16; ++c)
      if (bits & (1 << c)) cells.push_back(c);
    iid_expect += w * fill_rate_for(cells);
    iid_weight += w;
  }
  iid_expect /= iid_weight;

  CHECK(iid_expect > block_expect);
}
