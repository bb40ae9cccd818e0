#pragma once

#include <set>
#include <string>
#include <tuple>

#include "vtp/quantizer.hpp"
#include "vtp/token_grid.hpp"

namespace vtp {

/// Binary PPM (P6, maxval 255) raster files.
Frame read_ppm(const std::string& path);
void write_ppm(const Frame& frame, const std::string& path);

/// Token-map image: P5, width w_len, height t_len*h_len (frames stacked
/// top to bottom). Gray value is id mod 256; cells listed in `mask` render
/// as the maximum gray value.
void write_token_pgm(const TokenGrid& grid, const std::string& path,
                     const std::set<std::tuple<int, int, int>>* mask = nullptr);

}  // namespace vtp
