#include "vtp/image_io.hpp"

#include <fstream>
#include <stdexcept>

namespace vtp {

namespace {

// next whitespace-delimited token, skipping '#' comment lines
std::string next_field(std::istream& in) {
  std::string tok;
  for (;;) {
    if (!(in >> tok)) throw std::runtime_error("truncated PPM header");
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
}

}  // namespace

Frame read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open raster: " + path);
  if (next_field(f) != "P6")
    throw std::runtime_error("not a binary PPM (P6): " + path);
  const int width = std::stoi(next_field(f));
  const int height = std::stoi(next_field(f));
  const int maxval = std::stoi(next_field(f));
  if (width <= 0 || height <= 0)
    throw std::runtime_error("bad PPM dimensions in " + path);
  if (maxval != 255)
    throw std::runtime_error("unsupported PPM maxval (want 255) in " + path);
  f.get();  // single whitespace byte after the header
  Frame frame(height, width);
  f.read(reinterpret_cast<char*>(frame.rgb.data()),
         static_cast<std::streamsize>(frame.rgb.size()));
  if (f.gcount() != static_cast<std::streamsize>(frame.rgb.size()))
    throw std::runtime_error("truncated PPM pixel data in " + path);
  return frame;
}

void write_ppm(const Frame& frame, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(frame.rgb.data()),
          static_cast<std::streamsize>(frame.rgb.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

void write_token_pgm(const TokenGrid& grid, const std::string& path,
                     const std::set<std::tuple<int, int, int>>* mask) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "P5\n"
    << grid.w_len << " " << grid.t_len * grid.h_len << "\n255\n";
  std::string bytes;
  bytes.reserve(grid.size());
  for (int t = 0; t < grid.t_len; ++t)
    for (int i = 0; i < grid.h_len; ++i)
      for (int j = 0; j < grid.w_len; ++j) {
        const bool masked = mask && mask->contains({t, i, j});
        bytes.push_back(static_cast<char>(
            masked ? 255 : static_cast<unsigned>(grid.at(t, i, j)) % 256));
      }
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace vtp
