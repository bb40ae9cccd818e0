#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtp/token_grid.hpp"

namespace vtp {

/// Raised on malformed store files; message names the offending byte offset.
class StoreFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VideoEntry {
  std::string id;
  std::uint32_t fps_num = 2;
  std::uint32_t fps_den = 1;
  TokenGrid grid;

  double fps() const { return static_cast<double>(fps_num) / fps_den; }
  bool operator==(const VideoEntry&) const = default;
};

/// Pre-extracted token grids for a set of videos, one shared vocabulary.
/// All grids in one store share h_len and w_len.
struct VideoTokenStore {
  std::int32_t vq_size = 8192;
  std::vector<VideoEntry> videos;

  Vocabulary vocabulary() const { return Vocabulary::with_vq_size(vq_size); }
  void add_video(std::string id, std::uint32_t fps_num, std::uint32_t fps_den,
                 TokenGrid grid);
  bool operator==(const VideoTokenStore&) const = default;
};

/// Binary "VTK1" container, little-endian throughout. load(save(s)) == s.
void save_store(const VideoTokenStore& store, const std::string& path);
VideoTokenStore load_store(const std::string& path);

std::vector<std::uint8_t> serialize_store(const VideoTokenStore& store);
VideoTokenStore parse_store(const std::vector<std::uint8_t>& bytes);

/// clip_len frames starting at start_t; frames past the end of the video are
/// whole frames of pad_id.
TokenGrid slice_clip(const VideoTokenStore& store, std::size_t video_index,
                     int start_t, int clip_len);

}  // namespace vtp
