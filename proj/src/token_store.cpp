#include "vtp/token_store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace vtp {

namespace {

constexpr char kMagic[4] = {'V', 'T', 'K', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size())
      throw StoreFormatError("truncated store file: need " +
                             std::to_string(n) + " bytes for " + what +
                             " at offset " + std::to_string(pos_));
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(
        bytes_[pos_] | (static_cast<std::uint16_t>(bytes_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void VideoTokenStore::add_video(std::string id, std::uint32_t fps_num,
                                std::uint32_t fps_den, TokenGrid grid) {
  for (const auto& v : videos)
    if (v.id == id) throw std::invalid_argument("duplicate video id: " + id);
  if (!videos.empty() && (videos[0].grid.h_len != grid.h_len ||
                          videos[0].grid.w_len != grid.w_len))
    throw std::invalid_argument("grid h/w differs from store's");
  if (fps_num == 0 || fps_den == 0)
    throw std::invalid_argument("fps must be positive");
  videos.push_back(VideoEntry{std::move(id), fps_num, fps_den, std::move(grid)});
}

std::vector<std::uint8_t> serialize_store(const VideoTokenStore& store) {
  if (store.vq_size + 3 > 0x10000)
    throw std::invalid_argument("vq_size too large for 16-bit token storage");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(store.vq_size));
  put_u32(out, static_cast<std::uint32_t>(store.videos.size()));
  for (const auto& v : store.videos) {
    put_u32(out, static_cast<std::uint32_t>(v.id.size()));
    out.insert(out.end(), v.id.begin(), v.id.end());
    put_u32(out, v.fps_num);
    put_u32(out, v.fps_den);
    put_u32(out, static_cast<std::uint32_t>(v.grid.t_len));
    put_u32(out, static_cast<std::uint32_t>(v.grid.h_len));
    put_u32(out, static_cast<std::uint32_t>(v.grid.w_len));
    for (std::int32_t tok : v.grid.tokens) {
      if (tok < 0 || tok >= store.vq_size + 3)
        throw std::invalid_argument("token id " + std::to_string(tok) +
                                    " out of range for vq_size " +
                                    std::to_string(store.vq_size));
      put_u16(out, static_cast<std::uint16_t>(tok));
    }
  }
  return out;
}

VideoTokenStore parse_store(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw StoreFormatError("bad magic at offset 0 (expected \"VTK1\")");
  r.str(4, "magic");
  VideoTokenStore store;
  store.vq_size = static_cast<std::int32_t>(r.u32("vq_size"));
  if (store.vq_size <= 0 || store.vq_size + 3 > 0x10000)
    throw StoreFormatError("invalid vq_size at offset 4");
  const std::uint32_t count = r.u32("video_count");
  const std::int32_t limit = store.vq_size + 3;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t id_len = r.u32("id length");
    std::string id = r.str(id_len, "video id");
    const std::uint32_t fps_num = r.u32("fps numerator");
    const std::uint32_t fps_den = r.u32("fps denominator");
    const std::uint32_t t = r.u32("t_len");
    const std::uint32_t h = r.u32("h_len");
    const std::uint32_t w = r.u32("w_len");
    if (t == 0 || h == 0 || w == 0 || fps_num == 0 || fps_den == 0)
      throw StoreFormatError("invalid video header before offset " +
                             std::to_string(r.offset()));
    r.need(2 * static_cast<std::size_t>(t) * h * w, "token data");
    TokenGrid grid(static_cast<int>(t), static_cast<int>(h),
                   static_cast<int>(w));
    for (std::size_t n = 0; n < grid.size(); ++n) {
      const std::size_t off = r.offset();
      const std::uint16_t tok = r.u16("token id");
      if (tok >= limit)
        throw StoreFormatError("token id " + std::to_string(tok) +
                               " >= vocabulary size " + std::to_string(limit) +
                               " at offset " + std::to_string(off));
      grid.tokens[n] = tok;
    }
    store.add_video(std::move(id), fps_num, fps_den, std::move(grid));
  }
  if (!r.done())
    throw StoreFormatError("trailing bytes at offset " +
                           std::to_string(r.offset()));
  return store;
}

void save_store(const VideoTokenStore& store, const std::string& path) {
  const std::vector<std::uint8_t> bytes = serialize_store(store);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

VideoTokenStore load_store(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_store(bytes);
}

TokenGrid slice_clip(const VideoTokenStore& store, std::size_t video_index,
                     int start_t, int clip_len) {
  if (video_index >= store.videos.size())
    throw std::out_of_range("video index " + std::to_string(video_index) +
                            " out of range (store has " +
                            std::to_string(store.videos.size()) + " videos)");
  if (start_t < 0) throw std::invalid_argument("start_t must be >= 0");
  if (clip_len < 1) throw std::invalid_argument("clip_len must be >= 1");
  const TokenGrid& src = store.videos[video_index].grid;
  const Vocabulary vocab = store.vocabulary();
  TokenGrid clip(clip_len, src.h_len, src.w_len, vocab.pad_id);
  const std::size_t frame = static_cast<std::size_t>(src.h_len) * src.w_len;
  for (int t = 0; t < clip_len; ++t) {
    if (start_t + t >= src.t_len) break;
    std::copy_n(src.tokens.begin() + static_cast<std::ptrdiff_t>(
                                         (start_t + t) * frame),
                frame,
                clip.tokens.begin() + static_cast<std::ptrdiff_t>(t * frame));
  }
  return clip;
}

}  // namespace vtp
