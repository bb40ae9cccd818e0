#include "vtp/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace vtp {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'R', 'M'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k)
    out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  for (int k = 0; k < 8; ++k)
    out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error("truncated checkpoint at offset " +
                               std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes_[pos_ + k]))
           << (8 * k);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(bytes_[pos_ + k]))
           << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const NamedTensors& params, const std::string& path) {
  NamedTensors sorted = params;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  out.append(kMagic, 4);
  for (const auto& [name, t] : sorted) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

NamedTensors read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("bad checkpoint magic (expected \"VPRM\"): " +
                             path);
  Reader r(std::move(bytes));
  r.str(4);
  NamedTensors out;
  while (!r.done()) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    Shape shape;
    std::int64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(static_cast<int>(r.u32()));
      n *= shape.back();
    }
    r.need(8 * static_cast<std::size_t>(n));
    std::vector<double> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = r.f64();
    out.emplace_back(std::move(name),
                     Tensor::from_values(std::move(shape), std::move(values)));
  }
  return out;
}

void load_checkpoint(NamedTensors& params, const std::string& path) {
  NamedTensors loaded = read_checkpoint(path);
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : loaded) by_name.emplace(name, t);
  for (auto& [name, t] : params) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint missing parameter: " + name);
    if (it->second.shape() != t.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name +
                               ": " + shape_str(it->second.shape()) + " vs " +
                               shape_str(t.shape()));
    t.values() = it->second.values();
  }
}

}  // namespace vtp
