#pragma once

// Little-endian encoding helpers shared by the model and dataset formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace slowdown::detail {

class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.append(raw); }

  template <typename UInt>
  void uint(UInt value) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      buf_.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
    }
  }
  void u8(std::uint8_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  const std::string& data() const noexcept { return buf_; }

 private:
  std::string buf_;
};

// Reader over an in-memory buffer; `ok()` turns false on any overrun.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  bool bytes(std::size_t n, std::string_view& out) {
    if (!take(n)) return false;
    out = data_.substr(pos_ - n, n);
    return true;
  }

  template <typename UInt>
  bool uint(UInt& out) {
    if (!take(sizeof(UInt))) return false;
    out = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      out |= static_cast<UInt>(static_cast<unsigned char>(data_[pos_ - sizeof(UInt) + i])) << (8 * i);
    }
    return true;
  }
  bool u8(std::uint8_t& v) { return uint(v); }
  bool u32(std::uint32_t& v) { return uint(v); }
  bool u64(std::uint64_t& v) { return uint(v); }
  bool f32(float& v) {
    std::uint32_t raw = 0;
    if (!u32(raw)) return false;
    v = std::bit_cast<float>(raw);
    return true;
  }
  bool f64(double& v) {
    std::uint64_t raw = 0;
    if (!u64(raw)) return false;
    v = std::bit_cast<double>(raw);
    return true;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  bool take(std::size_t n) {
    if (data_.size() - pos_ < n) return false;
    pos_ += n;
    return true;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace slowdown::detail
