#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace sketchforge::bytes {

// Little-endian encoding regardless of host order.
template <typename U>
void put_uint(std::string& out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) { put_uint(out, std::bit_cast<uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_uint(out, std::bit_cast<uint64_t>(v)); }

inline void put_f32_array(std::string& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  } else {
    for (float v : values) put_f32(out, v);
  }
}

// Sequential reader over a byte buffer; `ok()` turns false on any overrun and
// stays false.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  bool ok() const { return ok_; }
  size_t remaining() const { return ok_ ? data_.size() - pos_ : 0; }

  template <typename U>
  U get_uint() {
    if (!take(sizeof(U))) return 0;
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ - sizeof(U) + i])) << (8 * i);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get_uint<uint64_t>()); }
  float get_f32() { return std::bit_cast<float>(get_uint<uint32_t>()); }

  bool get_f32_array(std::span<float> out) {
    if (!take(out.size_bytes())) return false;
    const char* src = data_.data() + pos_ - out.size_bytes();
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), src, out.size_bytes());
    } else {
      for (size_t i = 0; i < out.size(); ++i) {
        uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<uint32_t>(static_cast<unsigned char>(src[4 * i + b])) << (8 * b);
        out[i] = std::bit_cast<float>(u);
      }
    }
    return true;
  }

  std::string_view get_bytes(size_t n) {
    if (!take(n)) return {};
    return data_.substr(pos_ - n, n);
  }

 private:
  bool take(size_t n) {
    if (!ok_ || data_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    pos_ += n;
    return true;
  }

  std::string_view data_;
  size_t pos_ = 0;
  bool ok_ = true;
};

}  // namespace sketchforge::bytes
