#ifndef SPG_BINARY_IO_HPP_
#define SPG_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "spg/core.hpp"

namespace spg::io {

// Little-endian byte sink.
class Writer {
 public:
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <class U>
  void uint(U v) {
    for (size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u8(uint8_t v) { uint(v); }
  void u16(uint16_t v) { uint(v); }
  void u32(uint32_t v) { uint(v); }
  void u64(uint64_t v) { uint(v); }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void str16(const std::string& s) {
    u16(static_cast<uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<uint8_t>& data() const { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

// Bounds-checked little-endian reader; running past the end is a format error.
class Reader {
 public:
  Reader(const uint8_t* data, size_t size, std::string what) : p_(data), n_(size), what_(std::move(what)) {}

  void need(size_t k) const {
    if (pos_ + k > n_) fail(ErrorCode::kFormat, what_ + ": truncated file");
  }
  template <class U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  uint8_t u8() { return uint<uint8_t>(); }
  uint16_t u16() { return uint<uint16_t>(); }
  uint32_t u32() { return uint<uint32_t>(); }
  uint64_t u64() { return uint<uint64_t>(); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  std::string str16() { return str(u16()); }
  size_t pos() const { return pos_; }
  size_t remaining() const { return n_ - pos_; }

 private:
  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
  std::string what_;
};

std::vector<uint8_t> read_file(const std::string& path);
// Writes via a temporary file and rename so readers never see partial output.
void write_file(const std::string& path, const std::vector<uint8_t>& data);

}  // namespace spg::io

#endif  // SPG_BINARY_IO_HPP_
