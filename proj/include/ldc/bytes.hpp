#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ldc/errors.hpp"

namespace ldc {

// Little-endian byte buffer used by every binary format in the project.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void magic(const char tag[5]) {
    for (int i = 0; i < 4; ++i) buf_.push_back(std::uint8_t(tag[i]));
  }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}
  explicit ByteReader(const std::vector<std::uint8_t>& v) : ByteReader(v.data(), v.size()) {}

  std::uint8_t u8() {
    need(1);
    return *p_++;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(*p_++) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(*p_++) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void expect_magic(const char tag[5]) {
    need(4);
    if (std::memcmp(p_, tag, 4) != 0)
      fail(Err::BadMagic, std::string("expected tag ") + tag);
    p_ += 4;
  }
  std::size_t remaining() const { return std::size_t(end_ - p_); }
  bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n) {
    if (std::size_t(end_ - p_) < n) fail(Err::TruncatedFile, "byte stream ended early");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

}  // namespace ldc
