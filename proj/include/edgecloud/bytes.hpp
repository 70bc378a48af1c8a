// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <edgecloud/error.hpp>

// Little-endian byte streams shared by every binary artifact format.
namespace edgecloud {

static_assert(std::endian::native == std::endian::little,
              "byte streams assume a little-endian host");

class ByteWriter {
public:
  void bytes(std::string_view raw) {
    buf_.insert(buf_.end(), raw.begin(), raw.end());
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(v); }
  void f64(double v) { put(v); }
  void f32s(std::span<const float> v) {
    const auto *p = reinterpret_cast<const std::uint8_t *>(v.data());
    buf_.insert(buf_.end(), p, p + v.size_bytes());
  }

  const std::vector<std::uint8_t> &buffer() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(buf_); }

private:
  template <typename T> void put(T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.insert(buf_.end(), raw, raw + sizeof(T));
  }

  std::vector<std::uint8_t> buf_;
};

/**
 * @brief Bounds-checked reader. Every failure reports the byte offset at
 * which the read was attempted, tagged with the error kind of the owning
 * format.
 */
class ByteReader {
public:
  ByteReader(std::span<const std::uint8_t> data, ErrorKind kind,
             std::string context)
    : data_(data), kind_(kind), context_(std::move(context)) {}

  void expect_magic(std::string_view magic) {
    const auto at = pos_;
    need(magic.size());
    if (std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0)
      error_at(at, "bad magic, expected \"" + std::string(magic) + "\"");
    pos_ += magic.size();
  }
  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  float f32() { return get<float>(); }
  double f64() { return get<double>(); }
  std::vector<float> f32s(std::size_t count) {
    if (count > remaining() / sizeof(float))
      error_at(pos_, "truncated: need " + std::to_string(count * 4) +
                         " bytes of float data, have " +
                         std::to_string(remaining()));
    std::vector<float> out(count);
    std::memcpy(out.data(), data_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
    return out;
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  void expect_end() {
    if (pos_ != data_.size())
      error_at(pos_, std::to_string(remaining()) + " trailing bytes");
  }

  [[noreturn]] void error_at(std::size_t offset, const std::string &msg) const {
    fail(kind_, context_ + ": " + msg + " at byte offset " +
                    std::to_string(offset));
  }

private:
  void need(std::size_t n) {
    if (n > remaining())
      error_at(pos_, "truncated: need " + std::to_string(n) + " bytes, have " +
                         std::to_string(remaining()));
  }
  template <typename T> T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> data_;
  ErrorKind kind_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string &path);
void write_file(const std::string &path, std::span<const std::uint8_t> bytes);

} // namespace edgecloud
