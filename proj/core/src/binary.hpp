#pragma once

// Little-endian byte packing shared by the bundle and checkpoint formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "polos/error.hpp"

namespace polos::detail {

template <typename T>
T to_little(T value) {
  static_assert(std::is_integral_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    T out{};
    auto* src = reinterpret_cast<const unsigned char*>(&value);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
    return out;
  } else {
    return value;
  }
}

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::byte*>(data);
    out_.insert(out_.end(), p, p + n);
  }

  template <typename T>
  void integer(T value) {
    const T le = to_little(value);
    bytes(&le, sizeof(T));
  }

  void f32(float value) { integer(std::bit_cast<std::uint32_t>(value)); }
  void f64(double value) { integer(std::bit_cast<std::uint64_t>(value)); }

  void f32s(std::span<const float> values) {
    for (const float v : values) f32(v);
  }

  void string(std::string_view s) {
    integer(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::vector<std::byte>& out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(void* data, std::size_t n) {
    need(n);
    std::memcpy(data, in_.data() + pos_, n);
    pos_ += n;
  }

  template <typename T>
  T integer() {
    T raw{};
    bytes(&raw, sizeof(T));
    return to_little(raw);
  }

  float f32() { return std::bit_cast<float>(integer<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(integer<std::uint64_t>()); }

  void f32s(std::span<float> out) {
    need(out.size() * sizeof(float));
    for (float& v : out) v = f32();
  }

  std::string string() {
    const auto n = integer<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }
  [[nodiscard]] std::size_t position() const { return pos_; }

  void need(std::size_t n) const {
    if (n > remaining()) throw DataError(what_ + ": truncated payload");
  }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace polos::detail
