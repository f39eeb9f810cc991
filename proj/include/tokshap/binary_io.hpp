#pragma once

// Little-endian encoding helpers shared by the datastore and embedding file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <filesystem>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>

#include "tokshap/error.hpp"

namespace tokshap::detail {

class ByteWriter {
public:
  template <typename T>
    requires std::is_integral_v<T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>(u & 0xFF));
      if constexpr (sizeof(T) > 1) u >>= 8;
    }
  }

  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }

  void put_raw(std::string_view bytes) { buf_.append(bytes); }

  template <typename Len>
  void put_string(std::string_view s) {
    if (s.size() > std::numeric_limits<Len>::max())
      throw InvalidArgument("string too long for length prefix: " + std::to_string(s.size()));
    put(static_cast<Len>(s.size()));
    buf_.append(s);
  }

  const std::string& bytes() const noexcept { return buf_; }

private:
  std::string buf_;
};

class ByteReader {
public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
    requires std::is_integral_v<T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::string_view get_raw(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename Len>
  std::string get_string() {
    const auto n = get<Len>();
    return std::string(get_raw(n));
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("truncated file");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace tokshap::detail
