#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "peract/errors.hpp"

namespace peract::io {

static_assert(std::endian::native == std::endian::little, "on-disk formats are little-endian");

class Writer {
public:
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    buffer_.insert(buffer_.end(), p, p + sizeof(T));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put_array(const T* data, std::size_t count) {
    const auto* p = reinterpret_cast<const char*>(data);
    buffer_.insert(buffer_.end(), p, p + sizeof(T) * count);
  }

  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buffer_.insert(buffer_.end(), s.begin(), s.end());
  }

  [[nodiscard]] const std::vector<char>& bytes() const { return buffer_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path + "' (disk full?)");
  }

private:
  std::vector<char> buffer_;
};

class Reader {
public:
  explicit Reader(std::vector<char> bytes, std::string origin = {})
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  static Reader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<char> bytes(size);
    in.seekg(0);
    in.read(bytes.data(), static_cast<std::streamsize>(size));
    if (!in) throw CorruptData("short read from '" + path + "'");
    return Reader(std::move(bytes), path);
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void get_array(T* data, std::size_t count) {
    require(sizeof(T) * count);
    std::memcpy(data, bytes_.data() + pos_, sizeof(T) * count);
    pos_ += sizeof(T) * count;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    require(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  [[nodiscard]] bool at_end() const { return pos_ == bytes_.size(); }
  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw CorruptData("truncated record" + (origin_.empty() ? std::string{} : " in '" + origin_ + "'"));
    }
  }

  std::vector<char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace peract::io
