#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace splatcull::detail {

/// Little-endian binary writer over an in-memory buffer.
class BinaryWriter {
 public:
  template <typename T>
  void put(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    buffer_.insert(buffer_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }
  const std::vector<char>& buffer() const { return buffer_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  }

 private:
  std::vector<char> buffer_;
};

class BinaryReader {
 public:
  BinaryReader(std::vector<char> data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

  static BinaryReader from_file(const std::filesystem::path& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return BinaryReader(std::move(data), what);
  }

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    T value;
    bytes(&value, sizeof(T));
    return value;
  }
  void bytes(void* out, std::size_t n) {
    if (n > data_.size() - pos_) throw std::runtime_error("truncated " + what_);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(const char (&magic)[5]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0) throw std::runtime_error("bad magic in " + what_);
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace splatcull::detail
