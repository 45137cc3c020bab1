#pragma once

// Little-endian byte serialisation shared by the checkpoint, code database
// and hasher containers. Every container ends with a CRC-32 of all
// preceding bytes.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deephash/errors.hpp"
#include "deephash/tensor.hpp"

namespace deephash::detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u64(s.size());
    raw(s);
  }
  /// Rank, extents, then values.
  void tensor(const Tensor& t);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  /// Appends the CRC-32 trailer and writes the buffer to `path`.
  void finish(const std::filesystem::path& path);

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  /// Loads `path`, verifies `magic` and the CRC-32 trailer.
  ByteReader(const std::filesystem::path& path, std::string_view magic);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str();
  Tensor tensor();

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return end_ - pos_; }
  /// Fails unless every payload byte has been consumed.
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::string path_;
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace deephash::detail
