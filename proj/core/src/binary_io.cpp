#include "binary_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>

namespace deephash::detail {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void ByteWriter::tensor(const Tensor& t) {
  u32(static_cast<std::uint32_t>(t.rank()));
  for (auto extent : t.shape()) u64(extent);
  for (double v : t.values()) f64(v);
}

void ByteWriter::finish(const std::filesystem::path& path) {
  const std::uint32_t crc = crc32_of(bytes_.data(), bytes_.size());
  u32(crc);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes_.data()),
            static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

ByteReader::ByteReader(const std::filesystem::path& path, std::string_view magic)
    : path_(path.string()), bytes_(read_file(path)) {
  if (bytes_.size() < magic.size() + 4) {
    throw FormatError(path_ + ": file too short (" + std::to_string(bytes_.size()) + " bytes)");
  }
  if (!std::equal(magic.begin(), magic.end(), bytes_.begin())) {
    throw FormatError(path_ + ": bad magic at offset 0");
  }
  end_ = bytes_.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes_[end_ + i]} << (8 * i);
  if (stored != crc32_of(bytes_.data(), end_)) {
    throw FormatError(path_ + ": checksum mismatch at offset " + std::to_string(end_));
  }
  pos_ = magic.size();
}

void ByteReader::need(std::size_t n) const {
  if (n > end_ - pos_) {
    throw FormatError(path_ + ": truncated payload at offset " + std::to_string(pos_));
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
  return v;
}

std::string ByteReader::str() {
  const std::uint64_t n = u64();
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

Tensor ByteReader::tensor() {
  const std::uint32_t rank = u32();
  if (rank > 8) throw FormatError(path_ + ": implausible tensor rank at offset " + std::to_string(pos_));
  if (rank == 0) return Tensor();
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& extent : shape) {
    extent = u64();
    if (extent != 0 && count > remaining() / extent) {
      throw FormatError(path_ + ": tensor extent exceeds payload at offset " +
                        std::to_string(pos_));
    }
    count *= extent;
  }
  need(count * 8);
  std::vector<double> values(count);
  for (auto& v : values) v = f64();
  return Tensor(std::move(shape), std::move(values));
}

void ByteReader::expect_end() const {
  if (pos_ != end_) {
    throw FormatError(path_ + ": " + std::to_string(end_ - pos_) +
                      " unexpected trailing bytes at offset " + std::to_string(pos_));
  }
}

}  // namespace deephash::detail
