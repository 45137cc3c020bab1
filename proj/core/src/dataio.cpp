#include "deephash/dataio.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "binary_io.hpp"
#include "deephash/errors.hpp"

namespace deephash {

namespace {

constexpr std::uint32_t kIdxImageMagic = 2051;
constexpr std::uint32_t kIdxLabelMagic = 2049;
constexpr std::size_t kCifarRecord = 3073;
constexpr char kCodesMagic[] = "DHCODES";  // 8 bytes including the terminator
constexpr std::uint32_t kCodesVersion = 1;

std::uint32_t big_endian_u32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                             const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path + ": truncated header at offset " + std::to_string(offset));
  }
  return std::uint32_t{bytes[offset]} << 24 | std::uint32_t{bytes[offset + 1]} << 16 |
         std::uint32_t{bytes[offset + 2]} << 8 | std::uint32_t{bytes[offset + 3]};
}

std::pair<std::size_t, std::size_t> clamp_range(RecordRange range, std::size_t total) {
  const std::size_t first = std::min(range.offset, total);
  const std::size_t count = std::min(range.limit, total - first);
  return {first, count};
}

}  // namespace

const char* split_name(Split split) { return split == Split::train ? "train" : "query"; }

void LabeledDataset::validate() const {
  if (images.rank() != 4) {
    throw ConfigError("dataset images must be [n, c, h, w], got " + shape_string(images.shape()));
  }
  if (images.dim(0) != labels.size()) {
    throw ConfigError("dataset has " + std::to_string(images.dim(0)) + " images but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kUnknownLabel &&
        (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)) {
      throw ConfigError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                        " outside declared class count " + std::to_string(num_classes));
    }
  }
}

LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> indices) {
  Shape shape = data.images.shape();
  shape[0] = indices.size();
  LabeledDataset out;
  out.images = Tensor(shape);
  out.num_classes = data.num_classes;
  out.split = data.split;
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= data.size()) throw BoundsError("subset index out of range");
    auto src = data.images.slice(indices[r]);
    std::copy(src.begin(), src.end(), out.images.slice(r).begin());
    out.labels.push_back(data.labels[indices[r]]);
  }
  return out;
}

LabeledDataset read_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, RecordRange range) {
  const auto images = detail::read_file(images_path);
  const auto labels = detail::read_file(labels_path);
  const std::string ip = images_path.string();
  const std::string lp = labels_path.string();

  if (big_endian_u32(images, 0, ip) != kIdxImageMagic) {
    throw FormatError(ip + ": bad IDX image magic at offset 0");
  }
  if (big_endian_u32(labels, 0, lp) != kIdxLabelMagic) {
    throw FormatError(lp + ": bad IDX label magic at offset 0");
  }
  const std::size_t n_images = big_endian_u32(images, 4, ip);
  const std::size_t rows = big_endian_u32(images, 8, ip);
  const std::size_t cols = big_endian_u32(images, 12, ip);
  const std::size_t n_labels = big_endian_u32(labels, 4, lp);
  if (n_images != n_labels) {
    throw FormatError("count mismatch: " + ip + " declares " + std::to_string(n_images) +
                      " images at offset 4 but " + lp + " declares " + std::to_string(n_labels) +
                      " labels at offset 4");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + n_images * pixels) {
    throw FormatError(ip + ": truncated payload at offset " + std::to_string(images.size()) +
                      ", expected " + std::to_string(16 + n_images * pixels) + " bytes");
  }
  if (labels.size() < 8 + n_labels) {
    throw FormatError(lp + ": truncated payload at offset " + std::to_string(labels.size()) +
                      ", expected " + std::to_string(8 + n_labels) + " bytes");
  }

  const auto [first, count] = clamp_range(range, n_images);
  LabeledDataset out;
  out.images = Tensor({count, 1, rows, cols});
  out.labels.resize(count);
  out.num_classes = 10;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = first + i;
    const std::uint8_t label = labels[8 + src];
    if (label > 9) {
      throw FormatError(lp + ": label " + std::to_string(label) + " out of range at offset " +
                        std::to_string(8 + src));
    }
    out.labels[i] = label;
    auto dst = out.images.slice(i);
    const std::uint8_t* px = images.data() + 16 + src * pixels;
    for (std::size_t p = 0; p < pixels; ++p) dst[p] = px[p] / 255.0;
  }
  return out;
}

LabeledDataset read_cifar10(std::span<const std::filesystem::path> batch_paths,
                            RecordRange range) {
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t total = 0;
  for (const auto& path : batch_paths) {
    files.push_back(detail::read_file(path));
    if (files.back().size() % kCifarRecord != 0) {
      throw FormatError(path.string() + ": length " + std::to_string(files.back().size()) +
                        " is not a multiple of " + std::to_string(kCifarRecord) +
                        "; trailing record starts at offset " +
                        std::to_string(files.back().size() / kCifarRecord * kCifarRecord));
    }
    total += files.back().size() / kCifarRecord;
  }

  const auto [first, count] = clamp_range(range, total);
  LabeledDataset out;
  out.images = Tensor({count, 3, 32, 32});
  out.labels.resize(count);
  out.num_classes = 10;
  std::size_t global = 0;
  std::size_t written = 0;
  for (std::size_t f = 0; f < files.size() && written < count; ++f) {
    const std::size_t records = files[f].size() / kCifarRecord;
    for (std::size_t r = 0; r < records && written < count; ++r, ++global) {
      if (global < first) continue;
      const std::uint8_t* rec = files[f].data() + r * kCifarRecord;
      if (rec[0] > 9) {
        throw FormatError(batch_paths[f].string() + ": label " + std::to_string(rec[0]) +
                          " out of range at offset " + std::to_string(r * kCifarRecord));
      }
      out.labels[written] = rec[0];
      auto dst = out.images.slice(written);
      for (std::size_t p = 0; p < 3072; ++p) dst[p] = rec[1 + p] / 255.0;
      ++written;
    }
  }
  return out;
}

LabeledDataset gen_synthetic(const SyntheticSpec& spec, Rng& rng) {
  if (spec.classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (spec.per_class < 1) throw ConfigError("synthetic data needs at least 1 sample per class");
  if (spec.channels == 0 || spec.height == 0 || spec.width == 0) {
    throw ConfigError("synthetic image extents must be positive");
  }
  if (!(spec.spread >= 0.0)) throw ConfigError("synthetic spread must be non-negative");

  const std::size_t pixels = spec.channels * spec.height * spec.width;
  std::vector<std::vector<double>> templates(spec.classes, std::vector<double>(pixels));
  for (auto& t : templates)
    for (auto& v : t) v = rng.uniform();

  const std::size_t n = spec.classes * spec.per_class;
  LabeledDataset out;
  out.images = Tensor({n, spec.channels, spec.height, spec.width});
  out.labels.resize(n);
  out.num_classes = spec.classes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % spec.classes;
    out.labels[i] = static_cast<std::int32_t>(label);
    auto dst = out.images.slice(i);
    for (std::size_t p = 0; p < pixels; ++p) {
      const double noise = spec.spread > 0.0 ? spec.spread * rng.normal() : 0.0;
      dst[p] = std::clamp(templates[label][p] + noise, 0.0, 1.0);
    }
  }
  return out;
}

void CodeDatabase::validate() const {
  if (codes.size() != labels.size()) {
    throw ConfigError("code database has " + std::to_string(codes.size()) + " codes but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].size() != bits) {
      throw DimensionError("code " + std::to_string(i) + " has " +
                           std::to_string(codes[i].size()) + " bits, expected " +
                           std::to_string(bits));
    }
  }
}

void save_codes(const CodeDatabase& db, const std::filesystem::path& path) {
  db.validate();
  detail::ByteWriter w;
  w.raw(std::string_view(kCodesMagic, sizeof(kCodesMagic)));
  w.u32(kCodesVersion);
  w.u32(static_cast<std::uint32_t>(db.bits));
  w.u64(db.size());
  for (const auto& code : db.codes)
    for (auto word : code.words()) w.u64(word);
  for (auto label : db.labels) w.i32(label);
  w.finish(path);
}

CodeDatabase load_codes(const std::filesystem::path& path) {
  detail::ByteReader r(path, std::string_view(kCodesMagic, sizeof(kCodesMagic)));
  const std::uint32_t version = r.u32();
  if (version != kCodesVersion) {
    throw FormatError(path.string() + ": unsupported code file version " +
                      std::to_string(version) + " at offset 8");
  }
  CodeDatabase db;
  db.bits = r.u32();
  const std::uint64_t n = r.u64();
  const std::size_t words = words_for_bits(db.bits);
  if (n > r.remaining() / (words * 8 + 4)) {
    throw FormatError(path.string() + ": declared " + std::to_string(n) +
                      " codes exceed payload at offset " + std::to_string(r.offset()));
  }
  db.codes.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::vector<std::uint64_t> row(words);
    for (auto& word : row) word = r.u64();
    db.codes.push_back(BitCode::from_words(db.bits, std::move(row)));
  }
  db.labels.resize(n);
  for (auto& label : db.labels) label = r.i32();
  r.expect_end();
  return db;
}

}  // namespace deephash
