#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "deephash/bitcode.hpp"
#include "deephash/rng.hpp"
#include "deephash/tensor.hpp"

namespace deephash {

/// Label value for samples whose class is not known.
inline constexpr std::int32_t kUnknownLabel = -1;

enum class Split { train, query };

const char* split_name(Split split);

/// Images of shape [n, channels, height, width] with pixels in [0, 1].
struct LabeledDataset {
  Tensor images;
  std::vector<std::int32_t> labels;
  std::size_t num_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.rank() == 4 ? images.dim(1) : 0; }
  std::size_t height() const { return images.rank() == 4 ? images.dim(2) : 0; }
  std::size_t width() const { return images.rank() == 4 ? images.dim(3) : 0; }

  /// Checks shape/label invariants; throws ConfigError on violation.
  void validate() const;
};

/// Copies the samples at `indices`, in that order.
LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> indices);

/// Restricts a read to records [offset, offset + limit).
struct RecordRange {
  std::size_t offset = 0;
  std::size_t limit = std::numeric_limits<std::size_t>::max();
};

/// MNIST IDX image/label pair. Pixel bytes are divided by 255.
LabeledDataset read_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, RecordRange range = {});

/// CIFAR-10 binary batches: 3073-byte records (label, then R, G, B planes).
LabeledDataset read_cifar10(std::span<const std::filesystem::path> batch_paths,
                            RecordRange range = {});

struct SyntheticSpec {
  std::size_t classes = 2;
  std::size_t per_class = 10;
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  /// Standard deviation of the per-pixel Gaussian noise around each template.
  double spread = 0.2;
};

/// Gaussian blobs around random per-class template images, clipped to
/// [0, 1]. Samples are interleaved by class (label of sample i is i % classes).
LabeledDataset gen_synthetic(const SyntheticSpec& spec, Rng& rng);

/// Packed signatures plus labels: the persisted form of a set of hash codes.
struct CodeDatabase {
  std::size_t bits = 0;
  std::vector<BitCode> codes;
  std::vector<std::int32_t> labels;

  std::size_t size() const { return codes.size(); }
  void validate() const;

  friend bool operator==(const CodeDatabase&, const CodeDatabase&) = default;
};

/// Layout (all integers little-endian):
///   "DHCODES\0" | u32 version=1 | u32 K | u64 n
///   | n rows of ceil(K/64) u64 words | n i32 labels | u32 CRC-32
void save_codes(const CodeDatabase& db, const std::filesystem::path& path);
CodeDatabase load_codes(const std::filesystem::path& path);

}  // namespace deephash
