#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

#include "deephash/dataio.hpp"
#include "deephash/rng.hpp"
#include "deephash/tensor.hpp"

namespace deephash {

enum class HasherKind : std::uint8_t { lsh = 0, pcah = 1 };

const char* hasher_kind_name(HasherKind kind);

/// Linear projection hasher: bit k = sign(row_k . (z - mean)).
struct LinearHasher {
  HasherKind kind = HasherKind::lsh;
  Tensor projection;  // K x dim
  Tensor mean;        // dim; zeros for lsh
  /// PCAH only: the covariance had fewer than K non-zero eigenvalues and the
  /// trailing rows are an arbitrary orthonormal completion.
  bool rank_deficient = false;

  std::size_t bits() const { return projection.rank() == 2 ? projection.dim(0) : 0; }
  std::size_t dim() const { return projection.rank() == 2 ? projection.dim(1) : 0; }

  friend bool operator==(const LinearHasher&, const LinearHasher&) = default;
};

/// Random-projection LSH: rows i.i.d. standard Gaussian.
LinearHasher lsh_train(std::size_t dim, std::size_t bits, Rng& rng);

/// PCA hashing: rows are the top-K eigenvectors of the feature covariance,
/// ordered by decreasing eigenvalue. Each row's sign is fixed so that its
/// largest-magnitude entry is positive.
LinearHasher pcah_train(const Tensor& features, std::size_t bits);

/// Codes for every feature row ([n x dim]).
CodeDatabase linear_encode(const LinearHasher& hasher, const Tensor& features,
                           std::span<const std::int32_t> labels);

/// Layout: "DHHASH\0\0" | u32 version=1 | u8 kind | u8 rank_deficient
///   | projection tensor | mean tensor | u32 CRC-32
void save_hasher(const LinearHasher& hasher, const std::filesystem::path& path);
LinearHasher load_hasher(const std::filesystem::path& path);

}  // namespace deephash
