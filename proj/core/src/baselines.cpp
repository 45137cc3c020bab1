#include "deephash/baselines.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "deephash/bitcode.hpp"
#include "deephash/errors.hpp"

namespace deephash {

namespace {

constexpr std::string_view kMagic{"DHHASH\0\0", 8};
constexpr std::uint32_t kVersion = 1;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Flips v so that its largest-magnitude entry (first on ties) is positive.
void canonical_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best]) + 1e-12) best = i;
  }
  if (v[best] < 0.0) v = -v;
}

}  // namespace

const char* hasher_kind_name(HasherKind kind) {
  return kind == HasherKind::lsh ? "lsh" : "pcah";
}

LinearHasher lsh_train(std::size_t dim, std::size_t bits, Rng& rng) {
  if (dim == 0 || bits == 0) throw ConfigError("lsh needs dim >= 1 and K >= 1");
  LinearHasher h;
  h.kind = HasherKind::lsh;
  h.projection = Tensor({bits, dim});
  for (auto& v : h.projection.values()) v = rng.normal();
  h.mean = Tensor({dim});
  return h;
}

LinearHasher pcah_train(const Tensor& features, std::size_t bits) {
  if (features.rank() != 2) throw DimensionError("pcah expects an n x dim feature matrix");
  const std::size_t n = features.dim(0);
  const std::size_t dim = features.dim(1);
  if (bits == 0) throw ConfigError("pcah needs K >= 1");
  if (bits > dim) {
    throw ConfigError("pcah K=" + std::to_string(bits) + " exceeds feature dim " + std::to_string(dim));
  }
  if (n <= bits) {
    throw ConfigError("pcah needs more samples than bits (n=" + std::to_string(n) + ", K=" +
                      std::to_string(bits) + ")");
  }
  Eigen::Map<const RowMatrix> x(features.data(), static_cast<Eigen::Index>(n),
                                static_cast<Eigen::Index>(dim));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const RowMatrix centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ConfigError("pcah eigen-decomposition failed");

  LinearHasher h;
  h.kind = HasherKind::pcah;
  h.projection = Tensor({bits, dim});
  h.mean = Tensor({dim});
  for (std::size_t j = 0; j < dim; ++j) h.mean[j] = mean[static_cast<Eigen::Index>(j)];

  // Eigenvalues come out ascending.
  const Eigen::VectorXd& values = solver.eigenvalues();
  const double floor = std::max(values.maxCoeff(), 0.0) * 1e-12 * static_cast<double>(dim);
  for (std::size_t k = 0; k < bits; ++k) {
    const auto col = static_cast<Eigen::Index>(dim - 1 - k);
    if (!(values[col] > floor)) h.rank_deficient = true;
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    canonical_sign(v);
    for (std::size_t j = 0; j < dim; ++j) h.projection.at(k, j) = v[static_cast<Eigen::Index>(j)];
  }
  return h;
}

CodeDatabase linear_encode(const LinearHasher& hasher, const Tensor& features,
                           std::span<const std::int32_t> labels) {
  if (features.rank() != 2 || features.dim(1) != hasher.dim()) {
    throw DimensionError("features " + shape_string(features.shape()) +
                         " do not match hasher dim " + std::to_string(hasher.dim()));
  }
  const std::size_t n = features.dim(0);
  if (labels.size() != n) throw DimensionError("one label per feature row required");
  CodeDatabase db;
  db.bits = hasher.bits();
  db.labels.assign(labels.begin(), labels.end());
  db.codes.reserve(n);
  Tensor centered = features;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = centered.slice(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] -= hasher.mean[j];
  }
  const Tensor proj = matmul_nt(centered, hasher.projection);
  for (std::size_t i = 0; i < n; ++i) db.codes.push_back(BitCode::from_projections(proj.slice(i)));
  return db;
}

void save_hasher(const LinearHasher& hasher, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(hasher.kind));
  w.u8(hasher.rank_deficient ? 1 : 0);
  w.tensor(hasher.projection);
  w.tensor(hasher.mean);
  w.finish(path);
}

LinearHasher load_hasher(const std::filesystem::path& path) {
  detail::ByteReader r(path, kMagic);
  const auto version = r.u32();
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported hasher version " + std::to_string(version));
  }
  LinearHasher h;
  const auto kind = r.u8();
  if (kind > 1) throw FormatError(path.string() + ": unknown hasher kind at offset " + std::to_string(r.offset() - 1));
  h.kind = static_cast<HasherKind>(kind);
  h.rank_deficient = r.u8() != 0;
  h.projection = r.tensor();
  h.mean = r.tensor();
  r.expect_end();
  if (h.projection.rank() != 2 || h.mean.rank() != 1 || h.mean.dim(0) != h.projection.dim(1)) {
    throw FormatError(path.string() + ": inconsistent hasher shapes");
  }
  return h;
}

}  // namespace deephash
