#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace deephash {

/// One unordered pair inside a mini-batch. `first` and `second` are positions
/// within the batch (first < second); `y` is the supervision value.
struct SupervisedPair {
  std::size_t first;
  std::size_t second;
  int y;

  friend bool operator==(const SupervisedPair&, const SupervisedPair&) = default;
};

/// Pairwise supervision derived lazily from class labels: +1 for equal known
/// labels, -1 for differing known labels, 0 when either label is unknown.
/// The n x n matrix is never materialised.
class SimilarityOracle {
 public:
  explicit SimilarityOracle(std::vector<std::int32_t> labels);

  std::size_t size() const { return labels_.size(); }
  std::span<const std::int32_t> labels() const { return labels_; }

  int y_of(std::size_t i, std::size_t j) const;

  /// All |batch|(|batch|-1)/2 unordered pairs of `batch` (dataset indices).
  std::vector<SupervisedPair> batch_pairs(std::span<const std::size_t> batch) const;

 private:
  std::vector<std::int32_t> labels_;
};

}  // namespace deephash
