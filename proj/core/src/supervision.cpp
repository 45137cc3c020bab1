#include "deephash/supervision.hpp"

#include <string>
#include <unordered_set>

#include "deephash/dataio.hpp"
#include "deephash/errors.hpp"

namespace deephash {

SimilarityOracle::SimilarityOracle(std::vector<std::int32_t> labels) : labels_(std::move(labels)) {}

int SimilarityOracle::y_of(std::size_t i, std::size_t j) const {
  if (i >= labels_.size() || j >= labels_.size()) {
    throw BoundsError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") out of range for " + std::to_string(labels_.size()) + " samples");
  }
  const auto a = labels_[i];
  const auto b = labels_[j];
  if (a == kUnknownLabel || b == kUnknownLabel) return 0;
  return a == b ? 1 : -1;
}

std::vector<SupervisedPair> SimilarityOracle::batch_pairs(std::span<const std::size_t> batch) const {
  std::unordered_set<std::size_t> seen;
  for (auto idx : batch) {
    if (idx >= labels_.size()) {
      throw BoundsError("batch index " + std::to_string(idx) + " out of range");
    }
    if (!seen.insert(idx).second) {
      throw ConfigError("duplicate index " + std::to_string(idx) + " in batch");
    }
  }
  std::vector<SupervisedPair> pairs;
  pairs.reserve(batch.size() * (batch.size() - (batch.empty() ? 0 : 1)) / 2);
  for (std::size_t a = 0; a < batch.size(); ++a)
    for (std::size_t b = a + 1; b < batch.size(); ++b)
      pairs.push_back({a, b, y_of(batch[a], batch[b])});
  return pairs;
}

}  // namespace deephash
