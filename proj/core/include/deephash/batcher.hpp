#pragma once

#include <cstddef>
#include <vector>

#include "deephash/rng.hpp"

namespace deephash {

/// Mini-batch sampler with random skipping: after each accepted sample the
/// cursor advances by 1 + U{0..skip_max}, wrapping modulo n. Indices already
/// in the current batch are stepped over, so every batch holds batch_size
/// distinct indices. skip_max = 0 yields contiguous sequential batches.
class RandomSkipBatcher {
 public:
  RandomSkipBatcher(std::size_t n, std::size_t batch_size, std::size_t skip_max, Rng rng);

  std::vector<std::size_t> next();

  std::size_t size() const { return n_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  std::size_t n_;
  std::size_t batch_size_;
  std::size_t skip_max_;
  std::size_t cursor_ = 0;
  Rng rng_;
  std::vector<std::size_t> stamp_;
  std::size_t generation_ = 0;
};

}  // namespace deephash
