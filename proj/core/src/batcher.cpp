#include "deephash/batcher.hpp"

#include <string>

#include "deephash/errors.hpp"

namespace deephash {

RandomSkipBatcher::RandomSkipBatcher(std::size_t n, std::size_t batch_size, std::size_t skip_max,
                                     Rng rng)
    : n_(n), batch_size_(batch_size), skip_max_(skip_max), rng_(std::move(rng)), stamp_(n, 0) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (batch_size > n) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(n));
  }
}

std::vector<std::size_t> RandomSkipBatcher::next() {
  ++generation_;
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  while (batch.size() < batch_size_) {
    while (stamp_[cursor_] == generation_) cursor_ = (cursor_ + 1) % n_;
    stamp_[cursor_] = generation_;
    batch.push_back(cursor_);
    const std::size_t skip = skip_max_ == 0 ? 0 : rng_.uniform_int(0, skip_max_);
    cursor_ = (cursor_ + 1 + skip) % n_;
  }
  return batch;
}

}  // namespace deephash
