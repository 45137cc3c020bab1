#include "deephash/bitcode.hpp"

#include <string>

#include "deephash/errors.hpp"

namespace deephash {

std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

BitCode::BitCode(std::vector<std::int8_t> bits) : bits_(std::move(bits)) {
  words_.assign(words_for_bits(bits_.size()), 0);
  for (std::size_t k = 0; k < bits_.size(); ++k) {
    if (bits_[k] == 1) {
      words_[k / 64] |= std::uint64_t{1} << (k % 64);
    } else if (bits_[k] != -1) {
      throw ConfigError("bit " + std::to_string(k) + " is neither -1 nor +1");
    }
  }
}

BitCode BitCode::from_projections(std::span<const double> projections) {
  std::vector<std::int8_t> bits(projections.size());
  for (std::size_t k = 0; k < projections.size(); ++k)
    bits[k] = static_cast<std::int8_t>(sign_bit(projections[k]));
  return BitCode(std::move(bits));
}

BitCode BitCode::from_words(std::size_t bits, std::vector<std::uint64_t> words) {
  if (words.size() != words_for_bits(bits)) {
    throw FormatError("packed code has " + std::to_string(words.size()) + " words for " +
                      std::to_string(bits) + " bits");
  }
  if (bits % 64 != 0 && !words.empty() && (words.back() >> (bits % 64)) != 0) {
    throw FormatError("packed code has bits set beyond its length");
  }
  std::vector<std::int8_t> signs(bits);
  for (std::size_t k = 0; k < bits; ++k)
    signs[k] = (words[k / 64] >> (k % 64)) & 1 ? 1 : -1;
  BitCode code;
  code.bits_ = std::move(signs);
  code.words_ = std::move(words);
  return code;
}

int BitCode::bit(std::size_t k) const {
  if (k >= bits_.size()) {
    throw BoundsError("bit index " + std::to_string(k) + " out of range for " +
                      std::to_string(bits_.size()) + "-bit code");
  }
  return bits_[k];
}

BitCode BitCode::complement() const {
  std::vector<std::int8_t> bits(bits_);
  for (auto& b : bits) b = static_cast<std::int8_t>(-b);
  return BitCode(std::move(bits));
}

BitCode BitCode::with_flipped(std::size_t k) const {
  std::vector<std::int8_t> bits(bits_);
  bits.at(k) = static_cast<std::int8_t>(-bits[k]);
  return BitCode(std::move(bits));
}

}  // namespace deephash
