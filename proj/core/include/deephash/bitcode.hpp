#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace deephash {

/// Hash bit for a real-valued projection; sign(0) is +1.
constexpr int sign_bit(double value) { return value >= 0.0 ? 1 : -1; }

/// A K-bit signature in {-1,+1}^K with a packed mirror (bit set <=> +1),
/// least significant bit first within each 64-bit word. Unused high bits of
/// the final word are always zero.
class BitCode {
 public:
  BitCode() = default;
  /// Every entry must be -1 or +1.
  explicit BitCode(std::vector<std::int8_t> bits);

  /// Bit k is sign(projections[k]).
  static BitCode from_projections(std::span<const double> projections);
  static BitCode from_words(std::size_t bits, std::vector<std::uint64_t> words);

  std::size_t size() const { return bits_.size(); }
  int bit(std::size_t k) const;
  std::span<const std::int8_t> bits() const { return bits_; }
  std::span<const std::uint64_t> words() const { return words_; }

  BitCode complement() const;
  BitCode with_flipped(std::size_t k) const;

  friend bool operator==(const BitCode&, const BitCode&) = default;

 private:
  std::vector<std::int8_t> bits_;
  std::vector<std::uint64_t> words_;
};

std::size_t words_for_bits(std::size_t bits);

}  // namespace deephash
