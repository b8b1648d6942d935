#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace rm4d {

/// Packed bit array. Bit i lives in word i/64 at position i%64, which matches
/// a little-endian byte layout on disk (bit k of byte j is cell 8j + k).
/// set_atomic() guarantees no lost 0->1 transitions under concurrent marking.
class BitArray {
 public:
  BitArray() = default;
  explicit BitArray(std::uint64_t size)
      : size_(size), words_((size + 63) / 64, 0ULL) {}

  std::uint64_t size() const { return size_; }

  bool test(std::uint64_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1ULL;
  }

  /// Returns true iff the bit transitioned 0 -> 1.
  bool set(std::uint64_t i) {
    const std::uint64_t mask = 1ULL << (i & 63);
    const std::uint64_t old = words_[i >> 6];
    words_[i >> 6] = old | mask;
    return (old & mask) == 0;
  }

  /// Thread-safe variant of set().
  bool set_atomic(std::uint64_t i) {
    const std::uint64_t mask = 1ULL << (i & 63);
    std::atomic_ref<std::uint64_t> word(words_[i >> 6]);
    const std::uint64_t old = word.fetch_or(mask, std::memory_order_relaxed);
    return (old & mask) == 0;
  }

  std::uint64_t popcount() const {
    std::uint64_t n = 0;
    for (std::uint64_t w : words_) n += static_cast<std::uint64_t>(std::popcount(w));
    return n;
  }

  std::span<const std::uint64_t> words() const { return words_; }
  std::span<std::uint64_t> words() { return words_; }

  bool operator==(const BitArray&) const = default;

 private:
  std::uint64_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace rm4d
