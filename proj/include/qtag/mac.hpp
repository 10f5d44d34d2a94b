#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qtag/keys.hpp"

namespace qtag {

struct KeyDepletionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Consuming reader over a shared key bit string.  Tracks the offsets it has
// handed out so a ledger audit can confirm no bit is ever used twice.
class KeyTap {
 public:
  explicit KeyTap(const BitVec* bits) : bits_(bits) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bits_->size() - offset_; }

  // Returns (value packed MSB-first into uint64 words, starting offset).
  std::pair<std::vector<std::uint64_t>, std::size_t> take_words(std::size_t n_words) {
    if (remaining() < 64 * n_words)
      throw KeyDepletionError("shared key depleted: need " + std::to_string(64 * n_words) +
                              " bits, have " + std::to_string(remaining()));
    std::size_t start = offset_;
    std::vector<std::uint64_t> words(n_words, 0);
    for (std::size_t w = 0; w < n_words; ++w)
      for (int i = 0; i < 64; ++i)
        words[w] = (words[w] << 1) | (*bits_)[offset_++];
    ranges_.emplace_back(start, offset_);
    return {std::move(words), start};
  }

  const std::vector<std::pair<std::size_t, std::size_t>>& consumed_ranges() const {
    return ranges_;
  }

 private:
  const BitVec* bits_;
  std::size_t offset_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;
};

namespace gf64 {

// Carry-less multiplication in GF(2^64), reduction polynomial
// x^64 + x^4 + x^3 + x + 1.
inline std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t hi = 0, lo = 0;
  for (int i = 0; i < 64; ++i) {
    if ((b >> i) & 1) {
      lo ^= a << i;
      if (i) hi ^= a >> (64 - i);
    }
  }
  // Reduce the high word: x^64 == x^4 + x^3 + x + 1.
  std::uint64_t spill = (hi >> 60) ^ (hi >> 61) ^ (hi >> 63);
  lo ^= (hi << 4) ^ (hi << 3) ^ (hi << 1) ^ hi;
  lo ^= (spill << 4) ^ (spill << 3) ^ (spill << 1) ^ spill;
  return lo;
}

}  // namespace gf64

struct MacTag {
  std::uint64_t value = 0;
  std::size_t key_offset = 0;  // index into the shared key of the 128 bits consumed

  bool operator==(const MacTag&) const = default;
};

// Message bytes packed into 64-bit blocks, zero-padded, with a trailing
// length block so distinct-length messages never collide.
inline std::vector<std::uint64_t> mac_blocks(std::span<const std::uint8_t> message) {
  std::vector<std::uint64_t> blocks;
  blocks.reserve(message.size() / 8 + 2);
  for (std::size_t i = 0; i < message.size(); i += 8) {
    std::uint64_t w = 0;
    for (std::size_t j = 0; j < 8 && i + j < message.size(); ++j)
      w |= static_cast<std::uint64_t>(message[i + j]) << (8 * j);
    blocks.push_back(w);
  }
  blocks.push_back(static_cast<std::uint64_t>(message.size()));
  return blocks;
}

// Polynomial evaluation of the message blocks at the multiplier key, XORed
// with a one-time pad.  Consumes 128 fresh key bits (64 multiplier + 64 pad);
// forgery probability for an L-block message is at most L / 2^64.
inline MacTag mac_sign(std::span<const std::uint8_t> message, KeyTap& tap) {
  auto [words, offset] = tap.take_words(2);
  std::uint64_t r = words[0], pad = words[1];
  std::uint64_t h = 0;
  for (std::uint64_t blk : mac_blocks(message)) h = gf64::mul(h ^ blk, r);
  return MacTag{h ^ pad, offset};
}

// Verifier-side recomputation with an independent tap over the same key.
inline bool mac_verify(std::span<const std::uint8_t> message, const MacTag& tag, KeyTap& tap) {
  return mac_sign(message, tap) == tag;
}

}  // namespace qtag
