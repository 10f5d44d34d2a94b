#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qtag {

using BitVec = std::vector<std::uint8_t>;  // one bit per element, value 0 or 1

inline std::string bits_to_hex(const BitVec& bits) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve((bits.size() + 3) / 4);
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    int nibble = 0;
    for (std::size_t j = 0; j < 4 && i + j < bits.size(); ++j)
      nibble |= (bits[i + j] & 1) << (3 - j);
    out.push_back(digits[nibble]);
  }
  return out;
}

inline BitVec bits_from_hex(const std::string& hex) {
  BitVec bits;
  bits.reserve(hex.size() * 4);
  for (char ch : hex) {
    int nibble;
    if (ch >= '0' && ch <= '9') nibble = ch - '0';
    else if (ch >= 'a' && ch <= 'f') nibble = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') nibble = ch - 'A' + 10;
    else throw std::invalid_argument(std::string("bad hex digit: ") + ch);
    for (int j = 3; j >= 0; --j) bits.push_back((nibble >> j) & 1);
  }
  return bits;
}

// k_{4i + 2a + b}: which key bit round i releases for challenge pair (a, b).
inline std::size_t key_index(std::size_t round, int a, int b) {
  return 4 * round + 2 * static_cast<std::size_t>(a) + static_cast<std::size_t>(b);
}

enum class ReleaseStatus : std::uint8_t {
  Ok,        // bit emitted (first release or idempotent re-query)
  Refused,   // conflicting index; round/block is now permanently burned
  Depleted,  // not enough key material; QKE must run
};

struct ReleaseResult {
  ReleaseStatus status = ReleaseStatus::Depleted;
  int bit = 0;
};

// The shared secret bit string with per-round release discipline: each round i
// owns the four bits k_{4i}..k_{4i+3} and emits at most one of them, ever.
class KeyStore {
 public:
  KeyStore() = default;
  explicit KeyStore(BitVec bits) : bits_(std::move(bits)) {}

  void append(const BitVec& more) { bits_.insert(bits_.end(), more.begin(), more.end()); }
  std::size_t size_bits() const { return bits_.size(); }
  std::size_t rounds_available() const { return bits_.size() / 4; }

  enum class RoundState : std::uint8_t { Unreleased, Released, Burned };

  RoundState round_state(std::size_t round) const {
    auto it = states_.find(round);
    return it == states_.end() ? RoundState::Unreleased : it->second.state;
  }

  ReleaseResult release_round_bit(std::size_t round, int a, int b) {
    std::size_t idx = key_index(round, a, b);
    auto it = states_.find(round);
    if (it != states_.end()) {
      if (it->second.state == RoundState::Burned) return {ReleaseStatus::Refused, 0};
      if (it->second.released_index != 2 * a + b) {
        // Conflicting re-request: the correct bit is never released hereafter.
        it->second.state = RoundState::Burned;
        return {ReleaseStatus::Refused, 0};
      }
      return {ReleaseStatus::Ok, bits_[idx]};  // idempotent re-query
    }
    if (idx >= bits_.size()) return {ReleaseStatus::Depleted, 0};
    states_[round] = {RoundState::Released, 2 * a + b};
    return {ReleaseStatus::Ok, bits_[idx]};
  }

  // Fail-safe burn (e.g. unpaired challenge, round-counter mismatch).
  void burn_round(std::size_t round) { states_[round].state = RoundState::Burned; }

  int peek_bit(std::size_t idx) const { return bits_.at(idx); }

 private:
  struct State {
    RoundState state = RoundState::Unreleased;
    int released_index = -1;  // 2a + b of the first release
  };
  BitVec bits_;
  std::unordered_map<std::size_t, State> states_;
};

// The 3D scheme's key layout: four sub-keys k_0..k_3, one per station, each
// partitioned into consecutive length-2 blocks with a one-of-two release
// discipline per block.
class BlockKeySet {
 public:
  BlockKeySet() = default;
  explicit BlockKeySet(std::array<BitVec, 4> subkeys) : subkeys_(std::move(subkeys)) {}

  // Round-robin assignment of fresh key bits to k_0..k_3.
  static BlockKeySet from_flat(const BitVec& bits) {
    std::array<BitVec, 4> subs;
    for (std::size_t i = 0; i < bits.size(); ++i) subs[i % 4].push_back(bits[i]);
    return BlockKeySet(std::move(subs));
  }

  std::size_t blocks_available(int station) const { return subkeys_[station].size() / 2; }

  ReleaseResult release_block_bit(int station, std::size_t block, int which) {
    auto& st = states_[station];
    std::size_t idx = 2 * block + static_cast<std::size_t>(which);
    auto it = st.find(block);
    if (it != st.end()) {
      if (it->second < 0) return {ReleaseStatus::Refused, 0};  // burned
      if (it->second != which) {
        it->second = -1;
        return {ReleaseStatus::Refused, 0};
      }
      return {ReleaseStatus::Ok, subkeys_[station][idx]};
    }
    if (idx >= subkeys_[station].size()) return {ReleaseStatus::Depleted, 0};
    st[block] = which;
    return {ReleaseStatus::Ok, subkeys_[station][idx]};
  }

  int peek_bit(int station, std::size_t block, int which) const {
    return subkeys_[station].at(2 * block + static_cast<std::size_t>(which));
  }

 private:
  std::array<BitVec, 4> subkeys_;
  // per station: block -> released which (0/1), or -1 for burned
  std::array<std::unordered_map<std::size_t, int>, 4> states_;
};

}  // namespace qtag
