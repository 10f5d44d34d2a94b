#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "qtag/mac.hpp"
#include "qtag/rng.hpp"

using namespace qtag;

namespace {

BitVec random_bits(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  BitVec v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(rng.bit());
  return v;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) {
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

}  // namespace

TEST_CASE("gf(2^64) multiplication is a field operation") {
  // identity, commutativity, associativity, distributivity over xor
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    std::uint64_t a = rng(), b = rng(), c = rng();
    CHECK(gf64::mul(a, 1) == a);
    CHECK(gf64::mul(a, 0) == 0);
    CHECK(gf64::mul(a, b) == gf64::mul(b, a));
    CHECK(gf64::mul(gf64::mul(a, b), c) == gf64::mul(a, gf64::mul(b, c)));
    CHECK(gf64::mul(a, b ^ c) == (gf64::mul(a, b) ^ gf64::mul(a, c)));
  }
  // x * x^63 wraps around: x^64 = x^4 + x^3 + x + 1
  CHECK(gf64::mul(2, 1ULL << 63) == 0b11011);
}

TEST_CASE("gf(2^64) against a bit-at-a-time oracle") {
  // Oracle: schoolbook shift-and-reduce, one modular doubling per bit.
  auto oracle = [](std::uint64_t a, std::uint64_t b) {
    std::uint64_t acc = 0;
    for (int i = 63; i >= 0; --i) {
      bool carry = acc >> 63;
      acc <<= 1;
      if (carry) acc ^= 0b11011;  // x^4 + x^3 + x + 1
      if ((b >> i) & 1) acc ^= a;
    }
    return acc;
  };
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5000; ++i) {
    std::uint64_t a = rng(), b = rng();
    CHECK(gf64::mul(a, b) == oracle(a, b));
  }
}

TEST_CASE("key tap packing and depletion") {
  BitVec bits = random_bits(192, 1);
  KeyTap tap(&bits);
  auto [words, off] = tap.take_words(2);
  CHECK(off == 0);
  REQUIRE(words.size() == 2);
  for (int w = 0; w < 2; ++w)
    for (int i = 0; i < 64; ++i)
      CHECK(((words[w] >> (63 - i)) & 1) == bits[64 * w + i]);
  CHECK(tap.offset() == 128);
  CHECK(tap.remaining() == 64);
  CHECK_THROWS_AS(tap.take_words(2), KeyDepletionError);
  // failed take must not consume
  CHECK(tap.offset() == 128);
  auto [w2, off2] = tap.take_words(1);
  CHECK(off2 == 128);
}

TEST_CASE("mac sign/verify round trip and key consumption") {
  BitVec key = random_bits(1024, 2);
  KeyTap signer(&key), verifier(&key);
  auto msg = bytes_of("challenge round 3 bit 1");
  MacTag tag = mac_sign(msg, signer);
  CHECK(tag.key_offset == 0);
  CHECK(mac_verify(msg, tag, verifier));

  auto msg2 = bytes_of("x");
  MacTag tag2 = mac_sign(msg2, signer);
  CHECK(tag2.key_offset == 128);  // fresh 128 bits per message
  CHECK(mac_verify(msg2, tag2, verifier));

  // tampered message fails under the matching key slice
  KeyTap v2(&key);
  auto bad = msg;
  bad[0] ^= 0x20;
  CHECK_FALSE(mac_verify(bad, tag, v2));
}

TEST_CASE("empty message tag is the pad") {
  BitVec key = random_bits(128, 9);
  KeyTap tap(&key);
  MacTag tag = mac_sign({}, tap);
  std::uint64_t pad = 0;
  for (int i = 64; i < 128; ++i) pad = (pad << 1) | key[i];
  // single zero-length block hashes to zero, leaving only the pad
  CHECK(tag.value == pad);
}

TEST_CASE("length extension blocked by the length block") {
  BitVec key = random_bits(128, 11);
  std::vector<std::uint8_t> a{0x41, 0x00};
  std::vector<std::uint8_t> b{0x41};  // prefix with trailing zero stripped
  KeyTap t1(&key), t2(&key);
  CHECK(mac_sign(a, t1).value != mac_sign(b, t2).value);
}

TEST_CASE("forgery resistance under random tampering") {
  // 10^4 random single-position tampers; information-theoretic bound for
  // these short messages is ~L/2^64, so zero successes is the only sane
  // outcome.
  std::mt19937_64 rng(13);
  BitVec key = random_bits(256, 21);
  int forgeries = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<std::uint8_t> msg(1 + rng() % 40);
    for (auto& c : msg) c = static_cast<std::uint8_t>(rng());
    KeyTap s(&key);
    MacTag tag = mac_sign(msg, s);
    auto forged = msg;
    forged[rng() % forged.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    KeyTap v(&key);
    if (mac_verify(forged, tag, v)) ++forgeries;
  }
  CHECK(forgeries == 0);
}

TEST_CASE("consumed ranges are disjoint and ordered") {
  BitVec key = random_bits(2048, 31);
  KeyTap tap(&key);
  std::mt19937_64 rng(41);
  for (int i = 0; i < 8; ++i) {
    std::vector<std::uint8_t> msg(rng() % 16);
    for (auto& c : msg) c = static_cast<std::uint8_t>(rng());
    (void)mac_sign(msg, tap);
  }
  const auto& ranges = tap.consumed_ranges();
  REQUIRE(ranges.size() == 8);
  std::size_t prev_end = 0;
  for (auto [lo, hi] : ranges) {
    CHECK(lo == prev_end);
    CHECK(hi - lo == 128);
    prev_end = hi;
  }
}
