#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qtag/keys.hpp"
#include "qtag/mac.hpp"
#include "qtag/rng.hpp"

namespace qtag {

// Simulated quantum key expansion: BB84 at the qubit-abstraction level.
// Ideal qubits, no loss, no detector noise; the only error source is
// intercept-resend eavesdropping.  Every classical message in the sifting
// and estimation phases carries an information-theoretic MAC keyed from the
// finite preshared authentication key.

enum class QkeStatus : std::uint8_t { Running, Completed, Aborted };

enum class QkeAbortCause : std::uint8_t {
  None,
  QberAboveThreshold,
  AuthenticationFailure,  // MAC mismatch on a classical message
  AuthKeyDepleted,
};

struct QkeParams {
  std::size_t n_raw = 1024;      // qubit-abstraction transmissions
  double qber_threshold = 0.11;  // abort above this measured error rate
  double f_est = 0.25;           // fraction of sifted bits sacrificed for estimation
  bool eavesdrop = false;        // intercept-resend on every position
};

struct QkeResult {
  QkeStatus status = QkeStatus::Running;
  QkeAbortCause cause = QkeAbortCause::None;
  BitVec alice_key;  // station-side output
  BitVec bob_key;    // tag-side output
  double qber = 0.0;
  std::size_t sifted_length = 0;
  std::size_t sample_size = 0;
  std::size_t auth_bits_consumed = 0;
  std::vector<std::pair<std::size_t, std::size_t>> auth_key_ranges;
};

// Test hook: mutate the named classical message in transit.  Index is the
// message sequence number (0 = bases, 1 = matches, 2 = sample indices,
// 3 = sample values).
using QkeTamperHook = std::function<void(std::size_t msg_index, std::vector<std::uint8_t>& payload)>;

namespace detail {

inline void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace detail

inline QkeResult qke_expand(const QkeParams& params, const BitVec& initial_auth_key,
                            Rng& rng, const QkeTamperHook& tamper = nullptr) {
  QkeResult res;
  // Both sides consume the preshared authentication key in lockstep: the
  // signer takes 128 bits per message and the verifier's recomputation uses
  // the same offsets, so signer and verifier taps are one shared discipline.
  KeyTap sign_tap(&initial_auth_key);
  KeyTap verify_tap(&initial_auth_key);

  std::size_t msg_index = 0;
  // Sends `payload` over the authenticated classical channel; returns false
  // on MAC mismatch (tampering) at the receiver.
  auto send_classical = [&](std::vector<std::uint8_t> payload) -> bool {
    MacTag tag = mac_sign(payload, sign_tap);
    if (tamper) tamper(msg_index, payload);
    ++msg_index;
    return mac_verify(payload, tag, verify_tap);
  };

  try {
    // Quantum phase.
    std::vector<std::uint8_t> alice_bits(params.n_raw), alice_bases(params.n_raw);
    std::vector<std::uint8_t> bob_bases(params.n_raw), bob_bits(params.n_raw);
    for (std::size_t i = 0; i < params.n_raw; ++i) {
      alice_bits[i] = static_cast<std::uint8_t>(rng.bit());
      alice_bases[i] = static_cast<std::uint8_t>(rng.bit());
      std::uint8_t carried_bit = alice_bits[i];
      std::uint8_t carried_basis = alice_bases[i];
      if (params.eavesdrop) {
        std::uint8_t eve_basis = static_cast<std::uint8_t>(rng.bit());
        std::uint8_t eve_bit =
            (eve_basis == carried_basis) ? carried_bit : static_cast<std::uint8_t>(rng.bit());
        carried_bit = eve_bit;      // resend in Eve's basis
        carried_basis = eve_basis;
      }
      bob_bases[i] = static_cast<std::uint8_t>(rng.bit());
      bob_bits[i] = (bob_bases[i] == carried_basis) ? carried_bit
                                                    : static_cast<std::uint8_t>(rng.bit());
    }

    // Sifting: bob announces bases, alice replies with matching positions.
    std::vector<std::uint8_t> bases_msg = bob_bases;
    if (!send_classical(bases_msg)) {
      res.status = QkeStatus::Aborted;
      res.cause = QkeAbortCause::AuthenticationFailure;
      return res;
    }
    std::vector<std::size_t> sifted;
    for (std::size_t i = 0; i < params.n_raw; ++i)
      if (alice_bases[i] == bases_msg[i]) sifted.push_back(i);
    res.sifted_length = sifted.size();

    std::vector<std::uint8_t> match_msg;
    for (std::size_t i : sifted) detail::append_u64(match_msg, i);
    if (!send_classical(match_msg)) {
      res.status = QkeStatus::Aborted;
      res.cause = QkeAbortCause::AuthenticationFailure;
      return res;
    }

    // Error estimation on a random sample fraction f_est of the sifted bits.
    std::size_t sample_n =
        static_cast<std::size_t>(static_cast<double>(sifted.size()) * params.f_est);
    std::vector<std::size_t> order(sifted.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<std::uint8_t> sampled(sifted.size(), 0);
    std::vector<std::uint8_t> sample_idx_msg, sample_val_msg;
    for (std::size_t s = 0; s < sample_n; ++s) {
      sampled[order[s]] = 1;
      detail::append_u64(sample_idx_msg, order[s]);
      sample_val_msg.push_back(alice_bits[sifted[order[s]]]);
    }
    if (!send_classical(sample_idx_msg) || !send_classical(sample_val_msg)) {
      res.status = QkeStatus::Aborted;
      res.cause = QkeAbortCause::AuthenticationFailure;
      return res;
    }
    res.sample_size = sample_n;
    std::size_t errors = 0;
    for (std::size_t s = 0; s < sample_n; ++s)
      if (bob_bits[sifted[order[s]]] != sample_val_msg[s]) ++errors;
    res.qber = sample_n ? static_cast<double>(errors) / static_cast<double>(sample_n) : 0.0;

    res.auth_bits_consumed = sign_tap.offset();
    res.auth_key_ranges = sign_tap.consumed_ranges();

    if (res.qber > params.qber_threshold) {
      res.status = QkeStatus::Aborted;
      res.cause = QkeAbortCause::QberAboveThreshold;
      return res;
    }

    // Unsampled sifted bits become new shared key, appended identically on
    // both sides (each side from its own record).
    for (std::size_t i = 0; i < sifted.size(); ++i) {
      if (sampled[i]) continue;
      res.alice_key.push_back(alice_bits[sifted[i]]);
      res.bob_key.push_back(bob_bits[sifted[i]]);
    }
    res.status = QkeStatus::Completed;
    return res;
  } catch (const KeyDepletionError&) {
    res.status = QkeStatus::Aborted;
    res.cause = QkeAbortCause::AuthKeyDepleted;
    res.auth_bits_consumed = sign_tap.offset();
    return res;
  }
}

}  // namespace qtag
