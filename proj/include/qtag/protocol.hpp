#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "qtag/engine.hpp"
#include "qtag/keys.hpp"
#include "qtag/mac.hpp"
#include "qtag/rng.hpp"
#include "qtag/spacetime.hpp"
#include "qtag/time.hpp"

namespace qtag {

enum class Mode : std::uint8_t { OneDim, ThreeDim };

struct ProtocolConfig {
  int rounds = 1;              // N, security parameter
  double round_period = 1.0;   // tau, time-units between challenge arrivals at t_+
  double timing_tolerance = 0.0;  // epsilon, time-units (0 in noiseless runs)
  bool authenticate_messages = false;
  Mode mode = Mode::OneDim;

  Ticks tau_ticks() const { return ticks_from_units(round_period); }
  Ticks epsilon_ticks() const { return ticks_from_units(timing_tolerance); }
  // Delta_t = N * tau, by construction.
  Ticks delta_t_ticks() const { return static_cast<Ticks>(rounds) * tau_ticks(); }
  Ticks pair_wait_ticks() const { return tau_ticks() / 2; }
};

enum class FailCause : std::uint8_t { None, WrongBit, Late, Early, Missing, MacFail };

inline const char* fail_cause_name(FailCause c) {
  switch (c) {
    case FailCause::None: return "none";
    case FailCause::WrongBit: return "wrong_bit";
    case FailCause::Late: return "late";
    case FailCause::Early: return "early";
    case FailCause::Missing: return "missing";
    case FailCause::MacFail: return "mac_fail";
  }
  return "?";
}

struct StationVerdict {
  bool bit_correct = false;
  Ticks arrival_error = 0;  // signed, observed - expected
  bool on_time = false;
  FailCause cause = FailCause::Missing;
};

struct RoundVerdict {
  int round = -1;
  std::vector<StationVerdict> stations;
  bool pass = false;
};

struct AuthDecision {
  bool authenticated = false;
  int rounds_completed = 0;
  std::optional<std::pair<int, FailCause>> first_failure;
};

// The N-round decision: authenticated iff the first N verdicts all pass.
// The per-station arrival-span check (responses fit within Delta_t) is done
// by the caller that holds the arrival times; this function is the pure
// conjunction over verdicts.
inline AuthDecision decide(const std::vector<RoundVerdict>& verdicts, const ProtocolConfig& cfg) {
  AuthDecision d;
  for (int i = 0; i < cfg.rounds; ++i) {
    if (i >= static_cast<int>(verdicts.size())) {
      d.first_failure = {i, FailCause::Missing};
      return d;
    }
    const RoundVerdict& v = verdicts[i];
    if (!v.pass) {
      FailCause cause = FailCause::Missing;
      for (const StationVerdict& s : v.stations)
        if (s.cause != FailCause::None) {
          cause = s.cause;
          break;
        }
      d.first_failure = {i, cause};
      d.rounds_completed = i;
      return d;
    }
    ++d.rounds_completed;
  }
  d.authenticated = true;
  return d;
}

// Per-round challenge plan for the 1D scheme: bits drawn uniformly, send
// times chosen so both challenges arrive at t_+ at exactly T_i = T_0 + i*tau.
struct RoundPlan {
  Ticks arrival_at_tag = 0;          // T_i
  std::array<Ticks, 2> send_time{};  // per station
  int a = 0, b = 0;
};

inline Ticks default_start_time(const Geometry& geom) {
  Ticks max_delay = 0;
  for (const Vec& s : geom.stations)
    max_delay = std::max(max_delay, geom.propagation_delay(s, geom.tag));
  return max_delay + ticks_per_unit;
}

inline std::vector<RoundPlan> schedule_challenges_1d(const Geometry& geom,
                                                     const ProtocolConfig& cfg, Rng& rng,
                                                     std::optional<Ticks> start_time = {}) {
  Ticks t0 = start_time.value_or(default_start_time(geom));
  std::array<Ticks, 2> delay{geom.propagation_delay(geom.stations[0], geom.tag),
                             geom.propagation_delay(geom.stations[1], geom.tag)};
  std::vector<RoundPlan> plan(cfg.rounds);
  for (int i = 0; i < cfg.rounds; ++i) {
    plan[i].arrival_at_tag = t0 + static_cast<Ticks>(i) * cfg.tau_ticks();
    plan[i].send_time = {plan[i].arrival_at_tag - delay[0], plan[i].arrival_at_tag - delay[1]};
    plan[i].a = rng.bit();
    plan[i].b = rng.bit();
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Message authentication option: each protocol message gets a fixed 128-bit
// slot in a dedicated MAC key region, so signer and verifier agree on offsets
// without negotiation and no slot is ever reused.
// ---------------------------------------------------------------------------

inline std::size_t mac_slot_1d(int round, MsgKind kind, int role_or_station) {
  std::size_t base = static_cast<std::size_t>(round) * 4;
  if (kind == MsgKind::Challenge) return base + static_cast<std::size_t>(role_or_station);
  return base + 2 + static_cast<std::size_t>(role_or_station);
}

inline std::vector<std::uint8_t> mac_payload(const Message& m) {
  return {static_cast<std::uint8_t>(m.kind),
          static_cast<std::uint8_t>(m.round & 0xff),
          static_cast<std::uint8_t>((m.round >> 8) & 0xff),
          static_cast<std::uint8_t>(m.bit),
          static_cast<std::uint8_t>(m.role),
          static_cast<std::uint8_t>(m.station + 1),
          static_cast<std::uint8_t>(m.which)};
}

class MacSlots {
 public:
  MacSlots() = default;
  explicit MacSlots(const BitVec* bits) : bits_(bits) {}

  bool enabled() const { return bits_ != nullptr; }

  MacTag sign(const Message& m, std::size_t slot) const {
    auto [r, pad, offset] = slot_keys(slot);
    std::uint64_t h = 0;
    for (std::uint64_t blk : mac_blocks(mac_payload(m))) h = gf64::mul(h ^ blk, r);
    return MacTag{h ^ pad, offset};
  }

  bool verify(const Message& m, std::size_t slot) const {
    return m.mac && *m.mac == sign(m, slot);
  }

 private:
  std::tuple<std::uint64_t, std::uint64_t, std::size_t> slot_keys(std::size_t slot) const {
    std::size_t offset = slot * 128;
    if (!bits_ || offset + 128 > bits_->size())
      throw KeyDepletionError("MAC key region depleted at slot " + std::to_string(slot));
    std::uint64_t r = 0, pad = 0;
    for (int i = 0; i < 64; ++i) r = (r << 1) | (*bits_)[offset + i];
    for (int i = 0; i < 64; ++i) pad = (pad << 1) | (*bits_)[offset + 64 + i];
    return {r, pad, offset};
  }
  const BitVec* bits_ = nullptr;
};

// ---------------------------------------------------------------------------
// Actors
// ---------------------------------------------------------------------------

// The tag's 1D state machine.  Challenges are paired only when their arrival
// ticks are exactly equal; a lone challenge waits tau/2 for its partner and
// then fails safe (round burned, no response).  The tag has no clock on the
// protocol path: it matches the carried round index against its own
// arrival-pair counter and burns on mismatch.
class TagActor1D : public Actor {
 public:
  TagActor1D(KeyStore* store, const Geometry* geom, const ProtocolConfig* cfg, bool switched_on,
             Vec actual_position)
      : store_(store), geom_(geom), cfg_(cfg), on_(switched_on), pos_(actual_position) {}

  void set_mac_slots(const MacSlots* slots) { mac_ = slots; }

  bool depletion_flagged() const { return depletion_; }
  bool any_burn() const { return any_burn_; }
  bool wrong_index_release() const { return wrong_index_; }

  // Ground truth for wrong-index detection: the honest (a_i, b_i) pairs.
  void set_expected_pairs(const std::vector<RoundPlan>* plan) { plan_ = plan; }

  void on_deliver(Engine& eng, const Message& msg, Ticks now) override {
    if (!on_) {
      // Switched off: a pure pass-through.  Signals continue in the same
      // direction at light speed; no processing happens inside.
      pass_through(eng, msg, now);
      return;
    }
    if (msg.kind != MsgKind::Challenge) return;
    if (mac_ && mac_->enabled() &&
        !mac_->verify(msg, mac_slot_1d(msg.round, MsgKind::Challenge, msg.role))) {
      // Unauthenticated input is discarded without touching round state, so
      // fake inputs cannot burn key material.
      eng.note({{"k", "tag_drop_unauthenticated"}, {"t", now}, {"round", msg.round}});
      return;
    }
    handle_challenge(eng, msg, now);
  }

  void on_wake(Engine& eng, std::int64_t round, Ticks now) override {
    auto it = pending_.find(static_cast<int>(round));
    if (it == pending_.end()) return;  // partner arrived in time
    // Half-delivered round: fail safe.
    pending_.erase(it);
    burn(eng, static_cast<int>(round), now, "unpaired_challenge");
    if (static_cast<int>(round) == counter_) ++counter_;
  }

 private:
  struct Pending {
    int role;
    int bit;
    Ticks at;
  };
  struct Done {
    int a, b;
  };

  void pass_through(Engine& eng, const Message& msg, Ticks now) {
    // 1D: continue toward the far end, away from the sender.
    const Vec& s0 = geom_->stations[0];
    const Vec& s1 = geom_->stations[1];
    bool from_left = msg.kind == MsgKind::Challenge ? msg.role == 0 : msg.station == 0;
    Message fwd = msg;
    eng.schedule_send(kTagActor, fwd, pos_, now, from_left ? s1 : s0);
  }

  void handle_challenge(Engine& eng, const Message& msg, Ticks now) {
    int round = msg.round;
    if (auto done = done_.find(round); done != done_.end()) {
      int prior = msg.role == 0 ? done->second.a : done->second.b;
      if (msg.bit == prior) {
        // Retransmission fragment of an already-answered round; if both
        // halves are re-delivered the pair path below re-emits idempotently.
        auto p = pending_.find(round);
        if (p != pending_.end() && p->second.at == now && p->second.role != msg.role) {
          pending_.erase(p);
          respond(eng, round, done->second.a, done->second.b, now);
        } else if (p == pending_.end()) {
          pending_[round] = {msg.role, msg.bit, now};
          eng.schedule_wake(kTagActor, now + cfg_->pair_wait_ticks(), round);
        }
        return;
      }
      // Conflicting content for a completed round.
      burn(eng, round, now, "conflicting_requery");
      return;
    }
    if (round < counter_) {
      // Stale round index vs. the arrival-pair counter.
      burn(eng, round, now, "stale_round_index");
      return;
    }
    auto p = pending_.find(round);
    if (p == pending_.end()) {
      pending_[round] = {msg.role, msg.bit, now};
      eng.schedule_wake(kTagActor, now + cfg_->pair_wait_ticks(), round);
      return;
    }
    if (p->second.at != now || p->second.role == msg.role) {
      // Not an exactly-simultaneous (a, b) pair.
      pending_.erase(p);
      burn(eng, round, now, "non_simultaneous_pair");
      if (round == counter_) ++counter_;
      return;
    }
    int a = msg.role == 0 ? msg.bit : p->second.bit;
    int b = msg.role == 1 ? msg.bit : p->second.bit;
    pending_.erase(p);
    if (round != counter_) {
      burn(eng, round, now, "round_counter_mismatch");
      return;
    }
    ++counter_;
    done_[round] = {a, b};
    if (plan_ && round < static_cast<int>(plan_->size()) &&
        ((*plan_)[round].a != a || (*plan_)[round].b != b))
      wrong_index_ = true;
    respond(eng, round, a, b, now);
  }

  void respond(Engine& eng, int round, int a, int b, Ticks now) {
    ReleaseResult r = store_->release_round_bit(static_cast<std::size_t>(round), a, b);
    if (r.status == ReleaseStatus::Depleted) {
      depletion_ = true;
      eng.note({{"k", "key_depletion"}, {"t", now}, {"round", round}});
      return;
    }
    if (r.status == ReleaseStatus::Refused) {
      any_burn_ = true;
      eng.note({{"k", "release_refused"}, {"t", now}, {"round", round}});
      return;
    }
    eng.note({{"k", "release"},
              {"t", now},
              {"round", round},
              {"index", key_index(static_cast<std::size_t>(round), a, b)},
              {"bit", r.bit}});
    for (int s = 0; s < 2; ++s) {
      Message out;
      out.kind = MsgKind::Response;
      out.round = round;
      out.bit = static_cast<std::int8_t>(r.bit);
      out.station = static_cast<std::int8_t>(s);
      if (mac_ && mac_->enabled()) out.mac = mac_->sign(out, mac_slot_1d(round, MsgKind::Response, s));
      eng.schedule_send(kTagActor, out, pos_, now, geom_->stations[s]);
    }
  }

  void burn(Engine& eng, int round, Ticks now, const char* why) {
    store_->burn_round(static_cast<std::size_t>(round));
    any_burn_ = true;
    eng.note({{"k", "burn"}, {"t", now}, {"round", round}, {"why", why}});
  }

  KeyStore* store_;
  const Geometry* geom_;
  const ProtocolConfig* cfg_;
  bool on_;
  Vec pos_;
  const MacSlots* mac_ = nullptr;
  const std::vector<RoundPlan>* plan_ = nullptr;
  int counter_ = 0;
  std::map<int, Pending> pending_;
  std::map<int, Done> done_;
  bool depletion_ = false;
  bool any_burn_ = false;
  bool wrong_index_ = false;
};

// A verifier-side station: records response arrivals and forwards them to a
// driver callback for online verdict evaluation.
class StationActor : public Actor {
 public:
  struct Arrival {
    int bit;
    Ticks at;
    bool mac_ok;
  };

  StationActor(int id) : id_(id) {}

  void set_mac_slots(const MacSlots* slots) { mac_ = slots; }
  void set_callback(std::function<void(int station, const Message&, Ticks)> cb) {
    callback_ = std::move(cb);
  }

  void on_deliver(Engine& /*eng*/, const Message& msg, Ticks now) override {
    if (msg.kind != MsgKind::Response && msg.kind != MsgKind::BlockResponse) return;
    bool mac_ok = true;
    if (mac_ && mac_->enabled())
      mac_ok = mac_->verify(msg, mac_slot_1d(msg.round, MsgKind::Response, id_));
    arrivals_[msg.round].push_back({msg.bit, now, mac_ok});
    if (callback_) callback_(id_, msg, now);
  }

  const std::vector<Arrival>& arrivals_for(int round) const {
    static const std::vector<Arrival> empty;
    auto it = arrivals_.find(round);
    return it == arrivals_.end() ? empty : it->second;
  }

 private:
  int id_;
  const MacSlots* mac_ = nullptr;
  std::function<void(int, const Message&, Ticks)> callback_;
  std::map<int, std::vector<Arrival>> arrivals_;
};

// Verdict for one station's view of one round, from its recorded arrivals.
inline StationVerdict verify_station_round(const std::vector<StationActor::Arrival>& raw,
                                           int expected_bit, Ticks expected_arrival,
                                           Ticks epsilon) {
  StationVerdict v;
  // Identical duplicates are retransmissions and collapse to one arrival.
  std::vector<StationActor::Arrival> arrivals;
  for (const auto& a : raw) {
    bool dup = false;
    for (const auto& seen : arrivals)
      if (seen.bit == a.bit && seen.at == a.at) dup = true;
    if (!dup) arrivals.push_back(a);
  }
  if (arrivals.empty()) {
    v.cause = FailCause::Missing;
    return v;
  }
  if (arrivals.size() > 1) {
    // More than one distinct response for the round can never pass.
    v.cause = FailCause::WrongBit;
    return v;
  }
  const auto& a = arrivals[0];
  v.arrival_error = a.at - expected_arrival;
  v.on_time = std::llabs(v.arrival_error) <= epsilon;
  v.bit_correct = a.bit == expected_bit;
  if (!a.mac_ok) v.cause = FailCause::MacFail;
  else if (!v.bit_correct) v.cause = FailCause::WrongBit;
  else if (!v.on_time) v.cause = v.arrival_error > 0 ? FailCause::Late : FailCause::Early;
  else v.cause = FailCause::None;
  return v;
}

}  // namespace qtag
