#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qtag/mac.hpp"
#include "qtag/rng.hpp"
#include "qtag/spacetime.hpp"

namespace qtag {

// Actor ids: stations are 0..3, the rest are fixed.
inline constexpr int kTagActor = 100;
inline constexpr int kAdversaryActor = 101;
inline constexpr int kNoActor = -1;

inline std::string actor_name(int id) {
  if (id == kTagActor) return "T";
  if (id == kAdversaryActor) return "E";
  if (id == kNoActor) return "-";
  return "A" + std::to_string(id);
}

enum class MsgKind : std::uint8_t { Challenge, Response, BlockRequest, BlockResponse, Probe };

inline const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::Challenge: return "challenge";
    case MsgKind::Response: return "response";
    case MsgKind::BlockRequest: return "block_request";
    case MsgKind::BlockResponse: return "block_response";
    case MsgKind::Probe: return "probe";
  }
  return "?";
}

// Identifies a datum for the information ledger: what the adversary could
// know, and where/when it first became observable outside private state.
enum class DatumKind : std::uint8_t { ChallengeBit, ResponseBit, BlockRequestBit, BlockResponseBit, Probe };

struct DatumRef {
  DatumKind kind;
  std::int32_t round = -1;   // round index, or block index for block data
  std::int32_t station = -1; // role/station qualifier where applicable

  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(kind) << 56) |
           ((static_cast<std::uint64_t>(static_cast<std::uint32_t>(round))) << 8) |
           static_cast<std::uint64_t>(static_cast<std::uint8_t>(station));
  }
  std::string name() const {
    switch (kind) {
      case DatumKind::ChallengeBit:
        return (station == 0 ? "a_" : "b_") + std::to_string(round);
      case DatumKind::ResponseBit: return "response_" + std::to_string(round);
      case DatumKind::BlockRequestBit:
        return "request_" + std::to_string(station) + "_" + std::to_string(round);
      case DatumKind::BlockResponseBit:
        return "block_response_" + std::to_string(station) + "_" + std::to_string(round);
      case DatumKind::Probe: return "probe_" + std::to_string(round);
    }
    return "?";
  }
};

struct Message {
  MsgKind kind = MsgKind::Challenge;
  std::int32_t round = -1;
  std::int8_t bit = 0;      // challenge bit value, or released key bit value
  std::int8_t role = 0;     // 1D challenge side: 0 = a_i (from A_0), 1 = b_i (from A_1)
  std::int8_t station = -1; // origin or destination station id
  std::int8_t which = 0;    // 3D: which bit of the block is requested
  bool injected = false;    // emitted by the adversary rather than an honest actor
  std::vector<DatumRef> refs;  // provenance of injected content
  std::optional<MacTag> mac;

  // The datum this message's content corresponds to in the ledger, if any.
  // Injected content is adversary-local (guesses or relayed references) and
  // never mints a new datum.
  std::optional<DatumRef> datum() const {
    if (injected) return std::nullopt;
    switch (kind) {
      case MsgKind::Challenge:
        return DatumRef{DatumKind::ChallengeBit, round, role};
      case MsgKind::Response:
        return DatumRef{DatumKind::ResponseBit, round, -1};
      case MsgKind::BlockRequest:
        return DatumRef{DatumKind::BlockRequestBit, round, station};
      case MsgKind::BlockResponse:
        return DatumRef{DatumKind::BlockResponseBit, round, station};
      case MsgKind::Probe:
        return DatumRef{DatumKind::Probe, round, station};
    }
    return std::nullopt;
  }
};

// Raised when an adversary injection references data outside its past light
// cone.  This is a test oracle, not a recoverable condition.
struct CausalityViolation : std::runtime_error {
  std::string datum;
  Ticks deficit = 0;  // how many ticks too early the injection was
  CausalityViolation(const std::string& datum_name, Ticks deficit_ticks)
      : std::runtime_error("causality violation: injection references " + datum_name +
                           " " + std::to_string(deficit_ticks) + " ticks before it is accessible"),
        datum(datum_name),
        deficit(deficit_ticks) {}
};

struct CapabilityViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Engine;

struct Actor {
  virtual ~Actor() = default;
  virtual void on_deliver(Engine& eng, const Message& msg, Ticks now) = 0;
  virtual void on_wake(Engine& /*eng*/, std::int64_t /*payload*/, Ticks /*now*/) {}
};

// Adversary hook: observes every emission (Eve is omnipresent outside actor
// interiors; the ledger decides what she may use where).
struct EmissionObserver {
  virtual ~EmissionObserver() = default;
  virtual void on_emission(Engine& eng, const Message& msg, const SpacetimeEvent& origin) = 0;
};

struct Trace {
  std::vector<std::string> lines;
  void push(nlohmann::json j, std::uint64_t index) {
    j["i"] = index;
    lines.push_back(j.dump());
  }
};

class Engine {
 public:
  Engine(const Geometry& geom, Rng& rng, Trace* trace = nullptr)
      : geom_(geom), rng_(rng), trace_(trace) {}

  const Geometry& geometry() const { return geom_; }
  Rng& rng() { return rng_; }
  Ticks now() const { return now_; }

  void add_actor(int id, Vec pos, Actor* actor) { actors_.push_back({id, pos, actor}); }

  void remove_actor(int id) {
    std::erase_if(actors_, [id](const ActorEntry& e) { return e.id == id; });
  }

  void set_observer(EmissionObserver* obs) { observer_ = obs; }

  // When true, messages emitted by the tag actor are handed to the emission
  // observer instead of propagating: the relocated tag sits inside the
  // adversary's apparatus and she mediates its I/O.
  void set_tag_output_captured(bool v) { tag_captured_ = v; }

  // Schedules an emission of `msg` from `from` at absolute time `at`; the
  // delivery lands at the actor located at `to` after the exact propagation
  // delay.  If no actor sits at `to`, the message is still emitted (and
  // observable) but nothing receives it.
  void schedule_send(int sender, const Message& msg, const Vec& from, Ticks at, const Vec& to) {
    push_event(EventKind::Send, at, sender, msg, from, to);
  }

  // Adversary injection at a claimed emit event.  Validation against the
  // information ledger happens when the event fires.
  void schedule_injection(Message msg, const SpacetimeEvent& emit, const Vec& to) {
    msg.injected = true;
    push_event(EventKind::Send, emit.t, kAdversaryActor, msg, emit.x, to);
  }

  void schedule_wake(int actor, Ticks at, std::int64_t payload) {
    EngineEvent ev;
    ev.t = at;
    ev.actor = actor;
    ev.seq = seq_++;
    ev.kind = EventKind::Wake;
    ev.payload = payload;
    queue_.push(std::move(ev));
  }

  void schedule_act(Ticks at, std::function<void(Engine&)> fn) {
    EngineEvent ev;
    ev.t = at;
    ev.actor = kAdversaryActor;
    ev.seq = seq_++;
    ev.kind = EventKind::Act;
    ev.act = std::move(fn);
    queue_.push(std::move(ev));
  }

  std::optional<SpacetimeEvent> datum_origin(const DatumRef& ref) const {
    auto it = ledger_.find(ref.packed());
    if (it == ledger_.end()) return std::nullopt;
    return it->second;
  }

  const std::unordered_map<std::uint64_t, SpacetimeEvent>& ledger_raw() const { return ledger_; }

  // Validates that every referenced datum is in the past light cone of the
  // claimed emit event.  Throws CausalityViolation otherwise.
  void validate_injection(const Message& msg, const SpacetimeEvent& emit) const {
    for (const DatumRef& ref : msg.refs) {
      auto origin = datum_origin(ref);
      if (!origin) throw CausalityViolation(ref.name() + " (never emitted)", emit.t);
      Ticks needed = origin->t + geom_.propagation_delay(origin->x, emit.x);
      if (emit.t < needed) throw CausalityViolation(ref.name(), needed - emit.t);
    }
  }

  void run() {
    stopped_ = false;
    while (!stopped_ && !queue_.empty()) {
      EngineEvent ev = queue_.top();
      queue_.pop();
      now_ = ev.t;
      dispatch(ev);
    }
  }

  void stop() {
    stopped_ = true;
    while (!queue_.empty()) queue_.pop();
  }

  std::uint64_t events_processed() const { return events_processed_; }

  void note(nlohmann::json j) {
    if (trace_) trace_->push(std::move(j), record_index_++);
  }

 private:
  enum class EventKind : std::uint8_t { Send, Deliver, Wake, Act };

  struct EngineEvent {
    Ticks t = 0;
    int actor = kNoActor;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Send;
    Message msg;
    Vec from, to;
    std::int64_t payload = 0;
    std::function<void(Engine&)> act;
  };

  struct EventOrder {
    bool operator()(const EngineEvent& a, const EngineEvent& b) const {
      if (a.t != b.t) return a.t > b.t;
      if (a.actor != b.actor) return a.actor > b.actor;
      return a.seq > b.seq;
    }
  };

  struct ActorEntry {
    int id;
    Vec pos;
    Actor* actor;
  };

  void push_event(EventKind kind, Ticks t, int actor, const Message& msg, const Vec& from,
                  const Vec& to) {
    EngineEvent ev;
    ev.t = t;
    ev.actor = actor;
    ev.seq = seq_++;
    ev.kind = kind;
    ev.msg = msg;
    ev.from = from;
    ev.to = to;
    queue_.push(std::move(ev));
  }

  void dispatch(const EngineEvent& ev) {
    ++events_processed_;
    switch (ev.kind) {
      case EventKind::Send: {
        SpacetimeEvent origin{ev.t, ev.from};
        if (ev.msg.injected) validate_injection(ev.msg, origin);
        if (auto d = ev.msg.datum(); d && !ledger_.contains(d->packed()))
          ledger_.emplace(d->packed(), origin);
        trace_send(ev);
        bool captured = tag_captured_ && ev.actor == kTagActor;
        if (observer_ && ev.actor != kAdversaryActor) observer_->on_emission(*this, ev.msg, origin);
        if (captured) break;  // the adversary mediates relocated-tag output
        // Deliver to the actor sitting exactly at the destination, if any.
        for (const ActorEntry& e : actors_) {
          if (e.pos == ev.to) {
            Ticks arrive = ev.t + geom_.propagation_delay(ev.from, ev.to);
            push_event(EventKind::Deliver, arrive, e.id, ev.msg, ev.from, ev.to);
            break;
          }
        }
        break;
      }
      case EventKind::Deliver: {
        trace_deliver(ev);
        for (const ActorEntry& e : actors_)
          if (e.id == ev.actor) {
            e.actor->on_deliver(*this, ev.msg, ev.t);
            break;
          }
        break;
      }
      case EventKind::Wake: {
        for (const ActorEntry& e : actors_)
          if (e.id == ev.actor) {
            e.actor->on_wake(*this, ev.payload, ev.t);
            break;
          }
        break;
      }
      case EventKind::Act:
        if (ev.act) ev.act(*this);
        break;
    }
  }

  nlohmann::json msg_json(const Message& m) const {
    nlohmann::json j{{"kind", msg_kind_name(m.kind)}, {"round", m.round}, {"bit", m.bit}};
    if (m.kind == MsgKind::Challenge) j["role"] = m.role;
    if (m.station >= 0) j["station"] = m.station;
    if (m.kind == MsgKind::BlockRequest) j["which"] = m.which;
    if (m.injected) {
      j["injected"] = true;
      auto refs = nlohmann::json::array();
      for (const DatumRef& r : m.refs) refs.push_back(r.name());
      j["refs"] = refs;
    }
    if (m.mac) j["mac"] = m.mac->value;
    return j;
  }

  void trace_send(const EngineEvent& ev) {
    if (!trace_) return;
    nlohmann::json m = msg_json(ev.msg);
    if (auto d = ev.msg.datum()) m["datum"] = d->name();
    note({{"k", "send"},
          {"t", ev.t},
          {"x", ev.from.to_vector()},
          {"to", ev.to.to_vector()},
          {"actor", actor_name(ev.actor)},
          {"msg", std::move(m)},
          {"rng", rng_.draws()}});
  }

  void trace_deliver(const EngineEvent& ev) {
    if (!trace_) return;
    note({{"k", "deliver"},
          {"t", ev.t},
          {"x", ev.to.to_vector()},
          {"actor", actor_name(ev.actor)},
          {"msg", msg_json(ev.msg)},
          {"rng", rng_.draws()}});
  }

  const Geometry& geom_;
  Rng& rng_;
  Trace* trace_;
  Ticks now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t record_index_ = 0;
  std::uint64_t events_processed_ = 0;
  bool stopped_ = false;
  bool tag_captured_ = false;
  std::vector<ActorEntry> actors_;
  EmissionObserver* observer_ = nullptr;
  std::priority_queue<EngineEvent, std::vector<EngineEvent>, EventOrder> queue_;
  std::unordered_map<std::uint64_t, SpacetimeEvent> ledger_;
};

}  // namespace qtag
