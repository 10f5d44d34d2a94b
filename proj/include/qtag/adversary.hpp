#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "qtag/engine.hpp"
#include "qtag/protocol.hpp"
#include "qtag/scenario.hpp"

namespace qtag {

// What a concrete 1D attack gets to see at trial setup.  Content drawn from
// here may only enter injected messages together with a datum reference; the
// engine validates every reference against the past light cone of the
// claimed emit event, so a strategy cannot smuggle knowledge it could not
// physically have.
struct StrategyContext {
  const Geometry* geom = nullptr;
  const ProtocolConfig* cfg = nullptr;
  const std::vector<RoundPlan>* plan = nullptr;
  Vec actual_tag;  // where the tag really is (claimed position if not moved)
};

struct Strategy : EmissionObserver {
  virtual void setup(Engine& eng, const StrategyContext& ctx) = 0;
  void on_emission(Engine&, const Message&, const SpacetimeEvent&) override {}
};

inline DatumRef challenge_ref(int round, int role) {
  return {DatumKind::ChallengeBit, round, role};
}
inline DatumRef response_ref(int round) { return {DatumKind::ResponseBit, round, -1}; }

// Scenario-level capability checks.  The relocation window is the interval
// before the first challenge arrival; moving the tag by more than v * window
// exceeds the adversary's speed bound.
inline void validate_capabilities(const AdversarySpec& adv, const Geometry& geom,
                                  const Vec& actual_tag, double relocation_window_units) {
  double moved = euclidean_distance(geom.tag, actual_tag);
  if (adv.scenario == AdvScenario::I) {
    if (moved > 0)
      throw CapabilityViolation("scenario I: the tag is immobile and cannot be relocated");
    return;
  }
  if (!(adv.speed_bound > 0 && adv.speed_bound <= geom.c))
    throw CapabilityViolation("scenario II requires 0 < v <= c");
  if (moved > adv.speed_bound * relocation_window_units + 1e-12)
    throw CapabilityViolation("relocation exceeds the speed bound v within the setup window");
}

// Scenario I, tag switched off: per round, broadcast one uniformly guessed
// bit from `guess_position`, timed to arrive exactly on time at A_1 (and at
// both stations when guessing from the tag's own location).
class GuessSpoofer : public Strategy {
 public:
  explicit GuessSpoofer(std::optional<Vec> guess_position = {})
      : guess_position_(guess_position) {}

  void setup(Engine& eng, const StrategyContext& ctx) override {
    Vec gpos = guess_position_.value_or(ctx.geom->tag);
    const Vec& s0 = ctx.geom->stations[0];
    const Vec& s1 = ctx.geom->stations[1];
    for (int r = 0; r < static_cast<int>(ctx.plan->size()); ++r) {
      const RoundPlan& p = (*ctx.plan)[r];
      int guess = eng.rng().bit();
      Ticks on_time_a1 = p.arrival_at_tag + ctx.geom->propagation_delay(ctx.geom->tag, s1);
      Ticks emit = on_time_a1 - ctx.geom->propagation_delay(gpos, s1);
      for (int s = 0; s < 2; ++s) {
        Message m;
        m.kind = MsgKind::Response;
        m.round = r;
        m.bit = static_cast<std::int8_t>(guess);
        m.station = static_cast<std::int8_t>(s);
        eng.schedule_injection(m, {emit, gpos}, s == 0 ? s0 : s1);
      }
    }
  }

 private:
  std::optional<Vec> guess_position_;
};

// Scenario II, pure relay: the tag sits displaced inside Eve's apparatus.
// She synchronizes each challenge pair at the true tag location (holding the
// earlier one until the later can arrive) and relays the responses onward
// unmodified.  Geometry then forces a detectable delay at one station.
class RelocationRelay : public Strategy {
 public:
  void setup(Engine& eng, const StrategyContext& ctx) override {
    ctx_ = ctx;
    eng.set_tag_output_captured(true);
    for (int r = 0; r < static_cast<int>(ctx.plan->size()); ++r) {
      const RoundPlan& p = (*ctx.plan)[r];
      Ticks sync = 0;
      for (int role = 0; role < 2; ++role)
        sync = std::max(sync, p.send_time[role] + ctx.geom->propagation_delay(
                                                      ctx.geom->stations[role], ctx.actual_tag));
      for (int role = 0; role < 2; ++role) {
        Message m;
        m.kind = MsgKind::Challenge;
        m.round = r;
        m.role = static_cast<std::int8_t>(role);
        m.bit = static_cast<std::int8_t>(role == 0 ? p.a : p.b);
        m.refs = {challenge_ref(r, role)};
        eng.schedule_injection(m, {sync, ctx.actual_tag}, ctx.actual_tag);
      }
    }
  }

  void on_emission(Engine& eng, const Message& msg, const SpacetimeEvent& origin) override {
    if (msg.kind != MsgKind::Response || msg.injected) return;
    Message relay = msg;
    relay.refs = {response_ref(msg.round)};
    eng.schedule_injection(relay, origin, ctx_.geom->stations[msg.station]);
  }

 private:
  StrategyContext ctx_;
};

// Scenario II, input injection: the tag is displaced toward one station; Eve
// supplies a guessed far-side challenge bit early so the tag answers in time
// for both stations, and holds the near-side response so it arrives exactly
// on schedule.  A wrong guess makes the tag release a wrong-index key bit
// and the honest far-side challenge, relayed afterwards, burns the round.
class InputInjection : public Strategy {
 public:
  void setup(Engine& eng, const StrategyContext& ctx) override {
    ctx_ = ctx;
    eng.set_tag_output_captured(true);
    near_ = euclidean_distance(ctx.actual_tag, ctx.geom->stations[1]) <
                    euclidean_distance(ctx.actual_tag, ctx.geom->stations[0])
                ? 1
                : 0;
    int far = 1 - near_;
    const Vec& s_near = ctx.geom->stations[near_];
    const Vec& s_far = ctx.geom->stations[far];
    for (int r = 0; r < static_cast<int>(ctx.plan->size()); ++r) {
      const RoundPlan& p = (*ctx.plan)[r];
      Ticks inject_at =
          p.send_time[near_] + ctx.geom->propagation_delay(s_near, ctx.actual_tag);
      int guess = eng.rng().bit();
      Message guessed;
      guessed.kind = MsgKind::Challenge;
      guessed.round = r;
      guessed.role = static_cast<std::int8_t>(far);
      guessed.bit = static_cast<std::int8_t>(guess);
      eng.schedule_injection(guessed, {inject_at, ctx_.actual_tag}, ctx_.actual_tag);

      Message relayed_near;
      relayed_near.kind = MsgKind::Challenge;
      relayed_near.round = r;
      relayed_near.role = static_cast<std::int8_t>(near_);
      relayed_near.bit = static_cast<std::int8_t>(near_ == 0 ? p.a : p.b);
      relayed_near.refs = {challenge_ref(r, near_)};
      eng.schedule_injection(relayed_near, {inject_at, ctx_.actual_tag}, ctx_.actual_tag);

      // The honest far-side bit is relayed once it can reach the true tag;
      // it arrives unpaired with a consumed round index, which fails safe.
      Ticks late_at = p.send_time[far] + ctx.geom->propagation_delay(s_far, ctx.actual_tag);
      Message relayed_far;
      relayed_far.kind = MsgKind::Challenge;
      relayed_far.round = r;
      relayed_far.role = static_cast<std::int8_t>(far);
      relayed_far.bit = static_cast<std::int8_t>(far == 0 ? p.a : p.b);
      relayed_far.refs = {challenge_ref(r, far)};
      eng.schedule_injection(relayed_far, {late_at, ctx_.actual_tag}, ctx_.actual_tag);
    }
  }

  void on_emission(Engine& eng, const Message& msg, const SpacetimeEvent& origin) override {
    if (msg.kind != MsgKind::Response || msg.injected) return;
    Message relay = msg;
    relay.refs = {response_ref(msg.round)};
    const RoundPlan& p = (*ctx_.plan)[msg.round];
    if (msg.station == near_) {
      // Hold, then release right next to the station so it lands on time.
      const Vec& s_near = ctx_.geom->stations[near_];
      Ticks expected = p.arrival_at_tag + ctx_.geom->propagation_delay(ctx_.geom->tag, s_near);
      eng.schedule_injection(relay, {expected, s_near}, s_near);
    } else {
      eng.schedule_injection(relay, origin, ctx_.geom->stations[msg.station]);
    }
  }

 private:
  StrategyContext ctx_;
  int near_ = 1;
};

// Scenario I with the tag off but holding keys from an earlier QKE run: a
// probe is sent through the tag (pass-through, no key datum ever originates
// from it) and the attack degenerates to guessing.
class OffTagPrecompute : public Strategy {
 public:
  void setup(Engine& eng, const StrategyContext& ctx) override {
    Message probe;
    probe.kind = MsgKind::Probe;
    probe.round = 0;
    Vec mid = 0.5 * (ctx.geom->stations[0] + ctx.geom->tag);
    eng.schedule_injection(probe, {0, mid}, ctx.geom->tag);
    guesser_.setup(eng, ctx);
  }

 private:
  GuessSpoofer guesser_;
};

// Deliberately invalid strategy: references a challenge bit at spacelike
// separation.  Exists to prove the causality enforcement is complete.
class FtlProbe : public Strategy {
 public:
  void setup(Engine& eng, const StrategyContext& ctx) override {
    const RoundPlan& p = (*ctx.plan)[0];
    Vec spot = 0.5 * (ctx.geom->tag + ctx.geom->stations[1]);
    Message m;
    m.kind = MsgKind::Response;
    m.round = 0;
    m.bit = 0;
    m.station = 1;
    m.refs = {challenge_ref(0, 0)};
    // At T_0 the a_0 bit has only just reached the tag position; this event
    // is strictly outside its forward light cone.
    eng.schedule_injection(m, {p.arrival_at_tag, spot}, ctx.geom->stations[1]);
  }
};

inline std::unique_ptr<Strategy> make_strategy(const AdversarySpec& adv, const Geometry& geom) {
  switch (adv.strategy) {
    case StrategyKind::None: return nullptr;
    case StrategyKind::Guess:
    case StrategyKind::OffTagPrecompute: {
      std::optional<Vec> gpos;
      if (adv.guess_position) gpos = Vec::from(*adv.guess_position);
      if (adv.strategy == StrategyKind::Guess) return std::make_unique<GuessSpoofer>(gpos);
      return std::make_unique<OffTagPrecompute>();
    }
    case StrategyKind::Relocation: return std::make_unique<RelocationRelay>();
    case StrategyKind::InputInjection: return std::make_unique<InputInjection>();
    case StrategyKind::FtlProbe: return std::make_unique<FtlProbe>();
  }
  return nullptr;
}

}  // namespace qtag
