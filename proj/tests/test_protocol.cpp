#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qtag/qtag.hpp"

using namespace qtag;

namespace {

Scenario honest_1d(int rounds, double tau = 1.0) {
  Scenario sc;
  sc.geometry.dimension = 1;
  sc.geometry.c = 1.0;
  sc.geometry.stations = {Vec{0.0}, Vec{10.0}};
  sc.geometry.tag = Vec{5.0};
  sc.protocol.rounds = rounds;
  sc.protocol.round_period = tau;
  return sc;
}

// Drives a bare TagActor1D with hand-timed challenge deliveries.
struct TagHarness {
  Geometry geom;
  ProtocolConfig cfg;
  KeyStore store;
  Rng rng{1};
  Engine eng;
  TagActor1D tag;
  std::array<StationActor, 2> stations{StationActor(0), StationActor(1)};

  explicit TagHarness(int rounds, BitVec bits) :
      geom{1, 1.0, {Vec{0.0}, Vec{10.0}}, Vec{5.0}, {}},
      cfg{},
      store(std::move(bits)),
      eng(geom, rng),
      tag(&store, &geom, &cfg, true, geom.tag) {
    cfg.rounds = rounds;
    eng.add_actor(kTagActor, geom.tag, &tag);
    for (int s = 0; s < 2; ++s) eng.add_actor(s, geom.stations[s], &stations[s]);
  }

  // Emits a challenge timed so it reaches the tag at `arrival`.
  void challenge(int round, int role, int bit, Ticks arrival) {
    Message m;
    m.kind = MsgKind::Challenge;
    m.round = round;
    m.role = static_cast<std::int8_t>(role);
    m.station = static_cast<std::int8_t>(role);
    m.bit = static_cast<std::int8_t>(bit);
    Ticks delay = geom.propagation_delay(geom.stations[role], geom.tag);
    eng.schedule_send(role, m, geom.stations[role], arrival - delay, geom.tag);
  }
};

}  // namespace

TEST_CASE("challenge schedule arithmetic") {
  Scenario sc = honest_1d(3, 2.0);
  Rng rng(5);
  auto plan = schedule_challenges_1d(sc.geometry, sc.protocol, rng);
  REQUIRE(plan.size() == 3);
  // default start: one unit of slack past the worst station-tag delay (5)
  Ticks t0 = 6 * ticks_per_unit;
  for (int i = 0; i < 3; ++i) {
    CHECK(plan[i].arrival_at_tag == t0 + i * 2 * ticks_per_unit);
    CHECK(plan[i].send_time[0] == plan[i].arrival_at_tag - 5 * ticks_per_unit);
    CHECK(plan[i].send_time[1] == plan[i].arrival_at_tag - 5 * ticks_per_unit);
    CHECK((plan[i].a == 0 || plan[i].a == 1));
    CHECK((plan[i].b == 0 || plan[i].b == 1));
  }
  // asymmetric tag position: per-station send times differ accordingly
  sc.geometry.tag = Vec{2.0};
  auto plan2 = schedule_challenges_1d(sc.geometry, sc.protocol, rng);
  CHECK(plan2[0].arrival_at_tag - plan2[0].send_time[0] == 2 * ticks_per_unit);
  CHECK(plan2[0].arrival_at_tag - plan2[0].send_time[1] == 8 * ticks_per_unit);
}

TEST_CASE("decision rule") {
  ProtocolConfig cfg;
  cfg.rounds = 0;
  CHECK(decide({}, cfg).authenticated);  // vacuous conjunction

  cfg.rounds = 2;
  RoundVerdict good{0, {StationVerdict{true, 0, true, FailCause::None},
                        StationVerdict{true, 0, true, FailCause::None}}, true};
  RoundVerdict bad = good;
  bad.round = 1;
  bad.pass = false;
  bad.stations[1].cause = FailCause::Late;

  auto d = decide({good, good}, cfg);
  CHECK(d.authenticated);
  CHECK(d.rounds_completed == 2);

  d = decide({good, bad}, cfg);
  CHECK_FALSE(d.authenticated);
  REQUIRE(d.first_failure);
  CHECK(d.first_failure->first == 1);
  CHECK(d.first_failure->second == FailCause::Late);

  d = decide({good}, cfg);  // short of N rounds
  CHECK_FALSE(d.authenticated);
  CHECK(d.first_failure->second == FailCause::Missing);

  // monotone: a pass for N rounds implies a pass for every prefix
  for (int n = 0; n <= 2; ++n) {
    ProtocolConfig c2 = cfg;
    c2.rounds = n;
    CHECK(decide({good, good}, c2).authenticated);
  }
}

TEST_CASE("station round verification") {
  using A = StationActor::Arrival;
  Ticks t = 10 * ticks_per_unit;

  auto v = verify_station_round({A{1, t, true}}, 1, t, 0);
  CHECK(v.cause == FailCause::None);
  CHECK(v.arrival_error == 0);

  v = verify_station_round({}, 1, t, 0);
  CHECK(v.cause == FailCause::Missing);

  v = verify_station_round({A{0, t, true}}, 1, t, 0);
  CHECK(v.cause == FailCause::WrongBit);

  // the displaced-tag signature: 4 units late at the far station
  v = verify_station_round({A{1, t + 4 * ticks_per_unit, true}}, 1, t, 0);
  CHECK(v.cause == FailCause::Late);
  CHECK(v.arrival_error == 4 * ticks_per_unit);

  v = verify_station_round({A{1, t - 1, true}}, 1, t, 0);
  CHECK(v.cause == FailCause::Early);

  // one-tick tolerance turns the same arrival into a pass
  v = verify_station_round({A{1, t - 1, true}}, 1, t, 1);
  CHECK(v.cause == FailCause::None);

  // identical duplicates collapse; distinct responses can never pass
  v = verify_station_round({A{1, t, true}, A{1, t, true}}, 1, t, 0);
  CHECK(v.cause == FailCause::None);
  v = verify_station_round({A{1, t, true}, A{0, t, true}}, 1, t, 0);
  CHECK(v.cause == FailCause::WrongBit);

  // MAC failure outranks everything
  v = verify_station_round({A{0, t + 5, false}}, 1, t, 0);
  CHECK(v.cause == FailCause::MacFail);
}

TEST_CASE("honest run authenticates with exactly zero timing error") {
  for (int rounds : {1, 3, 10}) {
    Scenario sc = honest_1d(rounds);
    for (std::uint64_t seed : {1ULL, 99ULL}) {
      TrialResult r = run_trial_1d(sc, seed);
      CHECK(r.decision.authenticated);
      CHECK(r.decision.rounds_completed == rounds);
      CHECK(r.max_abs_error == 0);
      CHECK(r.error_samples == 2 * static_cast<std::size_t>(rounds));
      CHECK_FALSE(r.any_burn);
      CHECK_FALSE(r.wrong_index_release);
    }
  }
  // awkward geometry: non-integer delays still cancel exactly
  Scenario sc = honest_1d(5);
  sc.geometry.c = 0.3;
  sc.geometry.stations = {Vec{-1.7}, Vec{9.3}};
  sc.geometry.tag = Vec{2.113};
  TrialResult r = run_trial_1d(sc, 7);
  CHECK(r.decision.authenticated);
  CHECK(r.max_abs_error == 0);
}

TEST_CASE("honest run with message authentication") {
  Scenario sc = honest_1d(4);
  sc.protocol.authenticate_messages = true;
  sc.keys.initial_key.emplace();
  Rng kr(3);
  for (int i = 0; i < 4 * 4 + 4 * 4 * 128; ++i)
    sc.keys.initial_key->push_back(static_cast<std::uint8_t>(kr.bit()));
  TrialResult r = run_trial_1d(sc, 11);
  CHECK(r.decision.authenticated);
  CHECK(r.max_abs_error == 0);
}

TEST_CASE("tag releases only on exactly simultaneous pairs") {
  Ticks t = 20 * ticks_per_unit;

  SUBCASE("exact pair releases once") {
    TagHarness h(2, BitVec{1, 0, 1, 1, 0, 0, 1, 0});
    h.challenge(0, 0, 1, t);
    h.challenge(0, 1, 0, t);
    h.eng.run();
    CHECK(h.stations[0].arrivals_for(0).size() == 1);
    CHECK(h.stations[0].arrivals_for(0)[0].bit == h.store.peek_bit(key_index(0, 1, 0)));
    CHECK(h.store.round_state(0) == KeyStore::RoundState::Released);
    CHECK_FALSE(h.tag.any_burn());
  }

  SUBCASE("one tick of skew burns the round") {
    TagHarness h(2, BitVec{1, 0, 1, 1, 0, 0, 1, 0});
    h.challenge(0, 0, 1, t);
    h.challenge(0, 1, 0, t + 1);
    h.eng.run();
    CHECK(h.stations[0].arrivals_for(0).empty());
    CHECK(h.store.round_state(0) == KeyStore::RoundState::Burned);
    CHECK(h.tag.any_burn());
  }

  SUBCASE("lone challenge times out and burns") {
    TagHarness h(2, BitVec{1, 0, 1, 1, 0, 0, 1, 0});
    h.challenge(0, 0, 1, t);
    h.eng.run();
    CHECK(h.stations[0].arrivals_for(0).empty());
    CHECK(h.store.round_state(0) == KeyStore::RoundState::Burned);
  }

  SUBCASE("duplicate challenge from one side is not a pair") {
    TagHarness h(2, BitVec{1, 0, 1, 1, 0, 0, 1, 0});
    h.challenge(0, 0, 1, t);
    h.challenge(0, 0, 1, t);
    h.eng.run();
    CHECK(h.stations[0].arrivals_for(0).empty());
    CHECK(h.store.round_state(0) == KeyStore::RoundState::Burned);
  }

  SUBCASE("stale round index burns") {
    TagHarness h(3, BitVec(12, 1));
    h.challenge(0, 0, 1, t);
    h.challenge(0, 1, 0, t);
    // round 2 arrives while the counter expects round 1
    h.challenge(2, 0, 1, t + 2 * ticks_per_unit);
    h.challenge(2, 1, 0, t + 2 * ticks_per_unit);
    h.eng.run();
    CHECK(h.store.round_state(0) == KeyStore::RoundState::Released);
    CHECK(h.store.round_state(2) == KeyStore::RoundState::Burned);
  }

  SUBCASE("identical re-delivered pair re-emits idempotently") {
    TagHarness h(1, BitVec{1, 0, 1, 1});
    h.challenge(0, 0, 1, t);
    h.challenge(0, 1, 0, t);
    h.challenge(0, 0, 1, t + ticks_per_unit);
    h.challenge(0, 1, 0, t + ticks_per_unit);
    h.eng.run();
    CHECK(h.store.round_state(0) == KeyStore::RoundState::Released);
    // two emissions, same bit value
    const auto& arr = h.stations[1].arrivals_for(0);
    REQUIRE(arr.size() == 2);
    CHECK(arr[0].bit == arr[1].bit);
  }

  SUBCASE("conflicting content for a completed round burns") {
    TagHarness h(1, BitVec{1, 0, 1, 1});
    h.challenge(0, 0, 1, t);
    h.challenge(0, 1, 0, t);
    h.challenge(0, 0, 0, t + ticks_per_unit);  // flipped a-bit re-query
    h.eng.run();
    CHECK(h.store.round_state(0) == KeyStore::RoundState::Burned);
  }
}

TEST_CASE("unauthenticated input is dropped without burning") {
  Ticks t = 20 * ticks_per_unit;
  TagHarness h(1, BitVec{1, 0, 1, 1});
  BitVec mac_region;
  Rng kr(8);
  for (int i = 0; i < 4 * 128; ++i) mac_region.push_back(static_cast<std::uint8_t>(kr.bit()));
  MacSlots slots(&mac_region);
  h.tag.set_mac_slots(&slots);
  for (int s = 0; s < 2; ++s) h.stations[s].set_mac_slots(&slots);

  // no MAC at all: dropped silently
  h.challenge(0, 0, 1, t);
  h.eng.run();
  CHECK(h.store.round_state(0) == KeyStore::RoundState::Unreleased);
  CHECK_FALSE(h.tag.any_burn());

  // properly signed pair still releases
  for (int role = 0; role < 2; ++role) {
    Message m;
    m.kind = MsgKind::Challenge;
    m.round = 0;
    m.role = static_cast<std::int8_t>(role);
    m.bit = static_cast<std::int8_t>(role == 0 ? 1 : 0);
    m.mac = slots.sign(m, mac_slot_1d(0, MsgKind::Challenge, role));
    Ticks delay = h.geom.propagation_delay(h.geom.stations[role], h.geom.tag);
    h.eng.schedule_send(role, m, h.geom.stations[role], t + 5 * ticks_per_unit - delay, h.geom.tag);
  }
  h.eng.run();
  CHECK(h.store.round_state(0) == KeyStore::RoundState::Released);
  const auto& arr = h.stations[0].arrivals_for(0);
  REQUIRE(arr.size() == 1);
  CHECK(arr[0].mac_ok);
}

TEST_CASE("honest 3d run authenticates and locates the tag") {
  Scenario sc;
  sc.geometry.dimension = 3;
  sc.geometry.c = 1.0;
  sc.geometry.stations = {Vec{0, 0, 0}, Vec{12, 0, 0}, Vec{0, 12, 0}, Vec{0, 0, 12}};
  sc.geometry.tag = Vec{2.5, 3.0, 2.0};
  sc.protocol.mode = Mode::ThreeDim;
  sc.protocol.rounds = 6;
  TrialResult r = run_trial_3d(sc, 21);
  CHECK(r.decision.authenticated);
  CHECK_FALSE(r.outside_hull);
  REQUIRE(r.multilateration);
  CHECK(r.multilateration->consistent);
  CHECK(euclidean_distance(r.multilateration->point, sc.geometry.tag) <= kTauGeo);
  for (int s = 0; s < 4; ++s)
    CHECK(r.distance_bounds[s] ==
          doctest::Approx(euclidean_distance(sc.geometry.stations[s], sc.geometry.tag))
              .epsilon(1e-9));
  CHECK_FALSE(r.any_burn);
}

TEST_CASE("3d verdicts catch a displaced tag") {
  Scenario sc;
  sc.geometry.dimension = 3;
  sc.geometry.c = 1.0;
  sc.geometry.stations = {Vec{0, 0, 0}, Vec{12, 0, 0}, Vec{0, 12, 0}, Vec{0, 0, 12}};
  sc.geometry.tag = Vec{2.5, 3.0, 2.0};
  sc.protocol.mode = Mode::ThreeDim;
  sc.protocol.rounds = 4;
  sc.adversary.strategy = StrategyKind::Relocation;
  sc.adversary.scenario = AdvScenario::II;
  sc.adversary.speed_bound = 1.0;
  sc.adversary.displacement = {0.5, 0.0, 0.0};
  TrialResult r = run_trial_3d(sc, 33);
  CHECK_FALSE(r.decision.authenticated);
}
