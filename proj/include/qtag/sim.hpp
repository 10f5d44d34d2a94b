#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "qtag/adversary.hpp"
#include "qtag/engine.hpp"
#include "qtag/keys.hpp"
#include "qtag/protocol.hpp"
#include "qtag/qke.hpp"
#include "qtag/rng.hpp"
#include "qtag/scenario.hpp"

namespace qtag {

// Absolute sphere-consistency tolerance for 3D multilateration,
// distance-units.  Far above the one-tick delay quantization, far below any
// physical displacement under test.
inline constexpr double kTauGeo = 1e-9;

struct QkeStats {
  int sessions = 0;
  std::size_t sifted_total = 0;
  double last_qber = 0.0;
  bool aborted = false;
};

struct TrialResult {
  AuthDecision decision;
  std::vector<RoundVerdict> verdicts;
  bool wrong_index_release = false;  // tag answered a non-honest challenge pair
  bool any_burn = false;
  bool depletion = false;
  Ticks max_abs_error = 0;
  double sum_abs_error_units = 0.0;
  std::size_t error_samples = 0;
  std::uint64_t events = 0;
  QkeStats qke;
  // 3D only:
  bool outside_hull = false;
  std::optional<MultilaterationResult> multilateration;
  std::array<double, 4> distance_bounds{};  // median per-station bound
};

// Game-level spoof success: the verifier authenticated AND the tag was never
// tricked into releasing a wrong-index key bit.  (A wrong-index release is
// an unrecoverable round: the correct bit is gone for good, even if its
// value happens to collide.)
inline bool spoof_success(const TrialResult& r) {
  return r.decision.authenticated && !r.wrong_index_release;
}

namespace detail {

// Assembles the trial's shared key pool: preshared material when configured,
// fresh random bits otherwise, expanded by simulated QKE when the preshared
// string is too short for the session.
inline BitVec build_key_pool(const Scenario& sc, std::size_t bits_needed, Rng& rng,
                             QkeStats& stats, Engine* eng) {
  if (!sc.keys.initial_key) {
    BitVec pool(bits_needed);
    for (auto& b : pool) b = static_cast<std::uint8_t>(rng.bit());
    return pool;
  }
  BitVec pool = *sc.keys.initial_key;
  const BitVec auth_source = *sc.keys.initial_key;
  Rng qke_rng(rng.uniform_u64());
  // The initial key doubles as the QKE authentication key; each session's
  // MACs consume fresh bits from it, monotonically.
  BitVec auth_remaining = auth_source;
  while (pool.size() < bits_needed && stats.sessions < 64) {
    QkeParams params{sc.keys.n_raw, sc.keys.qber_threshold, sc.keys.f_est, false};
    QkeResult res = qke_expand(params, auth_remaining, qke_rng);
    ++stats.sessions;
    stats.last_qber = res.qber;
    if (res.status != QkeStatus::Completed) {
      stats.aborted = true;
      break;
    }
    stats.sifted_total += res.sifted_length;
    pool.insert(pool.end(), res.alice_key.begin(), res.alice_key.end());
    // Consume the used auth bits for the next session.
    auth_remaining.erase(auth_remaining.begin(),
                         auth_remaining.begin() +
                             static_cast<std::ptrdiff_t>(std::min(res.auth_bits_consumed,
                                                                  auth_remaining.size())));
    if (eng)
      eng->note({{"k", "qke_session"},
                 {"sifted", res.sifted_length},
                 {"qber", res.qber},
                 {"pool_bits", pool.size()}});
  }
  return pool;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1D trial
// ---------------------------------------------------------------------------

inline TrialResult run_trial_1d(const Scenario& sc, std::uint64_t seed, Trace* trace = nullptr,
                                bool early_abort = true) {
  const Geometry& geom = sc.geometry;
  const ProtocolConfig& cfg = sc.protocol;
  Rng rng(seed);
  TrialResult result;

  std::size_t tag_bits = static_cast<std::size_t>(cfg.rounds) * 4;
  std::size_t mac_bits =
      cfg.authenticate_messages ? static_cast<std::size_t>(cfg.rounds) * 4 * 128 : 0;

  Engine eng(geom, rng, trace);
  BitVec pool = detail::build_key_pool(sc, tag_bits + mac_bits, rng, result.qke,
                                       trace ? &eng : nullptr);
  BitVec key_bits(pool.begin(), pool.begin() + std::min(tag_bits, pool.size()));
  BitVec mac_region;
  if (mac_bits && pool.size() > tag_bits)
    mac_region.assign(pool.begin() + static_cast<std::ptrdiff_t>(tag_bits),
                      pool.begin() + static_cast<std::ptrdiff_t>(
                                         std::min(tag_bits + mac_bits, pool.size())));
  MacSlots mac_slots = cfg.authenticate_messages ? MacSlots(&mac_region) : MacSlots();

  std::vector<RoundPlan> plan = schedule_challenges_1d(geom, cfg, rng);

  Vec actual_tag = geom.tag;
  bool tag_on = true;
  switch (sc.adversary.strategy) {
    case StrategyKind::Guess:
    case StrategyKind::OffTagPrecompute:
      tag_on = false;
      break;
    case StrategyKind::Relocation:
    case StrategyKind::InputInjection:
      actual_tag = displaced_tag_position(geom, sc.adversary.displacement);
      break;
    default:
      break;
  }
  validate_capabilities(sc.adversary, geom, actual_tag,
                        units_from_ticks(default_start_time(geom)));

  KeyStore store(key_bits);
  TagActor1D tag(&store, &geom, &cfg, tag_on, actual_tag);
  tag.set_expected_pairs(&plan);
  if (mac_slots.enabled()) tag.set_mac_slots(&mac_slots);
  eng.add_actor(kTagActor, actual_tag, &tag);

  std::array<StationActor, 2> stations{StationActor(0), StationActor(1)};
  for (int s = 0; s < 2; ++s) {
    if (mac_slots.enabled()) stations[s].set_mac_slots(&mac_slots);
    eng.add_actor(s, geom.stations[s], &stations[s]);
  }

  // Verifier's expectations.
  std::vector<int> expected_bit(cfg.rounds);
  std::vector<std::array<Ticks, 2>> expected_arrival(cfg.rounds);
  for (int r = 0; r < cfg.rounds; ++r) {
    std::size_t idx = key_index(static_cast<std::size_t>(r), plan[r].a, plan[r].b);
    expected_bit[r] = idx < key_bits.size() ? key_bits[idx] : 0;
    for (int s = 0; s < 2; ++s)
      expected_arrival[r][s] =
          plan[r].arrival_at_tag + geom.propagation_delay(geom.tag, geom.stations[s]);
  }

  // Online evaluation for early abort: any arrival that already dooms its
  // round ends the trial (a failed round is final; nothing can repair it).
  bool doomed = false;
  if (early_abort && !trace) {
    for (int s = 0; s < 2; ++s)
      stations[s].set_callback([&, s](int, const Message& m, Ticks) {
        if (m.round < 0 || m.round >= cfg.rounds) return;
        StationVerdict v = verify_station_round(stations[s].arrivals_for(m.round),
                                                expected_bit[m.round],
                                                expected_arrival[m.round][s],
                                                cfg.epsilon_ticks());
        if (v.cause != FailCause::None && v.cause != FailCause::Missing) {
          doomed = true;
          eng.stop();
        }
      });
  }

  // Honest challenge emissions, aimed at the claimed tag position.
  for (int r = 0; r < cfg.rounds; ++r) {
    for (int role = 0; role < 2; ++role) {
      Message m;
      m.kind = MsgKind::Challenge;
      m.round = r;
      m.role = static_cast<std::int8_t>(role);
      m.station = static_cast<std::int8_t>(role);
      m.bit = static_cast<std::int8_t>(role == 0 ? plan[r].a : plan[r].b);
      if (mac_slots.enabled()) m.mac = mac_slots.sign(m, mac_slot_1d(r, MsgKind::Challenge, role));
      eng.schedule_send(role, m, geom.stations[role], plan[r].send_time[role], geom.tag);
    }
  }

  std::unique_ptr<Strategy> strategy = make_strategy(sc.adversary, geom);
  if (strategy) {
    StrategyContext ctx{&geom, &cfg, &plan, actual_tag};
    eng.set_observer(strategy.get());
    strategy->setup(eng, ctx);
  }

  eng.run();
  result.events = eng.events_processed();

  result.verdicts.resize(static_cast<std::size_t>(cfg.rounds));
  for (int r = 0; r < cfg.rounds; ++r) {
    RoundVerdict& rv = result.verdicts[static_cast<std::size_t>(r)];
    rv.round = r;
    rv.stations.resize(2);
    rv.pass = true;
    for (int s = 0; s < 2; ++s) {
      rv.stations[s] = verify_station_round(stations[s].arrivals_for(r), expected_bit[r],
                                            expected_arrival[r][s], cfg.epsilon_ticks());
      if (rv.stations[s].cause != FailCause::None) rv.pass = false;
      if (rv.stations[s].cause != FailCause::Missing) {
        Ticks err = std::llabs(rv.stations[s].arrival_error);
        result.max_abs_error = std::max(result.max_abs_error, err);
        result.sum_abs_error_units += units_from_ticks(err);
        ++result.error_samples;
      }
    }
    if (doomed && !rv.pass) break;  // later rounds were cut short deliberately
  }
  result.decision = decide(result.verdicts, cfg);

  // The N responses must fit within Delta_t at each station.
  if (result.decision.authenticated) {
    for (int s = 0; s < 2 && result.decision.authenticated; ++s) {
      Ticks lo = 0, hi = 0;
      bool first = true;
      for (int r = 0; r < cfg.rounds; ++r)
        for (const auto& a : stations[s].arrivals_for(r)) {
          lo = first ? a.at : std::min(lo, a.at);
          hi = first ? a.at : std::max(hi, a.at);
          first = false;
        }
      if (!first && hi - lo > cfg.delta_t_ticks()) {
        result.decision.authenticated = false;
        result.decision.first_failure = {cfg.rounds - 1, FailCause::Late};
      }
    }
  }

  result.wrong_index_release = tag.wrong_index_release();
  result.any_burn = tag.any_burn();
  result.depletion = tag.depletion_flagged();
  if (trace)
    eng.note({{"k", "decision"},
              {"authenticated", result.decision.authenticated},
              {"rounds_completed", result.decision.rounds_completed}});
  return result;
}

// ---------------------------------------------------------------------------
// 3D trial: per-station distance bounding over key blocks + multilateration
// ---------------------------------------------------------------------------

namespace detail {

class TagActor3D : public Actor {
 public:
  TagActor3D(BlockKeySet* keys, const Geometry* geom, Vec pos) : keys_(keys), geom_(geom), pos_(pos) {}

  bool any_burn() const { return any_burn_; }

  void on_deliver(Engine& eng, const Message& msg, Ticks now) override {
    if (msg.kind != MsgKind::BlockRequest) return;
    ReleaseResult r = keys_->release_block_bit(msg.station, static_cast<std::size_t>(msg.round),
                                               msg.which);
    if (r.status != ReleaseStatus::Ok) {
      any_burn_ = any_burn_ || r.status == ReleaseStatus::Refused;
      eng.note({{"k", "block_refused"}, {"t", now}, {"station", msg.station}, {"block", msg.round}});
      return;
    }
    Message out;
    out.kind = MsgKind::BlockResponse;
    out.round = msg.round;
    out.station = msg.station;
    out.bit = static_cast<std::int8_t>(r.bit);
    eng.schedule_send(kTagActor, out, pos_, now, geom_->stations[msg.station]);
  }

 private:
  BlockKeySet* keys_;
  const Geometry* geom_;
  Vec pos_;
  bool any_burn_ = false;
};

}  // namespace detail

inline TrialResult run_trial_3d(const Scenario& sc, std::uint64_t seed, Trace* trace = nullptr) {
  const Geometry& geom = sc.geometry;
  const ProtocolConfig& cfg = sc.protocol;
  Rng rng(seed);
  TrialResult result;

  Engine eng(geom, rng, trace);
  std::size_t needed = static_cast<std::size_t>(cfg.rounds) * 8;  // 4 stations x 2-bit blocks
  BitVec pool = detail::build_key_pool(sc, needed, rng, result.qke, trace ? &eng : nullptr);
  BlockKeySet keys = BlockKeySet::from_flat(pool);
  BlockKeySet verifier_keys = BlockKeySet::from_flat(pool);  // shared ground truth

  Vec actual_tag = geom.tag;
  if (!sc.adversary.displacement.empty() &&
      (sc.adversary.strategy == StrategyKind::Relocation ||
       sc.adversary.strategy == StrategyKind::InputInjection))
    actual_tag = displaced_tag_position(geom, sc.adversary.displacement);
  validate_capabilities(sc.adversary, geom, actual_tag,
                        units_from_ticks(default_start_time(geom)));

  detail::TagActor3D tag(&keys, &geom, actual_tag);
  eng.add_actor(kTagActor, actual_tag, &tag);

  std::array<StationActor, 4> stations{StationActor(0), StationActor(1), StationActor(2),
                                       StationActor(3)};
  for (int s = 0; s < 4; ++s) eng.add_actor(s, geom.stations[s], &stations[s]);

  // Each station's requests go out on its own clock; it verifies its own
  // round trips.  Requests toward a relocated tag reach it via the
  // adversary's optimal straight-line relay, which direct delivery models.
  Ticks t0 = ticks_per_unit;
  std::vector<std::array<Ticks, 4>> send_time(static_cast<std::size_t>(cfg.rounds));
  std::vector<std::array<int, 4>> which(static_cast<std::size_t>(cfg.rounds));
  for (int j = 0; j < cfg.rounds; ++j)
    for (int s = 0; s < 4; ++s) {
      send_time[j][s] = t0 + static_cast<Ticks>(j) * cfg.tau_ticks();
      which[j][s] = rng.bit();
      Message m;
      m.kind = MsgKind::BlockRequest;
      m.round = j;
      m.station = static_cast<std::int8_t>(s);
      m.which = static_cast<std::int8_t>(which[j][s]);
      eng.schedule_send(s, m, geom.stations[s], send_time[j][s], actual_tag);
    }

  eng.run();
  result.events = eng.events_processed();

  std::array<Vec, 4> station_pos{geom.stations[0], geom.stations[1], geom.stations[2],
                                 geom.stations[3]};
  bool inside = in_tetrahedron(geom.tag, station_pos);
  result.outside_hull = !inside;

  result.verdicts.resize(static_cast<std::size_t>(cfg.rounds));
  std::array<std::vector<double>, 4> bounds;
  for (int j = 0; j < cfg.rounds; ++j) {
    RoundVerdict& rv = result.verdicts[static_cast<std::size_t>(j)];
    rv.round = j;
    rv.stations.resize(4);
    rv.pass = true;
    for (int s = 0; s < 4; ++s) {
      StationVerdict& v = rv.stations[s];
      const auto& arr = stations[s].arrivals_for(j);
      if (arr.size() != 1) {
        v.cause = FailCause::Missing;
        rv.pass = false;
        continue;
      }
      double rtt = units_from_ticks(arr[0].at - send_time[j][s]);
      double bound = geom.c * rtt / 2.0;  // distance bound from the round trip
      bounds[s].push_back(bound);
      double claimed_dist = euclidean_distance(geom.stations[s], geom.tag);
      v.bit_correct = arr[0].bit == verifier_keys.peek_bit(s, static_cast<std::size_t>(j),
                                                           which[j][s]);
      v.on_time = bound <= claimed_dist + cfg.timing_tolerance * geom.c + kTauGeo;
      v.arrival_error = arr[0].at - (send_time[j][s] + 2 * geom.propagation_delay(
                                                           geom.stations[s], geom.tag));
      if (!v.bit_correct) v.cause = FailCause::WrongBit;
      else if (!v.on_time) v.cause = FailCause::Late;
      else v.cause = FailCause::None;
      if (v.cause != FailCause::None) rv.pass = false;
    }
  }
  result.decision = decide(result.verdicts, cfg);
  result.any_burn = tag.any_burn();

  // Multilateration cross-check on the median per-station bounds.
  std::array<double, 4> med{};
  bool have_bounds = true;
  for (int s = 0; s < 4; ++s) {
    if (bounds[s].empty()) {
      have_bounds = false;
      break;
    }
    std::sort(bounds[s].begin(), bounds[s].end());
    med[s] = bounds[s][bounds[s].size() / 2];
  }
  if (have_bounds) {
    result.distance_bounds = med;
    result.multilateration = multilaterate(station_pos, med, kTauGeo);
  }
  bool position_consistent = have_bounds && result.multilateration->consistent &&
                             euclidean_distance(result.multilateration->point, geom.tag) <= kTauGeo;
  if (!inside || !position_consistent) result.decision.authenticated = false;

  if (trace)
    eng.note({{"k", "decision"},
              {"authenticated", result.decision.authenticated},
              {"outside_hull", result.outside_hull}});
  return result;
}

inline TrialResult run_trial(const Scenario& sc, std::uint64_t seed, Trace* trace = nullptr,
                             bool early_abort = true) {
  return sc.protocol.mode == Mode::OneDim ? run_trial_1d(sc, seed, trace, early_abort)
                                          : run_trial_3d(sc, seed, trace);
}

}  // namespace qtag
