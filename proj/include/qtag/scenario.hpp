#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qtag/keys.hpp"
#include "qtag/protocol.hpp"
#include "qtag/spacetime.hpp"

namespace qtag {

enum class AdvScenario : std::uint8_t { I, II };

enum class StrategyKind : std::uint8_t {
  None,             // honest run, no adversary
  Guess,            // scenario I: tag off, uniformly guessed responses
  Relocation,       // scenario II: pure relay to a displaced tag
  InputInjection,   // scenario II: relocated tag fed a guessed early input
  OffTagPrecompute, // scenario I: probes through the off tag, then guessing
  FtlProbe,         // deliberately faster-than-light injection (test oracle)
};

inline const char* strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::None: return "none";
    case StrategyKind::Guess: return "guess";
    case StrategyKind::Relocation: return "relocation";
    case StrategyKind::InputInjection: return "input_injection";
    case StrategyKind::OffTagPrecompute: return "off_tag_precompute";
    case StrategyKind::FtlProbe: return "ftl_probe";
  }
  return "?";
}

struct AdversarySpec {
  StrategyKind strategy = StrategyKind::None;
  AdvScenario scenario = AdvScenario::I;
  double speed_bound = 0.1;           // v, scenario II only
  std::vector<double> displacement;   // delta, relocation strategies
  std::optional<std::vector<double>> guess_position;  // guess strategy emission point
  bool can_drop_messages = false;     // capability flag; built-in attacks leave it off
};

struct KeysSpec {
  std::optional<BitVec> initial_key;  // preshared key material; fresh per trial when absent
  std::size_t n_raw = 1024;           // QKE raw transmissions per session
  double qber_threshold = 0.11;
  double f_est = 0.25;
};

struct ExperimentSpec {
  std::uint64_t trials = 1;
  std::uint64_t seed = 0;
  std::vector<int> sweep_rounds;         // sweep over N; empty = just protocol.rounds
  std::vector<double> sweep_delta;       // sweep over displacement magnitude (1D)
  int workers = 1;
};

struct Scenario {
  Geometry geometry;
  ProtocolConfig protocol;
  KeysSpec keys;
  AdversarySpec adversary;
  ExperimentSpec experiment;
};

inline Vec displaced_tag_position(const Geometry& geom, const std::vector<double>& displacement) {
  Vec d = geom.tag;
  for (int i = 0; i < geom.dimension && i < static_cast<int>(displacement.size()); ++i)
    d.v[i] += displacement[i];
  return d;
}

}  // namespace qtag
