#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtag/scenario.hpp"

namespace qtag {

inline constexpr int kConfigSchemaVersion = 1;

struct ValidationError : std::runtime_error {
  std::vector<std::string> errors;
  explicit ValidationError(std::vector<std::string> errs)
      : std::runtime_error(join(errs)), errors(std::move(errs)) {}

 private:
  static std::string join(const std::vector<std::string>& errs) {
    std::string out = "configuration invalid:";
    for (const auto& e : errs) out += "\n  - " + e;
    return out;
  }
};

namespace detail {

inline StrategyKind parse_strategy(const std::string& s, std::vector<std::string>& errors) {
  if (s == "none") return StrategyKind::None;
  if (s == "guess") return StrategyKind::Guess;
  if (s == "relocation") return StrategyKind::Relocation;
  if (s == "input_injection") return StrategyKind::InputInjection;
  if (s == "off_tag_precompute") return StrategyKind::OffTagPrecompute;
  if (s == "ftl_probe") return StrategyKind::FtlProbe;
  errors.push_back("adversary.strategy: unknown strategy '" + s + "'");
  return StrategyKind::None;
}

}  // namespace detail

// Parses and validates a scenario config.  All validation problems are
// collected and reported together, with field paths.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  Scenario sc;

  if (j.value("schema_version", kConfigSchemaVersion) != kConfigSchemaVersion)
    errors.push_back("schema_version: unsupported version");

  // geometry
  if (!j.contains("geometry")) {
    errors.push_back("geometry: required section missing");
  } else {
    const auto& g = j.at("geometry");
    sc.geometry.dimension = g.value("dimension", 1);
    sc.geometry.c = g.value("c", 1.0);
    try {
      if (g.contains("stations"))
        for (const auto& s : g.at("stations"))
          sc.geometry.stations.push_back(Vec::from(s.get<std::vector<double>>()));
      if (g.contains("tag")) sc.geometry.tag = Vec::from(g.at("tag").get<std::vector<double>>());
      if (g.contains("tag_extent")) {
        auto e = g.at("tag_extent").get<std::vector<double>>();
        if (e.size() == 2) sc.geometry.tag_extent = std::array<double, 2>{e[0], e[1]};
        else errors.push_back("geometry.tag_extent: expected [t_0, t_1]");
      }
    } catch (const std::exception& e) {
      errors.push_back(std::string("geometry: ") + e.what());
    }
  }

  // protocol
  const auto& p = j.value("protocol", nlohmann::json::object());
  sc.protocol.rounds = p.value("N", 1);
  sc.protocol.round_period = p.value("tau", 1.0);
  sc.protocol.timing_tolerance = p.value("epsilon", 0.0);
  sc.protocol.authenticate_messages = p.value("authenticate_messages", false);
  std::string mode = p.value("mode", std::string("one_dim"));
  if (mode == "one_dim") sc.protocol.mode = Mode::OneDim;
  else if (mode == "three_dim") sc.protocol.mode = Mode::ThreeDim;
  else errors.push_back("protocol.mode: must be 'one_dim' or 'three_dim'");

  // keys
  const auto& k = j.value("keys", nlohmann::json::object());
  if (k.contains("initial_key_hex")) {
    try {
      sc.keys.initial_key = bits_from_hex(k.at("initial_key_hex").get<std::string>());
    } catch (const std::exception& e) {
      errors.push_back(std::string("keys.initial_key_hex: ") + e.what());
    }
  }
  sc.keys.n_raw = k.value("n_raw", std::size_t{1024});
  sc.keys.qber_threshold = k.value("qber_threshold", 0.11);
  sc.keys.f_est = k.value("f_est", 0.25);

  // adversary
  const auto& a = j.value("adversary", nlohmann::json::object());
  sc.adversary.strategy = detail::parse_strategy(a.value("strategy", std::string("none")), errors);
  std::string scen = a.value("scenario", std::string("I"));
  if (scen == "I") sc.adversary.scenario = AdvScenario::I;
  else if (scen == "II") sc.adversary.scenario = AdvScenario::II;
  else errors.push_back("adversary.scenario: must be 'I' or 'II'");
  sc.adversary.speed_bound = a.value("v", 0.1);
  if (a.contains("delta")) sc.adversary.displacement = a.at("delta").get<std::vector<double>>();
  if (a.contains("guess_position"))
    sc.adversary.guess_position = a.at("guess_position").get<std::vector<double>>();
  sc.adversary.can_drop_messages = a.value("can_drop_messages", false);

  // experiment
  const auto& e = j.value("experiment", nlohmann::json::object());
  sc.experiment.trials = e.value("trials", std::uint64_t{1});
  sc.experiment.seed = e.value("seed", std::uint64_t{0});
  sc.experiment.workers = e.value("workers", 1);
  if (e.contains("sweep")) {
    const auto& sweep = e.at("sweep");
    if (sweep.contains("N")) sc.experiment.sweep_rounds = sweep.at("N").get<std::vector<int>>();
    if (sweep.contains("delta"))
      sc.experiment.sweep_delta = sweep.at("delta").get<std::vector<double>>();
  }

  // cross-field validation
  if (sc.protocol.rounds < 1) errors.push_back("protocol.N: must be >= 1");
  for (int n : sc.experiment.sweep_rounds)
    if (n < 1) errors.push_back("experiment.sweep.N: entries must be >= 1");
  if (sc.protocol.round_period <= 0) errors.push_back("protocol.tau: must be > 0");
  if (sc.protocol.timing_tolerance < 0) errors.push_back("protocol.epsilon: must be >= 0");
  if (sc.experiment.trials < 1) errors.push_back("experiment.trials: must be >= 1");
  if (sc.experiment.workers < 1) errors.push_back("experiment.workers: must be >= 1");
  if (!(sc.keys.f_est > 0 && sc.keys.f_est < 1))
    errors.push_back("keys.f_est: must be in (0, 1)");
  if (!(sc.keys.qber_threshold >= 0 && sc.keys.qber_threshold <= 1))
    errors.push_back("keys.qber_threshold: must be in [0, 1]");
  if (sc.adversary.scenario == AdvScenario::II &&
      !(sc.adversary.speed_bound > 0 && sc.adversary.speed_bound <= sc.geometry.c))
    errors.push_back("adversary.v: scenario II requires 0 < v <= geometry.c");
  bool wants_3d = sc.protocol.mode == Mode::ThreeDim;
  if (wants_3d && sc.geometry.dimension != 3)
    errors.push_back("protocol.mode: three_dim requires geometry.dimension = 3");
  if (!wants_3d && sc.geometry.dimension != 1)
    errors.push_back("protocol.mode: one_dim requires geometry.dimension = 1");
  try {
    validate_geometry(sc.geometry);
  } catch (const ConfigError& ex) {
    errors.push_back(std::string("geometry: ") + ex.what());
  }

  if (!errors.empty()) throw ValidationError(std::move(errors));
  return sc;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json g{{"dimension", sc.geometry.dimension}, {"c", sc.geometry.c}};
  g["stations"] = nlohmann::json::array();
  for (const Vec& s : sc.geometry.stations) g["stations"].push_back(s.to_vector());
  g["tag"] = sc.geometry.tag.to_vector();
  if (sc.geometry.tag_extent)
    g["tag_extent"] = std::vector<double>{(*sc.geometry.tag_extent)[0], (*sc.geometry.tag_extent)[1]};

  nlohmann::json p{{"N", sc.protocol.rounds},
                   {"tau", sc.protocol.round_period},
                   {"epsilon", sc.protocol.timing_tolerance},
                   {"authenticate_messages", sc.protocol.authenticate_messages},
                   {"mode", sc.protocol.mode == Mode::OneDim ? "one_dim" : "three_dim"}};

  nlohmann::json k{{"n_raw", sc.keys.n_raw},
                   {"qber_threshold", sc.keys.qber_threshold},
                   {"f_est", sc.keys.f_est}};
  if (sc.keys.initial_key) k["initial_key_hex"] = bits_to_hex(*sc.keys.initial_key);

  nlohmann::json a{{"strategy", strategy_name(sc.adversary.strategy)},
                   {"scenario", sc.adversary.scenario == AdvScenario::I ? "I" : "II"},
                   {"v", sc.adversary.speed_bound},
                   {"can_drop_messages", sc.adversary.can_drop_messages}};
  if (!sc.adversary.displacement.empty()) a["delta"] = sc.adversary.displacement;
  if (sc.adversary.guess_position) a["guess_position"] = *sc.adversary.guess_position;

  nlohmann::json e{{"trials", sc.experiment.trials},
                   {"seed", sc.experiment.seed},
                   {"workers", sc.experiment.workers}};
  if (!sc.experiment.sweep_rounds.empty() || !sc.experiment.sweep_delta.empty()) {
    nlohmann::json sweep = nlohmann::json::object();
    if (!sc.experiment.sweep_rounds.empty()) sweep["N"] = sc.experiment.sweep_rounds;
    if (!sc.experiment.sweep_delta.empty()) sweep["delta"] = sc.experiment.sweep_delta;
    e["sweep"] = sweep;
  }

  return nlohmann::json{{"schema_version", kConfigSchemaVersion},
                        {"geometry", g},
                        {"protocol", p},
                        {"keys", k},
                        {"adversary", a},
                        {"experiment", e}};
}

inline Scenario load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({std::string("parse error: ") + e.what()});
  }
  return scenario_from_json(j);
}

}  // namespace qtag
