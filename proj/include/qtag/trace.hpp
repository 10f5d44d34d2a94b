#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtag/config.hpp"
#include "qtag/sim.hpp"

namespace qtag {

inline constexpr int kTraceVersion = 1;

struct TracedRun {
  std::vector<std::string> lines;  // header + newline-delimited records
  std::vector<TrialResult> results;
};

// Deterministic traced execution: all trials single-threaded, full record
// stream, no early abort.  Two runs with equal config and seed produce
// bitwise-identical traces.
inline TracedRun run_traced(const Scenario& sc) {
  TracedRun out;
  nlohmann::json header{{"qtag_trace", kTraceVersion},
                        {"config", scenario_to_json(sc)},
                        {"seed", sc.experiment.seed},
                        {"trials", sc.experiment.trials}};
  out.lines.push_back(header.dump());
  for (std::uint64_t i = 0; i < sc.experiment.trials; ++i) {
    std::uint64_t seed = trial_seed(sc.experiment.seed, i);
    out.lines.push_back(nlohmann::json{{"k", "trial"}, {"n", i}, {"seed", seed}}.dump());
    Trace trace;
    out.results.push_back(run_trial(sc, seed, &trace, /*early_abort=*/false));
    for (auto& line : trace.lines) out.lines.push_back(std::move(line));
  }
  return out;
}

inline void write_trace(const TracedRun& run, std::ostream& os) {
  for (const auto& line : run.lines) os << line << "\n";
}

namespace detail {

inline std::optional<Vec> vec_from_json(const nlohmann::json& j) {
  if (!j.is_array()) return std::nullopt;
  return Vec::from(j.get<std::vector<double>>());
}

}  // namespace detail

// Light-cone audit over the trace text itself: every injected send's
// references must lie in the past light cone of its claimed emit event,
// using the origins recorded earlier in the same trial.
inline std::vector<std::string> audit_trace_causality(const std::vector<std::string>& lines,
                                                      const Geometry& geom) {
  std::vector<std::string> violations;
  std::unordered_map<std::string, SpacetimeEvent> origins;
  for (const auto& line : lines) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("k")) continue;
    std::string k = j["k"].get<std::string>();
    if (k == "trial") {
      origins.clear();
      continue;
    }
    if (k != "send") continue;
    auto pos = detail::vec_from_json(j["x"]);
    if (!pos) continue;
    Ticks t = j["t"].get<Ticks>();
    const auto& msg = j["msg"];
    if (msg.contains("datum")) {
      const std::string name = msg["datum"].get<std::string>();
      origins.emplace(name, SpacetimeEvent{t, *pos});
    }
    if (msg.value("injected", false) && msg.contains("refs")) {
      for (const auto& ref : msg["refs"]) {
        const std::string name = ref.get<std::string>();
        auto it = origins.find(name);
        if (it == origins.end()) {
          violations.push_back("record references " + name + " which has no recorded origin");
          continue;
        }
        Ticks needed = it->second.t + geom.propagation_delay(it->second.x, *pos);
        if (t < needed)
          violations.push_back("injection references " + name + " " +
                               std::to_string(needed - t) + " ticks before it is accessible");
      }
    }
  }
  return violations;
}

struct ReplayReport {
  bool version_ok = false;
  bool equal = false;
  std::optional<std::size_t> first_divergence;  // record index into the trace body
  std::vector<std::string> causality_violations;
  std::string error;

  bool ok() const { return version_ok && equal && causality_violations.empty() && error.empty(); }
};

// Re-executes the run embedded in the trace header and compares record by
// record; independently re-audits every adversary injection against the
// recorded ledger origins.
inline ReplayReport replay_trace(std::istream& in) {
  ReplayReport rep;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  if (lines.empty()) {
    rep.error = "empty trace";
    return rep;
  }
  nlohmann::json header = nlohmann::json::parse(lines[0], nullptr, false);
  if (header.is_discarded() || header.value("qtag_trace", -1) != kTraceVersion) {
    rep.error = "unsupported or missing trace version header";
    return rep;
  }
  rep.version_ok = true;

  Scenario sc;
  try {
    sc = scenario_from_json(header.at("config"));
    sc.experiment.seed = header.value("seed", sc.experiment.seed);
  } catch (const std::exception& e) {
    rep.error = std::string("trace header config: ") + e.what();
    return rep;
  }

  TracedRun rerun = run_traced(sc);
  rep.equal = true;
  std::size_t n = std::min(lines.size(), rerun.lines.size());
  for (std::size_t i = 1; i < n; ++i) {
    if (lines[i] != rerun.lines[i]) {
      rep.equal = false;
      rep.first_divergence = i;
      break;
    }
  }
  if (rep.equal && lines.size() != rerun.lines.size()) {
    rep.equal = false;
    rep.first_divergence = n;
  }

  rep.causality_violations = audit_trace_causality(lines, sc.geometry);
  return rep;
}

}  // namespace qtag
