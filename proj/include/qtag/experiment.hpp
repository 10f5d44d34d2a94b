#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qtag/rng.hpp"
#include "qtag/scenario.hpp"
#include "qtag/sim.hpp"

namespace qtag {

// Wilson score interval for a binomial proportion.
struct WilsonInterval {
  double lo = 0.0, hi = 1.0;
};

inline WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                      double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  double n = static_cast<double>(trials);
  double p = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2 * n)) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// Analytic reference spoof probability, where the security argument pins
// one down.
inline std::optional<double> exact_spoof_probability(const Scenario& sc) {
  int n = sc.protocol.rounds;
  switch (sc.adversary.strategy) {
    case StrategyKind::None:
      return 1.0;
    case StrategyKind::Guess:
    case StrategyKind::OffTagPrecompute:
    case StrategyKind::InputInjection:
      return std::pow(0.5, n);
    case StrategyKind::Relocation: {
      double moved = 0.0;
      for (double d : sc.adversary.displacement) moved += d * d;
      return moved > 0 ? std::optional<double>(0.0) : std::optional<double>(1.0);
    }
    default:
      return std::nullopt;
  }
}

struct ConfigurationResult {
  Scenario scenario;  // fully resolved (post-sweep) configuration
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double p_hat = 0.0;
  std::optional<double> p_exact;
  WilsonInterval ci;
  double mean_abs_arrival_error = 0.0;
  double max_abs_arrival_error = 0.0;
  double mean_qke_sifted = 0.0;
  double mean_qke_qber = 0.0;
  std::uint64_t qke_sessions = 0;
  double wall_seconds = 0.0;
};

struct ExperimentReport {
  std::vector<ConfigurationResult> rows;
};

// Cartesian expansion over the explicitly listed sweep values.
inline std::vector<Scenario> expand_sweep(const Scenario& base) {
  std::vector<int> rounds = base.experiment.sweep_rounds;
  if (rounds.empty()) rounds = {base.protocol.rounds};
  std::vector<std::vector<double>> deltas;
  if (base.experiment.sweep_delta.empty()) {
    deltas = {base.adversary.displacement};
  } else {
    for (double d : base.experiment.sweep_delta) {
      std::vector<double> v(static_cast<std::size_t>(base.geometry.dimension), 0.0);
      v[0] = d;
      deltas.push_back(v);
    }
  }
  std::vector<Scenario> out;
  for (int n : rounds)
    for (const auto& d : deltas) {
      Scenario sc = base;
      sc.protocol.rounds = n;
      sc.adversary.displacement = d;
      out.push_back(sc);
    }
  return out;
}

// Runs the trials for one resolved configuration.  Trials are independent
// engines with disjoint seed streams; aggregation order is by trial index,
// never by completion order.
inline ConfigurationResult run_configuration(const Scenario& sc, int workers = 1) {
  auto t_start = std::chrono::steady_clock::now();
  ConfigurationResult row;
  row.scenario = sc;
  row.trials = sc.experiment.trials;

  std::uint64_t n = sc.experiment.trials;
  struct Acc {
    std::uint64_t successes = 0;
    double err_sum = 0.0;
    double err_max = 0.0;
    std::uint64_t err_n = 0;
    double sifted_sum = 0.0;
    double qber_sum = 0.0;
    std::uint64_t qke_sessions = 0;
    std::exception_ptr error;
  };
  int nw = std::max(1, workers);
  std::vector<Acc> accs(static_cast<std::size_t>(nw));

  auto work = [&](int w) {
    Acc& acc = accs[static_cast<std::size_t>(w)];
    try {
      for (std::uint64_t i = static_cast<std::uint64_t>(w); i < n;
           i += static_cast<std::uint64_t>(nw)) {
        TrialResult r = run_trial(sc, trial_seed(sc.experiment.seed, i));
        if (spoof_success(r)) ++acc.successes;
        if (r.error_samples) {
          acc.err_sum += r.sum_abs_error_units;
          acc.err_n += r.error_samples;
          acc.err_max = std::max(acc.err_max, units_from_ticks(r.max_abs_error));
        }
        acc.sifted_sum += static_cast<double>(r.qke.sifted_total);
        acc.qber_sum += r.qke.last_qber;
        acc.qke_sessions += static_cast<std::uint64_t>(r.qke.sessions);
      }
    } catch (...) {
      acc.error = std::current_exception();
    }
  };

  if (nw == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  double err_sum = 0, err_max = 0;
  std::uint64_t err_n = 0;
  double sifted_sum = 0, qber_sum = 0;
  for (const Acc& a : accs) {
    if (a.error) std::rethrow_exception(a.error);
    row.successes += a.successes;
    err_sum += a.err_sum;
    err_n += a.err_n;
    err_max = std::max(err_max, a.err_max);
    sifted_sum += a.sifted_sum;
    qber_sum += a.qber_sum;
    row.qke_sessions += a.qke_sessions;
  }
  row.p_hat = n ? static_cast<double>(row.successes) / static_cast<double>(n) : 0.0;
  row.p_exact = exact_spoof_probability(sc);
  row.ci = wilson_interval(row.successes, n);
  row.mean_abs_arrival_error = err_n ? err_sum / static_cast<double>(err_n) : 0.0;
  row.max_abs_arrival_error = err_max;
  row.mean_qke_sifted = n ? sifted_sum / static_cast<double>(n) : 0.0;
  row.mean_qke_qber = n ? qber_sum / static_cast<double>(n) : 0.0;
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return row;
}

inline ExperimentReport run_experiment(const Scenario& base) {
  ExperimentReport rep;
  for (const Scenario& sc : expand_sweep(base))
    rep.rows.push_back(run_configuration(sc, sc.experiment.workers));
  return rep;
}

}  // namespace qtag
